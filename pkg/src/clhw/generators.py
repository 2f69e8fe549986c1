"""Seeded instance generators.

The grid builders place qudits on vertices and one term per unit face (the
non-starred 2D convention); a flag switches to edge placement for geometry
metadata.  Product-state constructions assign every term a basis vector per
supported register drawn from a per-register local frame: any two such terms
commute automatically (equal or orthogonal factors), while the choice of
indices at a shared vertex controls whether a pair commutes in a singular
(same index) or reducing (different index) way.
"""

from __future__ import annotations

import numpy as np

from .config import DEFAULT, Tolerances
from .errors import InsufficientDimension
from .model import (
    CLHInstance,
    Geometry2D,
    Geometry3DCubic,
    LocalTerm,
    QuditRegister,
)
from .numerics import dagger, haar_unitary, phase_normalize, random_state


# ---------------------------------------------------------------------------
# geometry builders

def grid_2d(rows: int, cols: int, dim: int = 2,
            placement: str = "vertices") -> tuple[tuple[QuditRegister, ...], Geometry2D]:
    """rows x cols faces; vertices are the (rows+1) x (cols+1) lattice points."""
    def vid(r, c):
        return r * (cols + 1) + c

    coords = {vid(r, c): (r, c) for r in range(rows + 1) for c in range(cols + 1)}
    faces = {}
    term_faces = {}
    for r in range(rows):
        for c in range(cols):
            f = r * cols + c
            faces[f] = (vid(r, c), vid(r, c + 1), vid(r + 1, c + 1), vid(r + 1, c))
            term_faces[f] = f
    regs = tuple(QuditRegister(id=v, dim=dim) for v in sorted(coords))
    geom = Geometry2D(vertex_coords=coords, faces=faces, term_faces=term_faces,
                      qudit_placement=placement)
    return regs, geom


def wheel_2d(k: int, dim: int = 2) -> tuple[tuple[QuditRegister, ...], Geometry2D]:
    """Degree-k center vertex 0 ringed by vertices 1..k; k triangular faces."""
    coords = {0: (0, 0)}
    for i in range(1, k + 1):
        coords[i] = (1, i)
    faces = {}
    for i in range(k):
        a = 1 + i
        b = 1 + ((i + 1) % k)
        faces[i] = (0, a, b)
    regs = tuple(QuditRegister(id=v, dim=dim) for v in sorted(coords))
    geom = Geometry2D(vertex_coords=coords, faces=faces,
                      term_faces={i: i for i in range(k)},
                      qudit_placement="vertices")
    return regs, geom


def cubic_slice_3d(dim: int = 2) -> tuple[tuple[QuditRegister, ...], Geometry3DCubic]:
    """A minimal 2x2x1 block of cubes around one interior edge (register 0).

    Register ids beyond 0 are the other edges each cube term touches in the
    reduced mock; the geometry records only the incidence needed by the
    slice-puncture tests.
    """
    # edge 0 is the shared central edge; edges 1..8 are per-cube private /
    # face-shared edges (two per adjacent cube pair).
    edge_registers = {0: ("z", 1, 1, 0)}
    for e in range(1, 9):
        edge_registers[e] = ("x", e, 0, 0)
    cube_terms = {0: (0, 0, 0), 1: (1, 0, 0), 2: (1, 1, 0), 3: (0, 1, 0)}
    regs = tuple(QuditRegister(id=e, dim=dim) for e in sorted(edge_registers))
    return regs, Geometry3DCubic(extents=(2, 2, 1),
                                 edge_registers=edge_registers,
                                 cube_terms=cube_terms)


# ---------------------------------------------------------------------------
# frame machinery

def _frames(rng, registers, rotate: bool):
    out = {}
    for r in registers:
        out[r.id] = haar_unitary(rng, r.dim) if rotate else np.identity(r.dim, dtype=complex)
    return out


def _product_term(tid, support, frames, indices, cell=None) -> LocalTerm:
    v = np.array([1.0 + 0j])
    for s in support:
        v = np.kron(v, frames[s][:, indices[s]])
    m = np.outer(v, np.conj(v))
    return LocalTerm(id=tid, support=tuple(support), matrix=m,
                     declared_rank=1, cell=cell)


def interior_vertices(geom: Geometry2D) -> list[int]:
    """Vertices with exactly four incident faces (grid interiors)."""
    count: dict[int, int] = {}
    for cyc in geom.faces.values():
        for v in cyc:
            count[v] = count.get(v, 0) + 1
    return sorted(v for v, c in count.items() if c == 4)


def _faces_at(geom: Geometry2D, v: int) -> list[int]:
    return sorted(f for f, cyc in geom.faces.items() if v in cyc)


def _opposite_pairs_at(geom: Geometry2D, v: int) -> tuple[tuple[int, int], tuple[int, int]]:
    """Split the four faces at v into the two diagonal (vertex-only) pairs."""
    fids = _faces_at(geom, v)
    pairs = []
    for i in range(4):
        for j in range(i + 1, 4):
            shared = set(geom.faces[fids[i]]) & set(geom.faces[fids[j]])
            if shared == {v}:
                pairs.append((fids[i], fids[j]))
    if len(pairs) != 2:
        raise InsufficientDimension(f"vertex {v} lacks two diagonal pairs")
    return pairs[0], pairs[1]


# ---------------------------------------------------------------------------
# generators

def gen_classical(geometry: Geometry2D, seed: int, registers=None,
                  dim: int = 2, sat_witness: bool = False) -> CLHInstance:
    """Each term is |x><x| for a seeded basis string on its support.

    With sat_witness=True, a seeded global assignment g is drawn and every
    term is forced to differ from g somewhere, guaranteeing lambda0 = 0.
    """
    rng = np.random.default_rng(seed)
    if registers is None:
        registers = tuple(QuditRegister(id=v, dim=dim)
                          for v in sorted(geometry.vertex_coords))
    rm = {r.id: r for r in registers}
    g = {r.id: int(rng.integers(r.dim)) for r in registers}
    terms = []
    for tid, f in sorted(geometry.term_faces.items()):
        support = geometry.faces[f]
        idx = {s: int(rng.integers(rm[s].dim)) for s in support}
        if sat_witness and all(idx[s] == g[s] for s in support):
            s0 = support[0]
            idx[s0] = (g[s0] + 1) % rm[s0].dim
        frames = {s: np.identity(rm[s].dim, dtype=complex) for s in support}
        terms.append(_product_term(tid, support, frames, idx, cell=str(f)))
    return CLHInstance(registers=tuple(registers), terms=tuple(terms),
                       geometry=geometry,
                       provenance=(f"gen_classical(seed={seed}, eps=1, delta=1)",))


def gen_singular(geometry: Geometry2D, seed: int, registers=None,
                 dim: int = 2) -> CLHInstance:
    """Every term projects onto the same seeded Haar state per register, so
    all overlapping pairs commute in a singular way."""
    rng = np.random.default_rng(seed)
    if registers is None:
        registers = tuple(QuditRegister(id=v, dim=dim)
                          for v in sorted(geometry.vertex_coords))
    rm = {r.id: r for r in registers}
    if any(r.dim < 2 for r in registers):
        raise InsufficientDimension("gen_singular needs qudit dims >= 2")
    psi = {r.id: random_state(rng, r.dim) for r in registers}
    terms = []
    for tid, f in sorted(geometry.term_faces.items()):
        support = geometry.faces[f]
        v = np.array([1.0 + 0j])
        for s in support:
            v = np.kron(v, psi[s])
        terms.append(LocalTerm(id=tid, support=tuple(support),
                               matrix=np.outer(v, np.conj(v)),
                               declared_rank=1, cell=str(f)))
    return CLHInstance(registers=tuple(registers), terms=tuple(terms),
                       geometry=geometry,
                       provenance=(f"gen_singular(seed={seed}, eps=1, delta=1)",))


def gen_reducing(geometry: Geometry2D, seed: int, registers=None, dim: int = 2,
                 rotate: bool = True) -> CLHInstance:
    """Opposite face pairs at every interior vertex get orthogonal local
    states there, so both diagonal pairs commute in a reducing way."""
    if dim < 2:
        raise InsufficientDimension("gen_reducing needs shared dims >= 2")
    rng = np.random.default_rng(seed)
    if registers is None:
        registers = tuple(QuditRegister(id=v, dim=dim)
                          for v in sorted(geometry.vertex_coords))
    rm = {r.id: r for r in registers}
    frames = _frames(rng, registers, rotate)
    terms = []
    for tid, f in sorted(geometry.term_faces.items()):
        support = geometry.faces[f]
        coords = {s: geometry.vertex_coords[s] for s in support}
        rows = sorted({rc[0] for rc in coords.values()})
        # index = row offset of the vertex within the face: diagonal partners
        # at any shared vertex always land on different offsets
        idx = {s: rows.index(coords[s][0]) % rm[s].dim for s in support}
        terms.append(_product_term(tid, support, frames, idx, cell=str(f)))
    return CLHInstance(registers=tuple(registers), terms=tuple(terms),
                       geometry=geometry,
                       provenance=(f"gen_reducing(seed={seed}, eps=1, delta=1)",))


def gen_mixed(geometry: Geometry2D, seed: int, registers=None, dim: int = 2,
              rotate: bool = True, two_frames: bool = True,
              sat_witness: bool = True) -> CLHInstance:
    """Random singular/reducing relation per diagonal pair at each interior
    vertex.

    With two_frames=True the two diagonal pairs at each interior vertex use
    different seeded frames there, so their block projectors genuinely fail
    to commute and the pair-rounding path is exercised; commutation between
    adjacent faces is enforced through orthogonal indices at their shared
    edge vertex.
    """
    rng = np.random.default_rng(seed)
    if registers is None:
        registers = tuple(QuditRegister(id=v, dim=dim)
                          for v in sorted(geometry.vertex_coords))
    rm = {r.id: r for r in registers}
    if any(r.dim < 2 for r in registers):
        raise InsufficientDimension("gen_mixed needs qudit dims >= 2")
    base = _frames(rng, registers, rotate)
    # frame per (face, vertex): defaults to the register frame
    frame_of: dict[tuple[int, int], np.ndarray] = {}
    index_of: dict[tuple[int, int], int] = {}
    pinned: set[tuple[int, int]] = set()

    for v in interior_vertices(geometry):
        (p1, p2), (q1, q2) = _opposite_pairs_at(geometry, v)
        d = rm[v].dim
        fq = base[v] @ haar_unitary(rng, d) if two_frames else base[v]
        for f in (q1, q2):
            frame_of[(f, v)] = fq
        p_sing = bool(rng.integers(2))
        q_sing = bool(rng.integers(2))
        i0 = int(rng.integers(d))
        index_of[(p1, v)] = i0
        index_of[(p2, v)] = i0 if p_sing else (i0 + 1) % d
        j0 = int(rng.integers(d))
        index_of[(q1, v)] = j0
        index_of[(q2, v)] = j0 if q_sing else (j0 + 1) % d
        pinned.update({(p1, v), (p2, v), (q1, v), (q2, v)})
        if two_frames:
            # adjacent P/Q faces must be orthogonal on their other shared vertex
            for fp in (p1, p2):
                for fq_ in (q1, q2):
                    shared = set(geometry.faces[fp]) & set(geometry.faces[fq_])
                    shared.discard(v)
                    for u in shared:
                        a = index_of.setdefault((fp, u), int(rng.integers(rm[u].dim)))
                        if index_of.get((fq_, u)) is None:
                            index_of[(fq_, u)] = (a + 1) % rm[u].dim
                        pinned.update({(fp, u), (fq_, u)})

    g = {r.id: int(rng.integers(r.dim)) for r in registers}
    terms = []
    for tid, f in sorted(geometry.term_faces.items()):
        support = geometry.faces[f]
        frames = {s: frame_of.get((f, s), base[s]) for s in support}
        idx = {s: index_of.setdefault((f, s), int(rng.integers(rm[s].dim)))
               for s in support}
        if sat_witness:
            # ensure the term misses the global assignment at some free slot
            clash = all(np.allclose(frames[s], base[s]) and idx[s] == g[s]
                        for s in support)
            if clash:
                free = [s for s in support if (f, s) not in pinned]
                s0 = free[0] if free else support[0]
                idx[s0] = (idx[s0] + 1) % rm[s0].dim
                index_of[(f, s0)] = idx[s0]
        terms.append(_product_term(tid, support, frames, idx, cell=str(f)))
    return CLHInstance(registers=tuple(registers), terms=tuple(terms),
                       geometry=geometry,
                       provenance=(f"gen_mixed(seed={seed}, eps=1, delta=1)",))


def gen_conjugated(instance: CLHInstance, seed: int) -> CLHInstance:
    """Conjugate every register by a seeded Haar unitary (seed 0 = identity).

    Commutation, term ranks, the spectrum of H and lambda0 are preserved.
    """
    rng = np.random.default_rng(seed)
    rm = instance.register_map
    if seed == 0:
        us = {r.id: np.identity(r.dim, dtype=complex) for r in instance.registers}
    else:
        us = {r.id: haar_unitary(rng, r.dim) for r in instance.registers}
    terms = []
    for t in instance.terms:
        u = np.array([[1.0 + 0j]])
        for s in t.support:
            u = np.kron(u, us[s])
        terms.append(LocalTerm(id=t.id, support=t.support,
                               matrix=dagger(u) @ t.matrix @ u,
                               declared_rank=t.declared_rank, cell=t.cell))
    return CLHInstance(registers=instance.registers, terms=tuple(terms),
                       geometry=instance.geometry,
                       provenance=instance.provenance + (f"gen_conjugated(seed={seed})",))


def make_unsat(instance: CLHInstance, register: int | None = None,
               conjugate_seed: int | None = None) -> CLHInstance:
    """Pin one register with two orthogonal basis projectors (lambda0 >= 1),
    then optionally hide the basis with a conjugation."""
    if register is None:
        register = instance.registers[0].id
    d = instance.register_map[register].dim
    tid = max(t.id for t in instance.terms) + 1
    e0 = np.zeros((d, d), dtype=complex)
    e0[0, 0] = 1
    e1 = np.zeros((d, d), dtype=complex)
    e1[1, 1] = 1
    out = CLHInstance(
        registers=instance.registers,
        terms=instance.terms + (
            LocalTerm(tid, (register,), e0, declared_rank=1),
            LocalTerm(tid + 1, (register,), e1, declared_rank=1)),
        geometry=instance.geometry,
        provenance=instance.provenance + (f"make_unsat(register={register})",))
    if conjugate_seed is not None:
        out = gen_conjugated(out, conjugate_seed)
    return out


# ---------------------------------------------------------------------------
# standalone commuting rank-1 pairs (classifier corpora)

def make_singular_pair(seed: int, da: int = 2, db: int = 2, dc: int = 2
                       ) -> tuple[CLHInstance, int]:
    """P on (A,B), Q on (B,C), both factoring through the same |psi> on B.

    Returns the instance and the shared register id (1).
    """
    rng = np.random.default_rng(seed)
    psi = random_state(rng, db)
    a = random_state(rng, da)
    c = random_state(rng, dc)
    p = np.outer(np.kron(a, psi), np.conj(np.kron(a, psi)))
    q = np.outer(np.kron(psi, c), np.conj(np.kron(psi, c)))
    inst = CLHInstance(
        registers=(QuditRegister(0, da), QuditRegister(1, db), QuditRegister(2, dc)),
        terms=(LocalTerm(0, (0, 1), p, declared_rank=1),
               LocalTerm(1, (1, 2), q, declared_rank=1)),
        provenance=(f"make_singular_pair(seed={seed})",))
    return inst, 1


def make_reducing_pair(seed: int, da: int = 2, db: int = 3, dc: int = 2,
                       kp: int = 2, kq: int = 1) -> tuple[CLHInstance, int]:
    """P's B-side Schmidt span is a seeded kp-dim subspace, Q's lives in the
    orthocomplement; P and Q annihilate each other on the overlap."""
    if kp + kq > db:
        raise InsufficientDimension(f"need kp+kq <= dB, got {kp}+{kq} > {db}")
    if kp > da or kq > dc:
        raise InsufficientDimension("Schmidt rank cannot exceed the private dim")
    rng = np.random.default_rng(seed)
    u = haar_unitary(rng, db)
    bp = u[:, :kp]
    bq = u[:, kp:kp + kq]
    ua = haar_unitary(rng, da)[:, :kp]
    uc = haar_unitary(rng, dc)[:, :kq]
    wa = rng.normal(size=kp) + 0.5
    wa = np.sqrt(wa * wa / np.sum(wa * wa))
    wc = rng.normal(size=kq) + 0.5
    wc = np.sqrt(wc * wc / np.sum(wc * wc))
    chi_p = np.zeros(da * db, dtype=complex)
    for k in range(kp):
        chi_p += wa[k] * np.kron(ua[:, k], bp[:, k])
    chi_q = np.zeros(db * dc, dtype=complex)
    for k in range(kq):
        chi_q += wc[k] * np.kron(bq[:, k], uc[:, k])
    chi_p = phase_normalize(chi_p / np.linalg.norm(chi_p))
    chi_q = phase_normalize(chi_q / np.linalg.norm(chi_q))
    inst = CLHInstance(
        registers=(QuditRegister(0, da), QuditRegister(1, db), QuditRegister(2, dc)),
        terms=(LocalTerm(0, (0, 1), np.outer(chi_p, np.conj(chi_p)), declared_rank=1),
               LocalTerm(1, (1, 2), np.outer(chi_q, np.conj(chi_q)), declared_rank=1)),
        provenance=(f"make_reducing_pair(seed={seed}, kp={kp}, kq={kq})",))
    return inst, 1
