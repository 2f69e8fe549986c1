"""CLH instance data model.

Registers, local terms, geometric metadata, validation, degree reports and
JSON serialization for instances and guide strings.  Instances are immutable
in spirit: all transformations return new objects.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .config import DEFAULT, Tolerances
from .errors import ParseError
from .numerics import (
    apply_local,
    dagger,
    embed_local,
    is_hermitian,
    numerical_rank,
    operator_schmidt,
    opnorm,
)


@dataclass(frozen=True)
class QuditRegister:
    id: int
    dim: int


@dataclass(frozen=True)
class LocalTerm:
    id: int
    support: tuple[int, ...]
    matrix: np.ndarray
    declared_rank: int | None = None
    cell: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "support", tuple(self.support))
        object.__setattr__(self, "matrix", np.asarray(self.matrix, dtype=complex))


@dataclass(frozen=True)
class Geometry2D:
    """Polygonal-complex metadata: faces are ordered vertex cycles.

    `qudit_placement` is "vertices" (2D-CLH) or "edges" (starred variant).
    `term_faces` maps term id -> face id; faces map to register-id cycles.
    """
    vertex_coords: dict[int, tuple[int, int]]
    faces: dict[int, tuple[int, ...]]
    term_faces: dict[int, int]
    qudit_placement: str = "vertices"

    def edges(self) -> set[tuple[int, int]]:
        out = set()
        for cyc in self.faces.values():
            for a, b in zip(cyc, cyc[1:] + cyc[:1]):
                out.add((min(a, b), max(a, b)))
        return out


@dataclass(frozen=True)
class Geometry3DCubic:
    """Cubic-lattice metadata: qudits on edges, terms on cubes."""
    extents: tuple[int, int, int]
    edge_registers: dict[int, tuple[str, int, int, int]]  # id -> (axis, x, y, z)
    cube_terms: dict[int, tuple[int, int, int]]           # term id -> cube coords


Geometry = Geometry2D | Geometry3DCubic


@dataclass(frozen=True)
class CLHInstance:
    registers: tuple[QuditRegister, ...]
    terms: tuple[LocalTerm, ...]
    geometry: Geometry | None = None
    provenance: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "registers", tuple(self.registers))
        object.__setattr__(self, "terms", tuple(self.terms))
        object.__setattr__(self, "provenance", tuple(self.provenance))

    @property
    def register_map(self) -> dict[int, QuditRegister]:
        return {r.id: r for r in self.registers}

    def dims_of(self, support) -> list[int]:
        rm = self.register_map
        return [rm[s].dim for s in support]

    @property
    def hilbert_dim(self) -> int:
        d = 1
        for r in self.registers:
            d *= r.dim
        return d

    def term(self, term_id: int) -> LocalTerm:
        for t in self.terms:
            if t.id == term_id:
                return t
        raise KeyError(term_id)

    def with_note(self, note: str) -> "CLHInstance":
        return replace(self, provenance=self.provenance + (note,))


# ---------------------------------------------------------------------------
# support utilities

def support_registers(instance: CLHInstance, support) -> list[QuditRegister]:
    rm = instance.register_map
    return [rm[s] for s in support]


def acts_as_identity_on(term: LocalTerm, register: int, dims: list[int],
                        tol: Tolerances = DEFAULT) -> bool:
    """True when the term's factor on `register` is proportional to identity.

    Detected by checking h == I (x) (tr_r h)/d_r on the register cut.
    """
    if register not in term.support:
        return True
    pos = term.support.index(register)
    d_r = dims[pos]
    m = term.matrix
    n = len(dims)
    t = m.reshape(dims + dims)
    red = np.trace(t, axis1=pos, axis2=pos + n) / d_r
    rest_dims = [d for p, d in enumerate(dims) if p != pos]
    rest = int(np.prod(rest_dims)) if rest_dims else 1
    red = red.reshape(rest, rest)
    # rebuild I (x) red in the original factor order
    order = [p for p in range(n) if p != pos]
    ids_dims = [(0, d_r)] + [(k + 1, rest_dims[k]) for k in range(len(rest_dims))]
    rebuilt = embed_local(red, [k + 1 for k in range(len(rest_dims))], ids_dims)
    # rebuilt has factor order (register, rest...); permute to original
    cur = [pos] + order
    tt = rebuilt.reshape([dims[p] for p in cur] * 2)
    perm = [cur.index(p) for p in range(n)]
    tt = tt.transpose(perm + [n + q for q in perm])
    rebuilt = tt.reshape(m.shape)
    return opnorm(m - rebuilt) <= tol.scaled(tol.eps_recon, opnorm(m))


def nontrivial_support(instance: CLHInstance, term: LocalTerm,
                       tol: Tolerances = DEFAULT) -> tuple[int, ...]:
    dims = instance.dims_of(term.support)
    return tuple(s for s in term.support
                 if not acts_as_identity_on(term, s, dims, tol))


def incident_terms(instance: CLHInstance, register: int,
                   tol: Tolerances = DEFAULT) -> list[LocalTerm]:
    """Terms acting non-identically on the register."""
    out = []
    for t in instance.terms:
        if register in t.support:
            if not acts_as_identity_on(t, register, instance.dims_of(t.support), tol):
                out.append(t)
    return out


def embed_on_union(instance: CLHInstance, term: LocalTerm,
                   union_support: list[int]) -> np.ndarray:
    regs = support_registers(instance, union_support)
    return embed_local(term.matrix, list(term.support), regs)


def pair_commutator_norm(instance: CLHInstance, t1: LocalTerm, t2: LocalTerm) -> float:
    """Commutator norm of two terms embedded on their joint support."""
    shared = set(t1.support) & set(t2.support)
    if not shared:
        return 0.0
    union = sorted(set(t1.support) | set(t2.support))
    a = embed_on_union(instance, t1, union)
    b = embed_on_union(instance, t2, union)
    return opnorm(a @ b - b @ a)


# ---------------------------------------------------------------------------
# validation

@dataclass(frozen=True)
class Violation:
    kind: str
    ids: tuple
    detail: str
    value: float = 0.0


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    def kinds(self) -> set[str]:
        return {v.kind for v in self.violations}


def validate(instance: CLHInstance, tol: Tolerances = DEFAULT) -> ValidationReport:
    """Check every instance and term invariant; violations are data, not errors."""
    out: list[Violation] = []
    seen = set()
    for r in instance.registers:
        if r.id in seen:
            out.append(Violation("duplicate_register", (r.id,), "register id repeated"))
        seen.add(r.id)
        if r.dim < 1:
            out.append(Violation("bad_dimension", (r.id,), f"dim {r.dim} < 1"))
    rm = instance.register_map
    for t in instance.terms:
        if len(set(t.support)) != len(t.support):
            out.append(Violation("support_repeat", (t.id,), "support ids repeat"))
            continue
        missing = [s for s in t.support if s not in rm]
        if missing:
            out.append(Violation("unknown_register", (t.id, tuple(missing)),
                                 "support references absent registers"))
            continue
        dims = instance.dims_of(t.support)
        want = int(np.prod(dims)) if dims else 1
        if t.matrix.shape != (want, want):
            out.append(Violation("matrix_dim", (t.id,),
                                 f"matrix {t.matrix.shape} vs support dim {want}"))
            continue
        nrm = opnorm(t.matrix)
        if not is_hermitian(t.matrix, tol):
            out.append(Violation("not_hermitian", (t.id,),
                                 "term deviates from Hermitian",
                                 opnorm(t.matrix - dagger(t.matrix))))
            continue
        evals = np.linalg.eigvalsh(t.matrix)
        if evals.size and evals[0] < -tol.scaled(tol.eps_eig, nrm):
            out.append(Violation("not_psd", (t.id,), "negative eigenvalue",
                                 float(evals[0])))
        if nrm > 1 + tol.scaled(tol.eps_eig, 1.0):
            out.append(Violation("norm_exceeds_one", (t.id,), "operator norm > 1", nrm))
        if t.declared_rank is not None:
            got = int(np.sum(evals > tol.scaled(tol.eps_eig, nrm)))
            if got != t.declared_rank:
                out.append(Violation("rank_mismatch", (t.id,),
                                     f"declared {t.declared_rank}, numerical {got}"))
    # pairwise commutation on overlapping supports only
    terms = [t for t in instance.terms
             if not any(v.ids[0] == t.id for v in out
                        if v.kind in ("matrix_dim", "unknown_register", "support_repeat"))]
    for i in range(len(terms)):
        for j in range(i + 1, len(terms)):
            t1, t2 = terms[i], terms[j]
            if not set(t1.support) & set(t2.support):
                continue
            c = pair_commutator_norm(instance, t1, t2)
            if c > tol.eps_comm:
                out.append(Violation("non_commuting", (t1.id, t2.id),
                                     "pairwise commutator too large", c))
    return ValidationReport(tuple(out))


# ---------------------------------------------------------------------------
# degree report

@dataclass(frozen=True)
class DegreeReport:
    degrees: dict[int, int]
    max_degree: int


def degree_report(instance: CLHInstance, tol: Tolerances = DEFAULT) -> DegreeReport:
    """Count, per register, the terms acting non-identically on it.

    Identity factors are detected with the operator-Schmidt test, so a term
    that lists a register in its support but acts trivially there does not
    contribute.
    """
    degrees = {r.id: 0 for r in instance.registers}
    for t in instance.terms:
        dims = instance.dims_of(t.support)
        for s in t.support:
            if not acts_as_identity_on(t, s, dims, tol):
                degrees[s] += 1
    return DegreeReport(degrees=degrees,
                        max_degree=max(degrees.values()) if degrees else 0)


# ---------------------------------------------------------------------------
# JSON serialization

def _matrix_to_json(m: np.ndarray) -> dict:
    m = np.asarray(m, dtype=complex)
    return {"dim": m.shape[0],
            "entries": [[float(x.real), float(x.imag)] for x in m.reshape(-1)]}


def _matrix_from_json(obj, where: str) -> np.ndarray:
    if not isinstance(obj, dict) or "dim" not in obj or "entries" not in obj:
        raise ParseError("matrix needs dim and entries", where)
    dim = obj["dim"]
    ent = obj["entries"]
    if not isinstance(dim, int) or dim < 0 or not isinstance(ent, list):
        raise ParseError("bad matrix header", where)
    if len(ent) != dim * dim:
        raise ParseError(f"expected {dim * dim} entries, got {len(ent)}", where)
    vals = []
    for k, pair in enumerate(ent):
        if (not isinstance(pair, list)) or len(pair) != 2:
            raise ParseError("entry must be [re, im]", f"{where}.entries[{k}]")
        vals.append(complex(pair[0], pair[1]))
    return np.array(vals, dtype=complex).reshape(dim, dim)


def _geometry_to_json(g: Geometry | None):
    if g is None:
        return None
    if isinstance(g, Geometry2D):
        return {"variant": "2d",
                "vertex_coords": {str(k): list(v) for k, v in g.vertex_coords.items()},
                "faces": {str(k): list(v) for k, v in g.faces.items()},
                "term_faces": {str(k): v for k, v in g.term_faces.items()},
                "qudit_placement": g.qudit_placement}
    return {"variant": "3d_cubic",
            "extents": list(g.extents),
            "edge_registers": {str(k): list(v) for k, v in g.edge_registers.items()},
            "cube_terms": {str(k): list(v) for k, v in g.cube_terms.items()}}


def _geometry_from_json(obj, where: str) -> Geometry | None:
    if obj is None:
        return None
    variant = obj.get("variant")
    try:
        if variant == "2d":
            return Geometry2D(
                vertex_coords={int(k): tuple(v) for k, v in obj["vertex_coords"].items()},
                faces={int(k): tuple(v) for k, v in obj["faces"].items()},
                term_faces={int(k): int(v) for k, v in obj["term_faces"].items()},
                qudit_placement=obj.get("qudit_placement", "vertices"))
        if variant == "3d_cubic":
            return Geometry3DCubic(
                extents=tuple(obj["extents"]),
                edge_registers={int(k): (v[0], int(v[1]), int(v[2]), int(v[3]))
                                for k, v in obj["edge_registers"].items()},
                cube_terms={int(k): tuple(int(x) for x in v)
                            for k, v in obj["cube_terms"].items()})
    except (KeyError, TypeError, ValueError) as e:
        raise ParseError(f"bad geometry: {e}", where) from None
    raise ParseError(f"unknown geometry variant {variant!r}", where)


def instance_to_json(instance: CLHInstance) -> dict:
    return {
        "version": 1,
        "registers": [{"id": r.id, "dim": r.dim} for r in instance.registers],
        "terms": [{"id": t.id,
                   "support": list(t.support),
                   "matrix": _matrix_to_json(t.matrix),
                   "rank": t.declared_rank,
                   "cell": t.cell}
                  for t in instance.terms],
        "geometry": _geometry_to_json(instance.geometry),
        "provenance": list(instance.provenance),
    }


def instance_from_json(obj) -> CLHInstance:
    if not isinstance(obj, dict):
        raise ParseError("top level must be an object")
    if obj.get("version") != 1:
        raise ParseError(f"unsupported version {obj.get('version')!r}", "$.version")
    try:
        registers = tuple(QuditRegister(id=int(r["id"]), dim=int(r["dim"]))
                          for r in obj["registers"])
    except (KeyError, TypeError, ValueError) as e:
        raise ParseError(f"bad registers: {e}", "$.registers") from None
    terms = []
    for k, t in enumerate(obj.get("terms", [])):
        where = f"$.terms[{k}]"
        try:
            support = tuple(int(s) for s in t["support"])
            tid = int(t["id"])
        except (KeyError, TypeError, ValueError) as e:
            raise ParseError(f"bad term header: {e}", where) from None
        m = _matrix_from_json(t.get("matrix"), where + ".matrix")
        rank = t.get("rank")
        if rank is not None:
            rank = int(rank)
        terms.append(LocalTerm(id=tid, support=support, matrix=m,
                               declared_rank=rank, cell=t.get("cell")))
    geometry = _geometry_from_json(obj.get("geometry"), "$.geometry")
    prov = tuple(str(p) for p in obj.get("provenance", []))
    return CLHInstance(registers=registers, terms=tuple(terms),
                       geometry=geometry, provenance=prov)


def serialize(obj) -> bytes:
    """Instance or GuideString to canonical JSON bytes (bit-exact floats)."""
    from .guides import GuideString, guide_to_json
    if isinstance(obj, CLHInstance):
        payload = instance_to_json(obj)
    elif isinstance(obj, GuideString):
        payload = guide_to_json(obj)
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")
    return json.dumps(payload, indent=1, sort_keys=False).encode()


def deserialize(data: bytes):
    """Parse bytes back into a CLHInstance or GuideString."""
    from .guides import guide_from_json
    try:
        obj = json.loads(data.decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ParseError(str(e)) from None
    if isinstance(obj, dict) and "moves" in obj:
        return guide_from_json(obj)
    return instance_from_json(obj)


# ---------------------------------------------------------------------------
# register surgery shared by the rounding operations

def fresh_register_id(instance: CLHInstance) -> int:
    return max((r.id for r in instance.registers), default=-1) + 1


def fresh_term_id(instance: CLHInstance) -> int:
    return max((t.id for t in instance.terms), default=-1) + 1


def conjugate_register(term: LocalTerm, register: int, dims: list[int],
                       isometry: np.ndarray) -> np.ndarray:
    """(I (x) V)^dag  h  (I (x) V) with V applied on `register`'s factor.

    Returns the matrix on the same support ordering with the register's
    dimension replaced by isometry.shape[1].
    """
    pos = term.support.index(register)
    n = len(dims)
    t = term.matrix.reshape(dims + dims)
    v = np.asarray(isometry, dtype=complex)
    t = np.tensordot(np.conj(v.T), t, axes=(1, pos))       # new ket axis leads
    t = np.moveaxis(t, 0, pos)
    t = np.tensordot(t, v, axes=(n + pos, 0))              # bra axis trails
    t = np.moveaxis(t, -1, n + pos)
    new_dims = list(dims)
    new_dims[pos] = v.shape[1]
    total = int(np.prod(new_dims))
    return t.reshape(total, total)


def restrict_register(instance: CLHInstance, register: int,
                      isometry: np.ndarray, note: str) -> CLHInstance:
    """Restrict one register's space through a column-orthonormal isometry.

    Terms not touching the register pass through unchanged; a dimension-1
    restriction removes the register from supports and from the instance.
    """
    v = np.asarray(isometry, dtype=complex)
    new_dim = v.shape[1]
    new_terms = []
    for t in instance.terms:
        if register not in t.support:
            new_terms.append(t)
            continue
        dims = instance.dims_of(t.support)
        m = conjugate_register(t, register, dims, v)
        if new_dim == 1:
            support = tuple(s for s in t.support if s != register)
        else:
            support = t.support
        new_terms.append(LocalTerm(id=t.id, support=support, matrix=m,
                                   declared_rank=None, cell=t.cell))
    if new_dim == 1:
        regs = tuple(r for r in instance.registers if r.id != register)
    else:
        regs = tuple(r if r.id != register else QuditRegister(r.id, new_dim)
                     for r in instance.registers)
    return CLHInstance(registers=regs, terms=tuple(new_terms),
                       geometry=None, provenance=instance.provenance + (note,))


def drop_terms(instance: CLHInstance, term_ids, note: str | None = None) -> CLHInstance:
    term_ids = set(term_ids)
    prov = instance.provenance + ((note,) if note else ())
    return CLHInstance(registers=instance.registers,
                       terms=tuple(t for t in instance.terms if t.id not in term_ids),
                       geometry=instance.geometry, provenance=prov)


def canonical_unsat(note: str) -> CLHInstance:
    """Single dim-1 register carrying an identity term: lambda0 = 1 always."""
    return CLHInstance(
        registers=(QuditRegister(0, 1),),
        terms=(LocalTerm(0, (0,), np.array([[1.0 + 0j]])),),
        geometry=None,
        provenance=(note,))


def assemble_dense(instance: CLHInstance) -> np.ndarray:
    """Full Hamiltonian as a dense matrix (desk scale only)."""
    dim = instance.hilbert_dim
    regs = list(instance.registers)
    h = np.zeros((dim, dim), dtype=complex)
    for t in instance.terms:
        h += embed_local(t.matrix, list(t.support), regs)
    return h


def apply_term(instance: CLHInstance, term: LocalTerm, mat: np.ndarray) -> np.ndarray:
    return apply_local(term.matrix, list(term.support), list(instance.registers), mat)
