"""Finite-dimensional *-algebra machinery on a single register.

Induced algebras of terms, closure under products and adjoints, commutant
and center by linear solves, the block/tensor-factor decomposition of a
*-algebra (randomized, with verification and retry), and the classification
of commuting rank-1 projector pairs into singular and reducing cases.

Operators on a dim-D register are vectors in C^(D^2) under the
Hilbert-Schmidt inner product; bases kept orthonormal there.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import DEFAULT, Tolerances
from .errors import (
    NonCommuting,
    NotRank1,
    NumericalFailure,
    OverlapNotSingleton,
    RegisterNotInSupport,
)
from .model import CLHInstance, LocalTerm, incident_terms, pair_commutator_norm
from .numerics import (
    dagger,
    hermitian_eig,
    operator_schmidt,
    opnorm,
    partial_trace,
    phase_normalize,
    random_hermitian,
)

_NULL_CUT = 1e-8


def _vec(ops) -> np.ndarray:
    return np.stack([np.asarray(o, dtype=complex).reshape(-1) for o in ops])


def _unvec(rows: np.ndarray, d: int) -> list[np.ndarray]:
    return [r.reshape(d, d) for r in rows]


def orthonormalize_ops(ops, d: int, cut: float = _NULL_CUT) -> list[np.ndarray]:
    """HS-orthonormal basis of the span of `ops` (SVD-based)."""
    if not ops:
        return []
    m = _vec(ops)
    _, s, vh = np.linalg.svd(m, full_matrices=False)
    keep = s > cut * max(s[0], 1.0) if s.size else []
    return _unvec(vh[keep], d)


def project_out(ops, basis_rows: np.ndarray) -> np.ndarray:
    """Components of `ops` orthogonal to the span given by basis_rows."""
    m = _vec(ops)
    if basis_rows.size == 0:
        return m
    coeff = m @ dagger(basis_rows)
    return m - coeff @ basis_rows


def in_span_residual(op: np.ndarray, basis) -> float:
    """HS-norm of op's component outside span(basis)."""
    rows = _vec(basis) if basis else np.zeros((0, op.size))
    r = project_out([op], rows)
    return float(np.linalg.norm(r))


@dataclass(frozen=True)
class InducedAlgebra:
    register: int
    basis: tuple[np.ndarray, ...]   # HS-orthonormal, spans a unital *-algebra
    generator_terms: tuple[int, ...] = ()

    @property
    def dim(self) -> int:
        return self.basis[0].shape[0] if self.basis else 0

    @property
    def size(self) -> int:
        return len(self.basis)


def algebra_closure(generators, d: int, max_rounds: int = 60) -> list[np.ndarray]:
    """Orthonormal basis of the smallest unital *-algebra containing the
    generators: fixed point of the multiply-and-orthonormalize loop."""
    seed = [np.identity(d, dtype=complex)]
    for g in generators:
        g = np.asarray(g, dtype=complex)
        seed.append(g)
        seed.append(dagger(g))
    basis = orthonormalize_ops(seed, d)
    for _ in range(max_rounds):
        b = np.stack(basis)
        prods = np.einsum("aij,bjk->abik", b, b).reshape(-1, d, d)
        rows = _vec(basis)
        resid = project_out(list(prods), rows)
        _, s, vh = np.linalg.svd(resid, full_matrices=False)
        new = vh[s > _NULL_CUT * max(1.0, s[0] if s.size else 1.0)]
        if new.shape[0] == 0:
            return basis
        basis = orthonormalize_ops(basis + _unvec(new, d), d)
        if len(basis) >= d * d:
            return orthonormalize_ops(basis, d)
    raise NumericalFailure("algebra closure did not stabilize")


def commutant(basis, d: int) -> list[np.ndarray]:
    """Solution space of [X, b] = 0 for all b in basis (row-major vec)."""
    if not basis:
        return _unvec(np.identity(d * d, dtype=complex), d)
    eye = np.identity(d, dtype=complex)
    blocks = [np.kron(b, eye) - np.kron(eye, b.T) for b in basis]
    m = np.vstack(blocks)
    _, s, vh = np.linalg.svd(m)
    null_rows = vh[np.concatenate([s, np.zeros(vh.shape[0] - s.size)]) <= _NULL_CUT]
    return _unvec(null_rows, d)


def center(basis, d: int) -> list[np.ndarray]:
    """Center = elements of the algebra commuting with the whole algebra."""
    n = len(basis)
    if n == 0:
        return []
    cols = []
    for j in range(n):
        col = np.concatenate([(basis[j] @ basis[i] - basis[i] @ basis[j]).reshape(-1)
                              for i in range(n)])
        cols.append(col)
    m = np.stack(cols, axis=1)
    _, s, vh = np.linalg.svd(m, full_matrices=True)
    s_full = np.concatenate([s, np.zeros(vh.shape[0] - s.size)])
    coeffs = vh[s_full <= _NULL_CUT]
    out = []
    for c in np.conj(coeffs):
        out.append(sum(c[j] * basis[j] for j in range(n)))
    return orthonormalize_ops(out, d)


def algebras_commute_residual(basis_a, basis_b) -> float:
    """Max elementwise commutator norm between two operator families."""
    worst = 0.0
    for a in basis_a:
        for b in basis_b:
            worst = max(worst, opnorm(a @ b - b @ a))
    return worst


# ---------------------------------------------------------------------------
# induced algebra of a term on one register

def register_cut(term: LocalTerm, register: int, dims: list[int]) -> np.ndarray:
    """Term matrix with factors permuted so `register` is the leading factor."""
    pos = term.support.index(register)
    n = len(dims)
    t = np.asarray(term.matrix, dtype=complex).reshape(dims + dims)
    order = [pos] + [p for p in range(n) if p != pos]
    t = t.transpose(order + [n + p for p in order])
    total = int(np.prod(dims))
    return t.reshape(total, total)


def induced_algebra(term: LocalTerm, register: int, dims: list[int],
                    tol: Tolerances = DEFAULT) -> InducedAlgebra:
    """Algebra generated on `register` by the term's operator-Schmidt factors
    there, plus identity.  Basis-independent by construction."""
    if register not in term.support:
        raise RegisterNotInSupport(f"register {register} not in support {term.support}")
    pos = term.support.index(register)
    d_reg = dims[pos]
    d_rest = int(np.prod(dims)) // d_reg
    m = register_cut(term, register, dims)
    dec = operator_schmidt(m, d_reg, d_rest, tol)
    basis = algebra_closure(dec.factors_a, d_reg)
    return InducedAlgebra(register=register, basis=tuple(basis),
                          generator_terms=(term.id,))


def joint_algebra(algebras, d: int) -> list[np.ndarray]:
    gens = [b for alg in algebras for b in alg.basis]
    return algebra_closure(gens, d)


# ---------------------------------------------------------------------------
# structure decomposition

@dataclass(frozen=True)
class AlgebraBlock:
    """One direct summand; in the isometry's coordinates every algebra
    element is (operator on factor 1) (x) identity on factor 2."""
    isometry: np.ndarray            # D x (d1*d2), columns orthonormal
    factor_dims: tuple[int, int]

    @property
    def dim(self) -> int:
        return self.isometry.shape[1]

    def projector(self) -> np.ndarray:
        return self.isometry @ dagger(self.isometry)


@dataclass(frozen=True)
class StructureDecomposition:
    blocks: tuple[AlgebraBlock, ...]
    dim: int

    @property
    def block_dims(self) -> tuple[int, ...]:
        return tuple(b.dim for b in self.blocks)

    def block_projectors(self) -> list[np.ndarray]:
        return [b.projector() for b in self.blocks]


def _cluster_eigenspaces(w: np.ndarray, v: np.ndarray, gap: float):
    """Split the eigendecomposition at gaps larger than `gap`."""
    groups = []
    start = 0
    for k in range(1, len(w) + 1):
        if k == len(w) or w[k] - w[k - 1] > gap:
            groups.append(v[:, start:k])
            start = k
    return groups


def _random_hermitian_combo(rng, ops):
    herm = []
    for o in ops:
        herm.append((o + dagger(o)) / 2)
        herm.append((o - dagger(o)) / 2j)
    z = sum(rng.normal() * h for h in herm)
    return (z + dagger(z)) / 2


def _factorize_block(block_cols: np.ndarray, basis, rng,
                     tol: Tolerances) -> AlgebraBlock | None:
    """Find the tensor factorization of one block; None means retry."""
    d_b = block_cols.shape[1]
    restricted = orthonormalize_ops(
        [dagger(block_cols) @ a @ block_cols for a in basis], d_b)
    m = len(restricted)
    d1 = int(round(np.sqrt(m)))
    if d1 * d1 != m or d_b % d1 != 0:
        return None
    d2 = d_b // d1
    if d1 == 1:
        return AlgebraBlock(isometry=block_cols, factor_dims=(1, d_b))
    # generic element of M_d1 (x) I has d1 eigenspaces of dim d2 each
    for _ in range(6):
        z = _random_hermitian_combo(rng, restricted)
        w, v = np.linalg.eigh(z)
        scale = max(np.abs(w).max(), 1.0)
        groups = _cluster_eigenspaces(w, v, 1e-6 * scale)
        if len(groups) == d1 and all(g.shape[1] == d2 for g in groups):
            break
    else:
        return None
    psi = groups[0]                      # |e1> (x) C^d2 in unknown coordinates
    bmat = np.stack(restricted)
    s_cols = np.stack([b @ psi[:, 0] for b in restricted], axis=1)  # d_b x m
    u, sv, wh = np.linalg.svd(s_cols, full_matrices=False)
    rank = int(np.sum(sv > 1e-8 * max(sv[0], 1.0)))
    if rank != d1:
        return None
    xs = []
    for i in range(rank):
        coeff = np.conj(wh[i, :]) / sv[i]
        xs.append(np.tensordot(coeff, bmat, axes=(0, 0)))
    cols = []
    for i in range(d1):
        for k in range(d2):
            cols.append(xs[i] @ psi[:, k])
    w_mat = np.stack(cols, axis=1)
    if opnorm(dagger(w_mat) @ w_mat - np.identity(d1 * d2)) > 1e-7:
        return None
    # verify every algebra element is M (x) I in the new coordinates
    iso = block_cols @ w_mat
    for a in restricted:
        aa = dagger(w_mat) @ a @ w_mat
        m1 = partial_trace(aa, [0], [d1, d2]) / d2
        if opnorm(aa - np.kron(m1, np.identity(d2))) > tol.scaled(1e-7, opnorm(aa)):
            return None
    return AlgebraBlock(isometry=iso, factor_dims=(d1, d2))


def structure_decompose(algebra, d: int | None = None, seed: int = 7,
                        tol: Tolerances = DEFAULT) -> StructureDecomposition:
    """Blocks and in-block tensor factorizations of a *-algebra.

    Accepts an InducedAlgebra or a plain basis list.  Randomized block
    separation with up to five retries; deterministic for a fixed seed.
    """
    if isinstance(algebra, InducedAlgebra):
        basis = list(algebra.basis)
        d = algebra.dim
    else:
        basis = list(algebra)
        if d is None:
            d = basis[0].shape[0]
    cen = center(basis, d)
    n_blocks = len(cen)
    for attempt in range(5):
        rng = np.random.default_rng(seed + attempt)
        if n_blocks == 1:
            groups = [np.identity(d, dtype=complex)]
        else:
            z = _random_hermitian_combo(rng, cen)
            w, v = np.linalg.eigh(z)
            scale = max(np.abs(w).max(), 1.0)
            groups = _cluster_eigenspaces(w, v, 10 * tol.eps_eig * scale)
            if len(groups) != n_blocks:
                continue
        blocks = []
        for g in groups:
            blk = _factorize_block(g, basis, rng, tol)
            if blk is None:
                blocks = None
                break
            blocks.append(blk)
        if blocks is not None:
            blocks.sort(key=lambda b: (-b.dim, -b.factor_dims[0]))
            return StructureDecomposition(blocks=tuple(blocks), dim=d)
    raise NumericalFailure("block separation stayed ambiguous after retries")


# ---------------------------------------------------------------------------
# two commuting terms across one shared register

@dataclass(frozen=True)
class TwoTermStructure:
    decomposition: StructureDecomposition
    h_factors: tuple[np.ndarray | None, ...]   # per block, op on (rest_h x factor1)
    h2_factors: tuple[np.ndarray | None, ...]  # per block, op on (factor2 x rest_h2)
    residuals: tuple[float, ...]


def _shared_register_checks(instance, h, h2, register, tol):
    shared = set(h.support) & set(h2.support)
    if shared != {register}:
        raise OverlapNotSingleton(f"overlap {sorted(shared)} != {{{register}}}")
    c = pair_commutator_norm(instance, h, h2)
    if c > tol.eps_comm:
        raise NonCommuting(f"pair commutator {c:.3e}")


def _conj_register_block(term: LocalTerm, register: int, dims, iso) -> np.ndarray:
    """Term with its register factor conjugated into block coordinates and
    moved to the trailing factor position."""
    pos = term.support.index(register)
    n = len(dims)
    t = np.asarray(term.matrix, dtype=complex).reshape(dims + dims)
    v = np.asarray(iso, dtype=complex)
    t = np.tensordot(np.conj(v.T), t, axes=(1, pos))
    t = np.moveaxis(t, 0, pos)
    t = np.tensordot(t, v, axes=(n + pos, 0))
    t = np.moveaxis(t, -1, n + pos)
    order = [p for p in range(n) if p != pos] + [pos]
    t = t.transpose(order + [n + p for p in order])
    rest = int(np.prod([d for k, d in enumerate(dims) if k != pos])) if n > 1 else 1
    db = v.shape[1]
    return t.reshape(rest * db, rest * db)


def _identity_factor_split(m: np.ndarray, d_left: int, d_right: int, which: str,
                           tol: Tolerances) -> tuple[np.ndarray, float]:
    """Write m on C^(d_left) (x) C^(d_right) as op (x) I or I (x) op."""
    if which == "right_identity":
        red = partial_trace(m, [0], [d_left, d_right]) / d_right
        rebuilt = np.kron(red, np.identity(d_right))
    else:
        red = partial_trace(m, [1], [d_left, d_right]) / d_left
        rebuilt = np.kron(np.identity(d_left), red)
    return red, opnorm(m - rebuilt)


def two_term_structure(instance: CLHInstance, h: LocalTerm, h2: LocalTerm,
                       register: int, tol: Tolerances = DEFAULT) -> TwoTermStructure:
    """Structure decomposition of h's induced algebra on the shared register,
    with h and h2 split onto opposite tensor factors inside every block."""
    _shared_register_checks(instance, h, h2, register, tol)
    dims_h = instance.dims_of(h.support)
    dims_h2 = instance.dims_of(h2.support)
    alg = induced_algebra(h, register, dims_h, tol)
    dec = structure_decompose(alg, tol=tol)
    h_parts, h2_parts, residuals = [], [], []
    for blk in dec.blocks:
        d1, d2 = blk.factor_dims
        rest_h = int(np.prod(dims_h)) // alg.dim
        rest_h2 = int(np.prod(dims_h2)) // alg.dim
        hb = _conj_register_block(h, register, dims_h, blk.isometry)
        h2b = _conj_register_block(h2, register, dims_h2, blk.isometry)
        # hb on rest_h (x) (d1 (x) d2): identity on factor 2
        h_red, r1 = _identity_factor_split(hb, rest_h * d1, d2, "right_identity", tol)
        # h2b on rest_h2 (x) (d1 (x) d2): identity on factor 1; bring d1 out
        h2bt = h2b.reshape(rest_h2, d1, d2, rest_h2, d1, d2)
        h2bt = h2bt.transpose(1, 0, 2, 4, 3, 5).reshape(d1 * rest_h2 * d2,
                                                        d1 * rest_h2 * d2)
        h2_red, r2 = _identity_factor_split(h2bt, d1, rest_h2 * d2, "left_identity", tol)
        h_parts.append(h_red)
        h2_parts.append(h2_red)
        residuals.append(max(r1, r2))
    return TwoTermStructure(decomposition=dec, h_factors=tuple(h_parts),
                            h2_factors=tuple(h2_parts), residuals=tuple(residuals))


# ---------------------------------------------------------------------------
# rank-1 classification

@dataclass(frozen=True)
class Rank1Classification:
    kind: str                      # "singular" | "reducing"
    psi: np.ndarray | None = None  # singular: shared state on the register
    pi: np.ndarray | None = None   # reducing: projector on the register


def rank1_state(term: LocalTerm, tol: Tolerances = DEFAULT) -> np.ndarray:
    eig = hermitian_eig(term.matrix, tol)
    w = eig.eigenvalues
    if np.sum(w > tol.scaled(tol.eps_eig, opnorm(term.matrix))) != 1:
        raise NotRank1(f"term {term.id} has numerical rank != 1")
    return phase_normalize(eig.eigenvectors[:, -1])


def register_span(term: LocalTerm, register: int, dims,
                  tol: Tolerances = DEFAULT) -> np.ndarray:
    """Columns spanning the register-side Schmidt support of a rank-1 term."""
    chi = rank1_state(term, tol)
    pos = term.support.index(register)
    n = len(dims)
    d_reg = dims[pos]
    t = chi.reshape(dims)
    t = np.moveaxis(t, pos, 0).reshape(d_reg, -1)
    u, s, _ = np.linalg.svd(t, full_matrices=False)
    keep = s > tol.scaled(tol.eps_eig, 1.0) ** 0.5
    return u[:, keep]


def rank1_overlap_decompose(instance: CLHInstance, p: LocalTerm, q: LocalTerm,
                            register: int, tol: Tolerances = DEFAULT):
    """(B_P, B_Q, Q-tilde): P's register span, its orthocomplement, and Q's
    action inside B_P (an identity factor there, so a bare operator on the
    rest of Q's support; None when Q vanishes on B_P)."""
    _shared_register_checks(instance, p, q, register, tol)
    dims_p = instance.dims_of(p.support)
    dims_q = instance.dims_of(q.support)
    bp = register_span(p, register, dims_p, tol)
    d_reg = bp.shape[0]
    full = np.identity(d_reg, dtype=complex)
    bq = _orth_complement(bp)
    qb = _conj_register_block(q, register, dims_q, bp)
    rest_q = int(np.prod(dims_q)) // d_reg
    kp = bp.shape[1]
    if opnorm(qb) <= tol.scaled(tol.eps_recon, max(opnorm(q.matrix), 1.0)):
        return bp, bq, None, 0.0
    # inside B_P the restricted Q must be id (x) Q-tilde; move kp out front
    qb_t = qb.reshape(rest_q, kp, rest_q, kp).transpose(1, 0, 3, 2)
    qb_t = qb_t.reshape(kp * rest_q, kp * rest_q)
    q_tilde, resid = _identity_factor_split(qb_t, kp, rest_q, "left_identity", tol)
    return bp, bq, q_tilde, resid


def _orth_complement(cols: np.ndarray) -> np.ndarray:
    d = cols.shape[0]
    proj = np.identity(d, dtype=complex) - cols @ dagger(cols)
    w, v = np.linalg.eigh(proj)
    return v[:, w > 0.5]


def rank1_classify(instance: CLHInstance, p: LocalTerm, q: LocalTerm,
                   register: int, tol: Tolerances = DEFAULT) -> Rank1Classification:
    """Exactly one of: Singular (both terms factor through the same register
    state) or Reducing (the projector onto P's register span annihilates Q)."""
    _shared_register_checks(instance, p, q, register, tol)
    dims_p = instance.dims_of(p.support)
    dims_q = instance.dims_of(q.support)
    rank1_state(q, tol)  # precondition: q is rank 1 too
    d_reg = dims_p[p.support.index(register)]
    if d_reg == 1:
        return Rank1Classification(kind="singular", psi=np.array([1.0 + 0j]))
    bp = register_span(p, register, dims_p, tol)
    qb = _conj_register_block(q, register, dims_q, bp)
    if opnorm(qb) <= tol.scaled(tol.eps_recon, max(opnorm(q.matrix), 1.0)) * 10:
        return Rank1Classification(kind="reducing", pi=bp @ dagger(bp))
    if bp.shape[1] != 1:
        raise NumericalFailure(
            "Q survives on a multi-dimensional P-span; inputs violate the "
            "rank-1 commuting hypotheses")
    bq_span = register_span(q, register, dims_q, tol)
    if bq_span.shape[1] != 1 or abs(np.vdot(bp[:, 0], bq_span[:, 0])) < 1 - 1e-7:
        raise NumericalFailure("register states of P and Q fail to align")
    return Rank1Classification(kind="singular", psi=phase_normalize(bp[:, 0]))


def classification_satisfies(instance: CLHInstance, p: LocalTerm, q: LocalTerm,
                             register: int, cls: Rank1Classification,
                             tol: Tolerances = DEFAULT) -> bool:
    """Check the defining equations of the returned variant directly."""
    dims_p = instance.dims_of(p.support)
    dims_q = instance.dims_of(q.support)
    d_reg = dims_p[p.support.index(register)]
    if cls.kind == "reducing":
        pi = cls.pi
        regs_p = [(s, instance.register_map[s].dim) for s in p.support]
        regs_q = [(s, instance.register_map[s].dim) for s in q.support]
        from .numerics import embed_local
        pi_p = embed_local(pi, [register], regs_p)
        pi_q = embed_local(pi, [register], regs_q)
        return (opnorm(pi_p @ p.matrix @ pi_p - p.matrix) <= 1e-7
                and opnorm(pi_q @ q.matrix @ pi_q) <= 1e-7)
    psi = cls.psi
    if d_reg == 1:
        return True
    for term, dims in ((p, dims_p), (q, dims_q)):
        pos = term.support.index(register)
        chi = rank1_state(term, tol)
        t = np.moveaxis(chi.reshape(dims), pos, 0).reshape(d_reg, -1)
        # chi must equal psi (x) rest
        rest = np.conj(psi) @ t
        rebuilt = np.outer(psi, rest)
        if np.linalg.norm(t - rebuilt) > 1e-7:
            return False
    return True


def brute_force_classify(instance: CLHInstance, p: LocalTerm, q: LocalTerm,
                         register: int, tol: Tolerances = DEFAULT) -> set[str]:
    """Independent checker: search reducing projectors over all block-subset
    projectors of the joint algebra decomposition, and test the singular
    factorization directly.  Returns the set of definitions satisfied."""
    out = set()
    dims_p = instance.dims_of(p.support)
    dims_q = instance.dims_of(q.support)
    d_reg = dims_p[p.support.index(register)]
    # singular: both register marginals pure and aligned
    try:
        sp = register_span(p, register, dims_p, tol)
        sq = register_span(q, register, dims_q, tol)
        if sp.shape[1] == 1 and sq.shape[1] == 1 and \
                abs(np.vdot(sp[:, 0], sq[:, 0])) > 1 - 1e-7:
            out.add("singular")
    except NotRank1:
        pass
    if d_reg == 1:
        out.add("singular")
        return out
    alg_p = induced_algebra(p, register, dims_p, tol)
    alg_q = induced_algebra(q, register, dims_q, tol)
    joint = joint_algebra([alg_p, alg_q], d_reg)
    dec = structure_decompose(joint, d_reg, tol=tol)
    projs = dec.block_projectors()
    from itertools import combinations
    from .numerics import embed_local
    regs_p = [(s, instance.register_map[s].dim) for s in p.support]
    regs_q = [(s, instance.register_map[s].dim) for s in q.support]
    n = len(projs)
    for r in range(1, n + 1):
        for combo in combinations(range(n), r):
            pi = sum(projs[k] for k in combo)
            pi_p = embed_local(pi, [register], regs_p)
            pi_q = embed_local(pi, [register], regs_q)
            if (opnorm(pi_p @ p.matrix @ pi_p - p.matrix) <= 1e-7
                    and opnorm(pi_q @ q.matrix @ pi_q) <= 1e-7):
                out.add("reducing")
                return out
    return out


# ---------------------------------------------------------------------------
# signatures and semi-separable detection

def decomposition_signature(instance: CLHInstance, p: LocalTerm, q: LocalTerm,
                            register: int, tol: Tolerances = DEFAULT) -> tuple[int, ...]:
    """Sorted block dimensions of the joint shared-register decomposition."""
    _shared_register_checks(instance, p, q, register, tol)
    dims_p = instance.dims_of(p.support)
    dims_q = instance.dims_of(q.support)
    d_reg = dims_p[p.support.index(register)]
    alg_p = induced_algebra(p, register, dims_p, tol)
    alg_q = induced_algebra(q, register, dims_q, tol)
    joint = joint_algebra([alg_p, alg_q], d_reg)
    dec = structure_decompose(joint, d_reg, tol=tol)
    return tuple(sorted(dec.block_dims))


@dataclass(frozen=True)
class SemiSeparableWitness:
    register: int
    projectors: tuple[np.ndarray, ...]
    exceptional_term: int


def _decomposition_from_structure(dec: StructureDecomposition):
    """A non-trivial complete orthogonal projector family every algebra
    element is block diagonal for, or None when the algebra is full."""
    if len(dec.blocks) >= 2:
        return tuple(b.projector() for b in dec.blocks)
    blk = dec.blocks[0]
    d1, d2 = blk.factor_dims
    if d2 <= 1:
        return None
    iso = blk.isometry
    projs = []
    for k in range(d2):
        e = np.zeros((d2, d2), dtype=complex)
        e[k, k] = 1
        cols = iso @ np.kron(np.identity(d1), e)
        projs.append(cols @ dagger(cols))
    return tuple(projs)


def detect_semi_separable(instance: CLHInstance, register: int,
                          tol: Tolerances = DEFAULT) -> SemiSeparableWitness | None:
    """First witness (by ascending exceptional-term id) of a non-trivial
    register decomposition preserved by every other incident term."""
    terms = incident_terms(instance, register, tol)
    if len(terms) < 2:
        return None
    d_reg = instance.register_map[register].dim
    if d_reg < 2:
        return None
    for candidate in sorted(terms, key=lambda t: t.id):
        others = [t for t in terms if t.id != candidate.id]
        algebras = [induced_algebra(t, register, instance.dims_of(t.support), tol)
                    for t in others]
        joint = joint_algebra(algebras, d_reg)
        try:
            dec = structure_decompose(joint, d_reg, tol=tol)
        except NumericalFailure:
            continue
        family = _decomposition_from_structure(dec)
        if family is not None:
            return SemiSeparableWitness(register=register, projectors=family,
                                        exceptional_term=candidate.id)
    return None
