"""Dense complex-matrix primitives.

Everything downstream is built on five operations: Hermitian
eigendecomposition, operator-Schmidt decomposition across a bipartite cut,
spectral rounding to the positive-eigenvalue projector, embedding a local
operator into a larger register list, and the partial trace.

Matrices are numpy complex128 arrays in row-major layout.  Norms written
``opnorm`` are spectral (largest singular value).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import DEFAULT, Tolerances
from .errors import DimensionMismatch, NotHermitian, NotPSD, UnknownRegister


def opnorm(m: np.ndarray) -> float:
    """Spectral norm; cheap exact computation for the small dense matrices
    this library works with."""
    if m.size == 0:
        return 0.0
    return float(np.linalg.norm(np.asarray(m), 2))


def dagger(m: np.ndarray) -> np.ndarray:
    return np.conj(m.T)


def is_hermitian(m: np.ndarray, tol: Tolerances = DEFAULT) -> bool:
    m = np.asarray(m)
    return opnorm(m - dagger(m)) <= tol.scaled(tol.eps_herm, opnorm(m))


def hs_inner(a: np.ndarray, b: np.ndarray) -> complex:
    """Hilbert-Schmidt inner product <a, b> = tr(a^dag b)."""
    return complex(np.vdot(a, b))


def commutator_norm(a: np.ndarray, b: np.ndarray) -> float:
    return opnorm(a @ b - b @ a)


def phase_normalize(v: np.ndarray, cutoff: float = 1e-8) -> np.ndarray:
    """Rotate a vector's global phase so its first non-negligible entry is
    real positive.  Deterministic output for serialization and tests."""
    v = np.asarray(v)
    mags = np.abs(v)
    big = np.nonzero(mags > cutoff * max(mags.max(), 1e-300))[0]
    if big.size == 0:
        return v
    lead = v[big[0]]
    return v * (np.conj(lead) / abs(lead))


@dataclass(frozen=True)
class HermitianEig:
    eigenvalues: np.ndarray   # real, ascending
    eigenvectors: np.ndarray  # column-orthonormal


def hermitian_eig(m: np.ndarray, tol: Tolerances = DEFAULT) -> HermitianEig:
    """Eigendecomposition of a Hermitian matrix with deterministic phases.

    Eigenvalues ascend; each eigenvector's leading significant component is
    phase-normalized to real positive.
    """
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"expected square matrix, got {m.shape}")
    if not is_hermitian(m, tol):
        raise NotHermitian(f"matrix deviates from Hermitian by {opnorm(m - dagger(m)):.3e}")
    w, v = np.linalg.eigh((m + dagger(m)) / 2)
    v = np.column_stack([phase_normalize(v[:, k]) for k in range(v.shape[1])])
    return HermitianEig(eigenvalues=w, eigenvectors=v)


@dataclass(frozen=True)
class OperatorSchmidt:
    """M = sum_i c_i A_i (x) B_i with HS-orthonormal factors on each side."""
    coefficients: np.ndarray       # nonnegative, descending
    factors_a: list[np.ndarray]    # dA x dA each
    factors_b: list[np.ndarray]    # dB x dB each
    dims: tuple[int, int]

    def reconstruct(self) -> np.ndarray:
        da, db = self.dims
        out = np.zeros((da * db, da * db), dtype=complex)
        for c, a, b in zip(self.coefficients, self.factors_a, self.factors_b):
            out += c * np.kron(a, b)
        return out


def operator_schmidt(m: np.ndarray, da: int, db: int,
                     tol: Tolerances = DEFAULT) -> OperatorSchmidt:
    """Operator-Schmidt decomposition of m across the (da, db) cut.

    Reshuffles m into the da^2 x db^2 matrix of cross blocks and takes an
    SVD; singular vectors reshape back into HS-orthonormal operator factors.
    """
    m = np.asarray(m, dtype=complex)
    if m.shape != (da * db, da * db):
        raise DimensionMismatch(f"matrix shape {m.shape} incompatible with cut ({da},{db})")
    # axes: (a_ket, b_ket, a_bra, b_bra) -> (a_ket, a_bra, b_ket, b_bra)
    t = m.reshape(da, db, da, db).transpose(0, 2, 1, 3).reshape(da * da, db * db)
    u, s, vh = np.linalg.svd(t, full_matrices=False)
    cutoff = tol.scaled(tol.eps_recon, opnorm(m))
    keep = s > cutoff
    coeffs = s[keep]
    fa = [u[:, k].reshape(da, da) for k in np.nonzero(keep)[0]]
    fb = [vh[k, :].reshape(db, db) for k in np.nonzero(keep)[0]]
    return OperatorSchmidt(coefficients=coeffs, factors_a=fa, factors_b=fb, dims=(da, db))


def round_spectrum(b: np.ndarray, tol: Tolerances = DEFAULT) -> np.ndarray:
    """Project onto the span of eigenvectors of b with eigenvalue above the
    PSD cutoff.  b must be Hermitian PSD up to tolerance."""
    b = np.asarray(b, dtype=complex)
    eig = hermitian_eig(b, tol)
    cut = tol.scaled(tol.eps_eig, opnorm(b))
    if eig.eigenvalues.size and eig.eigenvalues[0] < -cut:
        raise NotPSD(f"min eigenvalue {eig.eigenvalues[0]:.3e} below -{cut:.3e}")
    cols = eig.eigenvectors[:, eig.eigenvalues > cut]
    return cols @ dagger(cols)


def round_keep_top(b: np.ndarray, top: float, rel_slack: float = 1e-6,
                   tol: Tolerances = DEFAULT) -> np.ndarray:
    """Projector onto the eigenspace of b with eigenvalue >= top*(1 - slack).

    Realizes the rounding that keeps only the maximal (nominally exact-1
    after scaling) eigenvalues and sends everything smaller to zero.
    """
    b = np.asarray(b, dtype=complex)
    eig = hermitian_eig(b, tol)
    cols = eig.eigenvectors[:, eig.eigenvalues >= top * (1.0 - rel_slack)]
    return cols @ dagger(cols)


def numerical_rank(m: np.ndarray, tol: Tolerances = DEFAULT) -> int:
    w = np.linalg.eigvalsh(np.asarray(m, dtype=complex))
    return int(np.sum(np.abs(w) > tol.scaled(tol.eps_eig, opnorm(m))))


# ---------------------------------------------------------------------------
# embedding and partial traces

def embed_local(op: np.ndarray, support: list[int], registers) -> np.ndarray:
    """op (x) identity on the complement, factors in global register order.

    `support` lists register ids in the order of op's tensor factors;
    `registers` is the full ordered register list (objects with .id/.dim or
    (id, dim) pairs).
    """
    ids, dims = _ids_dims(registers)
    index = {rid: k for k, rid in enumerate(ids)}
    if len(set(support)) != len(support):
        raise DimensionMismatch("support ids must be distinct")
    try:
        sup_pos = [index[s] for s in support]
    except KeyError as e:
        raise UnknownRegister(f"register {e.args[0]} not present") from None
    sup_dims = [dims[p] for p in sup_pos]
    op = np.asarray(op, dtype=complex)
    if op.shape != (int(np.prod(sup_dims, dtype=object)),) * 2:
        raise DimensionMismatch(
            f"op dim {op.shape} != product of support dims {sup_dims}")
    rest_pos = [p for p in range(len(dims)) if p not in sup_pos]
    rest_dims = [dims[p] for p in rest_pos]
    rest = int(np.prod(rest_dims)) if rest_dims else 1
    full = np.kron(op, np.identity(rest, dtype=complex))
    # current factor order is sup_pos + rest_pos; permute to global order
    cur = sup_pos + rest_pos
    n = len(dims)
    cur_dims = [dims[p] for p in cur]
    t = full.reshape(cur_dims + cur_dims)
    perm = list(np.argsort(cur))
    t = t.transpose(perm + [n + p for p in perm])
    total = int(np.prod(dims)) if dims else 1
    return np.ascontiguousarray(t.reshape(total, total))


def _ids_dims(registers):
    ids, dims = [], []
    for r in registers:
        if hasattr(r, "id"):
            ids.append(r.id)
            dims.append(r.dim)
        else:
            ids.append(r[0])
            dims.append(r[1])
    return ids, dims


def apply_local(op: np.ndarray, support: list[int], registers,
                mat: np.ndarray) -> np.ndarray:
    """Apply (op (x) identity) to each column of `mat` without forming the
    embedded operator.  `mat` has shape (total_dim, k) or (total_dim,)."""
    ids, dims = _ids_dims(registers)
    index = {rid: p for p, rid in enumerate(ids)}
    sup_pos = [index[s] for s in support]
    sup_dims = [dims[p] for p in sup_pos]
    op = np.asarray(op, dtype=complex)
    mat = np.asarray(mat, dtype=complex)
    squeeze = mat.ndim == 1
    if squeeze:
        mat = mat[:, None]
    k = mat.shape[1]
    t = mat.reshape(dims + [k])
    opt = op.reshape(sup_dims + sup_dims)
    nsup = len(sup_pos)
    t = np.tensordot(opt, t, axes=(list(range(nsup, 2 * nsup)), sup_pos))
    # tensordot leaves the support axes leading; move them back into place
    rest = [p for p in range(len(dims)) if p not in sup_pos]
    cur = sup_pos + rest
    perm = [cur.index(p) for p in range(len(dims))] + [len(dims)]
    out = t.transpose(perm)
    total = int(np.prod(dims)) if dims else 1
    out = out.reshape(total, k)
    return out[:, 0] if squeeze else out


def partial_trace(m: np.ndarray, keep: list[int], dims: list[int]) -> np.ndarray:
    """Trace out all factors not listed in `keep` (indices into dims)."""
    m = np.asarray(m, dtype=complex)
    total = int(np.prod(dims))
    if m.shape != (total, total):
        raise DimensionMismatch(f"matrix shape {m.shape} vs dims {dims}")
    n = len(dims)
    keep = list(keep)
    t = m.reshape(dims + dims)
    traced = [p for p in range(n) if p not in keep]
    for p in sorted(traced, reverse=True):
        t = np.trace(t, axis1=p, axis2=p + (t.ndim // 2))
    kd = int(np.prod([dims[p] for p in keep])) if keep else 1
    return t.reshape(kd, kd)


def trace_inner_register(m: np.ndarray, pos: int, dims: list[int],
                         vec: np.ndarray) -> np.ndarray:
    """<vec| m |vec> contracted on factor `pos`; returns operator on the rest."""
    m = np.asarray(m, dtype=complex)
    n = len(dims)
    t = m.reshape(dims + dims)
    t = np.tensordot(np.conj(vec), t, axes=(0, pos))
    # ket side factor pos removed; bra side now at index (n - 1) + pos
    t = np.tensordot(t, vec, axes=((n - 1) + pos, 0))
    rest = int(np.prod([d for p, d in enumerate(dims) if p != pos])) if n > 1 else 1
    return t.reshape(rest, rest)


def kron_all(mats: list[np.ndarray]) -> np.ndarray:
    out = np.array([[1.0 + 0j]])
    for m in mats:
        out = np.kron(out, m)
    return out


# ---------------------------------------------------------------------------
# random ensembles (seeded; used by generators and tests)

def haar_unitary(rng: np.random.Generator, d: int) -> np.ndarray:
    z = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_state(rng: np.random.Generator, d: int) -> np.ndarray:
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return phase_normalize(v / np.linalg.norm(v))


def random_hermitian(rng: np.random.Generator, d: int) -> np.ndarray:
    z = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return (z + dagger(z)) / 2


def random_projector(rng: np.random.Generator, d: int, rank: int) -> np.ndarray:
    u = haar_unitary(rng, d)
    cols = u[:, :rank]
    return cols @ dagger(cols)
