"""Jordan decomposition of a projector pair.

Splits the space into one- and two-dimensional subspaces invariant under
both projectors.  Overlap convention: eta_b = |<p_b|q_b>|^2, so that
P Q P = sum_b eta_b |p_b><p_b| and P Q = sum_b sqrt(eta_b) |p_b><q_b|.
Blocks with eta within eps of 0 or 1 are split into (or kept as)
one-dimensional pieces; 1/sqrt(eta) and (1-eta)/sqrt(eta) are singular
there and no downstream formula needs them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import DEFAULT, Tolerances
from .errors import NotProjector
from .numerics import dagger, opnorm, phase_normalize


@dataclass(frozen=True)
class JordanBlock:
    dim: int
    basis: np.ndarray                 # columns spanning the block
    p_vec: np.ndarray | None          # unit vector P projects onto, if any
    q_vec: np.ndarray | None
    eta: float
    qtilde_vec: np.ndarray | None     # component of q orthogonal to p (dim 2)


@dataclass(frozen=True)
class JordanDecomposition:
    blocks: tuple[JordanBlock, ...]
    ambient_dim: int

    def two_dim_blocks(self) -> list[JordanBlock]:
        return [b for b in self.blocks if b.dim == 2]

    def reconstruct_p(self) -> np.ndarray:
        out = np.zeros((self.ambient_dim, self.ambient_dim), dtype=complex)
        for b in self.blocks:
            if b.p_vec is not None:
                out += np.outer(b.p_vec, np.conj(b.p_vec))
        return out

    def reconstruct_q(self) -> np.ndarray:
        out = np.zeros((self.ambient_dim, self.ambient_dim), dtype=complex)
        for b in self.blocks:
            if b.q_vec is not None:
                out += np.outer(b.q_vec, np.conj(b.q_vec))
        return out


def _check_projector(m: np.ndarray, name: str, tol: Tolerances):
    m = np.asarray(m, dtype=complex)
    if opnorm(m - dagger(m)) > tol.scaled(tol.eps_recon, max(opnorm(m), 1.0)):
        raise NotProjector(f"{name} is not Hermitian")
    if opnorm(m @ m - m) > tol.scaled(tol.eps_recon, max(opnorm(m), 1.0)) * 10:
        raise NotProjector(f"{name} is not idempotent")
    return m


def _range_cols(p: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(p)
    return v[:, w > 0.5]


def jordan_decompose(p: np.ndarray, q: np.ndarray,
                     tol: Tolerances = DEFAULT) -> JordanDecomposition:
    """Invariant 1-/2-dim blocks of the projector pair (p, q).

    Eigenvectors of PQP on range(P) with interior eigenvalue eta give the
    p_b; q_b := Q p_b / ||Q p_b||, making <p_b|q_b> = sqrt(eta) real
    positive.  Whatever remains splits into one-dimensional blocks.
    """
    p = _check_projector(p, "P", tol)
    q = _check_projector(q, "Q", tol)
    d = p.shape[0]
    if q.shape != p.shape:
        raise NotProjector(f"shape mismatch {p.shape} vs {q.shape}")
    blocks: list[JordanBlock] = []
    vp = _range_cols(p)
    used = []
    if vp.shape[1]:
        m = dagger(vp) @ q @ vp
        w, u = np.linalg.eigh((m + dagger(m)) / 2)
        for k in range(len(w)):
            eta = float(min(max(w[k], 0.0), 1.0))
            pv = phase_normalize(vp @ u[:, k])
            if eta >= 1 - tol.eps_eig:
                blocks.append(JordanBlock(1, pv[:, None], pv, pv, 1.0, None))
                used.append(pv)
            elif eta <= tol.eps_eig:
                blocks.append(JordanBlock(1, pv[:, None], pv, None, 0.0, None))
                used.append(pv)
            else:
                qv = q @ pv
                qv = qv / np.linalg.norm(qv)
                qt = qv - np.vdot(pv, qv) * pv
                qt = qt / np.linalg.norm(qt)
                basis = np.stack([pv, qt], axis=1)
                blocks.append(JordanBlock(2, basis, pv, qv, eta, qt))
                used.extend([pv, qt])
    # orthocomplement of everything seen so far: P acts as 0 there
    if used:
        um = np.stack(used, axis=1)
        rest_proj = np.identity(d, dtype=complex) - um @ dagger(um)
    else:
        rest_proj = np.identity(d, dtype=complex)
    w, v = np.linalg.eigh(rest_proj)
    rest = v[:, w > 0.5]
    if rest.shape[1]:
        mq = dagger(rest) @ q @ rest
        wq, uq = np.linalg.eigh((mq + dagger(mq)) / 2)
        for k in range(len(wq)):
            vec = phase_normalize(rest @ uq[:, k])
            if wq[k] > 0.5:
                blocks.append(JordanBlock(1, vec[:, None], None, vec, 0.0, None))
            else:
                blocks.append(JordanBlock(1, vec[:, None], None, None, 0.0, None))
    return JordanDecomposition(blocks=tuple(blocks), ambient_dim=d)


def jordan_product_form(dec: JordanDecomposition) -> np.ndarray:
    """P Q rebuilt from the blocks: sum of sqrt(eta_b)|p_b><q_b| plus the
    shared one-dimensional blocks with coefficient one."""
    out = np.zeros((dec.ambient_dim, dec.ambient_dim), dtype=complex)
    for b in dec.blocks:
        if b.dim == 2:
            out += np.sqrt(b.eta) * np.outer(b.p_vec, np.conj(b.q_vec))
        elif b.p_vec is not None and b.q_vec is not None:
            out += np.outer(b.p_vec, np.conj(b.q_vec))
    return out


def invariance_residual(dec: JordanDecomposition, p: np.ndarray,
                        q: np.ndarray) -> float:
    """Max distance of P b, Q b from each block's span over block basis b."""
    worst = 0.0
    for blk in dec.blocks:
        basis = blk.basis
        proj = basis @ dagger(basis)
        for m in (p, q):
            img = m @ basis
            worst = max(worst, opnorm(img - proj @ img))
    return worst


def sqrt_pqp(dec: JordanDecomposition) -> np.ndarray:
    """Matrix square root of PQP: sum sqrt(eta)|p><p| (+ shared blocks)."""
    out = np.zeros((dec.ambient_dim, dec.ambient_dim), dtype=complex)
    for b in dec.blocks:
        if b.p_vec is not None and b.eta > 0:
            out += np.sqrt(b.eta) * np.outer(b.p_vec, np.conj(b.p_vec))
    return out


def qtilde_identity_residual(dec: JordanDecomposition, p: np.ndarray,
                             q: np.ndarray, tol: Tolerances = DEFAULT) -> float:
    """Functional-calculus identity recovering the q-tilde projector sum.

    With r := (QPQ)^(-1/2) on its support (pseudo-inverse square root),
        r - r (QP) - (PQ) r + sqrt(PQP) = sum_{0<eta<1} ((1-eta)/sqrt(eta)) |qt><qt|.
    The middle products normalize PQ's singular values to one; as written
    with bare QP/PQ middle terms the books do not balance.
    """
    d = dec.ambient_dim
    qpq = q @ p @ q
    w, v = np.linalg.eigh((qpq + dagger(qpq)) / 2)
    inv_sqrt = np.zeros((d, d), dtype=complex)
    for k in range(len(w)):
        if w[k] > tol.eps_eig:
            inv_sqrt += (1.0 / np.sqrt(w[k])) * np.outer(v[:, k], np.conj(v[:, k]))
    lhs = inv_sqrt - inv_sqrt @ (q @ p) - (p @ q) @ inv_sqrt + sqrt_pqp(dec)
    rhs = np.zeros((d, d), dtype=complex)
    for b in dec.two_dim_blocks():
        rhs += ((1 - b.eta) / np.sqrt(b.eta)) * np.outer(b.qtilde_vec,
                                                         np.conj(b.qtilde_vec))
    return opnorm(lhs - rhs)
