"""Ground-truth engines.

Exact lambda0 by dense eigensolve, an iterative extremal-eigenvalue path for
mid-size instances, the trace-product frustration-freeness test, and the
commutation audit.  Every equivalence claim elsewhere is tested against
these.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from .config import DEFAULT, Tolerances
from .errors import NonCommuting, TooLarge
from .model import CLHInstance, assemble_dense, pair_commutator_norm
from .numerics import apply_local

DENSE_LIMIT = 1 << 12
ITERATIVE_LIMIT = 1 << 20


@dataclass(frozen=True)
class OracleResult:
    lambda0: float
    method: str                 # "dense" | "iterative" | "trace_product"
    dim: int
    ground_degeneracy: int | None = None

    @property
    def is_zero(self) -> bool:
        return self.lambda0 < 0.5


def _apply_h(instance: CLHInstance, mat: np.ndarray) -> np.ndarray:
    regs = list(instance.registers)
    out = np.zeros_like(np.asarray(mat, dtype=complex))
    for t in instance.terms:
        out += apply_local(t.matrix, list(t.support), regs, mat)
    return out


def lambda0_exact(instance: CLHInstance, method: str = "auto",
                  tol: Tolerances = DEFAULT) -> OracleResult:
    """Smallest eigenvalue of the assembled Hamiltonian.

    Dense up to 2^12; iterative (Lanczos on a matvec wrapper) up to 2^20,
    where only the lambda0-is-zero decision is meaningful.
    """
    dim = instance.hilbert_dim
    if method == "auto":
        method = "dense" if dim <= DENSE_LIMIT else "iterative"
    if method == "dense":
        if dim > DENSE_LIMIT:
            raise TooLarge(f"dense path supports dim <= {DENSE_LIMIT}, got {dim}")
        if not instance.terms:
            return OracleResult(0.0, "dense", dim, dim)
        h = assemble_dense(instance)
        w = np.linalg.eigvalsh(h)
        lam = float(w[0])
        degen = int(np.sum(w < lam + 0.5))
        return OracleResult(lam, "dense", dim, degen)
    if method == "iterative":
        if dim > ITERATIVE_LIMIT:
            raise TooLarge(f"iterative path supports dim <= {ITERATIVE_LIMIT}")
        if not instance.terms:
            return OracleResult(0.0, "iterative", dim, None)
        if dim <= 4:
            return lambda0_exact(instance, "dense", tol)
        op = spla.LinearOperator(
            (dim, dim), dtype=complex,
            matvec=lambda v: _apply_h(instance, v))
        w = spla.eigsh(op, k=1, which="SA", tol=1e-8,
                       maxiter=max(2000, 40 * int(np.log2(dim) + 1)),
                       return_eigenvectors=False)
        return OracleResult(float(w[0]), "iterative", dim, None)
    raise ValueError(f"unknown method {method!r}")


def frustration_free_check(instance: CLHInstance, tol: Tolerances = DEFAULT,
                           chunk: int = 512) -> bool:
    """tr prod_j (I - h_j) > eps, computed by streaming the product over
    blocks of basis columns.  Valid for commuting instances only, where the
    trace counts the ground-space dimension."""
    audit_norm, _ = commutation_audit(instance)
    if audit_norm > tol.eps_comm:
        raise NonCommuting(f"instance commutator norm {audit_norm:.3e}")
    dim = instance.hilbert_dim
    regs = list(instance.registers)
    total = 0.0
    for start in range(0, dim, chunk):
        cols = np.zeros((dim, min(chunk, dim - start)), dtype=complex)
        for k in range(cols.shape[1]):
            cols[start + k, k] = 1.0
        block = cols
        for t in instance.terms:
            block = block - apply_local(t.matrix, list(t.support), regs, block)
        k = cols.shape[1]
        total += float(np.real(np.sum(block[start + np.arange(k), np.arange(k)])))
    return total > tol.eps_trace * dim


def commutation_audit(instance: CLHInstance) -> tuple[float, tuple[int, int] | None]:
    """Max pairwise commutator norm over overlapping supports, with the
    offending pair.  Disjoint supports contribute zero without assembly."""
    worst = 0.0
    pair = None
    terms = instance.terms
    for i in range(len(terms)):
        for j in range(i + 1, len(terms)):
            if not set(terms[i].support) & set(terms[j].support):
                continue
            c = pair_commutator_norm(instance, terms[i], terms[j])
            if c > worst:
                worst, pair = c, (terms[i].id, terms[j].id)
    return worst, pair
