"""Global tolerance ladder.

All numerical cutoffs used across the library live in a single Tolerances
object so tests can tighten or loosen them uniformly.  Every bound is
relative to the operator norm of the operand, with a floor of 1 so that
near-zero operators are not held to impossible standards.
"""

from __future__ import annotations

from dataclasses import dataclass, replace


@dataclass(frozen=True)
class Tolerances:
    eps_herm: float = 1e-10     # Hermiticity check
    eps_eig: float = 1e-9       # eigenvalue cutoffs (rank, PSD slack)
    eps_recon: float = 1e-9     # reconstruction / residual checks
    eps_comm: float = 1e-8      # pairwise commutator bound
    eps_trace: float = 1e-8     # trace-positivity cutoff, scaled by dim
    eps_vacuous: float = 1e-12  # block-choice overlap below this is vacuous

    def scaled(self, eps: float, norm: float) -> float:
        return eps * max(norm, 1.0)

    def with_(self, **kw) -> "Tolerances":
        return replace(self, **kw)


DEFAULT = Tolerances()
