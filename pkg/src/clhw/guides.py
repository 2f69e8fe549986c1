"""Prover witnesses: guide strings and their JSON wire format.

A guide is an ordered list of moves; each move names the rounding operation
the verifier should apply and carries the projector or index payload that
drives it.  Every projector payload is re-validated by the verifier before
use.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import DEFAULT, Tolerances
from .errors import ParseError
from .numerics import dagger, opnorm


@dataclass(frozen=True)
class TwoLocalRound:
    register: int
    block_index: int
    op = "two_local_round"


@dataclass(frozen=True)
class Rank1Round:
    register: int
    pi_p: np.ndarray
    pi_q: np.ndarray
    op = "rank1_round"


@dataclass(frozen=True)
class ClassicalRestrict:
    register: int
    basis_index: int
    basis: np.ndarray  # unitary whose columns are the invariant 1-dim family
    op = "classical_restrict"


@dataclass(frozen=True)
class SemiSepBranch:
    register: int
    branch_index: int
    decomposition: tuple[np.ndarray, ...]  # orthogonal complete projector family
    exceptional_term: int = -1
    op = "semi_sep_branch"


@dataclass(frozen=True)
class PunctureChoice:
    register: int
    p_block: int
    q_block: int
    op = "puncture_choice"


Move = TwoLocalRound | Rank1Round | ClassicalRestrict | SemiSepBranch | PunctureChoice


@dataclass(frozen=True)
class GuideString:
    moves: tuple[Move, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "moves", tuple(self.moves))

    def check_payloads(self, tol: Tolerances = DEFAULT) -> list[str]:
        """Every projector payload must be Hermitian idempotent."""
        problems = []
        for k, mv in enumerate(self.moves):
            for name, mat in _projector_payloads(mv):
                mat = np.asarray(mat, dtype=complex)
                if opnorm(mat - dagger(mat)) > tol.scaled(tol.eps_recon, opnorm(mat)):
                    problems.append(f"move {k}: {name} not Hermitian")
                elif opnorm(mat @ mat - mat) > tol.scaled(tol.eps_recon, 1.0):
                    problems.append(f"move {k}: {name} not idempotent")
        return problems


def _projector_payloads(mv: Move):
    if isinstance(mv, Rank1Round):
        yield "pi_p", mv.pi_p
        yield "pi_q", mv.pi_q
    elif isinstance(mv, SemiSepBranch):
        for k, p in enumerate(mv.decomposition):
            yield f"decomposition[{k}]", p


def _mat_json(m) -> dict:
    m = np.asarray(m, dtype=complex)
    return {"dim": m.shape[0],
            "entries": [[float(x.real), float(x.imag)] for x in m.reshape(-1)]}


def _mat_parse(obj, where):
    from .model import _matrix_from_json
    return _matrix_from_json(obj, where)


def guide_to_json(guide: GuideString) -> dict:
    moves = []
    for mv in guide.moves:
        if isinstance(mv, TwoLocalRound):
            moves.append({"op": mv.op, "register": mv.register,
                          "block_index": mv.block_index})
        elif isinstance(mv, Rank1Round):
            moves.append({"op": mv.op, "register": mv.register,
                          "pi_p": _mat_json(mv.pi_p), "pi_q": _mat_json(mv.pi_q)})
        elif isinstance(mv, ClassicalRestrict):
            moves.append({"op": mv.op, "register": mv.register,
                          "basis_index": mv.basis_index, "basis": _mat_json(mv.basis)})
        elif isinstance(mv, SemiSepBranch):
            moves.append({"op": mv.op, "register": mv.register,
                          "branch_index": mv.branch_index,
                          "exceptional_term": mv.exceptional_term,
                          "decomposition": [_mat_json(p) for p in mv.decomposition]})
        elif isinstance(mv, PunctureChoice):
            moves.append({"op": mv.op, "register": mv.register,
                          "p_block": mv.p_block, "q_block": mv.q_block})
        else:
            raise TypeError(f"unknown move {mv!r}")
    return {"version": 1, "moves": moves}


def guide_from_json(obj) -> GuideString:
    if not isinstance(obj, dict) or obj.get("version") != 1:
        raise ParseError("guide needs version 1", "$.version")
    moves = []
    for k, mv in enumerate(obj.get("moves", [])):
        where = f"$.moves[{k}]"
        if not isinstance(mv, dict) or "op" not in mv:
            raise ParseError("move needs an op", where)
        op = mv["op"]
        try:
            if op == "two_local_round":
                moves.append(TwoLocalRound(int(mv["register"]), int(mv["block_index"])))
            elif op == "rank1_round":
                moves.append(Rank1Round(int(mv["register"]),
                                        _mat_parse(mv["pi_p"], where + ".pi_p"),
                                        _mat_parse(mv["pi_q"], where + ".pi_q")))
            elif op == "classical_restrict":
                moves.append(ClassicalRestrict(int(mv["register"]),
                                               int(mv["basis_index"]),
                                               _mat_parse(mv["basis"], where + ".basis")))
            elif op == "semi_sep_branch":
                moves.append(SemiSepBranch(
                    int(mv["register"]), int(mv["branch_index"]),
                    tuple(_mat_parse(p, f"{where}.decomposition[{i}]")
                          for i, p in enumerate(mv["decomposition"])),
                    int(mv.get("exceptional_term", -1))))
            elif op == "puncture_choice":
                moves.append(PunctureChoice(int(mv["register"]),
                                            int(mv["p_block"]), int(mv["q_block"])))
            else:
                raise ParseError(f"unknown op {op!r}", where)
        except (KeyError, TypeError, ValueError) as e:
            raise ParseError(f"bad move payload: {e}", where) from None
    return GuideString(moves=tuple(moves))
