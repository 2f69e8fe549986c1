"""Puncturing a register: remove or merge the terms acting around it.

The degree-4 engine classifies the two diagonal pairs (via their joint
block decompositions on the register) and dispatches on how many of each
pair survive the chosen blocks:

  (1,1)            pair rounding, one merged term           -> case 2
  one side empty   pair rounding with a missing role        -> case 1
  (2,.) / (.,2)    a singular pair is kept: the register is
                   pinned to its shared state and removed   -> case 3

Degrees above four reduce to the same dispatch through the alternating
grouping; an odd cycle merges its two adjacent odd-set terms into one
rank-2 term first.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra import induced_algebra, joint_algebra, structure_decompose
from .config import DEFAULT, Tolerances
from .errors import (
    BlockOutOfRange,
    MoreThanTwoActors,
    NoCyclicOrder,
    PreconditionViolated,
    VacuousBlock,
)
from .model import (
    CLHInstance,
    LocalTerm,
    acts_as_identity_on,
    drop_terms,
    fresh_term_id,
    incident_terms,
)
from .numerics import (
    dagger,
    embed_local,
    hermitian_eig,
    opnorm,
    partial_trace,
    round_keep_top,
    round_spectrum,
    trace_inner_register,
)
from .rounding import rank1_round, two_local_round


@dataclass(frozen=True)
class AlternatingGrouping:
    order: tuple[int, ...]        # cyclic order of incident term ids
    p_set: tuple[int, ...]        # odd positions in the cycle
    q_set: tuple[int, ...]        # even positions
    merged_pair: tuple[int, int] | None   # adjacent q-terms summed when k is odd


@dataclass(frozen=True)
class PunctureOutcome:
    case_tag: int                     # 1 | 2 | 3
    instance: CLHInstance
    new_term_ids: tuple[int, ...]
    removed_term_ids: tuple[int, ...]
    merged_support: tuple[int, ...] | None
    register_fate: str                # "retained" | "classicalized" | "removed"
    scalar: float | None = None       # case-3 overlap weight, when applicable


def group_alternating(instance: CLHInstance, register: int,
                      tol: Tolerances = DEFAULT) -> AlternatingGrouping:
    """Cyclic order of the incident terms in which consecutive terms share
    at least two registers and non-consecutive ones share only `register`."""
    terms = incident_terms(instance, register, tol)
    k = len(terms)
    if k < 3:
        raise NoCyclicOrder(f"register {register} has degree {k} < 3")
    by_id = {t.id: t for t in terms}
    adj: dict[int, list[int]] = {t.id: [] for t in terms}
    for i in range(k):
        for j in range(i + 1, k):
            shared = set(terms[i].support) & set(terms[j].support)
            if register not in shared:
                raise NoCyclicOrder("incident terms must share the register")
            if len(shared) >= 2:
                adj[terms[i].id].append(terms[j].id)
                adj[terms[j].id].append(terms[i].id)
    if any(len(v) != 2 for v in adj.values()):
        raise NoCyclicOrder(f"neighbor counts {sorted((k, len(v)) for k, v in adj.items())}"
                            " do not form a single cycle")
    start = min(adj)
    order = [start, min(adj[start])]
    while len(order) < k:
        nxt = [x for x in adj[order[-1]] if x != order[-2]]
        order.append(nxt[0])
    if order[0] not in adj[order[-1]]:
        raise NoCyclicOrder("terms do not close into a cycle")
    # non-consecutive pairs must overlap on the register only
    for i in range(k):
        for j in range(i + 2, k):
            if i == 0 and j == k - 1:
                continue
            shared = set(by_id[order[i]].support) & set(by_id[order[j]].support)
            if shared != {register}:
                raise NoCyclicOrder(
                    f"terms {order[i]},{order[j]} share {sorted(shared)}")
    q = tuple(order[i] for i in range(0, k, 2))
    p = tuple(order[i] for i in range(1, k, 2))
    merged = (order[0], order[-1]) if k % 2 else None
    return AlternatingGrouping(order=tuple(order), p_set=p, q_set=q,
                               merged_pair=merged)


def _merge_rank2(instance: CLHInstance, id_a: int, id_b: int,
                 tol: Tolerances) -> CLHInstance:
    """Replace two commuting projector terms by the projector onto the sum
    of their ranges (same kernel intersection, rank <= 2 for rank-1 inputs)."""
    ta, tb = instance.term(id_a), instance.term(id_b)
    union = sorted(set(ta.support) | set(tb.support))
    regs = [(s, instance.register_map[s].dim) for s in union]
    m = embed_local(ta.matrix, list(ta.support), regs) + \
        embed_local(tb.matrix, list(tb.support), regs)
    merged = round_spectrum(m, tol)
    out = drop_terms(instance, {id_a, id_b},
                     f"merged odd-cycle terms {id_a}+{id_b}")
    term = LocalTerm(id=fresh_term_id(out), support=tuple(union), matrix=merged,
                     declared_rank=None, cell=None)
    return CLHInstance(registers=out.registers, terms=out.terms + (term,),
                       geometry=out.geometry, provenance=out.provenance)


def register_support_span(instance: CLHInstance, term: LocalTerm, register: int,
                          tol: Tolerances = DEFAULT) -> np.ndarray:
    """Columns spanning the register-side support of a PSD term (the support
    of its reduced operator on the register)."""
    dims = instance.dims_of(term.support)
    pos = term.support.index(register)
    rho = partial_trace(term.matrix, [pos], dims)
    w, v = np.linalg.eigh((rho + dagger(rho)) / 2)
    return v[:, w > tol.scaled(tol.eps_eig, max(opnorm(rho), 1.0))]


def _side_groups(instance, term_ids, register, tol):
    """Group one alternating side by register-side span; spans of distinct
    groups must be orthogonal and shared spans one-dimensional."""
    spans = {}
    for tid in term_ids:
        spans[tid] = register_support_span(instance, instance.term(tid), register, tol)
    groups: list[list[int]] = []
    reps: list[np.ndarray] = []
    for tid in sorted(term_ids):
        placed = False
        s = spans[tid]
        for g, rep in zip(groups, reps):
            overlap = opnorm(dagger(rep) @ s)
            if s.shape[1] == rep.shape[1] and overlap > 1 - 1e-7:
                g.append(tid)
                placed = True
                break
            if overlap > 1e-7:
                raise PreconditionViolated(
                    f"register spans of terms {g[0]} and {tid} neither match "
                    "nor stay orthogonal")
        if not placed:
            groups.append([tid])
            reps.append(s)
    for g, rep in zip(groups, reps):
        if len(g) > 1 and rep.shape[1] != 1:
            raise PreconditionViolated(
                f"shared span of terms {g} has dimension {rep.shape[1]} > 1")
    d = instance.register_map[register].dim
    projs = [rep @ dagger(rep) for rep in reps]
    rest = np.identity(d, dtype=complex) - sum(projs) if projs else np.identity(d, dtype=complex)
    if opnorm(rest) > 1e-7:
        w, v = np.linalg.eigh(rest)
        cols = v[:, w > 0.5]
        projs.append(cols @ dagger(cols))
        groups.append([])
        reps.append(cols)
    return groups, reps, projs


def _state_restrict(instance: CLHInstance, register: int, drop_ids,
                    conj: dict[int, np.ndarray],
                    replace: dict[int, np.ndarray], note: str) -> CLHInstance:
    """Remove `register` by pinning term-specific states.

    conj maps term id -> state |s> with the term replaced by <s|h|s>;
    replace maps term id -> ready-made matrix on support minus register.
    """
    new_terms = []
    drop_ids = set(drop_ids)
    for t in instance.terms:
        if t.id in drop_ids:
            continue
        if register not in t.support:
            new_terms.append(t)
            continue
        support = tuple(s for s in t.support if s != register)
        if t.id in replace:
            m = replace[t.id]
        else:
            dims = instance.dims_of(t.support)
            pos = t.support.index(register)
            m = trace_inner_register(t.matrix, pos, dims, conj[t.id])
        new_terms.append(LocalTerm(id=t.id, support=support, matrix=m,
                                   declared_rank=None, cell=t.cell))
    regs = tuple(r for r in instance.registers if r.id != register)
    return CLHInstance(registers=regs, terms=tuple(new_terms), geometry=None,
                       provenance=instance.provenance + (note,))


def _alpha_rounded(instance, term, register, pi_other, tol):
    """Case-B replacement for the lone survivor of the other side: keep the
    top (alpha-scaled) eigenspace of <psi| pi h pi |psi>."""
    dims = instance.dims_of(term.support)
    regs = [(s, instance.register_map[s].dim) for s in term.support]
    pi_emb = embed_local(pi_other["pi"], [register], regs)
    m = pi_emb @ term.matrix @ pi_emb
    pos = term.support.index(register)
    sandwich = trace_inner_register(m, pos, dims, pi_other["psi"])
    alpha = pi_other["alpha"]
    top = opnorm(sandwich)
    if top <= tol.scaled(tol.eps_recon, 1.0) * 100:
        return np.zeros_like(sandwich)
    return round_keep_top(sandwich, alpha, rel_slack=1e-6, tol=tol)


def puncture_general(instance: CLHInstance, register: int,
                     p_block: int, q_block: int,
                     tol: Tolerances = DEFAULT) -> PunctureOutcome:
    """Puncture a register of degree >= 4 with the guide's block choices."""
    grouping = group_alternating(instance, register, tol)
    work = instance
    if grouping.merged_pair is not None:
        work = _merge_rank2(instance, *grouping.merged_pair, tol)
        merged_id = work.terms[-1].id
        q_ids = tuple(t for t in grouping.q_set
                      if t not in grouping.merged_pair) + (merged_id,)
    else:
        q_ids = grouping.q_set
    p_ids = grouping.p_set
    for tid in p_ids + q_ids:
        t = work.term(tid)
        evals = np.linalg.eigvalsh(t.matrix)
        if np.sum(evals > tol.scaled(tol.eps_eig, max(opnorm(t.matrix), 1.0))) > 2:
            raise PreconditionViolated(f"term {tid} has rank above 2")
    p_groups, p_reps, p_projs = _side_groups(work, p_ids, register, tol)
    q_groups, q_reps, q_projs = _side_groups(work, q_ids, register, tol)
    if not 0 <= p_block < len(p_projs):
        raise BlockOutOfRange(f"p_block {p_block} of {len(p_projs)}")
    if not 0 <= q_block < len(q_projs):
        raise BlockOutOfRange(f"q_block {q_block} of {len(q_projs)}")
    surv_p = p_groups[p_block] if p_block < len(p_groups) else []
    surv_q = q_groups[q_block] if q_block < len(q_groups) else []
    pi_p, pi_q = p_projs[p_block], q_projs[q_block]
    np_, nq = len(surv_p), len(surv_q)
    removed = tuple(sorted((set(p_ids) - set(surv_p)) | (set(q_ids) - set(surv_q))))

    if np_ <= 1 and nq <= 1:
        out = rank1_round(work, register, pi_p, pi_q, tol)
        tag = 2 if (np_ == 1 and nq == 1) else 1
        return _outcome_from_instance(instance, work, out, register, removed,
                                      tol, tag=tag)

    # a singular group survives on one side (or both)
    def side_state(reps, block):
        rep = reps[block]
        if rep.shape[1] != 1:
            raise PreconditionViolated("kept multi-term group is not 1-dimensional")
        return rep[:, 0]

    if np_ >= 2 and nq >= 2:
        psi = side_state(p_reps, p_block)
        phi = side_state(q_reps, q_block)
        scalar = float(abs(np.vdot(psi, phi)) ** 2)
        if scalar < tol.eps_vacuous:
            raise VacuousBlock("orthogonal singular states: <psi|phi>^2 ~ 0")
        conj = {tid: psi for tid in surv_p}
        conj.update({tid: phi for tid in surv_q})
        out = _state_restrict(
            work, register, removed, conj, {},
            f"puncture case C at {register}: scalar {scalar:.6f}")
        return _outcome_from_instance(instance, work, out, register, removed,
                                      tol, tag=3, scalar=scalar)

    if np_ >= 2:
        psi = side_state(p_reps, p_block)
        alpha = float(np.real(np.vdot(psi, pi_q @ psi)))
        if alpha < tol.eps_vacuous:
            raise VacuousBlock("chosen q-block has no overlap with psi")
        conj = {tid: psi for tid in surv_p}
        replace = {}
        for tid in surv_q:
            replace[tid] = _alpha_rounded(work, work.term(tid), register,
                                          {"pi": pi_q, "psi": psi, "alpha": alpha},
                                          tol)
        out = _state_restrict(
            work, register, removed, conj, replace,
            f"puncture case B at {register}: alpha {alpha:.6f}")
        return _outcome_from_instance(instance, work, out, register, removed,
                                      tol, tag=3, scalar=alpha)

    # mirror: q-side singular group survives, p-side has <= 1 survivor
    phi = side_state(q_reps, q_block)
    alpha = float(np.real(np.vdot(phi, pi_p @ phi)))
    if alpha < tol.eps_vacuous:
        raise VacuousBlock("chosen p-block has no overlap with phi")
    conj = {tid: phi for tid in surv_q}
    replace = {}
    for tid in surv_p:
        replace[tid] = _alpha_rounded(work, work.term(tid), register,
                                      {"pi": pi_p, "psi": phi, "alpha": alpha},
                                      tol)
    out = _state_restrict(
        work, register, removed, conj, replace,
        f"puncture case B' at {register}: alpha {alpha:.6f}")
    return _outcome_from_instance(instance, work, out, register, removed,
                                  tol, tag=3, scalar=alpha)


def _outcome_from_instance(original, work, out, register, removed, tol,
                           tag: int, scalar=None) -> PunctureOutcome:
    """Case tag comes from the dispatch; this only collects the structural
    facts (ids, merged support, register fate) from the output instance."""
    original_ids = {t.id for t in original.terms}
    out_ids = {t.id for t in out.terms}
    new_ids = tuple(sorted(out_ids - original_ids))
    removed_all = tuple(sorted((original_ids - out_ids) | set(removed)))
    if register in {r.id for r in out.registers}:
        fate = "retained"
    else:
        fate = "classicalized"
    merged_support = None
    for t in out.terms:
        if t.id in new_ids and len(t.support) > 1:
            merged_support = tuple(t.support)
    return PunctureOutcome(case_tag=tag, instance=out,
                           new_term_ids=new_ids,
                           removed_term_ids=removed_all,
                           merged_support=merged_support,
                           register_fate=fate, scalar=scalar)


def puncture_deg4(instance: CLHInstance, register: int,
                  p_block: int, q_block: int,
                  tol: Tolerances = DEFAULT) -> PunctureOutcome:
    """Degree-4 specialization: exactly four rank-1 incident terms grouped
    into two diagonal pairs, each pair overlapping only on the register."""
    terms = incident_terms(instance, register, tol)
    if len(terms) != 4:
        raise PreconditionViolated(
            f"register {register} has degree {len(terms)}, need 4")
    for t in terms:
        evals = np.linalg.eigvalsh(t.matrix)
        if np.sum(evals > tol.scaled(tol.eps_eig, max(opnorm(t.matrix), 1.0))) != 1:
            raise PreconditionViolated(f"term {t.id} is not rank 1")
    return puncture_general(instance, register, p_block, q_block, tol)


def puncture_choices(instance: CLHInstance, register: int,
                     tol: Tolerances = DEFAULT) -> list[tuple[int, int]]:
    """All (p_block, q_block) pairs available at this register, blocks
    ordered by descending group weight then index."""
    grouping = group_alternating(instance, register, tol)
    work = instance
    if grouping.merged_pair is not None:
        work = _merge_rank2(instance, *grouping.merged_pair, tol)
        q_ids = tuple(t for t in grouping.q_set
                      if t not in grouping.merged_pair) + (work.terms[-1].id,)
    else:
        q_ids = grouping.q_set
    p_groups, _, p_projs = _side_groups(work, grouping.p_set, register, tol)
    q_groups, _, q_projs = _side_groups(work, q_ids, register, tol)
    return [(a, b) for a in range(len(p_projs)) for b in range(len(q_projs))]


def resolve_blockage(instance: CLHInstance, register: int, block_index: int,
                     tol: Tolerances = DEFAULT) -> PunctureOutcome:
    """Two merged terms blocking a tunnel: a plain two-local rounding on
    their shared register decouples them onto separate sub-registers."""
    actors = incident_terms(instance, register, tol)
    if len(actors) != 2:
        raise MoreThanTwoActors(
            f"register {register} has {len(actors)} non-trivial actors, need 2")
    out = two_local_round(instance, register, block_index, tol)
    original_ids = {t.id for t in instance.terms}
    return PunctureOutcome(
        case_tag=3, instance=out,
        new_term_ids=tuple(sorted({t.id for t in out.terms} - original_ids)),
        removed_term_ids=(),
        merged_support=None, register_fate="removed", scalar=None)
