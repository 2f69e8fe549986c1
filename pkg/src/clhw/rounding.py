"""Rounding schemes.

Each operation maps an instance plus prover-supplied projectors to a new
commuting instance.  Soundness is never assumed: every hypothesis is
re-verified before a move is applied, so adversarial guides fail loudly.
Ground-energy equivalence is existential over the prover's block choices;
accepting any single choice certifies lambda0 = 0 of the input.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra import (
    center,
    induced_algebra,
    joint_algebra,
    orthonormalize_ops,
    structure_decompose,
)
from .config import DEFAULT, Tolerances
from .errors import (
    BlockOutOfRange,
    BranchOutOfRange,
    DegenerateBprime,
    HypothesisViolated,
    InvalidWitness,
    NotClassical,
    NumericalFailure,
    OverlapViolation,
)
from .jordan import jordan_decompose
from .model import (
    CLHInstance,
    LocalTerm,
    QuditRegister,
    acts_as_identity_on,
    canonical_unsat,
    drop_terms,
    fresh_register_id,
    fresh_term_id,
    incident_terms,
    restrict_register,
)
from .numerics import (
    apply_local,
    dagger,
    embed_local,
    opnorm,
    partial_trace,
)


# ---------------------------------------------------------------------------
# equivalence-under-projectors trace test

@dataclass(frozen=True)
class TraceTable:
    entries: dict[tuple[int, int], float]
    dim: int

    def positive_entries(self, tol: Tolerances = DEFAULT) -> list[tuple[int, int]]:
        cut = tol.eps_trace * self.dim
        return [k for k, v in self.entries.items() if v > cut]

    def lambda0_is_zero(self, tol: Tolerances = DEFAULT) -> bool:
        return bool(self.positive_entries(tol))


def _check_povm(povm, d: int, name: str, tol: Tolerances):
    total = np.zeros((d, d), dtype=complex)
    for k, pi in enumerate(povm):
        pi = np.asarray(pi, dtype=complex)
        if pi.shape != (d, d):
            raise HypothesisViolated(f"{name}[{k}] has shape {pi.shape}, register dim {d}")
        if opnorm(pi - dagger(pi)) > tol.scaled(tol.eps_recon, 1.0) * 10:
            raise HypothesisViolated(f"{name}[{k}] is not Hermitian")
        if opnorm(pi @ pi - pi) > tol.scaled(tol.eps_recon, 1.0) * 10:
            raise HypothesisViolated(f"{name}[{k}] is not idempotent")
        total += pi
    if opnorm(total - np.identity(d)) > tol.scaled(tol.eps_recon, 1.0) * 10:
        raise HypothesisViolated(f"{name} does not sum to identity")


def _commutes_with_projector(instance, term, register, pi, tol) -> bool:
    if register not in term.support:
        return True
    regs = [(s, instance.register_map[s].dim) for s in term.support]
    pi_emb = embed_local(pi, [register], regs)
    return opnorm(pi_emb @ term.matrix - term.matrix @ pi_emb) <= tol.eps_comm


def equiv_projector_check(instance: CLHInstance, povm1, povm2,
                          s_ids, t_ids, register1: int, register2: int,
                          tol: Tolerances = DEFAULT) -> TraceTable:
    """Trace table of Lemma-style entries over POVM block pairs.

    Entry (i, j) = tr[ prod_S (pi1_i - pi1_i h pi1_i) prod_T (pi2_j - ...)
    prod_rest (I - h) ].  lambda0 = 0 iff some entry is positive; every
    entry is nonnegative up to tolerance because each grouped factor is PSD
    and the mandated ordering pairs them as PSD x PSD.
    """
    s_ids, t_ids = set(s_ids), set(t_ids)
    if s_ids & t_ids:
        raise HypothesisViolated("S and T overlap")
    d1 = instance.register_map[register1].dim
    d2 = instance.register_map[register2].dim
    _check_povm(povm1, d1, "povm1", tol)
    _check_povm(povm2, d2, "povm2", tol)
    for t in instance.terms:
        if t.id not in t_ids:
            for k, pi in enumerate(povm1):
                if not _commutes_with_projector(instance, t, register1, pi, tol):
                    raise HypothesisViolated(
                        f"term {t.id} outside T fails povm1[{k}]")
        if t.id not in s_ids:
            for k, pi in enumerate(povm2):
                if not _commutes_with_projector(instance, t, register2, pi, tol):
                    raise HypothesisViolated(
                        f"term {t.id} outside S fails povm2[{k}]")
    s_terms = [t for t in instance.terms if t.id in s_ids]
    t_terms = [t for t in instance.terms if t.id in t_ids]
    rest = [t for t in instance.terms if t.id not in s_ids | t_ids]
    regs = list(instance.registers)
    dim = instance.hilbert_dim

    def conj_factor(pi, reg, term, block):
        x = apply_local(pi, [reg], regs, block)
        x = apply_local(term.matrix, list(term.support), regs, x)
        x = apply_local(pi, [reg], regs, x)
        return apply_local(pi, [reg], regs, block) - x

    entries = {}
    for i, pi1 in enumerate(povm1):
        for j, pi2 in enumerate(povm2):
            total = 0.0
            chunk = 512
            for start in range(0, dim, chunk):
                k = min(chunk, dim - start)
                block = np.zeros((dim, k), dtype=complex)
                block[start + np.arange(k), np.arange(k)] = 1.0
                for t in reversed(rest):
                    block = block - apply_local(t.matrix, list(t.support), regs, block)
                for t in reversed(t_terms):
                    block = conj_factor(pi2, register2, t, block)
                for t in reversed(s_terms):
                    block = conj_factor(pi1, register1, t, block)
                total += float(np.real(np.sum(block[start + np.arange(k), np.arange(k)])))
            entries[(i, j)] = total
    return TraceTable(entries=entries, dim=dim)


# ---------------------------------------------------------------------------
# rank-1 pair rounding (Jordan-based)

@dataclass(frozen=True)
class RoundingArtifacts:
    pi_p: np.ndarray
    pi_q: np.ndarray
    ptilde: np.ndarray
    qtilde: np.ndarray
    delta: np.ndarray
    pi_p_bprime: np.ndarray
    pi_qtilde_bprime: np.ndarray
    bprime: np.ndarray            # isometry, columns span B'
    union_support: tuple[int, ...]
    p_term: int | None
    q_term: int | None
    removed_terms: tuple[int, ...]


def _term_flags(instance, term, register, pi, tol):
    """(commutes, survives) of a term against a single-register projector."""
    if register not in term.support:
        return True, True
    regs = [(s, instance.register_map[s].dim) for s in term.support]
    pi_emb = embed_local(pi, [register], regs)
    commutes = opnorm(pi_emb @ term.matrix - term.matrix @ pi_emb) <= tol.eps_comm
    survives = opnorm(pi_emb @ term.matrix @ pi_emb) > tol.scaled(tol.eps_recon, 1.0) * 100
    return commutes, survives


def rank1_round_artifacts(instance: CLHInstance, register: int,
                          pi1: np.ndarray, pi2: np.ndarray,
                          tol: Tolerances = DEFAULT):
    """Role assignment plus the Jordan-block data of the pair rounding.

    pi1's non-commuting survivor is P (it must commute with pi2), and
    symmetrically for Q; at most one of each, or the move is rejected.
    """
    d = instance.register_map[register].dim
    for name, pi in (("pi1", pi1), ("pi2", pi2)):
        pi = np.asarray(pi, dtype=complex)
        if pi.shape != (d, d):
            raise HypothesisViolated(f"{name} shape {pi.shape} vs register dim {d}")
        if opnorm(pi - dagger(pi)) > 1e-7 or opnorm(pi @ pi - pi) > 1e-7:
            raise HypothesisViolated(f"{name} is not a projector")
    flags = {}
    for t in instance.terms:
        c1, s1 = _term_flags(instance, t, register, pi1, tol)
        c2, s2 = _term_flags(instance, t, register, pi2, tol)
        if not c1 and not c2:
            raise HypothesisViolated(
                f"term {t.id} fails to commute with both projectors")
        flags[t.id] = (c1, s1, c2, s2)
    p_candidates = [t for t in instance.terms
                    if not flags[t.id][0] and flags[t.id][3]]
    q_candidates = [t for t in instance.terms
                    if not flags[t.id][2] and flags[t.id][1]]
    if len(p_candidates) > 1:
        raise HypothesisViolated(
            f"terms {[t.id for t in p_candidates]} all fail pi1 and survive pi2")
    if len(q_candidates) > 1:
        raise HypothesisViolated(
            f"terms {[t.id for t in q_candidates]} all fail pi2 and survive pi1")
    p_term = p_candidates[0] if p_candidates else None
    q_term = q_candidates[0] if q_candidates else None
    removed = [t.id for t in instance.terms
               if (not flags[t.id][0] and not flags[t.id][3])
               or (not flags[t.id][2] and not flags[t.id][1])]
    union = sorted(set([register])
                   | (set(p_term.support) if p_term else set())
                   | (set(q_term.support) if q_term else set()))
    regs_u = [(s, instance.register_map[s].dim) for s in union]
    pi1_u = embed_local(pi1, [register], regs_u)
    pi2_u = embed_local(pi2, [register], regs_u)
    # P commutes with pi2 (it failed pi1): ptilde is pi2-side
    if p_term is not None:
        p_u = embed_local(p_term.matrix, list(p_term.support), regs_u)
        ptilde = pi2_u - pi2_u @ p_u @ pi2_u
    else:
        ptilde = pi2_u
    if q_term is not None:
        q_u = embed_local(q_term.matrix, list(q_term.support), regs_u)
        qtilde = pi1_u - pi1_u @ q_u @ pi1_u
    else:
        qtilde = pi1_u
    dec = jordan_decompose(ptilde, qtilde, tol)
    du = ptilde.shape[0]
    pi_p_b = np.zeros((du, du), dtype=complex)
    pi_qt_b = np.zeros((du, du), dtype=complex)
    cols = []
    for b in dec.blocks:
        if b.eta > tol.eps_eig and b.p_vec is not None:
            pi_p_b += np.outer(b.p_vec, np.conj(b.p_vec))
            cols.append(b.p_vec)
            if b.dim == 2:
                pi_qt_b += np.outer(b.qtilde_vec, np.conj(b.qtilde_vec))
                cols.append(b.qtilde_vec)
    delta = pi_p_b + pi_qt_b
    bprime = np.stack(cols, axis=1) if cols else np.zeros((du, 0), dtype=complex)
    return RoundingArtifacts(
        pi_p=pi2_u, pi_q=pi1_u, ptilde=ptilde, qtilde=qtilde, delta=delta,
        pi_p_bprime=pi_p_b, pi_qtilde_bprime=pi_qt_b, bprime=bprime,
        union_support=tuple(union),
        p_term=p_term.id if p_term is not None else None,
        q_term=q_term.id if q_term is not None else None,
        removed_terms=tuple(removed))


def rank1_round(instance: CLHInstance, register: int,
                pi1: np.ndarray, pi2: np.ndarray,
                tol: Tolerances = DEFAULT) -> CLHInstance:
    """Replace the two surviving non-commuting terms by the single merged
    projector (I - Delta) on the union of their supports.

    Delta projects onto B' = span{p_b, q_b : eta_b > 0} of the Jordan
    decomposition of (ptilde, qtilde).  Terms killed by the projectors are
    removed; everything commuting with both projectors is untouched.
    """
    art = rank1_round_artifacts(instance, register, pi1, pi2, tol)
    gone = set(art.removed_terms)
    if art.p_term is not None:
        gone.add(art.p_term)
    if art.q_term is not None:
        gone.add(art.q_term)
    note = (f"rank1_round(register={register}, P={art.p_term}, Q={art.q_term}, "
            f"removed={sorted(gone)}, bprime_dim={art.bprime.shape[1]})")
    if art.bprime.shape[1] == 0:
        # no surviving Jordan weight: the certified trace is zero
        return canonical_unsat(note + " -> degenerate B', canonical UNSAT")
    merged = np.identity(art.delta.shape[0], dtype=complex) - art.delta
    base = drop_terms(instance, gone, note)
    if opnorm(merged) <= tol.scaled(tol.eps_recon, 1.0) * 10:
        return base
    support = list(art.union_support)
    dims = [instance.register_map[s].dim for s in support]
    # trim registers the merged term acts on trivially
    probe = LocalTerm(id=-1, support=tuple(support), matrix=merged)
    keep = [s for s in support if not acts_as_identity_on(probe, s, dims, tol)]
    if not keep:
        raise NumericalFailure("merged term acts as identity everywhere")
    if keep != support:
        keep_pos = [support.index(s) for s in keep]
        rest = float(np.prod([d for k, d in enumerate(dims) if k not in keep_pos]))
        merged = partial_trace(merged, keep_pos, dims) / rest
        support = keep
    new_term = LocalTerm(id=fresh_term_id(base), support=tuple(support),
                         matrix=merged, declared_rank=None, cell=None)
    return CLHInstance(registers=base.registers, terms=base.terms + (new_term,),
                       geometry=None, provenance=base.provenance)


# ---------------------------------------------------------------------------
# BV two-local rounding

@dataclass(frozen=True)
class BVLeaf:
    """One joint block: in isometry coordinates the register space factors
    as (x)_k factors[k][1], with factors[k][0] the term id acting there
    (None marks the residual factor nothing acts on)."""
    isometry: np.ndarray
    factors: tuple[tuple[int | None, int], ...]


def _identity_split(m, dims, keep, tol):
    """m on (x)dims == op on keep-axes (x) identity elsewhere."""
    rest = [p for p in range(len(dims)) if p not in keep]
    rest_dim = int(np.prod([dims[p] for p in rest])) if rest else 1
    red = partial_trace(m, keep, dims) / rest_dim
    regs = [(p, dims[p]) for p in range(len(dims))]
    rebuilt = embed_local(red, keep, regs)
    return red, opnorm(m - rebuilt)


def bv_blocks(instance: CLHInstance, register: int,
              tol: Tolerances = DEFAULT) -> list[BVLeaf]:
    """Joint Structure-Lemma decomposition for a register whose incident
    terms pairwise overlap only there, via iterated two-term splitting."""
    terms = incident_terms(instance, register, tol)
    for i in range(len(terms)):
        for j in range(i + 1, len(terms)):
            shared = set(terms[i].support) & set(terms[j].support)
            if shared != {register}:
                raise OverlapViolation(
                    f"terms {terms[i].id},{terms[j].id} overlap on {sorted(shared)}")
    d = instance.register_map[register].dim
    algebras = [(t.id, list(induced_algebra(t, register,
                                            instance.dims_of(t.support), tol).basis))
                for t in terms]

    def rec(iso: np.ndarray, algs) -> list[BVLeaf]:
        m = iso.shape[1]
        if not algs:
            return [BVLeaf(isometry=iso, factors=((None, m),))]
        tid, ops = algs[0]
        restricted = orthonormalize_ops([dagger(iso) @ a @ iso for a in ops], m)
        dec = structure_decompose(restricted, m, tol=tol)
        leaves = []
        for blk in dec.blocks:
            d1, d2 = blk.factor_dims
            sub_algs = []
            for tid2, ops2 in algs[1:]:
                reduced = []
                for a in ops2:
                    ab = dagger(blk.isometry) @ (dagger(iso) @ a @ iso) @ blk.isometry
                    red, resid = _identity_split(ab, [d1, d2], [1], tol)
                    if resid > tol.scaled(1e-6, opnorm(ab)):
                        raise NumericalFailure(
                            f"term {tid2} not identity on term {tid}'s factor")
                    reduced.append(red)
                sub_algs.append((tid2, reduced))
            base_iso = iso @ blk.isometry
            for sub in rec(np.identity(d2, dtype=complex), sub_algs):
                full_iso = base_iso @ np.kron(np.identity(d1, dtype=complex),
                                              sub.isometry)
                leaves.append(BVLeaf(isometry=full_iso,
                                     factors=((tid, d1),) + sub.factors))
        return leaves

    return rec(np.identity(d, dtype=complex), algebras)


def two_local_round(instance: CLHInstance, register: int, block_index: int,
                    tol: Tolerances = DEFAULT) -> CLHInstance:
    """Restrict the register to one joint block and split it into one
    sub-register per incident term (Cor. product structure).

    Incident terms end up acting on their own sub-register only; the
    lambda0 = 0 bit of the input equals the OR over block choices of the
    outputs'.
    """
    leaves = bv_blocks(instance, register, tol)
    if not 0 <= block_index < len(leaves):
        raise BlockOutOfRange(f"block {block_index} of {len(leaves)}")
    leaf = leaves[block_index]
    terms = incident_terms(instance, register, tol)
    term_axis = {tid: k for k, (tid, _) in enumerate(leaf.factors) if tid is not None}
    fdims = [dim for _, dim in leaf.factors]
    fresh = fresh_register_id(instance)
    new_reg_of = {}
    new_regs = []
    for k, (tid, dim) in enumerate(leaf.factors):
        if dim > 1:
            rid = fresh + len(new_regs)
            new_reg_of[k] = rid
            new_regs.append(QuditRegister(rid, dim))
    out_terms = []
    for t in instance.terms:
        if register not in t.support:
            out_terms.append(t)
            continue
        dims = instance.dims_of(t.support)
        pos = t.support.index(register)
        n = len(dims)
        tt = t.matrix.reshape(dims + dims)
        v = leaf.isometry
        tt = np.tensordot(np.conj(v.T), tt, axes=(1, pos))
        tt = np.moveaxis(tt, 0, pos)
        tt = np.tensordot(tt, v, axes=(n + pos, 0))
        tt = np.moveaxis(tt, -1, n + pos)
        # expand the block axis into the leaf factors, register axis last
        order = [p for p in range(n) if p != pos] + [pos]
        tt = tt.transpose(order + [n + p for p in order])
        rest_dims = [dims[p] for p in range(n) if p != pos]
        all_dims = rest_dims + fdims
        tot = int(np.prod(all_dims))
        mm = tt.reshape(tot, tot)
        rest_axes = list(range(len(rest_dims)))
        if t.id in term_axis:
            keep = rest_axes + [len(rest_dims) + term_axis[t.id]]
        else:
            keep = rest_axes
        red, resid = _identity_split(mm, all_dims, keep, tol)
        if resid > tol.scaled(1e-6, max(opnorm(mm), 1.0)):
            raise NumericalFailure(f"term {t.id} not factor-local in block")
        support = [s for s in t.support if s != register]
        if t.id in term_axis and term_axis[t.id] in new_reg_of:
            support = support + [new_reg_of[term_axis[t.id]]]
        # a dim-1 factor leaves only the scalar action, already folded into red
        out_terms.append(LocalTerm(id=t.id, support=tuple(support), matrix=red,
                                   declared_rank=None, cell=t.cell))
    regs = tuple(r for r in instance.registers if r.id != register) + tuple(new_regs)
    note = (f"two_local_round(register={register}, block={block_index}/"
            f"{len(leaves)}, factors={leaf.factors})")
    return CLHInstance(registers=regs, terms=tuple(out_terms), geometry=None,
                       provenance=instance.provenance + (note,))


# ---------------------------------------------------------------------------
# classical registers

def detect_classical(instance: CLHInstance, register: int,
                     tol: Tolerances = DEFAULT):
    """Complete orthogonal family of 1-dim invariant projectors, if the
    joint incident algebra is commutative; None otherwise."""
    d = instance.register_map[register].dim
    terms = incident_terms(instance, register, tol)
    if not terms:
        return np.identity(d, dtype=complex)
    algebras = [induced_algebra(t, register, instance.dims_of(t.support), tol)
                for t in terms]
    joint = joint_algebra(algebras, d)
    if len(center(joint, d)) != len(joint):
        return None
    dec = structure_decompose(joint, d, tol=tol)
    cols = []
    for blk in dec.blocks:
        if blk.factor_dims[0] != 1:
            return None
        cols.append(blk.isometry)
    return np.hstack(cols)


def classical_restrict(instance: CLHInstance, register: int, basis_index: int,
                       basis: np.ndarray, tol: Tolerances = DEFAULT) -> CLHInstance:
    """Remove a classical register by pinning it to one basis vector.

    The basis must be unitary and each incident term must commute with each
    rank-1 basis projector (verified; NotClassical otherwise).
    """
    d = instance.register_map[register].dim
    basis = np.asarray(basis, dtype=complex)
    if basis.shape != (d, d) or opnorm(dagger(basis) @ basis - np.identity(d)) > 1e-7:
        raise NotClassical("basis is not unitary on the register")
    if not 0 <= basis_index < d:
        raise BlockOutOfRange(f"basis index {basis_index} of {d}")
    for t in incident_terms(instance, register, tol):
        for k in range(d):
            pi = np.outer(basis[:, k], np.conj(basis[:, k]))
            if not _commutes_with_projector(instance, t, register, pi, tol):
                raise NotClassical(f"term {t.id} fails basis projector {k}")
    out = restrict_register(
        instance, register, basis[:, [basis_index]],
        f"classical_restrict(register={register}, index={basis_index})")
    return out


# ---------------------------------------------------------------------------
# semi-separable self-reduction

def semi_separable_reduce(instance: CLHInstance, witness, branch: int,
                          tol: Tolerances = DEFAULT) -> CLHInstance:
    """Restrict the witness register to one invariant block; conjugate the
    preserved terms and round the exceptional one back to a projector by
    keeping only its exact-1 eigenspace."""
    register = witness.register
    d = instance.register_map[register].dim
    projs = [np.asarray(p, dtype=complex) for p in witness.projectors]
    if len(projs) < 2:
        raise InvalidWitness("decomposition must have at least two blocks")
    total = np.zeros((d, d), dtype=complex)
    for k, p in enumerate(projs):
        if opnorm(p - dagger(p)) > 1e-7 or opnorm(p @ p - p) > 1e-7:
            raise InvalidWitness(f"projector {k} is not a projector")
        for l in range(k):
            if opnorm(projs[l] @ p) > 1e-7:
                raise InvalidWitness(f"projectors {l},{k} are not orthogonal")
        total += p
    if opnorm(total - np.identity(d)) > 1e-7:
        raise InvalidWitness("projectors do not resolve the identity")
    if not 0 <= branch < len(projs):
        raise BranchOutOfRange(f"branch {branch} of {len(projs)}")
    exc = witness.exceptional_term
    for t in incident_terms(instance, register, tol):
        if t.id == exc:
            continue
        for k, p in enumerate(projs):
            if not _commutes_with_projector(instance, t, register, p, tol):
                raise InvalidWitness(f"non-exceptional term {t.id} fails projector {k}")
    w, v = np.linalg.eigh(projs[branch])
    iso = v[:, w > 0.5]
    out = restrict_register(
        instance, register, iso,
        f"semi_separable_reduce(register={register}, branch={branch}, "
        f"exceptional={exc})")
    # round the exceptional term: eigenvalues below 1 go to 0
    new_terms = []
    for t in out.terms:
        if t.id != exc:
            new_terms.append(t)
            continue
        from .numerics import round_keep_top
        m = round_keep_top(t.matrix, 1.0, rel_slack=1e-6, tol=tol)
        new_terms.append(LocalTerm(id=t.id, support=t.support, matrix=m,
                                   declared_rank=None, cell=t.cell))
    return CLHInstance(registers=out.registers, terms=tuple(new_terms),
                       geometry=None, provenance=out.provenance)
