"""Semantics-direct nested enumeration evaluator, used as ground truth.

Evaluates all four quantifier combinations by literally enumerating optimal
answer sets level by level.  Intentionally slow and obviously correct; inner
checks for distinct moves are independent and can run in worker processes.
"""

from __future__ import annotations

import concurrent.futures
from dataclasses import dataclass

from .core import (
    CostVector,
    Interpretation,
    Program,
    QuantifiedProgram,
    Quantifier,
    RESERVED_PREFIX,
    evaluate_cost,
    head_preds,
)
from .oracle import SolveStatus, SolverConfig, enumerate_optimal, solve_optimal
from .transform import fix

DEFAULT_MOVE_CAP = 10_000


class CapExceeded(Exception):
    pass


class ReferenceUnknown(Exception):
    """An oracle call timed out while evaluating the program."""


@dataclass
class ReferenceReport:
    coherent: bool
    qas: list[Interpretation]
    opt_qas: list[Interpretation]
    opt_cost: CostVector | None


def _user_atoms(model: Interpretation) -> Interpretation:
    return frozenset(a for a in model if not a.pred.startswith(RESERVED_PREFIX))


def _outer_optima(qp: QuantifiedProgram, cfg: SolverConfig, cap: int):
    out = enumerate_optimal(qp.p1, cfg)
    if out.status is SolveStatus.UNKNOWN:
        raise ReferenceUnknown("outer enumeration timed out")
    if out.status is SolveStatus.UNSAT:
        return []
    if cap and len(out.models) > cap:
        raise CapExceeded(f"{len(out.models)} optimal answer sets exceed the cap of {cap}")
    return [_user_atoms(m) for m in out.models]


def satisfies_check_program(qp: QuantifiedProgram, model: Interpretation, cfg: SolverConfig) -> bool:
    """A model satisfies the check program iff the check program together with
    the fixed model is coherent (dedicated oracle call)."""
    union = Program(qp.p1.rules + qp.p2.rules)
    fixable = head_preds(union)
    fixed = frozenset(a for a in _user_atoms(model) if (a.pred, len(a.args)) in fixable)
    out = solve_optimal(qp.c + fix(union, fixed), cfg)
    if out.status is SolveStatus.UNKNOWN:
        raise ReferenceUnknown("check-program call timed out")
    return out.status is not SolveStatus.UNSAT


def inner_coherent(qp: QuantifiedProgram, m1: Interpretation, cfg: SolverConfig) -> bool:
    """Coherence of the inner quantified program under a fixed outer move."""
    inner = qp.p2 + fix(qp.p1, m1)
    out = enumerate_optimal(inner, cfg)
    if out.status is SolveStatus.UNKNOWN:
        raise ReferenceUnknown("inner enumeration timed out")
    if out.status is SolveStatus.UNSAT:
        return qp.q2 is Quantifier.FORALL
    for m2 in out.models:
        sat = satisfies_check_program(qp, m2, cfg)
        if qp.q2 is Quantifier.EXISTS and sat:
            return True
        if qp.q2 is Quantifier.FORALL and not sat:
            return False
    return qp.q2 is Quantifier.FORALL


_WORKER_STATE: dict = {}


def _worker_init(qp, cfg):
    _WORKER_STATE["qp"] = qp
    _WORKER_STATE["cfg"] = cfg


def _inner_worker(m1):
    return m1, inner_coherent(_WORKER_STATE["qp"], m1, _WORKER_STATE["cfg"])


def _inner_map(qp, moves, cfg, workers: int):
    """Yield (move, inner_coherent) pairs, in move order, optionally parallel."""
    if workers <= 1 or len(moves) <= 1:
        for m1 in moves:
            yield m1, inner_coherent(qp, m1, cfg)
        return
    with concurrent.futures.ProcessPoolExecutor(
        max_workers=workers, initializer=_worker_init, initargs=(qp, cfg)
    ) as pool:
        yield from pool.map(_inner_worker, moves, chunksize=8)


def coherent(
    qp: QuantifiedProgram,
    cfg: SolverConfig,
    *,
    cap: int = DEFAULT_MOVE_CAP,
    workers: int = 1,
) -> bool:
    """Literal recursive evaluation of the coherence conditions."""
    moves = _outer_optima(qp, cfg, cap)
    if not moves:
        return qp.q1 is Quantifier.FORALL
    if qp.q1 is Quantifier.EXISTS:
        for _, ok in _inner_map(qp, moves, cfg, workers):
            if ok:
                return True
        return False
    for _, ok in _inner_map(qp, moves, cfg, workers):
        if not ok:
            return False
    return True


def enumerate_qas(
    qp: QuantifiedProgram,
    cfg: SolverConfig,
    *,
    cap: int = DEFAULT_MOVE_CAP,
    workers: int = 1,
) -> list[Interpretation]:
    """All quantified answer sets of an existential program."""
    if qp.q1 is not Quantifier.EXISTS:
        raise ValueError("quantified answer sets are defined for existential programs")
    moves = _outer_optima(qp, cfg, cap)
    return [m1 for m1, ok in _inner_map(qp, moves, cfg, workers) if ok]


def optimal_qas(
    qp: QuantifiedProgram,
    cfg: SolverConfig,
    *,
    cap: int = DEFAULT_MOVE_CAP,
    workers: int = 1,
) -> tuple[list[Interpretation], CostVector | None]:
    """Quantified answer sets that are non-dominated under the merged cost."""
    qas = enumerate_qas(qp, cfg, cap=cap, workers=workers)
    if not qas:
        return [], None
    merged_weaks = qp.p1.weaks + qp.cw
    costed = [(evaluate_cost(merged_weaks, m), m) for m in qas]
    from .core import dominates

    best = costed[0][0]
    for cv, _ in costed[1:]:
        if dominates(cv, best):
            best = cv
    return [m for cv, m in costed if cv == best], best


def countermoves(qp: QuantifiedProgram, m1: Interpretation, cfg: SolverConfig) -> set:
    """True countermoves to a move, straight from the game definition."""
    inner = qp.p2 + fix(qp.p1, m1)
    out = enumerate_optimal(inner, cfg)
    if out.status is SolveStatus.UNKNOWN:
        raise ReferenceUnknown("inner enumeration timed out")
    if out.status is SolveStatus.UNSAT:
        return set()
    hp = head_preds(qp.p2)
    result = set()
    for m2 in out.models:
        sat = satisfies_check_program(qp, m2, cfg)
        counters = (not sat) if qp.q1 is Quantifier.EXISTS else sat
        if counters:
            result.add(frozenset(a for a in m2 if (a.pred, len(a.args)) in hp))
    return result


def report(
    qp: QuantifiedProgram,
    cfg: SolverConfig,
    *,
    cap: int = DEFAULT_MOVE_CAP,
    workers: int = 1,
) -> ReferenceReport:
    if qp.q1 is Quantifier.EXISTS:
        qas = enumerate_qas(qp, cfg, cap=cap, workers=workers)
        opt, cost = optimal_qas(qp, cfg, cap=cap, workers=workers)
        return ReferenceReport(bool(qas), qas, opt, cost)
    return ReferenceReport(coherent(qp, cfg, cap=cap, workers=workers), [], [], None)
