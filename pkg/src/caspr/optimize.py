"""Optimal quantified answer set computation: upper-bound improving (iterate
CEGAR under a strict-improvement constraint) and lower-bound improving (shift
global weak constraints below the refinement levels and take the first winner).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .core import (
    Atom,
    Cmp,
    CostVector,
    Interpretation,
    Lit,
    Num,
    Program,
    QuantifiedProgram,
    Quantifier,
    Rule,
    Var,
    WeakConstraint,
    dominates,
    evaluate_cost,
)
from .engine import EngineError, Outcome, find_winning_move
from .oracle import SolverConfig
from .transform import NonAlternating, SignatureTag, cost_pred, cost_program, min_level

LOC_TAG = SignatureTag("loc")
MRG_TAG = SignatureTag("mrg")
PREV_PRED = "caspr_prev"
IMPROVED_ATOM = Atom("caspr_improved")


class OptOutcome(enum.Enum):
    OPTIMAL = "optimal"
    NO_QAS = "no_qas"
    UNKNOWN = "unknown"


@dataclass
class OptResult:
    outcome: OptOutcome
    move: Interpretation | None = None
    cost: CostVector | None = None
    reason: str | None = None
    qas_found: int = 0
    oracle_calls: int = 0


def merged_cost(qp: QuantifiedProgram, move: Interpretation) -> CostVector:
    """Cost of a quantified answer set: local P1 weaks and global weaks together."""
    return evaluate_cost(qp.p1.weaks + qp.cw, move)


def shift_global_levels(cw, l_min: int):
    """Affine remap of global weak levels strictly below l_min - 3, preserving
    their relative order."""
    cw = tuple(cw)
    if not cw:
        return ()
    lam = (l_min - 3) - max(w.level for w in cw) - 1
    return tuple(WeakConstraint(w.body, w.weight, w.level + lam, w.tuple_) for w in cw)


def _require_existential(qp: QuantifiedProgram):
    if not qp.alternating:
        raise NonAlternating("optimization requires an alternating program")
    if qp.q1 is not Quantifier.EXISTS:
        raise ValueError("optimal quantified answer sets are defined for existential programs")


def _improvement_program(qp: QuantifiedProgram, vstar: CostVector, prev: CostVector) -> Program:
    """Abstraction-side machinery for one upper-bound step: pin the local cost
    vector to the P1 optimum (all P1 optima share it) and require the merged
    cost vector to dominate the previous bound."""
    rules: list[Rule] = []
    weak_holder = Program(weaks=qp.p1.weaks)
    pin = cost_program(weak_holder, LOC_TAG)
    rules += list(pin.rules)
    cl_loc = cost_pred("cl", LOC_TAG)
    for level in sorted({w.level for w in qp.p1.weaks}):
        rules.append(
            Rule(
                None,
                (
                    Lit(Atom(cl_loc, (Var("T"), Num(level)))),
                    Cmp(Var("T"), "!=", Num(vstar[level])),
                ),
            )
        )

    merged_holder = Program(weaks=qp.p1.weaks + qp.cw)
    merged = cost_program(merged_holder, MRG_TAG)
    rules += list(merged.rules)
    cl_mrg = cost_pred("cl", MRG_TAG)
    levels = sorted({w.level for w in merged_holder.weaks})
    for level in levels:
        rules.append(Rule(Atom(PREV_PRED, (Num(level), Num(prev[level]))), ()))

    L, L1, T, P = Var("L"), Var("L1"), Var("T"), Var("P")
    diff, hh, hi = "caspr_impdiff", "caspr_imphashigher", "caspr_imphighest"
    rules += [
        Rule(
            Atom(diff, (L,)),
            (Lit(Atom(cl_mrg, (T, L))), Lit(Atom(PREV_PRED, (L, P))), Cmp(T, "!=", P)),
        ),
        Rule(Atom(hh, (L,)), (Lit(Atom(diff, (L,))), Lit(Atom(diff, (L1,))), Cmp(L, "<", L1))),
        Rule(Atom(hi, (L,)), (Lit(Atom(diff, (L,))), Lit(Atom(hh, (L,)), neg=True))),
        Rule(
            IMPROVED_ATOM,
            (
                Lit(Atom(hi, (L,))),
                Lit(Atom(cl_mrg, (T, L))),
                Lit(Atom(PREV_PRED, (L, P))),
                Cmp(T, "<", P),
            ),
        ),
        Rule(None, (Lit(IMPROVED_ATOM, neg=True),)),
    ]
    return Program(tuple(rules))


def solve_upper(
    qp: QuantifiedProgram,
    cfg: SolverConfig,
    *,
    max_steps: int | None = None,
    on_step=None,
) -> OptResult:
    """Start from any quantified answer set and demand strictly better merged
    cost until no winning move remains; the last one found is optimal."""
    _require_existential(qp)
    res = find_winning_move(qp, cfg)
    if res.outcome is Outcome.UNKNOWN:
        return OptResult(OptOutcome.UNKNOWN, reason=res.reason, oracle_calls=res.oracle_calls)
    if res.outcome is Outcome.NO_WINNING_MOVE:
        return OptResult(OptOutcome.NO_QAS, oracle_calls=res.oracle_calls)

    move = res.move
    cost = merged_cost(qp, move)
    vstar = evaluate_cost(qp.p1.weaks, move)
    cms = res.countermoves
    calls = res.oracle_calls
    steps = 1
    if on_step is not None:
        on_step(move, cost)

    if not qp.p1.weaks and not qp.cw:
        return OptResult(OptOutcome.OPTIMAL, move, cost, qas_found=1, oracle_calls=calls)

    while True:
        if max_steps is not None and steps >= max_steps:
            return OptResult(
                OptOutcome.UNKNOWN, reason="optimization step cap exceeded",
                qas_found=steps, oracle_calls=calls,
            )
        extra = _improvement_program(qp, vstar, cost)
        res = find_winning_move(qp, cfg, extra_abstraction=extra, initial_countermoves=cms)
        calls += res.oracle_calls
        if res.outcome is Outcome.UNKNOWN:
            return OptResult(
                OptOutcome.UNKNOWN, reason=res.reason, qas_found=steps, oracle_calls=calls
            )
        if res.outcome is Outcome.NO_WINNING_MOVE:
            return OptResult(OptOutcome.OPTIMAL, move, cost, qas_found=steps, oracle_calls=calls)
        new_cost = merged_cost(qp, res.move)
        if not dominates(new_cost, cost):
            raise EngineError(
                f"upper bound failed to improve: {new_cost!r} does not dominate {cost!r}"
            )
        move, cost, cms = res.move, new_cost, res.countermoves
        steps += 1
        if on_step is not None:
            on_step(move, cost)


def solve_lower(qp: QuantifiedProgram, cfg: SolverConfig) -> OptResult:
    """Search moves that are optimal for the shifted global weaks first; the
    first winning move is an optimal quantified answer set."""
    _require_existential(qp)
    shifted = shift_global_levels(qp.cw, min_level(qp.p1))
    extra = Program(weaks=shifted) if shifted else None
    res = find_winning_move(qp, cfg, extra_abstraction=extra, collapse_band=True)
    if res.outcome is Outcome.UNKNOWN:
        return OptResult(OptOutcome.UNKNOWN, reason=res.reason, oracle_calls=res.oracle_calls)
    if res.outcome is Outcome.NO_WINNING_MOVE:
        return OptResult(OptOutcome.NO_QAS, oracle_calls=res.oracle_calls)
    cost = merged_cost(qp, res.move)
    return OptResult(
        OptOutcome.OPTIMAL, res.move, cost, qas_found=1, oracle_calls=res.oracle_calls
    )
