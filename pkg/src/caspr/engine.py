"""CEGAR loop: alternate countermove search and abstraction refinement until a
winning move is found or every move is defeated by a known countermove.

The refined abstraction carries, per countermove, the three graded weak
constraints of the refinement program.  With several recorded countermoves
their per-level sums can prefer a defeated move over a clean one, so a defeat
verdict on the graded optimum is confirmed by re-solving with the bands
collapsed into one defeat indicator per countermove (which makes "some move
evades every known countermove" exact).  The collapsed form is also used as
the primary ordering by the lower-bound optimization strategy, where moves
that evade all known countermoves must be ranked by the weak constraints
below the refinement band alone.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .core import (
    Atom,
    Interpretation,
    Lit,
    Num,
    Program,
    QuantifiedProgram,
    RESERVED_PREFIX,
    Rule,
    WeakConstraint,
    atom_preds_of_body,
    head_preds,
)
from .oracle import SolveStatus, SolverConfig, solve_optimal
from .transform import (
    UNSAT_ATOM,
    CountermoveRecord,
    NonAlternating,
    ctr,
    fix,
    min_level,
    ref,
)


class EngineError(Exception):
    pass


class RefinementLoopError(EngineError):
    """A countermove was rediscovered; the refinement failed to exclude it."""


class Outcome(enum.Enum):
    WINNING = "winning"
    NO_WINNING_MOVE = "no_winning_move"
    UNKNOWN = "unknown"


@dataclass
class CegarResult:
    outcome: Outcome
    move: Interpretation | None = None
    reason: str | None = None
    iterations: int = 0
    oracle_calls: int = 0
    countermoves: list[CountermoveRecord] = field(default_factory=list)
    diagnostics: list[str] = field(default_factory=list)

    @property
    def winning(self) -> bool:
        return self.outcome is Outcome.WINNING


def p1_vocabulary(qp: QuantifiedProgram) -> set[tuple[str, int]]:
    """Predicates occurring anywhere in the user-supplied first program,
    reserved names excluded."""
    preds: set[tuple[str, int]] = set()
    for r in qp.p1.rules:
        if r.head is not None:
            preds.add((r.head.pred, len(r.head.args)))
        preds |= atom_preds_of_body(r.body)
    for w in qp.p1.weaks:
        preds |= atom_preds_of_body(w.body)
    return {(n, a) for n, a in preds if not n.startswith(RESERVED_PREFIX)}


def project_move(model: Interpretation, qp: QuantifiedProgram) -> Interpretation:
    vocab = p1_vocabulary(qp)
    return frozenset(a for a in model if (a.pred, len(a.args)) in vocab)


def extract_countermove(m2: Interpretation, qp: QuantifiedProgram) -> Interpretation:
    """Projection of a countermove-program model onto heads(P2)."""
    hp = head_preds(qp.p2)
    return frozenset(a for a in m2 if (a.pred, len(a.args)) in hp)


def defeat_check(n: Interpretation, cms) -> bool:
    """True iff some recorded countermove still counters the candidate: its
    reproduction succeeds (as), is undominated (no dom), and keeps the
    constraint status (unsat_neg) - i.e. all three refinement weaks violated."""
    for rec in cms:
        if rec.as_atom in n and rec.dom_atom not in n and rec.unsat_neg_atom in n:
            return True
    return False


def defeat_atom(rec: CountermoveRecord) -> Atom:
    return Atom(f"caspr_def_{rec.beta}")


def defeat_indicator(rec: CountermoveRecord) -> Rule:
    """Single atom equivalent to the three defeat conditions of a record."""
    return Rule(
        defeat_atom(rec),
        (
            Lit(rec.as_atom),
            Lit(rec.dom_atom, neg=True),
            Lit(rec.unsat_neg_atom),
        ),
    )


class _Cegar:
    def __init__(
        self,
        qp: QuantifiedProgram,
        cfg: SolverConfig,
        extra_abstraction: Program | None,
        initial_countermoves,
        collapse_band: bool,
    ):
        if not qp.alternating:
            raise NonAlternating("the CEGAR engine requires alternating quantifiers")
        self.qp = qp
        self.cfg = cfg
        self.extra = extra_abstraction
        self.collapse_band = collapse_band
        self.cms: list[CountermoveRecord] = list(initial_countermoves)
        self.seen_ces = {rec.ce for rec in self.cms}
        self.ctr_prog = ctr(qp)
        self.lmin = min_level(qp.p1)
        self.calls = 0
        self.iterations = 0
        self.diagnostics: list[str] = []

    def _abstraction(self, collapsed: bool) -> Program:
        a = self.qp.p1
        if self.extra is not None:
            a = a + self.extra
        for rec in self.cms:
            r = ref(self.qp, rec)
            if collapsed:
                a = a + Program(r.rules + (defeat_indicator(rec),))
                a = a + Program(
                    weaks=(WeakConstraint((Lit(defeat_atom(rec)),), Num(1), self.lmin - 1),)
                )
            else:
                a = a + r
        return a

    def _solve(self, p: Program):
        self.calls += 1
        return solve_optimal(p, self.cfg)

    def _result(self, outcome: Outcome, move=None, reason=None) -> CegarResult:
        return CegarResult(
            outcome,
            move=move,
            reason=reason,
            iterations=self.iterations,
            oracle_calls=self.calls,
            countermoves=self.cms,
            diagnostics=self.diagnostics,
        )

    def _unknown(self, what: str) -> CegarResult:
        return self._result(
            Outcome.UNKNOWN,
            reason=f"oracle returned unknown during {what} (iteration {self.iterations})",
        )

    def _next_move(self, what: str):
        """Solve the abstraction; returns (result-or-None, move-or-None).

        A defeat verdict on a graded optimum with several countermoves may be
        an artifact of per-level cost summation, so it is confirmed on the
        collapsed abstraction before concluding that no winning move exists.
        """
        out = self._solve(self._abstraction(self.collapse_band))
        if out.status is SolveStatus.UNKNOWN:
            return self._unknown(what), None
        if out.status is SolveStatus.UNSAT:
            return self._result(Outcome.NO_WINNING_MOVE), None
        n = out.models[0]
        if not defeat_check(n, self.cms):
            return None, n
        if self.collapse_band or len(self.cms) <= 1:
            return self._result(Outcome.NO_WINNING_MOVE), None
        # graded bands summed over countermoves are not exact: confirm
        out = self._solve(self._abstraction(True))
        if out.status is SolveStatus.UNKNOWN:
            return self._unknown(what + " (collapsed confirmation)"), None
        if out.status is SolveStatus.UNSAT:
            return self._result(Outcome.NO_WINNING_MOVE), None
        n = out.models[0]
        if defeat_check(n, self.cms):
            return self._result(Outcome.NO_WINNING_MOVE), None
        self.diagnostics.append(
            f"iteration {self.iterations}: graded optimum defeated but an evading "
            f"move exists; continuing from the collapsed optimum"
        )
        return None, n

    def run(self, max_iterations, on_candidate) -> CegarResult:
        res, n = self._next_move("initial move search")
        if res is not None:
            return res
        m1 = project_move(n, self.qp)

        while True:
            self.iterations += 1
            if max_iterations is not None and self.iterations > max_iterations:
                return self._result(
                    Outcome.UNKNOWN, reason=f"iteration cap {max_iterations} exceeded"
                )
            if on_candidate is not None:
                on_candidate(m1)

            out = self._solve(self.ctr_prog + fix(self.qp.p1, m1))
            if out.status is SolveStatus.UNKNOWN:
                return self._unknown("countermove search")
            if out.status is SolveStatus.UNSAT or UNSAT_ATOM in out.models[0]:
                # no candidate countermove at all, or every optimal one is spurious
                return self._result(Outcome.WINNING, move=m1)

            ce = extract_countermove(out.models[0], self.qp)
            if ce in self.seen_ces:
                raise RefinementLoopError(f"countermove {sorted(map(str, ce))} rediscovered")
            self.seen_ces.add(ce)
            self.cms.append(CountermoveRecord(len(self.cms) + 1, ce))

            res, n = self._next_move("refined move search")
            if res is not None:
                return res
            m1 = project_move(n, self.qp)


def find_winning_move(
    qp: QuantifiedProgram,
    cfg: SolverConfig,
    *,
    extra_abstraction: Program | None = None,
    initial_countermoves=(),
    collapse_band: bool = False,
    max_iterations: int | None = None,
    on_candidate=None,
) -> CegarResult:
    """Run the CEGAR loop on an alternating quantified program.

    `extra_abstraction` and `initial_countermoves` support the optimization
    strategies: extra rules/weaks join the abstraction, and previously
    discovered countermoves are re-installed before the first move search.
    With `collapse_band` the per-countermove refinement preference is a single
    defeat indicator, so weak constraints below the refinement band order the
    evading moves.
    """
    engine = _Cegar(qp, cfg, extra_abstraction, initial_countermoves, collapse_band)
    return engine.run(max_iterations, on_candidate)
