"""Program transformations for counterexample search and abstraction refinement:
signature renaming, move fixing, complement, relaxation, countermove program,
answer-set/cost/dominance checks, guarded activation, and refinement assembly.

All fresh predicates carry the reserved caspr_ prefix; names derived from a
countermove are keyed by its 1-based id (beta = "ce<id>").
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import (
    Agg,
    AggElem,
    Atom,
    Cmp,
    Interpretation,
    Lit,
    Num,
    Program,
    QuantifiedProgram,
    Quantifier,
    RESERVED_PREFIX,
    Rule,
    Var,
    WeakConstraint,
    head_preds,
    is_stratified,
)

V_ATOM = Atom("caspr_v")
UNSAT_ATOM = Atom("caspr_unsat")


class TransformError(Exception):
    pass


class NotStratified(TransformError):
    pass


class NonHeadAtom(TransformError):
    pass


class NonAlternating(TransformError):
    pass


def _strip_reserved(name: str) -> str:
    return name[len(RESERVED_PREFIX):] if name.startswith(RESERVED_PREFIX) else name


@dataclass(frozen=True)
class SignatureTag:
    """Fresh-signature descriptor; renders predicates as caspr_<alpha>[_<beta>]_<name>."""

    alpha: str
    beta: str = ""

    def pred(self, base: str) -> str:
        parts = [self.alpha] + ([self.beta] if self.beta else []) + [_strip_reserved(base)]
        return RESERVED_PREFIX + "_".join(parts)

    def aux(self, base: str) -> str:
        """Standalone fresh predicate (cost/check machinery), no original name."""
        parts = [base, self.alpha] + ([self.beta] if self.beta else [])
        return RESERVED_PREFIX + "_".join(parts)


Pattern = tuple[str, bool]  # predicate name, positive occurrence?


def head_literal_patterns(p: Program) -> frozenset[Pattern]:
    """heads(P) and their complements, as predicate-level patterns."""
    names = {name for name, _ in head_preds(p)}
    return frozenset((n, pol) for n in names for pol in (True, False))


def _rename_atom(a: Atom, positive: bool, patterns, tag: SignatureTag) -> Atom:
    if (a.pred, positive) in patterns:
        return Atom(tag.pred(a.pred), a.args)
    return a


def _rename_body(body, patterns, tag: SignatureTag):
    out = []
    for lit in body:
        if isinstance(lit, Lit):
            out.append(Lit(_rename_atom(lit.atom, not lit.neg, patterns, tag), lit.neg))
        elif isinstance(lit, Cmp):
            out.append(lit)
        elif isinstance(lit, Agg):
            elems = tuple(
                AggElem(
                    e.terms,
                    tuple(
                        Lit(_rename_atom(c.atom, not c.neg, patterns, tag), c.neg)
                        for c in e.cond
                    ),
                )
                for e in lit.elems
            )
            out.append(Agg(lit.fn, elems, lit.op, lit.guard))
    return tuple(out)


def rename(patterns, tag: SignatureTag, target):
    """Apply the signature substitution to a Program, Rule, WeakConstraint, or
    a body (sequence of literals); heads count as positive occurrences."""
    patterns = frozenset(patterns)
    if isinstance(target, Program):
        return Program(
            tuple(rename(patterns, tag, r) for r in target.rules),
            tuple(rename(patterns, tag, w) for w in target.weaks),
        )
    if isinstance(target, Rule):
        head = target.head
        if head is not None:
            head = _rename_atom(head, True, patterns, tag)
        return Rule(head, _rename_body(target.body, patterns, tag))
    if isinstance(target, WeakConstraint):
        return WeakConstraint(
            _rename_body(target.body, patterns, tag), target.weight, target.level, target.tuple_
        )
    return _rename_body(tuple(target), patterns, tag)


# ---------------------------------------------------------------------------
# move fixing


FIX_TAG = SignatureTag("fix")


def fix(p1: Program, m: Interpretation) -> Program:
    """Facts for the move plus per-predicate guards forbidding any other atom
    over heads(p1); equivalent to fixing the move without grounding the base."""
    hp = head_preds(p1)
    for a in m:
        if (a.pred, len(a.args)) not in hp:
            raise NonHeadAtom(f"{a} is not over a head predicate of the fixed program")
    rules: list[Rule] = []
    for a in sorted(m, key=str):
        rules.append(Rule(a, ()))
        rules.append(Rule(Atom(FIX_TAG.pred(a.pred), a.args), ()))
    for name, arity in sorted(hp):
        args = tuple(Var(f"X{i + 1}") for i in range(arity))
        rules.append(
            Rule(
                None,
                (Lit(Atom(name, args)), Lit(Atom(FIX_TAG.pred(name), args), neg=True)),
            )
        )
    return Program(tuple(rules))


# ---------------------------------------------------------------------------
# complement / relaxed / countermove program


def _require_stratified_check_program(c: Program, op: str):
    if c.weaks:
        raise TransformError(f"{op} requires a weak-free program")
    if not is_stratified(c):
        raise NotStratified(f"{op} requires a stratified program")


def complement(c: Program) -> Program:
    """Constraint heads become a violation witness; coherent iff c is incoherent."""
    _require_stratified_check_program(c, "complement")
    rules = [r if r.head is not None else Rule(V_ATOM, r.body) for r in c.rules]
    rules.append(Rule(None, (Lit(V_ATOM, neg=True),)))
    return Program(tuple(rules))


def relaxed(c: Program, level: int) -> Program:
    """Constraints softened into a penalized violation atom; always coherent."""
    _require_stratified_check_program(c, "relaxed")
    rules = [r if r.head is not None else Rule(UNSAT_ATOM, r.body) for r in c.rules]
    weaks = (WeakConstraint((Lit(UNSAT_ATOM),), Num(1), level),)
    return Program(tuple(rules), weaks)


def min_level(p: Program) -> int:
    """Smallest weak-constraint priority level, 0 when there are none."""
    return min((w.level for w in p.weaks), default=0)


def ctr(qp: QuantifiedProgram) -> Program:
    """Countermove program: its unsat-free optimal answer sets are exactly the
    countermoves to the fixed move."""
    if not qp.alternating:
        raise NonAlternating("the countermove program is defined for alternating programs")
    l = min_level(qp.p2) - 1
    part = relaxed(complement(qp.c), l) if qp.q1 is Quantifier.EXISTS else relaxed(qp.c, l)
    return qp.p2 + part


# ---------------------------------------------------------------------------
# countermove records


@dataclass(frozen=True)
class CountermoveRecord:
    """A discovered countermove and the fresh names its refinement owns."""

    id: int
    ce: Interpretation  # projection onto heads(P2)

    @property
    def beta(self) -> str:
        return f"ce{self.id}"

    @property
    def pos_tag(self) -> SignatureTag:
        return SignatureTag("pos", self.beta)

    @property
    def neg_tag(self) -> SignatureTag:
        return SignatureTag("neg", self.beta)

    @property
    def clone_tag(self) -> SignatureTag:
        return SignatureTag("clone", self.beta)

    @property
    def as_atom(self) -> Atom:
        return Atom(f"caspr_as_{self.beta}")

    @property
    def fail_atom(self) -> Atom:
        return Atom(f"caspr_fail_{self.beta}")

    @property
    def dom_atom(self) -> Atom:
        return Atom(f"caspr_dom_{self.beta}")

    @property
    def unsat_neg_atom(self) -> Atom:
        return Atom(self.neg_tag.pred(UNSAT_ATOM.pred))


# ---------------------------------------------------------------------------
# refinement building blocks


def check_as(p2: Program, rec: CountermoveRecord) -> Program:
    """Reduct-based reproduction check: derives the record's as-atom iff the
    countermove is an answer set of p2 under the current move."""
    names = sorted({name for name, _ in head_preds(p2)})
    pos_pats = frozenset((n, True) for n in names)
    neg_pats = frozenset((n, False) for n in names)

    rules: list[Rule] = []
    for a in sorted(rec.ce, key=str):
        rules.append(Rule(Atom(rec.neg_tag.pred(a.pred), a.args), ()))
    fail_rules: list[Rule] = []
    for r in p2.rules:
        renamed = rename(pos_pats, rec.pos_tag, rename(neg_pats, rec.neg_tag, r))
        if r.head is not None:
            rules.append(renamed)
        else:
            fail_rules.append(Rule(rec.fail_atom, renamed.body))
    rules += fail_rules
    for name, arity in sorted(head_preds(p2)):
        args = tuple(Var(f"X{i + 1}") for i in range(arity))
        posa = Atom(rec.pos_tag.pred(name), args)
        nega = Atom(rec.neg_tag.pred(name), args)
        rules.append(Rule(rec.fail_atom, (Lit(posa), Lit(nega, neg=True))))
        rules.append(Rule(rec.fail_atom, (Lit(nega), Lit(posa, neg=True))))
    rules.append(Rule(rec.as_atom, (Lit(rec.fail_atom, neg=True),)))
    return Program(tuple(rules))


def cost_pred(kind: str, tag: SignatureTag) -> str:
    return tag.aux(kind)


def cost_program(p: Program, tag: SignatureTag) -> Program:
    """Violation-tuple rules plus per-level sum rules deriving the cost of a
    model as caspr_cl_* atoms (sum over distinct tuples, matching set semantics)."""
    if not p.weaks:
        return Program()
    v_name = cost_pred("v", tag)
    cl_name = cost_pred("cl", tag)
    rules: list[Rule] = []
    for w in p.weaks:
        head = Atom(v_name, (w.weight, Num(w.level)) + w.tuple_)
        rules.append(Rule(head, w.body))
    for level in sorted({w.level for w in p.weaks}):
        arities = sorted({len(w.tuple_) for w in p.weaks if w.level == level})
        elems = []
        for k in arities:
            tvars = tuple(Var(f"T{i + 1}") for i in range(k))
            cond_atom = Atom(v_name, (Var("C"), Num(level)) + tvars)
            elems.append(AggElem((Var("C"),) + tvars, (Lit(cond_atom),)))
        agg = Agg("#sum", tuple(elems), "=", Var("T"))
        rules.append(Rule(Atom(cl_name, (Var("T"), Num(level))), (agg,)))
    return Program(tuple(rules))


def clone_rules(p: Program, rec: CountermoveRecord) -> Program:
    """Per-countermove clone of the rules (weak constraints are not cloned)."""
    return rename(head_literal_patterns(p), rec.clone_tag, Program(p.rules))


def check_dom(
    tag_a: SignatureTag, tag_b: SignatureTag, levels, rec: CountermoveRecord
) -> Program:
    """Rules deriving the record's dom-atom iff the tag_a cost vector is
    dominated by the tag_b one (tag_b strictly lower at the highest differing
    level).  `levels` documents the shared level set of the two cost programs."""
    del levels  # both cost programs define cl atoms for every shared level
    cl_a = cost_pred("cl", tag_a)
    cl_b = cost_pred("cl", tag_b)
    diff = f"caspr_diff_{rec.beta}"
    hh = f"caspr_hashigher_{rec.beta}"
    hi = f"caspr_highest_{rec.beta}"
    L, L1, C1, C2 = Var("L"), Var("L1"), Var("C1"), Var("C2")
    rules = (
        Rule(
            Atom(diff, (L,)),
            (Lit(Atom(cl_a, (C1, L))), Lit(Atom(cl_b, (C2, L))), Cmp(C1, "!=", C2)),
        ),
        Rule(
            Atom(hh, (L,)),
            (Lit(Atom(diff, (L,))), Lit(Atom(diff, (L1,))), Cmp(L, "<", L1)),
        ),
        Rule(
            Atom(hi, (L,)),
            (Lit(Atom(diff, (L,))), Lit(Atom(hh, (L,)), neg=True)),
        ),
        Rule(
            rec.dom_atom,
            (
                Lit(Atom(hi, (L,))),
                Lit(Atom(cl_a, (C1, L))),
                Lit(Atom(cl_b, (C2, L))),
                Cmp(C2, "<", C1),
            ),
        ),
    )
    return Program(rules)


def controlled_or(p: Program, guard: Lit) -> Program:
    """Append the guard to every rule and weak-constraint body; with the guard
    false the block is inert."""
    for r in p.rules:
        for lit in r.body:
            if isinstance(lit, Lit) and lit.atom == guard.atom:
                raise TransformError(f"guard {guard.atom} already occurs in a body of the program")
    rules = tuple(Rule(r.head, r.body + (guard,)) for r in p.rules)
    weaks = tuple(
        WeakConstraint(w.body + (guard,), w.weight, w.level, w.tuple_) for w in p.weaks
    )
    return Program(rules, weaks)


def ref(qp: QuantifiedProgram, rec: CountermoveRecord) -> Program:
    """Refinement program: added to the abstraction, its three weak constraints
    are all violated exactly when the recorded countermove still counters the
    candidate move (reproducible, optimal, and constraint-status unchanged)."""
    if not qp.alternating:
        raise NonAlternating("the refinement program is defined for alternating programs")
    p2 = qp.p2
    lmin = min_level(qp.p1)
    as_lit = Lit(rec.as_atom)
    pats = head_literal_patterns(p2)

    blocks: list[Program] = [check_as(p2, rec)]
    wc1 = WeakConstraint((as_lit,), Num(1), lmin - 1)

    if p2.weaks:
        neg_cost_tag = SignatureTag("neg", rec.beta)
        clone_cost_tag = SignatureTag("clone", rec.beta)
        p2_ce = rename(pats, rec.neg_tag, p2)
        blocks.append(controlled_or(cost_program(p2_ce, neg_cost_tag), as_lit))
        blocks.append(controlled_or(clone_rules(p2, rec), as_lit))
        p2_clone = rename(pats, rec.clone_tag, p2)
        blocks.append(controlled_or(cost_program(p2_clone, clone_cost_tag), as_lit))
        levels = {w.level for w in p2.weaks}
        blocks.append(controlled_or(check_dom(neg_cost_tag, clone_cost_tag, levels, rec), as_lit))
    # without local weak constraints every reproduction is optimal: the cost
    # programs are empty, dom is underivable and the clone is an inert free
    # choice, so the optimality-comparison blocks are dropped entirely
    wc2 = WeakConstraint((as_lit, Lit(rec.dom_atom, neg=True)), Num(1), lmin - 2)

    if qp.q1 is Quantifier.EXISTS:
        cp = relaxed(qp.c, lmin - 3)
    else:
        cp = relaxed(complement(qp.c), lmin - 3)
    cp_pats = pats | head_literal_patterns(cp)
    blocks.append(controlled_or(rename(cp_pats, rec.neg_tag, cp), as_lit))

    rules: tuple[Rule, ...] = ()
    weaks: tuple[WeakConstraint, ...] = ()
    for b in blocks:
        rules += b.rules
        weaks += b.weaks
    return Program(rules, (wc1, wc2) + weaks)
