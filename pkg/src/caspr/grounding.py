"""Bottom-up grounder for the solver backend.

Produces ground normal rules and ground weak constraints from a Program.
Aggregates are compiled away into partial-sum chains over synthesized
predicates; synthesized names use the caspr_z prefix, which is rejected in
solver input to avoid collisions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .core import (
    Agg,
    Atom,
    Cmp,
    Lit,
    Num,
    Program,
    Rule,
    Sym,
    Term,
    Var,
    _eval_cmp_ground,
    subst_atom,
    term_key,
)

SYNTH_PREFIX = "caspr_z"


class GroundingError(Exception):
    pass


@dataclass(frozen=True)
class GroundRule:
    head: Atom | None
    pos: tuple[Atom, ...]
    neg: tuple[Atom, ...]


@dataclass(frozen=True)
class GroundWeak:
    weight: int
    level: int
    tuple_: tuple[Term, ...]
    pos: tuple[Atom, ...]
    neg: tuple[Atom, ...]


@dataclass
class GroundProgram:
    rules: list[GroundRule]
    weaks: list[GroundWeak]
    shown: set[Atom]
    unsat: bool = False  # a constraint with empty (always-true) body was grounded


def _subst(t: Term, theta) -> Term:
    if isinstance(t, Var):
        return theta.get(t.name, t)
    return t


class _Index:
    """Possible-atom set with a per-(pred, arity) index."""

    def __init__(self):
        self.atoms: set[Atom] = set()
        self.by_pred: dict[tuple[str, int], list[Atom]] = {}

    def add(self, a: Atom) -> bool:
        if a in self.atoms:
            return False
        self.atoms.add(a)
        self.by_pred.setdefault((a.pred, len(a.args)), []).append(a)
        return True

    def candidates(self, pattern: Atom):
        return self.by_pred.get((pattern.pred, len(pattern.args)), ())

    def __contains__(self, a: Atom):
        return a in self.atoms


def _match(pattern: Atom, ground: Atom, theta):
    if pattern.is_ground:
        return theta if pattern.args == ground.args else None
    out = None
    for pt, gt in zip(pattern.args, ground.args):
        if isinstance(pt, Var):
            if out is None:
                bound = theta.get(pt.name)
            else:
                bound = out.get(pt.name, theta.get(pt.name))
            if bound is None:
                if out is None:
                    out = {}
                out[pt.name] = gt
            elif bound != gt:
                return None
        else:
            if pt != gt:
                return None
    merged = dict(theta)
    if out:
        merged.update(out)
    return merged


class _Synth:
    """Factory for synthesized predicates plus the rules defining them."""

    def __init__(self):
        self.n = 0
        self.rules: list[GroundRule] = []

    def fresh(self, kind: str) -> str:
        self.n += 1
        return f"{SYNTH_PREFIX}{kind}{self.n}"


def _split_body(body):
    positives, negatives, comparisons, aggregates = [], [], [], []
    for lit in body:
        if isinstance(lit, Lit):
            (negatives if lit.neg else positives).append(lit.atom)
        elif isinstance(lit, Cmp):
            comparisons.append(lit)
        else:
            aggregates.append(lit)
    return positives, negatives, comparisons, aggregates


def _cmp_ready(cmp: Cmp, theta) -> bool:
    for t in (cmp.lhs, cmp.rhs):
        if isinstance(t, Var) and t.name not in theta:
            return False
    return True


def _eval_cmp(cmp: Cmp, theta) -> bool:
    return _eval_cmp_ground(_subst(cmp.lhs, theta), cmp.op, _subst(cmp.rhs, theta))


def _instantiations(positives, comparisons, index: _Index, theta0=None):
    """All substitutions binding the positive literals against the index with
    every (eventually ground) comparison satisfied."""
    pending_cmp = list(comparisons)
    order = list(positives)

    def extend(i, theta, cmps):
        ready = [c for c in cmps if _cmp_ready(c, theta)]
        for c in ready:
            if not _eval_cmp(c, theta):
                return
        rest = [c for c in cmps if not _cmp_ready(c, theta)]
        if i == len(order):
            if rest:
                raise GroundingError(f"comparison with unbound variable: {rest[0]}")
            yield theta
            return
        pat = order[i]
        for ga in index.candidates(pat):
            t2 = _match(pat, ga, theta)
            if t2 is not None:
                yield from extend(i + 1, t2, rest)

    yield from extend(0, dict(theta0 or {}), pending_cmp)


class _AggInstance:
    """One aggregate occurrence under a fixed binding of the rule's globals."""

    def __init__(self, agg: Agg, theta, index: _Index, synth: _Synth, max_sums: int):
        self.agg = agg
        self.theta = theta
        # distinct ground element tuples -> list of (pos, neg) condition bodies
        tuples: dict[tuple, list[tuple[tuple[Atom, ...], tuple[Atom, ...]]]] = {}
        for elem in agg.elems:
            pos = [c.atom for c in elem.cond if not c.neg]
            neg = [c.atom for c in elem.cond if c.neg]
            for t2 in _instantiations(pos, [], index, theta):
                terms = tuple(_subst(t, t2) for t in elem.terms)
                if any(isinstance(t, Var) for t in terms):
                    raise GroundingError(f"unbound aggregate element term in {agg}")
                gpos = tuple(subst_atom(a, t2) for a in pos)
                gneg = tuple(subst_atom(a, t2) for a in neg if subst_atom(a, t2) in index)
                # negated condition atoms that can never hold are simply true
                tuples.setdefault(terms, []).append((gpos, gneg))
        self.entries = []
        for terms in sorted(tuples, key=lambda ts: tuple(term_key(t) for t in ts)):
            if agg.fn == "#count":
                w = 1
            else:
                first = terms[0]
                if not isinstance(first, Num):
                    raise GroundingError(f"non-integer #sum weight {first} in {agg}")
                w = first.value
            self.entries.append((terms, w, tuples[terms]))

        # indicator per distinct tuple
        self.indicators: list[tuple[Atom, int]] = []
        for terms, w, bodies in self.entries:
            ind = Atom(synth.fresh("t"), terms)
            for gpos, gneg in bodies:
                synth.rules.append(GroundRule(ind, gpos, gneg))
            self.indicators.append((ind, w))

        # partial-sum chain
        chain_pred = synth.fresh("s")
        prev_pred = f"{chain_pred}_0"
        synth.rules.append(GroundRule(Atom(prev_pred, (Num(0),)), (), ()))
        prev_reach = {0}
        for i, (ind, w) in enumerate(self.indicators, start=1):
            cur_pred = f"{chain_pred}_{i}"
            cur_reach = set()
            for v in sorted(prev_reach):
                pa = Atom(prev_pred, (Num(v),))
                synth.rules.append(GroundRule(Atom(cur_pred, (Num(v + w),)), (pa, ind), ()))
                synth.rules.append(GroundRule(Atom(cur_pred, (Num(v),)), (pa,), (ind,)))
                cur_reach.add(v + w)
                cur_reach.add(v)
            if len(cur_reach) > max_sums:
                raise GroundingError(f"aggregate sum domain exceeds {max_sums} values")
            prev_pred, prev_reach = cur_pred, cur_reach
        self.final_pred = prev_pred
        self.reachable = prev_reach
        self.synth = synth

    def resolve(self):
        """Yield (theta, body_atom or None) alternatives for this occurrence."""
        guard = _subst(self.agg.guard, self.theta)
        if isinstance(guard, Var):
            if self.agg.op != "=":
                raise GroundingError(f"unbound guard in non-assignment aggregate {self.agg}")
            for s in sorted(self.reachable):
                t2 = dict(self.theta)
                t2[guard.name] = Num(s)
                yield t2, Atom(self.final_pred, (Num(s),))
            return
        sat = {s for s in self.reachable if _eval_cmp_ground(Num(s), self.agg.op, guard)}
        if not sat:
            return
        if sat == self.reachable:
            yield dict(self.theta), None
            return
        ok = Atom(self.synth.fresh("ok"), ())
        for s in sorted(sat):
            self.synth.rules.append(GroundRule(ok, (Atom(self.final_pred, (Num(s),)),), ()))
        yield dict(self.theta), ok


def _domain_sums(agg: Agg, theta, index: _Index, max_sums: int):
    """Achievable guard values for an assignment aggregate in the domain pass."""
    sums = {0}
    seen = set()
    for elem in agg.elems:
        pos = [c.atom for c in elem.cond if not c.neg]
        for t2 in _instantiations(pos, [], index, theta):
            terms = tuple(_subst(t, t2) for t in elem.terms)
            if terms in seen:
                continue
            seen.add(terms)
            if agg.fn == "#count":
                w = 1
            else:
                if not isinstance(terms[0], Num):
                    raise GroundingError(f"non-integer #sum weight {terms[0]} in {agg}")
                w = terms[0].value
            sums |= {s + w for s in sums}
            if len(sums) > max_sums:
                raise GroundingError(f"aggregate sum domain exceeds {max_sums} values")
    return sums


def ground(program: Program, *, max_agg_sums: int = 4096) -> GroundProgram:
    from .core import all_pred_names

    for name in sorted(all_pred_names(program)):
        if name.startswith(SYNTH_PREFIX):
            raise GroundingError(f"input predicate {name!r} collides with solver-internal names")

    index = _Index()
    rule_parts = [( r, *_split_body(r.body)) for r in program.rules]

    # domain fixpoint over possible atoms (negation ignored, aggregates optimistic)
    changed = True
    while changed:
        changed = False
        for r, positives, _negatives, comparisons, aggregates in rule_parts:
            if r.head is None:
                continue
            for theta in _instantiations(positives, comparisons, index):
                thetas = [theta]
                for agg in aggregates:
                    guard = _subst(agg.guard, theta)
                    if isinstance(guard, Var) and agg.op == "=":
                        new_thetas = []
                        for th in thetas:
                            for s in _domain_sums(agg, th, index, max_agg_sums):
                                t2 = dict(th)
                                t2[guard.name] = Num(s)
                                new_thetas.append(t2)
                        thetas = new_thetas
                for th in thetas:
                    ha = subst_atom(r.head, th)
                    if not ha.is_ground:
                        raise GroundingError(f"unbound head variable in {r}")
                    if index.add(ha):
                        changed = True

    # emission
    synth = _Synth()
    out_rules: list[GroundRule] = []
    unsat = False
    seen_rules: set = set()

    def emit_rule(head, pos, neg):
        nonlocal unsat
        key = (head, pos, neg)
        if key in seen_rules:
            return
        seen_rules.add(key)
        if head is None and not pos and not neg:
            unsat = True
            return
        out_rules.append(GroundRule(head, pos, neg))

    for r, positives, negatives, comparisons, aggregates in rule_parts:
        for theta in _instantiations(positives, comparisons, index):
            alternatives = [(theta, [])]
            for agg in aggregates:
                new_alts = []
                for th, extra in alternatives:
                    inst = _AggInstance(agg, th, index, synth, max_agg_sums)
                    for t2, body_atom in inst.resolve():
                        new_alts.append((t2, extra + ([body_atom] if body_atom else [])))
                alternatives = new_alts
            for th, agg_atoms in alternatives:
                gpos = tuple(subst_atom(a, th) for a in positives) + tuple(agg_atoms)
                gneg = tuple(
                    ga
                    for a in negatives
                    if (ga := subst_atom(a, th)) in index or ga.pred.startswith(SYNTH_PREFIX)
                )
                head = None
                if r.head is not None:
                    head = subst_atom(r.head, th)
                    if head not in index:
                        raise GroundingError(f"internal: head {head} missing from domain pass")
                emit_rule(head, gpos, gneg)

    out_weaks: list[GroundWeak] = []
    for w in program.weaks:
        positives, negatives, comparisons, aggregates = _split_body(w.body)
        if aggregates:
            raise GroundingError(f"aggregate in weak-constraint body: {w}")
        for theta in _instantiations(positives, comparisons, index):
            weight = _subst(w.weight, theta)
            if not isinstance(weight, Num):
                raise GroundingError(f"non-integer weight in {w}")
            tup = tuple(_subst(t, theta) for t in w.tuple_)
            gpos = tuple(subst_atom(a, theta) for a in positives)
            gneg = tuple(ga for a in negatives if (ga := subst_atom(a, theta)) in index)
            out_weaks.append(GroundWeak(weight.value, w.level, tup, gpos, gneg))

    shown = {a for a in index.atoms if not a.pred.startswith(SYNTH_PREFIX)}
    return GroundProgram(out_rules + synth.rules, out_weaks, shown, unsat)
