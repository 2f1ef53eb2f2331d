"""Shared test helpers: an independent brute-force ASP evaluator (naive
grounding, model checking, FLP-reduct minimality, set-semantics costs) and
seeded random instance generators.

The evaluator is deliberately written from the semantics, independently of the
package's grounder/search code, so differential tests mean something.
"""

from __future__ import annotations

import itertools
import random

from caspr.core import (
    Agg,
    Atom,
    Cmp,
    Lit,
    Num,
    Program,
    QuantifiedProgram,
    Quantifier,
    Rule,
    Sym,
    Var,
    WeakConstraint,
    term_key,
)

# ---------------------------------------------------------------------------
# brute-force evaluator


def _constants(p: Program):
    consts = set()

    def scan_terms(terms):
        for t in terms:
            if not isinstance(t, Var):
                consts.add(t)

    def scan_body(body):
        for lit in body:
            if isinstance(lit, Lit):
                scan_terms(lit.atom.args)
            elif isinstance(lit, Cmp):
                scan_terms((lit.lhs, lit.rhs))
            else:
                scan_terms((lit.guard,))
                for e in lit.elems:
                    scan_terms(e.terms)
                    for c in e.cond:
                        scan_terms(c.atom.args)

    for r in p.rules:
        if r.head is not None:
            scan_terms(r.head.args)
        scan_body(r.body)
    for w in p.weaks:
        scan_terms((w.weight,))
        scan_terms(w.tuple_)
        scan_body(w.body)
    return sorted(consts, key=term_key) or [Sym("bf_dummy")]


def _vars_of_statement(head, body):
    seen = []

    def add(name):
        if name not in seen:
            seen.append(name)

    def scan_terms(terms):
        for t in terms:
            if isinstance(t, Var):
                add(t.name)

    if head is not None:
        scan_terms(head.args)
    for lit in body:
        if isinstance(lit, Lit):
            scan_terms(lit.atom.args)
        elif isinstance(lit, Cmp):
            scan_terms((lit.lhs, lit.rhs))
        else:
            scan_terms((lit.guard,))
            for e in lit.elems:
                scan_terms(e.terms)
                for c in e.cond:
                    scan_terms(c.atom.args)
    return seen


def _apply(t, theta):
    return theta.get(t.name, t) if isinstance(t, Var) else t


def _ground_atom(a: Atom, theta) -> Atom:
    return Atom(a.pred, tuple(_apply(t, theta) for t in a.args))


def _cmp_holds(op, lhs, rhs) -> bool:
    if op == "=":
        return lhs == rhs
    if op == "!=":
        return lhs != rhs
    ka, kb = term_key(lhs), term_key(rhs)
    return {"<": ka < kb, "<=": ka <= kb, ">": ka > kb, ">=": ka >= kb}[op]


def _ground_body(body, theta, consts):
    """Ground a body; comparisons are resolved away; None if one is false."""
    out = []
    for lit in body:
        if isinstance(lit, Lit):
            out.append(Lit(_ground_atom(lit.atom, theta), lit.neg))
        elif isinstance(lit, Cmp):
            if not _cmp_holds(lit.op, _apply(lit.lhs, theta), _apply(lit.rhs, theta)):
                return None
        else:
            elems = []
            for e in lit.elems:
                local = [v for v in _vars_of_statement(None, [c for c in e.cond]) if v not in theta]
                local += [
                    t.name
                    for t in e.terms
                    if isinstance(t, Var) and t.name not in theta and t.name not in local
                ]
                for combo in itertools.product(consts, repeat=len(local)):
                    t2 = dict(theta)
                    t2.update(dict(zip(local, combo)))
                    elems.append(
                        (
                            tuple(_apply(t, t2) for t in e.terms),
                            tuple(Lit(_ground_atom(c.atom, t2), c.neg) for c in e.cond),
                        )
                    )
            out.append(("agg", lit.fn, tuple(elems), lit.op, _apply(lit.guard, theta)))
    return tuple(out)


def naive_ground(p: Program):
    """All ground instances over the Herbrand universe (rules and weaks)."""
    consts = _constants(p)
    rules = []
    for r in p.rules:
        names = _vars_of_statement(r.head, r.body)
        for combo in itertools.product(consts, repeat=len(names)):
            theta = dict(zip(names, combo))
            body = _ground_body(r.body, theta, consts)
            if body is None:
                continue
            head = _ground_atom(r.head, theta) if r.head is not None else None
            rules.append((head, body))
    weaks = []
    for w in p.weaks:
        names = _vars_of_statement(None, w.body)
        extra = [
            t.name
            for t in (w.weight, *w.tuple_)
            if isinstance(t, Var) and t.name not in names
        ]
        for combo in itertools.product(consts, repeat=len(names) + len(extra)):
            theta = dict(zip(names + extra, combo))
            body = _ground_body(w.body, theta, consts)
            if body is None:
                continue
            weight = _apply(w.weight, theta)
            tup = tuple(_apply(t, theta) for t in w.tuple_)
            weaks.append((weight, w.level, tup, body))
    return rules, weaks


def _lit_true(lit, interp) -> bool:
    if isinstance(lit, Lit):
        return (lit.atom in interp) != lit.neg
    # ("agg", fn, elems, op, guard)
    _, fn, elems, op, guard = lit
    tuples = set()
    for terms, cond in elems:
        if all(_lit_true(c, interp) for c in cond):
            tuples.add(terms)
    if fn == "#count":
        value = len(tuples)
    else:
        value = sum(t[0].value for t in tuples if isinstance(t[0], Num))
    return _cmp_holds(op, Num(value), guard)


def _body_true(body, interp) -> bool:
    return all(_lit_true(l, interp) for l in body)


def brute_answer_sets(p: Program, max_heads: int = 16):
    """All answer sets via candidate-subset enumeration and FLP-reduct
    minimality (coincides with GL on normal programs)."""
    rules, _ = naive_ground(p)
    heads = sorted({h for h, _ in rules if h is not None}, key=str)
    assert len(heads) <= max_heads, f"brute force over {len(heads)} atoms refused"
    answer_sets = []
    for bits in itertools.product((False, True), repeat=len(heads)):
        interp = frozenset(a for a, b in zip(heads, bits) if b)
        if not all(
            (h is not None and h in interp) or not _body_true(body, interp)
            for h, body in rules
        ):
            continue
        reduct = [(h, body) for h, body in rules if h is not None and _body_true(body, interp)]
        minimal = True
        true_atoms = sorted(interp, key=str)
        for k in range(len(true_atoms)):
            for drop in itertools.combinations(true_atoms, k + 1):
                j = interp - set(drop)
                if all((h in j) or not _body_true(body, j) for h, body in reduct):
                    minimal = False
                    break
            if not minimal:
                break
        if minimal:
            answer_sets.append(interp)
    return answer_sets


def brute_cost(p: Program, interp) -> dict[int, int]:
    """ws-style set-of-violations cost, written independently of the package."""
    _, weaks = naive_ground(p)
    triples = set()
    levels = set()
    for weight, level, tup, body in weaks:
        levels.add(level)
        if _body_true(body, interp):
            assert isinstance(weight, Num)
            triples.add((weight.value, level, tup))
    cost = {l: 0 for l in levels}
    for w, l, _ in triples:
        cost[l] += w
    return cost


def lex_leq(a: dict[int, int], b: dict[int, int]) -> bool:
    """a not dominated by b (a <= b in the dominance order)."""
    for l in sorted(set(a) | set(b), reverse=True):
        ca, cb = a.get(l, 0), b.get(l, 0)
        if ca != cb:
            return ca < cb
    return True


def brute_optimal_answer_sets(p: Program, max_heads: int = 16):
    models = brute_answer_sets(p, max_heads)
    if not models:
        return []
    costed = [(brute_cost(p, m), m) for m in models]
    return [m for c, m in costed if all(lex_leq(c, c2) for c2, _ in costed)]


# ---------------------------------------------------------------------------
# random instance generators


def choice_pair(name: str):
    a, na = Atom(name), Atom("n" + name)
    return [Rule(a, (Lit(na, neg=True),)), Rule(na, (Lit(a, neg=True),))]


def random_stratified(rng: random.Random, atoms=("a", "b", "c", "d", "e", "f", "g", "h")):
    """Stratified program with constraints: facts on a prefix, rules pointing
    strictly downward in the atom order, a couple of constraints."""
    n = rng.randint(3, len(atoms))
    names = list(atoms[:n])
    rules = []
    for name in names[: rng.randint(1, 2)]:
        if rng.random() < 0.8:
            rules.append(Rule(Atom(name), ()))
    for k in range(rng.randint(1, 4)):
        hi = rng.randrange(1, n)
        head = Atom(names[hi])
        body = []
        for name in rng.sample(names[:hi], k=rng.randint(1, min(2, hi))):
            body.append(Lit(Atom(name), neg=rng.random() < 0.4))
        rules.append(Rule(head, tuple(body)))
    for _ in range(rng.randint(1, 2)):
        body = [
            Lit(Atom(name), neg=rng.random() < 0.3)
            for name in rng.sample(names, k=rng.randint(1, 2))
        ]
        rules.append(Rule(None, tuple(body)))
    return Program(tuple(rules))


def random_alternating_qp(
    rng: random.Random,
    *,
    q1=Quantifier.EXISTS,
    max_pairs1=3,
    max_pairs2=3,
    max_constraints=3,
    max_weaks2=2,
    global_weaks=False,
    max_global_levels=2,
) -> QuantifiedProgram:
    """Small alternating program: choice pairs in both subprograms, constraints
    over the joint vocabulary, optional local weaks in P2 and global weaks."""
    n1 = rng.randint(1, max_pairs1)
    n2 = rng.randint(1, max_pairs2)
    p1_names = [f"x{i}" for i in range(1, n1 + 1)]
    p2_names = [f"y{i}" for i in range(1, n2 + 1)]
    p1_rules = [r for nm in p1_names for r in choice_pair(nm)]
    p2_rules = [r for nm in p2_names for r in choice_pair(nm)]

    all_atoms = [nm for nm in p1_names + p2_names] + [
        "n" + nm for nm in p1_names + p2_names
    ]

    def rand_body(k):
        return tuple(
            Lit(Atom(nm), neg=rng.random() < 0.3) for nm in rng.sample(all_atoms, k=k)
        )

    c_rules = []
    for _ in range(rng.randint(0, max_constraints)):
        c_rules.append(Rule(None, rand_body(rng.randint(1, 3))))

    p2_weaks = []
    for _ in range(rng.randint(0, max_weaks2)):
        p2_weaks.append(
            WeakConstraint(rand_body(rng.randint(1, 2)), Num(rng.randint(1, 2)), rng.randint(1, 2))
        )

    cw = ()
    if global_weaks:
        p1_atoms = p1_names + ["n" + nm for nm in p1_names]
        levels = [1, 2][: rng.randint(1, max_global_levels)]
        ws = []
        for _ in range(rng.randint(1, 2)):
            body = tuple(
                Lit(Atom(nm), neg=rng.random() < 0.3)
                for nm in rng.sample(p1_atoms, k=rng.randint(1, 2))
            )
            ws.append(WeakConstraint(body, Num(rng.randint(1, 2)), rng.choice(levels)))
        cw = tuple(ws)

    return QuantifiedProgram(
        q1,
        Program(tuple(p1_rules)),
        Quantifier.FORALL if q1 is Quantifier.EXISTS else Quantifier.EXISTS,
        Program(tuple(p2_rules), tuple(p2_weaks)),
        Program(tuple(c_rules)),
        cw,
    )


def random_ground_program(rng: random.Random, max_atoms=6, with_weaks=True) -> Program:
    """Random ground normal program for solver differential tests."""
    n = rng.randint(2, max_atoms)
    names = [f"p{i}" for i in range(1, n + 1)]
    rules = []
    for _ in range(rng.randint(n, 2 * n)):
        head = Atom(rng.choice(names))
        body = tuple(
            Lit(Atom(nm), neg=rng.random() < 0.5)
            for nm in rng.sample(names, k=rng.randint(0, 2))
        )
        rules.append(Rule(head, body))
    for _ in range(rng.randint(0, 2)):
        body = tuple(
            Lit(Atom(nm), neg=rng.random() < 0.5)
            for nm in rng.sample(names, k=rng.randint(1, 2))
        )
        rules.append(Rule(None, body))
    weaks = []
    if with_weaks:
        for _ in range(rng.randint(0, 3)):
            body = tuple(
                Lit(Atom(nm), neg=rng.random() < 0.5)
                for nm in rng.sample(names, k=rng.randint(1, 2))
            )
            weaks.append(
                WeakConstraint(body, Num(rng.randint(1, 3)), rng.randint(1, 2))
            )
    return Program(tuple(rules), tuple(weaks))


# random AST generator for the parse/emit round-trip


def random_term(rng: random.Random, allow_var=True):
    r = rng.random()
    if allow_var and r < 0.3:
        return Var(rng.choice(["X", "Y", "Z"]))
    if r < 0.65:
        return Num(rng.randint(-9, 9))
    return Sym(rng.choice(["k1", "k2", "foo"]))


def random_roundtrip_program(rng: random.Random) -> Program:
    preds = ["p", "q", "r"]
    consts = [Sym("c1"), Sym("c2"), Num(0), Num(3), Num(-2)]

    def rand_atom(vars_ok=True, arity=None):
        name = rng.choice(preds)
        k = rng.randint(0, 2) if arity is None else arity
        args = tuple(
            Var(rng.choice(["X", "Y"])) if (vars_ok and rng.random() < 0.4) else rng.choice(consts)
            for _ in range(k)
        )
        return Atom(name, args)

    rules = []
    for _ in range(rng.randint(1, 6)):
        head = rand_atom() if rng.random() < 0.8 else None
        body = []
        # a positive literal first keeps things safe
        anchor = rand_atom()
        body.append(Lit(anchor))
        anchor_vars = [t for t in anchor.args if isinstance(t, Var)]
        for _ in range(rng.randint(0, 2)):
            kind = rng.random()
            if kind < 0.5:
                a = rand_atom(vars_ok=False)
                body.append(Lit(a, neg=rng.random() < 0.5))
            elif anchor_vars and kind < 0.75:
                body.append(Cmp(rng.choice(anchor_vars), rng.choice(["<", "<=", "!=", ">="]), Num(rng.randint(-3, 3))))
            else:
                elem = (
                    (Var("C"),),
                    (Lit(Atom("w", (Var("C"),))),),
                )
                body.append(Agg("#sum", (elem_to_aggelem(elem),), "=", Var("S")))
        if head is not None:
            # keep head variables bound by the anchor
            head = Atom(
                head.pred,
                tuple(
                    t if not isinstance(t, Var) or t in anchor_vars else rng.choice(consts)
                    for t in head.args
                ),
            )
        rules.append(Rule(head, tuple(body)))
    weaks = []
    for _ in range(rng.randint(0, 2)):
        anchor = rand_atom()
        avars = [t for t in anchor.args if isinstance(t, Var)]
        body = (Lit(anchor),)
        tup = tuple(rng.choice(avars + consts) if avars else rng.choice(consts) for _ in range(rng.randint(0, 2)))
        weight = rng.choice(avars) if avars and rng.random() < 0.3 else Num(rng.randint(-3, 5))
        weaks.append(WeakConstraint(body, weight, rng.randint(-3, 3), tup))
    return Program(tuple(rules), tuple(weaks))


def elem_to_aggelem(pair):
    from caspr.core import AggElem

    return AggElem(pair[0], pair[1])
