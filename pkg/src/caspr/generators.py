"""Instance generators: 2-QBF encodings (universal-universal hardness shape,
reusable as ground truth) and Erdős–Rényi clique-coloring instances."""

from __future__ import annotations

from dataclasses import dataclass

from .core import (
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
    emit_quantified,
)


class IllFormedQbf(Exception):
    pass


@dataclass(frozen=True)
class Qbf2:
    """Forall-exists QBF with a CNF matrix of clauses of at most 3 literals."""

    x_vars: tuple[str, ...]
    y_vars: tuple[str, ...]
    clauses: tuple[tuple[tuple[str, bool], ...], ...]  # (var, positive)

    def __post_init__(self):
        if set(self.x_vars) & set(self.y_vars):
            raise IllFormedQbf("universal and existential variables overlap")
        if not self.clauses:
            raise IllFormedQbf("clause list is empty")
        allowed = set(self.x_vars) | set(self.y_vars)
        for cl in self.clauses:
            if not cl or len(cl) > 3:
                raise IllFormedQbf(f"clause size out of range: {cl}")
            for v, _sign in cl:
                if v not in allowed:
                    raise IllFormedQbf(f"unknown variable {v!r}")


T, F = Sym("t"), Sym("f")


def gen_qbf(phi: Qbf2) -> QuantifiedProgram:
    """Universal-universal program that is coherent iff the formula is true.

    The outer program guesses the universal assignment, the inner one lifts it,
    extends it over the existential variables and derives a violation witness
    preferred away by a weak constraint; the check program forbids it.
    """
    p1_rules = []
    for x in phi.x_vars:
        xa = Sym(x)
        p1_rules.append(Rule(Atom("taup", (xa, T)), (Lit(Atom("taup", (xa, F)), neg=True),)))
        p1_rules.append(Rule(Atom("taup", (xa, F)), (Lit(Atom("taup", (xa, T)), neg=True),)))

    p2_rules = []
    for x in phi.x_vars:
        xa = Sym(x)
        p2_rules.append(Rule(Atom("tau", (xa, T)), (Lit(Atom("taup", (xa, T))),)))
        p2_rules.append(Rule(Atom("tau", (xa, F)), (Lit(Atom("taup", (xa, F))),)))
    for y in phi.y_vars:
        ya = Sym(y)
        p2_rules.append(Rule(Atom("tau", (ya, T)), (Lit(Atom("tau", (ya, F)), neg=True),)))
        p2_rules.append(Rule(Atom("tau", (ya, F)), (Lit(Atom("tau", (ya, T)), neg=True),)))
    unsat = Atom("unsat")
    for i, cl in enumerate(phi.clauses, start=1):
        ci = Sym(f"c{i}")
        for v, positive in cl:
            value = T if positive else F
            p2_rules.append(Rule(Atom("sat", (ci,)), (Lit(Atom("tau", (Sym(v), value))),)))
        p2_rules.append(Rule(unsat, (Lit(Atom("sat", (ci,)), neg=True),)))
    p2_weaks = (WeakConstraint((Lit(unsat),), Num(1), 1),)

    c = Program((Rule(None, (Lit(unsat),)),))
    return QuantifiedProgram(
        Quantifier.FORALL,
        Program(tuple(p1_rules)),
        Quantifier.FORALL,
        Program(tuple(p2_rules), p2_weaks),
        c,
    )


def qbf_is_true(phi: Qbf2) -> bool:
    """Brute-force evaluation of the forall-exists formula."""

    def matrix(assign: dict[str, bool]) -> bool:
        return all(any(assign[v] == s for v, s in cl) for cl in phi.clauses)

    def exists_y(assign, ys):
        if not ys:
            return matrix(assign)
        return any(exists_y({**assign, ys[0]: b}, ys[1:]) for b in (False, True))

    def forall_x(assign, xs):
        if not xs:
            return exists_y(assign, list(phi.y_vars))
        return all(forall_x({**assign, xs[0]: b}, xs[1:]) for b in (False, True))

    return forall_x({}, list(phi.x_vars))


class SplitMix64:
    """Portable 64-bit PRNG (splitmix64); identical streams on every platform."""

    MASK = (1 << 64) - 1

    def __init__(self, seed: int):
        self.state = seed & self.MASK

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & self.MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & self.MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & self.MASK
        return z ^ (z >> 31)

    def uniform(self) -> float:
        return self.next_u64() / 2.0**64

    def randint(self, lo: int, hi: int) -> int:
        return lo + self.next_u64() % (hi - lo + 1)

    def choice(self, seq):
        return seq[self.next_u64() % len(seq)]


def random_qbf(rng: SplitMix64, nx: int, ny: int, nclauses: int) -> Qbf2:
    xs = tuple(f"x{i + 1}" for i in range(nx))
    ys = tuple(f"y{i + 1}" for i in range(ny))
    pool = xs + ys
    clauses = []
    for _ in range(nclauses):
        size = rng.randint(1, 3)
        seen: dict[str, bool] = {}
        for _ in range(size):
            seen[rng.choice(pool)] = rng.next_u64() % 2 == 0
        clauses.append(tuple(seen.items()))
    return Qbf2(xs, ys, tuple(clauses))


def er_edges(n: int, density: float, seed: int) -> list[tuple[int, int]]:
    """G(n, p) edge sample under the named PRNG; deterministic per (n, p, seed)."""
    rng = SplitMix64(seed)
    edges = []
    for u in range(1, n + 1):
        for v in range(u + 1, n + 1):
            if rng.uniform() < density:
                edges.append((u, v))
    return edges


def gen_cc(n: int, density: float, seed: int) -> QuantifiedProgram:
    """Clique-coloring instance: does a 2-coloring exist under which no maximal
    clique (of at least two vertices) is monochromatic?

    The encoding ships with this package and is validated by engine/reference
    agreement only.  The first vertex's color is fixed to break the color-swap
    symmetry.
    """
    if n < 2:
        raise ValueError("clique coloring instances need at least two vertices")
    V, U, K = Var("V"), Var("U"), Var("K")

    p1_rules = [Rule(Atom("node", (Num(i),)), ()) for i in range(1, n + 1)]
    p1_rules += [
        Rule(Atom("edge", (Num(u), Num(v))), ()) for u, v in er_edges(n, density, seed)
    ]
    p1_rules += [
        Rule(Atom("e", (U, V)), (Lit(Atom("edge", (U, V))),)),
        Rule(Atom("e", (V, U)), (Lit(Atom("edge", (U, V))),)),
        Rule(Atom("col", (V, Num(1))), (Lit(Atom("node", (V,))), Lit(Atom("col", (V, Num(2))), neg=True))),
        Rule(Atom("col", (V, Num(2))), (Lit(Atom("node", (V,))), Lit(Atom("col", (V, Num(1))), neg=True))),
        Rule(None, (Lit(Atom("col", (Num(1), Num(2)))),)),  # symmetry break
    ]

    p2_rules = [
        Rule(Atom("in_set", (V,)), (Lit(Atom("node", (V,))), Lit(Atom("out_set", (V,)), neg=True))),
        Rule(Atom("out_set", (V,)), (Lit(Atom("node", (V,))), Lit(Atom("in_set", (V,)), neg=True))),
        Rule(
            None,
            (
                Lit(Atom("in_set", (U,))),
                Lit(Atom("in_set", (V,))),
                Cmp(U, "<", V),
                Lit(Atom("e", (U, V)), neg=True),
            ),
        ),
        Rule(
            Atom("blocked", (V,)),
            (
                Lit(Atom("node", (V,))),
                Lit(Atom("in_set", (U,))),
                Cmp(U, "!=", V),
                Lit(Atom("e", (U, V)), neg=True),
            ),
        ),
        Rule(
            None,
            (
                Lit(Atom("node", (V,))),
                Lit(Atom("in_set", (V,)), neg=True),
                Lit(Atom("blocked", (V,)), neg=True),
            ),
        ),
        Rule(Atom("hastwo"), (Lit(Atom("in_set", (U,))), Lit(Atom("in_set", (V,))), Cmp(U, "!=", V))),
        Rule(None, (Lit(Atom("hastwo"), neg=True),)),
    ]

    c_rules = [
        Rule(Atom("colorid", (Num(1),)), ()),
        Rule(Atom("colorid", (Num(2),)), ()),
        Rule(
            Atom("badcol", (K,)),
            (
                Lit(Atom("colorid", (K,))),
                Lit(Atom("in_set", (V,))),
                Lit(Atom("col", (V, K)), neg=True),
            ),
        ),
        Rule(Atom("mono"), (Lit(Atom("colorid", (K,))), Lit(Atom("badcol", (K,)), neg=True))),
        Rule(None, (Lit(Atom("mono")),)),
    ]

    return QuantifiedProgram(
        Quantifier.EXISTS,
        Program(tuple(p1_rules)),
        Quantifier.FORALL,
        Program(tuple(p2_rules)),
        Program(tuple(c_rules)),
    )


def cc_instance_text(n: int, density: float, seed: int) -> str:
    """Instance file text with the generation parameters in the header."""
    header = f"% gen-cc n={n} density={density:.2f} seed={seed} prng=splitmix64\n"
    return header + emit_quantified(gen_cc(n, density, seed))


def qbf_instance_text(phi: Qbf2, comment: str = "") -> str:
    header = f"% gen-qbf {comment}\n" if comment else ""
    return header + emit_quantified(gen_qbf(phi))
