"""Abstract syntax for ASP and quantified programs, cost evaluation, dominance,
validation and deterministic text emission."""

from __future__ import annotations

import enum
import itertools
import re
from dataclasses import dataclass, field

RESERVED_PREFIX = "caspr_"
# choice-rule complements introduced by the parser's desugaring live here and
# are exempt from the reserved-prefix diagnostic
CHOICE_COMPLEMENT_PREFIX = "caspr_n_"

_CONST_RE = re.compile(r"[a-z][A-Za-z0-9_]*\Z")
_VAR_RE = re.compile(r"[A-Z_][A-Za-z0-9_]*\Z")


class CoreError(Exception):
    """Base class for errors raised by AST-level operations."""


class NonGroundWeight(CoreError):
    pass


class AggregateInWeakBody(CoreError):
    pass


# ---------------------------------------------------------------------------
# terms


# the term and atom types are hand-rolled with cached hashes: they sit on the
# hot path of grounding and model handling (lexical validity is guaranteed by
# the tokenizer and checked by validate, not by these constructors)


class Num:
    __slots__ = ("value", "_hash")

    def __init__(self, value: int):
        self.value = value
        self._hash = hash((0x1, value))

    def __eq__(self, other):
        return type(other) is Num and other.value == self.value

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"Num({self.value})"

    def __str__(self):
        return str(self.value)


class Sym:
    __slots__ = ("name", "_hash")

    def __init__(self, name: str):
        self.name = name
        self._hash = hash((0x2, name))

    def __eq__(self, other):
        return type(other) is Sym and other.name == self.name

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"Sym({self.name!r})"

    def __str__(self):
        return self.name


class Var:
    __slots__ = ("name", "_hash")

    def __init__(self, name: str):
        self.name = name
        self._hash = hash((0x3, name))

    def __eq__(self, other):
        return type(other) is Var and other.name == self.name

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"Var({self.name!r})"

    def __str__(self):
        return self.name


Term = Num | Sym | Var


def is_ground_term(t: Term) -> bool:
    return not isinstance(t, Var)


def term_key(t: Term):
    """Total order on ground terms: integers first (by value), then symbols."""
    if isinstance(t, Num):
        return (0, t.value)
    if isinstance(t, Sym):
        return (1, t.name)
    raise CoreError(f"cannot order non-ground term {t}")


# ---------------------------------------------------------------------------
# atoms and literals


class Atom:
    __slots__ = ("pred", "args", "is_ground", "_hash")

    def __init__(self, pred: str, args: tuple[Term, ...] = ()):
        self.pred = pred
        self.args = args = tuple(args)
        self.is_ground = all(type(t) is not Var for t in args)
        self._hash = hash((pred, args))

    def __eq__(self, other):
        return (
            type(other) is Atom
            and other._hash == self._hash
            and other.pred == self.pred
            and other.args == self.args
        )

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"Atom({self.pred!r}, {self.args!r})"

    def __str__(self):
        if not self.args:
            return self.pred
        return f"{self.pred}({','.join(map(str, self.args))})"


class Lit:
    """Standard literal: an atom or its default negation."""

    __slots__ = ("atom", "neg", "_hash")

    def __init__(self, atom: Atom, neg: bool = False):
        self.atom = atom
        self.neg = neg
        self._hash = hash((atom._hash, neg))

    def __eq__(self, other):
        return type(other) is Lit and other.neg == self.neg and other.atom == self.atom

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"Lit({self.atom!r}, neg={self.neg})"

    def __str__(self):
        return f"not {self.atom}" if self.neg else str(self.atom)


COMPARISON_OPS = ("=", "!=", "<", "<=", ">", ">=")


@dataclass(frozen=True, slots=True)
class Cmp:
    lhs: Term
    op: str
    rhs: Term

    def __post_init__(self):
        if self.op not in COMPARISON_OPS:
            raise CoreError(f"unknown comparison operator {self.op!r}")

    def __str__(self):
        return f"{self.lhs} {self.op} {self.rhs}"


@dataclass(frozen=True, slots=True)
class AggElem:
    terms: tuple[Term, ...]
    cond: tuple[Lit, ...]

    def __str__(self):
        head = ",".join(map(str, self.terms))
        if not self.cond:
            return head
        return f"{head} : {', '.join(map(str, self.cond))}"


@dataclass(frozen=True, slots=True)
class Agg:
    """Aggregate body atom #sum{...} op guard / #count{...} op guard.

    Always positive; a guard of the form `= V` with V a variable binds V.
    """

    fn: str  # "#sum" or "#count"
    elems: tuple[AggElem, ...]
    op: str
    guard: Term

    def __post_init__(self):
        if self.fn not in ("#sum", "#count"):
            raise CoreError(f"unknown aggregate function {self.fn!r}")
        if self.op not in ("=", "<", "<=", ">", ">="):
            raise CoreError(f"unsupported aggregate guard operator {self.op!r}")

    def __str__(self):
        body = "; ".join(map(str, self.elems))
        return f"{self.fn}{{{body}}} {self.op} {self.guard}"


BodyLit = Lit | Cmp | Agg


# ---------------------------------------------------------------------------
# statements and programs


@dataclass(frozen=True, slots=True)
class Rule:
    head: Atom | None
    body: tuple[BodyLit, ...] = ()

    @property
    def is_fact(self) -> bool:
        return self.head is not None and not self.body

    @property
    def is_constraint(self) -> bool:
        return self.head is None

    def __str__(self):
        body = ", ".join(map(str, self.body))
        if self.head is None:
            return f":- {body}."
        if not self.body:
            return f"{self.head}."
        return f"{self.head} :- {body}."


@dataclass(frozen=True, slots=True)
class WeakConstraint:
    body: tuple[BodyLit, ...]
    weight: Term
    level: int
    tuple_: tuple[Term, ...] = ()

    def __str__(self):
        body = ", ".join(map(str, self.body))
        ann = f"{self.weight}@{self.level}"
        if self.tuple_:
            ann += "," + ",".join(map(str, self.tuple_))
        return f":~ {body}. [{ann}]"


def _counter(items):
    counts: dict = {}
    for x in items:
        counts[x] = counts.get(x, 0) + 1
    return counts


@dataclass(frozen=True)
class Program:
    """A set of rules and weak constraints.

    Equality is structural: rule/weak multisets are compared, emission order is
    irrelevant, but body-literal order inside a statement matters.
    """

    rules: tuple[Rule, ...] = ()
    weaks: tuple[WeakConstraint, ...] = ()

    def __eq__(self, other):
        if not isinstance(other, Program):
            return NotImplemented
        return _counter(self.rules) == _counter(other.rules) and _counter(
            self.weaks
        ) == _counter(other.weaks)

    def __hash__(self):
        return hash((frozenset(_counter(self.rules).items()), frozenset(_counter(self.weaks).items())))

    def __add__(self, other: "Program") -> "Program":
        return Program(self.rules + other.rules, self.weaks + other.weaks)

    def __str__(self):
        return emit_text(self)


class Quantifier(enum.Enum):
    EXISTS = "exists"
    FORALL = "forall"


@dataclass(frozen=True)
class QuantifiedProgram:
    q1: Quantifier
    p1: Program
    q2: Quantifier
    p2: Program
    c: Program = Program()
    cw: tuple[WeakConstraint, ...] = ()

    @property
    def alternating(self) -> bool:
        return self.q1 != self.q2


Interpretation = frozenset  # of ground Atom


# ---------------------------------------------------------------------------
# predicate bookkeeping


def atom_preds_of_body(body) -> set[tuple[str, int]]:
    preds = set()
    for lit in body:
        if isinstance(lit, Lit):
            preds.add((lit.atom.pred, len(lit.atom.args)))
        elif isinstance(lit, Agg):
            for elem in lit.elems:
                for c in elem.cond:
                    preds.add((c.atom.pred, len(c.atom.args)))
    return preds


def head_preds(p: Program) -> set[tuple[str, int]]:
    """Predicates (name, arity) appearing in some rule head."""
    return {
        (r.head.pred, len(r.head.args)) for r in p.rules if r.head is not None
    }


def head_pred_names(p: Program) -> set[str]:
    return {name for name, _ in head_preds(p)}


def all_pred_names(p: Program) -> set[str]:
    names = set()
    for r in p.rules:
        if r.head is not None:
            names.add(r.head.pred)
        names |= {n for n, _ in atom_preds_of_body(r.body)}
    for w in p.weaks:
        names |= {n for n, _ in atom_preds_of_body(w.body)}
    return names


def restrict(model: Interpretation, preds) -> Interpretation:
    """Atoms of `model` whose (pred, arity) is in `preds`."""
    preds = set(preds)
    return frozenset(a for a in model if (a.pred, len(a.args)) in preds)


# ---------------------------------------------------------------------------
# cost vectors


class CostVector:
    """Per-level violation weights; absent levels count as zero.

    Explicit zero entries are kept (they record which levels were relevant)
    but ignored by equality and dominance.
    """

    __slots__ = ("entries",)

    def __init__(self, entries: dict[int, int] | None = None):
        self.entries = dict(entries or {})

    def __getitem__(self, level: int) -> int:
        return self.entries.get(level, 0)

    def nonzero(self) -> dict[int, int]:
        return {l: c for l, c in self.entries.items() if c != 0}

    def levels(self):
        return set(self.entries)

    def __eq__(self, other):
        if not isinstance(other, CostVector):
            return NotImplemented
        return self.nonzero() == other.nonzero()

    def __hash__(self):
        return hash(frozenset(self.nonzero().items()))

    def __repr__(self):
        inner = ", ".join(f"{l}: {c}" for l, c in sorted(self.entries.items(), reverse=True))
        return "{" + inner + "}"

    def as_dict(self) -> dict[int, int]:
        return dict(self.entries)


def dominates(a: CostVector, b: CostVector) -> bool:
    """True iff b is dominated by a: there is a level where b's cost is
    strictly higher and all higher levels agree."""
    levels = sorted(a.levels() | b.levels(), reverse=True)
    for l in levels:
        ca, cb = a[l], b[l]
        if ca != cb:
            return cb > ca
    return False


# ---------------------------------------------------------------------------
# cost evaluation


def _eval_cmp_ground(lhs: Term, op: str, rhs: Term) -> bool:
    if op == "=":
        return lhs == rhs
    if op == "!=":
        return lhs != rhs
    ka, kb = term_key(lhs), term_key(rhs)
    if op == "<":
        return ka < kb
    if op == "<=":
        return ka <= kb
    if op == ">":
        return ka > kb
    return ka >= kb


def _subst_term(t: Term, theta: dict[str, Term]) -> Term:
    if isinstance(t, Var):
        return theta.get(t.name, t)
    return t


def subst_atom(a: Atom, theta: dict[str, Term]) -> Atom:
    if a.is_ground or not theta:
        return a
    return Atom(
        a.pred, tuple(theta.get(t.name, t) if type(t) is Var else t for t in a.args)
    )


def _match_atom(pattern: Atom, ground: Atom, theta: dict[str, Term]):
    """Extend theta so that pattern matches ground, or return None."""
    if pattern.pred != ground.pred or len(pattern.args) != len(ground.args):
        return None
    out = dict(theta)
    for pt, gt in zip(pattern.args, ground.args):
        if isinstance(pt, Var):
            bound = out.get(pt.name)
            if bound is None:
                out[pt.name] = gt
            elif bound != gt:
                return None
        elif pt != gt:
            return None
    return out


def _body_substitutions(body, model: Interpretation):
    """All substitutions making a (comparison/standard-literal) body true in model.

    Positive literals are matched against the model; safety guarantees they
    bind every variable before negatives/comparisons are checked.
    """
    positives = [l for l in body if isinstance(l, Lit) and not l.neg]
    others = [l for l in body if not (isinstance(l, Lit) and not l.neg)]

    def extend(i, theta):
        if i == len(positives):
            for lit in others:
                if isinstance(lit, Cmp):
                    lhs = _subst_term(lit.lhs, theta)
                    rhs = _subst_term(lit.rhs, theta)
                    if isinstance(lhs, Var) or isinstance(rhs, Var):
                        raise CoreError(f"unbound variable in comparison {lit}")
                    if not _eval_cmp_ground(lhs, lit.op, rhs):
                        return
                else:
                    ga = subst_atom(lit.atom, theta)
                    if not ga.is_ground:
                        raise CoreError(f"unbound variable in literal {lit}")
                    if (ga in model) != (not lit.neg):
                        return
            yield theta
            return
        pat = positives[i].atom
        for ga in model:
            t2 = _match_atom(pat, ga, theta)
            if t2 is not None:
                yield from extend(i + 1, t2)

    yield from extend(0, {})


def evaluate_cost(weaks, model: Interpretation) -> CostVector:
    """Sum of weights of distinct violation triples (weight, level, tuple)
    whose instantiated body is true in the model.

    The result carries an explicit (possibly zero) entry for every level that
    occurs in `weaks`.
    """
    triples = set()
    levels = set()
    for w in weaks:
        levels.add(w.level)
        for lit in w.body:
            if isinstance(lit, Agg):
                raise AggregateInWeakBody(str(w))
        for theta in _body_substitutions(w.body, model):
            weight = _subst_term(w.weight, theta)
            if not isinstance(weight, Num):
                raise NonGroundWeight(f"weight {w.weight} not an integer in {w}")
            tup = tuple(_subst_term(t, theta) for t in w.tuple_)
            if any(isinstance(t, Var) for t in tup):
                raise CoreError(f"unbound tuple term in {w}")
            triples.add((weight.value, w.level, tup))
    entries = {l: 0 for l in levels}
    for weight, level, _ in triples:
        entries[level] = entries.get(level, 0) + weight
    return CostVector(entries)


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str
    severity: str = "error"  # or "warning"

    def __str__(self):
        return f"{self.severity}[{self.code}]: {self.message}"


def rule_vars(body) -> set[str]:
    out = set()
    for lit in body:
        if isinstance(lit, Lit):
            out |= {t.name for t in lit.atom.args if isinstance(t, Var)}
        elif isinstance(lit, Cmp):
            for t in (lit.lhs, lit.rhs):
                if isinstance(t, Var):
                    out.add(t.name)
        elif isinstance(lit, Agg):
            if isinstance(lit.guard, Var):
                out.add(lit.guard.name)
    return out


def _positive_binders(body) -> set[str]:
    """Variables bound by a positive standard literal or by an `= V` aggregate."""
    bound = set()
    for lit in body:
        if isinstance(lit, Lit) and not lit.neg:
            bound |= {t.name for t in lit.atom.args if isinstance(t, Var)}
        elif isinstance(lit, Agg) and lit.op == "=" and isinstance(lit.guard, Var):
            bound.add(lit.guard.name)
    return bound


def unsafe_vars(head: Atom | None, body, extra_terms=()) -> set[str]:
    """Global variables not bound by any positive body literal, plus unsafe
    aggregate-element locals."""
    bound = _positive_binders(body)
    global_vars = rule_vars(body)
    if head is not None:
        global_vars |= {t.name for t in head.args if isinstance(t, Var)}
    for t in extra_terms:
        if isinstance(t, Var):
            global_vars.add(t.name)
    unsafe = global_vars - bound
    for lit in body:
        if isinstance(lit, Agg):
            for elem in lit.elems:
                local_bound = bound | {
                    t.name
                    for c in elem.cond
                    if not c.neg
                    for t in c.atom.args
                    if isinstance(t, Var)
                }
                for c in elem.cond:
                    for t in c.atom.args:
                        if isinstance(t, Var) and t.name not in local_bound:
                            unsafe.add(t.name)
                for t in elem.terms:
                    if isinstance(t, Var) and t.name not in local_bound:
                        unsafe.add(t.name)
    return unsafe


def is_stratified(p: Program) -> bool:
    """No cycle through negation in the predicate dependency graph.

    Aggregate dependencies are conservatively treated as negative.
    """
    pos_edges: dict[str, set[str]] = {}
    neg_edges: dict[str, set[str]] = {}
    for r in p.rules:
        if r.head is None:
            continue
        h = r.head.pred
        for lit in r.body:
            if isinstance(lit, Lit):
                (neg_edges if lit.neg else pos_edges).setdefault(h, set()).add(lit.atom.pred)
            elif isinstance(lit, Agg):
                for elem in lit.elems:
                    for c in elem.cond:
                        neg_edges.setdefault(h, set()).add(c.atom.pred)

    preds = set(pos_edges) | set(neg_edges)
    for s in list(pos_edges.values()) + list(neg_edges.values()):
        preds |= s

    # a negative edge inside a strongly connected component breaks stratification
    index = 0
    indices: dict[str, int] = {}
    low: dict[str, int] = {}
    on_stack: dict[str, bool] = {}
    stack: list[str] = []
    comp_of: dict[str, int] = {}
    ncomp = 0

    def edges(v):
        return pos_edges.get(v, set()) | neg_edges.get(v, set())

    for start in preds:
        if start in indices:
            continue
        work = [(start, iter(edges(start)))]
        indices[start] = low[start] = index
        index += 1
        stack.append(start)
        on_stack[start] = True
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in indices:
                    indices[w] = low[w] = index
                    index += 1
                    stack.append(w)
                    on_stack[w] = True
                    work.append((w, iter(edges(w))))
                    advanced = True
                    break
                elif on_stack.get(w):
                    low[v] = min(low[v], indices[w])
            if advanced:
                continue
            work.pop()
            if work:
                pv = work[-1][0]
                low[pv] = min(low[pv], low[v])
            if low[v] == indices[v]:
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp_of[w] = ncomp
                    if w == v:
                        break
                ncomp += 1

    for h, succs in neg_edges.items():
        for b in succs:
            if b in comp_of and h in comp_of and comp_of[h] == comp_of[b]:
                return False
    return True


def _reserved_names(p: Program) -> set[str]:
    return {
        n
        for n in all_pred_names(p)
        if n.startswith(RESERVED_PREFIX) and not n.startswith(CHOICE_COMPLEMENT_PREFIX)
    }


def _safety_diags(p: Program, where: str) -> list[Diagnostic]:
    diags = []
    for r in p.rules:
        bad = unsafe_vars(r.head, r.body)
        if bad:
            diags.append(
                Diagnostic("Unsafe", f"unsafe variable(s) {sorted(bad)} in {where} rule: {r}")
            )
    for w in p.weaks:
        bad = unsafe_vars(None, w.body, extra_terms=(w.weight, *w.tuple_))
        if bad:
            diags.append(
                Diagnostic("Unsafe", f"unsafe variable(s) {sorted(bad)} in {where} weak: {w}")
            )
    return diags


def validate(qp: QuantifiedProgram) -> list[Diagnostic]:
    """All invariant violations of a quantified program; empty list means valid.

    Warnings (severity "warning") do not make the program invalid.
    """
    diags: list[Diagnostic] = []

    for name, part in (("p1", qp.p1), ("p2", qp.p2), ("c", qp.c)):
        bad = _reserved_names(part)
        if bad:
            diags.append(
                Diagnostic("ReservedPrefix", f"reserved predicate(s) {sorted(bad)} in {name}")
            )
    cw_prog = Program(weaks=qp.cw)
    bad = _reserved_names(cw_prog)
    if bad:
        diags.append(Diagnostic("ReservedPrefix", f"reserved predicate(s) {sorted(bad)} in global weaks"))

    overlap = head_pred_names(qp.p1) & head_pred_names(qp.p2)
    if overlap:
        diags.append(
            Diagnostic("HeadOverlap", f"predicates {sorted(overlap)} are heads in both p1 and p2")
        )

    if qp.c.weaks:
        diags.append(Diagnostic("WeaksInCheck", "check program must not contain weak constraints"))
    if not is_stratified(qp.c):
        diags.append(Diagnostic("NotStratified", "check program is not stratified"))

    p1_names = all_pred_names(qp.p1)
    for w in qp.cw:
        outside = {n for n, _ in atom_preds_of_body(w.body)} - p1_names
        if outside:
            diags.append(
                Diagnostic(
                    "GlobalWeakVocabulary",
                    f"global weak mentions predicate(s) {sorted(outside)} not occurring in p1",
                )
            )

    diags += _safety_diags(qp.p1, "p1")
    diags += _safety_diags(qp.p2, "p2")
    diags += _safety_diags(qp.c, "c")
    diags += _safety_diags(cw_prog, "global")

    # informational: P2 weak levels inside the refinement band of P1
    p1_levels = [w.level for w in qp.p1.weaks]
    l_min = min(p1_levels) if p1_levels else 0
    band = {l_min - 1, l_min - 2, l_min - 3}
    clash = sorted({w.level for w in qp.p2.weaks} & band)
    if clash:
        diags.append(
            Diagnostic(
                "LevelBandOverlap",
                f"p2 weak level(s) {clash} fall inside the refinement level band {sorted(band)}",
                severity="warning",
            )
        )
    return diags


def errors_of(diags) -> list[Diagnostic]:
    return [d for d in diags if d.severity == "error"]


# ---------------------------------------------------------------------------
# emission


def emit_statement(stmt: Rule | WeakConstraint) -> str:
    return str(stmt)


def emit_text(p: Program) -> str:
    """Deterministic ASP-Core-2-compatible text; parses back to an equal program."""
    lines = [str(r) for r in p.rules]
    lines += [str(w) for w in p.weaks]
    return "".join(line + "\n" for line in lines)


def emit_quantified(qp: QuantifiedProgram) -> str:
    parts = []
    for q, prog in ((qp.q1, qp.p1), (qp.q2, qp.p2)):
        parts.append("%@exists" if q is Quantifier.EXISTS else "%@forall")
        parts.append(emit_text(prog).rstrip("\n"))
    if qp.c.rules or qp.c.weaks or qp.cw:
        parts.append("%@constraint")
        parts.append(emit_text(qp.c).rstrip("\n"))
    if qp.cw:
        parts.append("%@global")
        parts.append(emit_text(Program(weaks=qp.cw)).rstrip("\n"))
    return "\n".join(x for x in parts if x != "") + "\n"


# convenience constructors used across the code base


def atom(pred: str, *args) -> Atom:
    terms = []
    for a in args:
        if isinstance(a, int):
            terms.append(Num(a))
        elif isinstance(a, str):
            terms.append(Var(a) if _VAR_RE.match(a) else Sym(a))
        else:
            terms.append(a)
    return Atom(pred, tuple(terms))


def pos(a: Atom) -> Lit:
    return Lit(a, False)


def neg(a: Atom) -> Lit:
    return Lit(a, True)


def fact(a: Atom) -> Rule:
    return Rule(a, ())


def rule(head: Atom | None, *body) -> Rule:
    return Rule(head, tuple(body))


def constraint(*body) -> Rule:
    return Rule(None, tuple(body))


def weak(body, weight, level: int, tuple_=()) -> WeakConstraint:
    w = Num(weight) if isinstance(weight, int) else weight
    return WeakConstraint(tuple(body), w, level, tuple(tuple_))
