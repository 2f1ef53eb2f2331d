"""Parser for the quantified-program input format and plain ASP text.

Input format: sections introduced by %@exists / %@forall (exactly two, first
one is the outer quantifier), then optional %@constraint and %@global, in that
order. A % anywhere else starts a comment; directives must start at column 1.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .core import (
    Agg,
    AggElem,
    Atom,
    Cmp,
    Lit,
    Num,
    Program,
    QuantifiedProgram,
    Quantifier,
    RESERVED_PREFIX,
    Rule,
    Sym,
    Var,
    WeakConstraint,
    errors_of,
    unsafe_vars,
    validate,
)


@dataclass(frozen=True)
class SourceSpan:
    file: str
    line: int
    column: int

    def __str__(self):
        return f"{self.file}:{self.line}:{self.column}"


class ParseError(Exception):
    def __init__(self, span: SourceSpan, message: str):
        super().__init__(f"{span}: {message}")
        self.span = span
        self.message = message


class SectionError(ParseError):
    pass


class SafetyError(ParseError):
    def __init__(self, span: SourceSpan, variable: str, statement: str):
        super().__init__(span, f"unsafe variable {variable} in: {statement}")
        self.variable = variable


DIRECTIVES = ("%@exists", "%@forall", "%@constraint", "%@global")

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<agg>\#sum|\#count)
  | (?P<ident>[a-z][A-Za-z0-9_]*)
  | (?P<var>[A-Z_][A-Za-z0-9_]*)
  | (?P<int>\d+)
  | (?P<punct>:-|:~|!=|<=|>=|[.,;:()\[\]{}@=<>-])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    span: SourceSpan


def _tokenize_line(line: str, lineno: int, filename: str, out: list[Token]):
    pos = 0
    cut = line.find("%")
    if cut >= 0:
        line = line[:cut]
    while pos < len(line):
        m = _TOKEN_RE.match(line, pos)
        if not m:
            raise ParseError(
                SourceSpan(filename, lineno, pos + 1), f"unexpected character {line[pos]!r}"
            )
        kind = m.lastgroup
        if kind != "ws":
            out.append(Token(kind, m.group(), SourceSpan(filename, lineno, pos + 1)))
        pos = m.end()


class _Parser:
    def __init__(self, tokens: list[Token], filename: str, allow_reserved: bool):
        self.tokens = tokens
        self.i = 0
        self.filename = filename
        self.allow_reserved = allow_reserved
        self.eof_span = tokens[-1].span if tokens else SourceSpan(filename, 1, 1)

    def peek(self) -> Token | None:
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def next(self) -> Token:
        tok = self.peek()
        if tok is None:
            raise ParseError(self.eof_span, "unexpected end of input")
        self.i += 1
        return tok

    def expect(self, text: str) -> Token:
        tok = self.next()
        if tok.text != text:
            raise ParseError(tok.span, f"expected {text!r}, found {tok.text!r}")
        return tok

    def at(self, text: str) -> bool:
        tok = self.peek()
        return tok is not None and tok.text == text

    def _check_reserved(self, tok: Token):
        if not self.allow_reserved and tok.text.startswith(RESERVED_PREFIX):
            raise ParseError(tok.span, f"identifier {tok.text!r} uses the reserved prefix")

    # terms ----------------------------------------------------------------

    def parse_term(self):
        tok = self.next()
        if tok.kind == "ident":
            self._check_reserved(tok)
            return Sym(tok.text)
        if tok.kind == "var":
            return Var(tok.text)
        if tok.kind == "int":
            return Num(int(tok.text))
        if tok.text == "-":
            num = self.next()
            if num.kind != "int":
                raise ParseError(num.span, "expected integer after '-'")
            return Num(-int(num.text))
        raise ParseError(tok.span, f"expected term, found {tok.text!r}")

    def parse_atom(self) -> Atom:
        tok = self.next()
        if tok.kind != "ident":
            raise ParseError(tok.span, f"expected predicate name, found {tok.text!r}")
        self._check_reserved(tok)
        args: list = []
        if self.at("("):
            self.next()
            args.append(self.parse_term())
            while self.at(","):
                self.next()
                args.append(self.parse_term())
            self.expect(")")
        return Atom(tok.text, tuple(args))

    # literals ---------------------------------------------------------------

    _CMP_OPS = ("=", "!=", "<", "<=", ">", ">=")

    def _at_cmp(self) -> bool:
        tok = self.peek()
        return tok is not None and tok.text in self._CMP_OPS

    def parse_body_literal(self):
        tok = self.peek()
        if tok is None:
            raise ParseError(self.eof_span, "expected body literal")
        if tok.kind == "ident" and tok.text == "not":  # `not` lexes as an ident
            self.next()
            nxt = self.peek()
            if nxt is not None and nxt.kind == "agg":
                raise ParseError(nxt.span, "negated aggregates are not supported")
            a = self.parse_atom()
            if self._at_cmp():
                raise ParseError(tok.span, "negated comparisons are not supported")
            return Lit(a, neg=True)
        if tok.kind == "agg":
            return self.parse_aggregate()
        if tok.kind in ("var", "int") or tok.text == "-":
            lhs = self.parse_term()
            op = self.next()
            if op.text not in self._CMP_OPS:
                raise ParseError(op.span, f"expected comparison operator, found {op.text!r}")
            return Cmp(lhs, op.text, self.parse_term())
        a = self.parse_atom()
        if self._at_cmp():
            if a.args:
                raise ParseError(tok.span, "comparison operand cannot have arguments")
            op = self.next()
            return Cmp(Sym(a.pred), op.text, self.parse_term())
        return Lit(a, neg=False)

    def parse_aggregate(self) -> Agg:
        fn = self.next()
        self.expect("{")
        elems = [self.parse_agg_elem()]
        while self.at(";"):
            self.next()
            elems.append(self.parse_agg_elem())
        self.expect("}")
        op = self.next()
        if op.text not in ("=", "<", "<=", ">", ">="):
            raise ParseError(op.span, f"unsupported aggregate guard operator {op.text!r}")
        guard = self.parse_term()
        return Agg(fn.text, tuple(elems), op.text, guard)

    def parse_agg_elem(self) -> AggElem:
        terms = [self.parse_term()]
        while self.at(","):
            self.next()
            terms.append(self.parse_term())
        cond: list[Lit] = []
        if self.at(":"):
            self.next()
            while True:
                tok = self.peek()
                negated = False
                if tok is not None and tok.kind == "ident" and tok.text == "not":
                    self.next()
                    negated = True
                cond.append(Lit(self.parse_atom(), neg=negated))
                if not self.at(","):
                    break
                self.next()
        return AggElem(tuple(terms), tuple(cond))

    def parse_body(self, terminator: str):
        body: list = []
        if self.at(terminator):
            return tuple(body)
        body.append(self.parse_body_literal())
        while self.at(","):
            self.next()
            body.append(self.parse_body_literal())
        return tuple(body)

    # statements -------------------------------------------------------------

    def parse_statement(self):
        """One statement: a Rule, a WeakConstraint, or a list of Rules (choice)."""
        tok = self.peek()
        span = tok.span
        if tok.text == ":-":
            self.next()
            body = self.parse_body(".")
            self.expect(".")
            return [self._checked(Rule(None, body), span)]
        if tok.text == ":~":
            self.next()
            body = self.parse_body(".")
            self.expect(".")
            self.expect("[")
            weight = self.parse_term()
            self.expect("@")
            level_term = self.parse_term()
            if not isinstance(level_term, Num):
                raise ParseError(span, "weak-constraint level must be an integer constant")
            tup: list = []
            while self.at(","):
                self.next()
                tup.append(self.parse_term())
            self.expect("]")
            w = WeakConstraint(body, weight, level_term.value, tuple(tup))
            bad = unsafe_vars(None, w.body, extra_terms=(w.weight, *w.tuple_))
            if bad:
                raise SafetyError(span, sorted(bad)[0], str(w))
            return [w]
        if tok.text == "{":
            return self._parse_choice(span)
        head = self.parse_atom()
        body: tuple = ()
        if self.at(":-"):
            self.next()
            body = self.parse_body(".")
        self.expect(".")
        return [self._checked(Rule(head, body), span)]

    def _checked(self, r: Rule, span: SourceSpan) -> Rule:
        bad = unsafe_vars(r.head, r.body)
        if bad:
            raise SafetyError(span, sorted(bad)[0], str(r))
        return r

    def _parse_choice(self, span: SourceSpan):
        # {a1; ...; an}. desugars to the usual even-loop pairs over fresh
        # caspr_n_<pred> complements
        self.expect("{")
        atoms = [self.parse_atom()]
        while self.at(";"):
            self.next()
            atoms.append(self.parse_atom())
        self.expect("}")
        self.expect(".")
        rules: list[Rule] = []
        for a in atoms:
            comp = Atom("caspr_n_" + a.pred, a.args)
            rules.append(self._checked(Rule(a, (Lit(comp, neg=True),)), span))
            rules.append(self._checked(Rule(comp, (Lit(a, neg=True),)), span))
        return rules

    def parse_program(self) -> Program:
        rules: list[Rule] = []
        weaks: list[WeakConstraint] = []
        while self.peek() is not None:
            for stmt in self.parse_statement():
                if isinstance(stmt, WeakConstraint):
                    weaks.append(stmt)
                else:
                    rules.append(stmt)
        return Program(tuple(rules), tuple(weaks))


def _tokenize(text: str, filename: str) -> list[Token]:
    tokens: list[Token] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        _tokenize_line(line, lineno, filename, tokens)
    return tokens


def parse_program(text: str, *, filename: str = "<string>", allow_reserved: bool = False) -> Program:
    """Parse plain ASP text into a Program; raises ParseError / SafetyError."""
    tokens = _tokenize(text, filename)
    return _Parser(tokens, filename, allow_reserved).parse_program()


def _split_sections(text: str, filename: str):
    """Split the input into (directive, span, content-lines) triples."""
    sections: list[tuple[str, SourceSpan, list[str]]] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.rstrip()
        if stripped.startswith("%@"):
            word = stripped.split()[0]
            if word not in DIRECTIVES:
                raise SectionError(SourceSpan(filename, lineno, 1), f"unknown directive {word!r}")
            if stripped != word:
                raise SectionError(
                    SourceSpan(filename, lineno, 1), "directive must be alone on its line"
                )
            sections.append((word, SourceSpan(filename, lineno, 1), []))
        else:
            if not sections:
                bare = line.split("%")[0].strip()
                if bare:
                    raise SectionError(
                        SourceSpan(filename, lineno, 1), "statement before first section directive"
                    )
                continue
            sections[-1][2].append(line)
        # keep line numbers aligned for the section parsers
    return sections


def _parse_section(lines: list[str], first_line: int, filename: str, allow_reserved: bool) -> Program:
    tokens: list[Token] = []
    for offset, line in enumerate(lines):
        _tokenize_line(line, first_line + offset, filename, tokens)
    return _Parser(tokens, filename, allow_reserved).parse_program()


def parse_quantified(
    text: str, *, filename: str = "<string>", allow_reserved: bool = False
) -> QuantifiedProgram:
    """Parse the sectioned input format into a QuantifiedProgram.

    The result is validated; the first error diagnostic becomes a ParseError.
    """
    sections = _split_sections(text, filename)
    quants = [s for s in sections if s[0] in ("%@exists", "%@forall")]
    if len(quants) != 2:
        where = quants[2][1] if len(quants) > 2 else SourceSpan(filename, 1, 1)
        raise SectionError(where, f"expected exactly two quantifier sections, found {len(quants)}")

    expected_tail = [s for s in sections if s[0] in ("%@constraint", "%@global")]
    order = [s[0] for s in sections]
    valid_orders = [
        ["%@exists", "%@forall"],
        ["%@exists", "%@exists"],
        ["%@forall", "%@exists"],
        ["%@forall", "%@forall"],
    ]
    base = order[:2]
    tail = order[2:]
    if base not in valid_orders or tail not in ([], ["%@constraint"], ["%@global"], ["%@constraint", "%@global"]):
        span = sections[2][1] if len(sections) > 2 else sections[0][1]
        raise SectionError(span, f"bad section order: {' '.join(order)}")

    programs = []
    for directive, span, lines in sections:
        prog = _parse_section(lines, span.line + 1, filename, allow_reserved)
        programs.append((directive, span, prog))

    (d1, _, p1), (d2, _, p2) = programs[0], programs[1]
    q1 = Quantifier.EXISTS if d1 == "%@exists" else Quantifier.FORALL
    q2 = Quantifier.EXISTS if d2 == "%@exists" else Quantifier.FORALL

    c = Program()
    cw: tuple[WeakConstraint, ...] = ()
    for directive, span, prog in programs[2:]:
        if directive == "%@constraint":
            if prog.weaks:
                raise ParseError(span, "weak constraints are not allowed in the constraint section")
            c = prog
        else:
            if prog.rules:
                raise ParseError(span, "the global section admits weak constraints only")
            cw = prog.weaks

    qp = QuantifiedProgram(q1, p1, q2, p2, c, cw)
    errs = errors_of(validate(qp))
    if errs:
        raise ParseError(SourceSpan(filename, 1, 1), str(errs[0]))
    return qp


def parse_model_atom(text: str) -> Atom:
    """Parse a single ground atom as printed by a solver (reserved names allowed)."""
    tokens = _tokenize(text, "<model>")
    p = _Parser(tokens, "<model>", allow_reserved=True)
    a = p.parse_atom()
    if p.peek() is not None:
        raise ParseError(p.peek().span, f"trailing input after atom: {p.peek().text!r}")
    return a
