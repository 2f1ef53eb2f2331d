"""Stable-model search with lexicographic weak-constraint optimization.

Models of the program completion (supported models) are enumerated by a
chronological DPLL; for non-tight programs each candidate is additionally
checked to be a minimal model of its reduct.  Optimization is branch-and-bound
over indicator variables, one per distinct ground violation triple
(weight, level, tuple), matching the set semantics of weak constraints.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

from .core import Atom, Program
from .grounding import GroundProgram, GroundingError, ground

UNSAT = "UNSATISFIABLE"
SAT = "SATISFIABLE"
OPTIMUM = "OPTIMUM FOUND"


class SearchTimeout(Exception):
    pass


@dataclass
class SolveResult:
    status: str
    models: list[frozenset[Atom]]
    cost: dict[int, int] | None  # per-level optimum, explicit zeros included
    exhausted: bool = True


def _tight(nvars: int, rules) -> bool:
    """True when the positive dependency graph is acyclic (Fages: supported = stable)."""
    succs: list[list[int]] = [[] for _ in range(nvars + 1)]
    for head, pos, _neg in rules:
        if head:
            for b in pos:
                succs[head].append(b)
                if b == head:
                    return False
    index = [0] * (nvars + 1)
    low = [0] * (nvars + 1)
    on = [False] * (nvars + 1)
    comp = [0] * (nvars + 1)
    counter = 1
    stack: list[int] = []
    for start in range(1, nvars + 1):
        if index[start]:
            continue
        work = [(start, 0)]
        index[start] = low[start] = counter
        counter += 1
        stack.append(start)
        on[start] = True
        while work:
            v, ptr = work[-1]
            if ptr < len(succs[v]):
                work[-1] = (v, ptr + 1)
                w = succs[v][ptr]
                if not index[w]:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on[w] = True
                    work.append((w, 0))
                elif on[w]:
                    if index[w] < low[v]:
                        low[v] = index[w]
            else:
                work.pop()
                if work:
                    pv = work[-1][0]
                    if low[v] < low[pv]:
                        low[pv] = low[v]
                if low[v] == index[v]:
                    size = 0
                    while True:
                        w = stack.pop()
                        on[w] = False
                        size += 1
                        if w == v:
                            break
                    if size > 1:
                        return False
    return True


class _Engine:
    def __init__(self, gp: GroundProgram, deadline: float | None):
        self.deadline = deadline
        self.ticks = 0

        self.atom_id: dict[Atom, int] = {}
        self.id_atom: list[Atom | None] = [None]

        def aid(a: Atom) -> int:
            i = self.atom_id.get(a)
            if i is None:
                i = len(self.id_atom)
                self.atom_id[a] = i
                self.id_atom.append(a)
            return i

        # atoms mentioned anywhere in the ground program get ids; body-only
        # atoms without defining rules are forced false by completion
        rules: list[tuple[int, tuple[int, ...], tuple[int, ...]]] = []
        for r in gp.rules:
            h = aid(r.head) if r.head is not None else 0
            rules.append((h, tuple(aid(a) for a in r.pos), tuple(aid(a) for a in r.neg)))
        for w in gp.weaks:
            for a in w.pos:
                aid(a)
            for a in w.neg:
                aid(a)
        self.n_atoms = len(self.id_atom) - 1
        self.rules = rules
        self.tight = _tight(self.n_atoms, rules)

        self.clauses: list[list[int]] = []
        self.units: list[int] = []
        self.contradiction = gp.unsat
        self._build_completion(rules)
        self._build_weaks(gp.weaks)
        self.nvars = self.next_var - 1

        normalized: list[list[int]] = []
        for cl in self.clauses:
            seen: set[int] = set()
            out: list[int] = []
            taut = False
            for l in cl:
                if -l in seen:
                    taut = True
                    break
                if l not in seen:
                    seen.add(l)
                    out.append(l)
            if taut:
                continue
            if not out:
                self.contradiction = True
            elif len(out) == 1:
                self.units.append(out[0])
            else:
                normalized.append(out)
        self.clauses = normalized

        self.watches: list[list[int]] = [[] for _ in range(2 * self.nvars + 2)]
        for ci, cl in enumerate(self.clauses):
            self.watches[self._widx(cl[0])].append(ci)
            self.watches[self._widx(cl[1])].append(ci)

        self.assign = [0] * (self.nvars + 1)
        self.trail: list[int] = []
        self.qhead = 0

        # decide atoms first, auxiliaries afterwards
        self.order = list(range(1, self.n_atoms + 1)) + list(
            range(self.n_atoms + 1, self.nvars + 1)
        )

    # --- construction ---------------------------------------------------

    def _new_aux(self) -> int:
        v = self.next_var
        self.next_var += 1
        return v

    def _body_lits(self, pos, neg):
        return [p for p in pos] + [-n for n in neg]

    def _conj_var(self, lits: list[int]) -> int:
        if len(lits) == 1:
            return lits[0]
        key = tuple(sorted(lits))
        v = self.conj_cache.get(key)
        if v is not None:
            return v
        v = self._new_aux()
        self.conj_cache[key] = v
        for l in lits:
            self.clauses.append([-v, l])
        self.clauses.append([v] + [-l for l in lits])
        return v

    def _build_completion(self, rules):
        self.next_var = self.n_atoms + 1
        self.conj_cache: dict[tuple, int] = {}
        defs: dict[int, list[tuple[tuple[int, ...], tuple[int, ...]]]] = {}
        for h, pos, neg in rules:
            if h == 0:
                body = self._body_lits(pos, neg)
                self.clauses.append([-l for l in body])
            else:
                defs.setdefault(h, []).append((pos, neg))
        for a in range(1, self.n_atoms + 1):
            bodies = defs.get(a)
            if not bodies:
                self.clauses.append([-a])
                continue
            body_vars = []
            is_fact = False
            for pos, neg in bodies:
                lits = self._body_lits(pos, neg)
                if not lits:
                    is_fact = True
                    continue
                bv = self._conj_var(lits)
                body_vars.append(bv)
                self.clauses.append([a, -bv])  # body -> head
            if is_fact:
                self.clauses.append([a])
            elif body_vars:
                self.clauses.append([-a] + body_vars)  # support

    def _build_weaks(self, weaks):
        groups: dict[tuple, list] = {}
        for w in weaks:
            groups.setdefault((w.weight, w.level, w.tuple_), []).append(w)
        self.indicators: list[tuple[int, int, int]] = []  # (var, level, weight)
        for (weight, level, _tup), ws in sorted(
            groups.items(), key=lambda kv: (kv[0][1], str(kv[0]))
        ):
            body_vars = []
            always = False
            for w in ws:
                lits = self._body_lits(
                    [self.atom_id[a] for a in w.pos], [self.atom_id[a] for a in w.neg]
                )
                if not lits:
                    always = True
                    break
                body_vars.append(self._conj_var(lits))
            v = self._new_aux()
            if always:
                self.clauses.append([v])
            else:
                for bv in body_vars:
                    self.clauses.append([v, -bv])
                self.clauses.append([-v] + body_vars)
            self.indicators.append((v, level, weight))
        self.levels = sorted({l for _, l, _ in self.indicators}, reverse=True)
        self.by_level: dict[int, list[tuple[int, int]]] = {l: [] for l in self.levels}
        for v, l, w in self.indicators:
            self.by_level[l].append((v, w))
        # per-level minimum achievable contribution
        self.lbmin = {
            l: sum(w for _, w in vws if w < 0) for l, vws in self.by_level.items()
        }

    # --- propagation ------------------------------------------------------

    @staticmethod
    def _widx(lit: int) -> int:
        return 2 * lit if lit > 0 else -2 * lit + 1

    def _value(self, lit: int) -> int:
        v = self.assign[abs(lit)]
        return v if lit > 0 else -v

    def _enqueue(self, lit: int) -> bool:
        val = self._value(lit)
        if val == 1:
            return True
        if val == -1:
            return False
        self.assign[abs(lit)] = 1 if lit > 0 else -1
        self.trail.append(lit)
        return True

    def _propagate(self) -> bool:
        """Exhaust unit propagation; False on conflict."""
        while self.qhead < len(self.trail):
            lit = self.trail[self.qhead]
            self.qhead += 1
            falsified = -lit
            wl = self.watches[self._widx(falsified)]
            i = 0
            while i < len(wl):
                ci = wl[i]
                cl = self.clauses[ci]
                if cl[0] == falsified:
                    cl[0], cl[1] = cl[1], cl[0]
                # find replacement watch
                found = False
                for k in range(2, len(cl)):
                    if self._value(cl[k]) != -1:
                        cl[1], cl[k] = cl[k], cl[1]
                        self.watches[self._widx(cl[1])].append(ci)
                        wl[i] = wl[-1]
                        wl.pop()
                        found = True
                        break
                if found:
                    continue
                if not self._enqueue(cl[0]):
                    return False
                i += 1
        return True

    # --- search -----------------------------------------------------------

    def _tick(self):
        self.ticks += 1
        if self.deadline is not None and self.ticks % 512 == 0:
            if time.monotonic() > self.deadline:
                raise SearchTimeout()

    def _level_bounds(self) -> dict[int, int]:
        lb = {}
        for l, vws in self.by_level.items():
            s = 0
            for v, w in vws:
                val = self.assign[v]
                if val == 1:
                    s += w
                elif val == 0 and w < 0:
                    s += w
            lb[l] = s
        return lb

    def _pruned(self, incumbent: dict[int, int] | None) -> bool:
        """True when no completion of the partial assignment can strictly
        improve on (or even differ favorably from) the incumbent."""
        if incumbent is None or not self.levels:
            return False
        lb = self._level_bounds()
        all_higher_ge = True
        for l in self.levels:  # descending
            if all_higher_ge and lb[l] > incumbent[l]:
                return True
            all_higher_ge = all_higher_ge and lb[l] >= incumbent[l]
        return False

    def _model_cost(self) -> dict[int, int]:
        cost = {l: 0 for l in self.levels}
        for v, l, w in self.indicators:
            if self.assign[v] == 1:
                cost[l] += w
        return cost

    @staticmethod
    def _lex_better(a: dict[int, int], b: dict[int, int], levels) -> bool:
        """a strictly dominates b."""
        for l in levels:
            if a[l] != b[l]:
                return a[l] < b[l]
        return False

    def _stable(self) -> bool:
        """Check that the true atoms form a minimal model of the reduct."""
        true_atoms = {i for i in range(1, self.n_atoms + 1) if self.assign[i] == 1}
        derived: set[int] = set()
        changed = True
        active = [
            (h, pos)
            for h, pos, neg in self.rules
            if h and h in true_atoms and not any(n in true_atoms for n in neg)
        ]
        while changed:
            changed = False
            for h, pos in active:
                if h not in derived and all(p in derived for p in pos):
                    derived.add(h)
                    changed = True
        return derived == true_atoms

    def _model_atoms(self, shown: set[Atom]) -> frozenset[Atom]:
        return frozenset(
            self.id_atom[i]
            for i in range(1, self.n_atoms + 1)
            if self.assign[i] == 1 and self.id_atom[i] in shown
        )

    def run(
        self,
        shown: set[Atom],
        *,
        enumerate_all: bool,
        model_limit: int = 0,
        first_model_only: bool = False,
    ):
        """Explore all total assignments; returns (models, best_cost, exhausted).

        With weak constraints this is branch-and-bound collecting all models of
        the final optimal cost; `first_model_only` additionally stops at the
        first stable model regardless of cost (used for plain coherence).
        """
        if self.contradiction:
            return [], None, True
        for u in self.units:
            if not self._enqueue(u):
                return [], None, True
        if not self._propagate():
            return [], None, True
        # cost floor implied by root propagation; reaching it proves optimality
        floor = {}
        for l, vws in self.by_level.items():
            s = 0
            for v, w in vws:
                val = self.assign[v]
                if val == 1 or (val == 0 and w < 0):
                    s += w
            floor[l] = s
        self.lbmin = floor

        incumbent: dict[int, int] | None = None
        best: list[frozenset[Atom]] = []
        decisions: list[tuple[int, bool, int, int]] = []  # var, flipped, trail_len, qhead

        def backtrack_flip() -> bool:
            while decisions and decisions[-1][1]:
                var, _, tlen, qh = decisions.pop()
                for lit in self.trail[tlen:]:
                    self.assign[abs(lit)] = 0
                del self.trail[tlen:]
                self.qhead = min(self.qhead, len(self.trail))
            if not decisions:
                return False
            var, _, tlen, qh = decisions[-1]
            for lit in self.trail[tlen:]:
                self.assign[abs(lit)] = 0
            del self.trail[tlen:]
            self.qhead = len(self.trail)
            decisions[-1] = (var, True, tlen, qh)
            self._enqueue(var)  # flipped polarity: try true second
            return True

        conflict = not self._propagate()
        while True:
            self._tick()
            if not conflict and self._pruned(incumbent):
                conflict = True
            if not conflict:
                var = None
                for v in self.order:
                    if self.assign[v] == 0:
                        var = v
                        break
                if var is None:
                    # total assignment: candidate supported model
                    if self.tight or self._stable():
                        cost = self._model_cost()
                        if incumbent is None or self._lex_better(cost, incumbent, self.levels):
                            incumbent = cost
                            best = [self._model_atoms(shown)]
                        elif cost == incumbent:
                            best.append(self._model_atoms(shown))
                        if first_model_only:
                            return best, incumbent, False
                        if incumbent == self.lbmin:
                            if not enumerate_all:
                                return best, incumbent, False
                            if model_limit and len(best) >= model_limit:
                                return best, incumbent, False
                    conflict = True
                else:
                    decisions.append((var, False, len(self.trail), self.qhead))
                    self._enqueue(-var)  # try false first
                    conflict = not self._propagate()
                    continue
            if conflict:
                if not backtrack_flip():
                    return best, incumbent, True
                conflict = not self._propagate()


def solve_ground(
    gp: GroundProgram,
    *,
    enumerate_all: bool = False,
    model_limit: int = 0,
    deadline: float | None = None,
    first_model_only: bool = False,
) -> SolveResult:
    eng = _Engine(gp, deadline)
    models, cost, exhausted = eng.run(
        gp.shown,
        enumerate_all=enumerate_all,
        model_limit=model_limit,
        first_model_only=first_model_only,
    )
    if not models:
        return SolveResult(UNSAT, [], None, exhausted)
    has_weaks = bool(gp.weaks)
    if enumerate_all:
        models = sorted(models, key=lambda m: sorted(str(a) for a in m))
        if model_limit:
            models = models[:model_limit]
    else:
        models = models[:1]
    status = OPTIMUM if has_weaks else SAT
    levels = {w.level for w in gp.weaks}
    full_cost = {l: (cost or {}).get(l, 0) for l in levels} if has_weaks else None
    return SolveResult(status, models, full_cost, exhausted)


def solve_program(
    program: Program,
    *,
    enumerate_all: bool = False,
    model_limit: int = 0,
    timeout: float | None = None,
    first_model_only: bool = False,
) -> SolveResult:
    """Ground and solve; the engine-facing entry point of the builtin backend."""
    deadline = time.monotonic() + timeout if timeout is not None else None
    gp = ground(program)
    return solve_ground(
        gp,
        enumerate_all=enumerate_all,
        model_limit=model_limit,
        deadline=deadline,
        first_model_only=first_model_only,
    )
