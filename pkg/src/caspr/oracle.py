"""Client for the ASP oracle.

A configured external solver is spoken to over a pipe: the program text goes
to stdin and the answer is line-parsed (Answer blocks plus a final status
keyword).  Optimization values are never used for decisions, which keeps the
client robust across solver versions; cost reasoning happens in-program or via
cost evaluation on returned models.

With no command configured (and no CASPR_SOLVER in the environment) the
bundled solver backend is called in-process, avoiding interpreter startup per
call.  The wire protocol remains available through the caspr-solver script.
"""

from __future__ import annotations

import enum
import os
import shlex
import signal
import subprocess
from dataclasses import dataclass, field

from . import __version__
from .core import Atom, Program, emit_text
from .grounding import GroundingError
from .parser import ParseError, parse_model_atom
from .search import SearchTimeout, solve_program

ENV_SOLVER = "CASPR_SOLVER"
DEFAULT_TIMEOUT = 300.0

SOLVE_ARGS = ["--opt-mode=opt", "--quiet=1,2,2", "0"]
ENUM_ARGS = ["--opt-mode=optN", "--quiet=0,2,2", "0"]

STATUS_KEYWORDS = ("OPTIMUM FOUND", "UNSATISFIABLE", "SATISFIABLE", "UNKNOWN")


class OracleError(Exception):
    pass


class SolverSpawnError(OracleError):
    pass


class SolverProtocolError(OracleError):
    pass


class SolveStatus(enum.Enum):
    UNSAT = "unsat"
    SAT = "sat"
    OPTIMUM_FOUND = "optimum_found"
    UNKNOWN = "unknown"


@dataclass
class SolverConfig:
    """How to reach the solver: external command line or in-process backend."""

    command: str | None = None  # None: use $CASPR_SOLVER, else the builtin backend
    timeout: float = DEFAULT_TIMEOUT
    model_limit: int = 0  # for enumeration; 0 = all

    def __post_init__(self):
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")

    def resolved_command(self) -> str | None:
        if self.command:
            return self.command
        return os.environ.get(ENV_SOLVER) or None


@dataclass
class SolveOutcome:
    status: SolveStatus
    models: list[frozenset[Atom]] = field(default_factory=list)
    raw_cost_lines: list[str] = field(default_factory=list)  # diagnostics only


def _canonical(models) -> list[frozenset[Atom]]:
    uniq = {m: None for m in models}
    return sorted(uniq, key=lambda m: sorted(str(a) for a in m))


# ---------------------------------------------------------------------------
# external backend


def _run_external(command: str, mode_args: list[str], text: str, timeout: float) -> str:
    argv = shlex.split(command) + mode_args
    try:
        proc = subprocess.Popen(
            argv,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            text=True,
            start_new_session=True,
        )
    except (FileNotFoundError, PermissionError, OSError) as exc:
        raise SolverSpawnError(f"cannot spawn solver {argv[0]!r}: {exc}") from exc
    try:
        stdout, _stderr = proc.communicate(text, timeout=timeout)
    except subprocess.TimeoutExpired:
        try:
            os.killpg(os.getpgid(proc.pid), signal.SIGKILL)
        except (ProcessLookupError, PermissionError):
            proc.kill()
        proc.wait()
        return ""  # treated as Unknown by the caller
    return stdout


def _parse_output(stdout: str):
    """Extract (status, answer blocks, cost lines) from solver output."""
    lines = stdout.splitlines()
    status = None
    blocks: list[tuple[str, str | None]] = []  # (model line, optimization line)
    cost_lines: list[str] = []
    i = 0
    while i < len(lines):
        line = lines[i].strip()
        if line.startswith("Answer:"):
            model_line = lines[i + 1] if i + 1 < len(lines) else ""
            opt = None
            j = i + 2
            while j < len(lines) and lines[j].strip().startswith("Optimization"):
                opt = lines[j].strip()
                cost_lines.append(opt)
                j = j + 1
            blocks.append((model_line, opt))
            i = j
            continue
        if line in STATUS_KEYWORDS:
            status = line
        i += 1
    return status, blocks, cost_lines


def _parse_model_line(line: str) -> frozenset[Atom]:
    atoms = []
    for token in line.split():
        try:
            atoms.append(parse_model_atom(token))
        except ParseError as exc:
            raise SolverProtocolError(f"unparseable atom {token!r}: {exc}") from exc
    return frozenset(atoms)


def _external_solve(p: Program, cfg: SolverConfig, enumerate_all: bool) -> SolveOutcome:
    mode_args = ENUM_ARGS if enumerate_all else SOLVE_ARGS
    stdout = _run_external(cfg.resolved_command(), mode_args, emit_text(p), cfg.timeout)
    if stdout == "":
        return SolveOutcome(SolveStatus.UNKNOWN)
    status, blocks, cost_lines = _parse_output(stdout)
    if status is None:
        raise SolverProtocolError(f"no status keyword in solver output:\n{stdout[:500]}")
    if status == "UNSATISFIABLE":
        return SolveOutcome(SolveStatus.UNSAT, [], cost_lines)
    if status == "UNKNOWN":
        return SolveOutcome(SolveStatus.UNKNOWN, [], cost_lines)
    # keep only answers emitted at the final optimization value (optN prints
    # improving models on the way down); without optimization lines keep all
    final_opt = blocks[-1][1] if blocks else None
    kept = [b for b in blocks if b[1] == final_opt]
    if not kept:
        raise SolverProtocolError(f"{status} without any Answer block")
    models = [_parse_model_line(line) for line, _ in kept]
    return SolveOutcome(SolveStatus.OPTIMUM_FOUND, models, cost_lines)


# ---------------------------------------------------------------------------
# builtin backend


def _builtin_solve(p: Program, cfg: SolverConfig, enumerate_all: bool) -> SolveOutcome:
    try:
        result = solve_program(
            p,
            enumerate_all=enumerate_all,
            model_limit=cfg.model_limit if enumerate_all else 1,
            timeout=cfg.timeout,
        )
    except SearchTimeout:
        return SolveOutcome(SolveStatus.UNKNOWN)
    except (GroundingError, ParseError) as exc:
        raise SolverProtocolError(f"builtin solver rejected the program: {exc}") from exc
    if not result.models:
        return SolveOutcome(SolveStatus.UNSAT)
    cost_lines = []
    if result.cost is not None:
        values = " ".join(str(result.cost[l]) for l in sorted(result.cost, reverse=True))
        cost_lines = [f"Optimization: {values}"]
    return SolveOutcome(SolveStatus.OPTIMUM_FOUND, list(result.models), cost_lines)


# ---------------------------------------------------------------------------
# public operations


def solve_optimal(p: Program, cfg: SolverConfig) -> SolveOutcome:
    """One optimal answer set of p (full atom set), or Unsat/Unknown."""
    if cfg.resolved_command() is None:
        out = _builtin_solve(p, cfg, enumerate_all=False)
    else:
        out = _external_solve(p, cfg, enumerate_all=False)
    if out.status is SolveStatus.OPTIMUM_FOUND:
        out.models = out.models[-1:]
    return out


def enumerate_optimal(p: Program, cfg: SolverConfig) -> SolveOutcome:
    """All optimal answer sets of p, deduplicated and canonically ordered."""
    if cfg.resolved_command() is None:
        out = _builtin_solve(p, cfg, enumerate_all=True)
    else:
        out = _external_solve(p, cfg, enumerate_all=True)
    if out.status is SolveStatus.OPTIMUM_FOUND:
        models = _canonical(out.models)
        if cfg.model_limit:
            models = models[: cfg.model_limit]
        out.models = models
    return out


def probe(cfg: SolverConfig) -> str:
    """Run the solver on a trivial program and verify the protocol."""
    command = cfg.resolved_command()
    if command is None:
        return f"caspr-builtin {__version__}"
    stdout = _run_external(command, SOLVE_ARGS, "caspr_probe_ok.\n", cfg.timeout)
    if stdout == "":
        raise SolverProtocolError("probe timed out")
    status, blocks, _ = _parse_output(stdout)
    if status not in ("SATISFIABLE", "OPTIMUM FOUND") or not blocks:
        raise SolverProtocolError(f"unexpected probe output:\n{stdout[:500]}")
    model = _parse_model_line(blocks[-1][0])
    if Atom("caspr_probe_ok") not in model:
        raise SolverProtocolError("probe model does not contain the probe atom")
    return stdout.splitlines()[0].strip() if stdout.splitlines() else "unknown solver"
