"""caspr: a CEGAR-based solver for two-quantifier ASP programs with weak
constraints, plus a reference enumeration evaluator and instance generators."""

__version__ = "0.1.0"

from .core import (  # noqa: F401
    Atom,
    CostVector,
    Interpretation,
    Program,
    QuantifiedProgram,
    Quantifier,
    Rule,
    WeakConstraint,
    dominates,
    emit_text,
    evaluate_cost,
    validate,
)
from .parser import ParseError, parse_program, parse_quantified  # noqa: F401
