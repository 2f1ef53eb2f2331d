import random

import pytest

from caspr.core import Program, Quantifier, atom, emit_text
from caspr.parser import (
    ParseError,
    SafetyError,
    SectionError,
    parse_model_atom,
    parse_program,
    parse_quantified,
)

from support import random_roundtrip_program


def test_example_program_sections(ex1):
    assert ex1.q1 is Quantifier.EXISTS
    assert ex1.q2 is Quantifier.FORALL
    assert len(ex1.p1.rules) == 4
    assert len(ex1.p2.rules) == 2 and len(ex1.p2.weaks) == 2
    assert len(ex1.c.rules) == 1 and ex1.c.rules[0].is_constraint
    assert ex1.cw == ()


def test_three_exists_sections_rejected():
    text = "%@exists\na.\n%@exists\nb.\n%@exists\nc.\n"
    with pytest.raises(SectionError):
        parse_quantified(text)


def test_global_section_rejects_rules():
    text = "%@exists\na.\n%@forall\nb.\n%@global\nc :- a.\n"
    with pytest.raises(ParseError) as e:
        parse_quantified(text)
    assert "weak constraints only" in str(e.value)


def test_constraint_section_rejects_weaks():
    text = "%@exists\na.\n%@forall\nb.\n%@constraint\n:~ a. [1@1]\n"
    with pytest.raises(ParseError):
        parse_quantified(text)


def test_misordered_sections():
    text = "%@exists\na.\n%@global\n:~ a. [1@1]\n%@forall\nb.\n"
    with pytest.raises(SectionError):
        parse_quantified(text)


def test_statement_before_first_directive():
    with pytest.raises(SectionError):
        parse_quantified("a.\n%@exists\nb.\n%@forall\nc.\n")


def test_uniform_quantifiers_accepted():
    qp = parse_quantified("%@forall\na :- not b. b :- not a.\n%@forall\nc :- not d. d :- not c.\n")
    assert qp.q1 is qp.q2 is Quantifier.FORALL
    assert not qp.alternating


def test_parse_two_normal_rules():
    p = parse_program("c :- not nc. nc :- not c.")
    assert len(p.rules) == 2
    assert p.rules[0].head == atom("c")
    assert p.rules[0].body[0].neg


def test_parse_weak_constraint():
    p = parse_program(":~ a, not c. [1@1]")
    (w,) = p.weaks
    assert w.level == 1 and not w.tuple_
    assert str(w.weight) == "1"


def test_parse_weak_with_tuple_and_negative_level():
    p = parse_program(":~ p(X). [X@-2,X,k]")
    (w,) = p.weaks
    assert w.level == -2 and len(w.tuple_) == 2


def test_unsafe_variable_rejected():
    with pytest.raises(SafetyError) as e:
        parse_program("p(X) :- not q(X).")
    assert e.value.variable == "X"


def test_unsafe_weak_weight_rejected():
    with pytest.raises(SafetyError):
        parse_program(":~ a. [W@1]")


def test_assignment_aggregate_guard_counts_as_bound():
    p = parse_program("s(T) :- #sum{C : v(C)} = T.", allow_reserved=False)
    assert len(p.rules) == 1


def test_variable_level_rejected():
    with pytest.raises(ParseError):
        parse_program(":~ p(L). [1@L]")


def test_parse_error_has_position():
    with pytest.raises(ParseError) as e:
        parse_program("p :- q %")  # missing dot
    assert e.value.span.line == 1
    assert e.value.span.column >= 1


def test_errors_point_inside_input():
    text = "a.\nb :- ,\n"
    with pytest.raises(ParseError) as e:
        parse_program(text)
    assert e.value.span.line == 2


def test_reserved_prefix_rejected_in_user_input():
    with pytest.raises(ParseError):
        parse_program("caspr_x.")
    # machine-generated programs may use it
    assert parse_program("caspr_x.", allow_reserved=True).rules


def test_choice_rule_desugars_to_even_loop():
    p = parse_program("{a; b}.")
    assert len(p.rules) == 4
    texts = {str(r) for r in p.rules}
    assert "a :- not caspr_n_a." in texts
    assert "caspr_n_a :- not a." in texts


def test_comment_handling_and_directive_column():
    text = "%@exists\na. % trailing comment\n % not a directive: %@forall\n%@forall\nb.\n"
    qp = parse_quantified(text)
    assert len(qp.p1.rules) == 1 and len(qp.p2.rules) == 1


def test_empty_body_constraint():
    p = parse_program(":- .")
    assert p.rules[0].is_constraint and p.rules[0].body == ()


def test_negated_aggregate_rejected():
    with pytest.raises(ParseError):
        parse_program("p :- not #sum{C : v(C)} = 1, q.")


def test_parse_model_atom():
    a = parse_model_atom("caspr_cl_neg_ce1(2,-1)")
    assert a.pred == "caspr_cl_neg_ce1"
    assert str(a) == "caspr_cl_neg_ce1(2,-1)"


def test_parse_emit_identity_random():
    rng = random.Random(23)
    for _ in range(150):
        p = random_roundtrip_program(rng)
        assert parse_program(emit_text(p), allow_reserved=True) == p


def test_validation_runs_on_parse():
    text = "%@exists\nc :- not d. d :- not c.\n%@forall\nc :- not e. e :- not c.\n"
    with pytest.raises(ParseError) as e:
        parse_quantified(text)
    assert "HeadOverlap" in str(e.value)
