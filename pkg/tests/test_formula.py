"""Formula language: grammar, printing, evaluation, levels."""

import datetime as dt

import pytest
from hypothesis import given, settings, strategies as st

from unistore import Store
from unistore.errors import (
    DepthExceeded,
    ParseError,
    TypeMismatch,
    UnknownAttribute,
    UnknownDomain,
)
from unistore.formula import (
    And,
    Binding,
    Compare,
    Exists,
    InConcept,
    Literal,
    Not,
    Or,
    SubjectView,
    evaluate,
    level_of,
    make_formula,
    parse,
    to_text,
)


# --------------------------------------------------------------------------
# Parsing
# --------------------------------------------------------------------------


def test_parse_conjunction_of_compares():
    f = parse("name = 'Ivanov' and salary >= 1000")
    assert f.ast == And((
        Compare(("name",), "=", Literal("text", "Ivanov")),
        Compare(("salary",), ">=", Literal("integer", 1000)),
    ))


def test_parse_exists_with_two_conjunct_body():
    f = parse("exists t in TrainingRecord: t.employee = self and t.passed = true")
    assert isinstance(f.ast, Exists)
    assert f.ast.var == "t"
    assert f.ast.domain == "TrainingRecord"
    assert f.ast.body == And((
        Compare(("t", "employee"), "=", Literal("self")),
        Compare(("t", "passed"), "=", Literal("boolean", True)),
    ))


def test_parse_error_position_for_missing_literal():
    with pytest.raises(ParseError) as err:
        parse("name = ")
    assert err.value.position == 7
    assert "literal" in err.value.expected


def test_parse_literals():
    assert parse("a = 'x''y'").ast.literal.value == "x'y"
    assert parse("a = -5").ast.literal == Literal("integer", -5)
    assert parse("a = 2.5").ast.literal == Literal("decimal", 2.5)
    assert parse("a = 2020-01-31").ast.literal == Literal("date", dt.date(2020, 1, 31))
    assert parse("a = null").ast.literal == Literal("null")
    assert parse("a != false").ast.literal == Literal("boolean", False)


def test_parse_precedence_or_over_and():
    f = parse("a = 1 and b = 2 or c = 3")
    assert isinstance(f.ast, Or)
    assert isinstance(f.ast.items[0], And)


def test_parse_in_concept_and_parens():
    f = parse("(dept in SalesUnits)")
    assert f.ast == InConcept(("dept",), "SalesUnits")


def test_keywords_are_case_sensitive():
    with pytest.raises(ParseError):
        parse("a = 1 AND b = 2")


def test_depth_limit():
    text = "(" * 20 + "a = 1" + ")" * 20
    with pytest.raises(DepthExceeded):
        parse(text)


def test_path_hop_limit():
    parse("a.b.c.d.e = 1")  # four hops is the maximum
    with pytest.raises(ParseError):
        parse("a.b.c.d.e.f = 1")


# --------------------------------------------------------------------------
# Round-trip printing
# --------------------------------------------------------------------------

_idents = st.sampled_from(["name", "status", "dept", "kind", "amount", "t", "u"])
_domains = st.sampled_from(["Employee", "OrgUnit", "TrainingRecord"])

_literals = st.one_of(
    st.text(alphabet="abc'xy ", max_size=6).map(lambda s: Literal("text", s)),
    st.integers(-10_000, 10_000).map(lambda i: Literal("integer", i)),
    st.floats(-100, 100, allow_nan=False).map(lambda x: Literal("decimal", float(x))),
    st.booleans().map(lambda b: Literal("boolean", b)),
    st.dates(dt.date(1990, 1, 1), dt.date(2050, 1, 1)).map(lambda d: Literal("date", d)),
    st.just(Literal("null")),
    st.just(Literal("self")),
)

_paths = st.lists(_idents, min_size=1, max_size=3).map(tuple)


def _compares(draw_path, lit):
    return st.builds(Compare, draw_path, st.sampled_from(["=", "!=", "<", "<=", ">", ">="]), lit)


_atoms = st.one_of(
    _compares(_paths, _literals),
    st.builds(InConcept, _paths, _domains),
)


def _formulas(depth: int):
    if depth == 0:
        return _atoms
    sub = _formulas(depth - 1)
    return st.one_of(
        _atoms,
        st.builds(Not, sub),
        st.lists(sub, min_size=2, max_size=3).map(lambda xs: And(tuple(xs))),
        st.lists(sub, min_size=2, max_size=3).map(lambda xs: Or(tuple(xs))),
        st.builds(Exists, _idents, _domains, sub),
    )


@settings(max_examples=300, deadline=None)
@given(_formulas(3))
def test_print_parse_round_trip(ast):
    printed = to_text(ast)
    assert parse(printed).ast == ast


# --------------------------------------------------------------------------
# Evaluation
# --------------------------------------------------------------------------


@pytest.fixture
def eval_store():
    store = Store()
    sess = store.system_session()
    store.define_concept(sess, "Unit", [{"name": "name", "type": "text"}])
    store.define_concept(sess, "Person", [
        {"name": "name", "type": "text", "required": True},
        {"name": "salary", "type": "integer"},
        {"name": "visa_no", "type": "text"},
        {"name": "dept", "type": "reference(Unit)"},
        {"name": "hired", "type": "date"},
    ])
    store.define_concept(sess, "Cert", [
        {"name": "person", "type": "reference(Person)"},
        {"name": "passed", "type": "boolean"},
    ])
    unit = store.create(sess, "Unit", {"name": "Sales"})
    a = store.create(sess, "Person", {"name": "Ivanov", "salary": 900, "dept": unit,
                                      "hired": "2001-05-02"})
    b = store.create(sess, "Person", {"name": "Petrov", "salary": 1500, "dept": unit})
    store.create(sess, "Cert", {"person": a, "passed": True})
    return store, a, b, unit


def _bind(store, ident):
    view = store.view_of(ident, store.head)
    return Binding(subject=view)


def test_evaluate_direct_match(eval_store):
    store, a, b, unit = eval_store
    assert evaluate(parse("name = 'Ivanov'"), _bind(store, a), store.head, store)
    assert not evaluate(parse("name = 'Ivanov'"), _bind(store, b), store.head, store)


def test_evaluate_absent_attribute_is_false(eval_store):
    store, a, *_ = eval_store
    assert not evaluate(parse("visa_no = 'X1'"), _bind(store, a), store.head, store)
    # and stays two-valued under negation
    assert evaluate(parse("not visa_no = 'X1'"), _bind(store, a), store.head, store)


def test_evaluate_null_comparisons(eval_store):
    store, a, *_ = eval_store
    # `!= null` is the presence probe; `= null` never holds
    assert evaluate(parse("salary != null"), _bind(store, a), store.head, store)
    assert not evaluate(parse("visa_no != null"), _bind(store, a), store.head, store)
    assert not evaluate(parse("salary = null"), _bind(store, a), store.head, store)


def test_evaluate_exists_over_empty_extent(eval_store):
    store, a, *_ = eval_store
    sess = store.system_session()
    store.define_concept(sess, "Empty", [{"name": "person", "type": "reference(Person)"}])
    assert not evaluate(parse("exists e in Empty: e.person = self"),
                        _bind(store, a), store.head, store)


def test_evaluate_exists_with_self(eval_store):
    store, a, b, unit = eval_store
    f = parse("exists c in Cert: c.person = self and c.passed = true")
    assert evaluate(f, _bind(store, a), store.head, store)
    assert not evaluate(f, _bind(store, b), store.head, store)


def test_evaluate_dotted_path(eval_store):
    store, a, b, unit = eval_store
    assert evaluate(parse("dept.name = 'Sales'"), _bind(store, a), store.head, store)


def test_evaluate_date_comparison(eval_store):
    store, a, *_ = eval_store
    assert evaluate(parse("hired < 2002-01-01"), _bind(store, a), store.head, store)
    assert not evaluate(parse("hired < 2001-01-01"), _bind(store, a), store.head, store)


def test_evaluate_unknown_attribute_raises(eval_store):
    store, a, *_ = eval_store
    with pytest.raises(UnknownAttribute):
        evaluate(parse("nickname = 'x'"), _bind(store, a), store.head, store)


def test_evaluate_type_mismatch_raises(eval_store):
    store, a, *_ = eval_store
    with pytest.raises(TypeMismatch):
        evaluate(parse("name = 5"), _bind(store, a), store.head, store)
    with pytest.raises(TypeMismatch):
        evaluate(parse("salary > 'abc'"), _bind(store, a), store.head, store)


def test_evaluate_unknown_domain(eval_store):
    store, a, *_ = eval_store
    with pytest.raises(UnknownDomain):
        evaluate(parse("exists q in Nowhere: q.name = 'x'"),
                 _bind(store, a), store.head, store)


def test_evaluate_is_pure(eval_store):
    store, a, *_ = eval_store
    f = parse("salary >= 900 and dept.name = 'Sales'")
    results = {evaluate(f, _bind(store, a), store.head, store) for _ in range(5)}
    assert results == {True}


def test_in_concept_against_meta(eval_store):
    store, a, b, unit = eval_store
    sess = store.system_session()
    store.comprehend(sess, "WellPaid", "salary >= 1000", "Person")
    assert evaluate(parse("self in WellPaid"), _bind(store, b), store.head, store)
    assert not evaluate(parse("self in WellPaid"), _bind(store, a), store.head, store)


# --------------------------------------------------------------------------
# Levels
# --------------------------------------------------------------------------


def test_level_of_concept_reference(eval_store):
    store, *_ = eval_store
    assert level_of(parse("exists p in Person: p.salary > 0"), store, store.head) == 1


def test_level_of_no_domains_is_zero(eval_store):
    store, *_ = eval_store
    assert level_of(parse("salary > 0"), store, store.head) == 0


def test_level_of_meta_reference(eval_store):
    store, *_ = eval_store
    sess = store.system_session()
    store.comprehend(sess, "Paid", "salary != null", "Person")
    assert level_of(parse("self in Paid"), store, store.head) == 1
    store.comprehend(sess, "FirstLevels", "level = 1", "MetaObject")
    assert level_of(parse("self in FirstLevels"), store, store.head) == 2


def test_level_of_unknown_domain(eval_store):
    store, *_ = eval_store
    with pytest.raises(UnknownDomain):
        level_of(parse("x in Missing"), store, store.head)
