"""Appraisal scoring: hand-checked cases, range/monotonicity properties."""

import random

import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_demo_store, make_hr_store

from unistore import appraisal as app
from unistore.errors import InvalidParams, NoAssignment, NotVacant, UnknownId

P = app.AppraisalParams()  # all weights 0.5


# --------------------------------------------------------------------------
# Pure scoring over stat trees
# --------------------------------------------------------------------------


def test_leaf_perfectly_staffed_scores_one():
    node = app.UnitNode(unit=1, fills=[1.0, 1.0], vacancies=0)
    assert app.unit_score(node, P).value == pytest.approx(1.0)


def test_leaf_all_vacant():
    # coverage vacuously 1, staffing 0: 0.5*1 + 0.5*0
    node = app.UnitNode(unit=1, fills=[], vacancies=2)
    assert app.unit_score(node, P).value == pytest.approx(0.5)


def test_root_without_positions_averages_children():
    node = app.UnitNode(unit=1, children=[
        app.UnitNode(unit=2, fills=[1.0], vacancies=0),
        app.UnitNode(unit=3, fills=[], vacancies=2),
    ])
    assert app.unit_score(node, P).value == pytest.approx(0.75)


def test_mixed_unit_blends_local_and_children():
    # local: coverage (0.5+1)/2=0.75, staffing 2/3 -> L = 0.5*0.75+0.5*(2/3)
    # child mean 1.0; F = 0.5*L + 0.5*1.0
    node = app.UnitNode(unit=1, fills=[0.5, 1.0], vacancies=1, children=[
        app.UnitNode(unit=2, fills=[1.0], vacancies=0),
    ])
    local = 0.5 * 0.75 + 0.5 * (2 / 3)
    assert app.unit_score(node, P).value == pytest.approx(0.5 * local + 0.5)


def test_breakdown_reproduces_value():
    node = app.UnitNode(unit=1, fills=[0.25, 0.75], vacancies=3, children=[
        app.UnitNode(unit=2, fills=[0.5], vacancies=1),
    ])
    score = app.unit_score(node, P)
    b = score.breakdown
    local = P.w_s * b["coverage"] + P.w_p * b["staffing"]
    assert b["local"] == pytest.approx(local)
    assert score.value == pytest.approx(P.w_local * b["local"] + P.w_child * b["child_mean"])


def test_params_validation():
    with pytest.raises(InvalidParams):
        app.AppraisalParams(w_s=0.7, w_p=0.5).validate()
    with pytest.raises(InvalidParams):
        app.AppraisalParams(w_local=-0.1, w_child=1.1).validate()
    app.AppraisalParams(w_s=0.3, w_p=0.7).validate()


# -- random trees ------------------------------------------------------------


def _random_tree(rng: random.Random, depth: int) -> app.UnitNode:
    node = app.UnitNode(
        unit=rng.randrange(10_000),
        fills=[rng.random() for _ in range(rng.randint(0, 4))],
        vacancies=rng.randint(0, 3),
    )
    if depth > 0:
        node.children = [
            _random_tree(rng, depth - 1) for _ in range(rng.randint(0, 3))
        ]
    return node


def _random_params(rng: random.Random) -> app.AppraisalParams:
    ws = rng.random()
    wl = rng.random()
    return app.AppraisalParams(w_s=ws, w_p=1 - ws, w_local=wl, w_child=1 - wl)


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 10**9))
def test_score_always_in_unit_interval(seed):
    rng = random.Random(seed)
    tree = _random_tree(rng, 3)
    params = _random_params(rng)
    def walk(node):
        assert 0.0 <= app.unit_score(node, params).value <= 1.0
        for c in node.children:
            walk(c)
    walk(tree)


@settings(max_examples=150, deadline=None)
@given(seed=st.integers(0, 10**9))
def test_perfect_staffing_is_a_fixpoint(seed):
    rng = random.Random(seed)
    tree = _random_tree(rng, 2)
    def perfect(node):
        node.fills = [1.0] * max(1, len(node.fills))
        node.vacancies = 0
        for c in node.children:
            perfect(c)
    perfect(tree)
    params = _random_params(rng)
    assert app.unit_score(tree, params).value == pytest.approx(1.0)


@settings(max_examples=150, deadline=None)
@given(seed=st.integers(0, 10**9))
def test_filling_a_vacancy_with_perfect_match_never_hurts(seed):
    rng = random.Random(seed)
    tree = _random_tree(rng, 2)
    params = _random_params(rng)
    vacant: list[app.UnitNode] = []
    def collect(node):
        if node.vacancies > 0:
            vacant.append(node)
        for c in node.children:
            collect(c)
    collect(tree)
    if not vacant:
        vacant.append(tree)
        tree.vacancies = 1
    target = rng.choice(vacant)
    def scores(node, acc):
        acc.append(app.unit_score(node, params).value)
        for c in node.children:
            scores(c, acc)
    before: list[float] = []
    scores(tree, before)
    target.vacancies -= 1
    target.fills.append(1.0)
    after: list[float] = []
    scores(tree, after)
    for b, a in zip(before, after):
        assert a >= b - 1e-12


# --------------------------------------------------------------------------
# Store-backed operations
# --------------------------------------------------------------------------


@pytest.fixture(scope="module")
def corp():
    return make_demo_store(40)


def _vacant_position(store):
    content = store.content_at(store.head)
    for pid in sorted(store.extent("Position")):
        if content.assign_by_position.get(pid) is None:
            return pid
    raise AssertionError("demo store has no vacancy")


def test_match_score_fraction(corp):
    s = make_hr_store()
    sess = s.system_session()
    root = min(s.extent("OrgUnit"))
    pos = s.create(sess, "Position", {"unit": root, "title": "Specialist"})
    for tag in ("a", "b", "c", "d"):
        s.create(sess, "PositionFunction", {"position": pos, "tag": tag})
    state = s.submit(sess, "hire", {"values": {
        "name": "Halfway", "hire_date": "2001-01-01"}, "functions": ["a", "b"]})
    emp = s.log.records[state - 1].effects[0]["id"]
    assert app.match_score(s, emp, pos) == pytest.approx(0.5)


def test_match_score_empty_requirements_is_one(corp):
    s = make_hr_store()
    sess = s.system_session()
    root = min(s.extent("OrgUnit"))
    pos = s.create(sess, "Position", {"unit": root, "title": "Specialist"})
    state = s.submit(sess, "hire", {"values": {
        "name": "Anyone", "hire_date": "2001-01-01"}})
    emp = s.log.records[state - 1].effects[0]["id"]
    assert app.match_score(s, emp, pos) == 1.0


def test_match_score_no_overlap_is_zero():
    s = make_hr_store()
    sess = s.system_session()
    root = min(s.extent("OrgUnit"))
    pos = s.create(sess, "Position", {"unit": root, "title": "Specialist"})
    s.create(sess, "PositionFunction", {"position": pos, "tag": "x"})
    state = s.submit(sess, "hire", {"values": {
        "name": "Mismatch", "hire_date": "2001-01-01"}, "functions": ["y"]})
    emp = s.log.records[state - 1].effects[0]["id"]
    assert app.match_score(s, emp, pos) == 0.0


def test_match_score_unknown_ids(corp):
    with pytest.raises(UnknownId):
        app.match_score(corp, 10**9, 10**9)


def test_appraise_unit_against_tree_recomputation(corp):
    params = app.stored_params(corp)
    nodes = app.build_unit_nodes(corp, corp.head, params)
    for uid in sorted(corp.extent("OrgUnit")):
        want = app.unit_score(nodes[uid], params).value
        got = app.appraise_unit(corp, uid).value
        assert got == pytest.approx(want)
        assert 0.0 <= got <= 1.0


def test_appraise_employee_blend(corp):
    content = corp.content_at(corp.head)
    emp = next(e for e in sorted(corp.extent("Employee"))
               if content.assign_by_employee.get(e))
    row = content.individuals[content.assign_by_employee[emp]]
    pos = row.values["position"]
    unit = content.individuals[pos].values["unit"]
    m = app.match_score(corp, emp, pos)
    f = app.appraise_unit(corp, unit).value
    got = app.appraise_employee(corp, emp)
    assert got.value == pytest.approx(0.5 * m + 0.5 * f)


def test_appraise_employee_without_assignment(corp):
    state = corp.submit(None, "hire", {"values": {
        "name": "Bench Warmer", "hire_date": "2002-01-01"}})
    emp = corp.log.records[state - 1].effects[0]["id"]
    with pytest.raises(NoAssignment):
        app.appraise_employee(corp, emp)


def test_rank_candidates_order_and_tiebreak():
    s = make_hr_store()
    sess = s.system_session()
    root = min(s.extent("OrgUnit"))
    pos = s.create(sess, "Position", {"unit": root, "title": "Specialist"})
    for tag in ("a", "b"):
        s.create(sess, "PositionFunction", {"position": pos, "tag": tag})
    ids = []
    for name, funcs in (("Full", ["a", "b"]), ("Half", ["a"]),
                        ("None", []), ("AlsoHalf", ["b"])):
        state = s.submit(sess, "hire", {"values": {
            "name": name, "hire_date": "2001-01-01"}, "functions": funcs})
        ids.append(s.log.records[state - 1].effects[0]["id"])
    ranked = app.rank_candidates(s, pos)
    assert [r["employee"] for r in ranked] == [ids[0], ids[1], ids[3], ids[2]]
    assert ranked[0]["match"] == 1.0
    assert ranked[1]["match"] == ranked[2]["match"] == 0.5
    assert ranked[1]["employee"] < ranked[2]["employee"]  # tie -> lower id first
    assert ranked[0]["current_position"] is None


def test_rank_candidates_not_vacant(corp):
    content = corp.content_at(corp.head)
    held = next(p for p in sorted(corp.extent("Position"))
                if content.assign_by_position.get(p))
    with pytest.raises(NotVacant):
        app.rank_candidates(corp, held)


def test_rank_candidates_empty_store():
    s = make_hr_store()
    root = min(s.extent("OrgUnit"))
    pos = s.create(None, "Position", {"unit": root, "title": "Specialist"})
    assert app.rank_candidates(s, pos) == []


def test_rank_order_invariant_under_duplication():
    """Duplicating every position and holder leaves candidate order alone."""
    def build(dup):
        s = make_hr_store()
        sess = s.system_session()
        root = min(s.extent("OrgUnit"))
        vac = s.create(sess, "Position", {"unit": root, "title": "Open"})
        s.create(sess, "PositionFunction", {"position": vac, "tag": "a"})
        s.create(sess, "PositionFunction", {"position": vac, "tag": "b"})
        for copy in range(dup):
            for name, funcs in (("P1", ["a", "b"]), ("P2", ["b"]), ("P3", [])):
                pos = s.create(sess, "Position",
                               {"unit": root, "title": f"Held {name} {copy}"})
                s.submit(sess, "hire", {"values": {
                    "name": f"{name} copy{copy}", "hire_date": "2001-01-01"},
                    "position": pos, "functions": funcs})
        ranked = app.rank_candidates(s, vac)
        return [(r["name"].split(" ")[0], r["match"]) for r in ranked]
    single = build(1)
    double = build(2)
    # match per name is unchanged and the first-occurrence order of names
    # is identical: duplication cannot reorder candidates
    def first_occurrences(rows):
        seen, order = {}, []
        for name, match in rows:
            if name not in seen:
                seen[name] = match
                order.append(name)
        return order, seen
    order1, match1 = first_occurrences(single)
    order2, match2 = first_occurrences(double)
    assert order1 == order2
    assert match1 == match2


def test_whatif_moves_do_not_append_events(corp):
    head = corp.head
    vac = _vacant_position(corp)
    content = corp.content_at(corp.head)
    emp = next(e for e in sorted(corp.extent("Employee"))
               if content.assign_by_employee.get(e))
    unit = content.individuals[vac].values["unit"]
    base = app.appraise_unit(corp, unit)
    moved = app.appraise_unit(corp, unit, moves=[(emp, vac)])
    assert corp.head == head
    assert moved.breakdown["e"] == base.breakdown["e"] + 1
