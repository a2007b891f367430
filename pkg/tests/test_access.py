"""Org-derived profiles, the scenario decision table, mandatory fields."""

import pytest

from conftest import make_demo_store

from unistore import access as acc
from unistore.errors import AccessDenied, AuthFailed, NoAssignment, SessionClosed
from unistore.model import HR_PACKS, ORG_PACK


@pytest.fixture(scope="module")
def demo():
    return make_demo_store(60)


def _login_for_title(store, title):
    content = store.content_at(store.head)
    for ident in sorted(store.extent("Employee")):
        row_id = content.assign_by_employee.get(ident)
        if row_id is None:
            continue
        pos = content.individuals[content.individuals[row_id].values["position"]]
        if pos.values.get("title") == title:
            return content.individuals[ident].values["login"]
    raise AssertionError(f"no employee titled {title!r}")


@pytest.fixture(scope="module")
def sessions(demo):
    return {
        "president": demo.open_session(_login_for_title(demo, "President")),
        "hr_director": demo.open_session(_login_for_title(demo, "HR Director")),
        "unit_manager": demo.open_session(_login_for_title(demo, "Unit Manager")),
        "hr_officer": demo.open_session(_login_for_title(demo, "HR Officer")),
        "employee": demo.open_session(_login_for_title(demo, "Specialist")),
    }


# --------------------------------------------------------------------------
# derive_profile
# --------------------------------------------------------------------------


def test_president_profile(demo, sessions):
    p = sessions["president"].profile
    assert p.scenario == "president"
    assert p.visible_units is None
    assert p.metadata_admin


def test_employee_profile_sees_only_own_unit(demo, sessions):
    session = sessions["employee"]
    p = session.profile
    assert p.scenario == "employee"
    assert not p.metadata_admin
    content = demo.content_at(demo.head)
    row = content.individuals[content.assign_by_employee[session.user]]
    pos = content.individuals[row.values["position"]]
    assert p.visible_units == frozenset({pos.values["unit"]})


def test_unassigned_user_has_no_profile(demo):
    state = demo.submit(None, "hire", {"values": {
        "name": "Floating Person", "hire_date": "2002-01-01", "login": "floater",
    }})
    with pytest.raises(NoAssignment):
        demo.derive_profile(demo.log.records[state - 1].effects[0]["id"])
    with pytest.raises(NoAssignment):
        demo.open_session("floater")


def test_unknown_credential(demo):
    with pytest.raises(AuthFailed):
        demo.open_session("nobody-here")


def test_profile_snapshot_survives_later_org_changes(demo):
    login = _login_for_title(demo, "Specialist")
    session = demo.open_session(login)
    assert session.profile.scenario == "employee"
    content = demo.content_at(demo.head)
    row = content.individuals[content.assign_by_employee[session.user]]
    pos = content.individuals[row.values["position"]]
    demo.submit(None, "set_attr", {
        "individual": pos.id, "values": {"title": "Unit Manager"},
    })
    # open session keeps employee rights; a fresh one sees the promotion
    assert session.profile.scenario == "employee"
    fresh = demo.open_session(login)
    assert fresh.profile.scenario == "unit_manager"
    demo.submit(None, "set_attr", {
        "individual": pos.id, "values": {"title": "Specialist"},
    })


def test_two_logins_are_independent_sessions(demo):
    login = _login_for_title(demo, "Specialist")
    s1 = demo.open_session(login)
    s2 = demo.open_session(login)
    assert s1.id != s2.id
    demo.close_session(s1.id)
    with pytest.raises(SessionClosed):
        demo.check_access(s1, "read", s1.user)
    assert demo.check_access(s2, "read", s2.user).allow


# --------------------------------------------------------------------------
# Decision table probes
# --------------------------------------------------------------------------


def _some_employee_outside(demo, session):
    """An employee individual not visible/owned by the session's user."""
    content = demo.content_at(demo.head)
    for ident in sorted(demo.extent("Employee")):
        if ident == session.user:
            continue
        unit = acc.owning_unit(content, content.individuals[ident])
        if unit is None:
            continue
        if session.profile.visible_units is None or unit not in session.profile.visible_units:
            return ident
    for ident in sorted(demo.extent("Employee")):
        if ident != session.user:
            return ident
    raise AssertionError("no other employee")


def test_employee_cannot_read_other_units_records(demo, sessions):
    other = _some_employee_outside(demo, sessions["employee"])
    decision = demo.check_access(sessions["employee"], "read", other)
    assert not decision.allow


def test_employee_reads_own_row_and_linked_records(demo, sessions):
    session = sessions["employee"]
    assert demo.check_access(session, "read", session.user).allow
    content = demo.content_at(demo.head)
    own_links = [
        i for i in demo.extent("EmployeeFunction")
        if content.individuals[i].values.get("employee") == session.user
    ]
    for link in own_links:
        assert demo.check_access(session, "read", link).allow


def test_hr_officer_writes_hr_concepts_within_subtree(demo, sessions):
    session = sessions["hr_officer"]
    content = demo.content_at(demo.head)
    target = None
    for ident in sorted(demo.extent("Employee")):
        unit = acc.owning_unit(content, content.individuals[ident])
        if unit in session.profile.visible_units and ident != session.user:
            target = ident
            break
    assert target is not None
    assert demo.check_access(session, "write", target).allow
    out = _some_employee_outside(demo, session)
    assert not demo.check_access(session, "write", out).allow


def test_unit_manager_cannot_edit_metadata(demo, sessions):
    session = sessions["unit_manager"]
    meta_name = next(iter(demo.content_at(demo.head).metas))
    decision = demo.check_access(session, "write", meta_name)
    assert not decision.allow
    assert "metadata_admin" in decision.reason
    with pytest.raises(AccessDenied):
        demo.submit(session, "comprehend", {
            "name": "ManagersView", "formula": "status = 'active'", "domain": "Employee",
        })


def test_unit_manager_submits_lifecycle_in_subtree_only(demo, sessions):
    session = sessions["unit_manager"]
    content = demo.content_at(demo.head)
    inside = None
    outside = None
    for ident in sorted(demo.extent("Employee")):
        unit = acc.owning_unit(content, content.individuals[ident])
        if unit is None:
            continue
        if unit in session.profile.visible_units:
            inside = inside or ident
        else:
            outside = outside or ident
    assert inside and outside
    with pytest.raises(AccessDenied):
        demo.submit(session, "dismiss", {"employee": outside})
    state = demo.submit(session, "dismiss", {"employee": inside})
    demo.rollback(None, state - 1)  # restore for later tests


def test_decision_table_deny_by_default(demo, sessions):
    """Scenario x concept-kind x action probes outside the table all deny."""
    content = demo.content_at(demo.head)
    pack_concepts = {n for n, c in content.concepts.items() if c.origin_pack in HR_PACKS}
    org_concepts = {n for n, c in content.concepts.items() if c.origin_pack == ORG_PACK}
    builtin = {n for n, c in content.concepts.items() if c.builtin}
    adhoc = demo.define_concept(None, "AdHocNotes", [{"name": "note", "type": "text"}])
    all_concepts = pack_concepts | org_concepts | builtin | {"AdHocNotes"}

    def expected_allow(scenario, concept, action):
        if scenario in ("president", "hr_director"):
            return True
        if scenario == "unit_manager":
            return action == "read" and concept not in ()  # reads everything
        if scenario == "hr_officer":
            if action == "read":
                return concept in pack_concepts or concept in org_concepts
            return action == "write" and concept in pack_concepts
        if scenario == "employee":
            return False  # concept-level probes all deny; own rows tested above
        raise AssertionError(scenario)

    mismatches = []
    for scenario, session in sessions.items():
        fresh = demo.open_session(
            _login_for_title(demo, {
                "president": "President", "hr_director": "HR Director",
                "unit_manager": "Unit Manager", "hr_officer": "HR Officer",
                "employee": "Specialist",
            }[scenario]))
        for concept in sorted(all_concepts):
            for action in ("read", "write", "define"):
                got = demo.check_access(fresh, action, concept).allow
                want = expected_allow(scenario, concept, action) and action != "define"
                if scenario in ("president", "hr_director"):
                    want = True
                if action == "write" and concept in builtin and scenario not in (
                        "president", "hr_director"):
                    want = False
                if got != want:
                    mismatches.append((scenario, concept, action, got, want))
    assert not mismatches, mismatches[:10]


def test_subtree_subset_property(demo):
    """Anyone managed (transitively) by a manager reads a subset of what the
    manager reads."""
    content = demo.content_at(demo.head)
    managers = []
    subordinates = []
    for ident in sorted(demo.extent("Employee")):
        row_id = content.assign_by_employee.get(ident)
        if row_id is None:
            continue
        pos = content.individuals[content.individuals[row_id].values["position"]]
        title = pos.values.get("title")
        login = content.individuals[ident].values["login"]
        session = demo.open_session(login)
        scenario = session.profile.scenario
        entry = (ident, pos.values["unit"], session)
        if scenario in ("president", "hr_director", "unit_manager"):
            managers.append(entry)
        subordinates.append(entry)

    checked = 0
    for m_id, m_unit, m_sess in managers:
        scope = m_sess.profile.visible_units
        readable_m = None
        for s_id, s_unit, s_sess in subordinates:
            if s_id == m_id:
                continue
            if scope is not None and s_unit not in scope:
                continue
            if readable_m is None:
                readable_m = acc.readable_individuals(demo, m_sess, demo.head)
            readable_s = acc.readable_individuals(demo, s_sess, demo.head)
            assert readable_s <= readable_m, (s_id, m_id)
            checked += 1
            if checked > 30:
                return
    assert checked > 0


# --------------------------------------------------------------------------
# Mandatory fields
# --------------------------------------------------------------------------


def test_mandatory_base_set(demo):
    assert demo.mandatory_fields(None, "Employee") == frozenset({"name", "hire_date"})


def test_mandatory_override_on_foreign_draft(demo):
    required = demo.mandatory_fields(None, "Employee",
                                     draft={"citizenship": "foreign"})
    assert "visa_no" in required
    required2 = demo.mandatory_fields(None, "Employee",
                                      draft={"citizenship": "domestic"})
    assert "visa_no" not in required2


def test_mandatory_requires_visible_concept(demo, sessions):
    with pytest.raises(AccessDenied):
        demo.mandatory_fields(sessions["employee"], "Charge")


def test_employee_may_submit_own_leave_request_only(demo, sessions):
    session = demo.open_session(_login_for_title(demo, "Specialist"))
    other = _some_employee_outside(demo, session)
    with pytest.raises(AccessDenied):
        demo.submit(session, "create", {"concept": "LeaveRequest", "values": {
            "employee": other, "kind": "annual",
            "from_date": "2002-06-01", "to_date": "2002-06-10",
        }})
    state = demo.submit(session, "create", {"concept": "LeaveRequest", "values": {
        "employee": session.user, "kind": "annual",
        "from_date": "2002-06-01", "to_date": "2002-06-10",
    }})
    assert state == demo.head
    with pytest.raises(AccessDenied):
        demo.submit(session, "create", {"concept": "Charge", "values": {
            "employee": session.user, "kind": "bonus", "amount": 10.0,
        }})
