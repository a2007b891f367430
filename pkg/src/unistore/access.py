"""Org-derived sessions and access decisions.

A profile is derived from the user's active assignment when a session opens
and stays fixed for the session's lifetime.  Position titles map to one of
five scenario profiles through the ScenarioMapping concept; everything not
granted by the scenario's row in the decision table is denied.

Decision table (normative for this engine):

    president, hr_director  read/write/define everything, metadata admin,
                            whole tree visible
    unit_manager            read all objects within own subtree; submit
                            personnel lifecycle events (hire, transfer,
                            dismiss, re_enroll) within subtree; no metadata
                            writes
    hr_officer              read pack-delivered concepts within subtree;
                            create/update/retire records of the eight
                            personnel packs within subtree; no metadata
                            writes
    employee                read records owned by self; create own leave
                            requests; nothing else
"""

from __future__ import annotations

from collections import namedtuple
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Optional

from .errors import AccessDenied, NoAssignment, UnknownConcept
from .formula import CompiledFormula, SubjectView, check_formula, parse
from .model import (
    APPRAISAL_PARAMS,
    ASSIGNMENT,
    EMPLOYEE,
    HR_PACKS,
    LEAVE_REQUEST,
    MANDATORY_OVERRIDE,
    ORG_PACK,
    ORG_UNIT,
    POSITION,
    SCENARIO_MAPPING,
    Content,
    Individual,
    coerce_value,
)

SCENARIOS = ("president", "hr_director", "unit_manager", "hr_officer", "employee")
ADMIN_SCENARIOS = frozenset({"president", "hr_director"})
LIFECYCLE_KINDS = frozenset({"hire", "transfer", "dismiss", "re_enroll"})
METADATA_KINDS = frozenset(
    {"define_concept", "extend_concept", "comprehend", "rule_register", "pack_apply",
     "rollback_marker"}
)

Decision = namedtuple("Decision", "allow reason")

ALLOW = Decision(True, None)


def deny(reason: str) -> Decision:
    return Decision(False, reason)


@dataclass(frozen=True)
class AccessProfile:
    scenario: str
    visible_units: Optional[frozenset[int]]  # None = whole tree
    grants: frozenset[tuple[str, str]]
    metadata_admin: bool
    mandatory_overrides: tuple[tuple[str, str, tuple[str, ...]], ...] = ()

    def has_grant(self, name: str, action: str) -> bool:
        g = self.grants
        return (
            ("*", "*") in g
            or (name, action) in g
            or ("*", action) in g
            or (name, "*") in g
        )

    def sees_unit(self, unit: Optional[int]) -> bool:
        if unit is None or self.visible_units is None:
            return True
        return unit in self.visible_units


@dataclass
class Session:
    id: str
    user: Optional[int]
    profile: AccessProfile
    opened_at: int
    expires: float
    closed: bool = False

    def actor_label(self) -> str:
        return "system" if self.user is None else f"user:{self.user}"


def bootstrap_profile() -> AccessProfile:
    """Full-rights profile for the bootstrap credential and internal tooling."""
    return AccessProfile(
        scenario="president",
        visible_units=None,
        grants=frozenset({("*", "*")}),
        metadata_admin=True,
    )


# --------------------------------------------------------------------------
# Org navigation
# --------------------------------------------------------------------------


def alive(content: Content, ident: Optional[int]) -> Optional[Individual]:
    if ident is None:
        return None
    ind = content.individuals.get(ident)
    if ind is None or ind.retired_at is not None:
        return None
    return ind


def unit_subtree(content: Content, root: int) -> frozenset[int]:
    children: dict[Optional[int], list[int]] = {}
    for uid in content.members.get(ORG_UNIT, ()):
        unit = alive(content, uid)
        if unit is not None:
            children.setdefault(unit.values.get("parent"), []).append(uid)
    out = set()
    stack = [root]
    while stack:
        cur = stack.pop()
        if cur in out:
            continue
        out.add(cur)
        stack.extend(children.get(cur, ()))
    return frozenset(out)


def owning_unit(content: Content, ind: Individual, _depth: int = 0) -> Optional[int]:
    """Org unit a record belongs to; None for corporate-global objects."""
    if _depth > 3:
        return None
    if ind.concept == ORG_UNIT:
        return ind.id
    v = ind.values
    if v.get("unit") is not None:
        return v["unit"]
    if ind.concept == EMPLOYEE:
        row = alive(content, content.assign_by_employee.get(ind.id))
        if row is not None:
            pos = alive(content, row.values.get("position"))
            if pos is not None:
                return pos.values.get("unit")
        return v.get("dept")
    if v.get("position") is not None:
        pos = alive(content, v["position"])
        if pos is not None:
            return pos.values.get("unit")
    if v.get("employee") is not None:
        emp = alive(content, v["employee"])
        if emp is not None:
            return owning_unit(content, emp, _depth + 1)
    return None


def owning_unit_of_values(content: Content, concept: str, values: Mapping[str, Any]) -> Optional[int]:
    draft = Individual(id=-1, concept=concept, created_at=0, retired_at=None, values=values)
    return owning_unit(content, draft)


def owner_employee(content: Content, ind: Individual) -> Optional[int]:
    if ind.concept == EMPLOYEE:
        return ind.id
    emp = ind.values.get("employee")
    return emp if isinstance(emp, int) else None


# --------------------------------------------------------------------------
# Profile derivation
# --------------------------------------------------------------------------


def resolve_user(store: Any, credential: str, state: int) -> Optional[int]:
    content = store.content_at(state)
    by_name = None
    for ident in content.members.get(EMPLOYEE, ()):
        emp = alive(content, ident)
        if emp is None:
            continue
        if emp.values.get("login") == credential:
            return ident
        if by_name is None and emp.values.get("name") == credential:
            by_name = ident
    return by_name


def scenario_for_title(content: Content, title: str) -> str:
    for ident in content.members.get(SCENARIO_MAPPING, ()):
        row = alive(content, ident)
        if row is not None and row.values.get("title") == title:
            scenario = row.values.get("scenario")
            if scenario in SCENARIOS:
                return scenario
    return "employee"


def _overrides_snapshot(content: Content) -> tuple:
    out = []
    for ident in sorted(content.members.get(MANDATORY_OVERRIDE, ())):
        row = alive(content, ident)
        if row is None:
            continue
        attrs = tuple(
            a.strip() for a in (row.values.get("required_attrs") or "").split(",") if a.strip()
        )
        out.append((row.values.get("concept"), row.values.get("condition"), attrs))
    return tuple(out)


def derive_profile(store: Any, user_id: int, state: int) -> AccessProfile:
    content = store.content_at(state)
    emp = alive(content, user_id)
    if emp is None or emp.concept != EMPLOYEE:
        raise NoAssignment(f"user {user_id} is not an active employee")
    row = alive(content, content.assign_by_employee.get(user_id))
    if row is None:
        raise NoAssignment(f"user {user_id} has no active assignment")
    pos = alive(content, row.values.get("position"))
    unit_id = pos.values.get("unit") if pos else None
    title = (pos.values.get("title") if pos else "") or ""
    scenario = scenario_for_title(content, title)
    overrides = _overrides_snapshot(content)

    if scenario in ADMIN_SCENARIOS:
        return AccessProfile(
            scenario=scenario,
            visible_units=None,
            grants=frozenset({("*", "*")}),
            metadata_admin=True,
            mandatory_overrides=overrides,
        )

    visible = unit_subtree(content, unit_id) if unit_id is not None else frozenset()
    if scenario == "unit_manager":
        return AccessProfile(
            scenario=scenario,
            visible_units=visible,
            grants=frozenset({("*", "read")}),
            metadata_admin=False,
            mandatory_overrides=overrides,
        )
    if scenario == "hr_officer":
        grants: set[tuple[str, str]] = set()
        for name, concept in content.concepts.items():
            if concept.origin_pack in HR_PACKS:
                grants.add((name, "read"))
                grants.add((name, "write"))
            elif concept.origin_pack == ORG_PACK:
                grants.add((name, "read"))
        for name in content.metas:
            grants.add((name, "read"))
        return AccessProfile(
            scenario=scenario,
            visible_units=visible,
            grants=frozenset(grants),
            metadata_admin=False,
            mandatory_overrides=overrides,
        )
    # plain employee: own records only, plus own leave requests
    own_unit = frozenset({unit_id}) if unit_id is not None else frozenset()
    return AccessProfile(
        scenario="employee",
        visible_units=own_unit,
        grants=frozenset({(LEAVE_REQUEST, "write")}),
        metadata_admin=False,
        mandatory_overrides=overrides,
    )


# --------------------------------------------------------------------------
# Access checks
# --------------------------------------------------------------------------


def _is_metadata_concept(content: Content, name: str) -> bool:
    concept = content.concepts.get(name)
    return bool(concept and concept.builtin)


def _read_individual(
    content: Content, profile: AccessProfile, user: Optional[int], ind: Individual
) -> Decision:
    if profile.scenario == "employee":
        if owner_employee(content, ind) == user and user is not None:
            return ALLOW
        return deny("employees read only their own records")
    if not profile.has_grant(ind.concept, "read"):
        return deny(f"no read grant on {ind.concept}")
    unit = owning_unit(content, ind)
    if not profile.sees_unit(unit):
        return deny("object outside visible units")
    return ALLOW


def check_access(
    store: Any, session: Session, action: str, target: Any, state: int
) -> Decision:
    """Non-raising decision for (action, target); target is an individual id,
    a concept/meta name, or an ("event", kind) pair."""
    profile = session.profile
    content = store.content_at(state)

    if isinstance(target, tuple) and target and target[0] == "event":
        kind = target[1]
        try:
            check_event(store, session, kind, {}, state, _shallow=True)
            return ALLOW
        except AccessDenied as exc:
            return deny(exc.message)

    if isinstance(target, tuple) and target and target[0] in ("concept", "meta", "individual"):
        target = target[1]

    if isinstance(target, int):
        ind = content.individuals.get(target)
        if ind is not None and ind.retired_at is None:
            if action == "read":
                if _is_metadata_concept(content, ind.concept):
                    if not (profile.metadata_admin or profile.has_grant(ind.concept, "read")):
                        return deny("metadata read not granted")
                    return ALLOW
                return _read_individual(content, profile, session.user, ind)
            if action in ("write", "define"):
                if _is_metadata_concept(content, ind.concept):
                    return ALLOW if profile.metadata_admin else deny("metadata_admin required")
                if profile.scenario == "employee":
                    return deny("employees submit leave requests only")
                if not profile.has_grant(ind.concept, "write"):
                    return deny(f"no write grant on {ind.concept}")
                if not profile.sees_unit(owning_unit(content, ind)):
                    return deny("object outside visible units")
                return ALLOW
            return deny(f"unknown action {action!r}")
        name = content.meta_ids.get(target) or content.concept_ids.get(target)
        if name is None:
            return deny(f"unknown object {target}")
        target = name

    if isinstance(target, str):
        is_meta = target in content.metas or target in ("MetaObject", "Concept")
        is_concept = target in content.concepts
        if not (is_meta or is_concept):
            return deny(f"unknown target {target!r}")
        if action == "read":
            if profile.scenario == "employee":
                return deny("employees read only their own records")
            if profile.has_grant(target, "read"):
                return ALLOW
            return deny(f"no read grant on {target}")
        if action in ("write", "define"):
            if is_meta or _is_metadata_concept(content, target):
                return ALLOW if profile.metadata_admin else deny("metadata_admin required")
            if action == "define":
                return ALLOW if profile.metadata_admin else deny("metadata_admin required")
            if profile.scenario == "employee":
                return deny("employees submit leave requests only")
            if profile.has_grant(target, "write"):
                return ALLOW
            return deny(f"no write grant on {target}")
        return deny(f"unknown action {action!r}")

    return deny(f"unrecognized target {target!r}")


def check_event(
    store: Any,
    session: Session,
    kind: str,
    payload: Mapping[str, Any],
    state: int,
    _shallow: bool = False,
) -> None:
    """Raise AccessDenied unless the session may submit this event."""
    profile = session.profile
    content = store.content_at(state)

    if kind in METADATA_KINDS:
        if not profile.metadata_admin:
            raise AccessDenied(f"{kind} requires metadata administration rights")
        return

    if kind in LIFECYCLE_KINDS:
        if profile.scenario in ADMIN_SCENARIOS:
            return
        if profile.scenario != "unit_manager":
            raise AccessDenied(f"{kind} requires a managerial profile")
        if _shallow:
            return
        units: list[Optional[int]] = []
        emp = alive(content, payload.get("employee")) if payload.get("employee") else None
        if emp is not None:
            units.append(owning_unit(content, emp))
        pos = alive(content, payload.get("position")) if payload.get("position") else None
        if pos is not None:
            units.append(pos.values.get("unit"))
        for unit in units:
            if unit is not None and not profile.sees_unit(unit):
                raise AccessDenied(f"{kind} target outside visible units")
        return

    if kind == "create":
        concept = payload.get("concept") if not _shallow else None
        if _shallow:
            if profile.scenario == "employee":
                return  # may create own leave requests
            return
        if concept is not None and _is_metadata_concept(content, concept):
            if not profile.metadata_admin:
                raise AccessDenied("metadata objects require metadata_admin")
            return
        values = payload.get("values") or {}
        if profile.scenario == "employee":
            if concept != LEAVE_REQUEST:
                raise AccessDenied("employees submit leave requests only")
            if values.get("employee") != session.user:
                raise AccessDenied("leave requests must name the requesting employee")
            return
        if not profile.has_grant(concept, "write"):
            raise AccessDenied(f"no write grant on {concept}")
        unit = owning_unit_of_values(content, concept, values)
        if not profile.sees_unit(unit):
            raise AccessDenied("target outside visible units")
        return

    if kind in ("set_attr", "retire"):
        if _shallow:
            if profile.scenario == "employee":
                raise AccessDenied("employees submit leave requests only")
            return
        ind = alive(content, payload.get("individual"))
        if ind is None:
            return  # submit's validation reports the missing individual
        if _is_metadata_concept(content, ind.concept):
            if not profile.metadata_admin:
                raise AccessDenied("metadata objects require metadata_admin")
            return
        if profile.scenario == "employee":
            raise AccessDenied("employees submit leave requests only")
        if not profile.has_grant(ind.concept, "write"):
            raise AccessDenied(f"no write grant on {ind.concept}")
        if not profile.sees_unit(owning_unit(content, ind)):
            raise AccessDenied("target outside visible units")
        return

    # unknown kinds fall through; submit validates them
    return


# --------------------------------------------------------------------------
# Mandatory fields
# --------------------------------------------------------------------------

_condition_cache: dict[str, CompiledFormula] = {}


def _compiled_condition(text: str) -> CompiledFormula:
    got = _condition_cache.get(text)
    if got is None:
        got = CompiledFormula(parse(text))
        _condition_cache[text] = got
    return got


def draft_view(content: Content, concept: str, draft: Mapping[str, Any]) -> SubjectView:
    spec_owner = content.concepts[concept]
    values = {}
    for k, v in draft.items():
        spec = spec_owner.attr(k)
        if spec is None or v is None:
            continue
        try:
            values[k] = coerce_value(spec, v)
        except Exception:
            values[k] = v
    return SubjectView(None, concept, values)


def compute_mandatory(
    store: Any, concept: str, state: int, draft: Mapping[str, Any]
) -> frozenset[str]:
    content = store.content_at(state)
    spec_owner = content.concepts.get(concept)
    if spec_owner is None:
        raise UnknownConcept(f"concept {concept!r} not defined at state {state}")
    names = {a.name for a in spec_owner.attributes}
    required = {a.name for a in spec_owner.attributes if a.required_by_default}
    view = draft_view(content, concept, draft)
    for ident in content.members.get(MANDATORY_OVERRIDE, ()):
        row = alive(content, ident)
        if row is None or row.values.get("concept") != concept:
            continue
        condition = row.values.get("condition")
        if not condition:
            continue
        try:
            check_formula(parse(condition), concept, store, state)
            hit = _compiled_condition(condition).run(store, state, view)
        except Exception:
            continue  # stale override; treated as not applicable
        if hit:
            extra = (row.values.get("required_attrs") or "").split(",")
            required.update(a.strip() for a in extra if a.strip() in names)
    return frozenset(required)


# --------------------------------------------------------------------------
# Test/diagnostic helpers
# --------------------------------------------------------------------------


def readable_individuals(store: Any, session: Session, state: int) -> frozenset[int]:
    content = store.content_at(state)
    out = set()
    for ident, ind in content.individuals.items():
        if ind.retired_at is not None:
            continue
        if check_access(store, session, "read", ident, state).allow:
            out.add(ident)
    return frozenset(out)
