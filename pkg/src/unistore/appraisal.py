"""Multi-parameter appraisal scoring over the org hierarchy.

A unit's local score blends skill coverage of its filled positions with its
staffing level; hierarchy scores blend the local score with the mean of the
children's scores:

    vacancy_rate(u) = v / (v + e)                 (0 when the unit is empty)
    coverage(u)     = mean match of filled positions   (1 when none filled)
    L(u)            = w_s * coverage + w_p * (1 - vacancy_rate)
    F(u)            = L(u)                              no children
                    = mean_c F(c)                       children, no positions
                    = w_local * L(u) + w_child * mean_c F(c)   otherwise

match(employee, position) is the fraction of the position's required working
functions the employee possesses (1 when nothing is required).  All scores
live in [0, 1].  Everything here is a pure read of one state, optionally
overlaid with hypothetical moves, so what-if exploration never writes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping, Optional, Sequence

from .errors import InvalidParams, NoAssignment, NotVacant, UnknownId, Validation
from .model import (
    APPRAISAL_PARAMS,
    ASSIGNMENT,
    EMPLOYEE,
    EMPLOYEE_FUNCTION,
    ORG_UNIT,
    POSITION,
    POSITION_FUNCTION,
    Content,
    Individual,
)

_EPS = 1e-9


@dataclass(frozen=True)
class AppraisalParams:
    w_s: float = 0.5
    w_p: float = 0.5
    w_local: float = 0.5
    w_child: float = 0.5

    def validate(self) -> "AppraisalParams":
        for name in ("w_s", "w_p", "w_local", "w_child"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not (0.0 <= v <= 1.0):
                raise InvalidParams(f"{name} must be in [0, 1], got {v!r}")
        if abs(self.w_s + self.w_p - 1.0) > _EPS:
            raise InvalidParams("w_s + w_p must equal 1")
        if abs(self.w_local + self.w_child - 1.0) > _EPS:
            raise InvalidParams("w_local + w_child must equal 1")
        return self

    @staticmethod
    def from_mapping(m: Mapping[str, Any]) -> "AppraisalParams":
        base = AppraisalParams()
        return AppraisalParams(
            w_s=float(m.get("w_s", base.w_s)),
            w_p=float(m.get("w_p", base.w_p)),
            w_local=float(m.get("w_local", base.w_local)),
            w_child=float(m.get("w_child", base.w_child)),
        ).validate()


@dataclass(frozen=True)
class UnitStats:
    unit: int
    v: int
    e: int
    state: int


@dataclass(frozen=True)
class Score:
    value: float
    breakdown: dict


@dataclass
class UnitNode:
    unit: int
    fills: list[float] = field(default_factory=list)
    vacancies: int = 0
    children: list["UnitNode"] = field(default_factory=list)


def unit_score(node: UnitNode, params: AppraisalParams) -> Score:
    e = len(node.fills)
    v = node.vacancies
    vacancy_rate = v / (v + e) if (v + e) else 0.0
    coverage = sum(node.fills) / e if e else 1.0
    local = params.w_s * coverage + params.w_p * (1.0 - vacancy_rate)
    child_scores = [unit_score(c, params) for c in node.children]
    child_mean = (
        sum(s.value for s in child_scores) / len(child_scores) if child_scores else None
    )
    if not node.children:
        value = local
    elif (v + e) == 0:
        value = child_mean
    else:
        value = params.w_local * local + params.w_child * child_mean
    return Score(
        value=value,
        breakdown={
            "unit": node.unit,
            "v": v,
            "e": e,
            "coverage": coverage,
            "staffing": 1.0 - vacancy_rate,
            "local": local,
            "child_mean": child_mean,
        },
    )


# --------------------------------------------------------------------------
# Store adapters
# --------------------------------------------------------------------------


def _alive(content: Content, ident: Optional[int]) -> Optional[Individual]:
    if ident is None:
        return None
    ind = content.individuals.get(ident)
    return ind if ind is not None and ind.retired_at is None else None


def _tag_sets(content: Content, link_concept: str, key: str) -> dict[int, set[str]]:
    out: dict[int, set[str]] = {}
    for ident in content.members.get(link_concept, ()):
        row = _alive(content, ident)
        if row is None:
            continue
        owner = row.values.get(key)
        tag = row.values.get("tag")
        if owner is not None and tag:
            out.setdefault(owner, set()).add(tag)
    return out


def employee_functions(content: Content) -> dict[int, set[str]]:
    return _tag_sets(content, EMPLOYEE_FUNCTION, "employee")


def position_functions(content: Content) -> dict[int, set[str]]:
    return _tag_sets(content, POSITION_FUNCTION, "position")


def _match(required: set[str], possessed: set[str]) -> float:
    if not required:
        return 1.0
    return len(required & possessed) / len(required)


def match_score(store: Any, employee: int, position: int, state: Optional[int] = None) -> float:
    state = store.head if state is None else state
    content = store.content_at(state)
    emp = _alive(content, employee)
    if emp is None or emp.concept != EMPLOYEE:
        raise UnknownId(f"no employee {employee} at state {state}")
    pos = _alive(content, position)
    if pos is None or pos.concept != POSITION:
        raise UnknownId(f"no position {position} at state {state}")
    required = position_functions(content).get(position, set())
    possessed = employee_functions(content).get(employee, set())
    return _match(required, possessed)


def _holder_map(content: Content, moves: Optional[Sequence[tuple[int, int]]]) -> dict[int, int]:
    """position id -> employee id, after applying hypothetical moves."""
    holders: dict[int, int] = {}
    for pos_id, row_id in content.assign_by_position.items():
        row = _alive(content, row_id)
        if row is not None:
            emp = row.values.get("employee")
            if emp is not None:
                holders[pos_id] = emp
    for emp, pos in moves or ():
        if _alive(content, emp) is None:
            raise UnknownId(f"moved employee {emp} not alive")
        if _alive(content, pos) is None:
            raise UnknownId(f"move target position {pos} not alive")
        held = holders.get(pos)
        if held is not None and held != emp:
            raise Validation(f"move target position {pos} is already held")
        for p, h in list(holders.items()):
            if h == emp:
                del holders[p]
        holders[pos] = emp
    return holders


def build_unit_nodes(
    store: Any, state: int, params: AppraisalParams,
    moves: Optional[Sequence[tuple[int, int]]] = None,
) -> dict[int, UnitNode]:
    content = store.content_at(state)
    nodes: dict[int, UnitNode] = {}
    for uid in content.members.get(ORG_UNIT, ()):
        if _alive(content, uid) is not None:
            nodes[uid] = UnitNode(unit=uid)
    for uid, node in nodes.items():
        parent = content.individuals[uid].values.get("parent")
        if parent in nodes:
            nodes[parent].children.append(node)
    for n in nodes.values():
        n.children.sort(key=lambda c: c.unit)
    holders = _holder_map(content, moves)
    req = position_functions(content)
    poss = employee_functions(content)
    for pid in content.members.get(POSITION, ()):
        pos = _alive(content, pid)
        if pos is None:
            continue
        unit = pos.values.get("unit")
        node = nodes.get(unit)
        if node is None:
            continue
        emp = holders.get(pid)
        if emp is None:
            node.vacancies += 1
        else:
            node.fills.append(_match(req.get(pid, set()), poss.get(emp, set())))
    return nodes


def unit_stats(store: Any, unit: int, state: Optional[int] = None) -> UnitStats:
    state = store.head if state is None else state
    nodes = build_unit_nodes(store, state, AppraisalParams())
    node = nodes.get(unit)
    if node is None:
        raise UnknownId(f"no org unit {unit} at state {state}")
    return UnitStats(unit=unit, v=node.vacancies, e=len(node.fills), state=state)


def stored_params(store: Any, state: Optional[int] = None) -> AppraisalParams:
    state = store.head if state is None else state
    content = store.content_at(state)
    for ident in sorted(content.members.get(APPRAISAL_PARAMS, ())):
        row = _alive(content, ident)
        if row is not None:
            try:
                return AppraisalParams.from_mapping(row.values)
            except InvalidParams:
                continue
    return AppraisalParams()


def appraise_unit(
    store: Any,
    unit: int,
    params: Optional[AppraisalParams] = None,
    state: Optional[int] = None,
    moves: Optional[Sequence[tuple[int, int]]] = None,
) -> Score:
    state = store.head if state is None else state
    params = (params or stored_params(store, state)).validate()
    nodes = build_unit_nodes(store, state, params, moves)
    node = nodes.get(unit)
    if node is None:
        raise UnknownId(f"no org unit {unit} at state {state}")
    return unit_score(node, params)


def appraise_employee(
    store: Any,
    employee: int,
    params: Optional[AppraisalParams] = None,
    state: Optional[int] = None,
) -> Score:
    state = store.head if state is None else state
    params = (params or stored_params(store, state)).validate()
    content = store.content_at(state)
    emp = _alive(content, employee)
    if emp is None or emp.concept != EMPLOYEE:
        raise UnknownId(f"no employee {employee} at state {state}")
    row = _alive(content, content.assign_by_employee.get(employee))
    if row is None:
        raise NoAssignment(f"employee {employee} has no active assignment")
    position = row.values.get("position")
    pos = _alive(content, position)
    unit = pos.values.get("unit") if pos else None
    m = match_score(store, employee, position, state)
    unit_f = appraise_unit(store, unit, params, state) if unit is not None else Score(1.0, {})
    value = params.w_s * m + params.w_p * unit_f.value
    return Score(
        value=value,
        breakdown={
            "employee": employee,
            "position": position,
            "match": m,
            "unit": unit,
            "unit_score": unit_f.value,
        },
    )


def rank_candidates(
    store: Any,
    vacancy: int,
    params: Optional[AppraisalParams] = None,
    state: Optional[int] = None,
) -> list[dict]:
    state = store.head if state is None else state
    (params or AppraisalParams()).validate()
    content = store.content_at(state)
    pos = _alive(content, vacancy)
    if pos is None or pos.concept != POSITION:
        raise UnknownId(f"no position {vacancy} at state {state}")
    if content.assign_by_position.get(vacancy) is not None:
        raise NotVacant(f"position {vacancy} is held")
    required = position_functions(content).get(vacancy, set())
    poss = employee_functions(content)
    ranked = []
    for ident in content.members.get(EMPLOYEE, ()):
        emp = _alive(content, ident)
        if emp is None:
            continue
        row = _alive(content, content.assign_by_employee.get(ident))
        current = row.values.get("position") if row is not None else None
        ranked.append(
            {
                "employee": ident,
                "name": emp.values.get("name"),
                "match": _match(required, poss.get(ident, set())),
                "current_position": current,
            }
        )
    ranked.sort(key=lambda r: (-r["match"], r["employee"]))
    return ranked
