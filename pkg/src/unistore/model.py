"""Statics of the object store: concepts, individuals, metadata records and
the in-memory content that one state index denotes.

A `Content` is the complete store picture at a single state: concept schemas,
individuals with their attribute values, comprehension-defined meta-objects,
registered rules and the audit trail.  Records inside a content are immutable
and replaced wholesale on change, so contents can share them freely; only the
outer containers are copied when a content is snapshotted.
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import json
import re
from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Mapping, Optional

from .errors import InvalidAttribute, TypeMismatch, Validation

VALUE_TYPES = ("text", "integer", "decimal", "boolean", "date", "reference")

# Virtual registry concepts: their extents are derived from the content's
# concept/meta tables instead of stored individuals.
CONCEPT_REGISTRY = "Concept"
META_REGISTRY = "MetaObject"

# Stored built-in concepts, present from state 0.
MANDATORY_OVERRIDE = "MandatoryOverride"
APPRAISAL_PARAMS = "AppraisalParams"

# Concept names the engine's personnel lifecycle events and access scoping
# are keyed on; delivered by the shipped packs.
ORG_UNIT = "OrgUnit"
POSITION = "Position"
EMPLOYEE = "Employee"
ASSIGNMENT = "Assignment"
EMPLOYEE_FUNCTION = "EmployeeFunction"
POSITION_FUNCTION = "PositionFunction"
WORKING_FUNCTION = "WorkingFunction"
SCENARIO_MAPPING = "ScenarioMapping"
LEAVE_REQUEST = "LeaveRequest"

# Shipped component packs: the base org-structure pack plus the eight
# personnel components.
ORG_PACK = "Org Structure"
HR_PACKS = (
    "Personal Data",
    "Personnel Dynamics",
    "Charges and Deductions",
    "Appraisal and Testing",
    "Vacancies",
    "Leaves and Sick-Lists",
    "Training and Skills Improvement",
    "Equipment Fixing",
)

_REF_RE = re.compile(r"^reference\(([A-Za-z_][A-Za-z0-9_]*)\)$")


@dataclass(frozen=True)
class AttributeSpec:
    name: str
    value_type: str
    required_by_default: bool = False
    ref_target: Optional[str] = None

    def type_label(self) -> str:
        if self.value_type == "reference":
            return f"reference({self.ref_target})"
        return self.value_type


def parse_type_label(label: str) -> tuple[str, Optional[str]]:
    """Split a manifest type label into (value_type, ref_target)."""
    m = _REF_RE.match(label)
    if m:
        return "reference", m.group(1)
    if label not in VALUE_TYPES or label == "reference":
        raise InvalidAttribute(f"unknown value type {label!r}")
    return label, None


@dataclass(frozen=True)
class Concept:
    id: int
    name: str
    attributes: tuple[AttributeSpec, ...]
    defined_at: int
    origin_pack: Optional[str] = None
    builtin: bool = False
    level: int = 1

    def attr(self, name: str) -> Optional[AttributeSpec]:
        for a in self.attributes:
            if a.name == name:
                return a
        return None

    def extended(self, extra: Iterable[AttributeSpec]) -> "Concept":
        return replace(self, attributes=self.attributes + tuple(extra))


@dataclass(frozen=True)
class Individual:
    id: int
    concept: str
    created_at: int
    retired_at: Optional[int]
    values: Mapping[str, Any]

    @property
    def alive(self) -> bool:
        return self.retired_at is None


@dataclass(frozen=True)
class MetaRecord:
    id: int
    name: str
    level: int
    domain: str
    formula_text: str
    defined_at: int


@dataclass(frozen=True)
class RuleAction:
    kind: str  # reject | set_attr | create | audit
    message: Optional[str] = None
    attr: Optional[str] = None
    value: Any = None
    concept: Optional[str] = None
    values: tuple[tuple[str, Any], ...] = ()

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"action": self.kind}
        if self.kind in ("reject", "audit"):
            d["message"] = self.message
        elif self.kind == "set_attr":
            d["attr"] = self.attr
            d["value"] = self.value
        elif self.kind == "create":
            d["concept"] = self.concept
            d["values"] = dict(self.values)
        return d

    @staticmethod
    def from_dict(d: dict) -> "RuleAction":
        kind = d.get("action")
        if kind in ("reject", "audit"):
            return RuleAction(kind=kind, message=d.get("message", ""))
        if kind == "set_attr":
            return RuleAction(kind=kind, attr=d["attr"], value=d.get("value"))
        if kind == "create":
            return RuleAction(
                kind=kind,
                concept=d["concept"],
                values=tuple(sorted(d.get("values", {}).items())),
            )
        raise Validation(f"unknown rule action {kind!r}")


@dataclass(frozen=True)
class RuleRecord:
    id: int
    trigger_kind: str
    concept: Optional[str]
    guard_text: Optional[str]
    actions: tuple[RuleAction, ...]
    registered_at: int
    origin_pack: Optional[str] = None


@dataclass(frozen=True)
class DataObject:
    concept: str
    individual: int
    state: int
    values: dict


@dataclass(frozen=True)
class StoreSnapshot:
    state: int
    content_hash: str


@dataclass(frozen=True)
class PowerSort:
    """Bracket-typed view of a domain: depth = member level + 1."""

    base: str
    bracket_depth: int


_BUILTIN_SCHEMAS: dict[str, tuple[AttributeSpec, ...]] = {
    CONCEPT_REGISTRY: (
        AttributeSpec("name", "text"),
        AttributeSpec("level", "integer"),
        AttributeSpec("defined_at", "integer"),
    ),
    META_REGISTRY: (
        AttributeSpec("name", "text"),
        AttributeSpec("level", "integer"),
        AttributeSpec("formula", "text"),
        AttributeSpec("domain", "text"),
        AttributeSpec("defined_at", "integer"),
    ),
}


def builtin_registry_schema(name: str) -> Optional[tuple[AttributeSpec, ...]]:
    return _BUILTIN_SCHEMAS.get(name)


def _stored_builtins() -> dict[str, Concept]:
    return {
        MANDATORY_OVERRIDE: Concept(
            id=1,
            name=MANDATORY_OVERRIDE,
            attributes=(
                AttributeSpec("concept", "text", required_by_default=True),
                AttributeSpec("condition", "text", required_by_default=True),
                AttributeSpec("required_attrs", "text", required_by_default=True),
            ),
            defined_at=0,
            builtin=True,
        ),
        APPRAISAL_PARAMS: Concept(
            id=2,
            name=APPRAISAL_PARAMS,
            attributes=(
                AttributeSpec("w_s", "decimal"),
                AttributeSpec("w_p", "decimal"),
                AttributeSpec("w_local", "decimal"),
                AttributeSpec("w_child", "decimal"),
            ),
            defined_at=0,
            builtin=True,
        ),
    }


FIRST_FREE_ID = 3  # ids 1..2 are the stored built-in concepts


class Content:
    """Complete store picture at one state.

    Outer containers (dicts, sets, lists) are owned by this content and may be
    mutated in place while folding events; the records they hold never are.
    `copy()` duplicates every outer container so a frozen snapshot and the
    live content can diverge safely.
    """

    __slots__ = (
        "concepts",
        "concept_ids",
        "members",
        "individuals",
        "metas",
        "meta_ids",
        "rules",
        "audit",
        "assign_by_employee",
        "assign_by_position",
    )

    def __init__(self) -> None:
        self.concepts: dict[str, Concept] = dict(_stored_builtins())
        self.concept_ids: dict[int, str] = {c.id: n for n, c in self.concepts.items()}
        self.members: dict[str, set[int]] = {n: set() for n in self.concepts}
        self.individuals: dict[int, Individual] = {}
        self.metas: dict[str, MetaRecord] = {}
        self.meta_ids: dict[int, str] = {}
        self.rules: list[RuleRecord] = []
        self.audit: list[tuple[int, str]] = []
        # Derived indexes over alive Assignment rows (employee id -> row id,
        # position id -> row id); rebuilt from individuals, not serialized.
        self.assign_by_employee: dict[int, int] = {}
        self.assign_by_position: dict[int, int] = {}

    def copy(self) -> "Content":
        c = Content.__new__(Content)
        c.concepts = dict(self.concepts)
        c.concept_ids = dict(self.concept_ids)
        c.members = {k: set(v) for k, v in self.members.items()}
        c.individuals = dict(self.individuals)
        c.metas = dict(self.metas)
        c.meta_ids = dict(self.meta_ids)
        c.rules = list(self.rules)
        c.audit = list(self.audit)
        c.assign_by_employee = dict(self.assign_by_employee)
        c.assign_by_position = dict(self.assign_by_position)
        return c

    def rebuild_assignment_index(self) -> None:
        self.assign_by_employee = {}
        self.assign_by_position = {}
        for ind_id in self.members.get(ASSIGNMENT, ()):
            row = self.individuals[ind_id]
            if row.retired_at is None:
                emp = row.values.get("employee")
                pos = row.values.get("position")
                if emp is not None:
                    self.assign_by_employee[emp] = ind_id
                if pos is not None:
                    self.assign_by_position[pos] = ind_id

    # -- name resolution -------------------------------------------------

    def name_in_use(self, name: str) -> bool:
        return (
            name in self.concepts
            or name in self.metas
            or name in (CONCEPT_REGISTRY, META_REGISTRY)
        )

    def schema_of(self, domain: str) -> Optional[tuple[AttributeSpec, ...]]:
        """Attribute specs visible on members of `domain` (concept, registry
        or meta rooted at one of those)."""
        builtin = builtin_registry_schema(domain)
        if builtin is not None:
            return builtin
        if domain in self.concepts:
            return self.concepts[domain].attributes
        seen = set()
        d = domain
        while d in self.metas and d not in seen:
            seen.add(d)
            d = self.metas[d].domain
        if d in self.concepts:
            return self.concepts[d].attributes
        return builtin_registry_schema(d)


def encode_value(value: Any) -> Any:
    """JSON-portable encoding for an attribute value."""
    if isinstance(value, _dt.date):
        return value.isoformat()
    return value


def encode_values(values: Mapping[str, Any]) -> dict:
    return {k: encode_value(v) for k, v in sorted(values.items())}


def coerce_value(spec: AttributeSpec, raw: Any) -> Any:
    """Validate and coerce a raw (JSON-shaped) value against its spec.

    Reference liveness is checked by the store, not here.
    """
    t = spec.value_type
    if raw is None:
        return None
    if t == "text":
        if not isinstance(raw, str):
            raise TypeMismatch(f"{spec.name}: expected text, got {type(raw).__name__}")
        return raw
    if t == "integer":
        if isinstance(raw, bool) or not isinstance(raw, int):
            raise TypeMismatch(f"{spec.name}: expected integer, got {raw!r}")
        return raw
    if t == "decimal":
        if isinstance(raw, bool) or not isinstance(raw, (int, float)):
            raise TypeMismatch(f"{spec.name}: expected decimal, got {raw!r}")
        return float(raw)
    if t == "boolean":
        if not isinstance(raw, bool):
            raise TypeMismatch(f"{spec.name}: expected boolean, got {raw!r}")
        return raw
    if t == "date":
        if isinstance(raw, _dt.date):
            return raw
        if isinstance(raw, str):
            try:
                return _dt.date.fromisoformat(raw)
            except ValueError:
                raise TypeMismatch(f"{spec.name}: bad date {raw!r}") from None
        raise TypeMismatch(f"{spec.name}: expected date, got {raw!r}")
    if t == "reference":
        if isinstance(raw, bool) or not isinstance(raw, int):
            raise TypeMismatch(f"{spec.name}: expected reference id, got {raw!r}")
        return raw
    raise InvalidAttribute(f"unknown value type {t!r}")


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def content_dict(content: Content) -> dict:
    """Canonical serializable form of a content; basis of the content hash
    and of the snapshot sidecar."""
    return {
        "concepts": [
            {
                "id": c.id,
                "name": c.name,
                "attributes": [
                    {
                        "name": a.name,
                        "type": a.type_label(),
                        "required": a.required_by_default,
                    }
                    for a in c.attributes
                ],
                "defined_at": c.defined_at,
                "origin_pack": c.origin_pack,
                "builtin": c.builtin,
            }
            for _, c in sorted(content.concepts.items())
        ],
        "metas": [
            {
                "id": m.id,
                "name": m.name,
                "level": m.level,
                "domain": m.domain,
                "formula": m.formula_text,
                "defined_at": m.defined_at,
            }
            for _, m in sorted(content.metas.items())
        ],
        "individuals": [
            {
                "id": h.id,
                "concept": h.concept,
                "created_at": h.created_at,
                "retired_at": h.retired_at,
                "values": encode_values(h.values),
            }
            for _, h in sorted(content.individuals.items())
        ],
        "rules": [
            {
                "id": r.id,
                "trigger": r.trigger_kind,
                "concept": r.concept,
                "guard": r.guard_text,
                "actions": [a.to_dict() for a in r.actions],
                "registered_at": r.registered_at,
                "origin_pack": r.origin_pack,
            }
            for r in content.rules
        ],
        "audit": [list(entry) for entry in content.audit],
    }


def content_hash(content: Content) -> str:
    return hashlib.sha256(canonical_json(content_dict(content)).encode()).hexdigest()


def content_from_dict(d: dict) -> Content:
    """Rebuild a content from its serialized form (snapshot sidecar)."""
    c = Content()
    c.concepts = {}
    c.concept_ids = {}
    c.members = {}
    for cd in d["concepts"]:
        attrs = []
        for ad in cd["attributes"]:
            vt, target = parse_type_label(ad["type"])
            attrs.append(AttributeSpec(ad["name"], vt, ad["required"], target))
        rec = Concept(
            id=cd["id"],
            name=cd["name"],
            attributes=tuple(attrs),
            defined_at=cd["defined_at"],
            origin_pack=cd.get("origin_pack"),
            builtin=cd.get("builtin", False),
        )
        c.concepts[rec.name] = rec
        c.concept_ids[rec.id] = rec.name
        c.members[rec.name] = set()
    for md in d["metas"]:
        rec_m = MetaRecord(
            id=md["id"],
            name=md["name"],
            level=md["level"],
            domain=md["domain"],
            formula_text=md["formula"],
            defined_at=md["defined_at"],
        )
        c.metas[rec_m.name] = rec_m
        c.meta_ids[rec_m.id] = rec_m.name
    for hd in d["individuals"]:
        concept = c.concepts[hd["concept"]]
        values = {}
        for k, raw in hd["values"].items():
            spec = concept.attr(k)
            values[k] = coerce_value(spec, raw) if spec else raw
        ind = Individual(
            id=hd["id"],
            concept=hd["concept"],
            created_at=hd["created_at"],
            retired_at=hd.get("retired_at"),
            values=values,
        )
        c.individuals[ind.id] = ind
        c.members[ind.concept].add(ind.id)
    for rd in d["rules"]:
        c.rules.append(
            RuleRecord(
                id=rd["id"],
                trigger_kind=rd["trigger"],
                concept=rd.get("concept"),
                guard_text=rd.get("guard"),
                actions=tuple(RuleAction.from_dict(a) for a in rd["actions"]),
                registered_at=rd["registered_at"],
                origin_pack=rd.get("origin_pack"),
            )
        )
    c.audit = [tuple(e) for e in d.get("audit", [])]
    c.rebuild_assignment_index()
    return c
