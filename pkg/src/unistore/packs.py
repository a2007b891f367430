"""Component packs: loadable manifests of concepts, metas, rules, mandatory
overrides and seed rows, plus the merge algorithm that integrates a pack into
a running store.

A merge plan is computed against one head state.  Name-matched concepts with
attribute type agreement become extensions (new attributes arrive optional so
existing snapshots stay valid); disagreements become conflicts, and a plan
with conflicts is never applicable.  New concepts are ordered so that
everything reachable to the org structure through reference attributes is
defined first.  Applying an identical pack twice yields an empty plan.
"""

from __future__ import annotations

import json
import os
import random
import re
from dataclasses import dataclass, field
from typing import Any, Mapping, Optional

from .errors import (
    AccessDenied,
    ConflictsPresent,
    MalformedPack,
    PacksMissing,
    StaleStore,
)
from .formula import parse as parse_formula
from .model import (
    ASSIGNMENT,
    EMPLOYEE,
    HR_PACKS,
    ORG_PACK,
    ORG_UNIT,
    POSITION,
    POSITION_FUNCTION,
    SCENARIO_MAPPING,
    WORKING_FUNCTION,
    Content,
    encode_value,
    parse_type_label,
)

ALL_PACKS = (ORG_PACK,) + HR_PACKS


def pack_filename(name: str) -> str:
    return re.sub(r"[^a-z0-9]+", "_", name.lower()).strip("_") + ".json"


@dataclass(frozen=True)
class ConceptDraft:
    name: str
    attributes: tuple[dict, ...]  # {name, type, required}


@dataclass(frozen=True)
class ComponentPack:
    name: str
    version: str
    depends: tuple[str, ...]
    concepts: tuple[ConceptDraft, ...]
    metas: tuple[dict, ...]
    rules: tuple[dict, ...]
    mandatory_overrides: tuple[dict, ...]
    seed: tuple[dict, ...]


@dataclass(frozen=True)
class Conflict:
    kind: str  # TypeMismatch | StratificationBreak | ConstraintContradiction | NameCollisionDifferentKind
    location: str
    detail: str

    def to_dict(self) -> dict:
        return {"kind": self.kind, "location": self.location, "detail": self.detail}


@dataclass
class MergePlan:
    pack: str
    version: str
    analyzed_at: int
    concept_additions: list[dict] = field(default_factory=list)  # ordered drafts
    extensions: list[dict] = field(default_factory=list)  # {concept, attributes}
    meta_additions: list[dict] = field(default_factory=list)
    rule_additions: list[dict] = field(default_factory=list)
    override_additions: list[dict] = field(default_factory=list)
    seed_additions: list[dict] = field(default_factory=list)
    seed_symbols: dict[str, int] = field(default_factory=dict)  # already-present rows
    conflicts: list[Conflict] = field(default_factory=list)

    @property
    def ordering(self) -> list[str]:
        return [c["name"] for c in self.concept_additions]

    def is_empty(self) -> bool:
        return not (
            self.concept_additions
            or self.extensions
            or self.meta_additions
            or self.rule_additions
            or self.override_additions
            or self.seed_additions
        )

    def to_dict(self) -> dict:
        return {
            "pack": self.pack,
            "version": self.version,
            "analyzed_at": self.analyzed_at,
            "concept_additions": self.concept_additions,
            "extensions": self.extensions,
            "meta_additions": self.meta_additions,
            "rule_additions": self.rule_additions,
            "override_additions": self.override_additions,
            "seed_additions": self.seed_additions,
            "seed_symbols": self.seed_symbols,
            "conflicts": [c.to_dict() for c in self.conflicts],
            "ordering": self.ordering,
        }


# --------------------------------------------------------------------------
# Loading
# --------------------------------------------------------------------------


def _require(cond: bool, path: str, where: str, msg: str) -> None:
    if not cond:
        raise MalformedPack(f"{path}: {where}: {msg}", path=path, position=where)


def load_pack(path: str) -> ComponentPack:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise MalformedPack(f"{path}: manifest not readable", path=path) from None
    except json.JSONDecodeError as exc:
        raise MalformedPack(
            f"{path}: invalid manifest at line {exc.lineno}", path=path,
            position=f"line {exc.lineno}",
        ) from None
    _require(isinstance(raw, dict), path, "top level", "manifest must be an object")
    name = raw.get("name")
    _require(isinstance(name, str) and bool(name), path, "name", "pack name required")
    version = str(raw.get("version", "1.0"))
    depends = tuple(raw.get("depends", ()))

    concepts = []
    concept_names = set()
    for cd in raw.get("concepts", ()):
        cname = cd.get("name")
        _require(isinstance(cname, str) and bool(cname), path, "concepts", "concept name required")
        _require(cname not in concept_names, path, cname, "duplicate concept in pack")
        concept_names.add(cname)
        attrs = []
        seen = set()
        for ad in cd.get("attributes", ()):
            aname = ad.get("name")
            _require(isinstance(aname, str) and bool(aname), path, cname, "attribute name required")
            _require(aname not in seen, path, f"{cname}.{aname}", "duplicate attribute")
            seen.add(aname)
            try:
                parse_type_label(ad.get("type", "text"))
            except Exception as exc:
                raise MalformedPack(
                    f"{path}: {cname}.{aname}: {exc}", path=path, position=f"{cname}.{aname}"
                ) from None
            attrs.append(
                {"name": aname, "type": ad.get("type", "text"),
                 "required": bool(ad.get("required", False))}
            )
        concepts.append(ConceptDraft(name=cname, attributes=tuple(attrs)))

    # Names that reference targets may resolve against: this pack plus any
    # declared dependency whose manifest sits next to this one.
    known = set(concept_names)
    pack_dir = os.path.dirname(os.path.abspath(path))
    for dep in depends:
        dep_path = os.path.join(pack_dir, pack_filename(dep))
        if os.path.exists(dep_path) and os.path.abspath(dep_path) != os.path.abspath(path):
            try:
                dep_pack = load_pack(dep_path)
            except MalformedPack:
                continue
            known.update(c.name for c in dep_pack.concepts)

    for draft in concepts:
        for ad in draft.attributes:
            vt, target = parse_type_label(ad["type"])
            if vt == "reference" and target not in known:
                raise MalformedPack(
                    f"{path}: {draft.name}.{ad['name']}: dangling reference to {target!r}",
                    path=path, position=f"{draft.name}.{ad['name']}",
                )

    metas = []
    for md in raw.get("metas", ()):
        _require(isinstance(md.get("name"), str), path, "metas", "meta name required")
        _require(isinstance(md.get("domain"), str), path, md.get("name", "?"), "meta domain required")
        try:
            parse_formula(md.get("formula", ""))
        except Exception as exc:
            raise MalformedPack(
                f"{path}: meta {md.get('name')}: bad formula: {exc}",
                path=path, position=f"meta {md.get('name')}",
            ) from None
        metas.append({"name": md["name"], "domain": md["domain"], "formula": md["formula"]})

    rules = []
    for rd in raw.get("rules", ()):
        _require(isinstance(rd.get("trigger"), str), path, "rules", "rule trigger required")
        _require(bool(rd.get("actions")), path, f"rule on {rd.get('trigger')}", "actions required")
        if rd.get("guard") is not None:
            try:
                parse_formula(rd["guard"])
            except Exception as exc:
                raise MalformedPack(
                    f"{path}: rule on {rd['trigger']}: bad guard: {exc}",
                    path=path, position=f"rule on {rd['trigger']}",
                ) from None
        rules.append(
            {"trigger": rd["trigger"], "concept": rd.get("concept"),
             "guard": rd.get("guard"), "actions": list(rd["actions"])}
        )

    overrides = []
    for od in raw.get("mandatory_overrides", ()):
        _require(isinstance(od.get("concept"), str), path, "mandatory_overrides", "concept required")
        try:
            parse_formula(od.get("condition", ""))
        except Exception as exc:
            raise MalformedPack(
                f"{path}: override on {od.get('concept')}: bad condition: {exc}",
                path=path, position=f"override on {od.get('concept')}",
            ) from None
        attrs = od.get("required_attrs") or []
        _require(bool(attrs), path, f"override on {od['concept']}", "required_attrs required")
        overrides.append(
            {"concept": od["concept"], "condition": od["condition"],
             "required_attrs": list(attrs)}
        )

    seed = []
    symbols = set()
    for i, sd in enumerate(raw.get("seed", ())):
        cname = sd.get("concept")
        _require(isinstance(cname, str), path, f"seed[{i}]", "concept required")
        values = sd.get("values") or {}
        for k, v in values.items():
            if isinstance(v, dict) and "$ref" in v:
                _require(
                    v["$ref"] in symbols, path, f"seed[{i}].{k}",
                    f"dangling seed reference {v['$ref']!r}",
                )
        if sd.get("key"):
            symbols.add(sd["key"])
        seed.append({"concept": cname, "key": sd.get("key"), "values": values})

    return ComponentPack(
        name=name,
        version=version,
        depends=depends,
        concepts=tuple(concepts),
        metas=tuple(metas),
        rules=tuple(rules),
        mandatory_overrides=tuple(overrides),
        seed=tuple(seed),
    )


# --------------------------------------------------------------------------
# Analysis
# --------------------------------------------------------------------------


def _reaches_org(name: str, ref_graph: dict[str, set[str]]) -> bool:
    seen = set()
    stack = [name]
    while stack:
        cur = stack.pop()
        if cur == ORG_UNIT:
            return True
        if cur in seen:
            continue
        seen.add(cur)
        stack.extend(ref_graph.get(cur, ()))
    return False


def _order_new_concepts(
    pack: ComponentPack, new_names: set[str], store_content: Content, path_hint: str
) -> list[ConceptDraft]:
    """Topological order by intra-pack references; org-linked concepts first
    among the ready ones."""
    drafts = {c.name: c for c in pack.concepts if c.name in new_names}
    deps: dict[str, set[str]] = {}
    ref_graph: dict[str, set[str]] = {}
    for c in pack.concepts:
        refs = set()
        for ad in c.attributes:
            vt, target = parse_type_label(ad["type"])
            if vt == "reference" and target != c.name:
                refs.add(target)
        ref_graph[c.name] = refs
        if c.name in new_names:
            deps[c.name] = {t for t in refs if t in new_names}
    manifest_order = {c.name: i for i, c in enumerate(pack.concepts)}
    ordered: list[ConceptDraft] = []
    remaining = dict(deps)
    while remaining:
        ready = [n for n, ds in remaining.items() if not ds]
        if not ready:
            raise MalformedPack(
                f"{path_hint}: circular concept references among {sorted(remaining)}"
            )
        ready.sort(key=lambda n: (not _reaches_org(n, ref_graph), manifest_order[n]))
        pick = ready[0]
        ordered.append(drafts[pick])
        del remaining[pick]
        for ds in remaining.values():
            ds.discard(pick)
    return ordered


def _virtual_domain_levels(store: Any, state: int, new_concepts: set[str],
                           planned_metas: dict[str, int]) -> Any:
    def level(domain: str) -> Optional[int]:
        if domain in new_concepts:
            return 1
        if domain in planned_metas:
            return planned_metas[domain]
        try:
            return store.domain_level(domain, state)
        except Exception:
            return None

    return level


def analyze_pack(store: Any, pack: ComponentPack, state: Optional[int] = None) -> MergePlan:
    state = store.head if state is None else state
    content = store.content_at(state)
    plan = MergePlan(pack=pack.name, version=pack.version, analyzed_at=state)
    conflicts = plan.conflicts

    merged_schemas: dict[str, dict[str, dict]] = {
        name: {a.name: {"name": a.name, "type": a.type_label()} for a in c.attributes}
        for name, c in content.concepts.items()
    }
    new_names: set[str] = set()

    for draft in pack.concepts:
        if draft.name in content.metas:
            conflicts.append(
                Conflict(
                    "NameCollisionDifferentKind",
                    draft.name,
                    "pack concept collides with an existing meta-object",
                )
            )
            continue
        existing = content.concepts.get(draft.name)
        if existing is None:
            new_names.add(draft.name)
            merged_schemas[draft.name] = {a["name"]: a for a in draft.attributes}
            continue
        extension = []
        for ad in draft.attributes:
            current = existing.attr(ad["name"])
            if current is None:
                extension.append({"name": ad["name"], "type": ad["type"], "required": False})
            elif current.type_label() != ad["type"]:
                conflicts.append(
                    Conflict(
                        "TypeMismatch",
                        f"{draft.name}.{ad['name']}",
                        f"store has {current.type_label()}, pack has {ad['type']}",
                    )
                )
        if extension:
            plan.extensions.append({"concept": draft.name, "attributes": extension})
            for ad in extension:
                merged_schemas[draft.name][ad["name"]] = ad

    try:
        plan.concept_additions = [
            {"name": d.name, "attributes": list(d.attributes)}
            for d in _order_new_concepts(pack, new_names, content, pack.name)
        ]
    except MalformedPack:
        raise

    def merged_attr_names(concept: str) -> Optional[set[str]]:
        schema = merged_schemas.get(concept)
        return set(schema) if schema is not None else None

    planned_meta_levels: dict[str, int] = {}
    level_fn = _virtual_domain_levels(store, state, new_names, planned_meta_levels)
    for md in pack.metas:
        name = md["name"]
        if name in content.concepts or name in new_names:
            conflicts.append(
                Conflict("NameCollisionDifferentKind", name,
                         "pack meta collides with a concept")
            )
            continue
        existing_meta = content.metas.get(name)
        formula = parse_formula(md["formula"])
        if existing_meta is not None:
            if existing_meta.domain == md["domain"] and existing_meta.formula_text == formula.text:
                continue  # identical definition already present
            conflicts.append(
                Conflict(
                    "ConstraintContradiction",
                    name,
                    "pack redefines an existing meta-object differently",
                )
            )
            continue
        dom_level = level_fn(md["domain"])
        if dom_level is None:
            conflicts.append(
                Conflict("ConstraintContradiction", name,
                         f"meta domain {md['domain']!r} is not defined")
            )
            continue
        if md["domain"] in new_names or md["domain"] in content.concepts:
            result_level = 1
        elif md["domain"] in ("MetaObject", "Concept"):
            result_level = 2 if md["domain"] == "Concept" else None
            if result_level is None:
                top = max((m.level for m in content.metas.values()), default=1)
                result_level = max(top, *(planned_meta_levels.values() or (1,))) + 1
        else:
            result_level = dom_level
        flevel = 0
        for d in formula.referenced_domains:
            dl = level_fn(d)
            if dl is None:
                conflicts.append(
                    Conflict("ConstraintContradiction", name,
                             f"formula references undefined domain {d!r}")
                )
                flevel = None
                break
            flevel = max(flevel, dl)
        if flevel is None:
            continue
        if flevel >= result_level:
            conflicts.append(
                Conflict(
                    "StratificationBreak",
                    name,
                    f"formula references level {flevel} >= result level {result_level}",
                )
            )
            continue
        if result_level > store.tower_cap:
            conflicts.append(
                Conflict("StratificationBreak", name,
                         f"level {result_level} exceeds tower cap {store.tower_cap}")
            )
            continue
        attr_names = merged_attr_names(md["domain"])
        if attr_names is not None:
            bad = _formula_unknown_attrs(formula.ast, attr_names)
            if bad:
                conflicts.append(
                    Conflict("ConstraintContradiction", name,
                             f"formula references unknown attributes {sorted(bad)}")
                )
                continue
        planned_meta_levels[name] = result_level
        plan.meta_additions.append(
            {"name": name, "domain": md["domain"], "formula": formula.text}
        )

    for rd in pack.rules:
        concept = rd.get("concept")
        if concept is not None and merged_attr_names(concept) is None:
            conflicts.append(
                Conflict("ConstraintContradiction", f"rule on {rd['trigger']}",
                         f"rule subject concept {concept!r} is not defined")
            )
            continue
        if rd.get("guard"):
            attr_names = merged_attr_names(concept) if concept else None
            if attr_names is not None:
                bad = _formula_unknown_attrs(parse_formula(rd["guard"]).ast, attr_names)
                if bad:
                    conflicts.append(
                        Conflict("ConstraintContradiction", f"rule on {rd['trigger']}",
                                 f"guard references unknown attributes {sorted(bad)}")
                    )
                    continue
        if not _rule_exists(content, rd, pack.name):
            plan.rule_additions.append(dict(rd))

    for od in pack.mandatory_overrides:
        attr_names = merged_attr_names(od["concept"])
        if attr_names is None:
            conflicts.append(
                Conflict("ConstraintContradiction", f"override on {od['concept']}",
                         f"override concept {od['concept']!r} is not defined")
            )
            continue
        missing = [a for a in od["required_attrs"] if a not in attr_names]
        bad = _formula_unknown_attrs(parse_formula(od["condition"]).ast, attr_names)
        if missing or bad:
            names = sorted(set(missing) | bad)
            conflicts.append(
                Conflict("ConstraintContradiction", f"override on {od['concept']}",
                         f"override references unknown attributes {names}")
            )
            continue
        if not _override_exists(content, od):
            plan.override_additions.append(dict(od))

    _plan_seed(plan, pack, content, new_names, merged_schemas, conflicts)
    return plan


def _formula_unknown_attrs(node: Any, attr_names: set[str]) -> set[str]:
    """First-hop path names a formula uses that are absent from the schema.
    Variable- and self-rooted paths are skipped (their first hop resolves
    elsewhere); deeper hops are validated at application time."""
    from .formula import And, Compare, Exists, InConcept, Not, Or

    bad: set[str] = set()
    bound: set[str] = set()

    def walk(n: Any, bound: frozenset[str]) -> None:
        if isinstance(n, (Compare, InConcept)):
            head = n.path[0]
            if head not in ("self",) and head not in bound and head not in attr_names:
                bad.add(head)
        elif isinstance(n, Exists):
            walk(n.body, bound | {n.var})
        elif isinstance(n, (And, Or)):
            for it in n.items:
                walk(it, bound)
        elif isinstance(n, Not):
            walk(n.item, bound)

    walk(node, frozenset())
    return bad


def _rule_exists(content: Content, rd: Mapping, pack_name: str) -> bool:
    guard = rd.get("guard")
    guard_text = parse_formula(guard).text if guard else None
    actions = [dict(a) for a in rd["actions"]]
    for rule in content.rules:
        if (
            rule.trigger_kind == rd["trigger"]
            and rule.concept == rd.get("concept")
            and rule.guard_text == guard_text
            and [a.to_dict() for a in rule.actions] == actions
        ):
            return True
    return False


def _override_exists(content: Content, od: Mapping) -> bool:
    want_attrs = ",".join(od["required_attrs"])
    cond = parse_formula(od["condition"]).text
    for ident in content.members.get("MandatoryOverride", ()):
        row = content.individuals[ident]
        if row.retired_at is not None:
            continue
        if (
            row.values.get("concept") == od["concept"]
            and row.values.get("condition") == cond
            and row.values.get("required_attrs") == want_attrs
        ):
            return True
    return False


def _plan_seed(
    plan: MergePlan,
    pack: ComponentPack,
    content: Content,
    new_names: set[str],
    merged_schemas: dict[str, dict[str, dict]],
    conflicts: list[Conflict],
) -> None:
    claimed: set[int] = set()
    pending_keys: set[str] = set()
    for i, sd in enumerate(pack.seed):
        cname = sd["concept"]
        if cname not in merged_schemas:
            conflicts.append(
                Conflict("ConstraintContradiction", f"seed[{i}]",
                         f"seed concept {cname!r} is not defined")
            )
            continue
        resolved: dict[str, Any] = {}
        unresolvable = False
        for k, v in sd["values"].items():
            if isinstance(v, dict) and "$ref" in v:
                key = v["$ref"]
                if key in plan.seed_symbols:
                    resolved[k] = plan.seed_symbols[key]
                elif key in pending_keys:
                    unresolvable = True  # referenced row is itself new
                    break
                else:
                    unresolvable = True
                    break
            else:
                resolved[k] = v
        existing = None
        if not unresolvable and cname not in new_names:
            want = {k: encode_value(v) for k, v in resolved.items() if v is not None}
            for ident in sorted(content.members.get(cname, ())):
                if ident in claimed:
                    continue
                row = content.individuals[ident]
                if row.retired_at is not None:
                    continue
                have = {k: encode_value(v) for k, v in row.values.items()}
                if have == want:
                    existing = ident
                    break
        if existing is not None:
            claimed.add(existing)
            if sd.get("key"):
                plan.seed_symbols[sd["key"]] = existing
        else:
            if sd.get("key"):
                pending_keys.add(sd["key"])
            plan.seed_additions.append(dict(sd))


# --------------------------------------------------------------------------
# Application
# --------------------------------------------------------------------------


def apply_plan(store: Any, session: Any, plan: MergePlan) -> int:
    if plan.conflicts:
        raise ConflictsPresent(
            f"plan for {plan.pack!r} has {len(plan.conflicts)} conflicts",
            conflicts=[c.to_dict() for c in plan.conflicts],
        )
    session = session or store.system_session()
    if not session.profile.metadata_admin:
        raise AccessDenied("pack application requires metadata administration rights")
    with store._lock:
        if store.head != plan.analyzed_at:
            raise StaleStore(
                f"store moved to {store.head} since analysis at {plan.analyzed_at}"
            )
        if plan.is_empty():
            return store.head
        start = store.head
        try:
            store.submit(session, "pack_apply",
                         {"pack": plan.pack, "version": plan.version, "phase": "begin"})
            for cd in plan.concept_additions:
                store.submit(session, "define_concept",
                             {"name": cd["name"], "attributes": cd["attributes"],
                              "origin_pack": plan.pack})
            for ext in plan.extensions:
                store.submit(session, "extend_concept", ext)
            for md in plan.meta_additions:
                store.submit(session, "comprehend", md)
            for rd in plan.rule_additions:
                store.submit(session, "rule_register", {**rd, "origin_pack": plan.pack})
            for od in plan.override_additions:
                store.submit(session, "create", {
                    "concept": "MandatoryOverride",
                    "values": {
                        "concept": od["concept"],
                        "condition": od["condition"],
                        "required_attrs": ",".join(od["required_attrs"]),
                    },
                })
            symbols = dict(plan.seed_symbols)
            for sd in plan.seed_additions:
                values = {}
                for k, v in sd["values"].items():
                    if isinstance(v, dict) and "$ref" in v:
                        values[k] = symbols[v["$ref"]]
                    else:
                        values[k] = v
                new_id = store.create(session, sd["concept"], values)
                if sd.get("key"):
                    symbols[sd["key"]] = new_id
            store.submit(session, "pack_apply",
                         {"pack": plan.pack, "version": plan.version, "phase": "end"})
        except Exception:
            store.rollback(store.system_session(), start)
            raise
        return store.head


def load_and_apply(store: Any, session: Any, path: str) -> int:
    pack = load_pack(path)
    plan = analyze_pack(store, pack)
    return apply_plan(store, session, plan)


def apply_all_shipped(store: Any, session: Any, packs_dir: str) -> int:
    head = store.head
    for name in ALL_PACKS:
        head = load_and_apply(store, session, os.path.join(packs_dir, pack_filename(name)))
    return head


# --------------------------------------------------------------------------
# Demo corpus
# --------------------------------------------------------------------------

DEMO_SEED = 7400
_FIRST = ["Anna", "Boris", "Clara", "Dmitri", "Elena", "Fedor", "Galina", "Igor",
          "Katya", "Leonid", "Marina", "Nikolai", "Olga", "Pavel", "Raisa", "Sergei",
          "Tanya", "Viktor", "Yulia", "Zoya"]
_LAST = ["Ivanov", "Petrov", "Sidorov", "Smirnov", "Volkov", "Kuznetsov", "Popov",
         "Sokolov", "Lebedev", "Kozlov", "Novikov", "Morozov", "Orlov", "Fedorov"]
_FUNCTIONS = ["planning", "accounting", "recruiting", "negotiation", "engineering",
              "logistics", "quality_control", "training"]


def seed_demo(store: Any, employees: int, seed: int = DEMO_SEED) -> int:
    """Deterministic pseudo-random corporation: org tree of depth 3 with 21
    units, positions with required functions, hires with possessed functions,
    and some vacancies.  Same seed, same content hash."""
    content = store.content_at(store.head)
    for needed in (ORG_UNIT, POSITION, EMPLOYEE, ASSIGNMENT):
        if needed not in content.concepts:
            raise PacksMissing(f"cannot seed: concept {needed!r} missing (apply packs first)")
    rng = random.Random(seed)
    session = store.system_session()

    root = None
    for ident in sorted(content.members.get(ORG_UNIT, ())):
        row = content.individuals[ident]
        if row.retired_at is None and row.values.get("parent") is None:
            root = ident
            break
    if root is None:
        root = store.create(session, ORG_UNIT, {"name": "Corporation"})

    divisions = []
    for d in range(4):
        divisions.append(
            store.create(session, ORG_UNIT, {"name": f"Division {d + 1}", "parent": root})
        )
    departments = []
    for di, div in enumerate(divisions):
        for k in range(4):
            departments.append(
                store.create(session, ORG_UNIT,
                             {"name": f"Department {di + 1}.{k + 1}", "parent": div})
            )

    def make_position(unit: int, title: str, functions: list[str]) -> int:
        pos = store.create(session, POSITION, {"unit": unit, "title": title})
        for tag in functions:
            store.create(session, POSITION_FUNCTION, {"position": pos, "tag": tag})
        return pos

    staff_positions: list[tuple[int, list[str]]] = []
    leader_positions: list[tuple[int, list[str], str]] = []
    leader_positions.append((make_position(root, "President", ["planning", "negotiation"]),
                             ["planning", "negotiation"], "President"))
    leader_positions.append((make_position(root, "HR Director", ["recruiting", "training"]),
                             ["recruiting", "training"], "HR Director"))
    for div in divisions:
        req = sorted(rng.sample(_FUNCTIONS, 2))
        leader_positions.append((make_position(div, "Unit Manager", req), req, "Unit Manager"))
        reqo = sorted(rng.sample(_FUNCTIONS, 2))
        leader_positions.append((make_position(div, "HR Officer", reqo), reqo, "HR Officer"))
    for dep in departments:
        req = sorted(rng.sample(_FUNCTIONS, 2))
        leader_positions.append((make_position(dep, "Unit Manager", req), req, "Unit Manager"))

    n_leaders = len(leader_positions)
    n_staff = max(0, employees - n_leaders)
    vacancies = max(2, n_staff // 10) if employees else 2
    for i in range(n_staff + vacancies):
        dep = departments[i % len(departments)]
        req = sorted(rng.sample(_FUNCTIONS, rng.randint(1, 3)))
        staff_positions.append((make_position(dep, "Specialist", req), req))

    hired = 0
    serial = 0

    def hire(position: int, required: list[str], title: str) -> None:
        nonlocal hired, serial
        serial += 1
        name = f"{rng.choice(_FIRST)} {rng.choice(_LAST)} {serial:04d}"
        possessed = set(required)
        if rng.random() < 0.35 and possessed:
            possessed.discard(rng.choice(sorted(possessed)))
        if rng.random() < 0.5:
            possessed.add(rng.choice(_FUNCTIONS))
        store.submit(session, "hire", {
            "values": {"name": name, "hire_date": "2000-01-10",
                       "login": f"emp{serial:04d}"},
            "position": position,
            "functions": sorted(possessed),
        })
        hired += 1

    for pos, req, title in leader_positions:
        if hired >= employees:
            break
        hire(pos, req, title)
    for pos, req in staff_positions[:n_staff]:
        if hired >= employees:
            break
        hire(pos, req, "Specialist")

    return store.head
