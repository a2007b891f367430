"""The store kernel: one event-sourced object engine instance.

All mutation funnels through `submit`, which validates a payload, lets
registered rules veto or extend it, and appends exactly one hash-chained
event whose normalized effects fold deterministically into the content.
Reads are answered from per-state contents: the live content at the head,
frozen fold-produced snapshots for earlier states.  A rollback appends a
marker event whose fold replaces the content with a copy of the target
state's content, so history stays append-only while reads behave as if the
undone range never happened.
"""

from __future__ import annotations

import datetime as _dt
import os
import threading
import time
import uuid
from typing import Any, Iterable, Mapping, Optional

from . import access as _access
from .errors import (
    Ambiguous,
    AuthFailed,
    CorruptLog,
    DuplicateName,
    InvalidAttribute,
    NoneSatisfies,
    NotAliveAtState,
    RuleRejection,
    SessionClosed,
    StateBeyondHead,
    StratificationError,
    TowerCapExceeded,
    TypeMismatch,
    UnknownConcept,
    UnknownDomain,
    UnknownId,
    UnknownKind,
    Validation,
)
from .events import ROLLBACK_KIND, EventLog, make_record
from .formula import (
    Binding,
    CompiledFormula,
    Formula,
    SubjectView,
    check_formula,
    iter_satisfying,
    level_of,
    parse,
)
from .model import (
    APPRAISAL_PARAMS,
    ASSIGNMENT,
    CONCEPT_REGISTRY,
    EMPLOYEE,
    EMPLOYEE_FUNCTION,
    FIRST_FREE_ID,
    META_REGISTRY,
    ORG_UNIT,
    POSITION,
    AttributeSpec,
    Concept,
    Content,
    DataObject,
    Individual,
    MetaRecord,
    RuleAction,
    RuleRecord,
    StoreSnapshot,
    builtin_registry_schema,
    canonical_json,
    coerce_value,
    content_dict,
    content_from_dict,
    content_hash,
    encode_value,
    parse_type_label,
)

DATA_KINDS = frozenset(
    {"create", "set_attr", "retire", "hire", "transfer", "dismiss", "re_enroll"}
)
META_KINDS = frozenset(
    {"define_concept", "extend_concept", "comprehend", "rule_register", "pack_apply",
     ROLLBACK_KIND}
)
ALL_KINDS = DATA_KINDS | META_KINDS

_ACTION_KINDS = frozenset({"reject", "set_attr", "create", "audit"})


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="milliseconds")


class Store:
    def __init__(
        self,
        data_dir: Optional[str] = None,
        tower_cap: int = 3,
        session_ttl: float = 8 * 3600,
        bootstrap_user: str = "root",
    ):
        if tower_cap < 2:
            raise Validation("tower cap must be >= 2")
        self.tower_cap = tower_cap
        self.session_ttl = session_ttl
        self.bootstrap_user = bootstrap_user
        self.data_dir = data_dir
        self._lock = threading.RLock()
        log_path = os.path.join(data_dir, "log.jsonl") if data_dir else None
        self._sidecar = os.path.join(data_dir, "snapshot.json") if data_dir else None
        self.log = EventLog(log_path)
        self._snapshots: dict[int, Content] = {}
        self._members_memo: dict[tuple[str, int], frozenset] = {}
        self._meta_memo: dict[tuple[str, int], frozenset] = {}
        self._guard_cache: dict[int, Optional[CompiledFormula]] = {}
        self.sessions: dict[str, _access.Session] = {}
        self._next_id = FIRST_FREE_ID
        self._live = self._bootstrap_content()
        for rec in self.log.records:
            self._track_ids(rec.effects)

    # ------------------------------------------------------------------
    # Content management
    # ------------------------------------------------------------------

    def _bootstrap_content(self) -> Content:
        sidecar_state = 0
        base: Optional[Content] = None
        if self._sidecar and os.path.exists(self._sidecar):
            import json

            with open(self._sidecar, encoding="utf-8") as fh:
                snap = json.load(fh)
            st = snap.get("state", 0)
            if 0 < st <= self.log.head and self.log.records[st - 1].hash == snap.get("tip"):
                base = content_from_dict(snap["content"])
                sidecar_state = st
        live = base if base is not None else Content()
        for rec in self.log.records[sidecar_state:]:
            live = self._fold_event(live, rec)
        if base is not None:
            self._snapshots[sidecar_state] = base.copy()
        return live

    def save_sidecar(self) -> None:
        if not self._sidecar or self.head == 0:
            return
        import json

        snap = {
            "state": self.head,
            "tip": self.log.records[-1].hash,
            "content": content_dict(self._live),
        }
        tmp = self._sidecar + ".tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(snap, fh)
        os.replace(tmp, self._sidecar)

    @property
    def head(self) -> int:
        return self.log.head

    def _track_ids(self, effects: Iterable[Mapping]) -> None:
        for eff in effects:
            ident = eff.get("id")
            if ident is not None and ident >= self._next_id:
                self._next_id = ident + 1

    def _alloc_id(self) -> int:
        ident = self._next_id
        self._next_id += 1
        return ident

    def content_at(self, state: int) -> Content:
        if state < 0 or state > self.head:
            raise StateBeyondHead(f"state {state} outside 0..{self.head}")
        if state == self.head:
            return self._live
        with self._lock:
            got = self._snapshots.get(state)
            if got is not None:
                return got
            base_state = 0
            for s in self._snapshots:
                if base_state < s <= state:
                    base_state = s
            cur = self._snapshots[base_state].copy() if base_state else Content()
            for rec in self.log.records[base_state:state]:
                cur = self._fold_event(cur, rec)
            self._snapshots[state] = cur
            return cur

    def _fold_event(self, content: Content, rec) -> Content:
        if rec.kind == ROLLBACK_KIND:
            return self.content_at(rec.payload["to"]).copy()
        for eff in rec.effects:
            self._fold_effect(content, rec.seq, eff)
        return content

    def _fold_effect(self, content: Content, seq: int, eff: Mapping) -> None:
        op = eff["op"]
        if op == "create":
            concept = content.concepts[eff["concept"]]
            values = {}
            for k, raw in eff["values"].items():
                if raw is None:
                    continue
                spec = concept.attr(k)
                values[k] = coerce_value(spec, raw) if spec else raw
            ind = Individual(
                id=eff["id"],
                concept=concept.name,
                created_at=seq,
                retired_at=None,
                values=values,
            )
            content.individuals[ind.id] = ind
            content.members[concept.name].add(ind.id)
            if concept.name == ASSIGNMENT:
                emp, pos = values.get("employee"), values.get("position")
                if emp is not None:
                    content.assign_by_employee[emp] = ind.id
                if pos is not None:
                    content.assign_by_position[pos] = ind.id
        elif op == "set_attr":
            ind = content.individuals[eff["individual"]]
            concept = content.concepts[ind.concept]
            values = dict(ind.values)
            for k, raw in eff["values"].items():
                if raw is None:
                    values.pop(k, None)
                    continue
                spec = concept.attr(k)
                values[k] = coerce_value(spec, raw) if spec else raw
            content.individuals[ind.id] = Individual(
                id=ind.id,
                concept=ind.concept,
                created_at=ind.created_at,
                retired_at=ind.retired_at,
                values=values,
            )
        elif op == "retire":
            ind = content.individuals[eff["individual"]]
            content.individuals[ind.id] = Individual(
                id=ind.id,
                concept=ind.concept,
                created_at=ind.created_at,
                retired_at=seq,
                values=ind.values,
            )
            if ind.concept == ASSIGNMENT:
                emp, pos = ind.values.get("employee"), ind.values.get("position")
                if content.assign_by_employee.get(emp) == ind.id:
                    del content.assign_by_employee[emp]
                if content.assign_by_position.get(pos) == ind.id:
                    del content.assign_by_position[pos]
        elif op == "define_concept":
            attrs = []
            for ad in eff["attributes"]:
                vt, target = parse_type_label(ad["type"])
                attrs.append(AttributeSpec(ad["name"], vt, ad.get("required", False), target))
            rec = Concept(
                id=eff["id"],
                name=eff["name"],
                attributes=tuple(attrs),
                defined_at=seq,
                origin_pack=eff.get("origin_pack"),
            )
            content.concepts[rec.name] = rec
            content.concept_ids[rec.id] = rec.name
            content.members[rec.name] = set()
        elif op == "extend_concept":
            concept = content.concepts[eff["concept"]]
            extra = []
            for ad in eff["attributes"]:
                vt, target = parse_type_label(ad["type"])
                extra.append(AttributeSpec(ad["name"], vt, False, target))
            content.concepts[concept.name] = concept.extended(extra)
        elif op == "comprehend":
            meta = MetaRecord(
                id=eff["id"],
                name=eff["name"],
                level=eff["level"],
                domain=eff["domain"],
                formula_text=eff["formula"],
                defined_at=seq,
            )
            content.metas[meta.name] = meta
            content.meta_ids[meta.id] = meta.name
        elif op == "register_rule":
            content.rules.append(
                RuleRecord(
                    id=eff["id"],
                    trigger_kind=eff["trigger"],
                    concept=eff.get("concept"),
                    guard_text=eff.get("guard"),
                    actions=tuple(RuleAction.from_dict(a) for a in eff["actions"]),
                    registered_at=seq,
                    origin_pack=eff.get("origin_pack"),
                )
            )
        elif op == "audit":
            content.audit.append((seq, eff["message"]))
        else:
            raise CorruptLog(f"unknown effect op {op!r} at seq {seq}")

    # ------------------------------------------------------------------
    # Read surface
    # ------------------------------------------------------------------

    def _state_or_head(self, state: Optional[int]) -> int:
        return self.head if state is None else state

    def extent(self, concept: str, state: Optional[int] = None) -> frozenset[int]:
        state = self._state_or_head(state)
        content = self.content_at(state)
        if concept not in content.concepts and concept not in (CONCEPT_REGISTRY, META_REGISTRY):
            raise UnknownConcept(f"concept {concept!r} not defined at state {state}")
        return self.members_at(concept, state)

    def meta_extent(self, meta: str | int, state: Optional[int] = None) -> frozenset[int]:
        state = self._state_or_head(state)
        content = self.content_at(state)
        name = content.meta_ids.get(meta) if isinstance(meta, int) else meta
        if name not in content.metas:
            raise UnknownId(f"meta {meta!r} not defined at state {state}")
        return self.members_at(name, state)

    def get_object(self, individual: int, state: Optional[int] = None) -> DataObject:
        state = self._state_or_head(state)
        content = self.content_at(state)
        ind = content.individuals.get(individual)
        if ind is None:
            raise UnknownId(f"no individual {individual} at state {state}")
        if ind.retired_at is not None:
            raise NotAliveAtState(f"individual {individual} retired at {ind.retired_at}")
        return DataObject(ind.concept, ind.id, state, dict(ind.values))

    def describe(self, ident: int, state: Optional[int] = None) -> DataObject:
        state = self._state_or_head(state)
        view = self.view_of(ident, state)
        if view is None:
            raise UnknownId(f"no object {ident} at state {state}")
        return DataObject(view.concept, ident, state, dict(view.values))

    def individuate(self, formula: Formula | str, domain: str, state: Optional[int] = None) -> int:
        state = self._state_or_head(state)
        if isinstance(formula, str):
            formula = parse(formula)
        content = self.content_at(state)
        if domain not in content.concepts and domain not in content.metas and \
                domain not in (CONCEPT_REGISTRY, META_REGISTRY):
            raise UnknownConcept(f"domain {domain!r} not defined at state {state}")
        check_formula(formula, domain, self, state)
        matches = []
        for ident in iter_satisfying(formula, self, domain, state):
            matches.append(ident)
            if len(matches) > 1:
                break
        if not matches:
            raise NoneSatisfies(f"no member of {domain} satisfies {formula.text!r}")
        if len(matches) > 1:
            count = sum(1 for _ in iter_satisfying(formula, self, domain, state))
            raise Ambiguous(count)
        return matches[0]

    def evaluate(self, formula: Formula | str, binding: Binding, state: Optional[int] = None) -> bool:
        from .formula import evaluate as _eval

        state = self._state_or_head(state)
        if isinstance(formula, str):
            formula = parse(formula)
        return _eval(formula, binding, state, self)

    def snapshot(self, state: Optional[int] = None) -> StoreSnapshot:
        state = self._state_or_head(state)
        return StoreSnapshot(state, content_hash(self.content_at(state)))

    def replay(self, upto: int) -> StoreSnapshot:
        if upto < 0 or upto > self.head:
            raise StateBeyondHead(f"state {upto} outside 0..{self.head}")
        if upto == self.head:
            # fold from scratch rather than returning the live content
            cur = Content()
            for rec in self.log.records[:upto]:
                cur = self._fold_event(cur, rec)
            return StoreSnapshot(upto, content_hash(cur))
        return StoreSnapshot(upto, content_hash(self.content_at(upto)))

    def verify_chain(self) -> None:
        self.log.verify_chain()

    # -- adapter surface used by the formula evaluator --------------------

    def members_at(self, domain: str, state: int) -> frozenset[int]:
        key = (domain, state)
        got = self._members_memo.get(key)
        if got is not None:
            return got
        content = self.content_at(state)
        if domain == CONCEPT_REGISTRY:
            out = frozenset(content.concept_ids)
        elif domain == META_REGISTRY:
            out = frozenset(content.meta_ids)
        elif domain in content.concepts:
            inds = content.individuals
            out = frozenset(i for i in content.members[domain] if inds[i].retired_at is None)
        elif domain in content.metas:
            got = self._meta_memo.get(key)
            if got is not None:
                return got
            meta = content.metas[domain]
            formula = parse(meta.formula_text)
            out = frozenset(iter_satisfying(formula, self, meta.domain, state))
            self._meta_memo[key] = out
            return out
        else:
            raise UnknownDomain(f"domain {domain!r} not defined at state {state}")
        self._members_memo[key] = out
        return out

    def view_of(self, ident: int, state: int) -> Optional[SubjectView]:
        content = self.content_at(state)
        ind = content.individuals.get(ident)
        if ind is not None:
            if ind.retired_at is not None:
                return None
            return SubjectView(ind.id, ind.concept, ind.values)
        name = content.meta_ids.get(ident)
        if name is not None:
            m = content.metas[name]
            return SubjectView(
                m.id,
                META_REGISTRY,
                {
                    "name": m.name,
                    "level": m.level,
                    "formula": m.formula_text,
                    "domain": m.domain,
                    "defined_at": m.defined_at,
                },
            )
        cname = content.concept_ids.get(ident)
        if cname is not None:
            c = content.concepts[cname]
            return SubjectView(
                c.id,
                CONCEPT_REGISTRY,
                {"name": c.name, "level": c.level, "defined_at": c.defined_at},
            )
        return None

    def schema_at(self, domain: str, state: int) -> tuple[AttributeSpec, ...]:
        content = self.content_at(state)
        schema = content.schema_of(domain)
        if schema is None:
            raise UnknownDomain(f"domain {domain!r} not defined at state {state}")
        return schema

    def domain_level(self, domain: str, state: int) -> int:
        content = self.content_at(state)
        if domain in (CONCEPT_REGISTRY, META_REGISTRY):
            return 2
        if domain in content.concepts:
            return 1
        if domain in content.metas:
            return content.metas[domain].level
        raise UnknownDomain(f"domain {domain!r} not defined at state {state}")

    def comprehension_level(self, domain: str, state: int) -> int:
        """Level a new comprehension over `domain` would get."""
        content = self.content_at(state)
        if domain == CONCEPT_REGISTRY:
            return 2
        if domain == META_REGISTRY:
            top = max((m.level for m in content.metas.values()), default=1)
            return top + 1
        if domain in content.concepts:
            return 1
        if domain in content.metas:
            return content.metas[domain].level
        raise UnknownDomain(f"domain {domain!r} not defined at state {state}")

    def power_sort(self, domain: str, state: Optional[int] = None) -> "PowerSort":
        """Bracket-typed view of a domain: base is the root schema owner,
        bracket depth is the member level plus one."""
        from .model import PowerSort

        state = self._state_or_head(state)
        content = self.content_at(state)
        root = domain
        seen = set()
        while root in content.metas and root not in seen:
            seen.add(root)
            root = content.metas[root].domain
        return PowerSort(base=root, bracket_depth=self.comprehension_level(domain, state))

    # ------------------------------------------------------------------
    # Sessions
    # ------------------------------------------------------------------

    def open_session(self, user: str) -> _access.Session:
        with self._lock:
            if user == self.bootstrap_user:
                profile = _access.bootstrap_profile()
                session = _access.Session(
                    id=uuid.uuid4().hex,
                    user=None,
                    profile=profile,
                    opened_at=self.head,
                    expires=time.monotonic() + self.session_ttl,
                )
                self.sessions[session.id] = session
                return session
            user_id = _access.resolve_user(self, user, self.head)
            if user_id is None:
                raise AuthFailed(f"unknown user {user!r}")
            profile = _access.derive_profile(self, user_id, self.head)
            session = _access.Session(
                id=uuid.uuid4().hex,
                user=user_id,
                profile=profile,
                opened_at=self.head,
                expires=time.monotonic() + self.session_ttl,
            )
            self.sessions[session.id] = session
            return session

    def system_session(self) -> _access.Session:
        """Internal full-rights session for bootstrap and tooling paths."""
        return _access.Session(
            id="system",
            user=None,
            profile=_access.bootstrap_profile(),
            opened_at=self.head,
            expires=float("inf"),
        )

    def get_session(self, session_id: str) -> _access.Session:
        session = self.sessions.get(session_id)
        if session is None:
            raise AuthFailed("unknown session")
        return session

    def close_session(self, session_id: str) -> None:
        session = self.get_session(session_id)
        session.closed = True

    def _require_open(self, session: _access.Session) -> None:
        if session.closed:
            raise SessionClosed("session closed")
        if time.monotonic() > session.expires:
            session.closed = True
            raise SessionClosed("session expired")

    def check_access(self, session: _access.Session, action: str, target: Any) -> _access.Decision:
        self._require_open(session)
        return _access.check_access(self, session, action, target, self.head)

    def mandatory_fields(
        self,
        session: Optional[_access.Session],
        concept: str,
        state: Optional[int] = None,
        draft: Optional[Mapping[str, Any]] = None,
    ) -> frozenset[str]:
        state = self._state_or_head(state)
        if session is not None:
            self._require_open(session)
            decision = _access.check_access(self, session, "read", ("concept", concept), state)
            if not decision.allow:
                raise _access.AccessDenied(decision.reason or "concept not visible")
        return _access.compute_mandatory(self, concept, state, draft or {})

    def derive_profile(self, user_id: int, state: Optional[int] = None) -> _access.AccessProfile:
        return _access.derive_profile(self, user_id, self._state_or_head(state))

    # ------------------------------------------------------------------
    # Mutation pipeline
    # ------------------------------------------------------------------

    def submit(self, session: Optional[_access.Session], kind: str, payload: Mapping[str, Any]) -> int:
        """Validate, run rules, and append one event; returns the new state."""
        session = session or self.system_session()
        with self._lock:
            self._require_open(session)
            if kind not in ALL_KINDS:
                raise UnknownKind(f"unknown event kind {kind!r}")
            content = self._live
            payload = self._normalize_payload(kind, payload, content)
            _access.check_event(self, session, kind, payload, self.head)
            subject_concept, subject_view, effects = self._build_effects(kind, payload, content)
            effects = self._run_rules(kind, subject_concept, subject_view, effects, content)
            actor = session.actor_label()
            rec = make_record(
                seq=self.head + 1,
                ts=_now(),
                actor=actor,
                kind=kind,
                payload=dict(payload),
                effects=effects,
                prev_hash=self.log.tip_hash(),
            )
            self.log.append(rec)
            self._track_ids(effects)
            self._live = self._fold_event(self._live, rec)
            return self.head

    # -- payload helpers ----------------------------------------------------

    def _normalize_payload(self, kind: str, payload: Mapping[str, Any], content: Content) -> dict:
        out = {}
        for k, v in payload.items():
            if isinstance(v, Mapping):
                out[k] = {ik: encode_value(iv) for ik, iv in v.items()}
            else:
                out[k] = encode_value(v)
        return out

    def _get_alive(self, content: Content, ident: Any, concept: Optional[str] = None) -> Individual:
        if not isinstance(ident, int):
            raise Validation(f"expected an individual id, got {ident!r}")
        ind = content.individuals.get(ident)
        if ind is None:
            raise UnknownId(f"no individual {ident}")
        if ind.retired_at is not None:
            raise NotAliveAtState(f"individual {ident} retired at {ind.retired_at}")
        if concept is not None and ind.concept != concept:
            raise Validation(f"individual {ident} is a {ind.concept}, expected {concept}")
        return ind

    def _coerce_create_values(
        self,
        content: Content,
        concept: Concept,
        raw_values: Mapping[str, Any],
        created_overlay: dict[int, str],
    ) -> dict:
        values = {}
        bad: list[str] = []
        for k, raw in raw_values.items():
            spec = concept.attr(k)
            if spec is None:
                raise Validation(f"unknown attribute {k!r} on {concept.name}", fields=[k])
            if raw is None:
                continue
            try:
                values[k] = coerce_value(spec, raw)
            except TypeMismatch as exc:
                raise Validation(str(exc), fields=[k]) from None
            if spec.value_type == "reference":
                target = values[k]
                tconcept = None
                ind = content.individuals.get(target)
                if ind is not None and ind.retired_at is None:
                    tconcept = ind.concept
                elif target in created_overlay:
                    tconcept = created_overlay[target]
                if tconcept is None:
                    raise Validation(
                        f"{concept.name}.{k}: reference {target} not alive", fields=[k]
                    )
                if spec.ref_target and tconcept != spec.ref_target:
                    raise Validation(
                        f"{concept.name}.{k}: expected {spec.ref_target}, got {tconcept}",
                        fields=[k],
                    )
        if bad:
            raise Validation("ill-typed fields", fields=bad)
        return values

    def _check_mandatory(self, concept: Concept, values: Mapping[str, Any], state: int) -> None:
        required = _access.compute_mandatory(self, concept.name, state, values)
        missing = sorted(r for r in required if values.get(r) is None)
        if missing:
            raise Validation(
                f"missing mandatory fields for {concept.name}: {', '.join(missing)}",
                fields=missing,
            )

    def _check_org_cycle(self, content: Content, unit_id: int, new_parent: Any) -> None:
        seen = {unit_id}
        cur = new_parent
        while cur is not None:
            if cur in seen:
                raise Validation("org unit parent links must form a tree")
            seen.add(cur)
            ind = content.individuals.get(cur)
            cur = ind.values.get("parent") if ind else None

    # -- effect construction -------------------------------------------------

    def _build_effects(
        self, kind: str, payload: Mapping[str, Any], content: Content
    ) -> tuple[Optional[str], Optional[SubjectView], list[dict]]:
        state = self.head
        if kind == "create":
            cname = payload.get("concept")
            concept = content.concepts.get(cname)
            if concept is None:
                raise UnknownConcept(f"concept {cname!r} not defined")
            raw = payload.get("values") or {}
            values = self._coerce_create_values(content, concept, raw, {})
            self._check_mandatory(concept, values, state)
            if cname == ASSIGNMENT:
                emp = values.get("employee")
                if emp in content.assign_by_employee:
                    raise Validation(f"employee {emp} already has an active assignment")
                pos = values.get("position")
                if pos in content.assign_by_position:
                    raise Validation(f"position {pos} is already held")
            if cname == ORG_UNIT and values.get("parent") is not None:
                self._check_org_cycle(content, -1, values.get("parent"))
            new_id = self._alloc_id()
            view = SubjectView(new_id, cname, values)
            return cname, view, [
                {"op": "create", "id": new_id, "concept": cname,
                 "values": {k: encode_value(v) for k, v in values.items()}}
            ]

        if kind == "set_attr":
            ind = self._get_alive(content, payload.get("individual"))
            concept = content.concepts[ind.concept]
            raw = payload.get("values") or {}
            updates: dict[str, Any] = {}
            for k, v in raw.items():
                spec = concept.attr(k)
                if spec is None:
                    raise Validation(f"unknown attribute {k!r} on {concept.name}", fields=[k])
                if v is None:
                    updates[k] = None
                    continue
                try:
                    coerced = coerce_value(spec, v)
                except TypeMismatch as exc:
                    raise Validation(str(exc), fields=[k]) from None
                if spec.value_type == "reference":
                    self._get_alive(content, coerced, spec.ref_target)
                updates[k] = encode_value(coerced)
            if ind.concept == ORG_UNIT and "parent" in updates and updates["parent"] is not None:
                self._check_org_cycle(content, ind.id, updates["parent"])
            view = SubjectView(ind.id, ind.concept, ind.values)
            return ind.concept, view, [
                {"op": "set_attr", "individual": ind.id, "values": updates}
            ]

        if kind == "retire":
            ind = self._get_alive(content, payload.get("individual"))
            view = SubjectView(ind.id, ind.concept, ind.values)
            return ind.concept, view, [{"op": "retire", "individual": ind.id}]

        if kind == "hire":
            concept = content.concepts.get(EMPLOYEE)
            if concept is None:
                raise UnknownConcept("Employee concept not defined (packs missing?)")
            raw = payload.get("values") or {}
            values = self._coerce_create_values(content, concept, raw, {})
            self._check_mandatory(concept, values, state)
            emp_id = self._alloc_id()
            effects = [{"op": "create", "id": emp_id, "concept": EMPLOYEE,
                        "values": {k: encode_value(v) for k, v in values.items()}}]
            pos = payload.get("position")
            if pos is not None:
                self._get_alive(content, pos, POSITION)
                if pos in content.assign_by_position:
                    raise Validation(f"position {pos} is already held")
                if ASSIGNMENT not in content.concepts:
                    raise UnknownConcept("Assignment concept not defined")
                effects.append({"op": "create", "id": self._alloc_id(), "concept": ASSIGNMENT,
                                "values": {"employee": emp_id, "position": pos}})
            for tag in payload.get("functions") or ():
                if EMPLOYEE_FUNCTION not in content.concepts:
                    raise UnknownConcept("EmployeeFunction concept not defined")
                if not isinstance(tag, str):
                    raise Validation(f"function tag must be text, got {tag!r}")
                effects.append({"op": "create", "id": self._alloc_id(),
                                "concept": EMPLOYEE_FUNCTION,
                                "values": {"employee": emp_id, "tag": tag}})
            view = SubjectView(emp_id, EMPLOYEE, values)
            return EMPLOYEE, view, effects

        if kind in ("transfer", "dismiss", "re_enroll"):
            emp = self._get_alive(content, payload.get("employee"), EMPLOYEE)
            view = SubjectView(emp.id, EMPLOYEE, emp.values)
            effects: list[dict] = []
            if kind == "dismiss":
                row_id = content.assign_by_employee.get(emp.id)
                if row_id is not None:
                    effects.append({"op": "retire", "individual": row_id})
                return EMPLOYEE, view, effects
            pos = payload.get("position")
            if kind == "transfer" and pos is None:
                raise Validation("transfer requires a target position")
            if pos is not None:
                self._get_alive(content, pos, POSITION)
                holder_row = content.assign_by_position.get(pos)
                if holder_row is not None and \
                        content.individuals[holder_row].values.get("employee") != emp.id:
                    raise Validation(f"position {pos} is already held")
                if kind == "transfer":
                    row_id = content.assign_by_employee.get(emp.id)
                    if row_id is not None:
                        effects.append({"op": "retire", "individual": row_id})
                effects.append({"op": "create", "id": self._alloc_id(), "concept": ASSIGNMENT,
                                "values": {"employee": emp.id, "position": pos}})
            return EMPLOYEE, view, effects

        if kind == "define_concept":
            name = payload.get("name")
            if not isinstance(name, str) or not name:
                raise Validation("concept name required")
            if content.name_in_use(name):
                raise DuplicateName(f"name {name!r} already in use")
            specs = self._parse_attr_specs(payload.get("attributes") or [], content, name)
            return None, None, [{
                "op": "define_concept",
                "id": self._alloc_id(),
                "name": name,
                "attributes": specs,
                "origin_pack": payload.get("origin_pack"),
            }]

        if kind == "extend_concept":
            cname = payload.get("concept")
            concept = content.concepts.get(cname)
            if concept is None:
                raise UnknownConcept(f"concept {cname!r} not defined")
            specs = self._parse_attr_specs(payload.get("attributes") or [], content, cname,
                                           existing=concept)
            # merged attributes never tighten old data: force optional
            for s in specs:
                s["required"] = False
            return None, None, [{"op": "extend_concept", "concept": cname, "attributes": specs}]

        if kind == "comprehend":
            return None, None, [self._comprehend_effect(payload, content)]

        if kind == "rule_register":
            return None, None, [self._rule_effect(payload, content)]

        if kind == "pack_apply":
            return None, None, []

        if kind == ROLLBACK_KIND:
            to = payload.get("to")
            if not isinstance(to, int) or to < 0 or to > self.head:
                raise StateBeyondHead(f"rollback target {to!r} outside 0..{self.head}")
            return None, None, [{"op": "rollback", "to": to}]

        raise UnknownKind(f"unknown event kind {kind!r}")

    def _parse_attr_specs(
        self,
        raw_attrs: Iterable[Mapping],
        content: Content,
        owner: str,
        existing: Optional[Concept] = None,
    ) -> list[dict]:
        seen = {a.name for a in existing.attributes} if existing else set()
        specs = []
        for ad in raw_attrs:
            aname = ad.get("name")
            if not isinstance(aname, str) or not aname:
                raise InvalidAttribute(f"attribute name required on {owner}")
            if aname in seen:
                raise InvalidAttribute(f"duplicate attribute {aname!r} on {owner}")
            seen.add(aname)
            vt, target = parse_type_label(ad.get("type", "text"))
            if vt == "reference":
                if target != owner and target not in content.concepts:
                    raise InvalidAttribute(
                        f"{owner}.{aname}: reference target {target!r} not defined"
                    )
            specs.append({"name": aname, "type": ad.get("type", "text"),
                          "required": bool(ad.get("required", False))})
        return specs

    def _comprehend_effect(self, payload: Mapping[str, Any], content: Content) -> dict:
        name = payload.get("name")
        if not isinstance(name, str) or not name:
            raise Validation("meta name required")
        if content.name_in_use(name):
            raise DuplicateName(f"name {name!r} already in use")
        domain = payload.get("domain")
        formula = parse(payload.get("formula") or "")
        state = self.head
        result_level = self.comprehension_level(domain, state)
        if result_level > self.tower_cap:
            raise TowerCapExceeded(
                f"level {result_level} exceeds tower cap {self.tower_cap}"
            )
        flevel = level_of(formula, self, state)
        if flevel >= result_level:
            raise StratificationError(
                f"formula references level {flevel} >= result level {result_level}"
            )
        check_formula(formula, domain, self, state)
        return {
            "op": "comprehend",
            "id": self._alloc_id(),
            "name": name,
            "level": result_level,
            "domain": domain,
            "formula": formula.text,
        }

    def _rule_effect(self, payload: Mapping[str, Any], content: Content) -> dict:
        trigger = payload.get("trigger")
        if trigger not in DATA_KINDS:
            raise Validation(f"rules may trigger only on data events, not {trigger!r}")
        concept = payload.get("concept")
        if concept is not None and concept not in content.concepts:
            raise UnknownConcept(f"concept {concept!r} not defined")
        guard = payload.get("guard")
        if guard is not None:
            if concept is None:
                raise Validation("a guarded rule must name its subject concept")
            gf = parse(guard)
            check_formula(gf, concept, self, self.head)
            level_of(gf, self, self.head)
            guard = gf.text
        actions = payload.get("actions") or []
        if not actions:
            raise Validation("rule must carry at least one action")
        norm_actions = []
        for ad in actions:
            act = RuleAction.from_dict(ad)
            if act.kind not in _ACTION_KINDS:
                raise Validation(f"unknown rule action {act.kind!r}")
            if act.kind == "set_attr":
                if concept is None or content.concepts[concept].attr(act.attr) is None:
                    raise Validation(f"set_attr action targets unknown attribute {act.attr!r}")
            if act.kind == "create":
                target = content.concepts.get(act.concept)
                if target is None:
                    raise UnknownConcept(f"create action concept {act.concept!r} not defined")
            norm_actions.append(act.to_dict())
        return {
            "op": "register_rule",
            "id": self._alloc_id(),
            "trigger": trigger,
            "concept": concept,
            "guard": guard,
            "actions": norm_actions,
            "origin_pack": payload.get("origin_pack"),
        }

    # -- rules -----------------------------------------------------------

    def _compiled_guard(self, rule: RuleRecord) -> Optional[CompiledFormula]:
        if rule.id not in self._guard_cache:
            self._guard_cache[rule.id] = (
                CompiledFormula(parse(rule.guard_text)) if rule.guard_text else None
            )
        return self._guard_cache[rule.id]

    def _run_rules(
        self,
        kind: str,
        subject_concept: Optional[str],
        subject_view: Optional[SubjectView],
        effects: list[dict],
        content: Content,
    ) -> list[dict]:
        if kind not in DATA_KINDS or subject_view is None:
            return effects
        state = self.head
        extra: list[dict] = []
        for rule in content.rules:
            if rule.trigger_kind != kind:
                continue
            if rule.concept is not None and rule.concept != subject_concept:
                continue
            guard = self._compiled_guard(rule)
            if guard is not None and not guard.run(self, state, subject_view):
                continue
            for act in rule.actions:
                if act.kind == "reject":
                    raise RuleRejection(rule.id, act.message or "rejected by rule")
                if act.kind == "set_attr":
                    extra.append({"op": "set_attr", "individual": subject_view.id,
                                  "values": {act.attr: act.value}})
                elif act.kind == "create":
                    concept = content.concepts[act.concept]
                    values = self._coerce_create_values(
                        content, concept, dict(act.values),
                        {subject_view.id: subject_concept} if subject_view.id else {},
                    )
                    extra.append({"op": "create", "id": self._alloc_id(),
                                  "concept": act.concept,
                                  "values": {k: encode_value(v) for k, v in values.items()}})
                elif act.kind == "audit":
                    extra.append({"op": "audit", "message": act.message or "", "rule": rule.id})
        return effects + extra

    # ------------------------------------------------------------------
    # Convenience wrappers over submit
    # ------------------------------------------------------------------

    def define_concept(
        self,
        session: Optional[_access.Session],
        name: str,
        attrs: Iterable[Mapping] = (),
        origin_pack: Optional[str] = None,
    ) -> int:
        state = self.submit(session, "define_concept",
                            {"name": name, "attributes": list(attrs),
                             "origin_pack": origin_pack})
        return self.content_at(state).concepts[name].id

    def create(self, session, concept: str, values: Mapping[str, Any]) -> int:
        state = self.submit(session, "create", {"concept": concept, "values": dict(values)})
        rec = self.log.records[state - 1]
        return rec.effects[0]["id"]

    def comprehend(self, session, name: str, formula: str, domain: str) -> int:
        state = self.submit(session, "comprehend",
                            {"name": name, "formula": formula, "domain": domain})
        return self.content_at(state).metas[name].id

    def register_rule(self, session, **payload) -> int:
        state = self.submit(session, "rule_register", payload)
        return self.content_at(state).rules[-1].id

    def rollback(self, session, to: int) -> int:
        return self.submit(session, ROLLBACK_KIND, {"to": to})

    def close(self) -> None:
        if self.data_dir:
            self.save_sidecar()
        self.log.close()
