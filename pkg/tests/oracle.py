"""Independent oracles for the test suite.

Deliberately separate implementations of the two behaviors the engine is
checked against:

* `LogOracle` folds the public event-log records (plain dicts) into per-state
  contents, including rollback-marker reset semantics, using nothing from the
  engine's store machinery.
* `naive_eval` is a direct tree-walking reading of the formula semantics:
  two-valued, absent attribute means the atom is false, exists ranges over
  the domain's members at the state.

Both work on JSON-shaped values coerced through the schema recorded in the
log itself.
"""

from __future__ import annotations

import copy
import datetime as _dt
from typing import Any, Mapping, Optional

from unistore.formula import And, Compare, Exists, InConcept, Literal, Not, Or

MISSING = object()


def _coerce(attr_type: str, raw: Any) -> Any:
    if raw is None:
        return None
    base = attr_type.split("(")[0]
    if base == "date" and isinstance(raw, str):
        return _dt.date.fromisoformat(raw)
    if base == "decimal":
        return float(raw)
    return raw


class OracleContent:
    def __init__(self) -> None:
        self.concepts: dict[str, dict[str, str]] = {
            "MandatoryOverride": {"concept": "text", "condition": "text",
                                  "required_attrs": "text"},
            "AppraisalParams": {"w_s": "decimal", "w_p": "decimal",
                                "w_local": "decimal", "w_child": "decimal"},
        }
        self.concept_ids: dict[int, str] = {}
        self.rows: dict[int, dict] = {}  # id -> {concept, values, alive}
        self.metas: dict[str, dict] = {}  # name -> {id, domain, formula, level}

    def clone(self) -> "OracleContent":
        out = OracleContent()
        out.concepts = copy.deepcopy(self.concepts)
        out.concept_ids = dict(self.concept_ids)
        out.rows = copy.deepcopy(self.rows)
        out.metas = copy.deepcopy(self.metas)
        return out


class LogOracle:
    """Fold public log records independently of the engine."""

    def __init__(self, records: list[dict]):
        self.records = records
        self._cache: dict[int, OracleContent] = {}

    def content(self, state: int) -> OracleContent:
        if state in self._cache:
            return self._cache[state]
        base = 0
        for s in self._cache:
            if base < s <= state:
                base = s
        cur = self._cache[base].clone() if base else OracleContent()
        for rec in self.records[base:state]:
            cur = self._apply(cur, rec)
        self._cache[state] = cur
        return cur

    def _apply(self, content: OracleContent, rec: Mapping) -> OracleContent:
        if rec["kind"] == "rollback_marker":
            return self.content(rec["payload"]["to"]).clone()
        for eff in rec["effects"]:
            op = eff["op"]
            if op == "create":
                schema = content.concepts[eff["concept"]]
                values = {
                    k: _coerce(schema.get(k, "text"), v)
                    for k, v in eff["values"].items()
                    if v is not None
                }
                content.rows[eff["id"]] = {
                    "concept": eff["concept"], "values": values, "alive": True,
                }
            elif op == "set_attr":
                row = content.rows[eff["individual"]]
                schema = content.concepts[row["concept"]]
                for k, v in eff["values"].items():
                    if v is None:
                        row["values"].pop(k, None)
                    else:
                        row["values"][k] = _coerce(schema.get(k, "text"), v)
            elif op == "retire":
                content.rows[eff["individual"]]["alive"] = False
            elif op == "define_concept":
                content.concepts[eff["name"]] = {
                    a["name"]: a["type"] for a in eff["attributes"]
                }
                content.concept_ids[eff["id"]] = eff["name"]
            elif op == "extend_concept":
                content.concepts[eff["concept"]].update(
                    {a["name"]: a["type"] for a in eff["attributes"]}
                )
            elif op == "comprehend":
                content.metas[eff["name"]] = {
                    "id": eff["id"], "domain": eff["domain"],
                    "formula": eff["formula"], "level": eff["level"],
                    "defined_at": rec["seq"],
                }
            elif op in ("register_rule", "audit"):
                pass
            else:
                raise AssertionError(f"oracle cannot fold effect {op!r}")
        return content

    # -- queries ----------------------------------------------------------

    def extent(self, concept: str, state: int) -> frozenset[int]:
        content = self.content(state)
        return frozenset(
            i for i, row in content.rows.items()
            if row["alive"] and row["concept"] == concept
        )

    def values(self, ident: int, state: int) -> Optional[dict]:
        row = self.content(state).rows.get(ident)
        if row is None or not row["alive"]:
            return None
        return dict(row["values"])

    def members(self, domain: str, state: int) -> frozenset[int]:
        content = self.content(state)
        if domain == "Concept":
            return frozenset(content.concept_ids)
        if domain == "MetaObject":
            return frozenset(m["id"] for m in content.metas.values())
        if domain in content.concepts:
            return self.extent(domain, state)
        meta = content.metas.get(domain)
        if meta is None:
            raise AssertionError(f"oracle: unknown domain {domain!r}")
        from unistore.formula import parse

        body = parse(meta["formula"]).ast
        out = set()
        for member in self.members(meta["domain"], state):
            view = self.view(member, state)
            if view is not None and naive_eval(body, view, state, self):
                out.add(member)
        return frozenset(out)

    def view(self, ident: int, state: int) -> Optional[tuple]:
        content = self.content(state)
        row = content.rows.get(ident)
        if row is not None:
            if not row["alive"]:
                return None
            return (ident, row["concept"], row["values"])
        for name, meta in content.metas.items():
            if meta["id"] == ident:
                return (ident, "MetaObject", {
                    "name": name, "level": meta["level"], "formula": meta["formula"],
                    "domain": meta["domain"], "defined_at": meta["defined_at"],
                })
        name = content.concept_ids.get(ident)
        if name is not None:
            return (ident, "Concept", {"name": name, "level": 1})
        return None


def _resolve(path: tuple[str, ...], subject: tuple, state: int, world: LogOracle,
             env: Mapping[str, tuple]) -> Any:
    segs = list(path)
    if segs[0] == "self":
        cur = subject
        segs = segs[1:]
    elif segs[0] in env:
        cur = env[segs[0]]
        segs = segs[1:]
    else:
        cur = subject
    if not segs:
        return cur[0]
    val: Any = MISSING
    for k, seg in enumerate(segs):
        val = cur[2].get(seg, MISSING)
        if val is None:
            val = MISSING
        if val is MISSING:
            return MISSING
        if k < len(segs) - 1:
            cur = world.view(val, state)
            if cur is None:
                return MISSING
    return val


def naive_eval(node: Any, subject: tuple, state: int, world: LogOracle,
               env: Optional[Mapping[str, tuple]] = None,
               root: Optional[tuple] = None) -> bool:
    env = env or {}
    root = root or subject
    if isinstance(node, Or):
        return any(naive_eval(n, subject, state, world, env, root) for n in node.items)
    if isinstance(node, And):
        return all(naive_eval(n, subject, state, world, env, root) for n in node.items)
    if isinstance(node, Not):
        return not naive_eval(node.item, subject, state, world, env, root)
    if isinstance(node, Exists):
        for member in world.members(node.domain, state):
            view = world.view(member, state)
            if view is None:
                continue
            if naive_eval(node.body, subject, state, world, {**env, node.var: view}, root):
                return True
        return False
    if isinstance(node, InConcept):
        v = _resolve(node.path, subject, state, world, env)
        if v is MISSING:
            return False
        return v in world.members(node.domain, state)
    if isinstance(node, Compare):
        v = _resolve(node.path, subject, state, world, env)
        lit = node.literal
        if lit.ltype == "null":
            if node.op == "=":
                return False
            return v is not MISSING
        if v is MISSING:
            return False
        if lit.ltype == "self":
            target = root[0]
            if target is None:
                return False
            return v == target if node.op == "=" else v != target
        try:
            if node.op == "=":
                return v == lit.value
            if node.op == "!=":
                return v != lit.value
            if node.op == "<":
                return v < lit.value
            if node.op == "<=":
                return v <= lit.value
            if node.op == ">":
                return v > lit.value
            if node.op == ">=":
                return v >= lit.value
        except TypeError:
            return False
    raise AssertionError(f"oracle cannot evaluate {node!r}")


def oracle_individuate(world: LogOracle, formula_text: str, domain: str, state: int):
    """Brute-force scan; returns ('one', id) | ('none', None) | ('many', count)."""
    from unistore.formula import parse

    ast = parse(formula_text).ast
    matches = []
    for member in world.members(domain, state):
        view = world.view(member, state)
        if view is not None and naive_eval(ast, view, state, world):
            matches.append(member)
    if not matches:
        return ("none", None)
    if len(matches) == 1:
        return ("one", matches[0])
    return ("many", len(matches))
