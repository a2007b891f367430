"""Wire API over one store instance.

Transport only: every endpoint defers to the in-process operations, so API
results and engine results coincide by construction.  Mutating endpoints
require a session token (Authorization: Bearer <session_id>); reads accept an
optional `state` parameter defaulting to the head.  Extent-returning
endpoints paginate by cursor, default page 200.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Any, Mapping, Optional

from fastapi import Depends, FastAPI, Header, Query, Request
from fastapi.responses import FileResponse, JSONResponse

from . import access as _access
from . import appraisal as _appraisal
from . import packs as _packs
from .errors import AccessDenied, AuthFailed, EngineError, Validation
from .model import encode_values
from .store import Store

DEFAULT_PAGE = 200

_STATUS = {
    "PARSE": 400,
    "VALIDATION": 400,
    "STATE_BEYOND_HEAD": 400,
    "AUTH_FAILED": 401,
    "ACCESS_DENIED": 403,
    "NO_ASSIGNMENT": 403,
    "UNKNOWN_ID": 404,
    "UNKNOWN_CONCEPT": 404,
    "NONE_SATISFIES": 404,
    "AMBIGUOUS": 409,
    "RULE_REJECTION": 409,
    "CONFLICT": 409,
    "STALE_STORE": 409,
    "STRATIFICATION": 422,
}


@dataclass
class ServerConfig:
    data_dir: Optional[str] = None
    port: int = 7400
    tower_cap: int = 3
    session_ttl: float = 8 * 3600
    packs_dir: str = "packs"
    frontend_dir: Optional[str] = None

    @staticmethod
    def from_env() -> "ServerConfig":
        return ServerConfig(
            data_dir=os.environ.get("UNISTORE_DATA") or None,
            port=int(os.environ.get("UNISTORE_PORT", "7400")),
            tower_cap=int(os.environ.get("UNISTORE_TOWER_CAP", "3")),
            session_ttl=float(os.environ.get("UNISTORE_SESSION_TTL", str(8 * 3600))),
            packs_dir=os.environ.get("UNISTORE_PACKS", "packs"),
            frontend_dir=os.environ.get("UNISTORE_FRONTEND") or None,
        )


def _as_int(value: Any, what: str) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, str)):
        raise Validation(f"{what} must be an integer, got {value!r}")
    try:
        return int(value)
    except (TypeError, ValueError):
        raise Validation(f"{what} must be an integer, got {value!r}") from None


def _page(ids: list[int], cursor: Optional[str], page_size: int) -> tuple[list[int], Optional[str]]:
    start = _as_int(cursor, "cursor") if cursor else 0
    chunk = ids[start:start + page_size]
    nxt = str(start + page_size) if start + page_size < len(ids) else None
    return chunk, nxt


def create_app(store: Store, packs_dir: str = "packs",
               frontend_dir: Optional[str] = None) -> FastAPI:
    app = FastAPI(title="unistore", version="0.1.0")

    @app.exception_handler(EngineError)
    def engine_error(_request: Request, exc: EngineError):
        return JSONResponse(
            status_code=_STATUS.get(exc.code, 400),
            content={"code": exc.code, "message": exc.message, "details": exc.details},
        )

    def session_dep(authorization: Optional[str] = Header(default=None)) -> _access.Session:
        if not authorization or not authorization.startswith("Bearer "):
            raise AuthFailed("missing session token")
        session = store.get_session(authorization.removeprefix("Bearer ").strip())
        store._require_open(session)
        return session

    def require_read(session: _access.Session, target: Any, state: int) -> None:
        decision = store.check_access(session, "read", target)
        if not decision.allow:
            raise AccessDenied(decision.reason or "read denied")

    def visible_ids(session: _access.Session, ids, state: int) -> list[int]:
        return sorted(
            i for i in ids
            if _access.check_access(store, session, "read", i, state).allow
        )

    # -- sessions ---------------------------------------------------------

    @app.post("/sessions")
    def open_session(body: dict):
        user = body.get("user")
        if not isinstance(user, str) or not user:
            raise Validation("user credential required")
        session = store.open_session(user)
        return {
            "session_id": session.id,
            "scenario": session.profile.scenario,
            "state": session.opened_at,
            "metadata_admin": session.profile.metadata_admin,
            "user": session.user,
        }

    @app.delete("/sessions/{session_id}")
    def close_session(session_id: str):
        store.close_session(session_id)
        return {"closed": True}

    # -- schema -------------------------------------------------------------

    @app.get("/concepts")
    def list_concepts(state: Optional[int] = None,
                      session: _access.Session = Depends(session_dep)):
        st = store.head if state is None else state
        content = store.content_at(st)
        out = []
        for name in sorted(content.concepts):
            if not _access.check_access(store, session, "read", name, st).allow:
                continue
            c = content.concepts[name]
            out.append({
                "id": c.id,
                "name": c.name,
                "attributes": [
                    {"name": a.name, "type": a.type_label(), "required": a.required_by_default}
                    for a in c.attributes
                ],
                "defined_at": c.defined_at,
                "origin_pack": c.origin_pack,
                "builtin": c.builtin,
            })
        return {"state": st, "concepts": out}

    @app.post("/concepts")
    def define_concept(body: dict, session: _access.Session = Depends(session_dep)):
        state = store.submit(session, "define_concept", body)
        return {"state": state, "name": body.get("name")}

    # -- objects ------------------------------------------------------------

    @app.get("/objects")
    def extent_page(concept: str, state: Optional[int] = None,
                    cursor: Optional[str] = None,
                    page_size: int = Query(default=DEFAULT_PAGE, le=1000),
                    session: _access.Session = Depends(session_dep)):
        st = store.head if state is None else state
        ids = visible_ids(session, store.extent(concept, st), st)
        chunk, nxt = _page(ids, cursor, page_size)
        items = []
        for ident in chunk:
            obj = store.describe(ident, st)
            items.append({"id": ident, "concept": obj.concept,
                          "values": encode_values(obj.values)})
        return {"state": st, "items": items, "next_cursor": nxt, "total": len(ids)}

    @app.get("/objects/{ident}")
    def get_object(ident: int, state: Optional[int] = None,
                   session: _access.Session = Depends(session_dep)):
        st = store.head if state is None else state
        obj = store.describe(ident, st)  # unknown ids 404 before access checks
        require_read(session, ident, st)
        return {"state": st, "id": ident, "concept": obj.concept,
                "values": encode_values(obj.values)}

    # -- events ---------------------------------------------------------------

    @app.post("/events")
    def submit_event(body: dict, session: _access.Session = Depends(session_dep)):
        kind = body.get("kind")
        if not isinstance(kind, str):
            raise Validation("event kind required")
        state = store.submit(session, kind, body.get("payload") or {})
        return {"state": state}

    # -- query -----------------------------------------------------------------

    @app.post("/query")
    def query(body: dict, session: _access.Session = Depends(session_dep)):
        domain = body.get("domain")
        formula = body.get("formula")
        mode = body.get("mode", "extent")
        state = body.get("state")
        st = store.head if state is None else state
        if not isinstance(domain, str) or not isinstance(formula, str):
            raise Validation("query needs a domain and a formula")
        if mode == "individuate":
            ident = store.individuate(formula, domain, st)
            require_read(session, ident, st)
            obj = store.describe(ident, st)
            return {"state": st, "individual": ident, "concept": obj.concept,
                    "values": encode_values(obj.values)}
        if mode == "extent":
            from .formula import iter_satisfying, parse as parse_formula
            from .formula import check_formula

            f = parse_formula(formula)
            check_formula(f, domain, store, st)
            store.extent(domain, st)  # domain existence & visibility of state
            matches = visible_ids(session, iter_satisfying(f, store, domain, st), st)
            cursor = body.get("cursor")
            page_size = int(body.get("page_size") or DEFAULT_PAGE)
            chunk, nxt = _page(matches, cursor, page_size)
            return {"state": st, "items": chunk, "next_cursor": nxt, "total": len(matches)}
        raise Validation(f"unknown query mode {mode!r}")

    # -- metadata ---------------------------------------------------------------

    @app.post("/meta")
    def comprehend(body: dict, session: _access.Session = Depends(session_dep)):
        state = store.submit(session, "comprehend", body)
        content = store.content_at(state)
        meta = content.metas[body["name"]]
        return {"state": state, "meta_id": meta.id, "level": meta.level}

    @app.get("/meta")
    def list_metas(state: Optional[int] = None,
                   session: _access.Session = Depends(session_dep)):
        st = store.head if state is None else state
        content = store.content_at(st)
        out = []
        for name in sorted(content.metas):
            m = content.metas[name]
            out.append({"id": m.id, "name": m.name, "level": m.level,
                        "domain": m.domain, "formula": m.formula_text,
                        "defined_at": m.defined_at})
        return {"state": st, "metas": out}

    @app.get("/meta/{ident}/extent")
    def meta_extent(ident: int, state: Optional[int] = None,
                    cursor: Optional[str] = None,
                    page_size: int = Query(default=DEFAULT_PAGE, le=1000),
                    session: _access.Session = Depends(session_dep)):
        st = store.head if state is None else state
        ids = visible_ids(session, store.meta_extent(ident, st), st)
        chunk, nxt = _page(ids, cursor, page_size)
        return {"state": st, "items": chunk, "next_cursor": nxt, "total": len(ids)}

    # -- mandatory fields ---------------------------------------------------------

    @app.get("/mandatory")
    def mandatory(request: Request, concept: str, state: Optional[int] = None,
                  session: _access.Session = Depends(session_dep)):
        st = store.head if state is None else state
        draft = {
            k: v for k, v in request.query_params.items()
            if k not in ("concept", "state")
        }
        required = store.mandatory_fields(session, concept, st, draft)
        return {"state": st, "concept": concept, "required": sorted(required)}

    # -- appraisal ------------------------------------------------------------------

    def _params_from(body: Mapping[str, Any]) -> Optional[_appraisal.AppraisalParams]:
        raw = body.get("params")
        if raw is None:
            return None
        return _appraisal.AppraisalParams.from_mapping(raw)

    @app.post("/appraise")
    def appraise(body: dict, session: _access.Session = Depends(session_dep)):
        st = store.head if body.get("state") is None else _as_int(body["state"], "state")
        params = _params_from(body)
        raw_moves = body.get("moves") or ()
        if not isinstance(raw_moves, (list, tuple)):
            raise Validation("moves must be a list of [employee, position] pairs")
        moves = []
        for m in raw_moves:
            if not isinstance(m, (list, tuple)) or len(m) != 2:
                raise Validation("moves must be a list of [employee, position] pairs")
            moves.append((_as_int(m[0], "move employee"), _as_int(m[1], "move position")))
        if body.get("employee") is not None:
            score = _appraisal.appraise_employee(
                store, _as_int(body["employee"], "employee"), params, st)
            return {"state": st, "value": score.value, "breakdown": score.breakdown}
        if body.get("unit") is not None:
            score = _appraisal.appraise_unit(
                store, _as_int(body["unit"], "unit"), params, st, moves)
            return {"state": st, "value": score.value, "breakdown": score.breakdown}
        # whole-tree table for what-if exploration
        eff = (params or _appraisal.stored_params(store, st)).validate()
        nodes = _appraisal.build_unit_nodes(store, st, eff, moves)
        units = []
        for uid in sorted(nodes):
            score = _appraisal.unit_score(nodes[uid], eff)
            name = store.describe(uid, st).values.get("name")
            units.append({"unit": uid, "name": name, "value": score.value,
                          "breakdown": score.breakdown})
        return {"state": st, "units": units}

    @app.get("/vacancies/{ident}/candidates")
    def candidates(ident: int, state: Optional[int] = None,
                   session: _access.Session = Depends(session_dep)):
        st = store.head if state is None else state
        ranked = _appraisal.rank_candidates(store, ident, None, st)
        return {"state": st, "position": ident, "candidates": ranked}

    # -- packs ----------------------------------------------------------------------

    def _pack_from_body(body: Mapping[str, Any]) -> _packs.ComponentPack:
        if body.get("path"):
            path = body["path"]
            if not os.path.isabs(path):
                path = os.path.join(packs_dir, path)
            return _packs.load_pack(path)
        if body.get("name"):
            return _packs.load_pack(
                os.path.join(packs_dir, _packs.pack_filename(body["name"])))
        raise Validation("pack analysis needs a path or a shipped pack name")

    @app.post("/packs/analyze")
    def analyze(body: dict, session: _access.Session = Depends(session_dep)):
        pack = _pack_from_body(body)
        plan = _packs.analyze_pack(store, pack)
        return {"state": store.head, "plan": plan.to_dict()}

    @app.post("/packs/apply")
    def apply(body: dict, session: _access.Session = Depends(session_dep)):
        pack = _pack_from_body(body)
        expect = body.get("expect_head")
        plan = _packs.analyze_pack(store, pack,
                                   None if expect is None else _as_int(expect, "expect_head"))
        state = _packs.apply_plan(store, session, plan)
        return {"state": state, "applied": not plan.is_empty()}

    # -- history -----------------------------------------------------------------------

    @app.get("/state")
    def state_info():
        return {"state": store.head}

    @app.post("/rollback")
    def rollback(body: dict, session: _access.Session = Depends(session_dep)):
        to = body.get("to")
        if not isinstance(to, int):
            raise Validation("rollback needs an integer target state")
        state = store.rollback(session, to)
        return {"state": state, "to": to}

    @app.get("/log")
    def log_page(request: Request, session: _access.Session = Depends(session_dep)):
        if not session.profile.metadata_admin:
            raise AccessDenied("log access requires metadata administration rights")
        frm = _as_int(request.query_params.get("from", 1), "from")
        to = _as_int(request.query_params.get("to", store.head), "to")
        frm = max(1, frm)
        to = min(store.head, to)
        recs = [r.to_dict() for r in store.log.records[frm - 1:to]]
        return {"state": store.head, "from": frm, "to": to, "records": recs}

    # -- static console -----------------------------------------------------------------

    if frontend_dir and os.path.isdir(frontend_dir):
        from fastapi.staticfiles import StaticFiles

        app.mount("/console", StaticFiles(directory=frontend_dir, html=True),
                  name="console")

    return app


def serve(config: ServerConfig) -> None:
    import uvicorn

    store = Store(
        data_dir=config.data_dir,
        tower_cap=config.tower_cap,
        session_ttl=config.session_ttl,
    )
    store.verify_chain()
    app = create_app(store, packs_dir=config.packs_dir, frontend_dir=config.frontend_dir)
    try:
        uvicorn.run(app, host="127.0.0.1", port=config.port, log_level="warning")
    finally:
        store.close()
