"""HTTP front end for live sessions.

Endpoints (JSON bodies):
    GET  /health
    POST /sessions                       {risk, roster, strategy?, session_id?}
    GET  /sessions/{id}/next             outstanding or next instruction
    POST /sessions/{id}/outcome          {instruction_id, outcome: "+"|"-"}
    GET  /sessions/{id}/statuses
    GET  /sessions/{id}/history

Errors carry {"error": {"code", "message"}}; sequencing conflicts are 409.
Sessions persist in the store directory and are reloaded on demand, so a
restart preserves every acknowledged outcome.
"""

from __future__ import annotations

import os
import threading
import uuid
from typing import Dict, List, Optional

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .errors import (DomainError, InvalidStrategy, NotFound, ParseError,
                     PersistError, PoolTestError, RosterError,
                     SequencingError)
from .session import Session, SessionStore

_STATUS = {
    NotFound: 404,
    SequencingError: 409,
    PersistError: 500,
    RosterError: 400,
    DomainError: 400,
    InvalidStrategy: 400,
    ParseError: 400,
}


class RosterEntry(BaseModel):
    id: str
    stratum: str = "default"
    urgent: bool = False


class RiskDoc(BaseModel):
    x: float
    y: Optional[float] = None


class CreateBody(BaseModel):
    risk: RiskDoc
    roster: List[RosterEntry]
    strategy: Optional[str] = None
    session_id: Optional[str] = None


class OutcomeBody(BaseModel):
    instruction_id: int
    outcome: str = Field(pattern=r"^[+-]$")


def choose_strategy(risk: RiskDoc) -> str:
    if risk.y is not None:
        from .mixed import mixed_select
        return mixed_select(risk.x, risk.y).name
    from .costs import select_best
    return select_best(risk.x).name


def create_app(data_dir: str) -> FastAPI:
    app = FastAPI(title="pooltest sessions")
    store = SessionStore(data_dir)
    sessions: Dict[str, Session] = {}
    locks: Dict[str, threading.Lock] = {}
    registry_lock = threading.Lock()

    def get_session(session_id: str) -> Session:
        with registry_lock:
            if session_id not in sessions:
                sessions[session_id] = Session.load(session_id, store)
                locks[session_id] = threading.Lock()
            return sessions[session_id]

    def lock_for(session_id: str) -> threading.Lock:
        with registry_lock:
            return locks.setdefault(session_id, threading.Lock())

    @app.exception_handler(PoolTestError)
    async def _on_error(request: Request, exc: PoolTestError):
        code = next((s for t, s in _STATUS.items() if isinstance(exc, t)), 400)
        return JSONResponse(
            status_code=code,
            content={"error": {"code": type(exc).__name__,
                               "message": str(exc)}})

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.post("/sessions", status_code=201)
    def create_session(body: CreateBody):
        if not body.roster:
            raise RosterError("empty roster")
        session_id = body.session_id or uuid.uuid4().hex
        strategy = body.strategy or choose_strategy(body.risk)
        risk_doc = {"x": body.risk.x}
        if body.risk.y is not None:
            risk_doc["y"] = body.risk.y
        roster_doc = [e.model_dump() for e in body.roster]
        with registry_lock:
            session = Session.create(session_id, strategy, risk_doc,
                                     roster_doc, store)
            sessions[session_id] = session
            locks[session_id] = threading.Lock()
        return {"session_id": session_id, "strategy": strategy}

    @app.get("/sessions/{session_id}/next")
    def next_instruction(session_id: str):
        session = get_session(session_id)
        with lock_for(session_id):
            instr = session.current_or_next_instruction()
            if instr is None:
                return {"complete": True, "statuses": session.statuses()}
            return {"complete": False, "instruction": instr.to_doc()}

    @app.post("/sessions/{session_id}/outcome")
    def submit_outcome(session_id: str, body: OutcomeBody):
        session = get_session(session_id)
        with lock_for(session_id):
            delta = session.submit_outcome(body.instruction_id,
                                           body.outcome == "+")
            return {"resolved": delta.resolved, "repooled": delta.repooled,
                    "complete": delta.complete}

    @app.get("/sessions/{session_id}/statuses")
    def statuses(session_id: str):
        session = get_session(session_id)
        with lock_for(session_id):
            return session.snapshot()

    @app.get("/sessions/{session_id}/history")
    def history(session_id: str):
        session = get_session(session_id)
        with lock_for(session_id):
            return {"events": session.history}

    return app


def serve(port: int, data_dir: str) -> None:
    import uvicorn
    uvicorn.run(create_app(data_dir), host="127.0.0.1", port=port,
                log_level="warning")


def default_data_dir() -> str:
    return os.environ.get("POOLTEST_DATA_DIR", "./pooltest-sessions")
