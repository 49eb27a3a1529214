"""HTTP JSON API for live pre-screening sessions.

Endpoints:
    POST /sessions                         create a session, returns baseline
    GET  /sessions/{id}                    full session state
    GET  /sessions/{id}/recommendation     next edge to query, with context
    POST /sessions/{id}/responses          record an accept/reject response
    POST /sessions/{id}/finalize           apply the policy, freeze the session
    GET  /graphs, POST /graphs, GET /graphs/{id}

All bodies and errors are application/json; errors carry {code, message,
detail}. A static bearer token is enforced when PRESCREEN_API_TOKEN is set
(or a token is passed to create_app); there is no further auth.
"""

from __future__ import annotations

import os
from typing import Any, Optional

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .graph import ExchangeGraph, GraphValidationError
from .sessions import SessionError, SessionStore

TOKEN_ENV = "PRESCREEN_API_TOKEN"


class CreateSessionRequest(BaseModel):
    graph_id: str
    distribution: dict = Field(default_factory=lambda: {"kind": "simple"})
    policy: str = "max_weight"
    method: str = "greedy"
    budget: int = 3
    per_vertex_cap: Optional[int] = None
    seed: int = 0
    mcts_iterations: Optional[int] = None
    mcts_lookahead: Optional[int] = None
    max_cycle_len: int = 3
    max_chain_len: int = 3


class ResponseRequest(BaseModel):
    edge_id: int
    response: str


class UploadGraphRequest(BaseModel):
    graph: dict
    graph_id: Optional[str] = None


def create_app(
    store: SessionStore | None = None,
    storage_dir: str | None = None,
    token: str | None = None,
) -> FastAPI:
    app = FastAPI(title="prescreen session service")
    app.state.store = store or SessionStore(storage_dir=storage_dir)
    app.state.token = token if token is not None else os.environ.get(TOKEN_ENV)

    def _error(status: int, code: str, message: str, detail: Any = None) -> JSONResponse:
        return JSONResponse(
            status_code=status,
            content={"code": code, "message": message, "detail": detail},
        )

    @app.exception_handler(SessionError)
    async def _session_error(request: Request, exc: SessionError):
        return _error(exc.status, exc.code, exc.message, exc.detail)

    @app.exception_handler(GraphValidationError)
    async def _graph_error(request: Request, exc: GraphValidationError):
        return _error(400, "invalid_graph", "graph failed validation", exc.violations)

    @app.exception_handler(RequestValidationError)
    async def _validation_error(request: Request, exc: RequestValidationError):
        return _error(400, "validation_error", "invalid request body", exc.errors())

    @app.middleware("http")
    async def _check_token(request: Request, call_next):
        expected = app.state.token
        if expected:
            supplied = request.headers.get("authorization", "")
            if supplied != f"Bearer {expected}":
                return _error(401, "unauthorized", "missing or bad bearer token")
        return await call_next(request)

    @app.get("/graphs")
    def list_graphs():
        return app.state.store.list_graphs()

    @app.post("/graphs", status_code=201)
    def upload_graph(body: UploadGraphRequest):
        graph = ExchangeGraph.from_json_dict(body.graph)
        graph_id = app.state.store.add_graph(graph, body.graph_id)
        return {"id": graph_id}

    @app.get("/graphs/{graph_id}")
    def get_graph(graph_id: str):
        return app.state.store.get_graph(graph_id).to_json_dict()

    @app.post("/sessions", status_code=201)
    def create_session(body: CreateSessionRequest):
        config = body.model_dump(exclude_none=True)
        graph_id = config.pop("graph_id")
        session = app.state.store.create_session(graph_id, config)
        return session.snapshot()

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return app.state.store.get_session(session_id).snapshot()

    @app.get("/sessions/{session_id}/recommendation")
    def get_recommendation(session_id: str):
        session = app.state.store.get_session(session_id)
        return {"recommendation": session.recommendation()}

    @app.post("/sessions/{session_id}/responses")
    def post_response(session_id: str, body: ResponseRequest):
        return app.state.store.record_response(session_id, body.edge_id, body.response)

    @app.post("/sessions/{session_id}/finalize")
    def post_finalize(session_id: str):
        return app.state.store.finalize(session_id)

    return app


def main() -> None:  # pragma: no cover - convenience launcher
    import argparse

    import uvicorn

    parser = argparse.ArgumentParser(description="run the pre-screening session service")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8600)
    parser.add_argument("--storage-dir", default=None)
    args = parser.parse_args()
    uvicorn.run(create_app(storage_dir=args.storage_dir), host=args.host, port=args.port)


if __name__ == "__main__":  # pragma: no cover
    main()
