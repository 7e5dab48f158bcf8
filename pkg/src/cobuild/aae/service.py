"""The after-action review backend: mission data, frames, markers, chat.

``ReviewService`` is the plain-Python surface (used directly by tests and the
headless tooling); ``create_app`` wraps it in FastAPI with pydantic models on
every request and response.  Sessions live in memory, optionally mirrored to
``persist_dir`` as JSON so a restart keeps conversations.
"""

from __future__ import annotations

import io
import json
import re
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, Query, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, PlainTextResponse
from pydantic import BaseModel, Field

from ..errors import CobuildError, LlmUnavailable, TimelineError
from ..llm import LanguageModelClient
from ..mission_log import MissionTimeline, parse_timeline
from ..rendering import render_frame
from ..replay import MARKER_KINDS, Marker, extract_markers, reconstruct
from .prompts import DEFAULT_BUDGET_CHARS, PromptBundle, assemble_prompt


@dataclass
class ChatSession:
    session_id: str
    mission_id: str
    history: list[tuple[str, str]] = field(default_factory=list)


@dataclass
class _Mission:
    mission_id: str
    timeline: MissionTimeline
    timeline_text: str
    context_text: str
    frames_dir: Path | None


class ReviewService:
    def __init__(
        self,
        missions_dir,
        llm: LanguageModelClient,
        *,
        persist_dir=None,
        prompt_budget_chars: int = DEFAULT_BUDGET_CHARS,
    ):
        self.missions_dir = Path(missions_dir)
        self.llm = llm
        self.persist_dir = Path(persist_dir) if persist_dir else None
        self.prompt_budget_chars = prompt_budget_chars
        self._missions: dict[str, _Mission] = {}
        self._sessions: dict[str, ChatSession] = {}
        self._locks: dict[str, threading.Lock] = {}
        if self.persist_dir:
            self.persist_dir.mkdir(parents=True, exist_ok=True)
            for path in sorted(self.persist_dir.glob("session-*.json")):
                data = json.loads(path.read_text())
                session = ChatSession(
                    session_id=data["session_id"],
                    mission_id=data["mission_id"],
                    history=[tuple(pair) for pair in data["history"]],
                )
                self._sessions[session.session_id] = session
                self._locks[session.session_id] = threading.Lock()

    # -- mission data -----------------------------------------------------

    def list_missions(self) -> list[dict]:
        out = []
        for timeline_path in sorted(self.missions_dir.glob("*/timeline.json")):
            mission_id = timeline_path.parent.name
            try:
                mission = self._load(mission_id)
            except CobuildError:
                continue  # unreadable mission directories are skipped, not fatal
            footer = mission.timeline.footer or {}
            outcome = footer.get("outcome", {})
            out.append(
                {
                    "id": mission_id,
                    "status": outcome.get("status", "unknown"),
                    "ended_at": outcome.get("ended_at"),
                    "final_completion": outcome.get("final_completion"),
                    "events": len(mission.timeline.events),
                }
            )
        return out

    def _load(self, mission_id: str) -> _Mission:
        if not re.fullmatch(r"[A-Za-z0-9._-]+", mission_id):
            raise CobuildError("mission-not-found", mission_id)
        cached = self._missions.get(mission_id)
        if cached is not None:
            return cached
        mission_dir = self.missions_dir / mission_id
        timeline_path = mission_dir / "timeline.json"
        if not timeline_path.exists():
            raise CobuildError("mission-not-found", mission_id)
        timeline = parse_timeline(timeline_path)
        context_path = mission_dir / "context.md"
        if not context_path.exists():
            raise CobuildError("context-missing", mission_id)
        context_text = context_path.read_text(encoding="utf-8")
        if not context_text.strip():
            raise CobuildError("context-missing", f"{mission_id}: empty context doc")
        frames_dir = mission_dir / "frames"
        mission = _Mission(
            mission_id=mission_id,
            timeline=timeline,
            timeline_text=timeline_path.read_text(encoding="utf-8"),
            context_text=context_text,
            frames_dir=frames_dir if frames_dir.is_dir() else None,
        )
        self._missions[mission_id] = mission
        return mission

    def timeline_text(self, mission_id: str) -> str:
        return self._load(mission_id).timeline_text

    def context_text(self, mission_id: str) -> str:
        return self._load(mission_id).context_text

    def markers(self, mission_id: str, kinds: set[str] | None = None) -> list[Marker]:
        return extract_markers(self._load(mission_id).timeline, kinds)

    def frame_png(self, mission_id: str, t: float, view: str) -> bytes:
        mission = self._load(mission_id)
        cache_path = None
        if mission.frames_dir is not None:
            cache_path = mission.frames_dir / f"t{t:010.2f}-{view}.png"
            if cache_path.exists():
                return cache_path.read_bytes()
        snapshot = reconstruct(mission.timeline, t)
        image = render_frame(snapshot, view)
        buffer = io.BytesIO()
        image.save(buffer, format="PNG")
        data = buffer.getvalue()
        if cache_path is not None:
            cache_path.write_bytes(data)
        return data

    # -- sessions ----------------------------------------------------------

    def create_session(self, mission_id: str) -> ChatSession:
        self._load(mission_id)  # raises if mission or context is missing
        session = ChatSession(session_id=uuid.uuid4().hex, mission_id=mission_id)
        self._sessions[session.session_id] = session
        self._locks[session.session_id] = threading.Lock()
        self._persist(session)
        return session

    def get_session(self, session_id: str) -> ChatSession:
        session = self._sessions.get(session_id)
        if session is None:
            raise CobuildError("session-not-found", session_id)
        return session

    def assemble(self, session: ChatSession, query: str, playhead_s: float) -> PromptBundle:
        mission = self._load(session.mission_id)
        return assemble_prompt(
            tuple(session.history),
            query,
            playhead_s,
            context_text=mission.context_text,
            timeline=mission.timeline,
            budget_chars=self.prompt_budget_chars,
        )

    def query(self, session_id: str, text: str, playhead_s: float) -> str:
        if not text.strip():
            raise CobuildError("empty-query")
        session = self.get_session(session_id)
        with self._locks[session_id]:
            bundle = self.assemble(session, text, playhead_s)
            answer = self.llm.complete(bundle.render())  # history untouched on failure
            session.history.append(("user", text))
            session.history.append(("assistant", answer))
            self._persist(session)
        return answer

    def _persist(self, session: ChatSession) -> None:
        if self.persist_dir is None:
            return
        path = self.persist_dir / f"session-{session.session_id}.json"
        path.write_text(
            json.dumps(
                {
                    "session_id": session.session_id,
                    "mission_id": session.mission_id,
                    "history": session.history,
                },
                indent=1,
            )
        )


# ---------------------------------------------------------------------------
# HTTP layer
# ---------------------------------------------------------------------------


class MissionSummary(BaseModel):
    id: str
    status: str
    ended_at: float | None = None
    final_completion: float | None = None
    events: int


class MarkerModel(BaseModel):
    timestamp: float
    label: str
    kind: str


class SessionCreateRequest(BaseModel):
    mission_id: str


class SessionCreated(BaseModel):
    session_id: str
    mission_id: str


class QueryRequest(BaseModel):
    text: str
    playhead_s: float = Field(ge=0)


class QueryResponse(BaseModel):
    answer: str
    session_id: str
    history_length: int


_HTTP_STATUS = {
    "mission-not-found": 404,
    "session-not-found": 404,
    "context-missing": 404,
    "empty-query": 400,
    "t-out-of-range": 400,
    "unknown-viewpoint": 400,
    "schema-invalid": 500,
    "llm-unavailable": 503,
}


def create_app(
    missions_dir,
    llm: LanguageModelClient,
    *,
    persist_dir=None,
    prompt_budget_chars: int = DEFAULT_BUDGET_CHARS,
) -> FastAPI:
    service = ReviewService(
        missions_dir, llm, persist_dir=persist_dir, prompt_budget_chars=prompt_budget_chars
    )
    app = FastAPI(title="after-action review service")
    app.state.service = service
    # The browser client is served from the game server's origin.
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    @app.exception_handler(CobuildError)
    async def _cobuild_error(request, exc: CobuildError):
        status = _HTTP_STATUS.get(exc.code, 500)
        return JSONResponse(
            status_code=status, content={"code": exc.code, "detail": exc.detail}
        )

    @app.get("/missions", response_model=list[MissionSummary])
    def missions():
        return service.list_missions()

    @app.get("/missions/{mission_id}/timeline")
    def timeline(mission_id: str):
        return Response(
            content=service.timeline_text(mission_id), media_type="application/json"
        )

    @app.get("/missions/{mission_id}/context", response_class=PlainTextResponse)
    def context(mission_id: str):
        return service.context_text(mission_id)

    @app.get("/missions/{mission_id}/markers", response_model=list[MarkerModel])
    def markers(mission_id: str, kinds: str | None = Query(default=None)):
        wanted = None
        if kinds:
            wanted = {k.strip() for k in kinds.split(",") if k.strip()}
        try:
            found = service.markers(mission_id, wanted)
        except TimelineError as exc:
            return JSONResponse(status_code=400, content={"detail": exc.detail})
        return [MarkerModel(timestamp=m.timestamp, label=m.label, kind=m.kind) for m in found]

    @app.get("/missions/{mission_id}/frame")
    def frame(mission_id: str, t: float = Query(ge=0), view: str = "topdown"):
        png = service.frame_png(mission_id, t, view)
        return Response(content=png, media_type="image/png")

    @app.post("/sessions", response_model=SessionCreated)
    def create_session(request: SessionCreateRequest):
        session = service.create_session(request.mission_id)
        return SessionCreated(session_id=session.session_id, mission_id=session.mission_id)

    @app.post("/sessions/{session_id}/query", response_model=QueryResponse)
    def query(session_id: str, request: QueryRequest):
        answer = service.query(session_id, request.text, request.playhead_s)
        session = service.get_session(session_id)
        return QueryResponse(
            answer=answer, session_id=session_id, history_length=len(session.history)
        )

    @app.get("/")
    def index():
        return {"service": "after-action review", "marker_kinds": MARKER_KINDS}

    return app
