"""HTTP inference service: chat sessions over a loaded checkpoint.

Sessions live in memory with TTL eviction; the context fed to generation
is exactly the session's turn history. Model weights are read-only after
startup, so concurrent requests only contend on the session map.
"""

import threading
import time
import uuid
from dataclasses import dataclass, field

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from .data import tokenize


@dataclass
class Session:
    id: str
    turns: list[tuple[str, list[str]]] = field(default_factory=list)  # (speaker, tokens)
    created_at: float = field(default_factory=time.time)
    touched_at: float = field(default_factory=time.time)


class SessionStore:
    def __init__(self, ttl_seconds: float = 3600.0):
        self.ttl = ttl_seconds
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    def create(self) -> Session:
        session = Session(id=uuid.uuid4().hex)
        with self._lock:
            self._evict()
            self._sessions[session.id] = session
        return session

    def get(self, session_id: str) -> Session | None:
        with self._lock:
            self._evict()
            session = self._sessions.get(session_id)
            if session is not None:
                session.touched_at = time.time()
            return session

    def _evict(self) -> None:
        cutoff = time.time() - self.ttl
        stale = [k for k, s in self._sessions.items() if s.touched_at < cutoff]
        for k in stale:
            del self._sessions[k]


class MessageIn(BaseModel):
    text: str


def create_app(model, ttl_seconds: float = 3600.0, beam_width: int | None = None) -> FastAPI:
    app = FastAPI(title="kgdial inference service")
    store = SessionStore(ttl_seconds)
    app.state.model = model
    app.state.store = store

    @app.post("/sessions", status_code=201)
    def create_session():
        session = store.create()
        return {"session_id": session.id}

    @app.post("/sessions/{session_id}/message")
    def post_message(session_id: str, message: MessageIn):
        session = store.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail="unknown session")
        text = message.text.strip()
        if not text:
            raise HTTPException(status_code=400, detail="empty message")
        query = tokenize(text)
        history = [tokens for _, tokens in session.turns]
        result = model.generate_response(history, query, beam_width=beam_width)
        session.turns.append(("user", query))
        session.turns.append(("system", result.surface))
        return {
            "response": " ".join(result.surface),
            "intermediate": " ".join(result.intermediate),
            "entity": result.entity_label,
            "relations": result.relations,
            "objects": result.objects,
            "low_confidence": result.low_confidence,
        }

    return app
