"""Session HTTP API: a human plays the user role against the live planner.

Each posted user message triggers a fresh search for the next system act.
Lookahead playouts run against the configured environment's simulated user;
the committed turn uses the human's actual words. Turn requests carry a
client nonce so browser retries cannot trigger a second search.
"""

from __future__ import annotations

import json
import random
import threading
import time
import uuid
from contextlib import asynccontextmanager
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .core import (
    DialogueState,
    NrpaParams,
    ScenarioConfig,
    Speaker,
    InvariantError,
    Terminal,
)
from .envs import Environment
from .evaluation import EpisodeRecord, TurnEntry
from .reward import RewardSpec, classify_terminal, evaluate
from .search import SearchAbort, plan_next_act


@dataclass
class ScenarioBundle:
    scenario: ScenarioConfig
    env: Environment


@dataclass
class ServiceSettings:
    bundles: dict[str, ScenarioBundle]
    default_params: NrpaParams = field(default_factory=NrpaParams)
    reward_spec: RewardSpec = field(default_factory=RewardSpec)
    persist_dir: Path | None = None

    @classmethod
    def from_run_config(cls, config) -> "ServiceSettings":
        from .cli import _build_jobs

        bundles = {}
        for scenario, env in _build_jobs(config):
            bundles[scenario.scenario_id] = ScenarioBundle(scenario, env)
        return cls(
            bundles=bundles,
            default_params=config.params,
            reward_spec=config.reward,
            persist_dir=config.persist_dir,
        )


@dataclass
class Session:
    id: str
    bundle: ScenarioBundle
    state: DialogueState
    params: NrpaParams
    created_at: float
    updated_at: float
    reward: float | None = None
    turns: list[TurnEntry] = field(default_factory=list)
    stats_history: list[dict] = field(default_factory=list)
    nonce_results: dict[str, dict] = field(default_factory=dict)
    lock: threading.Lock = field(default_factory=threading.Lock)

    @property
    def status(self) -> str:
        return self.state.terminal.value

    def transcript(self) -> list[dict]:
        return [u.to_json_dict() for u in self.state.history]

    def to_view(self) -> dict:
        return {
            "session_id": self.id,
            "scenario_id": self.bundle.scenario.scenario_id,
            "dataset": self.bundle.scenario.dataset.value,
            "status": self.status,
            "terminal": self.state.terminal is not Terminal.ONGOING,
            "reward": self.reward,
            "turn_count": self.state.turn_count,
            "max_turns": self.bundle.scenario.max_turns,
            "params": self.params.to_json_dict(),
            "transcript": self.transcript(),
            "stats": self.stats_history,
            "created_at": self.created_at,
            "updated_at": self.updated_at,
        }

    def to_episode_record(self) -> EpisodeRecord:
        finished = self.state.terminal is not Terminal.ONGOING
        return EpisodeRecord(
            scenario_id=self.bundle.scenario.scenario_id,
            dataset=self.bundle.scenario.dataset.value,
            params=self.params.to_json_dict(),
            turns=self.turns,
            terminal=self.state.terminal.value,
            turns_used=self.state.turn_count,
            reward=self.reward,
            rng_seed=self.params.rng_seed,
            aborted=not finished,
        )


class CreateSessionBody(BaseModel):
    scenario_id: str
    params: dict | None = None


class MessageBody(BaseModel):
    text: str
    nonce: str
    params: dict | None = None


def _live_opening(scenario: ScenarioConfig) -> tuple:
    """Trim the seeded opening to end on a system turn.

    Any scripted user part of the opening is dropped in live sessions; the
    human supplies it themselves.
    """
    opening = list(scenario.opening)
    while opening and opening[-1].speaker is Speaker.USER:
        opening.pop()
    return tuple(opening)


def create_app(settings: ServiceSettings) -> FastAPI:
    sessions: dict[str, Session] = {}
    store_lock = threading.Lock()

    def _persist(session: Session) -> None:
        if settings.persist_dir is None:
            return
        settings.persist_dir.mkdir(parents=True, exist_ok=True)
        path = settings.persist_dir / f"{session.id}.json"
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(session.to_episode_record().to_json_dict(), fh, sort_keys=True)
            fh.write("\n")

    @asynccontextmanager
    async def lifespan(_app: FastAPI):
        yield
        for session in sessions.values():
            _persist(session)

    app = FastAPI(title="dialoplan service", lifespan=lifespan)
    # The chat UI is a static page on another origin; it talks only to this API.
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    def _error(status: int, message: str) -> JSONResponse:
        return JSONResponse(status_code=status, content={"error": message})

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "sessions": len(sessions)}

    @app.post("/sessions", status_code=201)
    def create_session(body: CreateSessionBody):
        bundle = settings.bundles.get(body.scenario_id)
        if bundle is None:
            return _error(404, f"unknown scenario: {body.scenario_id}")
        params = settings.default_params
        if body.params:
            doc = params.to_json_dict()
            doc.update(body.params)
            try:
                params = NrpaParams.from_json_dict(doc)
            except InvariantError as exc:
                return _error(422, str(exc))
        scenario = bundle.scenario
        state = DialogueState(
            scenario=scenario, history=_live_opening(scenario), turn_count=0
        )
        now = time.time()
        session = Session(
            id=uuid.uuid4().hex[:12],
            bundle=bundle,
            state=state,
            params=params,
            created_at=now,
            updated_at=now,
        )
        with store_lock:
            sessions[session.id] = session
        return {
            "session_id": session.id,
            "scenario_id": scenario.scenario_id,
            "dataset": scenario.dataset.value,
            "max_turns": scenario.max_turns,
            "params": params.to_json_dict(),
            "opening": [u.to_json_dict() for u in state.history],
        }

    @app.post("/sessions/{session_id}/message")
    def post_user_message(session_id: str, body: MessageBody):
        session = sessions.get(session_id)
        if session is None:
            return _error(404, f"unknown session: {session_id}")
        if body.nonce in session.nonce_results:
            return {**session.nonce_results[body.nonce], "duplicate": True}
        if session.state.terminal is not Terminal.ONGOING:
            return _error(409, "session is terminal; no further messages accepted")
        if not session.lock.acquire(blocking=False):
            return _error(409, "a turn is already in flight for this session")
        try:
            if body.params:
                doc = session.params.to_json_dict()
                doc.update(body.params)
                try:
                    session.params = NrpaParams.from_json_dict(doc)
                except InvariantError as exc:
                    return _error(422, str(exc))
            payload = _play_turn(session, body.text)
            session.nonce_results[body.nonce] = payload
            session.updated_at = time.time()
            if payload["terminal"]:
                _persist(session)
            return payload
        except SearchAbort as exc:
            return _error(502, f"environment failure during planning: {exc}")
        finally:
            session.lock.release()

    def _play_turn(session: Session, text: str) -> dict:
        bundle = session.bundle
        scenario = bundle.scenario
        spec = settings.reward_spec
        turn_rng = random.Random(f"{session.params.rng_seed}:{session.state.turn_count}")
        state = session.state.with_user_reply(text)

        signal = bundle.env.classify_user_message(state, turn_rng)
        terminal = classify_terminal(state, signal.kind, scenario.max_turns)
        if terminal is not Terminal.ONGOING:
            state = state.finished(terminal)
            session.state = state
            session.reward = evaluate(state, spec)
            return {
                "chosen_act": None,
                "act_label": None,
                "system_reply": None,
                "stats": None,
                "terminal": True,
                "status": state.terminal.value,
                "reward": session.reward,
                "turn_count": state.turn_count,
            }

        act_id, stats = plan_next_act(state, bundle.env, session.params, turn_rng, spec)
        reply = bundle.env.system_utterance(state, act_id, turn_rng)
        state = state.with_system_turn(act_id, reply)
        stats_doc = stats.to_json_dict()
        session.turns.append(TurnEntry(act_id, reply, text, stats_doc))
        session.stats_history.append(stats_doc)

        terminal_flag = False
        if state.turn_count >= scenario.max_turns:
            state = state.finished(Terminal.TURN_BUDGET)
            session.reward = evaluate(state, spec)
            terminal_flag = True
        session.state = state
        return {
            "chosen_act": act_id,
            "act_label": scenario.action_space.act(act_id).label,
            "system_reply": reply,
            "stats": stats_doc,
            "terminal": terminal_flag,
            "status": state.terminal.value,
            "reward": session.reward,
            "turn_count": state.turn_count,
        }

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        session = sessions.get(session_id)
        if session is None:
            return _error(404, f"unknown session: {session_id}")
        return session.to_view()

    @app.get("/sessions/{session_id}/stats")
    def get_stats(session_id: str):
        session = sessions.get(session_id)
        if session is None:
            return _error(404, f"unknown session: {session_id}")
        return {
            "session_id": session.id,
            "per_turn": session.stats_history,
            "in_flight": session.lock.locked(),
        }

    return app
