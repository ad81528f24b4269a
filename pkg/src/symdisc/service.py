"""HTTP session API for human-in-the-loop design campaigns.

The engine proposes the next measurement point; the experimenter performs
the measurement and submits the response; beliefs update and the cycle
repeats.  Sessions persist as append-only JSONL event logs (config, the
proposal/observation sequence, seeds); on restart the belief is rebuilt by
replaying the log, which is exact because every update is seeded.

Endpoints (JSON bodies; errors are ``{"error": ..., "field"?: ...}``):

    POST /sessions                  create from a config (no truth section)
    GET  /sessions/{id}             summary
    POST /sessions/{id}/propose     next design point (idempotent per round)
    POST /sessions/{id}/observe     submit the measured response
    GET  /sessions/{id}/state       full history + current proposal/density
"""

from __future__ import annotations

import json
import math
import threading
import uuid
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from . import design
from .harness import ConfigError, config_from_dict
from .hmc import empirical_stats
from .predictive import predictive_curve

__all__ = ["create_app"]

AWAITING_PROPOSAL = "awaiting_proposal"
AWAITING_OBSERVATION = "awaiting_observation"


def _seed_for(seed, round_index, phase):
    return design._derived_seed(seed, round_index, phase)


class Session:
    """In-memory state for one campaign, backed by an event log."""

    def __init__(self, session_id, raw_config, store_dir):
        self.id = session_id
        self.raw_config = raw_config
        self.cfg = config_from_dict(raw_config, allow_truth=False)
        self.problem = _problem_from(self.cfg)
        self.lock = threading.Lock()
        self.path = Path(store_dir) / f"{session_id}.jsonl"
        self.belief = None
        self.proposal = None
        self.rounds = []

    @property
    def phase(self):
        return AWAITING_OBSERVATION if self.proposal is not None else AWAITING_PROPOSAL

    def initialize(self):
        self.belief = design.init_belief(
            self.problem,
            self.cfg.hmc,
            seed=_seed_for(self.cfg.seed, 0, 0),
            prior_probs=self.cfg.prior_probs,
        )

    def append_event(self, event):
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(event) + "\n")

    def compute_proposal(self):
        prop = design.propose(
            self.problem, self.belief, seed=_seed_for(self.cfg.seed, self.belief.round + 1, 0)
        )
        self.proposal = {"x_star": list(map(float, prop.x)), "score": float(prop.score)}

    def apply_observation(self, y):
        x = np.asarray(self.proposal["x_star"], dtype=float)
        score = self.proposal["score"]
        self.belief = design.apply_observation(
            self.problem, self.belief, x, y, self.cfg.hmc,
            seed=_seed_for(self.cfg.seed, self.belief.round + 1, 1),
        )
        self.rounds.append(
            {
                "round": self.belief.round,
                "x": list(map(float, x)),
                "y": float(y),
                "model_probs": list(map(float, self.belief.model_probs)),
                "per_param_variance": self.variances(),
                "score": score,
            }
        )
        self.proposal = None

    def variances(self):
        return [float(empirical_stats(ss)[2]) for ss in self.belief.sample_sets]

    def summary(self):
        return {
            "id": self.id,
            "phase": self.phase,
            "round": self.belief.round,
            "model_names": [m.name for m in self.problem.models],
            "model_probs": list(map(float, self.belief.model_probs)),
            "per_param_variance": self.variances(),
        }

    def state(self):
        out = self.summary()
        out["config"] = self.raw_config
        out["input_names"] = list(self.problem.input_names)
        out["history"] = self.rounds
        out["proposal"] = self.proposal
        if self.proposal is not None:
            ys, ps = predictive_curve(
                self.problem, self.belief, np.asarray(self.proposal["x_star"])
            )
            out["density"] = {"y": [float(v) for v in ys], "p": [float(v) for v in ps]}
        return out


def _problem_from(cfg):
    from .harness import build_problem

    return build_problem(cfg)


class SessionStore:
    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._sessions = {}
        self._lock = threading.Lock()

    def create(self, raw_config):
        session_id = uuid.uuid4().hex[:12]
        session = Session(session_id, raw_config, self.root)
        session.initialize()
        session.append_event({"event": "created", "config": raw_config})
        with self._lock:
            self._sessions[session_id] = session
        return session

    def get(self, session_id):
        with self._lock:
            session = self._sessions.get(session_id)
        if session is not None:
            return session
        path = self.root / f"{session_id}.jsonl"
        if not path.is_file():
            return None
        session = self._replay(session_id, path)
        with self._lock:
            self._sessions.setdefault(session_id, session)
        return session

    def _replay(self, session_id, path):
        session = None
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                event = json.loads(line)
                if event["event"] == "created":
                    session = Session(session_id, event["config"], self.root)
                    session.initialize()
                elif event["event"] == "proposal":
                    session.proposal = {"x_star": event["x"], "score": event["score"]}
                elif event["event"] == "observed":
                    session.apply_observation(event["y"])
        if session is None:
            raise ValueError(f"session log {path} has no creation event")
        return session


def _error(status, message, field=None):
    body = {"error": message}
    if field:
        body["field"] = field
    return JSONResponse(status_code=status, content=body)


def create_app(store_dir="sessions", ui_dir=None):
    """FastAPI app serving the session API (and the dashboard when built)."""
    app = FastAPI(title="symdisc sessions")
    store = SessionStore(store_dir)

    @app.post("/sessions")
    async def create_session(request: Request):
        try:
            raw = await request.json()
        except Exception:
            return _error(400, "request body must be a JSON config object")
        try:
            session = store.create(raw)
        except ConfigError as err:
            return _error(400, str(err), err.field)
        return JSONResponse(status_code=201, content=session.summary())

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        session = store.get(session_id)
        if session is None:
            return _error(404, f"unknown session {session_id!r}")
        with session.lock:
            return session.summary()

    @app.post("/sessions/{session_id}/propose")
    def propose(session_id: str):
        session = store.get(session_id)
        if session is None:
            return _error(404, f"unknown session {session_id!r}")
        with session.lock:
            if session.proposal is None:
                session.compute_proposal()
                session.append_event(
                    {
                        "event": "proposal",
                        "round": session.belief.round + 1,
                        "x": session.proposal["x_star"],
                        "score": session.proposal["score"],
                    }
                )
            # idempotent: a repeat call returns the same cached proposal
            return {**session.proposal, "round": session.belief.round + 1}

    @app.post("/sessions/{session_id}/observe")
    def observe(session_id: str, body: dict):
        session = store.get(session_id)
        if session is None:
            return _error(404, f"unknown session {session_id!r}")
        with session.lock:
            if session.proposal is None:
                return _error(409, "no pending proposal; call propose first")
            try:
                y = float(body.get("y"))
            except (TypeError, ValueError):
                return _error(422, "y must be a finite number", "y")
            if not math.isfinite(y):
                return _error(422, "y must be a finite number", "y")
            session.append_event(
                {"event": "observed", "round": session.belief.round + 1, "y": y}
            )
            session.apply_observation(y)
            return {
                "model_probs": list(map(float, session.belief.model_probs)),
                "per_param_variance": session.variances(),
                "round": session.belief.round,
            }

    @app.get("/sessions/{session_id}/state")
    def state(session_id: str):
        session = store.get(session_id)
        if session is None:
            return _error(404, f"unknown session {session_id!r}")
        with session.lock:
            return session.state()

    _mount_ui(app, ui_dir)
    return app


def _mount_ui(app, ui_dir):
    import os

    candidates = [ui_dir, os.environ.get("SYMDISC_UI_DIR")]
    here = Path(__file__).resolve()
    for base in here.parents:
        candidates.append(base / "frontend" / "dist")
    for cand in candidates:
        if cand and Path(cand).is_dir():
            from fastapi.staticfiles import StaticFiles

            app.mount("/ui", StaticFiles(directory=str(cand), html=True), name="ui")
            return
