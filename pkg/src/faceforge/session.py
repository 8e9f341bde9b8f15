"""Interactive session state machine: ranking loop, refinement, persistence.

A session moves strictly forward through Ranking -> Refinement -> Finalised.
Every mutation appends an event, and replaying the event log through a fresh
engine with the same checkpoints reproduces all reconstruction latents.
"""

from __future__ import annotations

import json
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .embedding import EmbeddingNet, OracleConfig, oracle_rank
from .generator import (
    AUX_SET_SIZE,
    SLIDER_FEATURES,
    AuxiliarySet,
    Category,
    FaceGenerator,
    FaceImage,
)
from .reconstruction import MAX_ITERS, ReconstructionNet, reconstruct, should_stop

FORMAT_VERSION = "1"

STAGE_RANKING = "Ranking"
STAGE_REFINEMENT = "Refinement"
STAGE_FINALISED = "Finalised"


class OutOfStageError(RuntimeError):
    """Operation invoked outside its declared session stage."""


class SessionNotFoundError(KeyError):
    pass


def _now_ms() -> int:
    return int(time.time() * 1000)


@dataclass
class SessionEvent:
    kind: str  # AuxIssued | RankingAccepted | ReconstructionUpdated | EarlyStopped | SliderApplied | Finalised
    payload: dict
    timestamp_ms: int


@dataclass
class Session:
    id: str
    category: Category
    mode: str  # "interactive" | "simulated"
    seed: int
    created_at_ms: int
    stage: str = STAGE_RANKING
    history: list = field(default_factory=list)  # list of rank orders (list[int]) per iteration
    reconstructions: list = field(default_factory=list)  # list of np.ndarray
    slider_edits: list = field(default_factory=list)  # (feature, value, ts_ms)
    final_latent: np.ndarray | None = None
    events: list = field(default_factory=list)

    @property
    def iteration(self) -> int:
        return len(self.history)

    def current_latent(self) -> np.ndarray:
        if not self.reconstructions:
            raise OutOfStageError("no reconstruction available yet")
        return self.reconstructions[-1]


@dataclass(frozen=True)
class ReconstructionRecord:
    session_id: str
    final_latent: np.ndarray
    svg: str
    events: list


class SessionEngine:
    """Binds the generator, pools, and trained nets to session operations."""

    def __init__(
        self,
        generator: FaceGenerator,
        pools: dict,
        recon_net: ReconstructionNet,
        embedder: EmbeddingNet,
        alpha: float = 0.1,
        consecutive_stops: int = 1,
        oracle_cfg: OracleConfig | None = None,
    ):
        self.generator = generator
        self.pools = pools
        self.recon_net = recon_net
        self.embedder = embedder
        self.alpha = alpha
        self.consecutive_stops = consecutive_stops
        self.oracle_cfg = oracle_cfg or OracleConfig()

    # -- lifecycle -----------------------------------------------------------

    def create_session(self, category: Category, mode: str = "interactive", seed: int = 0) -> Session:
        if mode not in ("interactive", "simulated"):
            raise ValueError(f"unknown session mode {mode!r}")
        session = Session(
            id=uuid.uuid4().hex,
            category=category,
            mode=mode,
            seed=seed,
            created_at_ms=_now_ms(),
        )
        return session

    def next_aux_set(self, session: Session) -> AuxiliarySet:
        self._require_stage(session, STAGE_RANKING)
        sets = self.pools[session.category.key()]
        aux = sets[session.iteration]
        self._event(session, "AuxIssued", {"iteration": session.iteration + 1})
        return aux

    def submit_ranking(self, session: Session, order) -> dict:
        self._require_stage(session, STAGE_RANKING)
        order = [int(v) for v in order]
        if sorted(order) != list(range(AUX_SET_SIZE)):
            raise ValueError("ranking must be a permutation of 0..5")
        session.history.append(order)
        self._event(session, "RankingAccepted", {"iteration": session.iteration, "order": order})

        sets = self.pools[session.category.key()]
        history = [(sets[i], session.history[i]) for i in range(session.iteration)]
        w_rec = reconstruct(self.recon_net, history)
        session.reconstructions.append(w_rec)
        self._event(session, "ReconstructionUpdated", {"iteration": session.iteration})

        stopped = session.iteration >= MAX_ITERS
        if not stopped and session.iteration >= 2:
            recent = session.reconstructions
            k = self.consecutive_stops
            if len(recent) >= k + 1:
                stopped = all(
                    should_stop(recent[-j - 1], recent[-j], self.alpha) for j in range(1, k + 1)
                )
        if stopped:
            session.stage = STAGE_REFINEMENT
            self._event(session, "EarlyStopped", {"iteration": session.iteration})
        return {"w_rec": w_rec, "stopped": stopped, "iteration": session.iteration}

    def simulate_ranking(self, session: Session, target_latent: np.ndarray, rng: np.random.Generator):
        """Noisy-oracle rater vote for the current auxiliary set (simulated mode)."""
        if session.mode != "simulated":
            raise OutOfStageError("simulate_ranking requires a simulated session")
        aux = self.pools[session.category.key()][session.iteration]
        target_face = self.generator.decode_params(target_latent)
        return oracle_rank(target_face, [im.params for im in aux.images], self.oracle_cfg, rng)

    def refine(self, session: Session, feature: str, value: float) -> FaceImage:
        self._require_stage(session, STAGE_REFINEMENT)
        if feature not in SLIDER_FEATURES:
            raise KeyError(f"unknown slider feature {feature!r}")
        new_latent = self.generator.apply_slider(self._refined_latent(session), feature, value)
        session.slider_edits.append((feature, float(value), _now_ms()))
        self._event(session, "SliderApplied", {"feature": feature, "value": float(value)})
        session.final_latent = new_latent
        return self.generator.render_latent(new_latent)

    def current_face(self, session: Session) -> FaceImage:
        return self.generator.render_latent(self._refined_latent(session))

    def _refined_latent(self, session: Session) -> np.ndarray:
        return session.final_latent if session.final_latent is not None else session.current_latent()

    def finalize(self, session: Session) -> ReconstructionRecord:
        self._require_stage(session, STAGE_REFINEMENT)
        latent = self._refined_latent(session)
        session.final_latent = latent
        session.stage = STAGE_FINALISED
        self._event(session, "Finalised", {})
        return ReconstructionRecord(
            session_id=session.id,
            final_latent=latent,
            svg=self.generator.render_latent(latent).svg,
            events=list(session.events),
        )

    def replay(self, session: Session) -> list[np.ndarray]:
        """Recompute every reconstruction latent from the recorded history."""
        sets = self.pools[session.category.key()]
        out = []
        for i in range(len(session.history)):
            history = [(sets[j], session.history[j]) for j in range(i + 1)]
            out.append(reconstruct(self.recon_net, history))
        return out

    # -- helpers ---------------------------------------------------------------

    def _require_stage(self, session: Session, stage: str) -> None:
        if session.stage != stage:
            raise OutOfStageError(f"operation requires stage {stage}, session is in {session.stage}")

    @staticmethod
    def _event(session: Session, kind: str, payload: dict) -> None:
        session.events.append(SessionEvent(kind=kind, payload=payload, timestamp_ms=_now_ms()))


# -- persistence ---------------------------------------------------------------


def save_session(session: Session, store: str | Path) -> Path:
    store = Path(store)
    store.mkdir(parents=True, exist_ok=True)
    doc = {
        "format_version": FORMAT_VERSION,
        "id": session.id,
        "category": {"sex_bit": session.category.sex_bit, "age_bit": session.category.age_bit},
        "mode": session.mode,
        "seed": session.seed,
        "created_at_ms": session.created_at_ms,
        "stage": session.stage,
        "history": session.history,
        "reconstructions": [w.tolist() for w in session.reconstructions],
        "slider_edits": [[f, v, t] for f, v, t in session.slider_edits],
        "final_latent": session.final_latent.tolist() if session.final_latent is not None else None,
        "events": [{"kind": e.kind, "payload": e.payload, "timestamp_ms": e.timestamp_ms} for e in session.events],
    }
    path = store / f"{session.id}.json"
    path.write_text(json.dumps(doc), encoding="utf-8")
    return path


def load_session(store: str | Path, session_id: str) -> Session:
    path = Path(store) / f"{session_id}.json"
    if not path.exists():
        raise SessionNotFoundError(session_id)
    doc = json.loads(path.read_text(encoding="utf-8"))
    if doc.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported session format {doc.get('format_version')!r}")
    return Session(
        id=doc["id"],
        category=Category(**doc["category"]),
        mode=doc["mode"],
        seed=doc["seed"],
        created_at_ms=doc["created_at_ms"],
        stage=doc["stage"],
        history=[list(map(int, h)) for h in doc["history"]],
        reconstructions=[np.asarray(w, dtype=float) for w in doc["reconstructions"]],
        slider_edits=[(f, float(v), int(t)) for f, v, t in doc["slider_edits"]],
        final_latent=None if doc["final_latent"] is None else np.asarray(doc["final_latent"], dtype=float),
        events=[SessionEvent(kind=e["kind"], payload=e["payload"], timestamp_ms=e["timestamp_ms"]) for e in doc["events"]],
    )
