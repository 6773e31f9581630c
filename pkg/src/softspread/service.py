"""HTTP service for live labeling sessions.

Sessions are event-sourced: the durable record is {dataset file, config,
append-only event log}; accumulators live in memory and are rebuilt by
replay on restart.  Each session has one writer at a time (concurrent
annotators get 409 and retry) while reads snapshot state under a short lock.
"""

from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Literal, Optional

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from .data import DatasetError, EmbeddedDataset, load_dataset, save_dataset
from .graph import GraphError, build_epsilon_graph, build_knn_graph
from .intervals import ci_report
from .session import ESTIMATE_FLOOR, AnnotationSession
from .solver import SolverConfig, SolverError

# received-mass changes below this are reported as "unchanged" to the client
MASS_CHANGE_THRESHOLD = 1e-6


@dataclass
class ServiceConfig:
    data_dir: Path
    capacity: int = 100_000  # largest dataset a session may hold

    def __post_init__(self):
        self.data_dir = Path(self.data_dir)


class GraphSpec(BaseModel):
    kind: Literal["knn", "epsilon"]
    k: Optional[int] = None
    h: Optional[float] = None


class DatasetUpload(BaseModel):
    features: list[list[float]]
    ids: Optional[list[str]] = None
    truth: Optional[list[list[float]]] = None
    class_names: Optional[list[str]] = None


class CreateSessionRequest(BaseModel):
    dataset: Optional[DatasetUpload] = None
    dataset_path: Optional[str] = None
    dataset_format: str = "csv"
    num_classes: Optional[int] = Field(default=None, ge=2)
    graph: GraphSpec
    normalization: Literal["symmetric", "random_walk"] = "symmetric"
    alpha: float = Field(default=0.9, ge=0.0, lt=1.0)
    tolerance: float = Field(default=1e-6, gt=0.0)
    lipschitz: Optional[float] = Field(default=None, gt=0.0)


class AnnotationRequest(BaseModel):
    point_id: str
    class_index: int = Field(ge=0)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


@dataclass
class LiveSession:
    """One session's in-memory state plus its durable file locations."""

    session_id: str
    dataset: EmbeddedDataset
    session: AnnotationSession
    meta: dict
    meta_path: Path
    events_path: Path
    created: str
    updated: str
    index_of: dict = field(default_factory=dict)
    writer_lock: threading.Lock = field(default_factory=threading.Lock)
    state_lock: threading.Lock = field(default_factory=threading.Lock)

    def __post_init__(self):
        self.index_of = {pid: i for i, pid in enumerate(self.dataset.ids)}

    def persist_meta(self) -> None:
        self.meta["updated"] = self.updated
        self.meta_path.write_text(json.dumps(self.meta, indent=2))

    def append_event(self, event) -> None:
        with open(self.events_path, "a") as fh:
            fh.write(json.dumps({
                "point_index": event.point_index,
                "class_index": event.class_index,
                "sequence_number": event.sequence_number,
                "source": event.source,
            }) + "\n")


def _build_live_session(config: ServiceConfig, meta: dict,
                        dataset: EmbeddedDataset) -> LiveSession:
    spec = meta["graph"]
    if spec["kind"] == "knn":
        graph = build_knn_graph(dataset, int(spec["k"]))
    else:
        graph = build_epsilon_graph(dataset, float(spec["h"]))
    session = AnnotationSession(
        graph, int(meta["num_classes"]), variant=meta["normalization"],
        config=SolverConfig(alpha=meta["alpha"], tolerance=meta["tolerance"]),
        features=dataset.features, lipschitz=meta.get("lipschitz"))
    sid = meta["session_id"]
    sessions_dir = config.data_dir / "sessions"
    return LiveSession(
        session_id=sid, dataset=dataset, session=session, meta=meta,
        meta_path=sessions_dir / f"{sid}.json",
        events_path=Path(meta["events_path"]),
        created=meta["created"], updated=meta["updated"])


def load_sessions(config: ServiceConfig) -> dict[str, LiveSession]:
    """Rebuild every persisted session by replaying its event log."""
    registry: dict[str, LiveSession] = {}
    sessions_dir = config.data_dir / "sessions"
    if not sessions_dir.is_dir():
        return registry
    for meta_path in sorted(sessions_dir.glob("*.json")):
        meta = json.loads(meta_path.read_text())
        dataset = load_dataset(meta["dataset_path"], format=meta["dataset_format"])
        live = _build_live_session(config, meta, dataset)
        events_path = Path(meta["events_path"])
        if events_path.exists():
            with open(events_path) as fh:
                for line in fh:
                    if line.strip():
                        e = json.loads(line)
                        live.session.annotate(int(e["point_index"]),
                                              int(e["class_index"]),
                                              e.get("source", "human"))
        registry[meta["session_id"]] = live
    return registry


def create_app(config: ServiceConfig) -> FastAPI:
    config.data_dir.mkdir(parents=True, exist_ok=True)
    (config.data_dir / "sessions").mkdir(exist_ok=True)
    (config.data_dir / "datasets").mkdir(exist_ok=True)
    registry = load_sessions(config)
    registry_lock = threading.Lock()
    app = FastAPI(title="softspread annotation service")
    app.state.registry = registry
    app.state.config = config

    def get_live(session_id: str) -> LiveSession:
        live = registry.get(session_id)
        if live is None:
            raise HTTPException(404, f"unknown session {session_id!r}")
        return live

    @app.post("/sessions", status_code=201)
    def create_session(req: CreateSessionRequest):
        if (req.dataset is None) == (req.dataset_path is None):
            raise HTTPException(400, "provide exactly one of dataset, dataset_path")
        sid = uuid.uuid4().hex
        try:
            if req.dataset is not None:
                dataset = EmbeddedDataset(
                    ids=tuple(req.dataset.ids) if req.dataset.ids else tuple(
                        f"p{i:06d}" for i in range(len(req.dataset.features))),
                    features=np.asarray(req.dataset.features, dtype=np.float64),
                    truth=(np.asarray(req.dataset.truth, dtype=np.float64)
                           if req.dataset.truth is not None else None),
                    class_names=(tuple(req.dataset.class_names)
                                 if req.dataset.class_names else None))
                dataset_path = config.data_dir / "datasets" / f"{sid}.csv"
                save_dataset(dataset, dataset_path, format="csv")
                dataset_path = str(dataset_path)
                dataset_format = "csv"
            else:
                dataset_path = req.dataset_path
                dataset_format = req.dataset_format
                dataset = load_dataset(dataset_path, format=dataset_format)
        except (DatasetError, ValueError, OSError) as exc:
            raise HTTPException(400, f"invalid dataset: {exc}")
        if dataset.n > config.capacity:
            raise HTTPException(
                507, f"dataset has {dataset.n} points; capacity is {config.capacity}")
        num_classes = req.num_classes
        if num_classes is None:
            if dataset.truth is None:
                raise HTTPException(
                    400, "num_classes is required when the dataset has no labels")
            num_classes = dataset.truth.shape[1]
        now = _now()
        meta = {
            "session_id": sid, "created": now, "updated": now,
            "num_classes": int(num_classes),
            "normalization": req.normalization,
            "alpha": req.alpha, "tolerance": req.tolerance,
            "lipschitz": req.lipschitz,
            "graph": req.graph.model_dump(exclude_none=True),
            "dataset_path": str(dataset_path),
            "dataset_format": dataset_format,
            "events_path": str(config.data_dir / "sessions" / f"{sid}.events.jsonl"),
        }
        try:
            live = _build_live_session(config, meta, dataset)
        except (GraphError, ValueError) as exc:
            raise HTTPException(400, f"invalid session config: {exc}")
        live.events_path.touch()
        live.persist_meta()
        with registry_lock:
            registry[sid] = live
        return {"session_id": sid, "n": dataset.n, "d": dataset.d,
                "num_classes": int(num_classes)}

    @app.get("/sessions")
    def list_sessions():
        with registry_lock:
            items = list(registry.values())
        return {"sessions": [{
            "session_id": s.session_id, "n": s.dataset.n,
            "num_classes": s.session.num_classes,
            "annotations": len(s.session.log),
            "created": s.created, "updated": s.updated,
        } for s in items]}

    @app.get("/sessions/{session_id}")
    def session_detail(session_id: str):
        live = get_live(session_id)
        with live.state_lock:
            annotations = len(live.session.log)
        return {"session_id": live.session_id, "n": live.dataset.n,
                "d": live.dataset.d, "num_classes": live.session.num_classes,
                "annotations": annotations, "created": live.created,
                "updated": live.updated,
                "config": {k: live.meta[k] for k in
                           ("normalization", "alpha", "tolerance",
                            "lipschitz", "graph")}}

    @app.post("/sessions/{session_id}/annotations")
    def post_annotation(session_id: str, req: AnnotationRequest):
        live = get_live(session_id)
        idx = live.index_of.get(req.point_id)
        if idx is None:
            raise HTTPException(404, f"unknown point_id {req.point_id!r}")
        if not 0 <= req.class_index < live.session.num_classes:
            raise HTTPException(400, f"class_index must be in [0, "
                                     f"{live.session.num_classes})")
        if not live.writer_lock.acquire(blocking=False):
            raise HTTPException(
                409, "another annotation is being applied; retry")
        try:
            # warm the propagation cache outside the state lock so readers
            # only wait for the cheap accumulator update
            try:
                phi = live.session.propagation(idx)
            except SolverError as exc:
                raise HTTPException(500, f"solver failure: {exc}")
            with live.state_lock:
                event = live.session.annotate(idx, req.class_index,
                                              source="human")
                C = live.session.num_classes
                y_row = live.session.Y[idx].copy()
                n_q = float(live.session.N[idx])
            live.append_event(event)
            live.updated = _now()
            live.persist_meta()
        finally:
            live.writer_lock.release()
        probs = (y_row + ESTIMATE_FLOOR) / (n_q + C * ESTIMATE_FLOOR)
        return {
            "sequence_number": event.sequence_number,
            "point_id": req.point_id,
            "estimate": {"id": req.point_id,
                         "probabilities": [float(v) for v in probs],
                         "received_mass": n_q},
            "changed_points": int((phi > MASS_CHANGE_THRESHOLD).sum()),
        }

    @app.get("/sessions/{session_id}/estimates")
    def get_estimates(session_id: str, offset: int = 0, limit: int = 1000):
        live = get_live(session_id)
        _check_page(offset, limit)
        with live.state_lock:
            est = live.session.estimates()
        ids = live.dataset.ids
        hi = min(offset + limit, est.n)
        rows = [{"id": ids[i],
                 "probabilities": [float(v) for v in est.probabilities[i]],
                 "received_mass": float(est.received[i])}
                for i in range(offset, hi)]
        return {"total": est.n, "offset": offset, "limit": limit, "rows": rows}

    @app.get("/sessions/{session_id}/uncertainty")
    def get_uncertainty(session_id: str, method: str = "wilson",
                        z: float = 1.96, delta: float = 0.05,
                        bonferroni: bool = False,
                        offset: int = 0, limit: int = 1000):
        live = get_live(session_id)
        _check_page(offset, limit)
        try:
            with live.state_lock:
                if method == "wilson":
                    rows = ci_report(live.session, "wilson", z=z)
                elif method == "hoeffding":
                    rows = ci_report(live.session, "hoeffding", delta=delta,
                                     bonferroni=bonferroni)
                else:
                    raise HTTPException(400, f"unknown method {method!r}")
        except ValueError as exc:
            raise HTTPException(400, str(exc))
        ids = live.dataset.ids
        page = rows[offset:offset + limit]
        return {"total": len(rows), "offset": offset, "limit": limit,
                "rows": [{"id": ids[q], "class": c,
                          "lower": ci.lower, "upper": ci.upper,
                          "method": ci.method} for q, c, ci in page]}

    @app.get("/sessions/{session_id}/suggestions")
    def get_suggestions(session_id: str, count: int = 10):
        live = get_live(session_id)
        if count < 1:
            raise HTTPException(400, "count must be positive")
        with live.state_lock:
            mass = live.session.N.copy()
        order = np.argsort(mass, kind="stable")[:count]  # ties by index
        ids = live.dataset.ids
        return {"points": [{"id": ids[int(i)],
                            "received_mass": float(mass[int(i)])}
                           for i in order]}

    @app.get("/sessions/{session_id}/points")
    def get_points(session_id: str, offset: int = 0, limit: int = 100_000):
        live = get_live(session_id)
        _check_page(offset, limit)
        if live.dataset.d != 2:
            raise HTTPException(
                400, f"point plotting needs 2-D features; this dataset has "
                     f"d={live.dataset.d}")
        X = live.dataset.features
        ids = live.dataset.ids
        hi = min(offset + limit, live.dataset.n)
        return {"total": live.dataset.n, "offset": offset, "limit": limit,
                "rows": [{"id": ids[i], "x": float(X[i, 0]),
                          "y": float(X[i, 1])} for i in range(offset, hi)]}

    return app


def _check_page(offset: int, limit: int) -> None:
    if offset < 0 or limit < 1:
        raise HTTPException(400, "offset must be >= 0 and limit >= 1")


def serve(config: ServiceConfig, host: str = "127.0.0.1",
          port: int = 8000) -> None:
    import uvicorn

    uvicorn.run(create_app(config), host=host, port=port)
