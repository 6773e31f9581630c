"""Incremental soft-label estimation from spread annotations.

Each annotation (point q, class c) is spread through the graph as a
heat-kernel column, sup-normalized, and accumulated: Y[:, c] and N collect
the per-class and total deposited mass, Q collects squared mass for
Hoeffding-style intervals, and B collects a Lipschitz bias term when a
label-Lipschitz constant is configured.  Estimates divide class mass by
total mass with a small stability floor; points that never received mass
report the uniform distribution.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .graph import NeighborGraph, normalize
from .solver import HeatKernelSolver, SolverConfig

# added to every class score at estimate time only, so the accumulators
# stay exact for interval construction
ESTIMATE_FLOOR = 1e-4

EVENT_SOURCES = ("simulated", "human")


@dataclass(frozen=True)
class AnnotationEvent:
    point_index: int
    class_index: int
    sequence_number: int
    source: str = "human"


@dataclass(frozen=True)
class SoftLabelEstimate:
    """Row-stochastic probabilities plus the received-mass vector N they
    were computed from."""

    probabilities: np.ndarray  # (n, C)
    received: np.ndarray       # (n,)

    @property
    def n(self) -> int:
        return self.probabilities.shape[0]

    @property
    def num_classes(self) -> int:
        return self.probabilities.shape[1]


class AnnotationSession:
    """Single-writer spreading session over a fixed graph.

    Attributes Y (n x C), N, Q, B are the running accumulators; `log` is the
    append-only event sequence that fully determines them (replaying the log
    on a fresh session reproduces the state up to solver tolerance).
    """

    def __init__(self, graph: NeighborGraph, num_classes: int,
                 variant: str = "symmetric",
                 config: SolverConfig = SolverConfig(),
                 features: Optional[np.ndarray] = None,
                 lipschitz: Optional[float] = None):
        if num_classes < 2:
            raise ValueError(f"need at least 2 classes, got {num_classes}")
        if lipschitz is not None:
            if lipschitz <= 0:
                raise ValueError("lipschitz constant must be positive")
            if features is None:
                raise ValueError("bias accumulation needs feature coordinates")
        if features is not None:
            features = np.asarray(features, dtype=np.float64)
            if features.shape[0] != graph.n:
                raise ValueError("features row count does not match graph size")
        self.graph = graph
        self.operator = normalize(graph, variant)
        self.config = config
        self.num_classes = num_classes
        self.features = features
        self.lipschitz = lipschitz
        n = graph.n
        self.Y = np.zeros((n, num_classes))
        self.N = np.zeros(n)
        self.Q = np.zeros(n)
        self.B = np.zeros(n) if lipschitz is not None else None
        self.log: list[AnnotationEvent] = []
        self._solver = HeatKernelSolver(self.operator, config)
        # phi depends only on the seed, so budget runs that revisit points
        # pay for each distinct seed once
        self._phi_cache: dict[int, np.ndarray] = {}
        self._bias_cache: dict[int, np.ndarray] = {}

    @property
    def n(self) -> int:
        return self.graph.n

    def propagation(self, q: int) -> np.ndarray:
        """Normalized propagation vector for seed q (cached; depends only on
        the graph and solver config, not the annotation history)."""
        phi = self._phi_cache.get(q)
        if phi is None:
            phi = self._solver.spread_seed(q).normalized
            self._phi_cache[q] = phi
        return phi

    def _bias_weights(self, q: int) -> np.ndarray:
        w = self._bias_cache.get(q)
        if w is None:
            dist = np.linalg.norm(self.features - self.features[q], axis=1)
            w = np.minimum(1.0, self.lipschitz * dist)
            self._bias_cache[q] = w
        return w

    def annotate(self, point_index: int, class_index: int,
                 source: str = "human") -> AnnotationEvent:
        """Apply one annotation; on solver failure the state is unchanged."""
        if not 0 <= point_index < self.n:
            raise IndexError(f"point index {point_index} out of range")
        if not 0 <= class_index < self.num_classes:
            raise IndexError(f"class index {class_index} out of range")
        if source not in EVENT_SOURCES:
            raise ValueError(f"unknown event source {source!r}")
        phi = self.propagation(point_index)
        if self.B is not None:
            bias = self._bias_weights(point_index)
        self.Y[:, class_index] += phi
        self.N += phi
        self.Q += phi * phi
        if self.B is not None:
            self.B += phi * bias
        event = AnnotationEvent(point_index, class_index, len(self.log), source)
        self.log.append(event)
        return event

    def replay(self, events: Iterable[AnnotationEvent]) -> None:
        for event in events:
            self.annotate(event.point_index, event.class_index, event.source)

    def estimates(self) -> SoftLabelEstimate:
        C = self.num_classes
        P = np.full((self.n, C), 1.0 / C)
        got = self.N > 0
        P[got] = (self.Y[got] + ESTIMATE_FLOOR) / \
                 (self.N[got] + C * ESTIMATE_FLOOR)[:, None]
        return SoftLabelEstimate(probabilities=P, received=self.N.copy())


def run_budget(session: AnnotationSession, oracle, m: int, rng_seed: int,
               checkpoints: Sequence[int]) -> list[tuple[int, SoftLabelEstimate]]:
    """Feed the session m oracle annotations at uniformly resampled points.

    Points are drawn with replacement from the session's own rng stream
    (seeded by rng_seed); class draws consume the oracle's stream.  Returns
    (annotations_used, estimate) snapshots at each checkpoint.
    """
    from .synth import draw_events

    if m < 1:
        raise ValueError("budget m must be at least 1")
    checkpoints = [int(c) for c in checkpoints]
    if any(c < 1 or c > m for c in checkpoints):
        raise ValueError("checkpoints must lie in [1, m]")
    if sorted(checkpoints) != checkpoints:
        raise ValueError("checkpoints must be ascending")
    marks = set(checkpoints)
    trajectory = []
    for j, (q, c) in enumerate(draw_events(oracle, session.n, m, rng_seed), 1):
        session.annotate(q, c, source="simulated")
        if j in marks:
            trajectory.append((j, session.estimates()))
    return trajectory


def save_estimates(ids: Sequence[str], estimate: SoftLabelEstimate, path) -> None:
    """Write `id,p0..p{C-1},received_mass` rows at round-trip precision."""
    if len(ids) != estimate.n:
        raise ValueError("id count does not match estimate rows")
    C = estimate.num_classes
    header = "id," + ",".join(f"p{c}" for c in range(C)) + ",received_mass"
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for i, pid in enumerate(ids):
            probs = ",".join(repr(float(v)) for v in estimate.probabilities[i])
            fh.write(f"{pid},{probs},{float(estimate.received[i])!r}\n")
