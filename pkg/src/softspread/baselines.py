"""Reference estimators that consume a raw annotation log without spreading:
Gaussian kernel regression, k-NN regression over annotated points, and the
per-point histogram."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data import EmbeddedDataset
from .session import AnnotationEvent, AnnotationSession, SoftLabelEstimate

_CHUNK = 1024  # query rows per distance block


@dataclass(frozen=True)
class AnnotationLog:
    """The raw material all baselines share: events plus (n, C) context."""

    events: tuple[AnnotationEvent, ...]
    n: int
    num_classes: int

    def __post_init__(self):
        for e in self.events:
            if not 0 <= e.point_index < self.n:
                raise ValueError(f"event {e.sequence_number}: point index out of range")
            if not 0 <= e.class_index < self.num_classes:
                raise ValueError(f"event {e.sequence_number}: class index out of range")

    @classmethod
    def from_session(cls, session: AnnotationSession) -> "AnnotationLog":
        return cls(tuple(session.log), session.n, session.num_classes)

    def counts(self) -> np.ndarray:
        """Per-(point, class) event counts, shape (n, C)."""
        counts = np.zeros((self.n, self.num_classes))
        for e in self.events:
            counts[e.point_index, e.class_index] += 1
        return counts


def histogram_estimate(log: AnnotationLog) -> SoftLabelEstimate:
    """Relative class frequencies per point; uniform where nothing arrived."""
    counts = log.counts()
    total = counts.sum(axis=1)
    P = np.full((log.n, log.num_classes), 1.0 / log.num_classes)
    got = total > 0
    P[got] = counts[got] / total[got, None]
    return SoftLabelEstimate(probabilities=P, received=total)


def gkr_estimate(dataset: EmbeddedDataset, log: AnnotationLog,
                 gamma: float) -> SoftLabelEstimate:
    """Gaussian kernel regression against the annotated points.

    p_hat_q = sum_j exp(-gamma*||x_q - x_{i_j}||^2) * onehot(c_j) / (same sum).
    Weights are computed per annotated point and multiplied by its event
    histogram, never materializing an n-by-n kernel.  Rows whose kernel mass
    underflows to zero fall back to uniform and carry received == 0 as the
    flag."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    if not log.events:
        raise ValueError("gkr needs at least one annotation")
    X = dataset.features
    counts = log.counts()
    annotated = np.flatnonzero(counts.sum(axis=1) > 0)
    A = X[annotated]                 # (m, d) distinct annotated coordinates
    hist = counts[annotated]         # (m, C) per-point event histograms
    n, C = log.n, log.num_classes
    P = np.empty((n, C))
    mass = np.empty(n)
    for lo in range(0, n, _CHUNK):
        hi = min(lo + _CHUNK, n)
        diff = X[lo:hi, None, :] - A[None, :, :]
        d2 = np.einsum("ijk,ijk->ij", diff, diff)
        w = np.exp(-gamma * d2)
        num = w @ hist               # (chunk, C)
        den = num.sum(axis=1)
        mass[lo:hi] = den
        ok = den > 0
        P[lo:hi][ok] = num[ok] / den[ok, None]
        P[lo:hi][~ok] = 1.0 / C
    return SoftLabelEstimate(probabilities=P, received=mass)


def knn_estimate(dataset: EmbeddedDataset, log: AnnotationLog,
                 k: int) -> SoftLabelEstimate:
    """Pool the event histograms of the k nearest distinct annotated points.

    A point with several feedbacks counts once as a neighbor but contributes
    all its events, so neighbors are implicitly weighted by feedback count.
    Distance ties break by ascending point index."""
    if k < 1:
        raise ValueError("k must be positive")
    X = dataset.features
    counts = log.counts()
    annotated = np.flatnonzero(counts.sum(axis=1) > 0)  # ascending index
    if len(annotated) < k:
        raise ValueError(
            f"need at least k={k} distinct annotated points, have {len(annotated)}")
    A = X[annotated]
    hist = counts[annotated]
    n, C = log.n, log.num_classes
    P = np.empty((n, C))
    mass = np.empty(n)
    for lo in range(0, n, _CHUNK):
        hi = min(lo + _CHUNK, n)
        diff = X[lo:hi, None, :] - A[None, :, :]
        d2 = np.einsum("ijk,ijk->ij", diff, diff)
        # stable sort + index-sorted candidate columns = ties by index
        nearest = np.argsort(d2, axis=1, kind="stable")[:, :k]
        pooled = hist[nearest].sum(axis=1)  # (chunk, C)
        total = pooled.sum(axis=1)
        P[lo:hi] = pooled / total[:, None]
        mass[lo:hi] = total
    return SoftLabelEstimate(probabilities=P, received=mass)


def log_from_events(events: Sequence[tuple[int, int]], n: int,
                    num_classes: int) -> AnnotationLog:
    """Build a log from bare (point_index, class_index) pairs."""
    evs = tuple(AnnotationEvent(p, c, i, "simulated")
                for i, (p, c) in enumerate(events))
    return AnnotationLog(evs, n, num_classes)
