"""Synthetic ground-truth datasets, the feedback oracle, and quality metrics.

Random draws all flow through numpy's PCG64 generator; the algorithm name is
recorded in experiment outputs so trajectories can be reproduced across
implementations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import expit

from .data import EmbeddedDataset, dataset_from_arrays

RNG_ALGORITHM = "numpy-pcg64"


# ---------------------------------------------------------------------------
# two interleaved half-circles with an analytic soft boundary

def _dist_to_upper_arc(P: np.ndarray) -> np.ndarray:
    """Distance to {(cos t, sin t) : t in [0, pi]} (unit upper semicircle)."""
    r = np.linalg.norm(P, axis=1)
    on_arc = np.abs(r - 1.0)
    ends = np.minimum(np.linalg.norm(P - np.array([1.0, 0.0]), axis=1),
                      np.linalg.norm(P - np.array([-1.0, 0.0]), axis=1))
    return np.where(P[:, 1] >= 0.0, on_arc, ends)


def _dist_to_lower_arc(P: np.ndarray) -> np.ndarray:
    """Distance to {(1 - cos t, 0.5 - sin t) : t in [0, pi]} (lower semicircle
    centered at (1, 0.5))."""
    V = P - np.array([1.0, 0.5])
    r = np.linalg.norm(V, axis=1)
    on_arc = np.abs(r - 1.0)
    ends = np.minimum(np.linalg.norm(P - np.array([0.0, 0.5]), axis=1),
                      np.linalg.norm(P - np.array([2.0, 0.5]), axis=1))
    return np.where(V[:, 1] <= 0.0, on_arc, ends)


def two_moons_truth(P: np.ndarray, sharpness: float) -> np.ndarray:
    """p(inner | x) = logistic(sharpness * (d_outer(x) - d_inner(x))); points
    equidistant from both noiseless arcs get exactly (0.5, 0.5)."""
    margin = _dist_to_upper_arc(P) - _dist_to_lower_arc(P)
    p_inner = expit(sharpness * margin)
    return np.column_stack([1.0 - p_inner, p_inner])


def make_two_moons(n: int, noise: float = 0.1, sharpness: float = 3.0,
                   rng_seed=0) -> EmbeddedDataset:
    """Two interleaved half-circle clusters with isotropic Gaussian noise and
    a smooth distance-margin ground truth."""
    if n < 2:
        raise ValueError("need n >= 2")
    if noise < 0:
        raise ValueError("noise must be nonnegative")
    if sharpness <= 0:
        raise ValueError("sharpness must be positive")
    n_outer = n // 2
    n_inner = n - n_outer
    t_out = np.linspace(0.0, np.pi, n_outer)
    t_in = np.linspace(0.0, np.pi, n_inner)
    clean = np.concatenate([
        np.column_stack([np.cos(t_out), np.sin(t_out)]),
        np.column_stack([1.0 - np.cos(t_in), 0.5 - np.sin(t_in)]),
    ])
    rng = np.random.default_rng(rng_seed)
    X = clean + rng.normal(scale=noise, size=clean.shape) if noise > 0 else clean
    return dataset_from_arrays(X, truth=two_moons_truth(X, sharpness),
                               class_names=("outer", "inner"))


def make_sine_1d(n: int, lo: float = 0.0, hi: float = 10.0,
                 rng_seed=0) -> EmbeddedDataset:
    """Uniform 1-D sample with truth (1/2(sin x + 1), 1/2(1 - sin x))."""
    if not lo < hi:
        raise ValueError("need lo < hi")
    if n < 1:
        raise ValueError("need n >= 1")
    rng = np.random.default_rng(rng_seed)
    x = rng.uniform(lo, hi, size=n)
    p1 = 0.5 * (np.sin(x) + 1.0)
    truth = np.column_stack([p1, 1.0 - p1])
    return dataset_from_arrays(x[:, None], truth=truth)


# ---------------------------------------------------------------------------
# feedback oracle

@dataclass
class FeedbackOracle:
    """Draws class feedback from fixed per-point categorical distributions.

    Owns its rng stream; draws are deterministic given the seed and the
    sequence of calls."""

    truth: np.ndarray
    rng: np.random.Generator
    algorithm: str = RNG_ALGORITHM
    _cdf: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        truth = np.asarray(self.truth, dtype=np.float64)
        if truth.ndim != 2 or truth.shape[1] < 2:
            raise ValueError("truth must be an n x C matrix with C >= 2")
        sums = truth.sum(axis=1)
        if np.any(truth < 0) or np.any(np.abs(sums - 1.0) > 1e-9):
            raise ValueError("truth rows must be distributions")
        self.truth = truth
        self._cdf = np.cumsum(truth, axis=1)

    @property
    def num_classes(self) -> int:
        return self.truth.shape[1]

    def sample(self, q: int) -> int:
        # inverse-CDF keeps one uniform draw per feedback
        u = self.rng.random()
        c = int(np.searchsorted(self._cdf[q], u, side="right"))
        return min(c, self.num_classes - 1)


def oracle_for(dataset: EmbeddedDataset, rng_seed) -> FeedbackOracle:
    if dataset.truth is None:
        raise ValueError("dataset carries no ground-truth soft labels")
    return FeedbackOracle(dataset.truth, np.random.default_rng(rng_seed))


def draw_events(oracle: FeedbackOracle, n: int, m: int,
                rng_seed) -> list[tuple[int, int]]:
    """m (point, class) pairs: points uniform with replacement from a stream
    seeded by rng_seed, classes from the oracle's own stream."""
    if m < 1:
        raise ValueError("need m >= 1")
    rng = np.random.default_rng(rng_seed)
    points = rng.integers(0, n, size=m)
    return [(int(q), oracle.sample(int(q))) for q in points]


# ---------------------------------------------------------------------------
# metrics

def _probabilities(estimate) -> np.ndarray:
    return np.asarray(getattr(estimate, "probabilities", estimate),
                      dtype=np.float64)


def rmse(estimate, truth: np.ndarray) -> float:
    """Root mean squared error over all n*C matrix entries."""
    est = _probabilities(estimate)
    truth = np.asarray(truth, dtype=np.float64)
    if est.shape != truth.shape:
        raise ValueError(f"shape mismatch {est.shape} vs {truth.shape}")
    return float(np.sqrt(np.mean((est - truth) ** 2)))


def kl_divergence(estimate, truth: np.ndarray, floor: float = 1e-9) -> float:
    """Mean over points of KL(truth || estimate), both floored at `floor`
    and renormalized."""
    if floor <= 0:
        raise ValueError("floor must be positive")
    est = _probabilities(estimate)
    truth = np.asarray(truth, dtype=np.float64)
    if est.shape != truth.shape:
        raise ValueError(f"shape mismatch {est.shape} vs {truth.shape}")
    p = np.maximum(truth, floor)
    p = p / p.sum(axis=1, keepdims=True)
    q = np.maximum(est, floor)
    q = q / q.sum(axis=1, keepdims=True)
    terms = np.where(p > 0.0, p * np.log(p / q), 0.0)
    return float(terms.sum(axis=1).mean())


def save_experiment_records(records: Sequence[dict], path,
                            fields: Optional[Sequence[str]] = None,
                            preamble: Optional[dict] = None) -> None:
    """Line-delimited experiment records with `# key: value` context lines.

    The rng algorithm identifier is always recorded so runs can be replayed.
    """
    if fields is None:
        fields = ["budget", "repetition", "rmse", "kl", "wall_ms"]
    with open(path, "w") as fh:
        fh.write(f"# rng: {RNG_ALGORITHM}\n")
        for key, value in (preamble or {}).items():
            fh.write(f"# {key}: {value}\n")
        fh.write(",".join(fields) + "\n")
        for rec in records:
            fh.write(",".join(_format_field(rec.get(f)) for f in fields) + "\n")


def _format_field(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)
