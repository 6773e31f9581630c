"""Asymptotic parameter schedules and an empirical consistency harness.

The schedule couples the spreading intensity, path length, graph bandwidth,
and annotation budget to the sample size:

    alpha_n = 1 - n^(-1/(d+1))
    l_n     = smallest integer with alpha_n^l below the accuracy target
    h_n     = eps / l_n                 ("plain" variant)
              eps / (3 * L * l_n)      ("conservative" variant, which also
                                        shrinks the target to eps/(12*sqrt 2))
    m_n     = ceil(kappa * n^(1 - 1/(2(d+1))) * ln n)

The harness checks the headline behavior empirically: estimates computed
from m_n random annotations on an h_n-bandwidth unit-weight graph with
random-walk normalization should have a shrinking worst-case error as n
grows.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .graph import build_epsilon_graph, normalize
from .session import ESTIMATE_FLOOR
from .solver import HeatKernelSolver, SolverConfig
from .synth import draw_events, make_sine_1d, oracle_for

VARIANTS = ("plain", "conservative")

# harness domain: short enough that the epsilon-graph connects at the n
# values of interest while the truth still covers a full sine period
HARNESS_RANGE = (0.0, 1.0)


@dataclass(frozen=True)
class RateSchedule:
    n: int
    d: int
    eps: float
    lipschitz: float
    kappa: float
    variant: str
    alpha_n: float
    l_n: int
    h_n: float
    m_n: int


def rate_schedule(n: int, d: int, eps: float, lipschitz: float = 1.0,
                  kappa: float = 1.0, variant: str = "plain") -> RateSchedule:
    """Evaluate the schedule at one n; guarantees alpha_n^l_n < target."""
    if n < 2:
        raise ValueError("need n >= 2")
    if d < 1:
        raise ValueError("need d >= 1")
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    if lipschitz <= 0 or kappa <= 0:
        raise ValueError("lipschitz and kappa must be positive")
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    alpha = 1.0 - n ** (-1.0 / (d + 1))
    target = eps if variant == "plain" else eps / (12.0 * math.sqrt(2.0))
    l = math.ceil(math.log(target) / math.log(alpha))
    while alpha ** l >= target:  # ceil can land exactly on the boundary
        l += 1
    h = eps / l if variant == "plain" else eps / (3.0 * lipschitz * l)
    m = math.ceil(kappa * n ** (1.0 - 1.0 / (2.0 * (d + 1))) * math.log(n))
    assert alpha ** l < target
    return RateSchedule(n=n, d=d, eps=eps, lipschitz=lipschitz, kappa=kappa,
                        variant=variant, alpha_n=alpha, l_n=l, h_n=h, m_n=m)


def verify_decay(eps: float, d: int = 1, n_lo: int = 2,
                 n_hi: int = 10 ** 6) -> bool:
    """Vectorized check that alpha_n^l_n < eps for every n in [n_lo, n_hi]
    (plain variant)."""
    n = np.arange(n_lo, n_hi + 1, dtype=np.float64)
    alpha = 1.0 - n ** (-1.0 / (d + 1))
    l = np.ceil(np.log(eps) / np.log(alpha))
    short = alpha ** l >= eps
    while short.any():
        l[short] += 1
        short = alpha ** l >= eps
    return bool((alpha ** l < eps).all())


def _floored_estimates(Y: np.ndarray) -> np.ndarray:
    """Estimates from raw per-class mass: same floor rule as the session."""
    n, C = Y.shape
    N = Y.sum(axis=1)
    P = np.full((n, C), 1.0 / C)
    got = N > 0
    P[got] = (Y[got] + ESTIMATE_FLOOR) / (N[got] + C * ESTIMATE_FLOOR)[:, None]
    return P


def consistency_experiment(ns: Sequence[int], eps: float,
                           lipschitz: float = 1.0, kappa: float = 1.0,
                           target: str = "sine_1d", reps: int = 10,
                           rng_seed=0,
                           domain: tuple[float, float] = HARNESS_RANGE,
                           ) -> list[dict]:
    """Per-(n, repetition) worst-case and mean estimation error.

    For each n: sample the 1-D sine dataset, build the unit-weight graph at
    bandwidth h_n, spread m_n uniform oracle annotations with alpha_n under
    random-walk normalization (raw scores, batched one solve per class), and
    record max_q and mean_q of ||p_hat_q - p_q||_2.  Repetition r uses the
    same spawned seed block across all n, so trends can be compared pairwise
    per repetition.  Failures (e.g. solver breakdown on a shattered graph)
    are recorded in the row's status, not raised.
    """
    if list(ns) != sorted(ns) or len(ns) == 0:
        raise ValueError("ns must be a nonempty ascending sequence")
    if target != "sine_1d":
        raise ValueError(f"unknown target {target!r}")
    if reps < 1:
        raise ValueError("need reps >= 1")
    lo, hi = domain
    rep_seeds = np.random.SeedSequence(rng_seed).spawn(reps)
    rows = []
    for r, rep_seed in enumerate(rep_seeds):
        n_seeds = rep_seed.spawn(len(ns))
        for n, n_seed in zip(ns, n_seeds):
            sched = rate_schedule(int(n), 1, eps, lipschitz, kappa, "plain")
            started = time.perf_counter()
            row = {
                "n": int(n), "repetition": r, "alpha_n": sched.alpha_n,
                "h_n": sched.h_n, "m_n": sched.m_n,
                "max_error": math.nan, "mean_error": math.nan,
                "status": "ok", "wall_ms": math.nan,
            }
            try:
                data_seed, oracle_seed, point_seed = n_seed.spawn(3)
                ds = make_sine_1d(int(n), lo, hi, rng_seed=data_seed)
                graph = build_epsilon_graph(ds, sched.h_n)
                op = normalize(graph, "random_walk")
                solver = HeatKernelSolver(op, SolverConfig(alpha=sched.alpha_n))
                oracle = oracle_for(ds, oracle_seed)
                C = oracle.num_classes
                Z = np.zeros((int(n), C))
                for q, c in draw_events(oracle, int(n), sched.m_n, point_seed):
                    Z[q, c] += 1.0
                Y, _, _ = solver.solve(Z)
                P = _floored_estimates(Y)
                err = np.linalg.norm(P - ds.truth, axis=1)
                row["max_error"] = float(err.max())
                row["mean_error"] = float(err.mean())
            except Exception as exc:  # per-repetition failure is data
                row["status"] = f"error: {exc}"
            row["wall_ms"] = 1000.0 * (time.perf_counter() - started)
            rows.append(row)
    return rows
