"""Per-(point, class) epistemic confidence intervals over a spreading session.

Wilson intervals treat the floored accumulators as integer virtual
experiments: k = floor(Y[q, c]) successes out of n_virt = floor(N[q]) trials.
Hoeffding intervals invert the weighted tail bound on the unfloored score
ratio and add an explicit Lipschitz bias term fed by the session's B
accumulator."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .session import AnnotationSession


@dataclass(frozen=True)
class ConfidenceInterval:
    lower: float
    upper: float
    method: str   # "wilson" or "hoeffding"
    level: float  # nominal coverage in (0, 1)
    undefined: bool = False  # no mass received; interval is the trivial [0,1]

    def __post_init__(self):
        # numpy scalars leak through accumulator arithmetic; plain floats
        # keep reprs round-trippable and wire payloads JSON-clean
        object.__setattr__(self, "lower", float(self.lower))
        object.__setattr__(self, "upper", float(self.upper))


def wilson_ci(session: AnnotationSession, q: int, c: int,
              z: float = 1.96) -> ConfidenceInterval:
    """Wilson score interval with critical value z (1.96 ~ 95%)."""
    if z <= 0:
        raise ValueError("critical value z must be positive")
    level = float(2.0 * ndtr(z) - 1.0)
    k = math.floor(session.Y[q, c])
    n_virt = math.floor(session.N[q])
    if n_virt == 0:
        return ConfidenceInterval(0.0, 1.0, "wilson", level, undefined=True)
    denom = n_virt + z * z
    center = (k + z * z / 2.0) / denom
    half = z * math.sqrt(k * (n_virt - k) / n_virt + z * z / 4.0) / denom
    return ConfidenceInterval(max(0.0, center - half), min(1.0, center + half),
                              "wilson", level)


def hoeffding_ci(session: AnnotationSession, q: int, c: int,
                 delta: float = 0.05,
                 bonferroni: bool = False) -> ConfidenceInterval:
    """Hoeffding-type interval around the unfloored score ratio.

    eps0 = sqrt((Q_q / N_q^2) * ln(2/delta') / 2) inverts
    2*exp(-2*eps^2*N^2/Q) = delta'; the Lipschitz bias bound B/N widens the
    interval on both sides.  With `bonferroni` the level is split across
    classes (delta' = delta/C)."""
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    if session.B is None:
        raise ValueError(
            "session has no Lipschitz bias accumulator; construct it with "
            "a lipschitz constant to enable hoeffding intervals")
    level = 1.0 - delta
    eff = delta / session.num_classes if bonferroni else delta
    N = session.N[q]
    if N == 0:
        return ConfidenceInterval(0.0, 1.0, "hoeffding", level, undefined=True)
    p = session.Y[q, c] / N
    eps0 = math.sqrt((session.Q[q] / (N * N)) * math.log(2.0 / eff) / 2.0)
    bias = session.B[q] / N
    return ConfidenceInterval(max(0.0, p - eps0 - bias),
                              min(1.0, p + eps0 + bias),
                              "hoeffding", level)


def ci_report(session: AnnotationSession, method: str,
              **params) -> list[tuple[int, int, ConfidenceInterval]]:
    """All n*C intervals as (point_index, class_index, interval) rows,
    point-major order."""
    if method == "wilson":
        one = lambda q, c: wilson_ci(session, q, c, **params)
    elif method == "hoeffding":
        one = lambda q, c: hoeffding_ci(session, q, c, **params)
    else:
        raise ValueError(f"unknown interval method {method!r}")
    return [(q, c, one(q, c))
            for q in range(session.n) for c in range(session.num_classes)]


def save_ci_report(ids, rows, path) -> None:
    """Write `id,class,lower,upper,method` at round-trip precision."""
    with open(path, "w") as fh:
        fh.write("id,class,lower,upper,method\n")
        for q, c, ci in rows:
            fh.write(f"{ids[q]},{c},{ci.lower!r},{ci.upper!r},{ci.method}\n")
