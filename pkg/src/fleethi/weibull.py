"""Reliability-style expected-HI curve fitted from trajectory threshold crossings.

The fleet's time to reach an HI threshold s is modeled as Weibull(beta, eta_s)
with a shared shape beta. The characteristic lives eta_s are summarized by
HI = A - (B * eta_s)^C, and composing that with the Weibull CDF at confidence
P gives the expected-HI curve

    g(t) = A - (B * t * (-ln(1 - P))^(-1/beta))^C, clipped to [0, A].
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import brentq, least_squares

log = logging.getLogger(__name__)

DEFAULT_THRESHOLDS = (0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2)
BETA_CAP = 200.0

WEIBULL_FORMAT = "fleethi-weibull-1"


class FitError(Exception):
    pass


def _as_th(traj):
    if hasattr(traj, "t") and hasattr(traj, "h"):
        return np.asarray(traj.t, dtype=float), np.asarray(traj.h, dtype=float)
    t, h = traj
    return np.asarray(t, dtype=float), np.asarray(h, dtype=float)


def crossing_times(trajectories, thresholds) -> dict[float, list[float]]:
    """First time each unit's HI falls to each threshold, interpolated.

    Units that never reach a threshold are excluded from that threshold's
    list (right censoring dropped). Thresholds nobody reaches are omitted
    with a warning.
    """
    thresholds = list(thresholds)
    if any(not (0 < s < 1) for s in thresholds):
        raise ValueError("thresholds must lie strictly inside (0, 1)")
    out: dict[float, list[float]] = {}
    for s in thresholds:
        times = []
        for traj in trajectories:
            t, h = _as_th(traj)
            below = np.nonzero(h <= s)[0]
            if below.size == 0:
                continue
            i = below[0]
            if i == 0:
                times.append(float(t[0]))
            else:
                # linear interpolation between the bracketing cycles
                frac = (h[i - 1] - s) / (h[i - 1] - h[i])
                times.append(float(t[i - 1] + frac * (t[i] - t[i - 1])))
        if times:
            out[s] = times
        else:
            log.warning("threshold %.3g reached by no unit, omitted", s)
    return out


@dataclass
class WeibullMLE:
    beta: float
    eta: float
    degenerate: bool = False


def fit_weibull(times) -> WeibullMLE:
    """Two-parameter Weibull maximum likelihood (no location shift).

    A point mass (all times equal) drives beta to infinity; it is capped at
    200 and flagged. Fitting is done on scale-normalized times, which makes
    the estimate exactly equivariant under time scaling.
    """
    times = np.asarray(times, dtype=float)
    if times.size < 3:
        raise FitError(f"need at least 3 samples to fit a Weibull, got {times.size}")
    if times.min() <= 0:
        raise FitError("all times must be positive")
    scale = times.max()
    ts = times / scale
    logs = np.log(ts)
    mean_log = logs.mean()

    def score(beta):
        w = ts ** beta
        return (w * logs).sum() / w.sum() - 1.0 / beta - mean_log

    lo, hi = 1e-3, BETA_CAP
    degenerate = False
    if score(hi) < 0:
        beta = BETA_CAP
        degenerate = True
    elif score(lo) > 0:
        beta = lo
        degenerate = True
    else:
        beta = brentq(score, lo, hi, xtol=1e-10)
    eta = float((np.mean(ts ** beta)) ** (1.0 / beta) * scale)
    return WeibullMLE(beta=float(beta), eta=eta, degenerate=degenerate)


def eta_fixed_beta(times, beta: float) -> float:
    """Scale MLE with the shape held fixed."""
    times = np.asarray(times, dtype=float)
    scale = times.max()
    return float((np.mean((times / scale) ** beta)) ** (1.0 / beta) * scale)


def fit_eta_curve(pairs) -> tuple[float, float, float]:
    """(A, B, C) of s = A - (B * eta_s)^C by bounded nonlinear least squares.

    pairs: iterable of (eta_s, s). Needs at least 3 thresholds.
    """
    pairs = list(pairs)
    if len(pairs) < 3:
        raise FitError(f"need at least 3 (eta, s) pairs, got {len(pairs)}")
    eta = np.array([p[0] for p in pairs], dtype=float)
    s = np.array([p[1] for p in pairs], dtype=float)

    def resid(theta):
        a, b, c = theta
        return a - (b * eta) ** c - s

    x0 = np.array([1.0, 1.0 / eta.max(), 1.0])
    res = least_squares(resid, x0, bounds=([0.8, 1e-10, 1e-3], [1.5, np.inf, 50.0]))
    if not res.success:
        raise FitError(f"eta-curve fit did not converge, residual norm {np.linalg.norm(res.fun):.3g}")
    a, b, c = res.x
    return float(a), float(b), float(c)


@dataclass
class WeibullFit:
    """Fitted expected-HI model: shared shape, per-threshold scales, curve."""

    beta: float
    eta_by_threshold: dict[float, float]
    A: float
    B: float
    C: float
    P: float = 0.5
    degenerate: bool = False

    def save(self, path) -> Path:
        path = Path(path)
        payload = {
            "format": WEIBULL_FORMAT,
            "beta": self.beta, "A": self.A, "B": self.B, "C": self.C, "P": self.P,
            "degenerate": self.degenerate,
            "eta_by_threshold": {f"{s:.6g}": eta for s, eta in self.eta_by_threshold.items()},
        }
        path.write_text(json.dumps(payload, indent=2, sort_keys=True))
        return path

    @classmethod
    def load(cls, path) -> "WeibullFit":
        payload = json.loads(Path(path).read_text())
        if payload.get("format") != WEIBULL_FORMAT:
            raise FitError(f"unrecognized weibull file format in {path}")
        return cls(beta=payload["beta"],
                   eta_by_threshold={float(s): v for s, v in payload["eta_by_threshold"].items()},
                   A=payload["A"], B=payload["B"], C=payload["C"], P=payload["P"],
                   degenerate=payload.get("degenerate", False))


def fit_expected_hi(trajectories, thresholds=DEFAULT_THRESHOLDS, P: float = 0.5) -> WeibullFit:
    """Full pipeline: crossings -> shared beta -> eta per threshold -> (A,B,C).

    The shape is fitted once on the failure times (each unit's last cycle)
    and shared across thresholds; each eta_s is then a fixed-shape MLE.
    """
    trajectories = list(trajectories)
    if not (0 < P < 1):
        raise FitError("P must lie in (0, 1)")
    failure_times = []
    for traj in trajectories:
        t, _ = _as_th(traj)
        if t[-1] <= 0:
            raise FitError("failure times must be positive; shift cycle indices")
        failure_times.append(t[-1])
    mle = fit_weibull(failure_times)
    crossings = crossing_times(trajectories, thresholds)
    eta_by = {}
    for s, times in crossings.items():
        if len(times) < 3:
            log.warning("threshold %.3g crossed by only %d units", s, len(times))
        pos = [x for x in times if x > 0]
        if not pos:
            continue
        eta_by[s] = eta_fixed_beta(pos, mle.beta)
    a, b, c = fit_eta_curve([(eta, s) for s, eta in eta_by.items()])
    # eta should grow as the threshold deepens (s decreasing)
    etas = [eta_by[s] for s in sorted(eta_by, reverse=True)]
    if any(later < earlier for earlier, later in zip(etas, etas[1:])):
        log.warning("eta_s is not non-increasing in s; check trajectory orientation")
    return WeibullFit(beta=mle.beta, eta_by_threshold=eta_by, A=a, B=b, C=c, P=P,
                      degenerate=mle.degenerate)


def g_of_t(t, fit: WeibullFit):
    """Expected HI at cycle(s) t, clipped to [0, A]."""
    if not (0 < fit.P < 1):
        raise FitError("P must lie in (0, 1)")
    t_arr = np.asarray(t, dtype=float)
    if t_arr.min() < 0:
        raise ValueError("t must be >= 0")
    q = (-np.log(1.0 - fit.P)) ** (-1.0 / fit.beta)
    g = fit.A - (fit.B * t_arr * q) ** fit.C
    g = np.clip(g, 0.0, fit.A)
    return float(g) if np.ndim(t) == 0 else g
