"""Quality criteria for health-index trajectories.

All criteria live in [0, 1]. Monotonicity supports two readings of the step
indicator sum: the default "signed" form takes the absolute value of the sum
of step signs (so a zigzag scores low), while "fraction" takes the mean of
per-step absolute indicators (the fraction of strictly changing steps).
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, asdict

import numpy as np
from scipy import stats

log = logging.getLogger(__name__)


def monotonicity(h, mode: str = "signed") -> float:
    h = np.asarray(h, dtype=float)
    if h.size < 2:
        raise ValueError("monotonicity needs at least 2 observations")
    d = np.diff(h)
    steps = (d > 0).astype(float) - (d < 0).astype(float)
    if mode == "signed":
        return float(abs(steps.sum()) / (h.size - 1))
    if mode == "fraction":
        return float(np.abs(steps).sum() / (h.size - 1))
    raise ValueError("mode must be 'signed' or 'fraction'")


def trendability(h, t) -> float:
    """Absolute Spearman rank correlation between cycle index and HI."""
    h = np.asarray(h, dtype=float)
    t = np.asarray(t, dtype=float)
    if h.size != t.size:
        raise ValueError("h and t must be aligned")
    if h.size < 2:
        raise ValueError("trendability needs at least 2 observations")
    if np.ptp(h) == 0 or np.ptp(t) == 0:
        return 0.0
    rho = stats.spearmanr(t, h).statistic
    return 0.0 if np.isnan(rho) else float(abs(rho))


def prognosability(trajectories) -> float:
    """exp(-std of end-of-life values / mean absolute total degradation).

    trajectories: iterable of per-unit HI arrays. Uses the population
    standard deviation; a fleet where no unit degrades scores 0.
    """
    ends, drops = [], []
    for h in trajectories:
        h = np.asarray(h, dtype=float)
        if h.size < 1:
            raise ValueError("empty trajectory")
        ends.append(h[-1])
        drops.append(abs(h[-1] - h[0]))
    mu = float(np.mean(drops))
    if mu == 0:
        log.warning("prognosability degenerate: no unit degrades, returning 0")
        return 0.0
    return float(np.exp(-np.std(ends) / mu))


def histogram_mutual_information(x, y, bins: int = 10) -> float:
    """Mutual information in nats from a 2-D equal-width histogram."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    joint, _, _ = np.histogram2d(x, y, bins=bins)
    pxy = joint / joint.sum()
    px = pxy.sum(axis=1, keepdims=True)
    py = pxy.sum(axis=0, keepdims=True)
    nz = pxy > 0
    return float(np.sum(pxy[nz] * np.log(pxy[nz] / (px @ py)[nz])))


def mutinf_score_from_nats(i_nats: float) -> float:
    return float(1.0 - np.exp(-i_nats))


def mutual_info_score(h_per_unit, rul_per_unit, bins: int = 10,
                      min_length: int = 10) -> float:
    """Mean over units of 1 - exp(-I(h, RUL)); short units are skipped."""
    scores = []
    for h, rul in zip(h_per_unit, rul_per_unit):
        h = np.asarray(h, dtype=float)
        rul = np.asarray(rul, dtype=float)
        if h.size != rul.size:
            raise ValueError("h and RUL must be aligned per unit")
        if h.size < min_length:
            log.warning("unit series of length %d < %d skipped in MutInf",
                        h.size, min_length)
            continue
        scores.append(mutinf_score_from_nats(histogram_mutual_information(h, rul, bins)))
    if not scores:
        raise ValueError("no unit long enough for mutual information")
    return float(np.mean(scores))


def mape(h_est, h_gt, floor: float = 0.01) -> float:
    """Mean absolute percentage error with the ground truth floored at 0.01."""
    h_est = np.asarray(h_est, dtype=float)
    h_gt = np.asarray(h_gt, dtype=float)
    if h_est.shape != h_gt.shape:
        raise ValueError(f"misaligned series: {h_est.shape} vs {h_gt.shape}")
    return float(100.0 * np.mean(np.abs(h_est - h_gt) / np.maximum(h_gt, floor)))


@dataclass
class MetricReport:
    """Mean and standard deviation of each criterion across runs."""

    mon_mean: float
    mon_std: float
    tren_mean: float
    tren_std: float
    prog_mean: float
    prog_std: float
    mutinf_mean: float
    mutinf_std: float
    mape_mean: float
    mape_std: float
    n_runs: int

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def evaluate_fleet_hi(trajectories, ground_truth=None, mon_mode: str = "signed") -> dict:
    """Criteria for one run over a set of per-unit trajectories.

    trajectories: list of (t, h) pairs per unit, in fleet order.
    ground_truth: optional list of per-unit GT arrays aligned with h.
    """
    hs = [np.asarray(h, dtype=float) for _, h in trajectories]
    ts = [np.asarray(t, dtype=float) for t, _ in trajectories]
    out = {
        "mon": float(np.mean([monotonicity(h, mon_mode) for h in hs])),
        "tren": float(np.mean([trendability(h, t) for h, t in zip(hs, ts)])),
        "prog": prognosability(hs),
        "mutinf": mutual_info_score(hs, [t[-1] - t for t in ts]),
    }
    if ground_truth is not None:
        out["mape"] = float(np.mean([mape(h, g) for h, g in zip(hs, ground_truth)]))
    return out


def aggregate_runs(per_run: list[dict]) -> MetricReport:
    """Fold per-run criterion dicts into the mean/std report."""
    if not per_run:
        raise ValueError("no runs to aggregate")

    def agg(key):
        vals = np.array([r.get(key, np.nan) for r in per_run], dtype=float)
        if np.isnan(vals).all():
            return 0.0, 0.0
        return float(np.mean(vals)), float(np.std(vals))

    mon = agg("mon")
    tren = agg("tren")
    prog = agg("prog")
    mutinf = agg("mutinf")
    mp = agg("mape")
    return MetricReport(mon_mean=mon[0], mon_std=mon[1], tren_mean=tren[0],
                        tren_std=tren[1], prog_mean=prog[0], prog_std=prog[1],
                        mutinf_mean=mutinf[0], mutinf_std=mutinf[1],
                        mape_mean=mp[0], mape_std=mp[1], n_runs=len(per_run))
