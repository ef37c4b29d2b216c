"""Turning model outputs into normalized per-unit health trajectories.

Raw per-window scalars (PCA-projected residuals or the autoencoder latent)
are averaged per cycle, oriented so health starts high and falls, min-max
normalized over the training fleet, and clipped to [0, 1]. The battery view
maps [0, 1] linearly onto the 60..100 percent state-of-health range.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)

SOH_FAILURE_PERCENT = 60.0


@dataclass
class HITrajectory:
    unit_id: str
    t: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        self.t = np.asarray(self.t)
        self.h = np.asarray(self.h, dtype=float)
        if len(self.t) != len(self.h):
            raise ValueError(f"unit {self.unit_id}: t and h lengths differ")


def compute_residual(x: np.ndarray, x_hat: np.ndarray,
                     mask: np.ndarray | None = None) -> np.ndarray:
    """Per-window residual vector: |x - x_hat| averaged over the time axis.

    x, x_hat: [n, S, p]; mask: [n, S] flags real rows. Returns [n, p].
    """
    x = np.asarray(x, dtype=float)
    x_hat = np.asarray(x_hat, dtype=float)
    if x.shape != x_hat.shape:
        raise ValueError(f"shape mismatch {x.shape} vs {x_hat.shape}")
    err = np.abs(x - x_hat)
    if mask is None:
        return err.mean(axis=1)
    m = np.asarray(mask, dtype=float)[:, :, None]
    counts = m.sum(axis=1)
    counts[counts == 0] = 1.0
    return (err * m).sum(axis=1) / counts


@dataclass
class PcaFit:
    """Mean and first principal direction of training residuals."""

    mean: np.ndarray
    direction: np.ndarray  # unit norm
    sign: float = 1.0  # convention: largest-magnitude component positive


def fit_pca(residuals: np.ndarray) -> PcaFit:
    r = np.asarray(residuals, dtype=float)
    if r.ndim != 2 or r.shape[0] < 2:
        raise ValueError("need a [n >= 2, p] residual matrix")
    mean = r.mean(axis=0)
    centered = r - mean
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    if s[0] <= 1e-12:
        raise ValueError("degenerate PCA: residuals have zero variance")
    direction = vt[0]
    sign = 1.0 if direction[np.argmax(np.abs(direction))] > 0 else -1.0
    return PcaFit(mean=mean, direction=direction * sign, sign=sign)


def project_residuals(residuals: np.ndarray, pca: PcaFit) -> np.ndarray:
    return (np.asarray(residuals, dtype=float) - pca.mean) @ pca.direction


def save_pca(pca: PcaFit, path):
    import json
    from pathlib import Path as _P

    payload = {"format": "fleethi-pca-1", "mean": pca.mean.tolist(),
               "direction": pca.direction.tolist(), "sign": pca.sign}
    _P(path).write_text(json.dumps(payload, indent=2, sort_keys=True))
    return _P(path)


def load_pca(path) -> PcaFit:
    import json
    from pathlib import Path as _P

    payload = json.loads(_P(path).read_text())
    if payload.get("format") != "fleethi-pca-1":
        raise ValueError(f"unrecognized PCA file {path}")
    return PcaFit(mean=np.array(payload["mean"]),
                  direction=np.array(payload["direction"]), sign=payload["sign"])


def per_cycle_series(values: np.ndarray, meta) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Average per-window scalars per (unit, cycle); returns unit -> (t, v)."""
    acc: dict[str, dict[int, list[float]]] = {}
    for v, m in zip(np.asarray(values, dtype=float), meta):
        acc.setdefault(m.unit_id, {}).setdefault(m.cycle, []).append(float(v))
    out = {}
    for uid, cyc in acc.items():
        ts = np.array(sorted(cyc), dtype=int)
        vs = np.array([np.mean(cyc[t]) for t in ts])
        out[uid] = (ts, vs)
    return out


@dataclass
class HiNormalizer:
    """Fleet-level orientation and min-max statistics from training units."""

    sign: float
    lo: float
    hi: float
    degenerate: bool = False

    def transform(self, v: np.ndarray) -> np.ndarray:
        if self.degenerate:
            return np.ones_like(np.asarray(v, dtype=float))
        scaled = (self.sign * np.asarray(v, dtype=float) - self.lo) / (self.hi - self.lo)
        return np.clip(scaled, 0.0, 1.0)


def fit_normalizer(series: dict[str, tuple[np.ndarray, np.ndarray]],
                   fit_units=None) -> HiNormalizer:
    """Majority-vote orientation over training units, then fleet min-max.

    Each unit with at least 2 cycles votes by comparing the mean of its first
    10 percent of cycles against its last 10 percent; single-cycle units
    abstain and inherit the fleet orientation.
    """
    fit_units = list(fit_units) if fit_units is not None else list(series)
    vote = 0.0
    for uid in fit_units:
        _, v = series[uid]
        if v.size < 2:
            continue
        n10 = max(1, v.size // 10)
        vote += np.sign(v[:n10].mean() - v[-n10:].mean())
    sign = -1.0 if vote < 0 else 1.0
    allv = np.concatenate([series[uid][1] for uid in fit_units]) * sign
    lo, hi = float(allv.min()), float(allv.max())
    if hi - lo < 1e-15:
        log.warning("degenerate HI normalization: all values equal, mapping to 1")
        return HiNormalizer(sign=sign, lo=lo, hi=hi, degenerate=True)
    return HiNormalizer(sign=sign, lo=lo, hi=hi)


def _apply(series, norm: HiNormalizer) -> list[HITrajectory]:
    return [HITrajectory(unit_id=uid, t=ts, h=norm.transform(vs))
            for uid, (ts, vs) in series.items()]


def residual_to_hi(residuals: np.ndarray, meta, pca: PcaFit,
                   norm: HiNormalizer | None = None,
                   fit_units=None) -> tuple[list[HITrajectory], HiNormalizer]:
    """Project residuals, average per cycle, orient and normalize.

    Pass fit_units (training unit ids) to pin normalization statistics to the
    training fleet; test units are clipped into [0, 1].
    """
    scalars = project_residuals(residuals, pca)
    series = per_cycle_series(scalars, meta)
    if norm is None:
        norm = fit_normalizer(series, fit_units)
    return _apply(series, norm), norm


def latent_to_hi(z: np.ndarray, meta, norm: HiNormalizer | None = None,
                 fit_units=None) -> tuple[list[HITrajectory], HiNormalizer]:
    """Per-cycle latents to normalized trajectories; no smoothing."""
    series = per_cycle_series(z, meta)
    if norm is None:
        norm = fit_normalizer(series, fit_units)
    return _apply(series, norm), norm


def load_hi_csv(path) -> list[HITrajectory]:
    """Read a unit,cycle,hi (or unit,cycle,soh_percent) table back."""
    import pandas as pd

    df = pd.read_csv(path)
    if {"unit", "cycle", "hi"}.issubset(df.columns):
        col, from_soh = "hi", False
    elif {"unit", "cycle", "soh_percent"}.issubset(df.columns):
        col, from_soh = "soh_percent", True
    else:
        raise ValueError("HI csv needs columns unit,cycle and hi or soh_percent")
    out = []
    for uid, grp in df.groupby("unit", sort=False):
        grp = grp.sort_values("cycle")
        h = grp[col].to_numpy(dtype=float)
        if from_soh:
            h = (h - SOH_FAILURE_PERCENT) / (100.0 - SOH_FAILURE_PERCENT)
        out.append(HITrajectory(unit_id=str(uid), t=grp["cycle"].to_numpy(), h=h))
    return out


def to_soh(h) -> np.ndarray | float:
    """Map HI in [0, 1] to state-of-health percent in [60, 100]."""
    h_arr = np.asarray(h, dtype=float)
    if h_arr.min() < 0 or h_arr.max() > 1:
        raise ValueError("HI must lie in [0, 1]")
    soh = SOH_FAILURE_PERCENT + (100.0 - SOH_FAILURE_PERCENT) * h_arr
    return float(soh) if np.ndim(h) == 0 else soh
