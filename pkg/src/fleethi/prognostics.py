"""RUL prediction harness for measuring the prognostic value of a health index.

A convolutional baseline G(X, W, t) is compared against the augmented model
G(X, W, t, h); the percent average improvement over MAE, RMSE, and MAPE
quantifies what the health channel buys.
"""

from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass, asdict, field

import numpy as np
import torch
from torch import nn

# size-10 kernels with same-padding trigger a benign performance warning
warnings.filterwarnings("ignore", message="Using padding='same' with even kernel")

from .fleet import FleetDataset
from .ingest import WindowMeta

log = logging.getLogger(__name__)

RUL_PRESETS = {"turbofan": {"conv_channels": (10, 10, 1), "window": 50},
               "battery": {"conv_channels": (10, 10, 10), "window": 200}}


class RulDataError(Exception):
    pass


@dataclass
class RulDataset:
    """Sliding windows with channels (sensors.., conditions.., t [, h])."""

    windows: np.ndarray  # [n, S, C]
    labels: np.ndarray  # [n] RUL in cycles, possibly capped
    meta: list[WindowMeta]
    has_hi: bool
    S: int
    cap: float | None = None

    @property
    def n_windows(self) -> int:
        return self.windows.shape[0]

    @property
    def n_channels(self) -> int:
        return self.windows.shape[2]


def build_rul_dataset(fleet: FleetDataset, hi=None, S: int = 50, stride: int = 1,
                      cap: float | None = None, t_scale: float | None = None) -> RulDataset:
    """Sliding RUL windows over each unit's concatenated rows.

    The label is the (optionally capped) number of cycles from the window's
    last row to the unit's end of life. The cycle channel is the raw index
    divided by t_scale (pass the training fleet's maximum cycle). hi, when
    given, is a per-unit trajectory set; its value is broadcast as a constant
    channel over each cycle's rows and must cover every cycle.
    """
    if S < 1 or stride < 1:
        raise ValueError("S and stride must be >= 1")
    hi_lookup: dict[tuple[str, int], float] = {}
    if hi is not None:
        for traj in hi:
            for t, h in zip(np.asarray(traj.t), np.asarray(traj.h)):
                hi_lookup[(traj.unit_id, int(t))] = float(h)
    if t_scale is None:
        t_scale = float(max(u.cycles[-1].t for u in fleet.units))
    if t_scale <= 0:
        t_scale = 1.0
    wins, labels, metas = [], [], []
    for u in fleet.units:
        x, w, t_rows = u.stacked()
        chans = [x, w, (t_rows / t_scale)[:, None]]
        if hi is not None:
            h_rows = np.empty(len(t_rows))
            for i, t in enumerate(t_rows):
                key = (u.id, int(t))
                if key not in hi_lookup:
                    raise RulDataError(f"missing HI for unit {u.id} cycle {int(t)}")
                h_rows[i] = hi_lookup[key]
            chans.append(h_rows[:, None])
        rows = np.concatenate(chans, axis=1)
        t_eol = u.cycles[-1].t
        n = rows.shape[0]
        if n < S:
            log.warning("unit %s has %d rows < RUL window %d, skipped", u.id, n, S)
            continue
        for start in range(0, n - S + 1, stride):
            last_cycle = int(t_rows[start + S - 1])
            rul = float(t_eol - last_cycle)
            if cap is not None:
                rul = min(rul, float(cap))
            wins.append(rows[start:start + S])
            labels.append(rul)
            metas.append(WindowMeta(unit_id=u.id, cycle=last_cycle))
    if not wins:
        raise RulDataError("no unit long enough for the requested RUL window")
    return RulDataset(windows=np.stack(wins), labels=np.array(labels), meta=metas,
                      has_hi=hi is not None, S=S, cap=cap)


class RulNet(nn.Module):
    """Three same-padded convolutions, then a window-length dense layer.

    Targets are standardized during training; the affine label scale lives in
    buffers so predictions come back in cycles.
    """

    def __init__(self, channels: int, S: int, conv_channels=(10, 10, 1)):
        super().__init__()
        layers, c_in = [], channels
        for i, c_out in enumerate(conv_channels):
            layers.append(nn.Conv1d(c_in, c_out, 10, padding="same"))
            # no ReLU on the last conv: a rectified 1-channel bottleneck can die
            if i < len(conv_channels) - 1:
                layers.append(nn.ReLU())
            c_in = c_out
        self.body = nn.Sequential(*layers)
        self.hidden = nn.Linear(conv_channels[-1] * S, S)
        self.out = nn.Linear(S, 1)
        self.channels = channels
        self.register_buffer("y_mu", torch.zeros(()))
        self.register_buffer("y_sigma", torch.ones(()))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        feats = self.body(x).flatten(1)
        return self.out(torch.relu(self.hidden(feats))).squeeze(-1)

    def predict_cycles(self, x: torch.Tensor) -> torch.Tensor:
        return self(x) * self.y_sigma + self.y_mu


def build_rul_model(channels: int, S: int, preset: str = "turbofan",
                    seed: int | None = None) -> RulNet:
    if preset not in RUL_PRESETS:
        raise ValueError(f"preset must be one of {sorted(RUL_PRESETS)}")
    if seed is not None:
        torch.manual_seed(seed)
    return RulNet(channels, S, conv_channels=RUL_PRESETS[preset]["conv_channels"])


def train_rul(model: RulNet, ds: RulDataset, epochs: int = 10, batch_size: int = 64,
              learning_rate: float = 1e-3, seed: int = 0) -> list[dict]:
    """Least-squares training; returns per-epoch loss history."""
    if ds.n_channels != model.channels:
        raise ValueError(f"dataset has {ds.n_channels} channels, model expects {model.channels}")
    torch.manual_seed(seed)
    rng = np.random.default_rng(seed)
    x_all = torch.as_tensor(ds.windows, dtype=torch.float32).transpose(1, 2).contiguous()
    mu = float(ds.labels.mean())
    sigma = float(ds.labels.std()) or 1.0
    model.y_mu.fill_(mu)
    model.y_sigma.fill_(sigma)
    y_all = torch.as_tensor((ds.labels - mu) / sigma, dtype=torch.float32)
    opt = torch.optim.Adam(model.parameters(), lr=learning_rate)
    history = []
    model.train()
    for epoch in range(1, epochs + 1):
        perm = rng.permutation(ds.n_windows)
        tot = 0.0
        for s in range(0, ds.n_windows, batch_size):
            idx = perm[s:s + batch_size]
            pred = model(x_all[idx])
            loss = ((pred - y_all[idx]) ** 2).mean()
            opt.zero_grad()
            loss.backward()
            opt.step()
            tot += loss.item() * len(idx)
        history.append({"epoch": epoch, "l_total": tot / ds.n_windows})
    model.eval()
    return history


@dataclass
class RULReport:
    mae: float
    rmse: float
    mape: float
    avg_improvement: float | None = None
    excluded_metrics: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


@torch.no_grad()
def predict_rul(model: RulNet, ds: RulDataset, batch: int = 512) -> np.ndarray:
    model.eval()
    x_all = torch.as_tensor(ds.windows, dtype=torch.float32).transpose(1, 2).contiguous()
    out = [model.predict_cycles(x_all[s:s + batch]).numpy()
           for s in range(0, ds.n_windows, batch)]
    return np.concatenate(out)


def evaluate_rul(model: RulNet, ds: RulDataset) -> RULReport:
    """MAE, RMSE, and MAPE (true RUL floored at one cycle) on a test set."""
    pred = predict_rul(model, ds)
    err = pred - ds.labels
    mae = float(np.abs(err).mean())
    rmse = float(np.sqrt((err ** 2).mean()))
    mape_v = float(100.0 * np.mean(np.abs(err) / np.maximum(ds.labels, 1.0)))
    return RULReport(mae=mae, rmse=rmse, mape=mape_v)


def average_improvement(baseline: RULReport, augmented: RULReport) -> float:
    """Mean percent improvement over MAE, RMSE, MAPE; zero baselines excluded."""
    gains, excluded = [], []
    for name in ("mae", "rmse", "mape"):
        b, a = getattr(baseline, name), getattr(augmented, name)
        if b == 0:
            excluded.append(name)
            log.warning("baseline %s is 0, excluded from average improvement", name)
            continue
        gains.append(100.0 * (b - a) / b)
    if not gains:
        raise ValueError("all baseline metrics are zero; improvement undefined")
    augmented.excluded_metrics = excluded
    return float(np.mean(gains))
