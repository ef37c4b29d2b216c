"""Fleet disk I/O and preprocessing: scaling, downsampling, windowing.

Fleet CSV layout: one file per unit with columns
``cycle,w_0..w_{k-1},x_0..x_{p-1}[,hi_gt]``, UTF-8, ``.`` decimal separator.
A ``fleet.json`` manifest records unit order and class tags; directories
without one are loaded by filename with a default class tag.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .fleet import CycleRecord, FleetDataset, Unit

log = logging.getLogger(__name__)

MANIFEST_NAME = "fleet.json"
MANIFEST_FORMAT = "fleethi-fleet-1"


class DataError(Exception):
    """Raised for malformed fleet inputs; message names the offending unit/row."""


# ---------------------------------------------------------------------------
# CSV round trip
# ---------------------------------------------------------------------------

def save_fleet(fleet: FleetDataset, path) -> Path:
    """Write one CSV per unit plus the manifest; returns the directory."""
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for unit in fleet.units:
        p = unit.cycles[0].x.shape[1]
        k = unit.cycles[0].w.shape[1]
        frames = []
        for i, cyc in enumerate(unit.cycles):
            df = pd.DataFrame({"cycle": np.full(cyc.n_rows, cyc.t, dtype=int)})
            for j in range(k):
                df[f"w_{j}"] = cyc.w[:, j]
            for j in range(p):
                df[f"x_{j}"] = cyc.x[:, j]
            if unit.ground_truth_hi is not None:
                df["hi_gt"] = unit.ground_truth_hi[i]
            frames.append(df)
        fname = f"{unit.id}.csv"
        # %.17g keeps the float round trip exact
        pd.concat(frames, ignore_index=True).to_csv(out / fname, index=False,
                                                    float_format="%.17g")
        entries.append({"id": unit.id, "file": fname, "class_tag": unit.class_tag})
    manifest = {"format": MANIFEST_FORMAT, "units": entries}
    (out / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return out


def _default_schema(columns) -> dict:
    w_cols = sorted([c for c in columns if c.startswith("w_")],
                    key=lambda c: int(c.split("_")[1]))
    x_cols = sorted([c for c in columns if c.startswith("x_")],
                    key=lambda c: int(c.split("_")[1]))
    schema = {"cycle": "cycle", "conditions": w_cols, "sensors": x_cols}
    if "hi_gt" in columns:
        schema["hi"] = "hi_gt"
    return schema


def _load_unit(csv_path: Path, unit_id: str, class_tag: str, schema: dict | None,
               require_sorted: bool) -> Unit:
    df = pd.read_csv(csv_path, float_precision="round_trip")
    sch = schema or _default_schema(df.columns)
    needed = [sch["cycle"]] + list(sch["conditions"]) + list(sch["sensors"])
    missing = [c for c in needed if c not in df.columns]
    if missing:
        raise DataError(f"unit {unit_id}: missing columns {missing} in {csv_path.name}")
    if not sch["sensors"] or not sch["conditions"]:
        raise DataError(f"unit {unit_id}: schema names no sensor or condition columns")
    cyc = df[sch["cycle"]].to_numpy()
    if require_sorted:
        drops = np.nonzero(np.diff(cyc) < 0)[0]
        if drops.size:
            raise DataError(
                f"unit {unit_id}: non-monotone cycle index at row {int(drops[0]) + 1} "
                f"of {csv_path.name}"
            )
    hi_col = sch.get("hi")
    cycles, hi = [], []
    for t in np.unique(cyc):
        grp = df[cyc == t]  # keeps file order within the cycle
        cycles.append(CycleRecord(
            t=int(t),
            x=grp[list(sch["sensors"])].to_numpy(dtype=float),
            w=grp[list(sch["conditions"])].to_numpy(dtype=float),
        ))
        if hi_col is not None:
            hi.append(float(grp[hi_col].iloc[0]))
    return Unit(id=unit_id, class_tag=class_tag, cycles=cycles,
                ground_truth_hi=np.array(hi) if hi_col is not None else None)


def load_fleet(path, schema: dict | None = None, require_sorted: bool = False) -> FleetDataset:
    """Load a fleet directory written by save_fleet (or hand-assembled CSVs).

    Rows are grouped by cycle index and cycles ordered ascending; within a
    cycle, rows keep their file order. With require_sorted=True a cycle index
    that decreases anywhere in the file is a load error instead.
    """
    root = Path(path)
    if not root.is_dir():
        raise DataError(f"fleet path {root} is not a directory")
    manifest_path = root / MANIFEST_NAME
    if manifest_path.exists():
        manifest = json.loads(manifest_path.read_text())
        entries = [(e["id"], root / e["file"], e.get("class_tag", "default"))
                   for e in manifest["units"]]
    else:
        entries = [(f.stem, f, "default") for f in sorted(root.glob("*.csv"))]
    if not entries:
        raise DataError(f"no units found in {root}")
    if schema is None:
        # one schema for the whole fleet, derived from the first unit's header
        schema = _default_schema(pd.read_csv(entries[0][1], nrows=0).columns)
    units = [_load_unit(f, uid, tag, schema, require_sorted) for uid, f, tag in entries]
    return FleetDataset(units=units)


# ---------------------------------------------------------------------------
# Scaling
# ---------------------------------------------------------------------------

@dataclass
class Scaler:
    """Per-channel min-max statistics fitted on training units only.

    Transformed training data lies in [0, 1]; test data is extended affinely
    and deliberately NOT clipped. Constant channels map to 0.
    """

    x_min: np.ndarray
    x_max: np.ndarray
    w_min: np.ndarray
    w_max: np.ndarray
    constant_channels: list[str] = field(default_factory=list)

    def _span(self, lo, hi):
        span = hi - lo
        return np.where(span == 0, 1.0, span)

    def transform_x(self, x: np.ndarray) -> np.ndarray:
        return (x - self.x_min) / self._span(self.x_min, self.x_max)

    def transform_w(self, w: np.ndarray) -> np.ndarray:
        return (w - self.w_min) / self._span(self.w_min, self.w_max)

    def inverse_x(self, x: np.ndarray) -> np.ndarray:
        return x * self._span(self.x_min, self.x_max) + self.x_min

    def inverse_w(self, w: np.ndarray) -> np.ndarray:
        return w * self._span(self.w_min, self.w_max) + self.w_min


def save_scaler(scaler: Scaler, path) -> Path:
    payload = {
        "format": "fleethi-scaler-1",
        "x_min": scaler.x_min.tolist(), "x_max": scaler.x_max.tolist(),
        "w_min": scaler.w_min.tolist(), "w_max": scaler.w_max.tolist(),
        "constant_channels": scaler.constant_channels,
    }
    path = Path(path)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True))
    return path


def load_scaler(path) -> Scaler:
    payload = json.loads(Path(path).read_text())
    if payload.get("format") != "fleethi-scaler-1":
        raise DataError(f"unrecognized scaler file {path}")
    return Scaler(x_min=np.array(payload["x_min"]), x_max=np.array(payload["x_max"]),
                  w_min=np.array(payload["w_min"]), w_max=np.array(payload["w_max"]),
                  constant_channels=list(payload.get("constant_channels", [])))


def fit_scaler(train: FleetDataset) -> Scaler:
    if not train.units:
        raise DataError("cannot fit a scaler on an empty fleet")
    xs = np.concatenate([c.x for u in train.units for c in u.cycles], axis=0)
    ws = np.concatenate([c.w for u in train.units for c in u.cycles], axis=0)
    scaler = Scaler(x_min=xs.min(axis=0), x_max=xs.max(axis=0),
                    w_min=ws.min(axis=0), w_max=ws.max(axis=0))
    for name, lo, hi in (("x", scaler.x_min, scaler.x_max),
                         ("w", scaler.w_min, scaler.w_max)):
        for j in np.nonzero(hi - lo == 0)[0]:
            chan = f"{name}_{j}"
            scaler.constant_channels.append(chan)
            log.warning("constant channel %s: min == max == %g, maps to 0", chan, lo[j])
    return scaler


def apply_scaler(fleet: FleetDataset, scaler: Scaler) -> FleetDataset:
    units = []
    for u in fleet.units:
        cycles = [CycleRecord(t=c.t, x=scaler.transform_x(c.x), w=scaler.transform_w(c.w))
                  for c in u.cycles]
        units.append(Unit(id=u.id, class_tag=u.class_tag, cycles=cycles,
                          ground_truth_hi=None if u.ground_truth_hi is None
                          else u.ground_truth_hi.copy()))
    return FleetDataset(units=units)


def inverse_scaler(fleet: FleetDataset, scaler: Scaler) -> FleetDataset:
    units = []
    for u in fleet.units:
        cycles = [CycleRecord(t=c.t, x=scaler.inverse_x(c.x), w=scaler.inverse_w(c.w))
                  for c in u.cycles]
        units.append(Unit(id=u.id, class_tag=u.class_tag, cycles=cycles,
                          ground_truth_hi=None if u.ground_truth_hi is None
                          else u.ground_truth_hi.copy()))
    return FleetDataset(units=units)


# ---------------------------------------------------------------------------
# Downsampling and windowing
# ---------------------------------------------------------------------------

def downsample(fleet: FleetDataset, factor: int) -> FleetDataset:
    """Keep every factor-th row of each cycle (first row always kept)."""
    if factor < 1:
        raise ValueError("downsample factor must be >= 1")
    if factor == 1:
        return fleet
    units = []
    for u in fleet.units:
        cycles = [CycleRecord(t=c.t, x=c.x[::factor], w=c.w[::factor]) for c in u.cycles]
        units.append(Unit(id=u.id, class_tag=u.class_tag, cycles=cycles,
                          ground_truth_hi=None if u.ground_truth_hi is None
                          else u.ground_truth_hi.copy()))
    return FleetDataset(units=units)


@dataclass
class WindowMeta:
    unit_id: str
    cycle: int


@dataclass
class WindowSet:
    """Fixed-length training windows with provenance and padding masks.

    windows has shape [n, S, C] with sensor columns first; channel_split maps
    window columns back to X and W. mask flags real (un-padded) rows.
    """

    windows: np.ndarray
    mask: np.ndarray
    meta: list[WindowMeta]
    x_cols: np.ndarray
    w_cols: np.ndarray
    S: int
    skipped: list[tuple[str, int]] = field(default_factory=list)

    @property
    def n_windows(self) -> int:
        return self.windows.shape[0]

    def x(self) -> np.ndarray:
        return self.windows[:, :, self.x_cols]

    def w(self) -> np.ndarray:
        return self.windows[:, :, self.w_cols]

    def cycles(self) -> np.ndarray:
        return np.array([m.cycle for m in self.meta], dtype=float)

    def unit_ids(self) -> list[str]:
        return [m.unit_id for m in self.meta]


def _channel_block(cyc: CycleRecord, channels: str) -> np.ndarray:
    if channels == "X":
        return cyc.x
    if channels == "W":
        return cyc.w
    if channels == "both":
        return np.concatenate([cyc.x, cyc.w], axis=1)
    raise ValueError("channels must be 'X', 'W', or 'both'")


def _split_for(fleet: FleetDataset, channels: str) -> tuple[np.ndarray, np.ndarray]:
    p, k = fleet.n_sensors, fleet.n_conditions
    if channels == "X":
        return np.arange(p), np.arange(0)
    if channels == "W":
        return np.arange(0), np.arange(k)
    return np.arange(p), np.arange(p, p + k)


def window_sliding(fleet: FleetDataset, S: int, stride: int,
                   channels: str = "both") -> WindowSet:
    """Sliding windows over each unit's concatenated rows; never spans units.

    meta records the cycle index of each window's last row. Units shorter
    than S contribute nothing and land in the skip report.
    """
    if S < 1 or stride < 1:
        raise ValueError("S and stride must be >= 1")
    x_cols, w_cols = _split_for(fleet, channels)
    wins, metas, skipped = [], [], []
    for u in fleet.units:
        rows = np.concatenate([_channel_block(c, channels) for c in u.cycles], axis=0)
        row_cycle = np.concatenate([np.full(c.n_rows, c.t, dtype=int) for c in u.cycles])
        n = rows.shape[0]
        if n < S:
            skipped.append((u.id, n))
            log.warning("unit %s has %d rows < window %d, skipped", u.id, n, S)
            continue
        for start in range(0, n - S + 1, stride):
            wins.append(rows[start:start + S])
            metas.append(WindowMeta(unit_id=u.id, cycle=int(row_cycle[start + S - 1])))
    windows = np.stack(wins) if wins else np.empty((0, S, len(x_cols) + len(w_cols)))
    return WindowSet(windows=windows, mask=np.ones(windows.shape[:2], dtype=bool),
                     meta=metas, x_cols=x_cols, w_cols=w_cols, S=S, skipped=skipped)


def window_per_cycle(fleet: FleetDataset, channels: str = "both") -> WindowSet:
    """One zero-padded window per cycle, sized to the fleet's longest cycle."""
    if not fleet.units:
        raise DataError("cannot window an empty fleet")
    S = max(c.n_rows for u in fleet.units for c in u.cycles)
    x_cols, w_cols = _split_for(fleet, channels)
    n_chan = len(x_cols) + len(w_cols)
    wins, masks, metas = [], [], []
    for u in fleet.units:
        for c in u.cycles:
            block = _channel_block(c, channels)
            pad = np.zeros((S, n_chan))
            pad[:c.n_rows] = block
            m = np.zeros(S, dtype=bool)
            m[:c.n_rows] = True
            wins.append(pad)
            masks.append(m)
            metas.append(WindowMeta(unit_id=u.id, cycle=c.t))
    return WindowSet(windows=np.stack(wins), mask=np.stack(masks), meta=metas,
                     x_cols=x_cols, w_cols=w_cols, S=S)


# ---------------------------------------------------------------------------
# Battery capacity
# ---------------------------------------------------------------------------

def compute_capacity(current: np.ndarray, dt: float) -> float:
    """Ampere-hours from a uniformly sampled current series (rectangle rule)."""
    current = np.asarray(current, dtype=float)
    if current.size == 0:
        return 0.0
    if dt <= 0:
        raise ValueError("sampling interval dt must be positive")
    return float(current.sum() * dt / 3600.0)
