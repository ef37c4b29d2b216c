"""Core fleet data structures shared by the generator, loaders, and models.

A fleet is a collection of run-to-failure units. Each unit carries an ordered
sequence of operational cycles; each cycle holds a block of sensor rows X
(shape [m, p]) and the matching operating-condition rows W (shape [m, k]).
Ground-truth health, when known, is one value per cycle in [0, 1].
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np


@dataclass
class CycleRecord:
    """One operational cycle of one unit."""

    t: int
    x: np.ndarray  # [m, p] sensor rows
    w: np.ndarray  # [m, k] condition rows

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.w = np.asarray(self.w, dtype=float)
        if self.x.ndim != 2 or self.w.ndim != 2:
            raise ValueError("cycle X and W must be 2-D row blocks")
        if self.x.shape[0] != self.w.shape[0]:
            raise ValueError(
                f"cycle {self.t}: X has {self.x.shape[0]} rows, W has {self.w.shape[0]}"
            )

    @property
    def n_rows(self) -> int:
        return self.x.shape[0]


@dataclass
class Unit:
    """A single run-to-failure unit with optional per-cycle ground truth."""

    id: str
    class_tag: str
    cycles: list[CycleRecord] = field(default_factory=list)
    ground_truth_hi: np.ndarray | None = None

    def __post_init__(self):
        t = [c.t for c in self.cycles]
        if any(b <= a for a, b in zip(t, t[1:])):
            raise ValueError(f"unit {self.id}: cycle indices must be strictly increasing")
        if self.ground_truth_hi is not None:
            self.ground_truth_hi = np.asarray(self.ground_truth_hi, dtype=float)
            if len(self.ground_truth_hi) != len(self.cycles):
                raise ValueError(
                    f"unit {self.id}: ground truth length {len(self.ground_truth_hi)} "
                    f"!= cycle count {len(self.cycles)}"
                )
            if self.ground_truth_hi.size and (
                self.ground_truth_hi.min() < -1e-9 or self.ground_truth_hi.max() > 1 + 1e-9
            ):
                raise ValueError(f"unit {self.id}: ground truth HI outside [0, 1]")

    @property
    def cycle_indices(self) -> np.ndarray:
        return np.array([c.t for c in self.cycles], dtype=int)

    @property
    def n_cycles(self) -> int:
        return len(self.cycles)

    @property
    def n_rows(self) -> int:
        return sum(c.n_rows for c in self.cycles)

    def stacked(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Concatenate all cycles: returns (X rows, W rows, per-row cycle index)."""
        x = np.concatenate([c.x for c in self.cycles], axis=0)
        w = np.concatenate([c.w for c in self.cycles], axis=0)
        t = np.concatenate([np.full(c.n_rows, c.t, dtype=int) for c in self.cycles])
        return x, w, t


@dataclass
class FleetDataset:
    """Units of one fleet, in a stable order."""

    units: list[Unit] = field(default_factory=list)

    def __post_init__(self):
        ids = [u.id for u in self.units]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate unit ids in fleet")
        widths = {(c.x.shape[1], c.w.shape[1]) for u in self.units for c in u.cycles}
        if len(widths) > 1:
            raise ValueError(f"inconsistent sensor/condition widths across fleet: {widths}")

    @property
    def n_units(self) -> int:
        return len(self.units)

    @property
    def n_sensors(self) -> int:
        return self.units[0].cycles[0].x.shape[1]

    @property
    def n_conditions(self) -> int:
        return self.units[0].cycles[0].w.shape[1]

    @property
    def unit_ids(self) -> list[str]:
        return [u.id for u in self.units]

    def unit(self, unit_id: str) -> Unit:
        for u in self.units:
            if u.id == unit_id:
                return u
        raise KeyError(f"unit {unit_id!r} not in fleet")

    def subset(self, unit_ids) -> "FleetDataset":
        """New fleet holding only the named units, in the given order."""
        return FleetDataset(units=[self.unit(uid) for uid in unit_ids])

    def has_ground_truth(self) -> bool:
        return all(u.ground_truth_hi is not None for u in self.units)

    def equals(self, other: "FleetDataset", atol: float = 0.0) -> bool:
        """Structural and numeric equality, with optional absolute tolerance."""
        if self.unit_ids != other.unit_ids:
            return False
        for a, b in zip(self.units, other.units):
            if a.class_tag != b.class_tag or a.n_cycles != b.n_cycles:
                return False
            if (a.ground_truth_hi is None) != (b.ground_truth_hi is None):
                return False
            if a.ground_truth_hi is not None:
                if not np.allclose(a.ground_truth_hi, b.ground_truth_hi, atol=atol, rtol=0):
                    return False
            for ca, cb in zip(a.cycles, b.cycles):
                if ca.t != cb.t or ca.x.shape != cb.x.shape:
                    return False
                if not np.allclose(ca.x, cb.x, atol=atol, rtol=0):
                    return False
                if not np.allclose(ca.w, cb.w, atol=atol, rtol=0):
                    return False
        return True

    def fingerprint(self) -> str:
        """SHA-256 over the fleet's canonical byte serialization."""
        h = hashlib.sha256()
        for u in self.units:
            h.update(str(u.id).encode())
            h.update(u.class_tag.encode())
            for c in u.cycles:
                h.update(np.int64(c.t).tobytes())
                h.update(np.ascontiguousarray(c.x, dtype=np.float64).tobytes())
                h.update(np.ascontiguousarray(c.w, dtype=np.float64).tobytes())
            if u.ground_truth_hi is not None:
                h.update(np.ascontiguousarray(u.ground_truth_hi, dtype=np.float64).tobytes())
        return h.hexdigest()
