"""Additive-noise-model structure search over (sensor, condition, degradation) triples.

All 25 directed acyclic graphs on the three labeled nodes X, W, Z are scored
by regressing each node on its parents and summing -log(residual variance);
parentless nodes use their mean. Rankings are aggregated over every
(sensor column, condition column) pair of a fleet.

The regressor must not interpolate the data exactly or every supergraph
degenerates to the variance floor, so the default decision tree carries a
minimum leaf size; the paper-style fully grown tree is available by setting
min_samples_leaf=1.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np
import pandas as pd
from sklearn.model_selection import KFold
from sklearn.neighbors import KNeighborsRegressor
from sklearn.tree import DecisionTreeRegressor

from .fleet import FleetDataset

NODES = ("X", "W", "Z")
VAR_FLOOR = 1e-12


@dataclass(frozen=True)
class Dag3:
    """Parent sets for the three labeled nodes; immutable and hashable."""

    parents_x: tuple[str, ...] = ()
    parents_w: tuple[str, ...] = ()
    parents_z: tuple[str, ...] = ()

    def parents(self, node: str) -> tuple[str, ...]:
        return {"X": self.parents_x, "W": self.parents_w, "Z": self.parents_z}[node]

    @property
    def n_edges(self) -> int:
        return len(self.parents_x) + len(self.parents_w) + len(self.parents_z)

    def has_edge(self, cause: str, effect: str) -> bool:
        return cause in self.parents(effect)

    def is_acyclic(self) -> bool:
        remaining = set(NODES)
        while remaining:
            roots = [n for n in remaining if not set(self.parents(n)) & remaining]
            if not roots:
                return False
            remaining -= set(roots)
        return True

    def label(self) -> str:
        parts = [f"{n}<-[{','.join(sorted(self.parents(n)))}]"
                 for n in NODES if self.parents(n)]
        return ";".join(parts) if parts else "empty"


def _parent_options(node: str) -> list[tuple[str, ...]]:
    others = [o for o in NODES if o != node]
    return [(), (others[0],), (others[1],), tuple(sorted(others))]


def enumerate_dags() -> list[Dag3]:
    """All 25 DAGs on the labeled nodes, in a deterministic canonical order."""
    dags = []
    for px, pw, pz in product(_parent_options("X"), _parent_options("W"),
                              _parent_options("Z")):
        dag = Dag3(parents_x=px, parents_w=pw, parents_z=pz)
        if dag.is_acyclic():
            dags.append(dag)
    dags.sort(key=lambda d: (d.n_edges, d.label()))
    return dags


@dataclass
class RegressorSpec:
    """Nonparametric regressor used for the residuals, selectable by name.

    With oos_folds > 1 the regression is cross-fitted and residuals are taken
    out of fold, which removes the overfitting margin that otherwise favors
    denser graphs (useful when testing whether an edge carries signal at all).
    """

    name: str = "tree"
    min_samples_leaf: int = 30
    n_neighbors: int = 20
    oos_folds: int = 0

    def build(self):
        if self.name == "tree":
            return DecisionTreeRegressor(min_samples_leaf=self.min_samples_leaf,
                                         random_state=0)
        if self.name == "knn":
            return KNeighborsRegressor(n_neighbors=self.n_neighbors)
        raise ValueError(f"unknown regressor {self.name!r}")


@dataclass
class DagScore:
    dag: Dag3
    score: float
    degenerate: bool = False
    rank: int | None = None


def _residual_variance(arr: np.ndarray, node_col: int, parent_cols: list[int],
                       regressor: RegressorSpec) -> float:
    y = arr[:, node_col]
    if not parent_cols:
        resid = y - y.mean()
    elif regressor.oos_folds > 1:
        feats = arr[:, parent_cols]
        resid = np.empty_like(y)
        folds = KFold(n_splits=regressor.oos_folds, shuffle=True, random_state=0)
        for train_idx, test_idx in folds.split(feats):
            model = regressor.build()
            model.fit(feats[train_idx], y[train_idx])
            resid[test_idx] = y[test_idx] - model.predict(feats[test_idx])
    else:
        model = regressor.build()
        model.fit(arr[:, parent_cols], y)
        resid = y - model.predict(arr[:, parent_cols])
    return float(resid.var())


def score_dag(data, dag: Dag3, regressor: RegressorSpec | None = None) -> DagScore:
    """Sum of -log residual variance over the three nodes, floored at 1e-12."""
    regressor = regressor or RegressorSpec()
    arr = np.asarray(data, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValueError("data must be [n, 3] with columns (x, w, z)")
    if arr.shape[0] < 50:
        raise ValueError(f"need at least 50 samples, got {arr.shape[0]}")
    if not np.isfinite(arr).all():
        raise ValueError("data contains non-finite values")
    cols = {"X": 0, "W": 1, "Z": 2}
    score, degenerate = 0.0, False
    for node in NODES:
        v = _residual_variance(arr, cols[node], [cols[p] for p in dag.parents(node)],
                               regressor)
        if v < VAR_FLOOR:
            degenerate = True
            v = VAR_FLOOR
        score += -np.log(v)
    return DagScore(dag=dag, score=score, degenerate=degenerate)


def _pair_samples(fleet: FleetDataset, sensor: int, condition: int,
                  cycle_filter: int) -> np.ndarray:
    rows = []
    for u in fleet.units:
        if u.ground_truth_hi is None:
            raise ValueError(f"unit {u.id} has no ground-truth HI; z = 1 - hi is required")
        for cyc, hi in zip(u.cycles, u.ground_truth_hi):
            if cyc.t < cycle_filter:
                continue
            z = 1.0 - hi
            block = np.column_stack([cyc.x[:, sensor], cyc.w[:, condition],
                                     np.full(cyc.n_rows, z)])
            rows.append(block)
    if not rows:
        raise ValueError(f"cycle filter >= {cycle_filter} removed all rows")
    return np.concatenate(rows, axis=0)


def rank_structures(fleet: FleetDataset, cycle_filter: int = 45,
                    regressor: RegressorSpec | None = None,
                    max_samples: int = 2000, seed: int = 0) -> pd.DataFrame:
    """Rank all 25 DAGs for every (sensor, condition) pair of the fleet.

    Returns a frame with columns dag, median_rank, mean_rank sorted by median
    (rank 0 is the best-scoring DAG for a pair). Rows are subsampled to
    max_samples per pair with a seeded generator so cycles mix within leaves.
    """
    regressor = regressor or RegressorSpec()
    dags = enumerate_dags()
    p, k = fleet.n_sensors, fleet.n_conditions
    rng = np.random.default_rng(seed)
    ranks = np.zeros((p * k, len(dags)), dtype=int)
    cols = {"X": 0, "W": 1, "Z": 2}
    row = 0
    for i in range(p):
        for j in range(k):
            arr = _pair_samples(fleet, i, j, cycle_filter)
            if arr.shape[0] > max_samples:
                idx = rng.choice(arr.shape[0], size=max_samples, replace=False)
                arr = arr[np.sort(idx)]
            # residual variances are shared across DAGs: cache per (node, parents)
            cache: dict[tuple[int, tuple[int, ...]], float] = {}
            scores = np.empty(len(dags))
            for d_idx, dag in enumerate(dags):
                total = 0.0
                for node in NODES:
                    key = (cols[node], tuple(cols[q] for q in dag.parents(node)))
                    if key not in cache:
                        cache[key] = _residual_variance(arr, key[0], list(key[1]),
                                                        regressor)
                    total += -np.log(max(cache[key], VAR_FLOOR))
                scores[d_idx] = total
            order = sorted(range(len(dags)), key=lambda d: (-scores[d], d))
            for rank_pos, d_idx in enumerate(order):
                ranks[row, d_idx] = rank_pos
            row += 1
    table = pd.DataFrame({
        "dag": [d.label() for d in dags],
        "median_rank": np.median(ranks, axis=0),
        "mean_rank": ranks.mean(axis=0),
    })
    return table.sort_values(["median_rank", "mean_rank", "dag"]).reset_index(drop=True)
