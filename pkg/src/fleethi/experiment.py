"""Config-driven experiment orchestration and artifact management.

run() takes an ExperimentConfig, resolves the fleet (generated or loaded),
splits it, trains the selected method once per seed, estimates health
trajectories for every unit, scores them against ground truth, and writes a
self-contained artifact directory:

    config.toml            resolved config snapshot
    fingerprint.txt        dataset fingerprint
    seed_<s>/checkpoint.pt, loss_history.csv, hi.csv
    metric_report.json     mean/std over seeds
    rul_report.json        optional RUL harness result
    plots/                 HI vs cycle per test unit, loss curves

Reruns with the same config and seeds reproduce metric_report.json byte for
byte.
"""

from __future__ import annotations

import dataclasses
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from . import hi as hi_mod
from . import metrics as metrics_mod
from . import models as models_mod
from . import prognostics as prog_mod
from . import weibull as weibull_mod
from .config import ConfigError, dumps_config, load_config
from .datagen import CLASS_TAGS, GeneratorConfig, MaintenancePolicy, NoiseLevels, generate_fleet
from .fleet import FleetDataset
from .ingest import (DataError, WindowSet, apply_scaler, fit_scaler, load_fleet,
                     window_per_cycle, window_sliding, downsample)

log = logging.getLogger(__name__)

METHODS = ("proposed", "residual_ae", "residual_reg", "supervised",
           "no_learning_bias", "no_inductive_bias", "plain_ae")
SPLITS = ("in_distribution", "ood")

OUTPUT_ROOT_ENV = "FLEETHI_OUTPUT_ROOT"


@dataclass
class ExperimentConfig:
    # dataset
    source: str = "generate"  # generate | load
    data_path: str | None = None
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    downsample_factor: int = 1
    # split
    split: str = "in_distribution"
    train_units: list[str] = field(default_factory=list)  # explicit override
    test_units: list[str] = field(default_factory=list)
    # method
    method: str = "proposed"
    constraint: str = "correlation"
    lam: float = 1.0
    epochs: int = 20
    batch_size: int = 20
    learning_rate: float = 1e-3
    encoder_filters: list[int] = field(default_factory=lambda: [128, 64, 16])
    decoder_filters: list[int] = field(default_factory=lambda: [16, 64, 128])
    # residual/supervised windowing
    sliding_window: int = 32
    sliding_stride: int = 4
    healthy_cycles: int = 20
    # functional constraint source
    weibull_file: str | None = None
    weibull_thresholds: list[float] = field(default_factory=lambda: list(weibull_mod.DEFAULT_THRESHOLDS))
    # RUL harness
    run_rul: bool = False
    rul_hi_source: str = "ground_truth"  # ground_truth | estimated
    rul_window: int = 50
    rul_stride: int = 8
    rul_cap: float | None = None
    rul_epochs: int = 10
    rul_batch_size: int = 64
    rul_learning_rate: float = 1e-3
    rul_preset: str = "turbofan"
    # evaluation
    mon_mode: str = "signed"
    hi_as_soh: bool = False  # write soh_percent instead of hi in the HI tables
    make_plots: bool = True
    seeds: list[int] = field(default_factory=lambda: [0])
    out_dir: str | None = None

    def validate(self):
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}")
        if self.split not in SPLITS:
            raise ConfigError(f"split must be one of {SPLITS}")
        if self.source not in ("generate", "load"):
            raise ConfigError("source must be 'generate' or 'load'")
        if self.source == "load" and not self.data_path:
            raise ConfigError("source 'load' requires data_path")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if self.constraint not in models_mod.CONSTRAINTS:
            raise ConfigError(f"constraint must be one of {models_mod.CONSTRAINTS}")
        if self.rul_hi_source not in ("ground_truth", "estimated"):
            raise ConfigError("rul_hi_source must be 'ground_truth' or 'estimated'")


def output_root() -> Path:
    return Path(os.environ.get(OUTPUT_ROOT_ENV, "runs"))


# ---------------------------------------------------------------------------
# Config file round trip
# ---------------------------------------------------------------------------

def config_to_dict(cfg: ExperimentConfig) -> dict:
    gen = cfg.generator
    d = {k: v for k, v in dataclasses.asdict(cfg).items() if k != "generator"}
    d["rul_cap"] = cfg.rul_cap if cfg.rul_cap is not None else -1.0
    d["data_path"] = cfg.data_path or ""
    d["weibull_file"] = cfg.weibull_file or ""
    d["out_dir"] = cfg.out_dir or ""
    d["generator"] = {
        "n_units": gen.n_units,
        "cycles_min": gen.cycles_per_unit_range[0],
        "cycles_max": gen.cycles_per_unit_range[1],
        "samples_per_cycle": gen.samples_per_cycle,
        "n_sensors": gen.n_sensors,
        "n_conditions": gen.n_conditions,
        "degradation_shape": gen.degradation_shape,
        "exponent_min": gen.shape_exponent_range[0],
        "exponent_max": gen.shape_exponent_range[1],
        "condition_class": gen.condition_class,
        "noise_eps1": gen.noise.eps1,
        "noise_eps2": gen.noise.eps2,
        "noise_eps3": gen.noise.eps3,
        "maintenance_probability": gen.maintenance.probability if gen.maintenance else -1.0,
        "maintenance_magnitude": gen.maintenance.magnitude if gen.maintenance else -1.0,
        "seed": gen.seed,
    }
    return d


def config_from_dict(d: dict) -> ExperimentConfig:
    d = dict(d)
    g = d.pop("generator", {})
    maint = None
    if g.get("maintenance_probability", -1.0) >= 0:
        maint = MaintenancePolicy(probability=g["maintenance_probability"],
                                  magnitude=g.get("maintenance_magnitude", 0.1))
    gen = GeneratorConfig(
        n_units=g.get("n_units", 12),
        cycles_per_unit_range=(g.get("cycles_min", 80), g.get("cycles_max", 120)),
        samples_per_cycle=g.get("samples_per_cycle", 48),
        n_sensors=g.get("n_sensors", 5),
        n_conditions=g.get("n_conditions", 2),
        degradation_shape=g.get("degradation_shape", "convex"),
        shape_exponent_range=(g.get("exponent_min", 1.5), g.get("exponent_max", 3.0)),
        condition_class=g.get("condition_class", "mixed"),
        noise=NoiseLevels(eps1=g.get("noise_eps1", 0.02), eps2=g.get("noise_eps2", 0.3),
                          eps3=g.get("noise_eps3", 0.05)),
        maintenance=maint,
        seed=g.get("seed", 0),
    )
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    cfg = ExperimentConfig(generator=gen, **{k: v for k, v in d.items() if k in known})
    if cfg.rul_cap is not None and cfg.rul_cap < 0:
        cfg.rul_cap = None
    cfg.data_path = cfg.data_path or None
    cfg.weibull_file = cfg.weibull_file or None
    cfg.out_dir = cfg.out_dir or None
    if isinstance(cfg.seeds, int):
        cfg.seeds = [cfg.seeds]
    return cfg


def load_experiment_config(path) -> ExperimentConfig:
    cfg = config_from_dict(load_config(path))
    cfg.validate()
    return cfg


# ---------------------------------------------------------------------------
# Splits
# ---------------------------------------------------------------------------

def split_units(fleet: FleetDataset, cfg: ExperimentConfig) -> tuple[list[str], list[str]]:
    """Train/test unit ids from explicit lists or the named preset.

    in_distribution holds out every third unit within each class so both
    splits see every class; ood trains on the lowest load class only.
    """
    if cfg.train_units or cfg.test_units:
        train = list(cfg.train_units) or [u for u in fleet.unit_ids if u not in cfg.test_units]
        test = list(cfg.test_units) or [u for u in fleet.unit_ids if u not in train]
        missing = (set(train) | set(test)) - set(fleet.unit_ids)
        if missing:
            raise DataError(f"split names unknown units: {sorted(missing)}")
        if set(train) & set(test):
            raise ConfigError("train and test unit lists overlap")
        return train, test
    if cfg.split == "ood":
        train = [u.id for u in fleet.units if u.class_tag == CLASS_TAGS[0]]
        test = [u.id for u in fleet.units if u.class_tag != CLASS_TAGS[0]]
        if not train or not test:
            raise DataError("ood split needs units both in and out of the lowest class")
        return train, test
    by_class: dict[str, list[str]] = {}
    for u in fleet.units:
        by_class.setdefault(u.class_tag, []).append(u.id)
    train, test = [], []
    for tag in sorted(by_class):
        for pos, uid in enumerate(by_class[tag]):
            (test if pos % 3 == 2 else train).append(uid)
    if not test:  # tiny fleets: hold out the last unit
        test = [train.pop()]
    return train, test


# ---------------------------------------------------------------------------
# Per-seed estimation
# ---------------------------------------------------------------------------

def _subset_windows(ws: WindowSet, unit_ids) -> WindowSet:
    keep = set(unit_ids)
    idx = np.array([i for i, m in enumerate(ws.meta) if m.unit_id in keep], dtype=int)
    return WindowSet(windows=ws.windows[idx], mask=ws.mask[idx],
                     meta=[ws.meta[i] for i in idx], x_cols=ws.x_cols,
                     w_cols=ws.w_cols, S=ws.S, skipped=list(ws.skipped))


def network_spec_for(cfg: ExperimentConfig) -> tuple[models_mod.NetworkSpec, models_mod.ConstraintSpec]:
    method = cfg.method
    if method in ("proposed", "no_learning_bias", "no_inductive_bias", "plain_ae"):
        spec = models_mod.NetworkSpec(kind="proposed_ae",
                                      encoder_filters=tuple(cfg.encoder_filters),
                                      decoder_filters=tuple(cfg.decoder_filters),
                                      symmetric_inputs=method in ("no_inductive_bias", "plain_ae"))
        if method in ("no_learning_bias", "plain_ae"):
            con = models_mod.ConstraintSpec(kind="none", lam=0.0)
        else:
            con = models_mod.ConstraintSpec(kind=cfg.constraint, lam=cfg.lam)
        return spec, con
    kind = {"residual_ae": "residual_ae", "residual_reg": "residual_reg",
            "supervised": "supervised"}[method]
    return models_mod.NetworkSpec(kind=kind), models_mod.ConstraintSpec(kind="none")


def _gt_at_cycles(fleet: FleetDataset, unit_id: str, cycles: np.ndarray) -> np.ndarray:
    u = fleet.unit(unit_id)
    lookup = {c.t: g for c, g in zip(u.cycles, u.ground_truth_hi)}
    return np.array([lookup[int(t)] for t in cycles])


def _resolve_expected_hi(cfg: ExperimentConfig, scaled: FleetDataset, train_ids, seed: int):
    """Weibull curve for the functional constraint: from file or a first-pass
    correlation-constrained run on the training units."""
    if cfg.weibull_file:
        return weibull_mod.WeibullFit.load(cfg.weibull_file)
    log.info("functional constraint: fitting expected-HI curve from a first-pass run")
    stage1 = dataclasses.replace(cfg, constraint="correlation", weibull_file=None,
                                 method="proposed")
    result = estimate_hi(stage1, scaled, train_ids, train_ids, seed)
    return weibull_mod.fit_expected_hi(result.trajectories,
                                       thresholds=cfg.weibull_thresholds)


@dataclass
class EstimationResult:
    """One trained method and its per-unit trajectories."""

    trajectories: list
    model: object
    history: list[dict]
    pca: hi_mod.PcaFit | None = None
    expected_hi: weibull_mod.WeibullFit | None = None

    def __iter__(self):  # allow trajs, model, history = result
        return iter((self.trajectories, self.model, self.history))


def estimate_hi(cfg: ExperimentConfig, scaled: FleetDataset, train_ids, all_ids,
                seed: int) -> EstimationResult:
    """Train the configured method once and return trajectories for all_ids."""
    spec, con = network_spec_for(cfg)
    p, k = scaled.n_sensors, scaled.n_conditions
    tc = models_mod.TrainConfig(epochs=cfg.epochs, batch_size=cfg.batch_size,
                                learning_rate=cfg.learning_rate, seed=seed)
    if spec.kind == "proposed_ae":
        ws_all = window_per_cycle(scaled, channels="both")
        ws_train = _subset_windows(ws_all, train_ids)
        if con.kind == "functional":
            con = dataclasses.replace(con, expected_hi=_resolve_expected_hi(
                cfg, scaled, train_ids, seed))
        model = models_mod.build_network(spec, p, k, ws_all.S, seed=seed)
        history = models_mod.train(model, ws_train, con, tc)
        z = models_mod.encode(model, ws_all)
        keep = set(all_ids)
        sel = [i for i, m in enumerate(ws_all.meta) if m.unit_id in keep]
        trajs, _ = hi_mod.latent_to_hi(z[sel], [ws_all.meta[i] for i in sel],
                                       fit_units=[u for u in train_ids if u in keep])
        return EstimationResult(trajectories=trajs, model=model, history=history,
                                expected_hi=con.expected_hi)

    ws_all = window_sliding(scaled, S=cfg.sliding_window, stride=cfg.sliding_stride,
                            channels="both")
    ws_train = _subset_windows(ws_all, train_ids)
    if spec.kind == "supervised":
        labels = np.array([_gt_at_cycles(scaled, m.unit_id, np.array([m.cycle]))[0]
                           for m in ws_train.meta])
        model = models_mod.build_network(spec, p, k, ws_all.S, seed=seed)
        history = models_mod.train(model, ws_train, cfg=tc, labels=labels)
        pred = models_mod.predict(model, ws_all)
        keep = set(all_ids)
        sel = [i for i, m in enumerate(ws_all.meta) if m.unit_id in keep]
        series = hi_mod.per_cycle_series(pred[sel], [ws_all.meta[i] for i in sel])
        trajs = [hi_mod.HITrajectory(unit_id=uid, t=ts, h=np.clip(vs, 0.0, 1.0))
                 for uid, (ts, vs) in series.items()]
        return EstimationResult(trajectories=trajs, model=model, history=history)

    # residual methods: train on healthy early-life windows only
    healthy_idx = [i for i, m in enumerate(ws_train.meta) if m.cycle < cfg.healthy_cycles]
    if not healthy_idx:
        raise models_mod.TrainingError(
            f"no training windows below healthy_cycles={cfg.healthy_cycles}")
    ws_healthy = WindowSet(windows=ws_train.windows[healthy_idx],
                           mask=ws_train.mask[healthy_idx],
                           meta=[ws_train.meta[i] for i in healthy_idx],
                           x_cols=ws_train.x_cols, w_cols=ws_train.w_cols, S=ws_train.S)
    model = models_mod.build_network(spec, p, k, ws_all.S, seed=seed)
    history = models_mod.train(model, ws_healthy, cfg=tc)
    x_hat = models_mod.reconstruct(model, ws_all)
    resid = hi_mod.compute_residual(ws_all.x(), x_hat)
    train_idx = [i for i, m in enumerate(ws_all.meta) if m.unit_id in set(train_ids)]
    pca = hi_mod.fit_pca(resid[train_idx])
    keep = set(all_ids)
    sel = [i for i, m in enumerate(ws_all.meta) if m.unit_id in keep]
    trajs, _ = hi_mod.residual_to_hi(resid[sel], [ws_all.meta[i] for i in sel], pca,
                                     fit_units=[u for u in train_ids if u in keep])
    return EstimationResult(trajectories=trajs, model=model, history=history, pca=pca)


# ---------------------------------------------------------------------------
# RUL harness
# ---------------------------------------------------------------------------

def run_rul_harness(cfg: ExperimentConfig, scaled: FleetDataset, train_ids, test_ids,
                    hi_trajs, seed: int) -> prog_mod.RULReport:
    """Baseline vs HI-augmented RUL models on the same split and seed."""
    t_scale = float(max(scaled.unit(u).cycles[-1].t for u in train_ids))
    train_fleet = scaled.subset(train_ids)
    test_fleet = scaled.subset(test_ids)

    def make(hi):
        common = dict(S=cfg.rul_window, stride=cfg.rul_stride, cap=cfg.rul_cap,
                      t_scale=t_scale)
        return (prog_mod.build_rul_dataset(train_fleet, hi=hi, **common),
                prog_mod.build_rul_dataset(test_fleet, hi=hi, **common))

    ds_train_base, ds_test_base = make(None)
    ds_train_aug, ds_test_aug = make(hi_trajs)
    reports = []
    for ds_train, ds_test in ((ds_train_base, ds_test_base), (ds_train_aug, ds_test_aug)):
        model = prog_mod.build_rul_model(ds_train.n_channels, ds_train.S,
                                         preset=cfg.rul_preset, seed=seed)
        prog_mod.train_rul(model, ds_train, epochs=cfg.rul_epochs,
                           batch_size=cfg.rul_batch_size,
                           learning_rate=cfg.rul_learning_rate, seed=seed)
        reports.append(prog_mod.evaluate_rul(model, ds_test))
    baseline, augmented = reports
    augmented.avg_improvement = prog_mod.average_improvement(baseline, augmented)
    baseline.avg_improvement = 0.0
    return baseline, augmented


# ---------------------------------------------------------------------------
# Full run
# ---------------------------------------------------------------------------

def ground_truth_for(fleet: FleetDataset, trajs) -> list[np.ndarray]:
    return [_gt_at_cycles(fleet, tr.unit_id, np.asarray(tr.t)) for tr in trajs]


def write_hi_csv(trajs, path: Path, as_soh: bool = False):
    col = "soh_percent" if as_soh else "hi"
    conv = hi_mod.to_soh if as_soh else (lambda v: v)
    rows = [(tr.unit_id, int(t), float(conv(h))) for tr in trajs
            for t, h in zip(tr.t, tr.h)]
    pd.DataFrame(rows, columns=["unit", "cycle", col]).to_csv(path, index=False)


def _plot_run(out: Path, fleet, trajs, test_ids, history):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    plots = out / "plots"
    plots.mkdir(exist_ok=True)
    by_id = {t.unit_id: t for t in trajs}
    for uid in test_ids:
        if uid not in by_id:
            continue
        tr = by_id[uid]
        fig, ax = plt.subplots(figsize=(5, 3))
        ax.plot(tr.t, tr.h, label="estimated")
        unit = fleet.unit(uid)
        if unit.ground_truth_hi is not None:
            ax.plot(unit.cycle_indices, unit.ground_truth_hi, "--", label="ground truth")
        ax.set_xlabel("cycle")
        ax.set_ylabel("health index")
        ax.set_title(f"unit {uid}")
        ax.legend()
        fig.tight_layout()
        fig.savefig(plots / f"hi_{uid}.png", dpi=100)
        plt.close(fig)
    if history:
        fig, ax = plt.subplots(figsize=(5, 3))
        ax.plot([r["epoch"] for r in history], [r["l_total"] for r in history],
                label="total")
        ax.plot([r["epoch"] for r in history], [r["l_mae"] for r in history],
                label="reconstruction")
        ax.set_xlabel("epoch")
        ax.set_ylabel("loss")
        ax.legend()
        fig.tight_layout()
        fig.savefig(plots / "loss.png", dpi=100)
        plt.close(fig)


def resolve_fleet(cfg: ExperimentConfig) -> FleetDataset:
    if cfg.source == "load":
        fleet = load_fleet(cfg.data_path)
    else:
        fleet = generate_fleet(cfg.generator)
    if cfg.downsample_factor > 1:
        fleet = downsample(fleet, cfg.downsample_factor)
    return fleet


def run(cfg: ExperimentConfig, out_dir=None) -> Path:
    """Execute the configured experiment; returns the artifact directory."""
    cfg.validate()
    out = Path(out_dir or cfg.out_dir or output_root() / "experiment")
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.toml").write_text(dumps_config(config_to_dict(cfg)))

    fleet = resolve_fleet(cfg)
    (out / "fingerprint.txt").write_text(fleet.fingerprint() + "\n")
    train_ids, test_ids = split_units(fleet, cfg)
    scaler = fit_scaler(fleet.subset(train_ids))
    scaled = apply_scaler(fleet, scaler)

    per_run = []
    last_history, last_trajs = None, None
    for seed in cfg.seeds:
        seed_dir = out / f"seed_{seed}"
        seed_dir.mkdir(exist_ok=True)
        result = estimate_hi(cfg, scaled, train_ids, fleet.unit_ids, seed)
        trajs, model, history = result
        pd.DataFrame(history).to_csv(seed_dir / "loss_history.csv", index=False,
                                     columns=["epoch", "l_total", "l_mae", "l_constraint"])
        write_hi_csv(trajs, seed_dir / "hi.csv", as_soh=cfg.hi_as_soh)
        if result.pca is not None:
            hi_mod.save_pca(result.pca, seed_dir / "pca.json")
        if result.expected_hi is not None:
            result.expected_hi.save(seed_dir / "weibull.json")
        spec, _ = network_spec_for(cfg)
        models_mod.save_checkpoint(
            model, seed_dir / "checkpoint.pt", spec,
            models_mod.TrainConfig(epochs=cfg.epochs, batch_size=cfg.batch_size,
                                   learning_rate=cfg.learning_rate, seed=seed),
            dims=(scaled.n_sensors, scaled.n_conditions, getattr(model, "S", cfg.sliding_window)))
        test_trajs = [t for t in trajs if t.unit_id in set(test_ids)]
        gt = ground_truth_for(fleet, test_trajs) if fleet.has_ground_truth() else None
        per_run.append(metrics_mod.evaluate_fleet_hi(
            [(tr.t, tr.h) for tr in test_trajs], ground_truth=gt, mon_mode=cfg.mon_mode))
        if cfg.run_rul:
            hi_source = None
            if cfg.rul_hi_source == "estimated":
                hi_source = trajs
            else:
                hi_source = [hi_mod.HITrajectory(unit_id=u.id, t=u.cycle_indices,
                                                 h=u.ground_truth_hi)
                             for u in fleet.units]
            baseline, augmented = run_rul_harness(cfg, scaled, train_ids, test_ids,
                                                  hi_source, seed)
            (seed_dir / "rul_report.json").write_text(augmented.to_json())
            (seed_dir / "rul_baseline.json").write_text(baseline.to_json())
        last_history, last_trajs = history, trajs

    report = metrics_mod.aggregate_runs(per_run)
    (out / "metric_report.json").write_text(report.to_json())
    if cfg.make_plots:
        _plot_run(out, fleet, last_trajs, test_ids, last_history)
    log.info("experiment artifacts in %s", out)
    return out
