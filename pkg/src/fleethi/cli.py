"""Command-line entry point wrapping the library pipeline stage by stage.

Subcommands: run, generate, train, estimate-hi, evaluate-hi, fit-weibull,
discover-causal, train-rul, evaluate-rul, report. Every subcommand accepts
--config, --seed, and --out; partial pipelines resume from artifacts
persisted by earlier stages (checkpoint, scaler, split, HI tables).

Exit codes: 0 success, 2 config error, 3 data error, 4 training error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from . import experiment as exp
from . import hi as hi_mod
from . import metrics as metrics_mod
from . import models as models_mod
from . import prognostics as prog_mod
from . import weibull as weibull_mod
from .causal import RegressorSpec, rank_structures
from .config import ConfigError
from .ingest import (DataError, apply_scaler, fit_scaler, load_scaler,
                     save_fleet, save_scaler, window_per_cycle, window_sliding)

log = logging.getLogger(__name__)

EXIT_CONFIG, EXIT_DATA, EXIT_TRAIN = 2, 3, 4


def _load_cfg(args) -> exp.ExperimentConfig:
    if not args.config:
        raise ConfigError("--config is required for this subcommand")
    cfg = exp.load_experiment_config(args.config)
    if args.seed is not None:
        cfg.seeds = [args.seed]
    if args.out:
        cfg.out_dir = str(args.out)
    return cfg


def _out_dir(args, cfg=None) -> Path:
    out = args.out or (cfg.out_dir if cfg else None) or exp.output_root() / "artifacts"
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _prepare(cfg: exp.ExperimentConfig, out: Path, reuse: bool = True):
    """Fleet, split, and scaler; reuses persisted split/scaler when present."""
    fleet = exp.resolve_fleet(cfg)
    split_file = out / "split.json"
    scaler_file = out / "scaler.json"
    if reuse and split_file.exists():
        payload = json.loads(split_file.read_text())
        train_ids, test_ids = payload["train"], payload["test"]
    else:
        train_ids, test_ids = exp.split_units(fleet, cfg)
        split_file.write_text(json.dumps({"train": train_ids, "test": test_ids},
                                         indent=2, sort_keys=True))
    if reuse and scaler_file.exists():
        scaler = load_scaler(scaler_file)
    else:
        scaler = fit_scaler(fleet.subset(train_ids))
        save_scaler(scaler, scaler_file)
    return fleet, apply_scaler(fleet, scaler), train_ids, test_ids


def cmd_run(args) -> int:
    cfg = _load_cfg(args)
    out = exp.run(cfg, out_dir=args.out)
    print(f"artifacts written to {out}")
    return 0


def cmd_generate(args) -> int:
    cfg = _load_cfg(args)
    if args.seed is not None:
        cfg.generator.seed = args.seed
    fleet = exp.resolve_fleet(cfg)
    out = _out_dir(args, cfg)
    save_fleet(fleet, out)
    print(f"wrote {fleet.n_units} units to {out}")
    return 0


def cmd_train(args) -> int:
    cfg = _load_cfg(args)
    if args.constraint:
        cfg.constraint = args.constraint
    if args.weibull_file:
        cfg.weibull_file = args.weibull_file
    out = _out_dir(args, cfg)
    fleet, scaled, train_ids, test_ids = _prepare(cfg, out)
    seed = cfg.seeds[0]
    result = exp.estimate_hi(cfg, scaled, train_ids, fleet.unit_ids, seed)
    trajs, model, history = result
    pd.DataFrame(history).to_csv(out / "loss_history.csv", index=False,
                                 columns=["epoch", "l_total", "l_mae", "l_constraint"])
    if result.pca is not None:
        hi_mod.save_pca(result.pca, out / "pca.json")
    if result.expected_hi is not None and not cfg.weibull_file:
        result.expected_hi.save(out / "weibull.json")
    spec, _ = exp.network_spec_for(cfg)
    models_mod.save_checkpoint(
        model, out / "checkpoint.pt", spec,
        models_mod.TrainConfig(epochs=cfg.epochs, batch_size=cfg.batch_size,
                               learning_rate=cfg.learning_rate, seed=seed),
        dims=(scaled.n_sensors, scaled.n_conditions,
              getattr(model, "S", cfg.sliding_window)),
        scaler_ref="scaler.json")
    exp.write_hi_csv(trajs, out / "hi.csv", as_soh=cfg.hi_as_soh)
    print(f"checkpoint and loss history in {out}")
    return 0


def cmd_estimate_hi(args) -> int:
    cfg = _load_cfg(args)
    out = _out_dir(args, cfg)
    ckpt = out / "checkpoint.pt"
    if not ckpt.exists():
        raise DataError(f"no checkpoint found in {out}; run `train` first")
    model, spec, tc, extras = models_mod.load_checkpoint(ckpt)
    fleet, scaled, train_ids, _ = _prepare(cfg, out)
    if spec.kind == "proposed_ae":
        ws = window_per_cycle(scaled, channels="both")
        z = models_mod.encode(model, ws)
        trajs, _ = hi_mod.latent_to_hi(z, ws.meta, fit_units=train_ids)
    elif spec.kind == "supervised":
        ws = window_sliding(scaled, S=cfg.sliding_window, stride=cfg.sliding_stride)
        pred = models_mod.predict(model, ws)
        series = hi_mod.per_cycle_series(pred, ws.meta)
        trajs = [hi_mod.HITrajectory(unit_id=u, t=ts, h=np.clip(vs, 0, 1))
                 for u, (ts, vs) in series.items()]
    else:
        ws = window_sliding(scaled, S=cfg.sliding_window, stride=cfg.sliding_stride)
        x_hat = models_mod.reconstruct(model, ws)
        resid = hi_mod.compute_residual(ws.x(), x_hat)
        train_idx = [i for i, m in enumerate(ws.meta) if m.unit_id in set(train_ids)]
        pca = hi_mod.fit_pca(resid[train_idx])
        trajs, _ = hi_mod.residual_to_hi(resid, ws.meta, pca, fit_units=train_ids)
    exp.write_hi_csv(trajs, out / "hi.csv")
    print(f"HI table written to {out / 'hi.csv'}")
    return 0


def cmd_evaluate_hi(args) -> int:
    cfg = _load_cfg(args)
    out = _out_dir(args, cfg)
    hi_file = out / "hi.csv"
    if not hi_file.exists():
        raise DataError(f"no HI table found in {out}; run `estimate-hi` first")
    fleet = exp.resolve_fleet(cfg)
    if not fleet.has_ground_truth():
        raise DataError("fleet has no ground-truth HI to evaluate against")
    split = json.loads((out / "split.json").read_text()) if (out / "split.json").exists() \
        else {"test": fleet.unit_ids}
    trajs = [t for t in hi_mod.load_hi_csv(hi_file) if t.unit_id in set(split["test"])]
    gt = exp.ground_truth_for(fleet, trajs)
    res = metrics_mod.evaluate_fleet_hi([(t.t, t.h) for t in trajs], ground_truth=gt,
                                        mon_mode=cfg.mon_mode)
    report = metrics_mod.aggregate_runs([res])
    (out / "metric_report.json").write_text(report.to_json())
    print(report.to_json())
    return 0


def cmd_fit_weibull(args) -> int:
    cfg = _load_cfg(args)
    out = _out_dir(args, cfg)
    hi_file = out / "hi.csv"
    if not hi_file.exists():
        raise DataError(f"no HI table found in {out}; run `estimate-hi` first")
    trajs = hi_mod.load_hi_csv(hi_file)
    split_file = out / "split.json"
    if split_file.exists():
        train = set(json.loads(split_file.read_text())["train"])
        trajs = [t for t in trajs if t.unit_id in train]
    shifted = [hi_mod.HITrajectory(unit_id=t.unit_id, t=np.asarray(t.t) + 1, h=t.h)
               for t in trajs]  # Weibull needs positive times
    fit = weibull_mod.fit_expected_hi(shifted, thresholds=cfg.weibull_thresholds)
    fit.save(out / "weibull.json")
    print(f"expected-HI curve: beta={fit.beta:.3f} A={fit.A:.3f} B={fit.B:.5f} "
          f"C={fit.C:.3f} -> {out / 'weibull.json'}")
    return 0


def cmd_discover_causal(args) -> int:
    cfg = _load_cfg(args)
    out = _out_dir(args, cfg)
    fleet = exp.resolve_fleet(cfg)
    reg = RegressorSpec(name=args.regressor or "tree")
    table = rank_structures(fleet, cycle_filter=args.cycle_filter,
                            regressor=reg, seed=cfg.seeds[0])
    table.to_csv(out / "causal_ranking.csv", index=False)
    print(table.head(5).to_string(index=False))
    print(f"full ranking in {out / 'causal_ranking.csv'}")
    return 0


def _rul_datasets(cfg, out: Path, with_hi: bool):
    fleet, scaled, train_ids, test_ids = _prepare(cfg, out)
    hi_trajs = None
    if with_hi:
        if cfg.rul_hi_source == "estimated":
            hi_file = out / "hi.csv"
            if not hi_file.exists():
                raise DataError(f"rul_hi_source=estimated needs {hi_file}")
            hi_trajs = hi_mod.load_hi_csv(hi_file)
        else:
            hi_trajs = [hi_mod.HITrajectory(unit_id=u.id, t=u.cycle_indices,
                                            h=u.ground_truth_hi) for u in fleet.units]
    t_scale = float(max(scaled.unit(u).cycles[-1].t for u in train_ids))
    common = dict(S=cfg.rul_window, stride=cfg.rul_stride, cap=cfg.rul_cap,
                  t_scale=t_scale)
    ds_train = prog_mod.build_rul_dataset(scaled.subset(train_ids), hi=hi_trajs, **common)
    ds_test = prog_mod.build_rul_dataset(scaled.subset(test_ids), hi=hi_trajs, **common)
    return ds_train, ds_test


def cmd_train_rul(args) -> int:
    cfg = _load_cfg(args)
    out = _out_dir(args, cfg)
    with_hi = not args.baseline
    ds_train, _ = _rul_datasets(cfg, out, with_hi)
    seed = cfg.seeds[0]
    model = prog_mod.build_rul_model(ds_train.n_channels, ds_train.S,
                                     preset=cfg.rul_preset, seed=seed)
    prog_mod.train_rul(model, ds_train, epochs=cfg.rul_epochs,
                       batch_size=cfg.rul_batch_size,
                       learning_rate=cfg.rul_learning_rate, seed=seed)
    import torch
    name = "rul_baseline.pt" if args.baseline else "rul_augmented.pt"
    torch.save({"format": "fleethi-rul-1", "channels": ds_train.n_channels,
                "S": ds_train.S, "preset": cfg.rul_preset,
                "state_dict": model.state_dict()}, out / name)
    print(f"RUL model saved to {out / name}")
    return 0


def cmd_evaluate_rul(args) -> int:
    import torch
    cfg = _load_cfg(args)
    out = _out_dir(args, cfg)
    reports = {}
    for name, with_hi in (("rul_baseline.pt", False), ("rul_augmented.pt", True)):
        path = out / name
        if not path.exists():
            continue
        payload = torch.load(path, weights_only=False)
        model = prog_mod.build_rul_model(payload["channels"], payload["S"],
                                         preset=payload["preset"])
        model.load_state_dict(payload["state_dict"])
        _, ds_test = _rul_datasets(cfg, out, with_hi)
        reports[name] = prog_mod.evaluate_rul(model, ds_test)
        pred = prog_mod.predict_rul(model, ds_test)
        pd.DataFrame({"unit": [m.unit_id for m in ds_test.meta],
                      "cycle": [m.cycle for m in ds_test.meta],
                      "rul_true": ds_test.labels, "rul_pred": pred}).to_csv(
            out / name.replace(".pt", "_predictions.csv"), index=False)
    if not reports:
        raise DataError(f"no RUL models found in {out}; run `train-rul` first")
    if len(reports) == 2:
        base, aug = reports["rul_baseline.pt"], reports["rul_augmented.pt"]
        aug.avg_improvement = prog_mod.average_improvement(base, aug)
        (out / "rul_report.json").write_text(aug.to_json())
        print(aug.to_json())
    else:
        only = next(iter(reports.values()))
        (out / "rul_report.json").write_text(only.to_json())
        print(only.to_json())
    return 0


def cmd_report(args) -> int:
    out = Path(args.out or ".")
    metric_file = out / "metric_report.json"
    rul_file = out / "rul_report.json"
    if not metric_file.exists() and not rul_file.exists():
        raise DataError(f"no artifacts found in {out}")
    if metric_file.exists():
        rep = json.loads(metric_file.read_text())
        print("HI criteria (mean over runs, std in parentheses)")
        print(f"  runs:   {rep['n_runs']}")
        for key in ("mon", "tren", "prog", "mutinf"):
            print(f"  {key:7s} {rep[key + '_mean']:.3f} ({rep[key + '_std']:.3f})")
        print(f"  mape    {rep['mape_mean']:.1f}% ({rep['mape_std']:.1f})")
    if rul_file.exists():
        rep = json.loads(rul_file.read_text())
        print("RUL prognostics")
        print(f"  mae  {rep['mae']:.2f}  rmse {rep['rmse']:.2f}  mape {rep['mape']:.1f}%")
        if rep.get("avg_improvement") is not None:
            print(f"  average improvement over baseline: {rep['avg_improvement']:.1f}%")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fleethi",
        description="Health-index estimation pipeline for fleet condition-monitoring data")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_text, extra=None):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", type=Path, help="experiment config file")
        p.add_argument("--seed", type=int, help="override the config's seed list")
        p.add_argument("--out", type=Path, help="artifact directory")
        if extra:
            extra(p)
        p.set_defaults(handler=fn)

    add("run", cmd_run, "full pipeline: train, estimate, evaluate, plot")
    add("generate", cmd_generate, "write a synthetic fleet as CSV")
    add("train", cmd_train, "train the configured method and checkpoint it",
        lambda p: (p.add_argument("--constraint",
                                  choices=list(models_mod.CONSTRAINTS)),
                   p.add_argument("--weibull-file", type=Path)))
    add("estimate-hi", cmd_estimate_hi, "estimate HI from a persisted checkpoint")
    add("evaluate-hi", cmd_evaluate_hi, "score a persisted HI table against ground truth")
    add("fit-weibull", cmd_fit_weibull, "fit the expected-HI curve from a HI table")
    add("discover-causal", cmd_discover_causal, "rank causal structures on a fleet",
        lambda p: (p.add_argument("--cycle-filter", type=int, default=45),
                   p.add_argument("--regressor", choices=["tree", "knn"])))
    add("train-rul", cmd_train_rul, "train the RUL model (baseline or HI-augmented)",
        lambda p: p.add_argument("--baseline", action="store_true",
                                 help="train without the HI channel"))
    add("evaluate-rul", cmd_evaluate_rul, "evaluate persisted RUL models")
    add("report", cmd_report, "render persisted reports as text")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except ConfigError as e:
        log.error("config error: %s", e)
        return EXIT_CONFIG
    except (DataError, prog_mod.RulDataError, weibull_mod.FitError, FileNotFoundError) as e:
        log.error("data error: %s", e)
        return EXIT_DATA
    except models_mod.TrainingError as e:
        log.error("training error: %s", e)
        return EXIT_TRAIN


if __name__ == "__main__":
    sys.exit(main())
