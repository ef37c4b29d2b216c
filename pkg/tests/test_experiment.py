import json

import pytest

import fleethi as fh
from fleethi.config import ConfigError
from fleethi.datagen import GeneratorConfig, NoiseLevels
from fleethi.experiment import (ExperimentConfig, config_to_dict, estimate_hi,
                                resolve_fleet, run, split_units)
from fleethi.ingest import apply_scaler, fit_scaler


def tiny_config(**kw):
    gen = GeneratorConfig(n_units=6, cycles_per_unit_range=(10, 14),
                          samples_per_cycle=8, n_sensors=3, n_conditions=2,
                          noise=NoiseLevels(0.02, 0.2, 0.05), seed=0)
    base = dict(generator=gen, epochs=2, batch_size=8, learning_rate=1e-3,
                sliding_window=16, sliding_stride=8, healthy_cycles=6,
                make_plots=False, seeds=[0])
    base.update(kw)
    return ExperimentConfig(**base)


def test_split_in_distribution_covers_classes():
    fleet = fh.generate_fleet(GeneratorConfig(n_units=12, cycles_per_unit_range=(8, 10),
                                              samples_per_cycle=4, seed=0))
    train, test = split_units(fleet, tiny_config())
    assert len(train) + len(test) == 12
    assert set(train) | set(test) == set(fleet.unit_ids)
    test_classes = {fleet.unit(u).class_tag for u in test}
    assert test_classes == {"low", "mid", "high"}


def test_split_ood_trains_on_low_class_only():
    fleet = fh.generate_fleet(GeneratorConfig(n_units=9, cycles_per_unit_range=(8, 10),
                                              samples_per_cycle=4, seed=0))
    train, test = split_units(fleet, tiny_config(split="ood"))
    assert {fleet.unit(u).class_tag for u in train} == {"low"}
    assert "low" not in {fleet.unit(u).class_tag for u in test}


def test_split_explicit_lists_override():
    fleet = fh.generate_fleet(GeneratorConfig(n_units=4, cycles_per_unit_range=(8, 10),
                                              samples_per_cycle=4, seed=0))
    train, test = split_units(fleet, tiny_config(test_units=["u001"]))
    assert test == ["u001"]
    assert set(train) == {"u000", "u002", "u003"}
    with pytest.raises(ConfigError):
        split_units(fleet, tiny_config(train_units=["u000"], test_units=["u000"]))


def test_estimate_hi_all_methods_produce_unit_trajectories():
    cfg = tiny_config()
    fleet = resolve_fleet(cfg)
    train_ids, test_ids = split_units(fleet, cfg)
    scaled = apply_scaler(fleet, fit_scaler(fleet.subset(train_ids)))
    for method in ("proposed", "no_learning_bias", "no_inductive_bias", "plain_ae",
                   "residual_ae", "residual_reg", "supervised"):
        cfg.method = method
        trajs, model, history = estimate_hi(cfg, scaled, train_ids, fleet.unit_ids, 0)
        assert {t.unit_id for t in trajs} == set(fleet.unit_ids)
        for t in trajs:
            assert t.h.min() >= 0.0 and t.h.max() <= 1.0
        assert len(history) == cfg.epochs


def test_run_writes_artifact_directory(tmp_path):
    cfg = tiny_config(seeds=[0, 1], make_plots=True)
    out = run(cfg, out_dir=tmp_path / "exp")
    assert (out / "config.toml").exists()
    assert (out / "fingerprint.txt").exists()
    assert (out / "metric_report.json").exists()
    for s in (0, 1):
        assert (out / f"seed_{s}" / "hi.csv").exists()
        assert (out / f"seed_{s}" / "checkpoint.pt").exists()
        assert (out / f"seed_{s}" / "loss_history.csv").exists()
    assert any((out / "plots").glob("hi_*.png"))
    report = json.loads((out / "metric_report.json").read_text())
    assert report["n_runs"] == 2
    assert report["mon_std"] >= 0.0


def test_run_metric_report_byte_identical(tmp_path):
    cfg = tiny_config(seeds=[0])
    out1 = run(cfg, out_dir=tmp_path / "a")
    out2 = run(tiny_config(seeds=[0]), out_dir=tmp_path / "b")
    a = (out1 / "metric_report.json").read_bytes()
    b = (out2 / "metric_report.json").read_bytes()
    assert a == b


def test_run_rul_harness_outputs(tmp_path):
    cfg = tiny_config(run_rul=True, rul_window=8, rul_stride=8, rul_epochs=2,
                      rul_batch_size=32)
    out = run(cfg, out_dir=tmp_path / "rul")
    rep = json.loads((out / "seed_0" / "rul_report.json").read_text())
    assert "avg_improvement" in rep
    base = json.loads((out / "seed_0" / "rul_baseline.json").read_text())
    assert base["avg_improvement"] == 0.0


def test_residual_run_persists_pca(tmp_path):
    cfg = tiny_config(method="residual_reg")
    out = run(cfg, out_dir=tmp_path / "res")
    assert (out / "seed_0" / "pca.json").exists()


def test_config_snapshot_round_trips_through_disk(tmp_path):
    from fleethi.experiment import load_experiment_config
    from fleethi.config import save_config
    cfg = tiny_config(method="residual_reg", seeds=[7])
    save_config(config_to_dict(cfg), tmp_path / "c.toml")
    back = load_experiment_config(tmp_path / "c.toml")
    assert back.method == "residual_reg"
    assert back.seeds == [7]
    assert back.generator.samples_per_cycle == 8
    assert back.make_plots is False


def test_functional_constraint_two_stage(tmp_path):
    # without a weibull file the runner bootstraps one from a first-pass run
    cfg = tiny_config(method="proposed", constraint="functional", epochs=2)
    cfg.generator.cycles_per_unit_range = (12, 16)
    fleet = resolve_fleet(cfg)
    train_ids, _ = split_units(fleet, cfg)
    scaled = apply_scaler(fleet, fit_scaler(fleet.subset(train_ids)))
    trajs, _, history = estimate_hi(cfg, scaled, train_ids, fleet.unit_ids, 0)
    assert len(trajs) == fleet.n_units
