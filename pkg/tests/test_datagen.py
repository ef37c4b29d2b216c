import numpy as np
import pytest

from fleethi.datagen import (GeneratorConfig, MaintenancePolicy, NoiseLevels,
                             degradation_curve, fleet_mixing, generate_fleet)


def test_linear_midpoint():
    assert degradation_curve("linear", 1, t=50, t_fail=100) == pytest.approx(0.5)


def test_start_of_life_is_one():
    for shape, e in [("linear", 1.0), ("convex", 2.3), ("concave", 0.4)]:
        assert degradation_curve(shape, e, t=0, t_fail=100) == pytest.approx(1.0)


def test_convex_hand_value():
    # 1 - 0.5^2
    assert degradation_curve("convex", 2, t=50, t_fail=100) == pytest.approx(0.75)


def test_end_of_life_is_zero():
    for shape, e in [("linear", 1.0), ("convex", 3.0), ("concave", 0.7)]:
        assert degradation_curve(shape, e, t=100, t_fail=100) == pytest.approx(0.0)


def test_curve_rejects_bad_inputs():
    with pytest.raises(ValueError):
        degradation_curve("linear", 1, t=1, t_fail=0)
    with pytest.raises(ValueError):
        degradation_curve("convex", -2, t=1, t_fail=10)
    with pytest.raises(ValueError):
        degradation_curve("convex", 0.5, t=1, t_fail=10)
    with pytest.raises(ValueError):
        degradation_curve("linear", 1, t=11, t_fail=10)


def test_curve_non_increasing():
    t = np.arange(0, 101)
    for shape, e in [("linear", 1.0), ("convex", 2.0), ("concave", 0.5)]:
        h = degradation_curve(shape, e, t, 100)
        assert np.all(np.diff(h) <= 0)


def _noiseless_linear_config(**kw):
    base = dict(n_units=3, cycles_per_unit_range=(10, 10), samples_per_cycle=8,
                degradation_shape="linear", shape_exponent_range=(1.0, 1.0),
                condition_class="mid", noise=NoiseLevels(eps1=0.0, eps2=0.0, eps3=0.0),
                seed=7)
    base.update(kw)
    return GeneratorConfig(**base)


def test_noiseless_linear_ground_truth():
    fleet = generate_fleet(_noiseless_linear_config())
    u = fleet.units[0]
    T = u.n_cycles - 1
    expected = 1.0 - np.arange(T + 1) / T
    np.testing.assert_allclose(u.ground_truth_hi, expected, atol=1e-12)


def test_determinism():
    cfg = GeneratorConfig(n_units=4, cycles_per_unit_range=(15, 25), seed=11)
    a = generate_fleet(cfg)
    b = generate_fleet(GeneratorConfig(n_units=4, cycles_per_unit_range=(15, 25), seed=11))
    assert a.equals(b)
    c = generate_fleet(GeneratorConfig(n_units=4, cycles_per_unit_range=(15, 25), seed=12))
    assert not a.equals(c)


def test_shape_echo():
    fleet = generate_fleet(GeneratorConfig(n_units=12, n_sensors=5, n_conditions=2,
                                           cycles_per_unit_range=(10, 12),
                                           samples_per_cycle=6, seed=0))
    assert fleet.n_units == 12
    assert fleet.n_sensors == 5
    assert fleet.n_conditions == 2


def test_ground_truth_monotone_without_maintenance():
    fleet = generate_fleet(GeneratorConfig(n_units=6, seed=3))
    for u in fleet.units:
        assert np.all(np.diff(u.ground_truth_hi) <= 1e-12)
        assert u.ground_truth_hi[0] == pytest.approx(1.0)
        assert u.ground_truth_hi[-1] == pytest.approx(0.0)


def test_maintenance_recovers_but_respects_historical_max():
    cfg = GeneratorConfig(n_units=6, cycles_per_unit_range=(60, 80),
                          maintenance=MaintenancePolicy(probability=0.2, magnitude=0.15),
                          seed=5)
    fleet = generate_fleet(cfg)
    any_jump = False
    for u in fleet.units:
        h = u.ground_truth_hi
        jumps = np.diff(h) > 1e-9
        any_jump |= bool(jumps.any())
        running_max = np.maximum.accumulate(h)
        assert np.all(h <= running_max + 1e-12)
        assert h.max() <= 1.0 and h.min() >= 0.0
    assert any_jump


def test_sensor_mixing_regenerates_noiseless_x():
    cfg = _noiseless_linear_config(n_units=2, samples_per_cycle=5)
    fleet = generate_fleet(cfg)
    mixing = fleet_mixing(cfg)
    for u in fleet.units:
        for cyc, h in zip(u.cycles, u.ground_truth_hi):
            np.testing.assert_allclose(cyc.x, mixing.apply(cyc.w, 1.0 - h), atol=1e-12)


def test_mixing_uses_both_causes_for_every_sensor():
    cfg = GeneratorConfig(seed=2)
    mixing = fleet_mixing(cfg)
    rng = np.random.default_rng(0)
    w = rng.uniform(0.2, 0.8, size=(50, cfg.n_conditions))
    x_low = mixing.apply(w, 0.1)
    x_high = mixing.apply(w, 0.9)
    assert np.all(np.abs(x_low - x_high).max(axis=0) > 1e-3)  # z moves every sensor
    w2 = w + 0.2
    assert np.all(np.abs(mixing.apply(w, 0.5) - mixing.apply(w2, 0.5)).max(axis=0) > 1e-4)


def test_w_marginal_invariant_to_degradation_parameters():
    base = GeneratorConfig(n_units=2, cycles_per_unit_range=(30, 30), seed=9)
    alt = GeneratorConfig(n_units=2, cycles_per_unit_range=(30, 30), seed=9,
                          degradation_shape="concave", shape_exponent_range=(0.3, 0.8),
                          noise=NoiseLevels(eps1=0.02, eps2=0.9, eps3=0.2),
                          maintenance=MaintenancePolicy(0.3, 0.2))
    fa, fb = generate_fleet(base), generate_fleet(alt)
    for ua, ub in zip(fa.units, fb.units):
        for ca, cb in zip(ua.cycles, ub.cycles):
            np.testing.assert_array_equal(ca.w, cb.w)


def test_config_validation():
    with pytest.raises(ValueError):
        GeneratorConfig(n_units=0).validate()
    with pytest.raises(ValueError):
        GeneratorConfig(noise=NoiseLevels(eps1=-1)).validate()
    with pytest.raises(ValueError):
        GeneratorConfig(cycles_per_unit_range=(50, 20)).validate()
    with pytest.raises(ValueError):
        GeneratorConfig(degradation_shape="convex",
                        shape_exponent_range=(0.2, 0.8)).validate()
    with pytest.raises(ValueError):
        GeneratorConfig(condition_class="turbo").validate()
