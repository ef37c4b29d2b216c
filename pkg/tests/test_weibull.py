import numpy as np
import pytest

from fleethi.weibull import (DEFAULT_THRESHOLDS, FitError, WeibullFit, crossing_times,
                             eta_fixed_beta, fit_eta_curve, fit_expected_hi,
                             fit_weibull, g_of_t)


# ---------------------------------------------------------------------------
# Crossing times
# ---------------------------------------------------------------------------

def test_crossing_interpolates():
    out = crossing_times([(np.array([0, 1]), np.array([1.0, 0.4]))], [0.7])
    assert out[0.7] == [pytest.approx(0.5)]


def test_crossing_exact_hit():
    traj = (np.arange(4), np.array([1.0, 0.8, 0.6, 0.2]))
    out = crossing_times([traj], [0.6])
    assert out[0.6] == [pytest.approx(2.0)]


def test_crossing_excludes_censored_units():
    trajs = [(np.arange(3), np.array([1.0, 0.9, 0.85])),
             (np.arange(3), np.array([1.0, 0.6, 0.3]))]
    out = crossing_times(trajs, [0.5])
    assert len(out[0.5]) == 1


def test_crossing_threshold_nobody_reaches_is_omitted():
    out = crossing_times([(np.arange(3), np.array([1.0, 0.9, 0.8]))], [0.5, 0.85])
    assert 0.5 not in out and 0.85 in out


def test_crossing_rejects_bad_threshold():
    with pytest.raises(ValueError):
        crossing_times([], [1.5])


# ---------------------------------------------------------------------------
# Weibull MLE
# ---------------------------------------------------------------------------

def test_fit_weibull_monte_carlo():
    rng = np.random.default_rng(42)
    samples = 100.0 * rng.weibull(2.0, size=10_000)
    fit = fit_weibull(samples)
    assert 1.9 <= fit.beta <= 2.1
    assert 97.0 <= fit.eta <= 103.0
    assert not fit.degenerate


def test_fit_weibull_point_mass_capped():
    fit = fit_weibull([50.0] * 10)
    assert fit.degenerate
    assert fit.beta == pytest.approx(200.0)
    assert fit.eta == pytest.approx(50.0, rel=1e-3)


def test_fit_weibull_tiny_sample_exists():
    fit = fit_weibull([1.0, 2.0, 3.0])
    assert fit.beta > 0 and fit.eta > 0 and np.isfinite(fit.beta)


def test_fit_weibull_preconditions():
    with pytest.raises(FitError):
        fit_weibull([1.0, 2.0])
    with pytest.raises(FitError):
        fit_weibull([1.0, -2.0, 3.0])


def test_fit_weibull_scale_equivariance():
    rng = np.random.default_rng(7)
    t = 30.0 * rng.weibull(1.7, size=400)
    a = fit_weibull(t)
    b = fit_weibull(1000.0 * t)
    assert b.beta == pytest.approx(a.beta, abs=1e-6)
    assert b.eta == pytest.approx(1000.0 * a.eta, rel=1e-6)


def test_eta_fixed_beta_matches_closed_form():
    t = np.array([10.0, 20.0, 40.0])
    beta = 2.0
    expected = (np.mean(t ** beta)) ** (1 / beta)
    assert eta_fixed_beta(t, beta) == pytest.approx(expected, rel=1e-12)


# ---------------------------------------------------------------------------
# Eta curve and g(t)
# ---------------------------------------------------------------------------

def test_fit_eta_curve_exact_recovery():
    eta = np.linspace(10, 80, 8)
    s = 1.0 - 0.01 * eta  # A=1, B=0.01, C=1
    a, b, c = fit_eta_curve(list(zip(eta, s)))
    resid = np.abs(a - (b * eta) ** c - s)
    assert resid.max() < 1e-6


def test_fit_eta_curve_noisy_recovery():
    errs = []
    for seed in range(10):
        rng = np.random.default_rng(seed)
        eta = np.linspace(10, 80, 8)
        s = 1.0 - 0.01 * eta + rng.normal(0, 0.02, size=eta.size)
        a, _, _ = fit_eta_curve(list(zip(eta, s)))
        errs.append(abs(a - 1.0))
    assert np.median(errs) < 0.05


def test_fit_eta_curve_needs_three_pairs():
    with pytest.raises(FitError):
        fit_eta_curve([(10.0, 0.9), (20.0, 0.8)])


def test_g_of_t_at_zero_is_A():
    fit = WeibullFit(beta=2.0, eta_by_threshold={}, A=1.1, B=0.02, C=1.3, P=0.5)
    assert g_of_t(0.0, fit) == pytest.approx(1.1)


def test_g_of_t_hand_case():
    # P = 1 - e^-1 makes -ln(1-P) = 1, so g(t) = 1 - 0.01 t
    fit = WeibullFit(beta=2.0, eta_by_threshold={}, A=1.0, B=0.01, C=1.0,
                     P=1.0 - np.exp(-1.0))
    assert g_of_t(50.0, fit) == pytest.approx(0.5, abs=1e-12)
    assert g_of_t(200.0, fit) == 0.0  # clipped


def test_g_monotone_non_increasing_and_p_direction():
    rng = np.random.default_rng(5)
    t = np.linspace(0, 300, 200)
    for _ in range(20):
        fit = WeibullFit(beta=rng.uniform(0.5, 5), eta_by_threshold={},
                         A=rng.uniform(0.8, 1.5), B=rng.uniform(0.001, 0.05),
                         C=rng.uniform(0.2, 3), P=rng.uniform(0.05, 0.95))
        g = g_of_t(t, fit)
        assert np.all(np.diff(g) <= 1e-12)
        # raising P raises the curve before clipping (the CDF composition)
        hi = g_of_t(t[1:], WeibullFit(beta=fit.beta, eta_by_threshold={}, A=fit.A,
                                      B=fit.B, C=fit.C, P=min(fit.P + 0.04, 0.99)))
        assert np.all(hi >= g_of_t(t[1:], fit) - 1e-12)


def test_g_rejects_bad_p():
    fit = WeibullFit(beta=2.0, eta_by_threshold={}, A=1.0, B=0.01, C=1.0, P=1.5)
    with pytest.raises(FitError):
        g_of_t(1.0, fit)


# ---------------------------------------------------------------------------
# Round trip through the whole pipeline
# ---------------------------------------------------------------------------

def synth_weibull_trajectories(n_units=50, beta=2.0, eta_fail=100.0, seed=0):
    """Units whose threshold crossings are exactly Weibull with shared beta.

    Unit u has h_u(t) = 1 - t / (eta_fail * q_u) with q_u ~ Weibull(beta, 1),
    so the time to reach threshold s is q_u * eta_fail * (1 - s): Weibull
    distributed with eta_s = eta_fail * (1 - s), decreasing in s.
    """
    rng = np.random.default_rng(seed)
    q = rng.weibull(beta, size=n_units)
    trajs = []
    for u, qu in enumerate(q):
        t_fail = max(eta_fail * qu, 3.0)
        t = np.arange(0, int(np.ceil(t_fail)) + 1, dtype=float)
        h = np.clip(1.0 - t / t_fail, 0.0, 1.0)
        h[-1] = 0.0
        trajs.append((t, h))
    return trajs, q


def test_weibull_round_trip_recovers_median_curve():
    trajs, q = synth_weibull_trajectories()
    fit = fit_expected_hi(trajs, thresholds=DEFAULT_THRESHOLDS, P=0.5)
    assert abs(fit.beta - 2.0) / 2.0 <= 0.15
    # generating median curve: h_med(t) = 1 - t / (eta_fail * median(q))
    med = 100.0 * np.median(q)
    t = np.linspace(0, med, 60)
    target = np.clip(1.0 - t / med, 0.0, 1.0)
    mae = np.abs(g_of_t(t, fit) - target).mean()
    assert mae <= 0.05


def test_weibull_fit_persistence(tmp_path):
    trajs, _ = synth_weibull_trajectories(n_units=20, seed=1)
    fit = fit_expected_hi(trajs)
    fit.save(tmp_path / "w.json")
    back = WeibullFit.load(tmp_path / "w.json")
    assert back.beta == pytest.approx(fit.beta)
    assert back.eta_by_threshold == pytest.approx(fit.eta_by_threshold)
    t = np.linspace(0, 120, 50)
    np.testing.assert_allclose(g_of_t(t, back), g_of_t(t, fit))
