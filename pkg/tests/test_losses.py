import numpy as np
import pytest
import torch

from fleethi.models import (ConstraintSpec, TrainingError, loss_correlation,
                            loss_functional, loss_negative_gradient,
                            loss_reconstruction)
from fleethi.weibull import WeibullFit


def t64(a):
    return torch.as_tensor(np.asarray(a, dtype=float), dtype=torch.float64)


# ---------------------------------------------------------------------------
# Reconstruction
# ---------------------------------------------------------------------------

def test_reconstruction_zero_for_perfect():
    x = t64(np.random.default_rng(0).normal(size=(3, 2, 5)))
    assert loss_reconstruction(x, x.clone()).item() == 0.0


def test_reconstruction_unit_offset():
    x = torch.zeros(2, 3, 4, dtype=torch.float64)
    x_hat = torch.ones_like(x)
    mask = torch.ones(2, 4, dtype=torch.bool)
    assert loss_reconstruction(x, x_hat, mask).item() == pytest.approx(1.0)


def test_reconstruction_hand_mean():
    # half the entries differ by 2, rest equal -> mean 1
    x = torch.zeros(1, 1, 4, dtype=torch.float64)
    x_hat = t64([[[2.0, 2.0, 0.0, 0.0]]])
    assert loss_reconstruction(x, x_hat).item() == pytest.approx(1.0)


def test_reconstruction_masked_rows_excluded():
    x = torch.zeros(1, 2, 4, dtype=torch.float64)
    x_hat = torch.ones_like(x) * 3.0
    x_hat[0, :, 2:] = 100.0  # padded region, must not count
    mask = torch.tensor([[True, True, False, False]])
    assert loss_reconstruction(x, x_hat, mask).item() == pytest.approx(3.0)


def test_reconstruction_shape_mismatch():
    with pytest.raises(ValueError):
        loss_reconstruction(torch.zeros(1, 2, 3), torch.zeros(1, 3, 2))


# ---------------------------------------------------------------------------
# Correlation constraint
# ---------------------------------------------------------------------------

def test_correlation_perfect_negative():
    t = t64(np.arange(10))
    assert loss_correlation(-t.clone(), t).item() == pytest.approx(-1.0, abs=1e-9)


def test_correlation_perfect_positive():
    t = t64(np.arange(10))
    assert loss_correlation(t.clone(), t).item() == pytest.approx(1.0, abs=1e-9)


def test_correlation_constant_z_guarded():
    t = t64(np.arange(10))
    assert loss_correlation(torch.full((10,), 0.3, dtype=torch.float64), t).item() == 0.0


def test_correlation_scale_shift_invariance():
    rng = np.random.default_rng(1)
    z = t64(rng.normal(size=40))
    t = t64(np.arange(40))
    base = loss_correlation(z, t).item()
    for a, b in [(2.5, 1.0), (-3.0, 0.2), (0.01, -7.0)]:
        val = loss_correlation(a * z + b, t).item()
        assert val == pytest.approx(np.sign(a) * base, abs=1e-9)


# ---------------------------------------------------------------------------
# Negative gradient constraint
# ---------------------------------------------------------------------------

def test_negative_gradient_zero_for_decreasing():
    t = t64(np.arange(8))
    z = -0.3 * t
    assert loss_negative_gradient(z, t).item() == 0.0


def test_negative_gradient_unit_slope():
    assert loss_negative_gradient(t64([0.0, 1.0]), t64([0.0, 1.0])).item() == pytest.approx(1.0)


def test_negative_gradient_hand_case():
    z = t64([0.0, 1.0, 0.5])
    t = t64([0.0, 1.0, 2.0])
    assert loss_negative_gradient(z, t).item() == pytest.approx(0.5)


def test_negative_gradient_pairs_never_straddle_units():
    z = t64([0.0, 5.0, 0.0, 4.0])
    t = t64([0.0, 1.0, 0.0, 1.0])
    units = np.array(["a", "a", "b", "b"])
    val = loss_negative_gradient(z, t, units).item()
    assert val == pytest.approx((5.0 + 4.0) / 2)
    # the a->b boundary jump is not a pair
    z2 = t64([0.0, -1.0, 50.0, 40.0])
    assert loss_negative_gradient(z2, t, units).item() == 0.0


def test_negative_gradient_starved_batch_is_zero():
    z = t64([1.0, 2.0])
    t = t64([0.0, 1.0])
    units = np.array(["a", "b"])
    assert loss_negative_gradient(z, t, units).item() == 0.0


def test_negative_gradient_zero_iff_non_increasing():
    rng = np.random.default_rng(2)
    for _ in range(20):
        z = rng.normal(size=12)
        t = np.arange(12, dtype=float)
        val = loss_negative_gradient(t64(z), t64(t)).item()
        assert (val == 0.0) == bool(np.all(np.diff(z) <= 0))


# ---------------------------------------------------------------------------
# Functional constraint
# ---------------------------------------------------------------------------

FIT = WeibullFit(beta=2.0, eta_by_threshold={}, A=1.0, B=0.01, C=1.0,
                 P=1.0 - float(np.exp(-1.0)))  # g(t) = 1 - 0.01 t


def test_functional_zero_when_matching():
    t = t64([0.0, 10.0, 50.0])
    z = t64([1.0, 0.9, 0.5])
    assert loss_functional(z, t, FIT).item() == pytest.approx(0.0, abs=1e-12)


def test_functional_constant_offset():
    t = t64([0.0, 10.0, 50.0])
    z = t64([1.1, 1.0, 0.6])
    assert loss_functional(z, t, FIT).item() == pytest.approx(0.1, abs=1e-12)


def test_functional_mixed_offsets():
    t = t64([0.0, 10.0])
    z = t64([1.2, 0.5])  # offsets +0.2 and -0.4
    assert loss_functional(z, t, FIT).item() == pytest.approx(0.3, abs=1e-12)


def test_functional_requires_curve():
    with pytest.raises(TrainingError):
        loss_functional(t64([1.0]), t64([0.0]), None)
    with pytest.raises(TrainingError):
        ConstraintSpec(kind="functional").validate()


# ---------------------------------------------------------------------------
# Gradient checks: analytic vs central finite differences
# ---------------------------------------------------------------------------

def finite_difference_grad(fn, x: torch.Tensor, step: float = 1e-4) -> torch.Tensor:
    g = torch.zeros_like(x)
    flat = x.view(-1)
    gf = g.view(-1)
    for i in range(flat.numel()):
        orig = flat[i].item()
        flat[i] = orig + step
        hi = fn(x).item()
        flat[i] = orig - step
        lo = fn(x).item()
        flat[i] = orig
        gf[i] = (hi - lo) / (2 * step)
    return g


def relative_error(a: torch.Tensor, b: torch.Tensor) -> float:
    denom = max(a.norm().item(), b.norm().item(), 1e-12)
    return (a - b).norm().item() / denom


def check_loss_gradient(fn, z: torch.Tensor) -> float:
    z = z.clone().requires_grad_(True)
    fn(z).backward()
    analytic = z.grad.detach().clone()
    fd = finite_difference_grad(fn, z.detach().clone())
    return relative_error(analytic, fd)


def test_gradient_checks_all_losses():
    rng = np.random.default_rng(0)
    worst = {"mae": 0.0, "corr": 0.0, "ng": 0.0, "fn": 0.0}
    for _ in range(20):
        n = int(rng.integers(5, 12))
        t = t64(np.sort(rng.choice(np.arange(4 * n), size=n, replace=False)))
        # keep values away from |x - y| and relu kinks so the FD stencil is valid
        z = t64(rng.normal(size=n))
        x = t64(rng.normal(size=(2, 3, n)))
        x_hat = x + t64(np.where(rng.normal(size=(2, 3, n)) > 0, 1.0, -1.0) *
                        rng.uniform(0.2, 1.0, size=(2, 3, n)))
        mask = torch.ones(2, n, dtype=torch.bool)
        mask[1, n // 2:] = False

        err = check_loss_gradient(lambda v: loss_reconstruction(x, v, mask), x_hat)
        worst["mae"] = max(worst["mae"], err)
        err = check_loss_gradient(lambda v: loss_correlation(v, t), z)
        worst["corr"] = max(worst["corr"], err)
        slopes = np.where(rng.normal(size=n - 1) > 0, 1.0, -1.0) * rng.uniform(0.3, 1.5, size=n - 1)
        z_ng = t64(np.concatenate([[0.0], np.cumsum(slopes * np.diff(t.numpy()))]))
        err = check_loss_gradient(lambda v: loss_negative_gradient(v, t), z_ng)
        worst["ng"] = max(worst["ng"], err)
        z_fn = t64(rng.normal(size=n) + 2.0)  # keep |g(t) - z| away from 0
        err = check_loss_gradient(lambda v: loss_functional(v, t, FIT), z_fn)
        worst["fn"] = max(worst["fn"], err)
    for name, err in worst.items():
        assert err <= 1e-3, f"{name} gradient mismatch: {err}"
