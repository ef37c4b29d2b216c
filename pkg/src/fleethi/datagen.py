"""Synthetic fleet generator with known degradation ground truth.

The generator follows a three-assignment structural model: operating
conditions W are drawn from a class-conditioned random process, degradation
z grows with cycle count (optionally perturbed, optionally interrupted by
maintenance recovery), and sensor readings X mix both causes through a fixed
smooth nonlinearity plus measurement noise.

Every random draw derives from (seed, unit index, stream id), so units can be
generated independently and the whole fleet is bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fleet import CycleRecord, FleetDataset, Unit

SHAPES = ("linear", "convex", "concave")
CLASS_TAGS = ("low", "mid", "high")

# class-conditioned condition-level ranges and lifetime scaling; higher load
# classes run hotter and fail sooner
_CLASS_LEVEL_RANGE = {"low": (0.0, 0.45), "mid": (0.3, 0.75), "high": (0.55, 1.0)}
_CLASS_LIFE_FACTOR = {"low": 1.15, "mid": 1.0, "high": 0.85}

# substream ids, kept stable so stored fleets can be regenerated
_STREAM_W, _STREAM_DEG, _STREAM_MAINT, _STREAM_XNOISE = 0, 1, 2, 3
_STREAM_MIXING = 720917


@dataclass
class NoiseLevels:
    """Standard deviations of the three noise sources (conditions,
    degradation increments, sensor readings).

    eps3_cycle is the within-cycle-correlated part of the sensor noise: a
    common-mode offset drawn once per cycle and carried onto the sensors
    through fixed loadings. It models slowly varying unobserved disturbances
    (ambient effects) that ride on the sensors without appearing in the
    operating conditions. eps3_cycle_rho makes that disturbance an AR(1)
    process across cycles (0 keeps it independent per cycle); eps3_cycle is
    its stationary standard deviation either way.
    """

    eps1: float = 0.02
    eps2: float = 0.3
    eps3: float = 0.05
    eps3_cycle: float = 0.0
    eps3_cycle_rho: float = 0.0
    # measurement noise on the RECORDED conditions: sensors respond to the
    # true conditions, the dataset stores a corrupted reading of them
    eps1_obs: float = 0.0


@dataclass
class MaintenancePolicy:
    """Per-cycle chance of a bounded upward health jump."""

    probability: float = 0.05
    magnitude: float = 0.1


@dataclass
class GeneratorConfig:
    n_units: int = 12
    cycles_per_unit_range: tuple[int, int] = (80, 120)
    samples_per_cycle: int = 48
    n_sensors: int = 5
    n_conditions: int = 2
    degradation_shape: str = "convex"
    shape_exponent_range: tuple[float, float] = (1.5, 3.0)
    condition_class: str = "mixed"  # "mixed" or one of CLASS_TAGS
    noise: NoiseLevels = field(default_factory=NoiseLevels)
    maintenance: MaintenancePolicy | None = None
    seed: int = 0

    def validate(self) -> None:
        if self.n_units < 1:
            raise ValueError("n_units must be >= 1")
        if self.n_sensors < 1 or self.n_conditions < 1:
            raise ValueError("need at least one sensor and one condition channel")
        if self.samples_per_cycle < 1:
            raise ValueError("samples_per_cycle must be >= 1")
        lo, hi = self.cycles_per_unit_range
        if not (2 <= lo <= hi):
            raise ValueError("cycles_per_unit_range must satisfy 2 <= min <= max")
        if self.degradation_shape not in SHAPES:
            raise ValueError(f"degradation_shape must be one of {SHAPES}")
        elo, ehi = self.shape_exponent_range
        if not (0 < elo <= ehi):
            raise ValueError("shape_exponent_range must be positive and ordered")
        if self.degradation_shape == "convex" and ehi <= 1:
            raise ValueError("convex shape needs exponents > 1")
        if self.degradation_shape == "concave" and elo >= 1:
            raise ValueError("concave shape needs exponents < 1")
        if min(self.noise.eps1, self.noise.eps2, self.noise.eps3,
               self.noise.eps3_cycle, self.noise.eps1_obs) < 0:
            raise ValueError("noise standard deviations must be >= 0")
        if not (0 <= self.noise.eps3_cycle_rho < 1):
            raise ValueError("eps3_cycle_rho must lie in [0, 1)")
        if self.condition_class != "mixed" and self.condition_class not in CLASS_TAGS:
            raise ValueError(f"condition_class must be 'mixed' or one of {CLASS_TAGS}")
        if self.maintenance is not None:
            if not (0 <= self.maintenance.probability <= 1):
                raise ValueError("maintenance probability must lie in [0, 1]")
            if self.maintenance.magnitude < 0:
                raise ValueError("maintenance magnitude must be >= 0")


def degradation_curve(shape: str, exponent: float, t, t_fail: float):
    """Health value(s) of the power-law degradation curve at cycle(s) t.

    The curve starts at 1, ends at 0 when t reaches t_fail, and its curvature
    is set by the exponent: above 1 the loss accelerates (convex degradation),
    below 1 it decelerates (concave), and exactly 1 is the linear case.
    """
    if shape not in SHAPES:
        raise ValueError(f"unknown shape {shape!r}")
    if t_fail <= 0:
        raise ValueError("t_fail must be positive")
    if exponent <= 0:
        raise ValueError("exponent must be positive")
    if shape == "linear" and abs(exponent - 1.0) > 1e-12:
        raise ValueError("linear shape requires exponent == 1")
    if shape == "convex" and exponent <= 1:
        raise ValueError("convex shape requires exponent > 1")
    if shape == "concave" and exponent >= 1:
        raise ValueError("concave shape requires exponent < 1")
    t_arr = np.asarray(t, dtype=float)
    if t_arr.min() < 0 or t_arr.max() > t_fail:
        raise ValueError("t must lie in [0, t_fail]")
    h = 1.0 - (t_arr / t_fail) ** exponent
    return float(h) if np.ndim(t) == 0 else h


@dataclass
class SensorMixing:
    """Fixed per-fleet coefficients mapping (W rows, degradation z) to sensors.

    sensor_j = a_j * g_j(W) + b_j * z + c_j * g_j(W) * z, where g_j is tanh of
    a random affine projection of the condition row. Amplitudes keep the
    condition influence dominant and the degradation influence subtle.
    nu_loading carries the per-cycle common-mode disturbance (eps3_cycle)
    onto the sensors.
    """

    proj: np.ndarray  # [p, k] unit-norm projections
    omega: np.ndarray  # [p] projection scales
    phase: np.ndarray  # [p] projection offsets
    a: np.ndarray  # [p] condition amplitudes
    b: np.ndarray  # [p] degradation amplitudes
    c: np.ndarray  # [p] interaction amplitudes
    nu_loading: np.ndarray | None = None  # [p] disturbance loadings

    def g(self, w_rows: np.ndarray) -> np.ndarray:
        """Smooth per-sensor condition feature, shape [m, p]."""
        v = w_rows @ self.proj.T  # [m, p]
        return np.tanh(self.omega * v + self.phase)

    def apply(self, w_rows: np.ndarray, z: float) -> np.ndarray:
        """Noiseless sensor rows for one cycle at degradation level z."""
        gw = self.g(np.asarray(w_rows, dtype=float))
        return self.a * gw + self.b * z + self.c * gw * z


def fleet_mixing(config: GeneratorConfig) -> SensorMixing:
    """The mixing used by generate_fleet for this config (seed-determined)."""
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, _STREAM_MIXING]))
    p, k = config.n_sensors, config.n_conditions
    proj = rng.normal(size=(p, k))
    proj /= np.linalg.norm(proj, axis=1, keepdims=True)
    omega = rng.uniform(1.0, 3.0, size=p)
    phase = rng.uniform(-1.0, 1.0, size=p)
    sign = lambda n: rng.choice([-1.0, 1.0], size=n)
    a = sign(p) * rng.uniform(0.8, 1.4, size=p)
    b = sign(p) * rng.uniform(0.4, 0.8, size=p)
    c = sign(p) * rng.uniform(0.15, 0.35, size=p)
    nu = sign(p) * rng.uniform(0.5, 1.0, size=p)
    return SensorMixing(proj=proj, omega=omega, phase=phase, a=a, b=b, c=c,
                        nu_loading=nu)


def _unit_rng(seed: int, unit_idx: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, unit_idx, stream]))


def _unit_class(config: GeneratorConfig, unit_idx: int) -> str:
    if config.condition_class == "mixed":
        return CLASS_TAGS[unit_idx % len(CLASS_TAGS)]
    return config.condition_class


def _draw_exponent(config: GeneratorConfig, rng: np.random.Generator) -> float:
    lo, hi = config.shape_exponent_range
    if config.degradation_shape == "linear":
        return 1.0
    if config.degradation_shape == "convex":
        lo = max(lo, np.nextafter(1.0, 2.0))
    else:
        hi = min(hi, np.nextafter(1.0, 0.0))
    return float(rng.uniform(lo, hi))


def _condition_profile(rng: np.random.Generator, m: int, k: int, class_tag: str,
                       eps1: float) -> np.ndarray:
    """Piecewise-constant per-cycle condition rows (think flight phases)."""
    lo, hi = _CLASS_LEVEL_RANGE[class_tag]
    n_seg = int(rng.integers(3, 6))
    # segment boundaries over the cycle's rows
    cuts = np.sort(rng.choice(np.arange(1, m), size=min(n_seg - 1, m - 1), replace=False)) \
        if m > 1 else np.array([], dtype=int)
    w = np.empty((m, k))
    start = 0
    for cut in list(cuts) + [m]:
        w[start:cut] = rng.uniform(lo, hi, size=k)
        start = cut
    if eps1 > 0:
        w += rng.normal(0.0, eps1, size=(m, k))
    return w


def _ground_truth(config: GeneratorConfig, unit_idx: int, class_tag: str) -> np.ndarray:
    """Per-cycle health values, 1 at cycle 0 down to 0 at end of life."""
    rng = _unit_rng(config.seed, unit_idx, _STREAM_DEG)
    lo, hi = config.cycles_per_unit_range
    life = int(rng.integers(lo, hi + 1))
    life = max(3, int(round(life * _CLASS_LIFE_FACTOR[class_tag])))
    t_fail = life - 1
    exponent = _draw_exponent(config, rng)
    h = degradation_curve(config.degradation_shape, exponent, np.arange(life), t_fail)
    if config.noise.eps2 > 0:
        # jitter the per-cycle increments multiplicatively and renormalize,
        # preserving monotonicity and the endpoints
        d = -np.diff(h)
        d = d * np.exp(config.noise.eps2 * rng.normal(size=d.size))
        d *= 1.0 / d.sum()
        h = np.concatenate([[1.0], 1.0 - np.cumsum(d)])
        h[-1] = 0.0
    if config.maintenance is not None:
        mrng = _unit_rng(config.seed, unit_idx, _STREAM_MAINT)
        jumps = mrng.random(h.size) < config.maintenance.probability
        offset, hist_max = 0.0, h[0]
        out = h.copy()
        for c in range(1, h.size):
            if jumps[c]:
                offset += config.maintenance.magnitude
            out[c] = min(h[c] + offset, hist_max, 1.0)
            out[c] = max(out[c], 0.0)
            hist_max = max(hist_max, out[c])
        h = out
    return np.clip(h, 0.0, 1.0)


def generate_fleet(config: GeneratorConfig) -> FleetDataset:
    """Generate a run-to-failure fleet with per-cycle ground-truth health."""
    config.validate()
    mixing = fleet_mixing(config)
    m = config.samples_per_cycle
    units = []
    for u in range(config.n_units):
        class_tag = _unit_class(config, u)
        h = _ground_truth(config, u, class_tag)
        wrng = _unit_rng(config.seed, u, _STREAM_W)
        xrng = _unit_rng(config.seed, u, _STREAM_XNOISE)
        cycles = []
        nu = 0.0
        rho = config.noise.eps3_cycle_rho
        for t, h_t in enumerate(h):
            w = _condition_profile(wrng, m, config.n_conditions, class_tag,
                                   config.noise.eps1)
            x = mixing.apply(w, 1.0 - h_t)
            if config.noise.eps3_cycle > 0:
                # one scalar disturbance per cycle, coherent across sensors;
                # AR(1) across cycles when rho > 0, stationary std eps3_cycle
                if t == 0 or rho == 0.0:
                    nu = xrng.normal(0.0, config.noise.eps3_cycle)
                else:
                    nu = rho * nu + xrng.normal(
                        0.0, config.noise.eps3_cycle * np.sqrt(1.0 - rho ** 2))
                x = x + nu * mixing.nu_loading
            if config.noise.eps3 > 0:
                x = x + xrng.normal(0.0, config.noise.eps3, size=x.shape)
            if config.noise.eps1_obs > 0:
                w = w + xrng.normal(0.0, config.noise.eps1_obs, size=w.shape)
            cycles.append(CycleRecord(t=t, x=x, w=w))
        units.append(Unit(id=f"u{u:03d}", class_tag=class_tag, cycles=cycles,
                          ground_truth_hi=h))
    return FleetDataset(units=units)
