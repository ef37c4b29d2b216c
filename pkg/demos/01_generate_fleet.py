"""Generate a synthetic run-to-failure fleet and look at what is inside.

The generator follows a three-variable structural model: operating conditions
are drawn per cycle from a class-conditioned process, a hidden degradation
level grows with cycle count, and the sensors mix both causes plus noise.
Because the degradation is known exactly, everything downstream of this
script can be checked against ground truth.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from fleethi import GeneratorConfig, generate_fleet, save_fleet
from fleethi.datagen import MaintenancePolicy

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

# a small mixed-class fleet: four units per load class, convex degradation
config = GeneratorConfig(
    n_units=12,
    cycles_per_unit_range=(80, 120),
    samples_per_cycle=48,
    n_sensors=5,
    n_conditions=2,
    degradation_shape="convex",
    shape_exponent_range=(1.5, 3.0),
    seed=7,
)
fleet = generate_fleet(config)
print(f"{fleet.n_units} units, {fleet.n_sensors} sensors, {fleet.n_conditions} conditions")
print("unit lifetimes:", {u.id: u.n_cycles for u in fleet.units})

# ground-truth health: 1 at birth, 0 at failure, one value per cycle
fig, axes = plt.subplots(1, 3, figsize=(14, 3.5))
for u in fleet.units:
    axes[0].plot(u.cycle_indices, u.ground_truth_hi, alpha=0.7)
axes[0].set_title("ground-truth health index")
axes[0].set_xlabel("cycle")

# one cycle of raw signals: conditions switch between regimes, sensors follow
unit = fleet.units[0]
cyc = unit.cycles[len(unit.cycles) // 2]
axes[1].plot(cyc.w)
axes[1].set_title(f"conditions, {unit.id} cycle {cyc.t}")
axes[2].plot(cyc.x)
axes[2].set_title(f"sensors, {unit.id} cycle {cyc.t}")
fig.tight_layout()
fig.savefig(OUT / "fleet_overview.png", dpi=110)
print(f"wrote {OUT / 'fleet_overview.png'}")

# maintenance recovery shows up as bounded upward jumps in health
maint = GeneratorConfig(n_units=3, cycles_per_unit_range=(80, 100),
                        maintenance=MaintenancePolicy(probability=0.08, magnitude=0.12),
                        seed=3)
recovered = generate_fleet(maint)
fig, ax = plt.subplots(figsize=(6, 3.5))
for u in recovered.units:
    ax.plot(u.cycle_indices, u.ground_truth_hi)
ax.set_title("health with between-cycle maintenance recovery")
ax.set_xlabel("cycle")
fig.tight_layout()
fig.savefig(OUT / "maintenance_recovery.png", dpi=110)
print(f"wrote {OUT / 'maintenance_recovery.png'}")

# the CSV layout round-trips: one file per unit plus a manifest
fleet_dir = OUT / "fleet_csv"
save_fleet(fleet, fleet_dir)
print(f"fleet saved to {fleet_dir} ({len(list(fleet_dir.glob('*.csv')))} files)")
