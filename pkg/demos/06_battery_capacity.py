"""Battery-flavored views: capacity from a current integral, health as SOH.

Battery health is usually expressed as state of health, the ratio of present
to nominal capacity. Capacity comes from integrating the discharge current
over a reference cycle; health index 0 corresponds to the 60 percent SOH
failure threshold.
"""

import numpy as np

from fleethi import compute_capacity, to_soh

# a constant-current reference discharge: 2 A for one hour -> 2 Ah
dt = 1.0
current = np.full(3600, 2.0)
print(f"constant 2 A for 3600 s -> {compute_capacity(current, dt):.3f} Ah")

# a staged discharge profile integrates just as well
profile = np.concatenate([np.full(1800, 1.0), np.full(1800, 3.0)])
print(f"1 A then 3 A (30 min each) -> {compute_capacity(profile, dt):.3f} Ah")

# capacity fade across reference cycles becomes the ground-truth health
nominal = 2.2
fade = nominal * np.linspace(1.0, 0.52, 12)  # measured capacity per reference cycle
soh_curve = 100.0 * fade / nominal
print("\ncycle  capacity  SOH")
for i, (q, s) in enumerate(zip(fade, soh_curve)):
    flag = "  <- failed (below 60%)" if s < 60 else ""
    print(f"  {i:2d}    {q:5.2f} Ah  {s:5.1f}%{flag}")

# the health index view maps [0, 1] onto the 60..100 percent SOH band
h = np.array([1.0, 0.75, 0.5, 0.25, 0.0])
print("\nhealth index", h, "-> SOH", to_soh(h), "%")
