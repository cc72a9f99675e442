"""Grid order of the slit values, and the order of the driver-decomposition residual under dt halving."""

import math

import numpy as np

from skle.abm_mc import ObstacleSet
from skle.engine import SQRT6, SkleConfig, simulate, u_decomposition_check
from skle.fdgrid import GridSpec, v_star_field
from skle.geometry import SlitVector

S1 = SlitVector([1.0], [-0.5], [0.5])
F = ObstacleSet(segments=[(0j, 0.5j)])

vals = [v_star_field(S1, F, GridSpec(h=h, box_scale=30)).slit_values[0] for h in (1 / 8, 1 / 16, 1 / 32, 1 / 64)]
d = np.diff(vals)
print("slit values", np.round(vals, 6), "observed orders", np.round(np.log2(np.abs(d[:-1] / d[1:])), 3))

n, T = 20, 0.1
for dt in (2e-3, 1e-3):
    fine = np.random.default_rng(0).standard_normal((n, int(round(2 * T / dt)))) * math.sqrt(dt / 2)
    res = []
    for h, dB in ((dt, fine[:, 0::2] + fine[:, 1::2]), (dt / 2, fine)):
        ens = simulate(SkleConfig(S1, 0.0, SQRT6, "neg-bmd", h, T, phi2_every=1), dB=dB)
        res.append(np.mean([u_decomposition_check(ens.run(p)) for p in range(n)]))
    print(f"dt {dt:g} -> {dt / 2:g}: residual {res[0]:.3e} -> {res[1]:.3e}, order {math.log2(res[0] / res[1]):.2f}")
