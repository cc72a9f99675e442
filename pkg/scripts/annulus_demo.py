"""Annulus SLE_6 trace to CSV, and the rotation equivalence of the two annulus equations."""

import math
import sys

import numpy as np

from skle.annulus import annulus_sle_trace, rotation_equivalence, write_annulus_csv

out = sys.argv[1] if len(sys.argv) > 1 else "annulus_trace.csv"
tr = annulus_sle_trace(0.3, 6.0, 1e-3, 0.5, rng=0)
write_annulus_csv(tr, out)
print(f"{out}: {len(tr)} samples, final |tip| {abs(tr[-1].tip):.4f}")
rng = np.random.default_rng(1)
ang = np.concatenate([np.zeros((10, 1)), np.cumsum(rng.standard_normal((10, 400)) * math.sqrt(6e-3), 1)], 1)
z = np.array([0.5, 0.6j, -0.7 + 0.1j])
print(f"rotation equivalence {rotation_equivalence(0.3, ang, 1e-3, z):.2e}")
