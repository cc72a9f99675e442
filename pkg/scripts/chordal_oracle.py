"""Constant-driver chordal flow against sqrt(z^2 + 4T), and the swallow time of i."""

import time

import numpy as np

from skle.chordal import DrivingFunction, flow, swallow_time

t0 = time.perf_counter()
d = DrivingFunction.constant(0.0, 1.0, 1e-5)
z = (np.linspace(-3, 3, 10)[:, None] + 1j * np.linspace(0.2, 3, 10)[None, :]).ravel()
g, _ = flow(d, z)
exact = np.sqrt(z * z + 4)
exact = np.where(exact.imag < 0, -exact, exact)
print(f"max relative error {np.max(np.abs(g - exact) / np.abs(exact)):.3e}")
print(f"swallow time of i  {swallow_time(d, 1j):.6f}")
print(f"{time.perf_counter() - t0:.1f}s")
