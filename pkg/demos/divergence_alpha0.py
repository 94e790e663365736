"""Without the N^-alpha weight (alpha = 0) the discrete objective is unbounded below as N grows."""

import numpy as np

from hiermap import Mesh, ModelParams, alternate_minimize, make_rng, synthesize_measurement
from hiermap.signals import step_signal
from hiermap.functionals import min_gN

print("best constant-v value of the alpha=0 v-functional")
for n in range(6, 15, 2):
    v, val = min_gN(2**n, 0.01)
    print(f"  N={2**n:6d}  v*={v:.4f}  value={val:12.1f}")

print("full alpha=0 solves: sup of v keeps growing")
for n in range(5, 10):
    p = ModelParams(eps=0.01, alpha=0.0)
    mesh = Mesh(n)
    est = alternate_minimize(synthesize_measurement(step_signal(), mesh, p, make_rng(1)), p)
    print(f"  N={mesh.N:4d}  max v={np.max(est.v.values):.3f}")
