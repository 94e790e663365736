"""Compare the MAP edges with a brute-force Mumford-Shah search on a coarse mesh."""

import numpy as np

from hiermap import Mesh, ModelParams, alternate_minimize, synthesize_measurement
from hiermap.metrics import well_cells
from hiermap.signals import PiecewisePolySignal
from hiermap.solver import ms_bruteforce, ms_candidates, ms_energy_nodal

mesh = Mesh(6)
cand = ms_candidates(mesh, 16)
jumps = np.array([cand[np.argmin(np.abs(cand - t))] for t in (0.2, 0.6)])
truth = PiecewisePolySignal(jumps, (np.ones(2), np.zeros(2)))

p = ModelParams(eps=0.005)
m = synthesize_measurement(truth, mesh, p)
est = alternate_minimize(m, p)
cells = well_cells(est.v)
oracle = ms_bruteforce(m, mesh, p.residual_weight, k_max=2, jump_grid=16)

print("MAP jumps   ", (np.array(cells) + 0.5) / mesh.N, " energy", ms_energy_nodal(est.u, cells, m, p.residual_weight))
print("oracle jumps", oracle.jumps, " energy", oracle.value)
