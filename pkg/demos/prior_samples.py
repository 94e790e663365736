"""Draw from the hierarchical prior and write a few samples to CSV."""

import numpy as np

from hiermap import Mesh, ModelParams, make_rng
from hiermap.io import write_csv
from hiermap.stochastic import sample_prior

mesh = Mesh(8)
p = ModelParams(eps=0.05)
rng = make_rng(0)
cols = {"t": mesh.nodes}
for k in range(3):
    draw = sample_prior(mesh, p, rng)
    cols[f"v{k}"] = draw.v.values
    cols[f"u{k}"] = draw.u.values
    print(f"draw {k}: v in [{draw.v.values.min():.2f}, {draw.v.values.max():.2f}], "
          f"std(u)={np.std(draw.u.values):.3f}")
write_csv("prior_samples.csv", list(cols), np.column_stack(list(cols.values())))
print("wrote prior_samples.csv")
