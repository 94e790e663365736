"""Shrink the edge width eps and watch the edge indicator v sharpen."""

from hiermap import Mesh, ModelParams, alternate_minimize, make_rng, synthesize_measurement
from hiermap.signals import step_signal
from hiermap.metrics import detect_wells, fidelity_integral

mesh = Mesh(10)
for eps in (0.02, 0.01, 0.006):
    p = ModelParams(eps=eps)
    m = synthesize_measurement(step_signal(), mesh, p, make_rng(3))
    est = alternate_minimize(m, p)
    wells = detect_wells(est.v)
    print(f"eps={eps:<6}  fidelity/eps={fidelity_integral(est.v) / eps:.3f}  wells={len(wells)}  "
          f"deepest={min(w.depth for w in wells):+.5f}")
