"""Reconstruct the two-jump step from noisy, smoothed Fourier data and report the edges."""

from hiermap import Mesh, ModelParams, alternate_minimize, make_rng, synthesize_measurement
from hiermap.signals import step_signal
from hiermap.metrics import detect_wells, relative_l2

truth = step_signal()
p = ModelParams(eps=0.01)
for n in (9, 11):
    mesh = Mesh(n)
    m = synthesize_measurement(truth, mesh, p, make_rng(7))
    est = alternate_minimize(m, p)
    wells = detect_wells(est.v)
    err = relative_l2(est.u, truth.sample(mesh))
    print(f"N={mesh.N:5d}  outer iterations={len(est.trace.iterates) - 1:3d}  "
          f"relative L2 error={err:.3f}")
    for w in wells:
        print(f"    edge near t={w.location:.4f}  (min v={w.depth:+.4f})")
