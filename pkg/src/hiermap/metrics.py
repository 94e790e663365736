"""Structural diagnostics for reconstructions: v-wells, L2 distances, fidelity."""

from __future__ import annotations

from typing import List, NamedTuple

import numpy as np

from .grid import NodalSignal, cell_average

__all__ = ["Well", "detect_wells", "well_cells", "relative_l2", "fidelity_integral", "match_jumps"]

WELL_LEVEL = 0.5


class Well(NamedTuple):
    location: float
    depth: float
    cell: int


def detect_wells(v: NodalSignal, level: float = WELL_LEVEL) -> List[Well]:
    """Wells of ``v``: maximal periodic runs of cells whose average is below ``level``.

    A well is located at the midpoint of its lowest cell; its depth is the
    smallest nodal value of ``v`` inside the run.
    """
    N = v.mesh.N
    w = cell_average(v).values
    low = w < level
    if not low.any():
        return []
    if low.all():
        c = int(np.argmin(w))
        return [Well((c + 0.5) / N, float(v.values.min()), c)]
    # rotate so the scan starts on a cell above the level; runs then never wrap
    start = int(np.flatnonzero(~low)[0])
    order = (start + np.arange(N)) % N
    wells = []
    run: list = []
    for c in list(order) + [start]:
        if low[c]:
            run.append(c)
        elif run:
            cells = np.array(run)
            best = int(cells[np.argmin(w[cells])])
            nodes = np.concatenate([cells, (cells + 1) % N])
            wells.append(Well((best + 0.5) / N, float(v.values[nodes].min()), best))
            run = []
    return sorted(wells, key=lambda x: x.location)


def well_cells(v: NodalSignal, level: float = WELL_LEVEL) -> List[int]:
    return [w.cell for w in detect_wells(v, level)]


def _fine(u, M):
    t = np.arange(M) / M
    return u(t) if callable(u) else np.asarray(u)


def relative_l2(u, ref, samples: int = 1 << 14) -> float:
    """``||u - ref|| / ||ref||`` in L2(T), both evaluated on a common fine grid."""
    a, b = _fine(u, samples), _fine(ref, samples)
    return float(np.sqrt(np.mean((a - b) ** 2) / np.mean(b**2)))


def fidelity_integral(v: NodalSignal) -> float:
    """Exact ``int (1 - v)^2 dt`` for the PL interpolant."""
    e = 1.0 - v.values
    en = np.roll(e, -1)
    return float(np.sum(e * e + e * en + en * en) / (3.0 * v.mesh.N))


def match_jumps(found, truth) -> np.ndarray:
    """Periodic distance from each true jump to the nearest detected one."""
    found = np.asarray(found, dtype=float)
    if len(found) == 0:
        return np.full(len(truth), np.inf)
    d = np.abs(np.asarray(truth, dtype=float)[:, None] - found[None, :])
    return np.min(np.minimum(d, 1.0 - d), axis=1)
