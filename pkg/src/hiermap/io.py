"""Plain-text configuration, versioned CSV tables and a small SVG line-plot writer."""

from __future__ import annotations

import csv
import html
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np

__all__ = [
    "CSV_SCHEMA",
    "ConfigError",
    "parse_config_text",
    "read_config",
    "write_csv",
    "read_csv",
    "write_signal_csv",
    "read_signal_csv",
    "write_svg",
]

CSV_SCHEMA = "hiermap-csv/1"


class ConfigError(ValueError):
    """Invalid experiment configuration (maps to exit code 2)."""


def parse_config_text(text: str) -> Dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment; later keys override earlier ones."""
    out: Dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        out[key.replace("-", "_").lower()] = value
    return out


def read_config(path) -> Dict[str, str]:
    try:
        return parse_config_text(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    """Header row plus data rows; floats carry 17 significant digits.

    The first line is a ``# schema`` comment so readers can reject foreign files.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write(f"# {CSV_SCHEMA}\n")
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])
    return path


def read_csv(path) -> Tuple[List[str], List[List[str]]]:
    with Path(path).open(newline="") as fh:
        first = fh.readline().strip()
        if first != f"# {CSV_SCHEMA}":
            raise ValueError(f"{path}: unsupported CSV schema line {first!r}")
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def write_signal_csv(path, t: np.ndarray, values: np.ndarray) -> Path:
    return write_csv(path, ["t", "value"], zip(np.asarray(t, float), np.asarray(values, float)))


def read_signal_csv(path) -> Tuple[np.ndarray, np.ndarray]:
    header, rows = read_csv(path)
    if header != ["t", "value"]:
        raise ValueError(f"{path}: expected columns t,value")
    data = np.array(rows, dtype=float).reshape(-1, 2)
    return data[:, 0], data[:, 1]


_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#7f7f7f"]


def write_svg(path, series: Sequence[Tuple[str, np.ndarray, np.ndarray]], title: str = "",
              width: int = 720, height: int = 360) -> Path:
    """Overlay line plots of ``(label, x, y)`` series with a legend and axis extents."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pad_l, pad_r, pad_t, pad_b = 60, 150, 30, 40
    xs = np.concatenate([np.asarray(s[1], float) for s in series])
    ys = np.concatenate([np.asarray(s[2], float) for s in series])
    ys = ys[np.isfinite(ys)]
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = (float(ys.min()), float(ys.max())) if ys.size else (0.0, 1.0)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pw, ph = width - pad_l - pad_r, height - pad_t - pad_b

    def sx(x):
        return pad_l + (np.asarray(x, float) - x0) / (x1 - x0) * pw

    def sy(y):
        return pad_t + (y1 - np.asarray(y, float)) / (y1 - y0) * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect x="{pad_l}" y="{pad_t}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>',
        f'<text x="{pad_l}" y="{pad_t - 10}" font-size="13">{html.escape(title)}</text>',
        f'<text x="{pad_l}" y="{height - 15}">{x0:.3g}</text>',
        f'<text x="{pad_l + pw}" y="{height - 15}" text-anchor="end">{x1:.3g}</text>',
        f'<text x="{pad_l - 5}" y="{pad_t + ph}" text-anchor="end">{y0:.3g}</text>',
        f'<text x="{pad_l - 5}" y="{pad_t + 10}" text-anchor="end">{y1:.3g}</text>',
    ]
    for k, (label, x, y) in enumerate(series):
        color = _COLORS[k % len(_COLORS)]
        px, py = sx(x), sy(y)
        ok = np.isfinite(py)
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px[ok], py[ok]))
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{pts}"/>')
        ly = pad_t + 15 + 16 * k
        parts.append(f'<line x1="{pad_l + pw + 10}" y1="{ly - 4}" x2="{pad_l + pw + 30}" y2="{ly - 4}" '
                     f'stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{pad_l + pw + 35}" y="{ly}">{html.escape(label)}</text>')
    parts.append("</svg>")
    path.write_text("\n".join(parts) + "\n")
    return path
