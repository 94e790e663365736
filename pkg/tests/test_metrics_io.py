import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays
from scipy import integrate

from hiermap.grid import Mesh, NodalSignal
from hiermap.io import (
    ConfigError,
    parse_config_text,
    read_csv,
    read_signal_csv,
    write_csv,
    write_signal_csv,
    write_svg,
)
from hiermap.metrics import detect_wells, fidelity_integral, match_jumps, relative_l2


def test_detect_wells_basic_and_wrap():
    mesh = Mesh(4)
    v = np.ones(16)
    v[[3, 4]] = 0.1
    v[15] = 0.0
    v[0] = 0.2
    wells = detect_wells(NodalSignal(mesh, v))
    assert len(wells) == 2
    locs = [w.location for w in wells]
    assert locs[0] == pytest.approx(3.5 / 16)
    assert locs[1] == pytest.approx(15.5 / 16)
    assert wells[1].depth == 0.0
    assert detect_wells(NodalSignal.constant(mesh, 1.0)) == []
    assert len(detect_wells(NodalSignal.constant(mesh, 0.0))) == 1


def test_fidelity_integral_quadrature(rng):
    mesh = Mesh(3)
    v = NodalSignal(mesh, rng.standard_normal(8))
    ref = integrate.quad(lambda t: (1 - v(t)) ** 2, 0, 1, points=list(mesh.nodes), epsabs=1e-14)[0]
    assert fidelity_integral(v) == pytest.approx(ref, abs=1e-12)


def test_relative_l2_and_match():
    mesh = Mesh(5)
    a = NodalSignal.sample(mesh, lambda t: np.sin(2 * np.pi * t))
    assert relative_l2(a, a) == 0
    assert relative_l2(NodalSignal(mesh, 1.1 * a.values), a) == pytest.approx(0.1)
    np.testing.assert_allclose(match_jumps([0.98, 0.31], [0.0, 0.3]), [0.02, 0.01])
    assert np.isinf(match_jumps([], [0.5])).all()


def test_config_parsing():
    cfg = parse_config_text("# comment\nn = 9, 10\n eps=0.01 # trailing\nmax-iter = 5\n")
    assert cfg == {"n": "9, 10", "eps": "0.01", "max_iter": "5"}
    with pytest.raises(ConfigError):
        parse_config_text("just words")
    with pytest.raises(ConfigError):
        parse_config_text(" = 3")


@given(arrays(float, st.integers(1, 30), elements=st.floats(allow_nan=False, allow_infinity=False)))
def test_signal_csv_round_trip(tmp_path_factory, x):
    path = tmp_path_factory.mktemp("csv") / "s.csv"
    t = np.arange(len(x)) / len(x)
    write_signal_csv(path, t, x)
    t2, x2 = read_signal_csv(path)
    np.testing.assert_array_equal(t2, t)
    np.testing.assert_array_equal(x2, x)


def test_csv_schema(tmp_path):
    p = write_csv(tmp_path / "a.csv", ["a", "b"], [[1, 0.1], [2, 1 / 3]])
    lines = p.read_text().splitlines()
    assert lines[0].startswith("# hiermap-csv/")
    assert lines[1] == "a,b"
    assert lines[3] == "2,0.33333333333333331"
    header, rows = read_csv(p)
    assert header == ["a", "b"] and len(rows) == 2
    (tmp_path / "bad.csv").write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        read_csv(tmp_path / "bad.csv")


def test_svg_writer(tmp_path):
    x = np.linspace(0, 1, 50)
    p = write_svg(tmp_path / "p.svg", [("sin", x, np.sin(x)), ("flat", x, np.zeros(50))], title="demo <1>")
    text = p.read_text()
    assert text.startswith("<svg") and text.count("<polyline") == 2 and "demo &lt;1&gt;" in text
