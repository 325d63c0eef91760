import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fracflow.grid import (
    Domain,
    Grid,
    GridFunction,
    builtin_family,
    format_float,
    make_grid,
    read_csv,
    sample,
)


def test_domain_validation():
    assert Domain(0, 1).length == 1
    with pytest.raises(ValueError):
        Domain(1, 1)
    with pytest.raises(ValueError):
        Domain(0, math.inf)


def test_grid_nodes_and_spacing():
    g = make_grid(Domain(-1, 1), 3)
    assert g.h == pytest.approx(0.5)
    np.testing.assert_allclose(g.nodes, [-0.5, 0.0, 0.5])
    with pytest.raises(ValueError):
        Grid(Domain(), 2)
    with pytest.raises(ValueError):
        g.nodes[0] = 3.0


def test_gaussian_samples_on_three_nodes():
    g = make_grid(Domain(-1, 1), 3)
    u = sample(lambda x: np.exp(-8 * x ** 2), g)
    np.testing.assert_allclose(u.coeffs, [math.exp(-2), 1.0, math.exp(-2)], rtol=1e-15)


def test_hat_evaluation_and_index_range():
    g = make_grid(Domain(0, 1), 4)
    assert g.hat(2, g.nodes[1]) == 1.0
    assert g.hat(2, g.nodes[0]) == 0.0
    assert g.hat(2, g.nodes[1] + g.h / 2) == pytest.approx(0.5)
    with pytest.raises(IndexError):
        g.hat(0, 0.3)
    with pytest.raises(IndexError):
        g.hat(5, 0.3)


def test_zero_extension_is_exact():
    g = make_grid(Domain(-1, 1), 17)
    rng = np.random.default_rng(0)
    u = GridFunction(g, rng.normal(size=g.n))
    assert u(-1.0) == 0.0 and u(1.0) == 0.0
    outside = np.concatenate((rng.uniform(-5, -1, 50), rng.uniform(1, 5, 50)))
    assert np.all(u(outside) == 0.0)
    np.testing.assert_array_equal(u(g.nodes), u.coeffs)


def test_grid_function_rejects_bad_shape():
    g = make_grid(Domain(), 5)
    with pytest.raises(ValueError):
        GridFunction(g, np.zeros(4))
    with pytest.raises(ValueError):
        GridFunction(g, [0, 0, np.nan, 0, 0])


def test_sine_mode_on_unit_interval():
    f = builtin_family("sine_mode", Domain(0, 1), k=1)
    x = np.linspace(0, 1, 11)
    np.testing.assert_allclose(f(x), np.sin(np.pi * x), atol=1e-15)
    with pytest.raises(ValueError):
        builtin_family("sine_mode", Domain(0, 1), k=0)


def test_bump_rejects_zero_width_and_unknown_names():
    with pytest.raises(ValueError):
        builtin_family("bump", Domain(), center=0.0, width=0.0)
    with pytest.raises(ValueError):
        builtin_family("gauss")
    with pytest.raises(ValueError):
        builtin_family("bump", Domain(), colour="red")


def test_default_bump_support_in_central_80_percent():
    dom = Domain(-1, 1)
    f = builtin_family("bump", dom)
    x = np.linspace(-1, 1, 2001)
    v = f(x)
    assert np.all(v[np.abs(x) >= 0.8] == 0.0)
    assert v[1000] == pytest.approx(1.0)


def test_plateau_vanishes_within_margin():
    dom = Domain(-1, 1)
    f = builtin_family("plateau", dom, margin=0.2)
    g = make_grid(dom, 200)
    near_edge = g.nodes[(g.nodes <= -1 + 0.4) | (g.nodes >= 1 - 0.4)]
    assert np.all(np.abs(f(near_edge)) < 1e-12)
    assert f(np.array([0.0]))[0] == pytest.approx(1.0)
    assert np.all(f(g.nodes) <= 1.0)


@pytest.mark.parametrize("name", ["bump", "plateau", "zero"])
def test_even_families_sample_symmetrically(name):
    g = make_grid(Domain(-1, 1), 41)
    u = sample(builtin_family(name, g.domain), g).coeffs
    np.testing.assert_allclose(u, u[::-1], atol=1e-14, rtol=0)


def test_csv_roundtrip_is_lossless(tmp_path):
    g = make_grid(Domain(0.1, 2.3), 9)
    rng = np.random.default_rng(1)
    u = GridFunction(g, rng.normal(size=g.n) * 1e-3)
    p = tmp_path / "u.csv"
    u.to_csv(p)
    assert p.read_text().splitlines()[0] == "x,u"
    back = read_csv(p, g)
    np.testing.assert_array_equal(back.coeffs, u.coeffs)
    rebuilt = read_csv(p)
    assert rebuilt.grid.n == g.n
    np.testing.assert_allclose(rebuilt.grid.nodes, g.nodes, rtol=0, atol=1e-14)


def test_csv_rejects_wrong_header_and_grid(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,b\n0,1\n")
    with pytest.raises(ValueError):
        read_csv(p)
    g = make_grid(Domain(0, 1), 5)
    sample(lambda x: x, g).to_csv(p)
    with pytest.raises(ValueError):
        read_csv(p, make_grid(Domain(0, 1), 6))


@settings(max_examples=100, deadline=None)
@given(st.floats(allow_nan=False, allow_infinity=False, width=64))
def test_format_float_roundtrips(v):
    assert float(format_float(v)) == v
