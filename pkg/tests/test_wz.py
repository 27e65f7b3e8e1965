import math

import numpy as np
import pytest
from scipy import integrate

from roughspde.grid import make_grid
from roughspde.noise import CellIncrements, sample_cell_increments
from roughspde.wz import (
    RegularizedNoise,
    fem_load,
    l2_norm_scaling_study,
    l2_norm_sq_closed_form,
    regularize,
    spectral_projection,
)


def _noise(grid, H=0.3, seed=5, sample_id=0):
    return regularize(sample_cell_increments(grid, H, seed, sample_id=sample_id))


def test_regularize_divides_by_cell_area():
    grid = make_grid(1.0, 4, 8)
    ci = sample_cell_increments(grid, 0.3, seed=2)
    xi = regularize(ci)
    assert np.array_equal(xi.values, ci.values / (grid.k * grid.h))
    assert xi.H == 0.3 and xi.grid == grid


def test_evaluate_piecewise_constant():
    grid = make_grid(1.0, 2, 2)
    xi = RegularizedNoise(grid=grid, H=0.3, values=np.array([[1.0, 2.0], [3.0, 4.0]]))
    # constant on the half-open cell
    assert xi.evaluate(0.1, 0.1) == xi.evaluate(0.49, 0.49) == 1.0
    assert xi.evaluate(0.5, 0.5) == 1.0  # right edges belong to the left cell
    assert xi.evaluate(0.51, 0.51) == 4.0
    assert xi.evaluate(1.0, 1.0) == 4.0
    with pytest.raises(ValueError):
        xi.evaluate(1.1, 0.5)


def test_regularized_shape_guard():
    grid = make_grid(1.0, 2, 2)
    with pytest.raises(ValueError):
        RegularizedNoise(grid=grid, H=0.3, values=np.ones((2, 3)))


# ---------------------------------------------------------------------------
# spectral projection


def test_spectral_projection_constant_field():
    """xi~ = c everywhere: (c, phi_alpha) = c sqrt(2) (1 - cos(alpha pi)) / (alpha pi)."""
    grid = make_grid(1.0, 3, 16)
    c = 1.7
    xi = RegularizedNoise(grid=grid, H=0.3, values=np.full((3, 16), c))
    alphas = np.arange(1, 7)
    proj = spectral_projection(xi, alphas)
    expected = c * math.sqrt(2) * (1 - np.cos(alphas * np.pi)) / (alphas * np.pi)
    assert proj.shape == (3, 6)
    for i in range(3):
        np.testing.assert_allclose(proj[i], expected, atol=1e-14)
    # even modes integrate to zero against a constant
    assert abs(proj[0, 1]) < 1e-16 and abs(proj[0, 3]) < 1e-16


def test_spectral_projection_matches_quadrature():
    grid = make_grid(1.0, 2, 8)
    xi = _noise(grid, H=0.25, seed=9)
    for alpha in (1, 2, 5):
        ref, _ = integrate.quad(
            lambda x: xi.evaluate(0.3, x) * math.sqrt(2) * math.sin(alpha * math.pi * x),
            0.0,
            1.0,
            points=grid.space_edges()[1:-1],
            limit=200,
        )
        assert spectral_projection(xi, [alpha], slab=0)[0] == pytest.approx(ref, abs=1e-8)


def test_spectral_projection_linear():
    grid = make_grid(1.0, 2, 4)
    a = _noise(grid, seed=1)
    b = _noise(grid, seed=2)
    combo = RegularizedNoise(grid=grid, H=0.3, values=2.0 * a.values - 3.0 * b.values)
    alphas = [1, 2, 3]
    np.testing.assert_allclose(
        spectral_projection(combo, alphas),
        2.0 * spectral_projection(a, alphas) - 3.0 * spectral_projection(b, alphas),
        atol=1e-13,
    )


def test_spectral_projection_single_slab():
    grid = make_grid(1.0, 3, 4)
    xi = _noise(grid)
    full = spectral_projection(xi, [1, 4])
    one = spectral_projection(xi, [1, 4], slab=1)
    assert one.shape == (2,)
    np.testing.assert_allclose(one, full[1], rtol=1e-14)


# ---------------------------------------------------------------------------
# FEM loads


def test_fem_load_constant_field():
    """xi~ = 1: each interior hat integrates to h, so every load is h."""
    grid = make_grid(1.0, 2, 8)
    xi = RegularizedNoise(grid=grid, H=0.3, values=np.ones((2, 8)))
    load = fem_load(xi)
    assert load.shape == (2, 7)
    np.testing.assert_allclose(load, grid.h, rtol=1e-15)


def test_fem_load_single_cell():
    """One nonzero cell contributes h/2 to each of its two endpoint nodes."""
    grid = make_grid(1.0, 1, 4)
    vals = np.zeros((1, 4))
    vals[0, 1] = 1.0  # cell (x_1, x_2)
    xi = RegularizedNoise(grid=grid, H=0.3, values=vals)
    load = fem_load(xi, slab=0)
    np.testing.assert_allclose(load, [grid.h / 2, grid.h / 2, 0.0])


def test_fem_load_zero():
    grid = make_grid(1.0, 2, 4)
    xi = RegularizedNoise(grid=grid, H=0.3, values=np.zeros((2, 4)))
    assert np.all(fem_load(xi) == 0.0)


def test_fem_load_matches_quadrature():
    grid = make_grid(1.0, 1, 8)
    xi = _noise(grid, seed=14)
    x_nodes = grid.space_edges()
    h = grid.h

    def hat(j, x):
        return max(0.0, 1.0 - abs(x - x_nodes[j]) / h)

    load = fem_load(xi, slab=0)
    for j in range(1, 8):
        ref, _ = integrate.quad(
            lambda x: xi.evaluate(0.5, x) * hat(j, x),
            0.0,
            1.0,
            points=x_nodes[1:-1],
            limit=200,
        )
        assert load[j - 1] == pytest.approx(ref, abs=1e-12)


# ---------------------------------------------------------------------------
# L^2 norms


def test_l2_norm_sq_per_slab():
    grid = make_grid(1.0, 2, 2)
    xi = RegularizedNoise(grid=grid, H=0.3, values=np.array([[1.0, 2.0], [3.0, 4.0]]))
    assert xi.l2_norm_sq(0) == pytest.approx(0.5 * (1 + 4))
    assert xi.l2_norm_sq(1) == pytest.approx(0.5 * (9 + 16))
    assert xi.l2_norm_sq() == xi.l2_norm_sq(1)


def test_l2_norm_closed_form_value():
    grid = make_grid(1.0, 4, 8)
    # h^{2H-2}/k with h = 1/8, k = 1/4
    assert l2_norm_sq_closed_form(grid, 0.25) == pytest.approx(8**1.5 * 4)
    assert l2_norm_sq_closed_form(grid, 0.5) == pytest.approx(8 * 4)


def test_l2_norm_closed_form_matches_expectation():
    """E||xi~(t)||^2 = h^{2H-2}/k, checked by Monte Carlo within 4 SE."""
    grid = make_grid(1.0, 2, 4)
    H = 0.3
    S = 4000
    vals = np.empty(S)
    for s in range(S):
        xi = _noise(grid, H=H, seed=21, sample_id=s)
        vals[s] = xi.l2_norm_sq(0)
    se = vals.std(ddof=1) / math.sqrt(S)
    assert abs(vals.mean() - l2_norm_sq_closed_form(grid, H)) < 4 * se


def test_parseval_consistency():
    """Sine coefficients almost exhaust the L^2 norm once N ~ 64 n."""
    grid = make_grid(1.0, 1, 8)
    xi = _noise(grid, H=0.25, seed=3)
    coeffs = spectral_projection(xi, np.arange(1, 64 * 8 + 1), slab=0)
    assert np.sum(coeffs**2) == pytest.approx(xi.l2_norm_sq(0), rel=0.01)


def test_scaling_study_rows():
    grids = [make_grid(1.0, 4, 4), make_grid(1.0, 4, 8)]
    rows = l2_norm_scaling_study(0.3, grids, n_samples=50, seed=7)
    assert len(rows) == 2
    for row, grid in zip(rows, grids):
        assert row["h"] == grid.h and row["k"] == grid.k
        assert row["closed_form"] == pytest.approx(l2_norm_sq_closed_form(grid, 0.3))
        assert abs(row["measured"] - row["closed_form"]) < 4 * row["se"]
