import numpy as np
import pytest

from roughspde.grid import Grid, GridLadder, SobolevIndex, make_grid, make_ladder


def test_widths():
    g = make_grid(1.0, 4, 2)
    assert g.k == 0.25
    assert g.h == 0.5
    assert g.cell_area == 0.125


def test_single_cell_grid():
    g = make_grid(1.0, 1, 1)
    assert g.locate(0.7, 0.3) == (0, 0)
    assert g.locate(1.0, 1.0) == (0, 0)


def test_edges():
    g = make_grid(2.0, 4, 5)
    assert np.allclose(g.time_edges(), [0.0, 0.5, 1.0, 1.5, 2.0])
    assert len(g.space_edges()) == 6
    assert g.space_edges()[0] == 0.0 and g.space_edges()[-1] == 1.0


def test_locate_half_open_convention():
    """Cells are (t_i, t_{i+1}]: a point on an interior edge belongs to the cell below."""
    g = make_grid(1.0, 4, 4)
    assert g.locate_time(0.25) == 0
    assert g.locate_time(0.25 + 1e-6) == 1
    assert g.locate_time(0.0) == 0  # t = 0 assigned to the first slab
    assert g.locate_space(0.5) == 1
    assert g.locate_space(1.0) == 3


def test_locate_inverts_midpoints():
    g = make_grid(0.5, 8, 16)
    tm = 0.5 * (g.time_edges()[:-1] + g.time_edges()[1:])
    xm = 0.5 * (g.space_edges()[:-1] + g.space_edges()[1:])
    assert np.array_equal(g.locate_time(tm), np.arange(8))
    assert np.array_equal(g.locate_space(xm), np.arange(16))


def test_locate_out_of_range():
    g = make_grid(1.0, 2, 2)
    with pytest.raises(ValueError):
        g.locate_time(1.5)
    with pytest.raises(ValueError):
        g.locate_space(-0.2)


def test_bad_grid_args():
    with pytest.raises(ValueError):
        Grid(T=-1.0, m=2, n=2)
    with pytest.raises(ValueError):
        Grid(T=1.0, m=0, n=2)
    with pytest.raises(ValueError):
        Grid(T=float("inf"), m=2, n=2)


def test_refines():
    coarse = make_grid(1.0, 4, 8)
    fine = make_grid(1.0, 8, 16)
    assert fine.refines(coarse)
    assert not coarse.refines(fine)
    assert not make_grid(2.0, 8, 16).refines(coarse)  # different horizon


def test_ladder_parabolic_coupling():
    lad = make_ladder(1.0, [8, 16, 32], coupling="k=h^2")
    assert [g.m for g in lad] == [64, 256, 1024]
    assert lad.finest.n == 32
    assert lad.levels == 3


def test_ladder_hyperbolic_coupling():
    lad = make_ladder(1.0, [8, 16], coupling="k=h")
    assert [g.m for g in lad] == [8, 16]


def test_ladder_rejects_non_nested():
    with pytest.raises(ValueError):
        make_ladder(1.0, [8, 12], coupling="k=h^2")


def test_ladder_rejects_fractional_slab_count():
    with pytest.raises(ValueError):
        make_ladder(0.3, [8, 16], coupling="k=h")


def test_ladder_rejects_unknown_coupling():
    with pytest.raises(ValueError):
        make_ladder(1.0, [8, 16], coupling="k=sqrt(h)")


def test_ladder_needs_two_grids():
    with pytest.raises(ValueError):
        GridLadder(grids=(make_grid(1.0, 2, 2),))


def test_coarse_cells_tile_fine_cells():
    """Every coarse cell is exactly the union of a contiguous block of fine cells."""
    coarse, fine = make_ladder(1.0, [4, 16], coupling="k=h").grids
    rn = fine.n // coarse.n
    ce = coarse.space_edges()
    fe = fine.space_edges()
    for j in range(coarse.n):
        assert fe[j * rn] == ce[j]
        assert fe[(j + 1) * rn] == ce[j + 1]


def test_sobolev_index():
    w = SobolevIndex(beta=1.0).weights(np.array([np.pi**2, 4 * np.pi**2]))
    assert np.allclose(w, [np.pi**2, 4 * np.pi**2])
    assert np.allclose(SobolevIndex(beta=0.0).weights(np.array([2.0, 3.0])), 1.0)
    with pytest.raises(ValueError):
        SobolevIndex(beta=1.5)
