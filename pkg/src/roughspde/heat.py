"""Stochastic heat equation du = (u_xx + b(u)) dt + dxi~ on (0, 1), Dirichlet.

Two discretizations of the regularized equation:

* spectral Galerkin with per-mode exact slab propagation (exact in time for
  zero drift, exponential-Euler substeps otherwise);
* P1 finite elements in space with semi-implicit Euler substeps in time
  (implicit stiffness, explicit mass-lumped drift), noise loads exact.

Both consume the same RegularizedNoise, which is what the coupled FEM
convergence study relies on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.fft import dst
from scipy.linalg import cho_solve_banded, cholesky_banded

from . import kernels
from .basis import eigenfunction_cell_integral, eigenvalue
from .grid import Grid
from .problem import DriftSpec, InitialData
from .wz import RegularizedNoise, fem_load, spectral_projection

__all__ = [
    "SpectralHeatState",
    "FemHeatState",
    "solve_she_spectral",
    "solve_she_fem",
    "fem_matrices",
    "fem_projection",
    "l2_error",
    "save_spectral_trajectory",
    "save_fem_trajectory",
]


@dataclass(frozen=True, eq=False)
class SpectralHeatState:
    """Solution snapshot as sine coefficients for modes 1..N."""

    t: float
    coeffs: np.ndarray

    @property
    def n_modes(self) -> int:
        return len(self.coeffs)

    def evaluate(self, x):
        a = np.arange(1, self.n_modes + 1, dtype=float)
        return math.sqrt(2.0) * np.sin(np.multiply.outer(np.asarray(x, float), a * np.pi)) @ self.coeffs

    def l2_norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def sobolev_norm(self, beta: float) -> float:
        lam = eigenvalue(np.arange(1, self.n_modes + 1))
        return float(np.sqrt(np.sum(lam**beta * self.coeffs**2)))


@dataclass(frozen=True, eq=False)
class FemHeatState:
    """Solution snapshot as interior nodal values of the P1 function (zero at 0 and 1)."""

    t: float
    nodal: np.ndarray
    h: float

    @property
    def n_cells(self) -> int:
        return len(self.nodal) + 1

    def evaluate(self, x):
        edges = np.linspace(0.0, 1.0, self.n_cells + 1)
        vals = np.concatenate([[0.0], self.nodal, [0.0]])
        return np.interp(np.asarray(x, dtype=float), edges, vals)


def _guard_finite(u: np.ndarray) -> None:
    """Blow-up guard: a non-finite state means the drift stepping diverged."""
    if not np.all(np.isfinite(u)):
        raise FloatingPointError("solution became non-finite (blow-up)")


# ---------------------------------------------------------------------------
# drift projections


def _unit_coeffs(n_modes: int) -> np.ndarray:
    """(1, phi_alpha) for alpha = 1..N (the constant function's sine coefficients)."""
    a = np.arange(1, n_modes + 1)
    return eigenfunction_cell_integral(a, 0.0, 1.0)


class _ModalDrift:
    """Projects b(u_N) onto the first N modes.

    Affine drifts are exact (diagonal + constant); registry drifts evaluate
    the field on an 8x-oversampled midpoint grid and project with a DST-II,
    which is the exact quadrature-projection pair for that grid.
    """

    def __init__(self, drift: DriftSpec, n_modes: int):
        self.drift = drift
        self.n_modes = n_modes
        if drift.kind == "affine":
            self.unit = _unit_coeffs(n_modes)
        elif drift.kind == "registry":
            self.P = 8 * n_modes
        self._synth = None

    def __call__(self, coeffs: np.ndarray) -> np.ndarray:
        if self.drift.kind == "affine":
            return self.drift.a * coeffs + self.drift.c * self.unit
        # synthesize field at midpoints x_q = (q + 1/2)/P via DST-III
        pad = np.zeros(self.P)
        pad[: self.n_modes] = coeffs
        field = dst(pad, type=3) / math.sqrt(2.0)
        g = self.drift(field)
        # (g, phi_alpha) ~ (1/P) sum_q g(x_q) phi_alpha(x_q) = sqrt(2)/(2P) DST2(g)
        return math.sqrt(2.0) / (2.0 * self.P) * dst(g, type=2)[: self.n_modes]


# ---------------------------------------------------------------------------
# spectral solver


def _heat_factors(lam: np.ndarray, dt: float):
    decay = np.exp(-lam * dt)
    gain = (1.0 - decay) / lam
    return decay, gain


def solve_she_spectral(
    noise: RegularizedNoise | None,
    u0: InitialData | np.ndarray,
    drift: DriftSpec,
    n_modes: int,
    grid: Grid | None = None,
    substeps: int = 8,
    store: str = "final",
):
    """March the N-mode Galerkin system over the grid's time slabs.

    Per slab the noise projection is constant, so the zero-drift update
    u <- e^{-lam k} u + xi_hat (1 - e^{-lam k})/lam is exact in time and
    substeps are irrelevant; with drift, `substeps` exponential-Euler substeps
    refresh b(u) inside each slab. Returns the final SpectralHeatState, or the
    list of states at slab edges when store="all".
    """
    if noise is None and grid is None:
        raise ValueError("need a grid when running without noise")
    grid = grid or noise.grid
    if store not in ("final", "all"):
        raise ValueError("store must be 'final' or 'all'")
    if n_modes < 1:
        raise ValueError("n_modes must be >= 1")
    lam = eigenvalue(np.arange(1, n_modes + 1))
    u = (
        np.array(u0[:n_modes], dtype=float)
        if isinstance(u0, np.ndarray)
        else u0.coefficients(n_modes)
    )
    if isinstance(u0, np.ndarray) and len(u0) < n_modes:
        u = np.concatenate([u, np.zeros(n_modes - len(u0))])
    if not np.all(np.isfinite(u)):
        raise ValueError("initial coefficients must be finite")
    forcing = (
        spectral_projection(noise, np.arange(1, n_modes + 1))
        if noise is not None
        else np.zeros((grid.m, n_modes))
    )
    k = grid.k
    if drift.is_zero and store == "final":
        decay, gain = _heat_factors(lam, k)
        u = kernels.heat_chain(u, decay, gain, np.ascontiguousarray(forcing))
        _guard_finite(u)
        return SpectralHeatState(t=grid.T, coeffs=u)

    states = [SpectralHeatState(t=0.0, coeffs=u.copy())]
    if drift.is_zero:
        decay, gain = _heat_factors(lam, k)
        for i in range(grid.m):
            u = decay * u + forcing[i] * gain
            states.append(SpectralHeatState(t=(i + 1) * k, coeffs=u.copy()))
        _guard_finite(u)
        return states

    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    delta = k / substeps
    decay, gain = _heat_factors(lam, delta)
    bhat = _ModalDrift(drift, n_modes)
    for i in range(grid.m):
        for _ in range(substeps):
            u = decay * u + (forcing[i] + bhat(u)) * gain
        if store == "all":
            states.append(SpectralHeatState(t=(i + 1) * k, coeffs=u.copy()))
    _guard_finite(u)
    if store == "all":
        return states
    return SpectralHeatState(t=grid.T, coeffs=u)


# ---------------------------------------------------------------------------
# FEM solver


def fem_matrices(n: int):
    """Main/off diagonals of the P1 mass and stiffness matrices on interior nodes.

    M = (h/6) tridiag(1, 4, 1), A = (1/h) tridiag(-1, 2, -1), both of size n-1.
    """
    if n < 2:
        raise ValueError("FEM mesh needs n >= 2 cells")
    h = 1.0 / n
    nn = n - 1
    return (
        np.full(nn, 4.0 * h / 6.0),
        np.full(max(nn - 1, 0), h / 6.0),
        np.full(nn, 2.0 / h),
        np.full(max(nn - 1, 0), -1.0 / h),
    )


def _mass_solve(mass_main, mass_off, rhs):
    nn = len(mass_main)
    ab = np.zeros((2, nn))
    ab[0, 1:] = mass_off
    ab[1, :] = mass_main
    return cho_solve_banded((cholesky_banded(ab), False), rhs)


def fem_projection(u0: InitialData, n: int, quad_order: int = 5) -> np.ndarray:
    """Nodal values of the L^2 projection P_h u0: solve M u = (u0, hat_j).

    The load integrals use composite Gauss-Legendre of the given order per cell.
    """
    if u0.is_zero:
        return np.zeros(n - 1)
    h = 1.0 / n
    nodes, wts = np.polynomial.legendre.leggauss(quad_order)
    edges = np.linspace(0.0, 1.0, n + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])
    x = (mid[:, None] + 0.5 * h * nodes[None, :]).ravel()  # (n*q,)
    w = np.tile(0.5 * h * wts, n)
    vals = u0(x) * w
    # hat_j rises on cell j-1 and falls on cell j
    frac = (x - np.repeat(edges[:-1], quad_order)) / h  # position within own cell
    cell = np.repeat(np.arange(n), quad_order)
    load = np.zeros(n - 1)
    np.add.at(load, cell[cell < n - 1], (vals * frac)[cell < n - 1])
    np.add.at(load, cell[cell > 0] - 1, (vals * (1.0 - frac))[cell > 0])
    mass_main, mass_off, _, _ = fem_matrices(n)
    return _mass_solve(mass_main, mass_off, load)


def solve_she_fem(
    noise: RegularizedNoise | None,
    u0: InitialData | np.ndarray,
    drift: DriftSpec,
    grid: Grid | None = None,
    substeps: int = 4,
    store: str = "final",
):
    """Semi-implicit Euler over the grid's slabs on the P1 mesh matching the noise grid.

    Each slab takes `substeps` solves of (M + delta A) u+ = M u + delta (F_i + h b(u)),
    delta = k/substeps, with the noise load F_i exact and constant per slab and
    the drift mass-lumped. An ndarray u0 is taken as interior nodal values
    directly; an InitialData is L^2-projected onto the mesh.
    """
    if noise is None and grid is None:
        raise ValueError("need a grid when running without noise")
    grid = grid or noise.grid
    if store not in ("final", "all"):
        raise ValueError("store must be 'final' or 'all'")
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    n = grid.n
    mass_main, mass_off, stiff_main, stiff_off = fem_matrices(n)
    delta = grid.k / substeps
    stepper = kernels.FemStepper(
        mass_main,
        mass_off,
        mass_main + delta * stiff_main,
        mass_off + delta * stiff_off,
        delta,
    )
    u = (
        np.array(u0, dtype=float)
        if isinstance(u0, np.ndarray)
        else fem_projection(u0, n)
    )
    if u.shape != (n - 1,):
        raise ValueError(f"nodal data must have shape ({n - 1},), got {u.shape}")
    if not np.all(np.isfinite(u)):
        raise ValueError("initial nodal values must be finite")
    loads = fem_load(noise) if noise is not None else np.zeros((grid.m, n - 1))
    h = grid.h
    if drift.is_zero and store == "final":
        u = stepper.chain(u, np.ascontiguousarray(loads), substeps)
        _guard_finite(u)
        return FemHeatState(t=grid.T, nodal=u, h=h)
    states = [FemHeatState(t=0.0, nodal=u.copy(), h=h)]
    for i in range(grid.m):
        for _ in range(substeps):
            load = loads[i] if drift.is_zero else loads[i] + h * drift(u)
            u = stepper.step(u, load)
        if store == "all":
            states.append(FemHeatState(t=(i + 1) * grid.k, nodal=u.copy(), h=h))
    _guard_finite(u)
    if store == "all":
        return states
    return FemHeatState(t=grid.T, nodal=u, h=h)


def l2_error(spectral: SpectralHeatState, fem: FemHeatState, quad_order: int = 5) -> float:
    """L^2(0,1) distance between the two fields by composite Gauss-Legendre.

    Quadrature is per FEM mesh cell (the integrand's kinks sit on mesh nodes),
    order >= 5 so the piecewise-linear factor is integrated exactly and the
    spectral factor to high order.
    """
    if quad_order < 5:
        raise ValueError("quad_order must be >= 5")
    n = fem.n_cells
    h = fem.h
    nodes, wts = np.polynomial.legendre.leggauss(quad_order)
    edges = np.linspace(0.0, 1.0, n + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])
    x = (mid[:, None] + 0.5 * h * nodes[None, :]).ravel()
    w = np.tile(0.5 * h * wts, n)
    diff = spectral.evaluate(x) - fem.evaluate(x)
    return float(math.sqrt(np.sum(w * diff * diff)))


def save_spectral_trajectory(states, path) -> None:
    """CSV dump of a spectral trajectory: header t,c1..cN then one row per state."""
    n_modes = states[0].n_modes
    with open(path, "w", newline="\n") as fh:
        fh.write("t," + ",".join(f"c{a}" for a in range(1, n_modes + 1)) + "\n")
        for s in states:
            fh.write(f"{s.t:.17g}," + ",".join(f"{v:.17g}" for v in s.coeffs) + "\n")


def save_fem_trajectory(states, path) -> None:
    """CSV dump of a FEM trajectory: header t,u1..u{n-1} then one row per state."""
    nn = len(states[0].nodal)
    with open(path, "w", newline="\n") as fh:
        fh.write("t," + ",".join(f"u{j}" for j in range(1, nn + 1)) + "\n")
        for s in states:
            fh.write(f"{s.t:.17g}," + ",".join(f"{v:.17g}" for v in s.nodal) + "\n")
