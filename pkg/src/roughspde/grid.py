"""Uniform space-time grids on (0, T] x (0, 1] and ladders of nested refinements.

Cells are half-open, (t_i, t_{i+1}] x (x_j, x_{j+1}], so every point of
(0, T] x (0, 1] belongs to exactly one cell; t = 0 and x = 0 are mapped to
cell index 0 by convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = ["Grid", "GridLadder", "SobolevIndex", "make_grid", "make_ladder"]

# locate() tolerance for points sitting on a cell edge up to rounding
_EDGE_RTOL = 1e-9


@dataclass(frozen=True)
class Grid:
    """Uniform grid with m time slabs of width k = T/m and n space cells of width h = 1/n."""

    T: float
    m: int
    n: int

    def __post_init__(self):
        if not (self.T > 0.0 and math.isfinite(self.T)):
            raise ValueError(f"T must be positive and finite, got {self.T}")
        if self.m < 1 or self.n < 1:
            raise ValueError(f"grid needs m >= 1, n >= 1, got m={self.m}, n={self.n}")

    @property
    def k(self) -> float:
        return self.T / self.m

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def cell_area(self) -> float:
        return self.k * self.h

    def time_edges(self) -> np.ndarray:
        """Edges t_0 = 0, ..., t_m = T."""
        return np.linspace(0.0, self.T, self.m + 1)

    def space_edges(self) -> np.ndarray:
        """Edges x_0 = 0, ..., x_n = 1."""
        return np.linspace(0.0, 1.0, self.n + 1)

    def locate_time(self, t):
        """Index i of the half-open slab (t_i, t_{i+1}] containing t; t = 0 maps to 0."""
        t = np.asarray(t, dtype=float)
        if np.any(t < -_EDGE_RTOL * self.T) or np.any(t > self.T * (1.0 + _EDGE_RTOL)):
            raise ValueError("time outside [0, T]")
        i = np.ceil(t * (self.m / self.T) - _EDGE_RTOL).astype(int) - 1
        return np.clip(i, 0, self.m - 1)[()]

    def locate_space(self, x):
        """Index j of the half-open cell (x_j, x_{j+1}] containing x; x = 0 maps to 0."""
        x = np.asarray(x, dtype=float)
        if np.any(x < -_EDGE_RTOL) or np.any(x > 1.0 + _EDGE_RTOL):
            raise ValueError("position outside [0, 1]")
        j = np.ceil(x * self.n - _EDGE_RTOL).astype(int) - 1
        return np.clip(j, 0, self.n - 1)[()]

    def locate(self, t, x):
        """(slab index, cell index) of the half-open cell containing (t, x)."""
        return self.locate_time(t), self.locate_space(x)

    def refines(self, coarse: "Grid") -> bool:
        """True if this grid nests into ``coarse``: same T, m and n integer multiples."""
        return (
            self.T == coarse.T
            and self.m % coarse.m == 0
            and self.n % coarse.n == 0
        )


def make_grid(T: float, m: int, n: int) -> Grid:
    return Grid(T=T, m=int(m), n=int(n))


@dataclass(frozen=True)
class GridLadder:
    """Coarse-to-fine sequence of nested grids sharing T, used by coupled studies."""

    grids: tuple[Grid, ...]
    coupling: str = "k=h^2"

    def __post_init__(self):
        if len(self.grids) < 2:
            raise ValueError("a ladder needs at least two grids")
        for coarse, fine in zip(self.grids, self.grids[1:]):
            if not fine.refines(coarse):
                raise ValueError(
                    f"grid (m={fine.m}, n={fine.n}) does not refine (m={coarse.m}, n={coarse.n})"
                )

    @property
    def finest(self) -> Grid:
        return self.grids[-1]

    @property
    def levels(self) -> int:
        return len(self.grids)

    def __iter__(self):
        return iter(self.grids)


def make_ladder(T: float, n_list, coupling: str = "k=h^2") -> GridLadder:
    """Build a nested ladder from space resolutions, coupling k to h.

    coupling "k=h^2" sets m = T n^2 (heat pairing), "k=h" sets m = T n (wave
    pairing); both must come out integral or the ladder is rejected.
    """
    if coupling not in ("k=h^2", "k=h"):
        raise ValueError(f"unknown coupling {coupling!r}")
    n_list = [int(n) for n in n_list]
    if any(b % a != 0 for a, b in zip(n_list, n_list[1:])):
        raise ValueError("space resolutions must be increasing and nested")
    grids = []
    for n in n_list:
        m_real = T * n * n if coupling == "k=h^2" else T * n
        m = round(m_real)
        if abs(m_real - m) > 1e-9 or m < 1:
            raise ValueError(
                f"coupling {coupling} with T={T}, n={n} gives non-integral slab count {m_real}"
            )
        grids.append(Grid(T=T, m=m, n=n))
    return GridLadder(grids=tuple(grids), coupling=coupling)


@dataclass(frozen=True)
class SobolevIndex:
    """Regularity index beta for the scale of Dirichlet Sobolev norms, beta in [-1, 1]."""

    beta: float = 0.0

    def __post_init__(self):
        if not -1.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must lie in [-1, 1], got {self.beta}")

    def weights(self, eigenvalues: np.ndarray) -> np.ndarray:
        """Per-mode weights lambda_alpha^beta for the squared norm."""
        return np.asarray(eigenvalues, dtype=float) ** self.beta
