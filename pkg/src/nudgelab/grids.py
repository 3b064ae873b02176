"""Uniform periodic grids and the fields that live on them."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np


@dataclass(frozen=True)
class Grid1D:
    """Uniform periodic grid on [0, length) with nodes x_i = i * dx.

    The right endpoint is not duplicated: node n would coincide with node 0.
    """

    n: int
    length: float

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"grid needs at least one node, got n={self.n}")
        if not self.length > 0:
            raise ValueError(f"domain length must be positive, got {self.length}")

    @property
    def dx(self) -> float:
        return self.length / self.n

    @property
    def shape(self) -> tuple:
        return (self.n,)

    @property
    def ndim(self) -> int:
        return 1

    @property
    def cell_volume(self) -> float:
        return self.dx

    def nodes(self) -> np.ndarray:
        return np.arange(self.n) * self.dx


@dataclass(frozen=True)
class Grid2D:
    """Tensor product of two periodic 1D grids; node (i, j) sits at (i*dx, j*dy)."""

    nx: int
    ny: int
    lx: float
    ly: float

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise ValueError(f"grid needs positive node counts, got {self.nx}x{self.ny}")
        if not (self.lx > 0 and self.ly > 0):
            raise ValueError(f"domain lengths must be positive, got {self.lx}, {self.ly}")

    @property
    def dx(self) -> float:
        return self.lx / self.nx

    @property
    def dy(self) -> float:
        return self.ly / self.ny

    @property
    def shape(self) -> tuple:
        return (self.nx, self.ny)

    @property
    def ndim(self) -> int:
        return 2

    @property
    def cell_volume(self) -> float:
        return self.dx * self.dy

    def nodes(self) -> tuple:
        """Coordinate arrays X, Y of shape (nx, ny)."""
        x = np.arange(self.nx) * self.dx
        y = np.arange(self.ny) * self.dy
        return np.meshgrid(x, y, indexing="ij")


Grid = Union[Grid1D, Grid2D]


@dataclass(frozen=True, eq=False)
class Field:
    """Real-valued state sampled on a grid.

    Construction rejects non-finite entries, so a NaN or Inf coming out of a
    solver surfaces immediately instead of propagating.
    """

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if values.shape != self.grid.shape:
            raise ValueError(
                f"field shape {values.shape} does not match grid shape {self.grid.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("field contains non-finite values")

    @classmethod
    def zeros(cls, grid: Grid) -> "Field":
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def from_function(cls, grid: Grid, fn) -> "Field":
        """Sample fn on the grid nodes; fn takes x (1D) or X, Y (2D)."""
        if grid.ndim == 1:
            return cls(grid, np.asarray(fn(grid.nodes()), dtype=float))
        X, Y = grid.nodes()
        return cls(grid, np.asarray(fn(X, Y), dtype=float))
