"""Polar grid over the unit disk, grid functions, quadrature and norms.

The radial direction is cell-centred: ``r_j = (j + 1/2) / Nr``. No node sits
at the origin or on the boundary circle; the Dirichlet condition at ``r = 1``
is imposed through ghost values by the Poisson solver.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .exprlang import EvalError, Expr, evaluate


class GridMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class Grid:
    nr: int
    ntheta: int

    def __post_init__(self):
        if not (isinstance(self.nr, (int, np.integer)) and isinstance(self.ntheta, (int, np.integer))):
            raise TypeError("grid sizes must be integers")
        if self.nr < 4:
            raise ValueError(f"nr must be >= 4, got {self.nr}")
        if self.ntheta < 8 or self.ntheta % 2:
            raise ValueError(f"ntheta must be even and >= 8, got {self.ntheta}")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nr, self.ntheta)

    @property
    def hr(self) -> float:
        return 1.0 / self.nr

    @property
    def dtheta(self) -> float:
        return 2.0 * np.pi / self.ntheta

    @cached_property
    def r(self) -> np.ndarray:
        return (np.arange(self.nr) + 0.5) * self.hr

    @cached_property
    def theta(self) -> np.ndarray:
        return np.arange(self.ntheta) * self.dtheta

    @cached_property
    def rr(self) -> np.ndarray:
        return np.broadcast_to(self.r[:, None], self.shape)

    @cached_property
    def tt(self) -> np.ndarray:
        return np.broadcast_to(self.theta[None, :], self.shape)

    @cached_property
    def x1(self) -> np.ndarray:
        return self.r[:, None] * np.cos(self.theta)[None, :]

    @cached_property
    def x2(self) -> np.ndarray:
        return self.r[:, None] * np.sin(self.theta)[None, :]

    @cached_property
    def cell_area(self) -> np.ndarray:
        """Midpoint-rule weights ``r_j * hr * dtheta``, shape (nr, 1)."""
        return (self.r * self.hr * self.dtheta)[:, None]

    def refined(self, factor: int = 2) -> "Grid":
        return Grid(self.nr * factor, self.ntheta * factor)


class GridFunction:
    """Values on the nodes of a :class:`Grid`. The value array is read-only."""

    __slots__ = ("grid", "values")

    def __init__(self, grid: Grid, values):
        arr = np.array(values, dtype=float)
        if arr.ndim == 0:
            arr = np.full(grid.shape, float(arr))
        if arr.shape != grid.shape:
            raise GridMismatchError(f"values have shape {arr.shape}, grid expects {grid.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("grid function values must be finite")
        arr.flags.writeable = False
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", arr)

    def __setattr__(self, name, value):
        raise AttributeError("GridFunction is immutable")

    def __repr__(self):
        return f"GridFunction(grid={self.grid!r}, norm_inf={norm_inf(self):.6g})"

    @classmethod
    def zeros(cls, grid: Grid) -> "GridFunction":
        return cls(grid, np.zeros(grid.shape))

    def _other(self, other):
        if isinstance(other, GridFunction):
            if other.grid != self.grid:
                raise GridMismatchError(f"{self.grid} vs {other.grid}")
            return other.values
        return other

    def __add__(self, other):
        return GridFunction(self.grid, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return GridFunction(self.grid, self.values - self._other(other))

    def __rsub__(self, other):
        return GridFunction(self.grid, self._other(other) - self.values)

    def __mul__(self, other):
        return GridFunction(self.grid, self.values * self._other(other))

    __rmul__ = __mul__

    def __neg__(self):
        return GridFunction(self.grid, -self.values)

    def node(self, index: tuple[int, int]) -> tuple[float, float]:
        j, k = index
        return float(self.grid.x1[j, k]), float(self.grid.x2[j, k])

    def to_csv(self, path) -> None:
        write_csv(self, path)


def _require_same_grid(grid: Grid, gf: GridFunction | None, name: str) -> None:
    if gf is None:
        raise ValueError(f"expression references {name!r} but no {name} grid function was given")
    if gf.grid != grid:
        raise GridMismatchError(f"{name} lives on {gf.grid}, expected {grid}")


def sample(expr: Expr, grid: Grid, u: GridFunction | None = None, v: GridFunction | None = None) -> GridFunction:
    """Evaluate ``expr`` at every node with ``x1 = r cos(theta)``, ``x2 = r sin(theta)``."""
    names = expr.variables
    uu = vv = 0.0
    if "u" in names:
        _require_same_grid(grid, u, "u")
        uu = u.values
    if "v" in names:
        _require_same_grid(grid, v, "v")
        vv = v.values
    try:
        vals = evaluate(expr, grid.x1, grid.x2, uu, vv)
    except EvalError as exc:
        if exc.index is not None:
            j, k = exc.index
            where = f" at node (j={j}, k={k}), r={grid.r[j]:.6g}, theta={grid.theta[k]:.6g}"
            raise EvalError(f"{exc}{where}", exc.index) from None
        raise
    return GridFunction(grid, np.broadcast_to(vals, grid.shape))


def norm_inf(gf: GridFunction) -> float:
    """Discrete sup norm: largest absolute node value."""
    return float(np.max(np.abs(gf.values)))


def integrate(gf: GridFunction) -> float:
    """Midpoint rule over the disk."""
    return float(np.sum(gf.values * gf.grid.cell_area))


def greens_mass(x_norm: float, n: int = 2) -> float:
    """Integral of the Dirichlet Green's function of the unit ball in R^n
    against the constant 1, at a point of norm ``x_norm``.

    This is the solution of ``-Lap w = 1``, ``w = 0`` on the sphere, which is
    radial: ``w = (1 - |x|^2) / (2n)``.
    """
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise ValueError(f"dimension must be a positive integer, got {n!r}")
    if not 0.0 <= x_norm <= 1.0:
        raise ValueError(f"x_norm must lie in [0, 1], got {x_norm!r}")
    return (1.0 - x_norm * x_norm) / (2.0 * n)


def write_csv(gf: GridFunction, path) -> None:
    """Write ``x,y,value`` rows, radial index outer, angular inner."""
    g = gf.grid
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "y", "value"])
        for x, y, val in zip(g.x1.ravel(), g.x2.ravel(), gf.values.ravel()):
            w.writerow([f"{x:.17g}", f"{y:.17g}", f"{val:.17g}"])


def read_csv(path, grid: Grid) -> GridFunction:
    """Read a file written by :func:`write_csv` back onto ``grid``."""
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["x", "y", "value"]:
        raise ValueError(f"{path}: expected header 'x,y,value'")
    data = np.array([[float(c) for c in row] for row in rows[1:]], dtype=float)
    if data.shape != (grid.nr * grid.ntheta, 3):
        raise GridMismatchError(f"{path}: {len(rows) - 1} rows, grid {grid} needs {grid.nr * grid.ntheta}")
    if not (np.allclose(data[:, 0], grid.x1.ravel(), atol=1e-12)
            and np.allclose(data[:, 1], grid.x2.ravel(), atol=1e-12)):
        raise GridMismatchError(f"{path}: node coordinates do not match {grid}")
    return GridFunction(grid, data[:, 2].reshape(grid.shape))
