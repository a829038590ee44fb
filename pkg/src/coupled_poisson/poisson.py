"""Finite-difference Dirichlet Laplacian on the unit disk in polar coordinates.

The operator is the conservative five-point form of

    -(1/r) d/dr (r dw/dr) - (1/r^2) d^2w/dtheta^2

on the cell-centred grid of :mod:`coupled_poisson.disk`. The boundary
``r = 1`` lies halfway between the last ring and a ghost ring, and the ghost
value is the odd reflection ``w_ghost = -w_last``. Across the origin the
node ``(0, k)`` is paired with its antipode ``(0, k + Ntheta/2)``; in the
conservative form that link carries the face radius ``r_{-1/2} = 0`` so its
weight vanishes and ring 0 is closed off at the centre.

Solving ``-Lap_h w = h`` realises ``w(x) = int k(x, y) h(y) dy`` with the
Dirichlet Green's function ``k`` without ever forming the kernel.
"""
from __future__ import annotations

import logging
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .disk import Grid, GridFunction, GridMismatchError

log = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-12


class MMatrixError(AssertionError):
    """Assembled matrix lost the M-matrix sign/dominance structure."""


class SolverBreakdown(RuntimeError):
    def __init__(self, message: str, residual: float):
        self.residual = residual
        super().__init__(f"{message} (relative residual {residual:.3e})")


def _index(grid: Grid, j, k):
    return np.asarray(j) * grid.ntheta + np.asarray(k) % grid.ntheta


def check_m_matrix(A: sp.spmatrix) -> None:
    """Raise :class:`MMatrixError` unless ``A`` has positive diagonal,
    nonpositive off-diagonal entries, nonnegative row sums and at least one
    strictly dominant row."""
    A = sp.csr_matrix(A)
    d = A.diagonal()
    if np.any(d <= 0):
        raise MMatrixError("nonpositive diagonal entry")
    off = A - sp.diags(d)
    if off.nnz and off.data.max() > 0:
        raise MMatrixError("positive off-diagonal entry")
    rs = np.asarray(A.sum(axis=1)).ravel()
    scale = np.abs(d)
    if np.any(rs < -1e-12 * scale):
        raise MMatrixError("row not weakly diagonally dominant")
    if not np.any(rs > 1e-12 * scale):
        raise MMatrixError("no strictly dominant row")


class LaplaceOperator:
    """Assembled ``-Lap_h`` for a grid. Immutable once built; the sparse LU
    factorisation of the symmetrically scaled system is cached."""

    def __init__(self, grid: Grid):
        self.grid = grid
        self.matrix = _assemble_matrix(grid)
        check_m_matrix(self.matrix)
        # W = diag(cell area) makes W @ A symmetric
        self.weights = np.repeat(grid.cell_area.ravel(), grid.ntheta)
        self.scaled = (sp.diags(self.weights) @ self.matrix).tocsc()
        self._lu = spla.splu(self.scaled)
        self._norm = spla.norm(self.matrix, np.inf)

    @property
    def size(self) -> int:
        return self.grid.nr * self.grid.ntheta

    def apply(self, w: GridFunction) -> GridFunction:
        self._check_grid(w)
        return GridFunction(self.grid, (self.matrix @ w.values.ravel()).reshape(self.grid.shape))

    def _check_grid(self, gf: GridFunction) -> None:
        if gf.grid != self.grid:
            raise GridMismatchError(f"grid function on {gf.grid}, operator on {self.grid}")

    def relative_residual(self, w: np.ndarray, rhs: np.ndarray) -> float:
        """Normwise backward error ``|A w - h| / (|A| |w| + |h|)`` in the max norm."""
        r = self.matrix @ w - rhs
        denom = self._norm * np.max(np.abs(w)) + np.max(np.abs(rhs))
        if denom == 0.0:
            return 0.0
        return float(np.max(np.abs(r)) / denom)

    def solve(self, rhs: GridFunction) -> GridFunction:
        return solve_poisson(self, rhs)

    def dump_coo(self, path) -> None:
        """Write the matrix as ``row col value`` lines."""
        coo = self.matrix.tocoo()
        with open(path, "w") as fh:
            for i, j, a in zip(coo.row, coo.col, coo.data):
                fh.write(f"{i} {j} {a:.17g}\n")


def _assemble_matrix(grid: Grid) -> sp.csr_matrix:
    nr, nt = grid.shape
    h = grid.hr
    dth = grid.dtheta
    r = grid.r
    r_out = r + 0.5 * h
    r_in = r - 0.5 * h  # r_in[0] == 0

    a_out = r_out / (r * h * h)
    a_in = r_in / (r * h * h)
    a_th = 1.0 / (r * r * dth * dth)

    jj, kk = np.meshgrid(np.arange(nr), np.arange(nt), indexing="ij")
    jj = jj.ravel()
    kk = kk.ravel()
    me = _index(grid, jj, kk)

    rows, cols, vals = [], [], []

    def add(i, c, a):
        rows.append(i)
        cols.append(c)
        vals.append(a)

    diag = a_out[jj] + a_in[jj] + 2.0 * a_th[jj]

    inner = jj < nr - 1
    add(me[inner], _index(grid, jj[inner] + 1, kk[inner]), -a_out[jj[inner]])
    # ghost at r = 1 + h/2 with w_ghost = -w
    outer = ~inner
    diag = diag + np.where(outer, a_out[jj], 0.0)

    mid = jj > 0
    add(me[mid], _index(grid, jj[mid] - 1, kk[mid]), -a_in[jj[mid]])
    centre = ~mid
    add(me[centre], _index(grid, 0, kk[centre] + nt // 2), -a_in[0] * np.ones(centre.sum()))

    add(me, _index(grid, jj, kk + 1), -a_th[jj])
    add(me, _index(grid, jj, kk - 1), -a_th[jj])
    add(me, me, diag)

    A = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(nr * nt, nr * nt),
    ).tocsr()
    A.eliminate_zeros()
    return A


def assemble(grid: Grid) -> LaplaceOperator:
    """Assemble the operator; raises :class:`MMatrixError` if the structural
    check fails."""
    return LaplaceOperator(grid)


@lru_cache(maxsize=16)
def cached_operator(grid: Grid) -> LaplaceOperator:
    return assemble(grid)


def solve_poisson(op: LaplaceOperator, rhs: GridFunction) -> GridFunction:
    """Solve ``-Lap_h w = rhs`` with ``w = 0`` on the unit circle."""
    op._check_grid(rhs)
    b = rhs.values.ravel()
    if not np.any(b):
        return GridFunction.zeros(op.grid)
    w = op._lu.solve(op.weights * b)
    res = op.relative_residual(w, b)
    if res > RESIDUAL_TOL:
        # one step of iterative refinement before giving up
        w = w + op._lu.solve(op.weights * (b - op.matrix @ w))
        res = op.relative_residual(w, b)
    if not np.all(np.isfinite(w)) or res > RESIDUAL_TOL:
        raise SolverBreakdown("sparse LU solve did not reach the residual target", res)
    return GridFunction(op.grid, w.reshape(op.grid.shape))


def greens_apply(grid: Grid, h: GridFunction) -> GridFunction:
    """``x -> int k(x, y) h(y) dy`` evaluated by a Poisson solve."""
    return solve_poisson(cached_operator(grid), h)
