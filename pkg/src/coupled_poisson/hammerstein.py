"""The fixed-point operator for the coupled system and its Picard iteration.

For ``-Lap u = f(x, u, v)``, ``-Lap v = g(x, u, v)`` with zero Dirichlet data
the operator is ``T(u, v) = (G f(., u, v), G g(., u, v))`` where ``G`` is the
Green's operator of the disk (a Poisson solve). Iterating
``(u_n, v_n) = T(u_{n-1}, v_{n-1})`` is the Picard scheme.
"""
from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .disk import Grid, GridFunction, GridMismatchError, norm_inf, sample
from .exprlang import VARIABLES, Expr, parse
from .poisson import greens_apply

log = logging.getLogger(__name__)

NEG_TOL = 1e-10
_FLOOR = 1e-300


@dataclass(frozen=True)
class ProblemSpec:
    f: Expr
    g: Expr
    nr: int = 64
    ntheta: int = 128

    def __post_init__(self):
        for name in ("f", "g"):
            extra = getattr(self, name).variables - VARIABLES
            if extra:
                raise ValueError(f"{name} references unknown variables {sorted(extra)}")

    @classmethod
    def from_strings(cls, f: str, g: str, nr: int = 64, ntheta: int = 128) -> "ProblemSpec":
        return cls(parse(f), parse(g), nr, ntheta)

    @property
    def grid(self) -> Grid:
        return Grid(self.nr, self.ntheta)


@dataclass(frozen=True)
class SolutionPair:
    u: GridFunction
    v: GridFunction
    residual: float
    iterations: int
    converged: bool

    @property
    def norms(self) -> tuple[float, float]:
        return norm_inf(self.u), norm_inf(self.v)


@dataclass
class TraceRow:
    n: int
    norm_u: float
    norm_v: float
    relchange_u: float
    relchange_v: float
    seconds: float


@dataclass
class IterationTrace:
    rows: list[TraceRow] = field(default_factory=list)

    def __len__(self):
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    def __getitem__(self, i):
        return self.rows[i]

    HEADER = ("n", "norm_u", "norm_v", "relchange_u", "relchange_v", "seconds")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.HEADER)
            for row in self.rows:
                w.writerow([row.n] + [f"{getattr(row, k):.17g}" for k in self.HEADER[1:]])


def _clamp_u(u: GridFunction) -> GridFunction:
    lo = float(u.values.min())
    if lo >= 0.0:
        return u
    if lo < -NEG_TOL:
        log.warning("u has negative values down to %.3e (beyond round-off); clamping to 0", lo)
    else:
        log.debug("clamping round-off negatives in u (min %.3e)", lo)
    return GridFunction(u.grid, np.maximum(u.values, 0.0))


def apply_T(spec: ProblemSpec, u: GridFunction, v: GridFunction) -> tuple[GridFunction, GridFunction]:
    """One application of the Hammerstein operator.

    ``u`` is clamped at zero before evaluating the nonlinearities since they
    are only defined for nonnegative ``u``.
    """
    grid = spec.grid
    for name, w in (("u", u), ("v", v)):
        if w.grid != grid:
            raise GridMismatchError(f"{name} lives on {w.grid}, problem grid is {grid}")
    u = _clamp_u(u)
    t1 = greens_apply(grid, sample(spec.f, grid, u, v))
    t2 = greens_apply(grid, sample(spec.g, grid, u, v))
    return t1, t2


def _relchange(new: GridFunction, old: GridFunction) -> float:
    return norm_inf(new - old) / max(norm_inf(new), _FLOOR)


def picard_solve(
    spec: ProblemSpec,
    u0: GridFunction | None = None,
    v0: GridFunction | None = None,
    tol: float = 1e-10,
    max_iter: int = 100,
) -> tuple[SolutionPair, IterationTrace]:
    """Iterate ``(u_n, v_n) = T(u_{n-1}, v_{n-1})`` until the largest
    relative sup-norm change of the two components drops to ``tol``.

    Non-convergence is not an exception: the returned pair carries
    ``converged=False`` and the trace has ``max_iter`` rows.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    grid = spec.grid
    u = u0 if u0 is not None else GridFunction.zeros(grid)
    v = v0 if v0 is not None else GridFunction.zeros(grid)
    if u.values.min() < 0:
        raise ValueError("initial u must be nonnegative")

    trace = IterationTrace()
    change = np.inf
    converged = False
    t0 = time.perf_counter()
    for n in range(1, max_iter + 1):
        u_new, v_new = apply_T(spec, u, v)
        cu, cv = _relchange(u_new, u), _relchange(v_new, v)
        change = max(cu, cv)
        trace.rows.append(TraceRow(n, norm_inf(u_new), norm_inf(v_new), cu, cv, time.perf_counter() - t0))
        log.debug("picard n=%d |u|=%.6g |v|=%.6g change=%.3e", n, trace[-1].norm_u, trace[-1].norm_v, change)
        u, v = u_new, v_new
        if change <= tol:
            converged = True
            break
    if not converged:
        log.warning("Picard iteration did not converge in %d iterations (last change %.3e)", max_iter, change)
    return SolutionPair(u, v, float(change), len(trace), converged), trace


def fixed_point_residual(spec: ProblemSpec, sol: SolutionPair) -> float:
    """``max(|u - T1(u,v)|, |v - T2(u,v)|)`` in the discrete sup norm."""
    t1, t2 = apply_T(spec, sol.u, sol.v)
    return max(norm_inf(sol.u - t1), norm_inf(sol.v - t2))


# ------------------------------------------------------------ invariance


@dataclass
class InvarianceReport:
    R1: float
    R2: float
    samples: int
    violations: list[dict]
    worst_margin_1: float
    worst_margin_2: float

    @property
    def passed(self) -> bool:
        return not self.violations


def random_bump(grid: Grid, rng: np.random.Generator, signed: bool) -> np.ndarray:
    """Smooth random function vanishing on the circle, normalised to sup 1."""
    rr, tt = grid.rr, grid.tt
    p = rng.uniform(0.5, 3.0)
    vals = (1.0 - rr**2) ** p
    for m in range(1, rng.integers(1, 4) + 1):
        a = rng.uniform(-0.4, 0.4) / m
        vals = vals * (1.0 + a * np.cos(m * tt + rng.uniform(0, 2 * np.pi)) * rr**m)
    if signed:
        vals = vals * np.cos(rng.uniform(0, np.pi) * rr + rng.uniform(0, 2 * np.pi))
    return vals / np.max(np.abs(vals))


def check_invariance(
    spec: ProblemSpec,
    R1: float,
    R2: float,
    samples: int = 100,
    seed: int = 0,
    extra: tuple[tuple[float, float], ...] = (),
) -> InvarianceReport:
    """Check that ``T`` maps the box ``0 <= u <= R1``, ``|v| <= R2`` into itself.

    The samples are random smooth bumps scaled into the box plus the constant
    pairs in ``extra`` (each ``(u_value, v_value)``). Violations are reported,
    not raised.
    """
    if R1 <= 0 or R2 <= 0:
        raise ValueError("R1 and R2 must be positive")
    grid = spec.grid
    rng = np.random.default_rng(seed)
    pairs = []
    for uc, vc in extra:
        pairs.append((np.full(grid.shape, float(uc)), np.full(grid.shape, float(vc))))
    for _ in range(samples):
        su, sv = rng.uniform(0.0, 1.0, 2)
        if rng.random() < 0.25:
            su, sv = 1.0, 1.0
        pairs.append((R1 * su * random_bump(grid, rng, False), R2 * sv * random_bump(grid, rng, True)))

    violations = []
    m1 = m2 = np.inf
    for i, (uv, vv) in enumerate(pairs):
        t1, t2 = apply_T(spec, GridFunction(grid, uv), GridFunction(grid, vv))
        n1, n2 = norm_inf(t1), norm_inf(t2)
        m1, m2 = min(m1, R1 - n1), min(m2, R2 - n2)
        if n1 > R1 or n2 > R2 or t1.values.min() < -NEG_TOL:
            violations.append({"sample": i, "norm_T1": n1, "norm_T2": n2,
                               "min_T1": float(t1.values.min())})
    return InvarianceReport(R1, R2, len(pairs), violations, float(m1), float(m2))
