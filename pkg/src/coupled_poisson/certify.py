"""Numerical checks of the localization hypotheses for the coupled system.

Given radii ``r1 < R1``, ``r2 < R2`` and bound functions of position
``f_upper, f_lower, g_upper, g_lower`` the four conditions are

    a) f <= f_upper   on  disk x [0, R1] x [-R2, R2],  sup G f_upper < R1
    b) f >= f_lower   on  disk x [0, r1] x [-R2, R2],  sup G f_lower > r1
    c) |g| <= g_upper on  disk x [0, R1] x [-R2, R2],  sup G g_upper < R2
    d) g >= 0         on  disk x [0, R1] x [-r2, r2],
       g >= g_lower   on  disk x [0, R1] x [0, r2],    sup G g_lower > r2

where ``G`` is the Green's operator. The pointwise parts are checked on a
tensor sample (every disk node times ``Ns`` values of ``u`` and of ``v``);
this is numerical evidence, not a proof.
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .disk import Grid, GridFunction, greens_mass, norm_inf, sample
from .exprlang import SPACE_VARIABLES, Expr, evaluate, parse
from .hammerstein import ProblemSpec, SolutionPair
from .poisson import greens_apply

log = logging.getLogger(__name__)

# Pointwise dominance is non-strict; allow this much relative round-off.
POINTWISE_RTOL = 1e-12
CONSTANT_XCHECK_TOL = 1e-6


@dataclass(frozen=True)
class LocalizationBox:
    r1: float
    R1: float
    r2: float
    R2: float

    def __post_init__(self):
        for name in ("r1", "R1", "r2", "R2"):
            val = getattr(self, name)
            if not (math.isfinite(val) and val > 0):
                raise ValueError(f"{name} must be a positive real, got {val!r}")
        if not self.r1 < self.R1:
            raise ValueError("r1 < R1 required")
        if not self.r2 < self.R2:
            raise ValueError("r2 < R2 required")


@dataclass(frozen=True)
class BoundSet:
    f_upper: Expr
    f_lower: Expr
    g_upper: Expr
    g_lower: Expr

    def __post_init__(self):
        for name in ("f_upper", "f_lower", "g_upper", "g_lower"):
            extra = getattr(self, name).variables - SPACE_VARIABLES
            if extra:
                raise ValueError(f"bound {name} may only depend on x1, x2 (found {sorted(extra)})")

    @classmethod
    def from_strings(cls, f_upper: str, f_lower: str, g_upper: str, g_lower: str) -> "BoundSet":
        return cls(*(parse(s, SPACE_VARIABLES) for s in (f_upper, f_lower, g_upper, g_lower)))


@dataclass
class Witness:
    x1: float
    x2: float
    u: float
    v: float


@dataclass
class ClauseResult:
    """Pointwise part of a condition: min over the sample of the slack."""

    margin: float
    witness: Witness
    region: dict

    @property
    def passed(self) -> bool:
        return self.margin >= -self.region.get("atol", 0.0)


@dataclass
class ConditionResult:
    name: str
    clauses: dict[str, ClauseResult]
    integral_value: float
    radius: float
    integral_margin: float
    bound_nonnegative: bool

    @property
    def pointwise_margin(self) -> float:
        return min(c.margin for c in self.clauses.values())

    @property
    def witness(self) -> Witness:
        return min(self.clauses.values(), key=lambda c: c.margin).witness

    @property
    def pointwise_ok(self) -> bool:
        return all(c.passed for c in self.clauses.values())

    @property
    def passed(self) -> bool:
        return self.pointwise_ok and self.integral_margin > 0 and self.bound_nonnegative

    def to_dict(self) -> dict:
        d = {
            "status": "pass" if self.passed else "fail",
            "pointwise_margin": self.pointwise_margin,
            "witness": asdict(self.witness),
            "integral_value": self.integral_value,
            "radius": self.radius,
            "integral_margin": self.integral_margin,
            "bound_nonnegative": self.bound_nonnegative,
        }
        if len(self.clauses) > 1:
            d["clauses"] = {
                k: {"status": "pass" if c.passed else "fail", "pointwise_margin": c.margin,
                    "witness": asdict(c.witness)}
                for k, c in self.clauses.items()
            }
        return d


@dataclass
class Certificate:
    conditions: dict[str, ConditionResult]
    ns: int
    grid: Grid
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.conditions.values())

    def to_dict(self) -> dict:
        return {
            "conditions": {k: c.to_dict() for k, c in self.conditions.items()},
            "Ns": self.ns,
            "grid": {"Nr": self.grid.nr, "Ntheta": self.grid.ntheta},
            "passed": self.passed,
            "notes": list(self.notes),
        }


def _scan(expr: Expr, grid: Grid, u_vals: np.ndarray, v_vals: np.ndarray, slack) -> tuple[float, Witness]:
    """Minimise ``slack(value, x1, x2)`` over nodes x u_vals x v_vals.

    Loops over ``u`` to bound memory; the inner block is nodes x v.
    """
    x1 = grid.x1.ravel()[:, None]
    x2 = grid.x2.ravel()[:, None]
    vv = v_vals[None, :]
    best = np.inf
    wit = None
    for uval in u_vals:
        vals = evaluate(expr, x1, x2, float(uval), vv)
        s = slack(vals, x1, x2)
        i = int(np.argmin(s))
        if s.flat[i] < best:
            best = float(s.flat[i]) + 0.0  # drop -0.0
            a, b = np.unravel_index(i, s.shape)
            wit = Witness(float(x1[a, 0]), float(x2[a, 0]), float(uval), float(v_vals[b]))
    return best, wit


def _bound_slack(bound: Expr, sign: float, absolute: bool = False):
    """Slack ``sign * (bound(x) - value)``; uses ``|value|`` when absolute."""

    def slack(vals, x1, x2):
        b = evaluate(bound, x1, x2)
        vals = np.abs(vals) if absolute else vals
        return sign * (b - vals)

    return slack


def _atol(scale: float) -> float:
    return POINTWISE_RTOL * max(1.0, abs(scale))


def _integral(bound: Expr, grid: Grid, notes: list[str], name: str) -> tuple[float, bool]:
    h = sample(bound, grid)
    nonneg = bool(h.values.min() >= 0.0)
    if not nonneg:
        notes.append(f"bound {name} takes negative values (min {h.values.min():.6g})")
    val = norm_inf(greens_apply(grid, h))
    if bound.is_constant:
        c = evaluate(bound)
        closed = abs(c) * greens_mass(0.0, 2)
        if abs(val - closed) > CONSTANT_XCHECK_TOL:
            raise AssertionError(f"{name}: Poisson solve {val!r} disagrees with closed form {closed!r}")
    return val, nonneg


def verify_conditions(spec: ProblemSpec, box: LocalizationBox, bounds: BoundSet, ns: int = 33) -> Certificate:
    """Evaluate conditions a) to d) and return a :class:`Certificate`."""
    if ns < 9:
        raise ValueError("Ns must be at least 9")
    grid = spec.grid
    r1, R1, r2, R2 = box.r1, box.R1, box.r2, box.R2
    lin = lambda a, b: np.linspace(a, b, ns)  # noqa: E731
    notes: list[str] = []
    conds: dict[str, ConditionResult] = {}

    def clause(expr, bound, u_rng, v_rng, slack):
        m, w = _scan(expr, grid, lin(*u_rng), lin(*v_rng), slack)
        scale = 0.0 if bound is None else float(np.max(np.abs(sample(bound, grid).values)))
        region = {"u": list(u_rng), "v": list(v_rng), "atol": _atol(scale)}
        return ClauseResult(m, w, region)

    # a) f <= f_upper, integral < R1
    ca = clause(spec.f, bounds.f_upper, (0.0, R1), (-R2, R2), _bound_slack(bounds.f_upper, +1.0))
    val, nn = _integral(bounds.f_upper, grid, notes, "f_upper")
    conds["a"] = ConditionResult("a", {"upper": ca}, val, R1, R1 - val, nn)

    # b) f >= f_lower, integral > r1
    cb = clause(spec.f, bounds.f_lower, (0.0, r1), (-R2, R2), _bound_slack(bounds.f_lower, -1.0))
    val, nn = _integral(bounds.f_lower, grid, notes, "f_lower")
    conds["b"] = ConditionResult("b", {"lower": cb}, val, r1, val - r1, nn)

    # c) |g| <= g_upper, integral < R2
    cc = clause(spec.g, bounds.g_upper, (0.0, R1), (-R2, R2), _bound_slack(bounds.g_upper, +1.0, absolute=True))
    val, nn = _integral(bounds.g_upper, grid, notes, "g_upper")
    conds["c"] = ConditionResult("c", {"upper": cc}, val, R2, R2 - val, nn)

    # d) g >= 0 on [-r2, r2], g >= g_lower on [0, r2], integral > r2
    cd0 = clause(spec.g, None, (0.0, R1), (-r2, r2), lambda vals, x1, x2: vals)
    cd1 = clause(spec.g, bounds.g_lower, (0.0, R1), (0.0, r2), _bound_slack(bounds.g_lower, -1.0))
    val, nn = _integral(bounds.g_lower, grid, notes, "g_lower")
    conds["d"] = ConditionResult("d", {"nonneg": cd0, "lower": cd1}, val, r2, val - r2, nn)

    for c in conds.values():
        log.info("condition %s: %s (pointwise %.3e, integral %.6g vs %.6g)",
                 c.name, "pass" if c.passed else "fail", c.pointwise_margin, c.integral_value, c.radius)
    return Certificate(conds, ns, grid, notes)


# ------------------------------------------------------------- reports


@dataclass
class BoxReport:
    norm_u: float
    norm_v: float
    margins: dict[str, float]

    @property
    def passed(self) -> bool:
        return all(m > 0 for m in self.margins.values())

    def to_dict(self) -> dict:
        return {"status": "pass" if self.passed else "fail", "norm_u": self.norm_u,
                "norm_v": self.norm_v, "margins": dict(self.margins)}


def check_solution_in_box(sol: SolutionPair, box: LocalizationBox) -> BoxReport:
    """Strict check of ``r1 < |u| < R1`` and ``r2 < |v| < R2``."""
    nu, nv = sol.norms
    margins = {
        "u_above_r1": nu - box.r1,
        "u_below_R1": box.R1 - nu,
        "v_above_r2": nv - box.r2,
        "v_below_R2": box.R2 - nv,
    }
    return BoxReport(nu, nv, margins)


@dataclass
class NonnegReport:
    minimum: float
    witness: Witness

    @property
    def violated(self) -> bool:
        return self.minimum < 0


def check_nonnegativity(expr: Expr, grid: Grid, R1: float, R2: float, ns: int = 33) -> NonnegReport:
    """Sample ``expr`` on disk x [0, R1] x [-R2, R2] and report its minimum.

    A negative minimum only triggers a warning.
    """
    m, w = _scan(expr, grid, np.linspace(0.0, R1, ns), np.linspace(-R2, R2, ns),
                 lambda vals, x1, x2: vals)
    rep = NonnegReport(m, w)
    if rep.violated:
        log.warning("expression %s is negative (%.6g) at x=(%.4g, %.4g), u=%.4g, v=%.4g",
                    expr, m, w.x1, w.x2, w.u, w.v)
    return rep
