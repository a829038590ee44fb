"""Brute-force fixed point index for maps on products of conical shells.

Each component lives in the one-dimensional cone ``[0, inf)`` and is
restricted to a shell ``[r, R]``. For a smooth map whose fixed points in the
open product shell are isolated and nondegenerate, the index equals the
signed count ``sum sign det(I - DT)`` over those fixed points. This module
locates the fixed points by multi-start damped Newton, checks the
compression/expansion boundary conditions, and compares the signed count
with ``(-1)^k`` where ``k`` is the number of components in mode ``"a"``.

Mode ``"a"`` (compression of the shell onto its interior):
``T_i > r_i`` whenever ``u_i = r_i`` and ``T_i < R_i`` whenever ``u_i = R_i``.
Mode ``"b"`` (expansion): the two inequalities reversed.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .exprlang import Expr, EvalError, evaluate, parse

DEDUP_TOL = 1e-8
# distinct roots closer than this mean a degenerate (multiple) root that
# Newton only resolves to sqrt(eps)
CLUSTER_TOL = 1e-5
DEGENERACY_TOL = 1e-8
FD_STEP = 1e-6
MAX_HALVINGS = 40
NEWTON_TOL = 1e-13
NEWTON_MAXIT = 100


class DegenerateFixedPoint(ArithmeticError):
    def __init__(self, point, det):
        self.point = tuple(point)
        self.det = det
        super().__init__(f"degenerate fixed point at {self.point}: det(I - DT) = {det:.3e}")


class NewtonFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class ConicalShell:
    r: float
    R: float

    def __post_init__(self):
        if not (0 < self.r < self.R):
            raise ValueError(f"shell needs 0 < r < R, got r={self.r}, R={self.R}")

    def contains(self, t: float, open_: bool = True) -> bool:
        return self.r < t < self.R if open_ else self.r <= t <= self.R


@dataclass(frozen=True)
class MapUnderTest:
    """Component maps as expressions in ``u`` (and ``v`` for two components)."""

    components: tuple[Expr, ...]
    shells: tuple[ConicalShell, ...]
    modes: tuple[str, ...]
    name: str = ""

    def __post_init__(self):
        n = len(self.components)
        if n not in (1, 2) or len(self.shells) != n or len(self.modes) != n:
            raise ValueError("need one or two components with matching shells and modes")
        allowed = {"u"} if n == 1 else {"u", "v"}
        for c in self.components:
            if not c.variables <= allowed:
                raise ValueError(f"component {c} uses variables outside {sorted(allowed)}")
        for m in self.modes:
            if m not in ("a", "b"):
                raise ValueError(f"mode must be 'a' or 'b', got {m!r}")

    @classmethod
    def build(cls, components, shells, modes, name="") -> "MapUnderTest":
        comps = tuple(parse(c, {"u", "v"}) if isinstance(c, str) else c for c in components)
        shells = tuple(s if isinstance(s, ConicalShell) else ConicalShell(*s) for s in shells)
        return cls(comps, shells, tuple(modes), name)

    @property
    def dim(self) -> int:
        return len(self.components)

    @property
    def k(self) -> int:
        return sum(m == "a" for m in self.modes)

    @property
    def expected_index(self) -> int:
        """``(-1)^k`` for two components. A single shell has index +1 in
        mode a and -1 in mode b (the one-dimensional degree of ``I - T``)."""
        if self.dim == 1:
            return 1 if self.modes[0] == "a" else -1
        return (-1) ** self.k

    def __call__(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        u = p[..., 0]
        v = p[..., 1] if self.dim == 2 else 0.0
        return np.stack([np.asarray(evaluate(c, u=u, v=v), dtype=float) for c in self.components], axis=-1)


# ------------------------------------------------------ boundary checks


@dataclass
class BoundaryReport:
    """Worst margins per component; positive means the condition holds."""

    margins: dict[int, dict[str, float]]
    min_value: float

    @property
    def passed(self) -> bool:
        return self.min_value >= 0 and all(m > 0 for comp in self.margins.values() for m in comp.values())


def check_boundary_conditions(m: MapUnderTest, ns: int = 33) -> BoundaryReport:
    """Sample each component on its inner and outer face against ``ns``
    points of the other coordinate and report the worst margins."""
    if ns < 9:
        raise ValueError("Ns must be at least 9")
    grids = [np.linspace(s.r, s.R, ns) for s in m.shells]
    pts = np.array(list(itertools.product(*grids)))
    min_value = float(np.min(m(pts)))
    margins = {}
    for i, (shell, mode) in enumerate(zip(m.shells, m.modes)):
        out = {}
        for face, t in (("inner", shell.r), ("outer", shell.R)):
            others = [grids[j] if j != i else np.array([t]) for j in range(m.dim)]
            p = np.array(list(itertools.product(*others)))
            vals = m(p)[:, i]
            # mode a: T > r on inner face, T < R on outer; mode b reversed
            sign = (1.0 if face == "inner" else -1.0) * (1.0 if mode == "a" else -1.0)
            out[face] = float(np.min(sign * (vals - t)))
        margins[i] = out
    return BoundaryReport(margins, min_value)


# ---------------------------------------------------------- index count


def jacobian(m: MapUnderTest, p: np.ndarray, step: float = FD_STEP) -> np.ndarray:
    """Central-difference Jacobian of ``m`` at ``p``."""
    n = m.dim
    J = np.empty((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = step
        J[:, j] = (m(p + e) - m(p - e)) / (2 * step)
    return J


def _residual(m: MapUnderTest, p: np.ndarray) -> np.ndarray:
    return p - m(p)


def newton_fixed_point(m: MapUnderTest, p0) -> np.ndarray | None:
    """Damped Newton on ``p - T(p) = 0``; ``None`` if it stalls or leaves
    the expression's domain."""
    p = np.asarray(p0, dtype=float).copy()
    n = m.dim
    try:
        F = _residual(m, p)
        for _ in range(NEWTON_MAXIT):
            nf = np.max(np.abs(F))
            if nf < NEWTON_TOL:
                return p
            A = np.eye(n) - jacobian(m, p)
            try:
                step = np.linalg.solve(A, -F)
            except np.linalg.LinAlgError:
                return None
            t = 1.0
            for _ in range(MAX_HALVINGS):
                q = p + t * step
                try:
                    Fq = _residual(m, q)
                except EvalError:
                    Fq = None
                if Fq is not None and np.max(np.abs(Fq)) < nf:
                    break
                t *= 0.5
            else:
                return p if nf < 1e-10 else None
            p, F = q, Fq
    except EvalError:
        return None
    return p if np.max(np.abs(F)) < 1e-10 else None


@dataclass
class IndexResult:
    index: int
    fixed_points: list[tuple[float, ...]]
    signs: list[int]
    dets: list[float] = field(default_factory=list)


def _seeds(m: MapUnderTest, per_axis: int) -> np.ndarray:
    axes = []
    for s in m.shells:
        h = (s.R - s.r) / per_axis
        axes.append(s.r + h * (np.arange(per_axis) + 0.5))
    return np.array(list(itertools.product(*axes)))


def _sign_change_cells(m: MapUnderTest, per_axis: int) -> int:
    """Number of seed-lattice cells in which every component of ``p - T(p)``
    changes sign across the corners (candidate locations of fixed points)."""
    axes = [np.linspace(s.r, s.R, per_axis + 1) for s in m.shells]
    pts = np.array(list(itertools.product(*axes)))
    F = (pts - m(pts)).reshape(*(per_axis + 1,) * m.dim, m.dim)
    count = 0
    for cell in itertools.product(range(per_axis), repeat=m.dim):
        corners = [F[tuple(c + o for c, o in zip(cell, off))] for off in itertools.product((0, 1), repeat=m.dim)]
        corners = np.array(corners)
        if all(corners[:, i].min() <= 0 <= corners[:, i].max() for i in range(m.dim)):
            count += 1
    return count


def fixed_point_index(m: MapUnderTest, seeds_per_axis: int = 8) -> IndexResult:
    """Signed count of the fixed points of ``m`` in the open product shell."""
    found: list[np.ndarray] = []
    for seed in _seeds(m, seeds_per_axis):
        p = newton_fixed_point(m, seed)
        if p is None:
            continue
        if not all(s.contains(float(t)) for s, t in zip(m.shells, p)):
            continue
        if any(np.max(np.abs(p - q)) < DEDUP_TOL for q in found):
            continue
        found.append(p)

    if not found and _sign_change_cells(m, seeds_per_axis):
        raise NewtonFailure(f"{m.name or 'map'}: Newton failed from every seed although "
                            "p - T(p) changes sign inside the shell")

    found.sort(key=lambda q: tuple(q))
    for a, b in itertools.combinations(found, 2):
        if np.max(np.abs(a - b)) < CLUSTER_TOL:
            d = float(np.linalg.det(np.eye(m.dim) - jacobian(m, a)))
            raise DegenerateFixedPoint(a, d)
    signs, dets = [], []
    for p in found:
        d = float(np.linalg.det(np.eye(m.dim) - jacobian(m, p)))
        if abs(d) < DEGENERACY_TOL:
            raise DegenerateFixedPoint(p, d)
        dets.append(d)
        signs.append(1 if d > 0 else -1)
    return IndexResult(int(sum(signs)), [tuple(float(t) for t in p) for p in found], signs, dets)


def brouwer_index(m: MapUnderTest, seeds_per_axis: int = 8) -> int:
    return fixed_point_index(m, seeds_per_axis).index


# ------------------------------------------------------------ cases


def theorem_cases() -> list[MapUnderTest]:
    """Shipped maps covering the four mode combinations."""
    A = (0.1, 1.0)
    B = (0.5, 1.5)
    cases = [
        ("aa-constant", ["0.3", "0.8"], [A, B], "aa"),
        ("aa-coupled", ["0.4 + 0.1*sin(v)", "0.8 + 0.2*u"], [A, B], "aa"),
        ("ab-square", ["0.3", "v^2"], [A, B], "ab"),
        ("ab-coupled", ["0.3 + 0.05*v", "v^2*(1 + 0.05*u)"], [A, B], "ab"),
        ("ba-square", ["u^2", "0.8"], [B, B], "ba"),
        ("ba-coupled", ["u^2*(1 + 0.05*v)", "0.8 + 0.1*cos(u)"], [B, B], "ba"),
        ("ba-three-roots", ["u + (u - 0.7)*(u - 1)*(u - 1.3)", "0.8"], [B, B], "ba"),
        ("bb-square", ["u^2", "v^2"], [B, B], "bb"),
        ("bb-coupled", ["u^2 + 0.02*v", "v^2 + 0.02*u"], [B, B], "bb"),
    ]
    return [MapUnderTest.build(c, s, tuple(modes), name) for name, c, s, modes in cases]


@dataclass
class CaseResult:
    case: str
    modes: str
    k: int
    expected_index: int
    computed_index: int
    fixed_points: list
    boundary_ok: bool

    @property
    def passed(self) -> bool:
        return self.boundary_ok and self.computed_index == self.expected_index and bool(self.fixed_points)

    def to_dict(self) -> dict:
        return {"case": self.case, "modes": self.modes, "k": self.k,
                "expected_index": self.expected_index, "computed_index": self.computed_index,
                "fixed_points": [list(p) for p in self.fixed_points], "passed": self.passed}


def verify_theorem_cases(seeds_per_axis: int = 8, cases: list[MapUnderTest] | None = None) -> list[CaseResult]:
    out = []
    for m in cases if cases is not None else theorem_cases():
        bc = check_boundary_conditions(m)
        res = fixed_point_index(m, seeds_per_axis)
        out.append(CaseResult(m.name, "".join(m.modes), m.k, m.expected_index, res.index,
                              res.fixed_points, bc.passed))
    return out


# ------------------------------------------------------------ retraction


def retract_rho1(v, r1: float, R1: float, h1=1.0, norm=None):
    """Retraction of ``{v in K : |v| <= R1}`` onto the shell ``r1 <= |v| <= R1``.

    Points already in the shell are returned unchanged; points inside the
    inner ball are pushed along ``h1`` and rescaled onto ``|v| = r1``.
    ``v`` may be a nonnegative scalar or array (the cone of nonnegative
    vectors, sup norm unless ``norm`` is given); ``h1`` is a cone element of
    unit norm.
    """
    if not 0 < r1 < R1:
        raise ValueError("need 0 < r1 < R1")
    norm = norm or (lambda w: float(np.max(np.abs(w))))
    scalar = np.ndim(v) == 0
    v_arr = np.asarray(v, dtype=float)
    h = np.broadcast_to(np.asarray(h1, dtype=float), v_arr.shape)
    if np.any(v_arr < 0) or np.any(h < 0):
        raise ValueError("v and h1 must lie in the cone of nonnegative elements")
    if not math.isclose(norm(h), 1.0, rel_tol=1e-12):
        raise ValueError("h1 must have unit norm")
    nv = norm(v_arr)
    if nv > R1 * (1 + 1e-15):
        raise ValueError(f"|v| = {nv} exceeds R1 = {R1}")
    if nv >= r1:
        return float(v_arr) if scalar else v_arr.copy()
    w = v_arr + (r1 - nv) ** 2 * h
    nw = norm(w)
    assert nw > 0, "retraction denominator vanished"
    out = r1 * w / nw
    return float(out) if scalar else out
