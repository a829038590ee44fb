"""INI-style run configuration.

Example::

    [problem]
    f = "0.2*(1+x1^2)*exp(u)*(2+cos(v))"
    g = "0.75*(1+x1^2)*(1-v^2)*(2+sin(u))"
    dimension = 2

    [localization]
    r1 = "1/21"
    R1 = "1/2"
    ...

Expressions and radii may be quoted. Radii are constant expressions.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, replace
from pathlib import Path

from .certify import BoundSet, LocalizationBox
from .exprlang import SPACE_VARIABLES, VARIABLES, ExprError, evaluate, parse
from .hammerstein import ProblemSpec

DEFAULTS = {
    "grid_nr": 64,
    "grid_ntheta": 128,
    "tol": 1e-10,
    "max_iter": 100,
    "initial_guess": "zero",
    "out_dir": "out",
    "format": "csv",
}

_SECTIONS = {
    "problem": {"f", "g", "dimension"},
    "bounds": {"f_upper", "f_lower", "g_upper", "g_lower"},
    "localization": {"r1", "R1", "r2", "R2"},
    "solver": {"grid_nr", "grid_ntheta", "tol", "max_iter", "initial_guess"},
    "output": {"out_dir", "format"},
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    f: str
    g: str
    box: LocalizationBox
    bounds: dict | None = None
    dimension: int = 2
    grid_nr: int = DEFAULTS["grid_nr"]
    grid_ntheta: int = DEFAULTS["grid_ntheta"]
    tol: float = DEFAULTS["tol"]
    max_iter: int = DEFAULTS["max_iter"]
    initial_guess: str = DEFAULTS["initial_guess"]
    out_dir: str = DEFAULTS["out_dir"]
    format: str = DEFAULTS["format"]
    path: str | None = None

    def problem(self) -> ProblemSpec:
        return ProblemSpec(parse(self.f), parse(self.g), self.grid_nr, self.grid_ntheta)

    def bound_set(self) -> BoundSet:
        if self.bounds is None:
            raise ConfigError("missing [bounds] section")
        return BoundSet.from_strings(*(self.bounds[k] for k in ("f_upper", "f_lower", "g_upper", "g_lower")))

    def with_overrides(self, **kw) -> "RunConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        cfg = replace(self, **kw)
        _validate_solver(cfg)
        return cfg


def _unquote(s: str) -> str:
    s = s.strip()
    if len(s) >= 2 and s[0] == s[-1] and s[0] in "\"'":
        return s[1:-1]
    return s


def _expr(section: str, key: str, text: str, variables) -> str:
    try:
        parse(text, variables)
    except ExprError as exc:
        raise ConfigError(f"[{section}] {key}: {exc}") from None
    return text


def _constant(section: str, key: str, text: str) -> float:
    try:
        return evaluate(parse(text, ()))
    except ExprError as exc:
        raise ConfigError(f"[{section}] {key}: {exc}") from None


def _number(section: str, key: str, text: str, kind):
    try:
        return kind(text)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: expected {kind.__name__}, got {text!r}") from None


def _validate_solver(cfg: RunConfig) -> None:
    if cfg.grid_nr < 4:
        raise ConfigError("[solver] grid_nr: must be >= 4")
    if cfg.grid_ntheta < 8 or cfg.grid_ntheta % 2:
        raise ConfigError("[solver] grid_ntheta: must be even and >= 8")
    if not cfg.tol > 0:
        raise ConfigError("[solver] tol: must be positive")
    if cfg.max_iter < 1:
        raise ConfigError("[solver] max_iter: must be >= 1")
    if cfg.format not in ("csv", "json"):
        raise ConfigError(f"[output] format: must be 'csv' or 'json', got {cfg.format!r}")


def load_config(path) -> RunConfig:
    """Read and validate a run configuration file."""
    path = Path(path)
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str  # R1 and r1 are different keys
    try:
        with open(path) as fh:
            cp.read_file(fh, source=str(path))
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}: expected a [section] header") from None
    except configparser.ParsingError as exc:
        lineno, line = exc.errors[0]
        raise ConfigError(f"{path}: line {lineno}: cannot parse {line.strip()!r}") from None
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None

    for sec in cp.sections():
        if sec not in _SECTIONS:
            raise ConfigError(f"{path}: unknown section [{sec}]")
        for key in cp[sec]:
            if key not in _SECTIONS[sec]:
                raise ConfigError(f"{path}: unknown key {key!r} in [{sec}]")

    def get(sec, key, default=None):
        if cp.has_option(sec, key):
            return _unquote(cp.get(sec, key))
        if default is None:
            raise ConfigError(f"{path}: missing [{sec}] {key}")
        return default

    if not cp.has_section("problem"):
        raise ConfigError(f"{path}: missing [problem] section")
    f = _expr("problem", "f", get("problem", "f"), VARIABLES)
    g = _expr("problem", "g", get("problem", "g"), VARIABLES)
    dimension = _number("problem", "dimension", get("problem", "dimension", "2"), int)
    if dimension != 2:
        raise ConfigError(f"[problem] dimension: only dimension = 2 is supported, got {dimension}")

    if not cp.has_section("localization"):
        raise ConfigError(f"{path}: missing [localization] section")
    radii = {k: _constant("localization", k, get("localization", k)) for k in ("r1", "R1", "r2", "R2")}
    for k, val in radii.items():
        if not val > 0:
            raise ConfigError(f"[localization] {k}: must be positive, got {val!r}")
    try:
        box = LocalizationBox(**radii)
    except ValueError as exc:
        raise ConfigError(f"[localization] {exc}") from None

    bounds = None
    if cp.has_section("bounds"):
        bounds = {k: _expr("bounds", k, get("bounds", k), SPACE_VARIABLES)
                  for k in ("f_upper", "f_lower", "g_upper", "g_lower")}

    d = DEFAULTS
    cfg = RunConfig(
        f=f, g=g, box=box, bounds=bounds, dimension=dimension,
        grid_nr=_number("solver", "grid_nr", get("solver", "grid_nr", str(d["grid_nr"])), int),
        grid_ntheta=_number("solver", "grid_ntheta", get("solver", "grid_ntheta", str(d["grid_ntheta"])), int),
        tol=_number("solver", "tol", get("solver", "tol", str(d["tol"])), float),
        max_iter=_number("solver", "max_iter", get("solver", "max_iter", str(d["max_iter"])), int),
        initial_guess=get("solver", "initial_guess", d["initial_guess"]),
        out_dir=get("output", "out_dir", d["out_dir"]),
        format=get("output", "format", d["format"]),
        path=str(path),
    )
    _validate_solver(cfg)
    return cfg
