"""Scenario configuration: TOML documents with expression-valued fields.

Cell fields may use the variables x, y (and t for time-dependent data);
boundary fields use the arc coordinate s (and t).  Expressions are
evaluated in a restricted numpy namespace (sin, cos, exp, ... and pi);
anything else is a parse error.
"""

from __future__ import annotations

import dataclasses

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

import numpy as np

from .driver import SolverConfig
from .geometry import GeometryError, build_domain, shape_from_dict
from .scenario import make_scenario


class ConfigError(ValueError):
    pass


_NAMESPACE = {
    "sin": np.sin, "cos": np.cos, "tan": np.tan, "exp": np.exp,
    "log": np.log, "sqrt": np.sqrt, "abs": np.abs, "tanh": np.tanh,
    "minimum": np.minimum, "maximum": np.maximum, "where": np.where,
    "hypot": np.hypot, "arctan2": np.arctan2, "sign": np.sign,
    "pi": np.pi, "e": np.e,
}


def _compile_expr(text, variables):
    try:
        code = compile(text, "<config>", "eval")
    except SyntaxError as exc:
        raise ConfigError(f"bad expression {text!r}: {exc}") from exc
    for name in code.co_names:
        if name not in _NAMESPACE and name not in variables:
            raise ConfigError(f"expression {text!r} references "
                              f"undefined variable {name!r}")
    return code


def _cell_expr(text):
    code = _compile_expr(text, ("x", "y", "t"))

    def f(x, y, t=0.0):
        ns = dict(_NAMESPACE)
        ns.update(x=x, y=y, t=t)
        return np.asarray(eval(code, {"__builtins__": {}}, ns), dtype=float)
    return f


def _arc_expr(text):
    code = _compile_expr(text, ("s", "t"))

    def f(s, t=0.0):
        ns = dict(_NAMESPACE)
        ns.update(s=s, t=t)
        return np.asarray(eval(code, {"__builtins__": {}}, ns), dtype=float)
    return f


def _field(block, key, kind, default="0"):
    val = block.get(key, default)
    if isinstance(val, (int, float)):
        return float(val)
    if isinstance(val, str):
        return _cell_expr(val) if kind == "cell" else _arc_expr(val)
    if isinstance(val, list):
        return np.asarray(val, dtype=float)
    raise ConfigError(f"field {key!r} must be a number, expression or table")


_DOMAIN_KEYS = {"shape", "resolution", "radius", "center", "a", "b",
                "width", "height", "origin", "corner_radius"}
_DATA_KEYS = {"b", "a", "alpha", "eta", "kappa", "A", "G", "rotGb",
              "omega0", "p"}
_SOLVER_KEYS = {"nu", "theta", "R", "p", "T", "dt", "adaptive_dt",
                "cfl_target", "tol_fp", "max_fp_iter", "relax", "tol_lin",
                "tol_comp", "dirichlet_mode", "source_variant",
                "output_every"}
_OUTPUT_KEYS = {"directory", "cadence", "monitors", "q"}


@dataclasses.dataclass
class OutputConfig:
    directory: str = "out"
    cadence: int = 1
    monitors: tuple = ("gronwall", "max_principle", "compatibility")
    q: float = 2.0


def _check_keys(block, allowed, section):
    for key in block:
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r} in [{section}]")


def parse_config(text):
    """Parse a TOML scenario document.

    Returns (ScenarioData, SolverConfig, OutputConfig).  Fails fast on
    unknown keys, malformed expressions, or non-positive bathymetry; an
    incompatible flux balance only warns here (it hard-errors at solve
    time).
    """
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config parse error: {exc}") from exc

    for section in doc:
        if section not in ("domain", "data", "solver", "output"):
            raise ConfigError(f"unknown section [{section}]")

    dom_block = doc.get("domain", {})
    _check_keys(dom_block, _DOMAIN_KEYS, "domain")
    if "shape" not in dom_block:
        raise ConfigError("missing [domain] shape")
    resolution = int(dom_block.get("resolution", 64))
    shape_dict = {k: v for k, v in dom_block.items() if k != "resolution"}
    try:
        domain = build_domain(shape_from_dict(shape_dict), resolution)
    except GeometryError as exc:
        raise ConfigError(str(exc)) from exc

    data = doc.get("data", {})
    _check_keys(data, _DATA_KEYS, "data")
    kwargs = {}
    for key, kind in (("b", "cell"), ("kappa", "cell"), ("A", "cell"),
                      ("rotGb", "cell"), ("omega0", "cell"),
                      ("a", "arc"), ("alpha", "arc"), ("eta", "arc")):
        if key in data:
            kwargs[key] = _field(data, key, kind)
    if "G" in data:
        gval = data["G"]
        if not (isinstance(gval, list) and len(gval) == 2):
            raise ConfigError("G must be a two-component list")
        kwargs["G"] = tuple(_cell_expr(c) if isinstance(c, str) else float(c)
                            for c in gval)
    kwargs.setdefault("b", 1.0)
    kwargs["p"] = float(data.get("p", 2.0))
    try:
        scenario = make_scenario(domain, **kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    solver = doc.get("solver", {})
    _check_keys(solver, _SOLVER_KEYS, "solver")
    solver = dict(solver)
    solver.setdefault("p", kwargs["p"])
    try:
        cfg = SolverConfig(**solver)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad [solver] block: {exc}") from exc

    out = doc.get("output", {})
    _check_keys(out, _OUTPUT_KEYS, "output")
    ocfg = OutputConfig(
        directory=out.get("directory", "out"),
        cadence=int(out.get("cadence", 1)),
        monitors=tuple(out.get("monitors",
                               OutputConfig.monitors)),
        q=float(out.get("q", 2.0)))

    from .diagnostics import compatibility_residual
    resid = compatibility_residual(scenario, 0.0)
    scale = (np.sum(np.abs(scenario.A_at(0.0)[domain.mask]))
             * domain.grid.cell_area
             + domain.boundary.integrate(np.abs(scenario.b_arc
                                                * scenario.a_at(0.0))))
    if scale > 0 and resid > cfg.tol_comp * scale:
        import warnings
        warnings.warn(f"scenario flux balance off by {resid:.3e}; "
                      "the Neumann solve will reject it")
    return scenario, cfg, ocfg
