"""Scenario files: flat ``key = value`` lines with dotted keys.

Values are Python literals (numbers, strings, lists, booleans); anything
that does not parse as a literal is kept as a bare string, so
``grid.phi = bump(0.5, 0.5, 0.05, 0.25)`` needs no quotes.  ``#`` starts a
comment.  Unknown keys are rejected.
"""

from __future__ import annotations

import ast
from dataclasses import dataclass, field

from .catalog import CHECKS, parse_phi
from .errors import ConfigError
from .models import FAMILIES

__all__ = ["ScenarioConfig", "parse_config", "load_config", "KEYS"]


def _str(v):
    if not isinstance(v, str):
        raise TypeError("expected a string")
    return v


def _float(v):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise TypeError("expected a number")
    return float(v)


def _int(v):
    if isinstance(v, bool) or not isinstance(v, int):
        raise TypeError("expected an integer")
    return v


def _bool(v):
    if not isinstance(v, bool):
        raise TypeError("expected true/false")
    return v


def _floats(v):
    if not isinstance(v, (list, tuple)):
        raise TypeError("expected a list of numbers")
    return tuple(_float(x) for x in v)


def _ints(v):
    if not isinstance(v, (list, tuple)):
        raise TypeError("expected a list of integers")
    return tuple(_int(x) for x in v)


def _names(v):
    if isinstance(v, str):
        v = [s.strip() for s in v.strip().strip("[]").split(",") if s.strip()]
    if not isinstance(v, (list, tuple)):
        raise TypeError("expected a list of check names")
    out = tuple(_str(x) for x in v)
    unknown = [x for x in out if x not in CHECKS]
    if unknown:
        raise ValueError(f"unknown checks {unknown}; choose from {list(CHECKS)}")
    return out


# key -> (converter, default); None default means "not set"
KEYS = {
    "name": (_str, "scenario"),
    "lane": (_str, None),
    "model.family": (_str, None),
    "model.dim": (_int, 2),
    "model.r0": (_float, 1.0),
    "model.c0": (_float, 1.0),
    "model.spectrum": (_floats, None),
    "model.lx": (_float, 1.0),
    "model.ly": (_float, 1.0),
    "model.a0": (_float, 1.0),
    "model.b0": (_float, 1.0),
    "model.modes": (_ints, None),
    "grid.topology": (_str, "torus"),
    "grid.n": (_int, 64),
    "grid.length": (_float, 1.0),
    "grid.phi": (_str, "flat"),
    "domain.fraction": (_float, 1.0),
    "flow.dt": (_float, None),
    "flow.t_start": (_float, 0.0),
    "flow.t_end": (_float, None),
    "flow.stride": (_int, None),
    "flow.safety": (_float, 0.25),
    "flow.max_steps": (_int, 1_000_000),
    "flow.adaptive": (_bool, False),
    "spectral.count": (_int, 1),
    "spectral.tol": (_float, 1e-9),
    "checks": (_names, ()),
    "tol.rate2d": (_float, 0.02),
    "tol.rate_abs": (_float, 1e-8),
    "tol.rate_general": (_float, 1e-8),
    "tol.prop1": (_float, 1e-12),
    "tol.main_theorem": (_float, None),
    "tol.identity": (_float, 1e-2),
    "tol.order": (_float, 1.7),
    "refine.levels": (_int, 2),
    "output.dir": (_str, "."),
}


@dataclass
class ScenarioConfig:
    values: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        v = self.values.get(key)
        return default if v is None else v

    def replace(self, **updates):
        """Copy with dotted-key updates given as ``flow__dt=...``."""
        vals = dict(self.values)
        for k, v in updates.items():
            vals[k.replace("__", ".")] = v
        return _validate(vals)


def _literal(text):
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        low = text.lower()
        if low in ("true", "false"):
            return low == "true"
        return text


def parse_config(text):
    """Parse scenario text into a validated ``ScenarioConfig``."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in stripped.split("=", 1))
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = _literal(value)
    return _validate(raw)


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def _validate(raw):
    unknown = sorted(set(raw) - set(KEYS))
    if unknown:
        raise ConfigError(f"unknown config keys {unknown}")
    vals = {}
    for key, (conv, default) in KEYS.items():
        if key in raw and raw[key] is not None:
            try:
                vals[key] = conv(raw[key])
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{key}: {exc}") from exc
        else:
            vals[key] = default

    lane = vals["lane"]
    if lane not in ("grid", "model"):
        raise ConfigError("lane must be 'grid' or 'model'")
    for key in ("flow.dt", "flow.t_end"):
        if vals[key] is None:
            raise ConfigError(f"{key} is required")
    if not vals["flow.dt"] > 0:
        raise ConfigError("flow.dt must be positive")
    if not vals["flow.t_end"] > vals["flow.t_start"] >= 0:
        raise ConfigError("need 0 <= flow.t_start < flow.t_end")
    if not 1 <= vals["spectral.count"] <= 20:
        raise ConfigError("spectral.count must lie in [1, 20]")
    if not 1e-12 <= vals["spectral.tol"] <= 1e-4:
        raise ConfigError("spectral.tol must lie in [1e-12, 1e-4]")
    if vals["flow.stride"] is not None and vals["flow.stride"] < 1:
        raise ConfigError("flow.stride must be positive")
    if not 0 < vals["flow.safety"] <= 1:
        raise ConfigError("flow.safety must lie in (0, 1]")
    for key in KEYS:
        if key.startswith("tol.") and vals[key] is not None and not vals[key] > 0:
            raise ConfigError(f"{key} must be positive")

    if lane == "model":
        if vals["model.family"] not in FAMILIES:
            raise ConfigError(f"model.family must be one of {list(FAMILIES)}")
    else:
        if vals["grid.topology"] not in ("torus", "rectangle"):
            raise ConfigError("grid.topology must be 'torus' or 'rectangle'")
        if vals["flow.t_start"] != 0.0:
            raise ConfigError("grid lane starts at t = 0")
        try:
            parse_phi(vals["grid.phi"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if not 0 < vals["domain.fraction"] <= 1:
            raise ConfigError("domain.fraction must lie in (0, 1]")
        if vals["domain.fraction"] < 1 and vals["grid.topology"] == "torus":
            raise ConfigError("domain.fraction < 1 needs a rectangle grid")
    if vals["tol.main_theorem"] is None:
        vals["tol.main_theorem"] = 1e-10 if lane == "model" else 1e-6
    return ScenarioConfig(vals)
