"""Experiment configuration: flat ``key = value`` lines under ``[section]`` headers.

``configparser`` is not used because diagnostics must carry line numbers
for unknown keys and bad values, and the format is deliberately smaller
(no interpolation, no continuation lines).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Any, Callable

from .quasiperiodic import GOLDEN_MEAN

EXPERIMENTS = ("density", "holder", "dynamics", "asymptotics", "pk", "diophantine")


class ConfigError(ValueError):
    """Invalid configuration, with the offending line and field when known."""

    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        prefix = ", ".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)


_PI_RE = re.compile(r"^\s*([+-]?)\s*(\d*\.?\d*(?:[eE][+-]?\d+)?)\s*\*?\s*pi\s*(?:/\s*(\d+(?:\.\d*)?))?\s*$")


def parse_real(text: str) -> float:
    """Float literal, or a multiple of ``pi`` such as ``pi/4``, ``-pi/4`` or ``0.5*pi``."""
    t = text.strip()
    if t == "golden":
        return GOLDEN_MEAN
    m = _PI_RE.match(t)
    if m:
        sign = -1.0 if m.group(1) == "-" else 1.0
        coef = float(m.group(2)) if m.group(2) not in ("", ".") else 1.0
        den = float(m.group(3)) if m.group(3) else 1.0
        return sign * coef * math.pi / den
    v = float(t)
    if not math.isfinite(v):
        raise ValueError("value must be finite")
    return v


def _int(text: str) -> int:
    v = parse_real(text)
    if v != int(v):
        raise ValueError("expected an integer")
    return int(v)


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise ValueError("expected true or false")


def _real_list(text: str) -> tuple:
    parts = [p for p in text.split(",") if p.strip()]
    if not parts:
        raise ValueError("expected a comma-separated list")
    return tuple(parse_real(p) for p in parts)


def _choice(*options: str) -> Callable[[str], str]:
    def parse(text: str) -> str:
        t = text.strip()
        if t not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return t

    parse.options = options
    return parse


@dataclass(frozen=True)
class Field:
    parse: Callable[[str], Any]
    default: Any
    check: Callable[[Any], bool] = lambda v: True
    rule: str = ""


def _pos(v):
    return v > 0


def _nonneg(v):
    return v >= 0


F = Field
SCHEMA: dict[str, dict[str, Field]] = {
    "operator": {
        "potential": F(_choice("zero", "almost_mathieu"), "zero"),
        "lambda": F(parse_real, 0.1),
        "alpha": F(parse_real, GOLDEN_MEAN, lambda v: 0 < v < 1, "in (0, 1)"),
        "theta": F(parse_real, 0.0),
        "beta": F(parse_real, 0.0, lambda v: -math.pi / 2 < v < math.pi / 2, "in (-pi/2, pi/2)"),
    },
    "perturbation": {
        "kind": F(_choice("none", "exponential"), "none"),
        "kappa": F(parse_real, 0.05),
        "gamma": F(parse_real, 1.0, _pos, "positive"),
        "a": F(parse_real, 4.0, lambda v: v > 2, "greater than 2"),
        "tau": F(parse_real, 5.0, lambda v: v > 4, "greater than 4"),
        "relaxed": F(_bool, False),
        "seed": F(_int, 1, _nonneg, "nonnegative"),
        "n_range": F(_int, 200, lambda v: 1 <= v <= 100_000, "in [1, 100000]"),
        "fraction": F(parse_real, 1.0, lambda v: 0 < v <= 1, "in (0, 1]"),
    },
    "measure": {
        "source": F(_choice("operator", "power"), "operator"),
        "power_beta": F(parse_real, 0.75, lambda v: 0 < v < 1, "in (0, 1)"),
        "method": F(_choice("approximant", "limit"), "approximant"),
        "n": F(_int, 2000, lambda v: 1 <= v <= 1_000_000, "in [1, 1000000]"),
        "nodes": F(_int, 8192, lambda v: 1 <= v <= 1 << 20, "in [1, 1048576]"),
        "eps": F(_real_list, (0.0,), lambda v: all(0 <= e < 2 for e in v), "each in [0, 2)"),
    },
    "density": {
        "tol": F(parse_real, 0.02, _pos, "positive"),
        "cauchy": F(_bool, True),
    },
    "holder": {
        "alphas": F(_real_list, (1.0,), lambda v: all(0 <= a <= 1 for a in v), "each in [0, 1]"),
        "depth_max": F(_int, 14, lambda v: 1 <= v <= 24, "in [1, 24]"),
        "stable_alpha": F(parse_real, 1.0, lambda v: 0 <= v <= 1, "in [0, 1]"),
        "stable_from": F(_int, 10, lambda v: 0 <= v <= 24, "in [0, 24]"),
        "stability_tol": F(parse_real, 0.05, _pos, "positive"),
        "growth_alpha": F(parse_real, -1.0, lambda v: v == -1.0 or 0 <= v <= 1, "-1 (off) or in [0, 1]"),
        "growth_from": F(_int, 8, lambda v: 0 <= v <= 24, "in [0, 24]"),
        "growth_factor": F(parse_real, 2.0, _pos, "positive"),
        "domination": F(_bool, True),
        "domination_from": F(_int, 6, lambda v: 1 <= v <= 24, "in [1, 24]"),
        "domination_to": F(_int, 12, lambda v: 1 <= v <= 24, "in [1, 24]"),
        "domination_max": F(parse_real, 4.0, _pos, "positive"),
    },
    "dynamics": {
        "t_min": F(parse_real, 1e2, _pos, "positive"),
        "t_max": F(parse_real, 1e4, _pos, "positive"),
        "per_decade": F(_int, 64, lambda v: 1 <= v <= 1024, "in [1, 1024]"),
        "kernel": F(_choice("exact", "gaussian"), "exact"),
        "eta": F(parse_real, 0.01, _pos, "positive"),
        "rho": F(parse_real, -1.0, lambda v: v == -1.0 or 0 <= v < 1, "-1 (auto) or in [0, 1)"),
        "slope_tol": F(parse_real, 0.15, _pos, "positive"),
        "power_tol": F(parse_real, 0.1, _pos, "positive"),
        "r2_min": F(parse_real, 0.98, lambda v: 0 < v <= 1, "in (0, 1]"),
    },
    "asymptotics": {
        "e_min": F(parse_real, -1.9),
        "e_max": F(parse_real, 1.9),
        "energies": F(_int, 128, lambda v: 1 <= v <= 100_000, "in [1, 100000]"),
        "n_max": F(_int, 200, lambda v: 1 <= v <= 100_000, "in [1, 100000]"),
        "rate_from": F(_int, 20, lambda v: v >= 1, "at least 1"),
        "rate_slack": F(parse_real, 0.05, _nonneg, "nonnegative"),
        "sandwich_n": F(_int, 500, lambda v: 1 <= v <= 100_000, "in [1, 100000]"),
        "gamma_max": F(parse_real, 2.0, lambda v: v >= 1, "at least 1"),
        "identity_tol": F(parse_real, 1e-10, _pos, "positive"),
        "tol": F(parse_real, 1e-12, _pos, "positive"),
    },
    "pk": {
        "energy_source": F(_choice("bands", "uniform"), "bands"),
        "energies": F(_int, 64, lambda v: 1 <= v <= 100_000, "in [1, 100000]"),
        "e_min": F(parse_real, -1.9),
        "e_max": F(parse_real, 1.9),
        "q_max": F(_int, 400, lambda v: 1 <= v <= 100_000, "in [1, 100000]"),
        "k_max": F(_int, 500, lambda v: 1 <= v <= 100_000, "in [1, 100000]"),
        "bracket_lo": F(parse_real, 0.5, _pos, "positive"),
        "bracket_hi": F(parse_real, 2.0, _pos, "positive"),
        "cauchy_from": F(_int, 250, lambda v: v >= 1, "at least 1"),
        "cauchy_tol": F(parse_real, 0.01, _pos, "positive"),
        "jl": F(_bool, False),
        "jl_k_max": F(_int, 200, lambda v: 1 <= v <= 100_000, "in [1, 100000]"),
        "jl_lo": F(parse_real, 0.1, _pos, "positive"),
        "jl_hi": F(parse_real, 10.0, _pos, "positive"),
    },
    "diophantine": {
        "alpha": F(parse_real, GOLDEN_MEAN, lambda v: 0 < v < 1, "in (0, 1)"),
        "eta": F(parse_real, 0.2, _pos, "positive"),
        "tau_dc": F(parse_real, 1.0, _pos, "positive"),
        "n_max": F(_int, 100_000, lambda v: 1 <= v <= 10_000_000, "in [1, 10000000]"),
    },
}


class Config:
    """Resolved configuration: every schema field, with defaults filled in."""

    def __init__(self, experiment: str, values: dict, explicit: set):
        self.experiment = experiment
        self.values = values
        self.explicit = explicit

    def __getitem__(self, key: str):
        section, name = key.split(".", 1)
        return self.values[section][name]

    def section(self, name: str) -> dict:
        return dict(self.values[name])

    def render(self) -> str:
        """Canonical text of the resolved configuration (schema order)."""
        lines = [f"experiment = {self.experiment}"]
        for sec, fields in SCHEMA.items():
            lines.append(f"[{sec}]")
            for key in fields:
                lines.append(f"{key} = {_render_value(self.values[sec][key])}")
        return "\n".join(lines) + "\n"


def _render_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ", ".join(_render_value(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def parse_config(text: str, experiment: str) -> Config:
    """Parse config text for `experiment`.

    Raises
    ------
    ConfigError
        On unknown sections or keys, duplicates, malformed lines, bad
        values, or a top-level ``experiment`` that disagrees.
    """
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment '{experiment}'")
    values = {sec: {k: f.default for k, f in fields.items()} for sec, fields in SCHEMA.items()}
    explicit: set = set()
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].split(";", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError("malformed section header", lineno)
            section = line[1:-1].strip()
            if section not in SCHEMA:
                raise ConfigError(f"unknown section '[{section}]'", lineno, section)
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", lineno)
        key, val = (p.strip() for p in line.split("=", 1))
        if section is None:
            if key != "experiment":
                raise ConfigError(f"unknown key '{key}' outside any section", lineno, key)
            if val != experiment:
                raise ConfigError(f"config is for '{val}', not '{experiment}'", lineno, key)
            continue
        fields = SCHEMA[section]
        if key not in fields:
            raise ConfigError(f"unknown key '{key}' in [{section}]", lineno, f"{section}.{key}")
        name = f"{section}.{key}"
        if name in explicit:
            raise ConfigError(f"duplicate key '{key}'", lineno, name)
        f = fields[key]
        try:
            v = f.parse(val)
        except ValueError as exc:
            raise ConfigError(f"bad value '{val}': {exc}", lineno, name) from None
        if not f.check(v):
            raise ConfigError(f"value {val} out of range ({f.rule})", lineno, name)
        values[section][key] = v
        explicit.add(name)
    cfg = Config(experiment, values, explicit)
    _cross_checks(cfg)
    return cfg


def _cross_checks(cfg: Config) -> None:
    if cfg["dynamics.t_min"] >= cfg["dynamics.t_max"]:
        raise ConfigError("t_min must be below t_max", field="dynamics.t_min")
    if cfg["asymptotics.e_min"] > cfg["asymptotics.e_max"]:
        raise ConfigError("e_min must not exceed e_max", field="asymptotics.e_min")
    if cfg["pk.e_min"] > cfg["pk.e_max"]:
        raise ConfigError("e_min must not exceed e_max", field="pk.e_min")
    if cfg["pk.bracket_lo"] >= cfg["pk.bracket_hi"]:
        raise ConfigError("bracket_lo must be below bracket_hi", field="pk.bracket_lo")
    if cfg["pk.cauchy_from"] > cfg["pk.k_max"]:
        raise ConfigError("cauchy_from exceeds k_max", field="pk.cauchy_from")
    if cfg["asymptotics.rate_from"] > cfg["asymptotics.n_max"]:
        raise ConfigError("rate_from exceeds n_max", field="asymptotics.rate_from")
    if cfg["holder.domination_from"] > cfg["holder.domination_to"]:
        raise ConfigError("domination_from exceeds domination_to", field="holder.domination_from")
    a_min = 2.0 if cfg["perturbation.relaxed"] else 3.0
    if cfg["perturbation.kind"] == "exponential" and not cfg["perturbation.a"] > a_min:
        raise ConfigError(f"a must exceed {a_min:g} unless relaxed = true", field="perturbation.a")
