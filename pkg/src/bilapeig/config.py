"""Run configuration: flat ``key = value`` INI with one section per module."""

from __future__ import annotations

import configparser
import io
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .errors import ConfigError
from .model import RadialGrid

# key -> section; every key must appear exactly once in a config file
SECTIONS = {
    "r_min": "grid", "r1": "grid", "r2": "grid", "r3": "grid", "r_max": "grid", "grid_points": "grid",
    "ode_rel_tol": "ode", "ode_abs_tol": "ode",
    "lambda_bracket": "eigen",
    "kmax": "simplicity",
    "eps_dichotomy": "dichotomy",
    "seed": "run", "output_dir": "run", "n_jobs": "run",
}


@dataclass(frozen=True)
class RunConfig:
    """``grid_points`` counts core nodes ``h, 2h, ..., r1``; ``r_min`` must equal ``h``."""

    r_min: float = 0.0025
    r1: float = 2.5
    r2: float = 3.0
    r3: float = 4.0
    r_max: float = 14.0
    grid_points: int = 1000
    kmax: int = 40
    ode_rel_tol: float = 1e-12
    ode_abs_tol: float = 1e-15
    lambda_bracket: tuple[float, float] = (0.5, 2.0)
    eps_dichotomy: float = 0.1
    seed: int = 0
    output_dir: str = "out"
    n_jobs: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.grid_points < 2 or self.grid_points % 2:
            raise ConfigError("grid_points must be a positive even integer")
        h = self.r1 / self.grid_points
        if abs(self.r_min - h) > 1e-12 * h:
            raise ConfigError(f"r_min must equal r1/grid_points = {h:.17g}, got {self.r_min!r}")
        if not (0 < self.r_min < 1 < 2 < self.r1 < self.r2 < self.r3 <= self.r_max):
            raise ConfigError("radii must satisfy 0 < r_min < 1 < 2 < r1 < r2 < r3 <= r_max")
        for key in ("ode_rel_tol", "ode_abs_tol"):
            if not 0 < getattr(self, key) <= 1e-4:
                raise ConfigError(f"{key} must lie in (0, 1e-4]")
        if self.kmax < 1:
            raise ConfigError("kmax must be at least 1")
        lo, hi = self.lambda_bracket
        if not 0 < lo < hi:
            raise ConfigError("lambda_bracket must be two numbers 0 < lo < hi")
        if not self.eps_dichotomy > 0:
            raise ConfigError("eps_dichotomy must be positive")
        if self.n_jobs == 0:
            raise ConfigError("n_jobs must be nonzero")

    def grid(self) -> RadialGrid:
        return RadialGrid.uniform(self.r1, self.r2, self.r3, self.r_max, self.grid_points)

    def replace(self, **changes) -> "RunConfig":
        return RunConfig(**{**asdict(self), **changes})

    def to_dict(self) -> dict:
        out = asdict(self)
        out["lambda_bracket"] = list(self.lambda_bracket)
        return out

    def to_ini(self) -> str:
        parser = configparser.ConfigParser()
        for key, section in SECTIONS.items():
            if not parser.has_section(section):
                parser.add_section(section)
            value = getattr(self, key)
            if key == "lambda_bracket":
                value = f"{value[0]!r}, {value[1]!r}"
            parser.set(section, key, repr(value) if isinstance(value, float) else str(value))
        buf = io.StringIO()
        parser.write(buf)
        return buf.getvalue()


def _parse(key: str, raw: str):
    kind = {f.name: f.type for f in fields(RunConfig)}[key]
    raw = raw.strip()
    if not raw:
        raise ConfigError(f"config key {key!r} has no value")
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if key == "lambda_bracket":
            parts = [float(p) for p in raw.replace(",", " ").split()]
            if len(parts) != 2:
                raise ValueError
            return tuple(parts)
        return raw
    except ValueError:
        raise ConfigError(f"config key {key!r}: cannot parse {raw!r}") from None


def load_config(path) -> RunConfig:
    """Read a complete config file; missing, duplicate or unknown keys are errors."""
    parser = configparser.ConfigParser()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from None
    values = {}
    for section in parser.sections():
        for key, raw in parser.items(section):
            if key not in SECTIONS:
                raise ConfigError(f"unknown config key {key!r} in section [{section}]")
            if SECTIONS[key] != section:
                raise ConfigError(f"config key {key!r} belongs in section [{SECTIONS[key]}], not [{section}]")
            values[key] = _parse(key, raw)
    missing = [k for k in SECTIONS if k not in values]
    if missing:
        raise ConfigError(f"missing config key {missing[0]!r} (section [{SECTIONS[missing[0]]}])")
    return RunConfig(**values)
