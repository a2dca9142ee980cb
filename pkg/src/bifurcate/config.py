"""Run configuration: ``key = value`` lines with ``#`` comments."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

from .critical_points import DEFAULT_WINDOW, DEGENERACY_TOL
from .field_models import GeneratingFamily, parse_family
from .flow_engine import controls_for_window
from .integrator import FlowControls


class ConfigError(ValueError):
    """Configuration problem, tied to a line of the source when one applies."""

    def __init__(self, message: str, line: int | None = None, source: str = "config"):
        self.line = line
        self.source = source
        where = f"{source}:{line}: " if line is not None else f"{source}: "
        super().__init__(where + message)


FAMILY_KEYS = ("family", "bump.base", "bump.center", "bump.sigma", "bump.eps")
KNOWN_KEYS = FAMILY_KEYS + (
    "region", "window", "circle_n", "grid", "scan_n", "scan_r", "scan_pair", "x", "critpts_grid",
    "atol", "rtol", "escape_radius", "max_time", "basin_radius", "degeneracy_tol", "caustic_step",
    "figures", "out", "workers",
)
POSITIVE_KEYS = ("atol", "rtol", "escape_radius", "max_time", "basin_radius", "degeneracy_tol", "caustic_step")


@dataclass(frozen=True)
class RunConfig:
    family: GeneratingFamily
    region: tuple[float, float, float, float] = (-2.0, 2.0, -2.0, 2.0)
    window: tuple[float, float, float, float] = DEFAULT_WINDOW
    circle_n: int = 720
    grid: int = 41
    scan_n: int = 360
    scan_r: float = 1.0
    scan_pair: tuple[str, str] | None = None
    x: tuple[float, float] = (0.0, 0.0)
    critpts_grid: int = 21
    control_overrides: dict = field(default_factory=dict)
    degeneracy_tol: float = DEGENERACY_TOL
    caustic_step: float = 0.01
    figures: bool = True
    out: str = "out"
    workers: int | None = None
    source: str = "config"

    @property
    def controls(self) -> FlowControls:
        return controls_for_window(self.window, **self.control_overrides)

    def with_overrides(self, x: tuple[float, float] | None = None, r: float | None = None,
                       out: str | None = None) -> RunConfig:
        cfg = self
        if x is not None:
            cfg = replace(cfg, x=x)
        if r is not None:
            if not r > 0.0:
                raise ConfigError("--r must be positive", source="command line")
            cfg = replace(cfg, scan_r=r)
        if out is not None:
            cfg = replace(cfg, out=out)
        return cfg


def parse_lines(text: str, source: str = "config") -> dict[str, tuple[str, int]]:
    """Raw ``key -> (value, line)`` map; rejects malformed, unknown and repeated keys."""
    out: dict[str, tuple[str, int]] = {}
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", n, source)
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError("missing key before '='", n, source)
        if key not in KNOWN_KEYS:
            raise ConfigError(f"unknown key {key!r}", n, source)
        if key in out:
            raise ConfigError(f"key {key!r} repeats line {out[key][1]}", n, source)
        out[key] = (value, n)
    return out


def _floats(value: str, count: int, key: str, line: int, source: str) -> tuple[float, ...]:
    parts = [p.strip() for p in value.split(",")]
    if len(parts) != count:
        raise ConfigError(f"{key} expects {count} comma-separated numbers, got {value!r}", line, source)
    try:
        vals = tuple(float(p) for p in parts)
    except ValueError:
        raise ConfigError(f"{key} expects numbers, got {value!r}", line, source) from None
    if not all(math.isfinite(v) for v in vals):
        raise ConfigError(f"{key} must be finite, got {value!r}", line, source)
    return vals


def _int(value: str, key: str, line: int, source: str, minimum: int) -> int:
    try:
        v = int(value)
    except ValueError:
        raise ConfigError(f"{key} expects an integer, got {value!r}", line, source) from None
    if v < minimum:
        raise ConfigError(f"{key} must be at least {minimum}, got {v}", line, source)
    return v


def _bool(value: str, key: str, line: int, source: str) -> bool:
    v = value.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key} expects true or false, got {value!r}", line, source)


def _box(value: str, key: str, line: int, source: str) -> tuple[float, float, float, float]:
    a, b, c, d = _floats(value, 4, key, line, source)
    if not (a < b and c < d):
        raise ConfigError(f"{key} must be nonempty (x1min < x1max, x2min < x2max), got {value!r}", line, source)
    return a, b, c, d


def parse_config(text: str, source: str = "config") -> RunConfig:
    raw = parse_lines(text, source)
    if "family" not in raw:
        raise ConfigError("missing required key 'family'", None, source)
    fam_settings = {k: v for k, (v, _) in raw.items() if k in FAMILY_KEYS}
    try:
        family = parse_family(fam_settings)
    except ValueError as exc:
        bad = next((k for k in FAMILY_KEYS if k in raw and k.split(".")[-1] in str(exc)), "family")
        raise ConfigError(str(exc), raw.get(bad, raw["family"])[1], source) from None
    kw: dict = {"source": source}
    ctl: dict = {}
    for key, (value, n) in raw.items():
        if key in FAMILY_KEYS:
            continue
        if key in ("region", "window"):
            kw[key] = _box(value, key, n, source)
        elif key in ("circle_n", "grid", "critpts_grid"):
            kw[key] = _int(value, key, n, source, 0 if key != "critpts_grid" else 1)
        elif key == "scan_n":
            kw[key] = _int(value, key, n, source, 3)
        elif key == "workers":
            kw[key] = _int(value, key, n, source, 1)
        elif key == "x":
            kw[key] = _floats(value, 2, key, n, source)
        elif key == "scan_pair":
            parts = [p.strip() for p in value.split(",")]
            if len(parts) != 2 or not all(parts):
                raise ConfigError(f"scan_pair expects two labels, got {value!r}", n, source)
            kw[key] = (parts[0], parts[1])
        elif key == "figures":
            kw[key] = _bool(value, key, n, source)
        elif key == "out":
            kw[key] = value
        else:
            (v,) = _floats(value, 1, key, n, source)
            if key in POSITIVE_KEYS and not v > 0.0:
                raise ConfigError(f"{key} must be positive, got {value!r}", n, source)
            if key == "scan_r":
                if not v > 0.0:
                    raise ConfigError(f"scan_r must be positive, got {value!r}", n, source)
                kw[key] = v
            elif key in ("degeneracy_tol", "caustic_step"):
                kw[key] = v
            else:
                ctl[key] = v
    if ctl:
        kw["control_overrides"] = ctl
    return RunConfig(family=family, **kw)


def load_config(path: str | Path) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", None, str(p)) from None
    return parse_config(text, str(p))
