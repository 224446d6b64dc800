"""Run configuration: flat ``key = value`` text with dotted sections.

Example::

    model = darcy2d
    nu = 0.1
    resolution = 64
    time.dt = 0.001
    time.t_end = 1.0
    initial.mode.a.k = 1
    initial.mode.a.amplitude = 0.1

Lines starting with ``#`` are comments; values may be quoted.  Initial modes
are grouped by an arbitrary label and contribute ``amplitude * cos(k·x + phase)``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, fields

from .errors import ConfigError
from .models import MODELS

SCHEMES = ("if_rk2", "if_rk4")
_MODE_KEY = re.compile(r"^initial\.mode\.([A-Za-z0-9_-]+)\.(k|k2|amplitude|phase)$")


@dataclass(frozen=True)
class StripSettings:
    depth_truncation: float = 18.0
    panels: int = 12
    nodes_per_panel: int = 8
    grading: float = 1.5


@dataclass(frozen=True)
class TimeSettings:
    dt: float
    t_end: float
    scheme: str = "if_rk2"
    snapshot_stride: int = 10
    blowup_threshold: float = 1e8


@dataclass(frozen=True)
class Mode:
    k: tuple[int, ...]
    amplitude: float
    phase: float = 0.0


@dataclass(frozen=True)
class RunConfig:
    model: str
    resolution: int
    time: TimeSettings
    nu: float = 0.0
    lam: float = 0.0
    sigma: float = 1.0
    resolution2: int | None = None
    strip: StripSettings = field(default_factory=StripSettings)
    modes: tuple[Mode, ...] = ()
    initial_file: str | None = None
    output_dir: str = "output"

    @property
    def is_3d(self) -> bool:
        return self.model.startswith("darcy3d")

    @property
    def grid_shape(self) -> tuple[int, ...]:
        if self.is_3d:
            return (self.resolution, self.resolution2 or self.resolution)
        return (self.resolution,)


_FLOAT_KEYS = {
    "nu": "nu",
    "lambda": "lam",
    "sigma": "sigma",
}
_STRIP_KEYS = {f.name: f.type for f in fields(StripSettings)}
_TIME_KEYS = {f.name: f.type for f in fields(TimeSettings)}


def _to_float(key: str, raw: str, line: int) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"expected a number, got {raw!r}", key, line) from None


def _to_int(key: str, raw: str, line: int) -> int:
    try:
        value = float(raw)
    except ValueError:
        raise ConfigError(f"expected an integer, got {raw!r}", key, line) from None
    if value != int(value):
        raise ConfigError(f"expected an integer, got {raw!r}", key, line)
    return int(value)


def _unquote(raw: str) -> str:
    if len(raw) >= 2 and raw[0] == raw[-1] and raw[0] in "\"'":
        return raw[1:-1]
    return raw


def parse_config(text: str) -> RunConfig:
    """Parse and validate configuration text; raises `ConfigError` naming key and line."""
    entries: dict[str, tuple[str, int]] = {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", line=lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if "#" in value and not value.startswith(("'", '"')):
            value = value.split("#", 1)[0].strip()
        if not key:
            raise ConfigError("empty key", line=lineno)
        if key in entries:
            raise ConfigError("duplicate key", key, lineno)
        entries[key] = (_unquote(value), lineno)

    top: dict[str, object] = {}
    strip: dict[str, object] = {}
    time: dict[str, object] = {}
    mode_parts: dict[str, dict[str, tuple[str, int]]] = {}

    for key, (value, line) in entries.items():
        if key == "model":
            if value not in MODELS:
                raise ConfigError(f"unknown model {value!r} (expected one of {', '.join(MODELS)})", key, line)
            top["model"] = value
        elif key in _FLOAT_KEYS:
            top[_FLOAT_KEYS[key]] = _to_float(key, value, line)
        elif key in ("resolution", "resolution2"):
            top[key] = _to_int(key, value, line)
        elif key == "output_dir":
            top["output_dir"] = value
        elif key == "initial.file":
            top["initial_file"] = value
        elif key.startswith("strip.") and key[6:] in _STRIP_KEYS:
            name = key[6:]
            conv = _to_int if name in ("panels", "nodes_per_panel") else _to_float
            strip[name] = conv(key, value, line)
        elif key.startswith("time.") and key[5:] in _TIME_KEYS:
            name = key[5:]
            if name == "scheme":
                if value not in SCHEMES:
                    raise ConfigError(f"unknown scheme {value!r} (expected one of {', '.join(SCHEMES)})", key, line)
                time[name] = value
            elif name == "snapshot_stride":
                time[name] = _to_int(key, value, line)
            else:
                time[name] = _to_float(key, value, line)
        elif (m := _MODE_KEY.match(key)) is not None:
            mode_parts.setdefault(m.group(1), {})[m.group(2)] = (value, line)
        else:
            raise ConfigError("unknown key", key, line)

    for required in ("model", "resolution"):
        if required not in top:
            raise ConfigError("missing required key", required)
    for required in ("dt", "t_end"):
        if required not in time:
            raise ConfigError("missing required key", f"time.{required}")

    modes = []
    for label in sorted(mode_parts):
        parts = mode_parts[label]
        prefix = f"initial.mode.{label}"
        for required in ("k", "amplitude"):
            if required not in parts:
                raise ConfigError("missing required key", f"{prefix}.{required}")
        k = [_to_int(f"{prefix}.k", *parts["k"])]
        if "k2" in parts:
            k.append(_to_int(f"{prefix}.k2", *parts["k2"]))
        amp = _to_float(f"{prefix}.amplitude", *parts["amplitude"])
        phase = _to_float(f"{prefix}.phase", *parts["phase"]) if "phase" in parts else 0.0
        modes.append(Mode(tuple(k), amp, phase))

    config = RunConfig(
        time=TimeSettings(**time),
        strip=StripSettings(**strip),
        modes=tuple(modes),
        **top,
    )
    validate(config, {key: line for key, (_, line) in entries.items()})
    return config


def validate(config: RunConfig, lines: dict[str, int] | None = None) -> RunConfig:
    """Check numeric constraints; ``lines`` maps keys to source lines for messages."""
    lines = lines or {}

    def fail(key: str, message: str):
        raise ConfigError(message, key, lines.get(key))

    def finite(v):
        return isinstance(v, (int, float)) and math.isfinite(v)

    if not (finite(config.nu) and config.nu >= 0):
        fail("nu", f"must be >= 0, got {config.nu}")
    if not (finite(config.lam) and config.lam >= 0):
        fail("lambda", f"must be >= 0, got {config.lam}")
    if not (finite(config.sigma) and config.sigma > 0):
        fail("sigma", f"must be > 0, got {config.sigma}")
    for key, n in (("resolution", config.resolution), ("resolution2", config.resolution2)):
        if n is not None and (n < 8 or n % 2):
            fail(key, f"must be even and >= 8, got {n}")
    if config.resolution2 is not None and not config.is_3d:
        fail("resolution2", f"only valid for 3D models, not {config.model}")
    t = config.time
    if not (finite(t.dt) and t.dt > 0):
        fail("time.dt", f"must be > 0, got {t.dt}")
    if not (finite(t.t_end) and t.t_end >= 0):
        fail("time.t_end", f"must be >= 0, got {t.t_end}")
    if t.t_end > 0 and t.dt > t.t_end:
        fail("time.dt", f"must not exceed time.t_end = {t.t_end}, got {t.dt}")
    if t.snapshot_stride < 1:
        fail("time.snapshot_stride", f"must be >= 1, got {t.snapshot_stride}")
    if not (finite(t.blowup_threshold) and t.blowup_threshold > 0):
        fail("time.blowup_threshold", f"must be > 0, got {t.blowup_threshold}")
    s = config.strip
    if not (finite(s.depth_truncation) and s.depth_truncation > 0):
        fail("strip.depth_truncation", f"must be > 0, got {s.depth_truncation}")
    if s.panels < 1:
        fail("strip.panels", f"must be >= 1, got {s.panels}")
    if s.nodes_per_panel < 2:
        fail("strip.nodes_per_panel", f"must be >= 2, got {s.nodes_per_panel}")
    if not (finite(s.grading) and s.grading >= 1):
        fail("strip.grading", f"must be >= 1, got {s.grading}")
    dim = 2 if config.is_3d else 1
    for mode in config.modes:
        if len(mode.k) > dim:
            fail("initial.mode", f"k2 given for a 1D model ({config.model})")
        if not (finite(mode.amplitude) and finite(mode.phase)):
            fail("initial.mode", "amplitude and phase must be finite")
    if config.modes and config.initial_file:
        fail("initial.file", "give either initial modes or an initial file, not both")
    return config


def _fmt(value: float) -> str:
    return format(value, ".17g")


def format_config(config: RunConfig) -> str:
    """Canonical text form; `parse_config` of the result equals ``config``."""
    out = [
        f"model = {config.model}",
        f"nu = {_fmt(config.nu)}",
        f"lambda = {_fmt(config.lam)}",
        f"sigma = {_fmt(config.sigma)}",
        f"resolution = {config.resolution}",
    ]
    if config.resolution2 is not None:
        out.append(f"resolution2 = {config.resolution2}")
    s = config.strip
    out += [
        f"strip.depth_truncation = {_fmt(s.depth_truncation)}",
        f"strip.panels = {s.panels}",
        f"strip.nodes_per_panel = {s.nodes_per_panel}",
        f"strip.grading = {_fmt(s.grading)}",
    ]
    t = config.time
    out += [
        f"time.dt = {_fmt(t.dt)}",
        f"time.t_end = {_fmt(t.t_end)}",
        f"time.scheme = {t.scheme}",
        f"time.snapshot_stride = {t.snapshot_stride}",
        f"time.blowup_threshold = {_fmt(t.blowup_threshold)}",
    ]
    # zero-padded labels keep the parser's sorted order equal to the original order
    for i, mode in enumerate(config.modes):
        label = f"m{i:04d}"
        out.append(f"initial.mode.{label}.k = {mode.k[0]}")
        if len(mode.k) > 1:
            out.append(f"initial.mode.{label}.k2 = {mode.k[1]}")
        out.append(f"initial.mode.{label}.amplitude = {_fmt(mode.amplitude)}")
        out.append(f"initial.mode.{label}.phase = {_fmt(mode.phase)}")
    if config.initial_file is not None:
        out.append(f'initial.file = "{config.initial_file}"')
    out.append(f'output_dir = "{config.output_dir}"')
    return "\n".join(out) + "\n"


def config_to_dict(config: RunConfig) -> dict:
    return {
        "model": config.model,
        "nu": config.nu,
        "lambda": config.lam,
        "sigma": config.sigma,
        "resolution": config.resolution,
        "resolution2": config.resolution2,
        "strip": vars(config.strip).copy(),
        "time": vars(config.time).copy(),
        "initial": {
            "modes": [{"k": list(m.k), "amplitude": m.amplitude, "phase": m.phase} for m in config.modes],
            "file": config.initial_file,
        },
        "output_dir": config.output_dir,
    }
