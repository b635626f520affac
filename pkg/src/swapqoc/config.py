"""Run configuration: INI-style ``key = value`` files with one section per module.

Every key has a default, so an empty file is a complete configuration.
Keys are unique across sections, which lets ``SWAPQOC_<KEY>`` environment
variables override any of them without naming the section.
"""
from __future__ import annotations

import configparser
import os
import re
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from .controls import ControlScaling
from .grape import FULL_GATE, MERGE, CostWeights, GridSpec, OptimizationProblem
from .grid import UnitSystem
from .lattice import LatticeParams
from .propagation import FINAL_DT, Absorber

ENV_PREFIX = "SWAPQOC_"
TOP_LEVEL = "__top__"  # keys before any section header may belong to any section


class ConfigError(ValueError):
    """Invalid configuration file or value."""


def _float_list(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.replace(";", ",").split(",") if v.strip())


def _cascade(text: str) -> tuple[tuple[int, float], ...]:
    """``"32:5e-4, 64:1e-4"`` -> ((32, 5e-4), (64, 1e-4)); empty means the built-in cascade."""
    out = []
    for item in text.split(","):
        if not item.strip():
            continue
        n, dt = item.split(":")
        out.append((int(n), float(dt)))
    return tuple(out)


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(",") if v.strip())


def _optional_int(text: str):
    return None if text.strip().lower() in ("", "none", "random") else int(text)


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _kind(text: str) -> str:
    t = text.strip().lower().replace("-", "_")
    aliases = {"merge": MERGE, "full": FULL_GATE, "full_gate": FULL_GATE}
    if t not in aliases:
        raise ValueError(f"kind must be merge or full_gate, got {text!r}")
    return aliases[t]


# section -> key -> (parser, default)
SCHEMA: dict[str, dict[str, tuple]] = {
    "run": {
        "kind": (_kind, MERGE),
        "out": (str, "runs"),
        "rng": (int, 0),
        "seeds": (int, 1),
        "durations": (_float_list, (0.12,)),
        "workers": (int, 1),
    },
    "lattice": {
        "a": (float, 0.408),
        "v_z_khz": (float, 186.0),
        "a_s": (float, 5.45e-3),
        "mass_amu": (float, 87.0),
        "configuration": (str, "separated"),
        "n": (int, 64),
    },
    "scaling": {
        "beta_scale_pi": (float, 0.52),
        "theta_scale_pi": (float, -0.474),
        "v0_scale_khz": (float, 122.0),
    },
    "propagation": {
        "dt": (float, FINAL_DT),
        "absorber_strength_khz": (float, 50.0),
        "absorber_width": (float, 0.2),
        "store_stride": (int, 0),
    },
    "adiabatic": {
        "ramp_duration": (float, 0.135),
        "mode": (str, "eigen"),
        "phase_stride": (int, 50),
    },
    "grape": {
        "gamma": (float, 1e-7),
        "sigma": (float, 1e5),
        "lower": (_float_list, (-np.inf, 0.0, 0.2)),
        "upper": (_float_list, (np.inf, 2.1, 1.15)),
        "alpha_target": (float, 0.33),
        "threshold": (float, 0.99),
        "max_iterations": (int, 200),
        "stage_iterations": (_int_list, ()),
        "gradient_tol": (float, 1e-9),
        "wall_time": (float, 3600.0),
        "cascade": (_cascade, ()),
        "seed_amplitude": (float, 0.15),
        "seed_sines": (_optional_int, None),
    },
}

KEY_SECTION = {key: sec for sec, keys in SCHEMA.items() for key in keys}
if len(KEY_SECTION) != sum(len(k) for k in SCHEMA.values()):
    raise RuntimeError("configuration keys must be unique across sections")


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved configuration; field names match the file keys."""

    kind: str = MERGE
    out: str = "runs"
    rng: int = 0
    seeds: int = 1
    durations: tuple[float, ...] = (0.12,)
    workers: int = 1
    a: float = 0.408
    v_z_khz: float = 186.0
    a_s: float = 5.45e-3
    mass_amu: float = 87.0
    configuration: str = "separated"
    n: int = 64
    beta_scale_pi: float = 0.52
    theta_scale_pi: float = -0.474
    v0_scale_khz: float = 122.0
    dt: float = FINAL_DT
    absorber_strength_khz: float = 50.0
    absorber_width: float = 0.2
    store_stride: int = 0
    ramp_duration: float = 0.135
    mode: str = "eigen"
    phase_stride: int = 50
    gamma: float = 1e-7
    sigma: float = 1e5
    lower: tuple[float, ...] = (-np.inf, 0.0, 0.2)
    upper: tuple[float, ...] = (np.inf, 2.1, 1.15)
    alpha_target: float = 0.33
    threshold: float = 0.99
    max_iterations: int = 200
    stage_iterations: tuple[int, ...] = ()
    gradient_tol: float = 1e-9
    wall_time: float = 3600.0
    cascade: tuple[tuple[int, float], ...] = ()
    seed_amplitude: float = 0.15
    seed_sines: int | None = None

    # -- derived objects ---------------------------------------------------

    def lattice(self) -> LatticeParams:
        return LatticeParams(a=self.a, v_z_khz=self.v_z_khz, a_s=self.a_s, units=UnitSystem(self.mass_amu))

    def scaling(self) -> ControlScaling:
        return ControlScaling(self.beta_scale_pi * np.pi, self.theta_scale_pi * np.pi, self.v0_scale_khz)

    def absorber(self) -> Absorber | None:
        if self.absorber_strength_khz == 0:
            return None
        return Absorber(self.absorber_strength_khz, self.absorber_width)

    def weights(self) -> CostWeights:
        return CostWeights(self.gamma, self.sigma, tuple(self.lower), tuple(self.upper))

    def problem(self, kind: str | None = None, duration: float | None = None) -> OptimizationProblem:
        kind = kind or self.kind
        duration = self.durations[0] if duration is None else duration
        make = OptimizationProblem.merge if kind == MERGE else OptimizationProblem.full_gate
        kw = {}
        if self.cascade:
            specs = []
            for i, (n, dt) in enumerate(self.cascade):
                limit = self.stage_iterations[i] if i < len(self.stage_iterations) else None
                last_full = kind == FULL_GATE and i == len(self.cascade) - 1 and len(self.cascade) > 2
                specs.append(GridSpec(n, dt, evaluate_only=last_full, max_iterations=limit))
            kw["cascade"] = tuple(specs)
        p = make(
            duration,
            alpha_target=self.alpha_target,
            weights=self.weights(),
            threshold=self.threshold,
            max_iterations=self.max_iterations,
            gradient_tol=self.gradient_tol,
            wall_time=self.wall_time,
            lattice=self.lattice(),
            scaling=self.scaling(),
            absorber=self.absorber(),
            **kw,
        )
        if self.stage_iterations and not self.cascade:
            specs = tuple(
                replace(s, max_iterations=self.stage_iterations[i]) if i < len(self.stage_iterations) else s
                for i, s in enumerate(p.cascade)
            )
            p = replace(p, cascade=specs)
        return p

    def echo(self) -> str:
        """Resolved configuration in the input format."""
        lines = []
        for sec, keys in SCHEMA.items():
            lines.append(f"[{sec}]")
            for key in keys:
                lines.append(f"{key} = {_format(getattr(self, key))}")
            lines.append("")
        return "\n".join(lines)

    def write_echo(self, directory) -> Path:
        path = Path(directory) / "resolved_config.ini"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.echo())
        return path


def _format(value) -> str:
    if value is None:
        return "random"
    if isinstance(value, tuple):
        if value and isinstance(value[0], tuple):
            return ", ".join(f"{n}:{dt!r}" for n, dt in value)
        return ", ".join(_format(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _line_of(text: str, key: str) -> int | None:
    pat = re.compile(rf"^\s*{re.escape(key)}\s*[=:]", re.IGNORECASE)
    for i, line in enumerate(text.splitlines(), start=1):
        if pat.match(line):
            return i
    return None


def parse_config(text: str, env: dict | None = None, source: str = "<config>") -> RunConfig:
    """Parse configuration text; unknown keys and bad values raise :class:`ConfigError`."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    body = text
    if not re.match(r"^\s*(\[|$)", text) and text.strip():
        body = f"[{TOP_LEVEL}]\n" + text
    try:
        parser.read_string(body, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    values: dict = {}
    for sec in parser.sections():
        if sec not in SCHEMA and sec != TOP_LEVEL:
            raise ConfigError(f"{source}: unknown section [{sec}]")
        for key, raw in parser.items(sec):
            known = KEY_SECTION if sec == TOP_LEVEL else SCHEMA[sec]
            if key not in known:
                line = _line_of(text, key)
                where = f" (line {line})" if line else ""
                hint = f"; did you mean section [{KEY_SECTION[key]}]?" if key in KEY_SECTION else ""
                raise ConfigError(f"{source}: unknown key '{key}'{where}{hint}")
            values[key] = (raw, _line_of(text, key))
    for name, raw in (env if env is not None else os.environ).items():
        if name.startswith(ENV_PREFIX):
            key = name[len(ENV_PREFIX):].lower()
            if key not in KEY_SECTION:
                raise ConfigError(f"unknown environment override {name}")
            values[key] = (raw, None)
    resolved = {}
    for key, (raw, line) in values.items():
        parse, _ = SCHEMA[KEY_SECTION[key]][key]
        try:
            resolved[key] = parse(raw.strip())
        except ValueError as exc:
            where = f"line {line}" if line else "environment"
            raise ConfigError(f"{source}: bad value for '{key}' ({where}): {raw!r}: {exc}") from None
    cfg = RunConfig(**resolved)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    if len(cfg.lower) != 3 or len(cfg.upper) != 3:
        raise ConfigError("lower and upper need three values (beta, theta, v0)")
    if cfg.configuration not in ("separated", "merged"):
        raise ConfigError(f"configuration must be separated or merged, got {cfg.configuration!r}")
    if cfg.mode not in ("eigen", "propagate"):
        raise ConfigError(f"mode must be eigen or propagate, got {cfg.mode!r}")
    if cfg.seeds < 1 or cfg.workers < 1:
        raise ConfigError("seeds and workers must be positive")
    if not cfg.durations or any(t <= 0 for t in cfg.durations):
        raise ConfigError("durations must be positive")


def load_config(path=None, env: dict | None = None) -> RunConfig:
    """Read ``path`` (or only defaults and environment when ``None``)."""
    if path is None:
        return parse_config("", env)
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc.strerror}") from None
    return parse_config(text, env, str(p))


CONFIG_FIELDS = tuple(f.name for f in fields(RunConfig))
