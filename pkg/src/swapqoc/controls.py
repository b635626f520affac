"""Time-gridded control trajectories {beta(t), theta(t), V0(t)}."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .grid import khz_to_energy

CONTROL_NAMES = ("beta", "theta", "v0")
CSV_HEADER = ("t", "beta", "theta", "v0")


@dataclass(frozen=True)
class ControlScaling:
    """Physical value = scaled value * scale."""

    beta_scale: float = 0.52 * np.pi
    theta_scale: float = -0.474 * np.pi
    v0_scale_khz: float = 122.0

    @property
    def factors(self) -> np.ndarray:
        """Scale factors in internal units (rad, rad, hbar/ms)."""
        return np.array([self.beta_scale, self.theta_scale, float(khz_to_energy(self.v0_scale_khz))])


DEFAULT_SCALING = ControlScaling()
SEPARATED = (0.0, 1.0, 1.0)
MERGED = (1.0, 1.0, 1.0)


def steps_for(duration: float, dt: float) -> int:
    """Number of steps of nominal size ``dt`` that tile ``duration``."""
    if duration <= 0 or dt <= 0:
        raise ValueError("duration and dt must be positive")
    return max(1, int(round(duration / dt)))


@dataclass(eq=False)
class ControlSet:
    """Scaled controls sampled on a uniform time grid ``times`` (ms).

    ``values`` has shape (3, N + 1) in the order beta, theta, v0. The first
    and last columns are the fixed endpoint values.
    """

    times: np.ndarray
    values: np.ndarray
    scaling: ControlScaling = field(default=DEFAULT_SCALING)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.array(self.values, dtype=float)
        if self.values.ndim != 2 or self.values.shape[0] != 3:
            raise ValueError("values must have shape (3, N+1)")
        if self.times.ndim != 1 or self.times.size != self.values.shape[1] or self.times.size < 2:
            raise ValueError("times must be 1D with one entry per control sample (>= 2)")
        steps = np.diff(self.times)
        if np.any(steps <= 0):
            raise ValueError("times must be strictly increasing")
        if not np.allclose(steps, steps.mean(), rtol=1e-7, atol=0):
            raise ValueError("times must be uniformly spaced")

    @classmethod
    def from_functions(cls, duration, dt, beta, theta, v0, scaling=DEFAULT_SCALING):
        n = steps_for(duration, dt)
        t = np.linspace(0.0, duration, n + 1)
        vals = [np.broadcast_to(np.asarray(f(t) if callable(f) else f, dtype=float), t.shape) for f in (beta, theta, v0)]
        return cls(t, np.vstack(vals), scaling)

    @classmethod
    def constant(cls, duration, dt, values=MERGED, scaling=DEFAULT_SCALING):
        return cls.from_functions(duration, dt, *values, scaling=scaling)

    @classmethod
    def linear_ramp(cls, duration, dt, start=SEPARATED, end=MERGED, scaling=DEFAULT_SCALING):
        start = np.asarray(start, dtype=float)
        end = np.asarray(end, dtype=float)
        n = steps_for(duration, dt)
        t = np.linspace(0.0, duration, n + 1)
        s = t / duration
        return cls(t, start[:, None] + (end - start)[:, None] * s[None, :], scaling)

    @property
    def beta(self) -> np.ndarray:
        return self.values[0]

    @property
    def theta(self) -> np.ndarray:
        return self.values[1]

    @property
    def v0(self) -> np.ndarray:
        return self.values[2]

    @property
    def n_steps(self) -> int:
        return self.times.size - 1

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0])

    @property
    def dt(self) -> float:
        return self.duration / self.n_steps

    @property
    def start(self) -> np.ndarray:
        return self.values[:, 0].copy()

    @property
    def end(self) -> np.ndarray:
        return self.values[:, -1].copy()

    def physical(self) -> np.ndarray:
        """Controls in physical units, shape (3, N + 1)."""
        return self.values * self.scaling.factors[:, None]

    def step_values(self) -> np.ndarray:
        """Physical controls at step midpoints, shape (3, N)."""
        phys = self.physical()
        return 0.5 * (phys[:, 1:] + phys[:, :-1])

    def physical_at(self, index: int) -> tuple[float, float, float]:
        return tuple(float(v) for v in self.values[:, index] * self.scaling.factors)

    def with_values(self, values) -> "ControlSet":
        return ControlSet(self.times.copy(), values, self.scaling)

    def copy(self) -> "ControlSet":
        return self.with_values(self.values.copy())

    def resample(self, dt: float) -> "ControlSet":
        """Linear interpolation onto a new uniform grid with nominal step ``dt``."""
        n = steps_for(self.duration, dt)
        t = np.linspace(self.times[0], self.times[-1], n + 1)
        # fractional source index j*N/n in exact integer arithmetic, so shared nodes copy exactly
        num = np.arange(n + 1) * self.n_steps
        i0 = np.minimum(num // n, self.n_steps - 1)
        frac = (num - i0 * n) / n
        v = self.values
        vals = np.where(frac == 0.0, v[:, i0], v[:, i0] + frac * (v[:, i0 + 1] - v[:, i0]))
        return ControlSet(t, vals, self.scaling)

    def reversed(self) -> "ControlSet":
        return ControlSet(self.times.copy(), self.values[:, ::-1].copy(), self.scaling)

    def then(self, other: "ControlSet") -> "ControlSet":
        """Concatenate ``other`` after this control (shared node dropped)."""
        if not np.isclose(other.dt, self.dt, rtol=1e-9):
            raise ValueError("cannot concatenate controls with different time steps")
        if not np.allclose(other.values[:, 0], self.values[:, -1], rtol=0, atol=1e-12):
            raise ValueError("controls are discontinuous at the junction")
        n = self.n_steps + other.n_steps
        t = self.times[0] + self.dt * np.arange(n + 1)
        vals = np.hstack([self.values, other.values[:, 1:]])
        return ControlSet(t, vals, self.scaling)

    def hold(self, n_steps: int) -> "ControlSet":
        """Constant control at this control's final value for ``n_steps``."""
        t = self.dt * np.arange(n_steps + 1)
        return ControlSet(t, np.repeat(self.values[:, -1:], n_steps + 1, axis=1), self.scaling)

    def to_csv(self, path=None) -> str:
        """Write ``t,beta,theta,v0`` rows with round-trip float formatting."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for i, t in enumerate(self.times):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in self.values[:, i]])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, source, scaling=DEFAULT_SCALING) -> "ControlSet":
        """Read a control written by :meth:`to_csv` (path or CSV text)."""
        if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source):
            text = Path(source).read_text()
        else:
            text = source
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or tuple(c.strip() for c in rows[0]) != CSV_HEADER:
            raise ValueError(f"control CSV must start with header {','.join(CSV_HEADER)}")
        data = np.array([[float(c) for c in r] for r in rows[1:] if r], dtype=float)
        if data.ndim != 2 or data.shape[1] != 4:
            raise ValueError("control CSV rows must have four columns")
        return cls(data[:, 0], data[:, 1:].T, scaling)

    def __repr__(self):
        return f"ControlSet(T={self.duration:.6g} ms, steps={self.n_steps}, dt={self.dt:.3g} ms)"


def concatenate(*parts: ControlSet) -> ControlSet:
    out = parts[0]
    for p in parts[1:]:
        out = out.then(p)
    return out


def with_scaling(controls: ControlSet, scaling: ControlScaling) -> ControlSet:
    return replace(controls, scaling=scaling)
