"""Method-of-lines simulation of the delayed reaction-diffusion system.

Explicit Euler in time, second-order central differences in space and
zero-flux (reflecting) boundaries.  Delayed states come from a ring buffer
of past time levels with linear interpolation in time.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import minimize_scalar

from . import jsonio
from .grid import ProfileGrid
from .system import SystemSpec

__all__ = ["SimConfig", "SpaceTimeRecord", "CrossValidationReport", "SimConfigError",
           "BlowUpError", "DomainTooSmallError", "simulate", "front_position",
           "crossvalidate", "SAFETY"]

SAFETY = 0.4


class SimConfigError(ValueError):
    """Invalid simulation configuration (checked before stepping)."""


class BlowUpError(RuntimeError):
    """The field became non-finite."""


class DomainTooSmallError(RuntimeError):
    """The front left the spatial domain before the end of the run."""


@dataclass(frozen=True)
class SimConfig:
    """Spatial grid, time step and run length.

    ``history`` is a callable ``(x, t) -> (nx, n)`` giving the field for
    ``t`` in ``[-max tau, 0]``; a constant array is also accepted.
    ``dt=None`` picks the largest step allowed by the stability bound.
    """

    x_min: float = 0.0
    x_max: float = 800.0
    nx: int = 8001
    t_end: float = 50.0
    dt: float | None = None
    history: object = None
    record_stride: int | None = None
    record_every: float = 1.0

    @property
    def hx(self) -> float:
        return (self.x_max - self.x_min) / (self.nx - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.nx)

    def max_dt(self, spec: SystemSpec) -> float:
        return SAFETY * self.hx**2 / (2 * float(spec.diffusion.max()))

    def step(self, spec: SystemSpec) -> float:
        if self.dt is None:
            # largest step that divides the recording interval evenly
            dmax = self.max_dt(spec)
            m = math.ceil(self.record_every / dmax)
            return self.record_every / m
        return float(self.dt)


@dataclass
class SpaceTimeRecord:
    x: np.ndarray
    times: list = field(default_factory=list)
    fields: list = field(default_factory=list)

    def to_csv(self, path, layout: str = "long"):
        """Write the record as CSV.

        ``layout='long'``: one file with rows ``t, x, u_1, ..., u_n``.
        ``layout='per-snapshot'``: ``path`` is a directory receiving
        ``snapshot_00000.csv``, ... with rows ``x, u_1, ..., u_n``; the
        snapshot times go to ``times.csv``.  Returns the written path(s).
        """
        path = Path(path)
        n = self.fields[0].shape[1] if self.fields else 0
        comps = [f"u_{i + 1}" for i in range(n)]
        if layout == "long":
            with path.open("w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["t", "x"] + comps)
                for t, u in zip(self.times, self.fields):
                    for xj, row in zip(self.x, u):
                        w.writerow([f"{t:.17g}", f"{xj:.17g}"] + [f"{v:.17g}" for v in row])
            return path
        if layout != "per-snapshot":
            raise SimConfigError(f"unknown CSV layout {layout!r}")
        path.mkdir(parents=True, exist_ok=True)
        out = []
        for k, u in enumerate(self.fields):
            p = path / f"snapshot_{k:05d}.csv"
            with p.open("w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["x"] + comps)
                for xj, row in zip(self.x, u):
                    w.writerow([f"{xj:.17g}"] + [f"{v:.17g}" for v in row])
            out.append(p)
        with (path / "times.csv").open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["snapshot", "t"])
            for k, t in enumerate(self.times):
                w.writerow([k, f"{t:.17g}"])
        return out


def _laplacian(u: np.ndarray, hx: float) -> np.ndarray:
    lap = np.empty_like(u)
    lap[1:-1] = u[2:] - 2 * u[1:-1] + u[:-2]
    # zero flux through mirrored ghost nodes
    lap[0] = 2 * (u[1] - u[0])
    lap[-1] = 2 * (u[-2] - u[-1])
    return lap / hx**2


def _history_fn(cfg: SimConfig, n: int):
    h = cfg.history
    if h is None:
        raise SimConfigError("history is required")
    if callable(h):
        return h
    arr = np.asarray(h, dtype=float)

    def const(x, t):
        return np.broadcast_to(arr, (x.size, n)).copy()
    return const


def simulate(spec: SystemSpec, cfg: SimConfig, reaction_off: bool = False) -> SpaceTimeRecord:
    """Integrate ``u_t = D u_xx + f(u, u(t - tau))`` from the given history."""
    if cfg.nx < 3:
        raise SimConfigError("nx must be >= 3")
    if not cfg.x_max > cfg.x_min:
        raise SimConfigError("x_max must exceed x_min")
    dt = cfg.step(spec)
    if not 0 < dt <= cfg.max_dt(spec) * (1 + 1e-12):
        raise SimConfigError(
            f"dt={dt:.6g} violates the stability bound {cfg.max_dt(spec):.6g} "
            f"(= {SAFETY} hx^2 / (2 max d))")
    tau_max = spec.max_delay
    if not cfg.t_end > tau_max:
        raise SimConfigError(f"t_end={cfg.t_end} must exceed the largest delay {tau_max}")
    n = spec.n
    x = cfg.x
    hx = cfg.hx
    stride = cfg.record_stride or max(1, int(round(cfg.record_every / dt)))
    hist_fn = _history_fn(cfg, n)

    # ring buffer: level m holds the field at time k_m * dt
    lag = [spec.delays[i] / dt for i in range(n)]
    size = int(math.ceil(tau_max / dt)) + 2
    buf = np.empty((size, cfg.nx, n))
    for m in range(size - 1, -1, -1):
        step_back = m - (size - 1)  # 0 for the newest, negative before
        t = step_back * dt
        buf[m % size] = hist_fn(x, t)
    # index of the time-0 level in the buffer
    head = (size - 1) % size
    u = buf[head].copy()
    rec = SpaceTimeRecord(x)
    rec.times.append(0.0)
    rec.fields.append(u.copy())
    steps = int(round(cfg.t_end / dt))
    D = spec.diffusion
    cols = np.arange(n)
    for k in range(steps):
        # delayed state at time k*dt - tau_i
        ud = np.empty_like(u)
        for i in cols:
            s = lag[i]
            lo = int(math.floor(s))
            w = s - lo
            a = buf[(head - lo) % size][:, i]
            if w > 0:
                b = buf[(head - lo - 1) % size][:, i]
                ud[:, i] = (1 - w) * a + w * b
            else:
                ud[:, i] = a
        react = 0.0 if reaction_off else spec.f(u, ud)
        u = u + dt * (D * _laplacian(u, hx) + react)
        if not np.all(np.isfinite(u)):
            raise BlowUpError(f"non-finite field at t={(k + 1) * dt:.6g}")
        head = (head + 1) % size
        buf[head] = u
        if (k + 1) % stride == 0 or k + 1 == steps:
            rec.times.append((k + 1) * dt)
            rec.fields.append(u.copy())
    return rec


def front_position(record: SpaceTimeRecord, component: int = 0, level: float = 0.5) -> list:
    """Leftmost crossing of ``level`` per snapshot (``None`` where absent)."""
    x = record.x
    out = []
    for u in record.fields:
        v = u[:, component] - level
        s = np.flatnonzero(np.signbit(v[:-1]) != np.signbit(v[1:]))
        if s.size == 0:
            out.append(None)
            continue
        j = s[0]
        if v[j] == 0:
            out.append(float(x[j]))
        else:
            out.append(float(x[j] + (x[j + 1] - x[j]) * v[j] / (v[j] - v[j + 1])))
    return out


@dataclass
class CrossValidationReport:
    c: float
    measured_speed: float | None
    speed_deviation: float | None
    shape_drift: float | None
    best_shift: float | None
    front_absent: bool
    x0: float
    dt: float
    snapshots: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    def to_json(self, path) -> Path:
        return jsonio.write(path, self.to_dict())


def crossvalidate(spec: SystemSpec, phi_star: ProfileGrid, c: float, cfg: SimConfig,
                  x0: float | None = None, component: int = 0, level: float | None = None):
    """Seed the simulator with the wave and compare speed and shape.

    The history is ``phi_star(t + (x - x0)/c)``; ``x0`` defaults to three
    quarters across the domain so the left-moving front stays inside.
    Returns ``(report, record)``.
    """
    L = cfg.x_max - cfg.x_min
    x0 = cfg.x_min + 0.75 * L if x0 is None else x0

    def hist(x, t):
        return phi_star.sample(t + (x - x0) / c)

    run = SimConfig(cfg.x_min, cfg.x_max, cfg.nx, cfg.t_end, cfg.dt, hist,
                    cfg.record_stride, cfg.record_every)
    rec = simulate(spec, run)
    lo = 0.5 * (phi_star.left_asym[component] + phi_star.right_asym[component])
    level = lo if level is None else level
    pos = front_position(rec, component, level)
    dt = run.step(spec)
    if all(p is None for p in pos):
        return CrossValidationReport(c, None, None, None, None, True, x0, dt, len(pos)), rec
    if any(p is None for p in pos):
        k = next(i for i, p in enumerate(pos) if p is None)
        raise DomainTooSmallError(
            f"front left the domain at t={rec.times[k]:.6g}; enlarge [x_min, x_max] "
            f"(the front moves left about c*t_end = {c * cfg.t_end:.6g}) or move x0 right")
    edge = 5 * cfg.hx
    if min(pos) < cfg.x_min + edge or max(pos) > cfg.x_max - edge:
        raise DomainTooSmallError("front reached the domain boundary; enlarge the domain")
    slope = np.polyfit(np.asarray(rec.times), np.asarray(pos), 1)[0]
    speed = -float(slope)
    # shape drift: final snapshot against the wave shifted in the wave variable
    x = rec.x
    final = rec.fields[-1]
    xi = (x - x0) / c
    inside = (xi + cfg.t_end >= phi_star.t_min) & (xi + cfg.t_end <= phi_star.t_max)

    def err(s):
        ref = phi_star.sample(xi[inside] + s)
        return float(np.abs(final[inside] - ref).max())

    step = cfg.hx / c
    grid_s = cfg.t_end + step * np.arange(-200, 201)
    errs = [err(s) for s in grid_s]
    j = int(np.argmin(errs))
    res = minimize_scalar(err, bounds=(grid_s[max(j - 1, 0)], grid_s[min(j + 1, len(grid_s) - 1)]),
                          method="bounded", options={"xatol": 1e-10})
    best = min((errs[j], grid_s[j]), (res.fun, res.x))
    return CrossValidationReport(c, speed, abs(speed - c) / c, float(best[0]), float(best[1]),
                                 False, x0, dt, len(pos)), rec
