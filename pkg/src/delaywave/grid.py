"""Profiles sampled on a uniform grid of the wave variable.

Outside ``[-T, T]`` a profile is the constant value of its asymptote on that
side, so integrals over the tails are available in closed form.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import jsonio

__all__ = ["ProfileGrid", "NormConfig", "eval", "delayed_eval", "norm_rho",
           "sup_norm", "node_times"]

_SNAP = 1e-9


def node_times(T: float, h: float) -> tuple[np.ndarray, float]:
    """Nodes of ``[-T, T]`` with ``N = round(2T/h)`` cells; returns (t, h_adj)."""
    if T <= 0 or h <= 0:
        raise ValueError("T and h must be positive")
    N = max(int(round(2 * T / h)), 1)
    h_adj = 2 * T / N
    t = -T + h_adj * np.arange(N + 1)
    t[-1] = T
    return t, h_adj


@dataclass(frozen=True, eq=False)
class ProfileGrid:
    """An n-component profile on ``[-T, T]`` with constant tails.

    ``values[j, i]`` is component ``i`` at ``t_min + j*h``.
    """

    T: float
    h: float
    values: np.ndarray
    left_asym: np.ndarray
    right_asym: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        n = v.shape[1]
        N = v.shape[0] - 1
        if N < 1:
            raise ValueError("a profile needs at least two nodes")
        if abs(N * self.h - 2 * self.T) > 1e-9 * max(1.0, self.T):
            raise ValueError(f"N*h = {N * self.h!r} does not match 2T = {2 * self.T!r}")
        la = np.broadcast_to(np.asarray(self.left_asym, float), (n,)).copy()
        ra = np.broadcast_to(np.asarray(self.right_asym, float), (n,)).copy()
        if not (np.all(np.isfinite(v)) and np.all(np.isfinite(la)) and np.all(np.isfinite(ra))):
            raise ValueError("profile values must be finite")
        v = v.copy()
        for a in (v, la, ra):
            a.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "left_asym", la)
        object.__setattr__(self, "right_asym", ra)
        object.__setattr__(self, "T", float(self.T))
        object.__setattr__(self, "h", float(self.h))

    @classmethod
    def from_function(cls, func, T: float, h: float, left=None, right=None) -> "ProfileGrid":
        """Sample ``func(t) -> (m, n)`` at the nodes; asymptotes default to end values."""
        t, h_adj = node_times(T, h)
        vals = np.asarray(func(t), dtype=float)
        if vals.ndim == 1:
            vals = vals[:, None]
        left = vals[0] if left is None else left
        right = vals[-1] if right is None else right
        return cls(T, h_adj, vals, left, right)

    @classmethod
    def constant(cls, value, T: float, h: float) -> "ProfileGrid":
        value = np.atleast_1d(np.asarray(value, dtype=float))
        t, h_adj = node_times(T, h)
        vals = np.broadcast_to(value, (t.size, value.size))
        return cls(T, h_adj, vals, value, value)

    @property
    def t_min(self) -> float:
        return -self.T

    @property
    def t_max(self) -> float:
        return self.T

    @property
    def N(self) -> int:
        return self.values.shape[0] - 1

    @property
    def n(self) -> int:
        return self.values.shape[1]

    @property
    def t(self) -> np.ndarray:
        t = -self.T + self.h * np.arange(self.N + 1)
        t[-1] = self.T
        return t

    def with_values(self, values, left=None, right=None) -> "ProfileGrid":
        return ProfileGrid(self.T, self.h, values,
                           self.left_asym if left is None else left,
                           self.right_asym if right is None else right)

    def component(self, i: int) -> "ProfileGrid":
        return ProfileGrid(self.T, self.h, self.values[:, i:i + 1],
                           self.left_asym[i:i + 1], self.right_asym[i:i + 1])

    def same_grid(self, other: "ProfileGrid") -> bool:
        return self.N == other.N and self.T == other.T and self.h == other.h

    def sample(self, t) -> np.ndarray:
        """Evaluate all components at times ``t``; returns shape ``t.shape + (n,)``."""
        t = np.asarray(t, dtype=float)
        x = (t - self.t_min) / self.h
        xr = np.rint(x)
        x = np.where(np.abs(x - xr) < _SNAP, xr, x)
        N = self.N
        j = np.clip(np.floor(x).astype(np.int64), 0, N - 1)
        frac = (x - j)[..., None]
        v = self.values
        out = v[j] + frac * (v[j + 1] - v[j])
        # exact node values (frac == 0 or 1)
        out = np.where(frac == 0.0, v[j], out)
        out = np.where(frac == 1.0, v[np.minimum(j + 1, N)], out)
        out = np.where((x < 0)[..., None], self.left_asym, out)
        out = np.where((x > N)[..., None], self.right_asym, out)
        return out

    def sample_delayed(self, t, taus) -> np.ndarray:
        """Component ``i`` evaluated at ``t - taus[i]``; shape ``(m, n)``."""
        t = np.asarray(t, dtype=float)
        taus = np.asarray(taus, dtype=float)
        out = np.empty(t.shape + (self.n,))
        for i in range(self.n):
            out[..., i] = self.sample(t - taus[i])[..., i]
        return out

    def delayed_nodes(self, taus) -> np.ndarray:
        """Delayed state at every node, ``values[j, i] -> phi_i(t_j - tau_i)``."""
        taus = np.asarray(taus, dtype=float)
        if np.all(taus == 0):
            return self.values
        return self.sample_delayed(self.t, taus)

    def in_box(self, k_state, tol: float = 1e-9) -> bool:
        k = np.asarray(k_state, float)
        allv = np.vstack([self.values, self.left_asym, self.right_asym])
        return bool(np.all(allv >= -tol) and np.all(allv <= k + tol))

    # serialization -------------------------------------------------------
    def to_csv(self, path, digits: int = 17) -> Path:
        """Write ``t,phi_1,...`` rows plus a ``.json`` sidecar with T, h, asymptotes."""
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + [f"phi_{i + 1}" for i in range(self.n)])
            for tj, row in zip(self.t, self.values):
                w.writerow([_fmt(tj, digits)] + [_fmt(x, digits) for x in row])
        side = path.with_suffix(".json")
        jsonio.write(side, {"T": self.T, "h": self.h, "N": self.N, "n": self.n,
                            "left_asym": self.left_asym.tolist(),
                            "right_asym": self.right_asym.tolist()})
        return path

    @classmethod
    def from_csv(cls, path) -> "ProfileGrid":
        path = Path(path)
        meta = json.loads(path.with_suffix(".json").read_text())
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(meta["T"], meta["h"], data[:, 1:], meta["left_asym"], meta["right_asym"])


def _fmt(x: float, digits: int) -> str:
    return f"{x:.{digits}g}"


@dataclass(frozen=True)
class NormConfig:
    rho: float

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError("rho must be positive")


def eval(profile: ProfileGrid, component: int, t: float) -> float:  # noqa: A001
    """Value of one component at ``t`` (tails are constant, linear in between)."""
    if not 0 <= component < profile.n:
        raise IndexError(f"component {component} out of range for n={profile.n}")
    return float(profile.sample(np.asarray(t, dtype=float))[..., component])


def delayed_eval(profile: ProfileGrid, component: int, t: float, tau: float) -> float:
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    return eval(profile, component, t - tau)


def norm_rho(profile: ProfileGrid, cfg: NormConfig) -> float:
    """Weighted sup norm ``sup |phi(t)| exp(-rho |t|)`` including the tails."""
    w = np.exp(-cfg.rho * np.abs(profile.t))
    inner = float((np.abs(profile.values) * w[:, None]).max())
    tail = max(float(np.abs(profile.left_asym).max()),
               float(np.abs(profile.right_asym).max())) * np.exp(-cfg.rho * profile.T)
    return max(inner, tail)


def sup_norm(profile: ProfileGrid) -> float:
    return float(np.abs(np.vstack([profile.values, profile.left_asym,
                                   profile.right_asym])).max())
