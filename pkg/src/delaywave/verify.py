"""Checks of candidate pairs against the wave differential inequalities."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import jsonio
from .iterate import CandidatePair
from .kernel import KernelParams
from .system import SystemSpec

__all__ = ["ConfigurationError", "VerificationReport", "LimitReport", "HStarReport",
           "verify_pair", "check_limits", "check_hstar", "margins"]


class ConfigurationError(ValueError):
    """A requested verification mode is not available for the input."""


@dataclass
class LimitReport:
    mode: str
    passed: bool
    left_gaps: list
    right_gaps: list
    lower_nontrivial: bool = True
    upper_nontrivial: bool = True
    ordered: bool = True
    tol_lim: float = 1e-3

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class VerificationReport:
    """Minimum margins per inequality (``>= 0`` satisfied) with their locations."""

    mode: str
    deriv: str
    upper_margins: list
    upper_argmin: list
    lower_margins: list
    lower_argmin: list
    tol_margin: float
    ordering_gap: float
    ordering_ok: bool
    box_ok: bool
    limits: LimitReport
    lower_nontrivial: bool
    upper_nontrivial: bool
    skipped_nodes: list = field(default_factory=list)
    node_t: np.ndarray | None = None
    node_upper: np.ndarray | None = None
    node_lower: np.ndarray | None = None

    @property
    def inequalities_ok(self) -> bool:
        return min(self.upper_margins + self.lower_margins) >= -self.tol_margin

    @property
    def min_margin(self) -> float:
        return float(min(self.upper_margins + self.lower_margins))

    @property
    def passed(self) -> bool:
        return self.inequalities_ok and self.ordering_ok and self.box_ok and self.limits.passed

    def to_dict(self) -> dict:
        return {"passed": self.passed, "mode": self.mode, "deriv": self.deriv,
                "inequalities_ok": self.inequalities_ok, "tol_margin": self.tol_margin,
                "upper_margins": self.upper_margins, "upper_argmin": self.upper_argmin,
                "lower_margins": self.lower_margins, "lower_argmin": self.lower_argmin,
                "ordering_gap": self.ordering_gap, "ordering_ok": self.ordering_ok,
                "box_ok": self.box_ok, "limits": self.limits.to_dict(),
                "lower_nontrivial": self.lower_nontrivial,
                "upper_nontrivial": self.upper_nontrivial,
                "skipped_nodes": self.skipped_nodes}

    def to_json(self, path) -> Path:
        return jsonio.write(path, self.to_dict())

    def margins_csv(self, path) -> Path:
        """Per-node margins ``t, upper_1.., lower_1..`` (NaN at skipped nodes)."""
        path = Path(path)
        n = self.node_upper.shape[1]
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + [f"upper_{i + 1}" for i in range(n)]
                       + [f"lower_{i + 1}" for i in range(n)])
            for t, mu, ml in zip(self.node_t, self.node_upper, self.node_lower):
                w.writerow([f"{t:.17g}"] + [f"{x:.17g}" for x in mu]
                           + [f"{x:.17g}" for x in ml])
        return path


def _fd_derivatives(v: np.ndarray, h: float, skip: np.ndarray):
    """Central differences, one-sided next to skipped nodes; NaN where undefined."""
    m = v.shape[0]
    d1 = np.full_like(v, np.nan)
    d2 = np.full_like(v, np.nan)
    d1[1:-1] = (v[2:] - v[:-2]) / (2 * h)
    d2[1:-1] = (v[2:] - 2 * v[1:-1] + v[:-2]) / h**2
    for j0 in np.flatnonzero(skip):
        d1[j0] = d2[j0] = np.nan
        j = j0 - 1
        if j - 3 >= 0:
            d1[j] = (3 * v[j] - 4 * v[j - 1] + v[j - 2]) / (2 * h)
            d2[j] = (2 * v[j] - 5 * v[j - 1] + 4 * v[j - 2] - v[j - 3]) / h**2
        elif j >= 0:
            d1[j] = d2[j] = np.nan
        j = j0 + 1
        if j + 3 < m:
            d1[j] = (-3 * v[j] + 4 * v[j + 1] - v[j + 2]) / (2 * h)
            d2[j] = (2 * v[j] - 5 * v[j + 1] + 4 * v[j + 2] - v[j + 3]) / h**2
        elif j < m:
            d1[j] = d2[j] = np.nan
    return d1, d2


def _skip_mask(t: np.ndarray, kinks, h: float) -> np.ndarray:
    skip = np.zeros(t.size, dtype=bool)
    for k in kinks:
        if t[0] - h <= k <= t[-1] + h:
            skip[int(np.argmin(np.abs(t - k)))] = True
    return skip


def margins(spec: SystemSpec, params: KernelParams, pair: CandidatePair,
            mode: str = "ordered", deriv: str = "analytic"):
    """Per-node margins ``(t, upper (m,n), lower (m,n), skipped mask)``.

    Upper margin ``phi' - (d/c^2) phi'' - f``; lower margin is the negative of
    the same expression for the lower profile, so both are ``>= 0`` when the
    inequalities hold.  Nodes nearest a kink are NaN.
    """
    if mode not in ("ordered", "coupled"):
        raise ConfigurationError(f"mode must be 'ordered' or 'coupled', got {mode!r}")
    if deriv not in ("analytic", "finite-difference"):
        raise ConfigurationError(f"deriv must be 'analytic' or 'finite-difference', got {deriv!r}")
    up, lo = pair.upper, pair.lower
    t = up.t
    h = up.h
    taus = spec.delays
    coef = spec.diffusion / params.c**2
    skip = _skip_mask(t, pair.kinks(), h) if pair.smoothness == "quasi" else np.zeros(t.size, bool)
    if deriv == "analytic":
        if not pair.has_analytic:
            raise ConfigurationError("analytic derivatives requested but the pair has no "
                                     "analytic evaluators; use deriv='finite-difference'")
        U, L = pair.upper_fn.values(t), pair.lower_fn.values(t)
        tdel = t[:, None] - taus[None, :]
        Ud = np.stack([pair.upper_fn.values(tdel[:, i])[:, i] for i in range(spec.n)], axis=1)
        Ld = np.stack([pair.lower_fn.values(tdel[:, i])[:, i] for i in range(spec.n)], axis=1)
        U1, U2 = pair.upper_fn.first(t), pair.upper_fn.second(t)
        L1, L2 = pair.lower_fn.first(t), pair.lower_fn.second(t)
    else:
        U, L = up.values, lo.values
        Ud, Ld = up.delayed_nodes(taus), lo.delayed_nodes(taus)
        U1, U2 = _fd_derivatives(U, h, skip)
        L1, L2 = _fd_derivatives(L, h, skip)
    if mode == "coupled":
        fU = spec.f_coupled(U, L, Ud, Ld)
        fL = spec.f_coupled(L, U, Ld, Ud)
    else:
        fU = spec.f(U, Ud)
        fL = spec.f(L, Ld)
    mu = U1 - coef * U2 - fU
    ml = -(L1 - coef * L2 - fL)
    mu[skip] = np.nan
    ml[skip] = np.nan
    return t, mu, ml, skip


def verify_pair(spec: SystemSpec, params: KernelParams, pair: CandidatePair,
                mode: str | None = None, deriv: str = "analytic",
                tol_margin: float | None = None, limit_mode: str = "bracket-nontrivial",
                tol_lim: float = 1e-3, tol_box: float = 1e-9) -> VerificationReport:
    """Evaluate the upper/lower inequalities at every node (kinks excluded)."""
    mode = mode or pair.kind
    t, mu, ml, skip = margins(spec, params, pair, mode, deriv)
    if tol_margin is None:
        if deriv == "analytic":
            tol_margin = 1e-8
        else:
            fsup = float(np.abs(spec.f(pair.upper.values, pair.upper.delayed_nodes(spec.delays))).max())
            tol_margin = 1e-4 * (1 + fsup)
    um, ua, lm, la = [], [], [], []
    for i in range(spec.n):
        for arr, mins, locs in ((mu[:, i], um, ua), (ml[:, i], lm, la)):
            ok = np.isfinite(arr)
            if not ok.any():
                mins.append(float("nan"))
                locs.append(float("nan"))
                continue
            j = np.flatnonzero(ok)[np.argmin(arr[ok])]
            mins.append(float(arr[j]))
            locs.append(float(t[j]))
    gap = pair.ordering_gap()
    lim = check_limits(pair, spec, limit_mode, tol_lim)
    return VerificationReport(
        mode=mode, deriv=deriv, upper_margins=um, upper_argmin=ua, lower_margins=lm,
        lower_argmin=la, tol_margin=float(tol_margin), ordering_gap=gap,
        ordering_ok=gap >= -tol_box, box_ok=pair.in_box(spec.k_state, tol_box), limits=lim,
        lower_nontrivial=lim.lower_nontrivial, upper_nontrivial=lim.upper_nontrivial,
        skipped_nodes=[float(x) for x in t[skip]], node_t=t, node_upper=mu, node_lower=ml)


def _nontrivial(pair: CandidatePair, spec: SystemSpec, tol: float):
    k = spec.k_state
    lower_nt = bool(np.any(np.abs(pair.lower.values - spec.zero_state) > tol))
    upper_nt = bool(np.any(np.abs(pair.upper.values - k) > tol))
    return lower_nt, upper_nt


def check_limits(pair: CandidatePair, spec: SystemSpec, mode: str = "strict-limits",
                 tol_lim: float = 1e-3) -> LimitReport:
    """Boundary behaviour of a pair.

    ``strict-limits``: the upper starts at 0 and the lower ends at K.
    ``bracket-nontrivial``: ``0 <= lower <= upper <= K`` with the lower not
    identically 0 and the upper not identically K.
    """
    k = spec.k_state
    up, lo = pair.upper, pair.lower
    left = [float(x) for x in np.abs(up.values[0])]
    right = [float(x) for x in np.abs(lo.values[-1] - k)]
    lower_nt, upper_nt = _nontrivial(pair, spec, 1e-12)
    ordered = pair.ordering_gap() >= -1e-9 and pair.in_box(k, 1e-9)
    if mode == "strict-limits":
        passed = max(left) <= tol_lim and max(right) <= tol_lim
    elif mode == "bracket-nontrivial":
        passed = ordered and lower_nt and upper_nt
    else:
        raise ConfigurationError(f"unknown limit mode {mode!r}")
    return LimitReport(mode, bool(passed), left, right, lower_nt, upper_nt, bool(ordered), tol_lim)


@dataclass
class HStarReport:
    passed: bool
    flagged: list
    resolution: int
    tol_eq: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def check_hstar(spec: SystemSpec, lattice_resolution: int = 50,
                tol_eq: float = 1e-12) -> HStarReport:
    """Look for interior constant equilibria on a lattice in the open box."""
    if lattice_resolution < 2:
        raise ConfigurationError("lattice_resolution must be >= 2")
    m = lattice_resolution
    axes = [np.arange(1, m) / m * k for k in spec.k_state]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, spec.n)
    fv = spec.f(grid, grid)
    bad = np.all(np.abs(fv) <= tol_eq, axis=1)
    flagged = [[float(x) for x in row] for row in grid[bad]]
    return HStarReport(not flagged, flagged, m, tol_eq)
