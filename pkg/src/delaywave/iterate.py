"""Coupled upper/lower sweeps, fixed-point iteration and ODE residuals."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import jsonio
from .grid import NormConfig, ProfileGrid, norm_rho
from .kernel import KernelParams, apply_F
from .system import ParameterError, SystemSpec

__all__ = ["CandidatePair", "IterationReport", "IterationIntegrityError", "coupled_sweep",
           "smooth_pair", "solve_wave", "ode_residual", "fixed_point_residual"]

INTEGRITY_TOL = 1e-6
SANDWICH_TOL = 1e-9


class IterationIntegrityError(RuntimeError):
    """A sweep broke the ordering chain by more than the integrity tolerance."""


@dataclass(frozen=True, eq=False)
class CandidatePair:
    """An upper/lower profile pair on a common grid.

    ``upper_fn``/``lower_fn`` optionally carry analytic evaluators with
    ``values(t)``, ``first(t)``, ``second(t)`` (each returning ``(m, n)``)
    and ``kinks`` (per-component tuples of kink locations).
    """

    upper: ProfileGrid
    lower: ProfileGrid
    kind: str = "ordered"
    smoothness: str = "classical"
    upper_fn: object = None
    lower_fn: object = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("ordered", "coupled"):
            raise ParameterError(f"kind must be 'ordered' or 'coupled', got {self.kind!r}")
        if self.smoothness not in ("classical", "quasi"):
            raise ParameterError(f"smoothness must be 'classical' or 'quasi', got {self.smoothness!r}")
        if not self.upper.same_grid(self.lower) or self.upper.n != self.lower.n:
            raise ParameterError("upper and lower profiles must share a grid")

    @property
    def has_analytic(self) -> bool:
        return self.upper_fn is not None and self.lower_fn is not None

    def ordering_gap(self) -> float:
        """Most negative value of ``upper - lower`` over nodes and tails (>= 0 when ordered)."""
        u, l = self.upper, self.lower
        d = np.vstack([u.values - l.values, u.left_asym - l.left_asym,
                       u.right_asym - l.right_asym])
        return float(d.min())

    def in_box(self, k_state, tol: float = 1e-9) -> bool:
        return self.upper.in_box(k_state, tol) and self.lower.in_box(k_state, tol)

    def midpoint(self) -> ProfileGrid:
        u, l = self.upper, self.lower
        return u.with_values(0.5 * (u.values + l.values), 0.5 * (u.left_asym + l.left_asym),
                             0.5 * (u.right_asym + l.right_asym))

    def kinks(self) -> tuple[float, ...]:
        """All kink locations of the analytic evaluators (0 when none are attached)."""
        if not self.has_analytic:
            return (0.0,) if self.smoothness == "quasi" else ()
        ks = set()
        for fn in (self.upper_fn, self.lower_fn):
            for comp in fn.kinks:
                ks.update(comp)
        return tuple(sorted(ks))

    def resample(self, T: float, h: float) -> "CandidatePair":
        """The same analytic candidates sampled on another grid."""
        if not self.has_analytic:
            raise ParameterError("resampling needs analytic evaluators")
        up = ProfileGrid.from_function(self.upper_fn.values, T, h,
                                       self.upper.left_asym, self.upper.right_asym)
        lo = ProfileGrid.from_function(self.lower_fn.values, T, h,
                                       self.lower.left_asym, self.lower.right_asym)
        return replace(self, upper=up, lower=lo)


@dataclass
class IterationReport:
    iterations: int = 0
    sup_deltas: list = field(default_factory=list)
    rho_deltas: list = field(default_factory=list)
    gap_history: list = field(default_factory=list)
    sandwich_violations: list = field(default_factory=list)
    residual_history: list = field(default_factory=list)
    fixed_point_residual: float = float("nan")
    converged: bool = False
    phase: str = "sweep"
    rho: float = float("nan")

    def to_dict(self) -> dict:
        return {"iterations": self.iterations, "converged": self.converged,
                "phase": self.phase, "rho": self.rho,
                "fixed_point_residual": self.fixed_point_residual,
                "sup_deltas": list(self.sup_deltas), "rho_deltas": list(self.rho_deltas),
                "gap_history": list(self.gap_history),
                "sandwich_violations": list(self.sandwich_violations),
                "residual_history": list(self.residual_history)}

    def to_json(self, path) -> Path:
        return jsonio.write(path, self.to_dict())

    def trace_csv(self, path) -> Path:
        """Per-iteration ``iteration, gap, residual`` rows."""
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "gap", "residual"])
            m = max(len(self.gap_history), len(self.residual_history))
            for k in range(m):
                g = self.gap_history[k] if k < len(self.gap_history) else ""
                r = self.residual_history[k] if k < len(self.residual_history) else ""
                w.writerow([k + 1, _fmt(g), _fmt(r)])
        return path


def _fmt(x):
    return x if x == "" else f"{x:.17g}"


def _sup(a: ProfileGrid, b: ProfileGrid) -> float:
    return float(np.abs(np.vstack([a.values - b.values, a.left_asym - b.left_asym,
                                   a.right_asym - b.right_asym])).max())


def _diff(a: ProfileGrid, b: ProfileGrid) -> ProfileGrid:
    return a.with_values(a.values - b.values, a.left_asym - b.left_asym,
                         a.right_asym - b.right_asym)


def _min_diff(a: ProfileGrid, b: ProfileGrid) -> float:
    """Most negative entry of ``a - b`` (including tails)."""
    return float(np.vstack([a.values - b.values, a.left_asym - b.left_asym,
                            a.right_asym - b.right_asym]).min())


def sweep_violation(old: CandidatePair, new: CandidatePair) -> float:
    """Worst signed violation of ``old_lower <= new_lower <= new_upper <= old_upper``.

    Returns a value <= 0; 0 means the chain holds exactly.
    """
    return min(0.0, _min_diff(new.lower, old.lower), _min_diff(new.upper, new.lower),
               _min_diff(old.upper, new.upper))


def coupled_sweep(spec: SystemSpec, params: KernelParams, pair: CandidatePair,
                  tol_box: float = 1e-9) -> CandidatePair:
    """One coupled upper/lower sweep.

    In the coupled case the decreasing-set arguments of the upper come from
    the lower profile and vice versa; in the ordered case each profile sees
    only itself.
    """
    if not pair.in_box(spec.k_state, tol_box):
        raise ParameterError("candidate pair leaves the box [0, K]")
    if pair.ordering_gap() < -tol_box:
        raise ParameterError("candidate pair is not ordered (lower > upper somewhere)")
    if pair.kind == "coupled" and not spec.split.is_ordered:
        up = apply_F(spec, params, pair.upper, other=pair.lower, tol_box=tol_box)
        lo = apply_F(spec, params, pair.lower, other=pair.upper, tol_box=tol_box)
    else:
        up = apply_F(spec, params, pair.upper, tol_box=tol_box)
        lo = apply_F(spec, params, pair.lower, tol_box=tol_box)
    new = replace(pair, upper=up, lower=lo, smoothness="classical",
                  upper_fn=None, lower_fn=None)
    v = sweep_violation(pair, new)
    if v < -INTEGRITY_TOL:
        raise IterationIntegrityError(
            f"sweep broke the ordering chain by {-v:.3e} (> {INTEGRITY_TOL}); "
            "check the Lipschitz constants and the candidate pair")
    return new


def smooth_pair(spec: SystemSpec, params: KernelParams, pair: CandidatePair) -> CandidatePair:
    """Turn a quasi (C^1) pair into a classical one with a single sweep."""
    if pair.smoothness != "quasi":
        raise ParameterError("smooth_pair expects a quasi pair")
    return coupled_sweep(spec, params, pair)


def fixed_point_residual(spec: SystemSpec, params: KernelParams, phi: ProfileGrid) -> float:
    """``||F(phi) - phi||`` in the sup norm."""
    return _sup(apply_F(spec, params, phi, check_box=False), phi)


def solve_wave(spec: SystemSpec, params: KernelParams, pair: CandidatePair,
               tol: float = 1e-6, max_iter: int = 500, omega: float = 0.5,
               stagnation_window: int = 10, stagnation_rel: float = 1e-3,
               rho: float | None = None) -> tuple[ProfileGrid, IterationReport]:
    """Iterate sweeps to a wave profile.

    Stops when the bracket closes (midpoint returned) or, in the ordered
    case, when a monotone sequence has settled (``||F(phi) - phi|| <= tol``
    for the upper or lower iterate).  If the gap stagnates first, damped
    Picard iteration with clamping to the live bracket takes over.
    ``max_iter`` bounds the total count of operator applications rounds.
    """
    if not tol > 0:
        raise ParameterError("tol must be positive")
    if max_iter < 1:
        raise ParameterError("max_iter must be >= 1")
    if not 0 < omega <= 1:
        raise ParameterError("omega must lie in (0, 1]")
    rho = params.rho_default if rho is None else rho
    ncfg = NormConfig(rho)
    rep = IterationReport(rho=rho)
    ordered = pair.kind == "ordered" or spec.split.is_ordered

    cur = pair
    best = (float("inf"), pair.midpoint())
    k = 0
    while k < max_iter:
        new = coupled_sweep(spec, params, cur)
        k += 1
        rep.iterations = k
        du = _diff(new.upper, cur.upper)
        dl = _diff(new.lower, cur.lower)
        rep.sup_deltas.append(max(_sup(new.upper, cur.upper), _sup(new.lower, cur.lower)))
        rep.rho_deltas.append(max(norm_rho(du, ncfg), norm_rho(dl, ncfg)))
        gap = _sup(new.upper, new.lower)
        rep.gap_history.append(gap)
        rep.sandwich_violations.append(sweep_violation(cur, new))
        res_up = _sup(new.upper, cur.upper)
        res_lo = _sup(new.lower, cur.lower)
        rep.residual_history.append(min(res_up, res_lo))
        cur = new
        if gap <= tol:
            phi = cur.midpoint()
            return _finish(spec, params, phi, rep, tol, "gap")
        if ordered:
            # a monotone sequence whose step is below tol is a fixed point within tol
            for res, prof, name in ((res_up, cur.upper, "upper-limit"),
                                    (res_lo, cur.lower, "lower-limit")):
                if res <= tol:
                    r = fixed_point_residual(spec, params, prof)
                    if r <= tol:
                        rep.fixed_point_residual = r
                        rep.converged = True
                        rep.phase = name
                        return prof, rep
                if res < best[0]:
                    best = (res, prof)
        # monotone sequences of the ordered case always converge, so only the
        # coupled case falls back to Picard
        if not ordered and _stagnated(rep.gap_history, stagnation_window, stagnation_rel):
            break

    if k >= max_iter:
        phi = best[1] if ordered else cur.midpoint()
        return _finish(spec, params, phi, rep, tol, "sweep")

    # damped Picard from the midpoint, clamped to the live bracket
    lo_v, up_v = cur.lower.values, cur.upper.values
    phi = cur.midpoint()
    rep.phase = "picard"
    while k < max_iter:
        F = apply_F(spec, params, phi, check_box=False)
        r = _sup(F, phi)
        rep.residual_history.append(r)
        if r <= tol:
            rep.fixed_point_residual = r
            rep.converged = True
            return phi, rep
        newv = (1 - omega) * phi.values + omega * np.clip(F.values, lo_v, up_v)
        new = phi.with_values(newv, (1 - omega) * phi.left_asym + omega * F.left_asym,
                              (1 - omega) * phi.right_asym + omega * F.right_asym)
        rep.sup_deltas.append(_sup(new, phi))
        rep.rho_deltas.append(norm_rho(_diff(new, phi), ncfg))
        phi = new
        k += 1
        rep.iterations = k
    return _finish(spec, params, phi, rep, tol, "picard")


def _finish(spec, params, phi, rep, tol, phase):
    rep.fixed_point_residual = fixed_point_residual(spec, params, phi)
    rep.converged = rep.fixed_point_residual <= tol
    rep.phase = phase
    return phi, rep


def _stagnated(gaps: list, window: int, rel: float) -> bool:
    if len(gaps) <= window:
        return False
    old, new = gaps[-window - 1], gaps[-1]
    return old > 0 and (old - new) / old < rel


def ode_residual(spec: SystemSpec, params: KernelParams, phi: ProfileGrid) -> np.ndarray:
    """Wave-equation residual at interior nodes, shape ``(N-1, n)``.

    ``phi' - (d/c^2) phi'' - f(phi, phi_tau)`` with central differences.
    """
    if phi.N < 2:
        raise ParameterError("ode_residual needs at least 3 nodes")
    v = phi.values
    h = phi.h
    d1 = (v[2:] - v[:-2]) / (2 * h)
    d2 = (v[2:] - 2 * v[1:-1] + v[:-2]) / h**2
    fv = spec.f(v, phi.delayed_nodes(spec.delays))[1:-1]
    return d1 - (spec.diffusion / params.c**2) * d2 - fv
