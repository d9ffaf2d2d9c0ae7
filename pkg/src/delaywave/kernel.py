"""Two-sided exponential Green's kernel and the fixed-point operator F.

For ``phi' - (d/c^2) phi'' + beta phi = g`` the bounded solution is

    phi(t) = scale * ( int_{-inf}^t e^{l1 (t-s)} g(s) ds + int_t^{inf} e^{l2 (t-s)} g(s) ds )

with ``l1 < 0 < l2`` the roots of ``(d/c^2) l^2 - l - beta = 0`` and
``scale = c^2 / (d (l2 - l1))``.  Both one-sided integrals are propagated
cell by cell; on each cell the piecewise-linear forcing is integrated
against the exponential exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.signal import lfilter

from .grid import ProfileGrid
from .system import ParameterError, SystemSpec

__all__ = ["KernelParams", "DomainError", "char_roots", "kernel_params",
           "cell_weights", "apply_green", "green_values", "apply_F", "forcing",
           "exp_multiplier", "slow_decay_rate", "grid_slow_decay_rate"]

_SERIES_CUTOFF = 1e-4


class DomainError(ValueError):
    """Profile lies outside the box where F is defined."""


def char_roots(d: float, c: float, beta: float) -> tuple[float, float]:
    """Negative and positive roots of ``(d/c^2) l^2 - l - beta = 0``."""
    if not d > 0:
        raise ParameterError(f"diffusion d must be positive (got {d})")
    if not c > 0:
        raise ParameterError(f"wave speed c must be positive (got {c})")
    if not beta > 0:
        raise ParameterError(f"beta must be positive (got {beta})")
    a = d / c**2
    s = math.sqrt(1.0 + 4.0 * beta * a)
    l2 = (1.0 + s) / (2.0 * a)
    # l1 from Vieta (l1*l2 = -beta/a) avoids cancellation in 1 - s
    l1 = -beta / (a * l2)
    return l1, l2


@dataclass(frozen=True)
class KernelParams:
    c: float
    diffusion: np.ndarray
    beta: np.ndarray
    lambda1: np.ndarray
    lambda2: np.ndarray

    @property
    def n(self) -> int:
        return len(self.lambda1)

    @property
    def scale(self) -> np.ndarray:
        return self.c**2 / (self.diffusion * (self.lambda2 - self.lambda1))

    @property
    def rho_default(self) -> float:
        """Weight ``0.9 * min_i(-l1_i, l2_i)`` for the weighted norm."""
        return 0.9 * float(min(np.min(-self.lambda1), np.min(self.lambda2)))

    def residuals(self) -> np.ndarray:
        """Relative characteristic residuals, shape (n, 2)."""
        a = self.diffusion / self.c**2
        out = []
        for l in (self.lambda1, self.lambda2):
            r = a * l**2 - l - self.beta
            out.append(np.abs(r) / np.maximum.reduce([np.abs(a * l**2), np.abs(l), self.beta]))
        return np.stack(out, axis=1)

    def component(self, i: int) -> "KernelParams":
        sl = slice(i, i + 1)
        return KernelParams(self.c, self.diffusion[sl], self.beta[sl],
                            self.lambda1[sl], self.lambda2[sl])

    def to_dict(self) -> dict:
        return {"c": self.c, "d": self.diffusion.tolist(), "beta": self.beta.tolist(),
                "lambda1": self.lambda1.tolist(), "lambda2": self.lambda2.tolist(),
                "scale": self.scale.tolist()}


def kernel_params(spec: SystemSpec, c: float) -> KernelParams:
    roots = [char_roots(d, c, b) for d, b in zip(spec.diffusion, spec.lipschitz)]
    l1 = np.array([r[0] for r in roots])
    l2 = np.array([r[1] for r in roots])
    return KernelParams(float(c), spec.diffusion.copy(), spec.lipschitz.copy(), l1, l2)


def cell_weights(lam: float, h: float) -> tuple[float, float, float]:
    """Decay factor and node weights for one cell of the recurrence.

    Returns ``(e^{lam h}, w_near, w_far)`` with
    ``int_0^h e^{lam u} g(u) du = w_near g(0) + w_far g(h)`` for ``g`` linear,
    where ``u`` is the distance from the node being updated.
    """
    z = lam * h
    if abs(z) < _SERIES_CUTOFF:
        i0 = h * (1.0 + z / 2.0 + z * z / 6.0)
        i1 = h * (0.5 + z / 3.0 + z * z / 8.0)
    else:
        em1 = math.expm1(z)
        i0 = h * em1 / z
        i1 = h * (z * math.exp(z) - em1) / (z * z)
    return math.exp(z), i0 - i1, i1


def green_values(lam1: float, lam2: float, scale: float, h: float, g: np.ndarray,
                 g_left: float, g_right: float) -> np.ndarray:
    """Green's operator applied to nodal forcing ``g`` (1-D), values at nodes."""
    g = np.asarray(g, dtype=float)
    a1, near1, far1 = cell_weights(lam1, h)
    L0 = g_left / (-lam1)
    # L[j+1] = a1 L[j] + near1 g[j+1] + far1 g[j]
    if g.size > 1:
        Lrest, _ = lfilter([near1, far1], [1.0, -a1], g[1:],
                           zi=[a1 * L0 + far1 * g[0]])
        L = np.concatenate(([L0], Lrest))
    else:
        L = np.array([L0])
    a2, near2, far2 = cell_weights(-lam2, h)
    RN = g_right / lam2
    gr = g[::-1]
    if g.size > 1:
        Rrest, _ = lfilter([near2, far2], [1.0, -a2], gr[1:],
                           zi=[a2 * RN + far2 * gr[0]])
        R = np.concatenate(([RN], Rrest))[::-1]
    else:
        R = np.array([RN])
    return scale * (L + R)


def exp_multiplier(params: KernelParams, i: int, mu: float, h: float | None = None) -> float:
    """Factor ``m`` with ``G e^{mu t} = m e^{mu t}`` for kernel component ``i``.

    With ``h`` given this is the exact factor of the grid recurrences applied
    to nodal samples of ``e^{mu t}``; otherwise the continuous one,
    ``1/(beta + mu - d mu^2/c^2)``.  Requires ``lambda1 < mu < lambda2``.
    """
    l1 = float(params.lambda1[i])
    l2 = float(params.lambda2[i])
    if not l1 < mu < l2:
        raise ParameterError(f"rate {mu} outside ({l1}, {l2})")
    if h is None:
        d = float(params.diffusion[i])
        return 1.0 / (float(params.beta[i]) + mu - d * mu * mu / params.c**2)
    a1, n1, f1 = cell_weights(l1, h)
    a2, n2, f2 = cell_weights(-l2, h)
    e = math.exp(-mu * h)
    left = (n1 + f1 * e) / (1.0 - a1 * e)
    right = (n2 + f2 / e) / (1.0 - a2 / e)
    return float(params.scale[i]) * (left + right)


def slow_decay_rate(d: float, c: float, a: float) -> float:
    """Smaller root of ``mu - d mu^2/c^2 = a`` (``a > 0``, ``c^2 >= 4 a d``)."""
    disc = 1.0 - 4.0 * a * d / c**2
    if disc < 0:
        raise ParameterError(f"speed c={c} is below 2*sqrt(a*d)={2 * math.sqrt(a * d)}: "
                             "the decay rate is complex")
    # mu = 2a / (1 + sqrt(disc)) avoids cancellation
    return 2.0 * a / (1.0 + math.sqrt(disc))


def grid_slow_decay_rate(params: KernelParams, i: int, a: float, h: float) -> float:
    """Slow decay rate of the linearization ``u' - (d/c^2) u'' = a u`` on the grid.

    This is the root of ``(beta + a) m_h(mu) = 1`` next to the continuous
    slow root, so that a sampled ``e^{mu t}`` is reproduced exactly by the
    discrete operator.  Fronts built on it do not drift under iteration.
    """
    d = float(params.diffusion[i])
    c = params.c
    beta = float(params.beta[i])
    mu0 = slow_decay_rate(d, c, a)
    top = c**2 / (2.0 * d)

    def gap(mu):
        return (beta + a) * exp_multiplier(params, i, mu, h) - 1.0

    if gap(mu0) <= 0.0:
        return mu0
    if gap(top) >= 0.0:
        raise ParameterError(f"grid step h={h} too coarse to resolve the decay rate near {mu0}")
    return float(brentq(gap, mu0, top, xtol=1e-15, rtol=1e-15))


def apply_green(params: KernelParams, forcing_profile: ProfileGrid,
                component: int = 0) -> ProfileGrid:
    """Apply the kernel of ``params`` component ``component`` to a one-component forcing."""
    g = forcing_profile.values[:, 0]
    l1 = float(params.lambda1[component])
    l2 = float(params.lambda2[component])
    beta = float(params.beta[component])
    sc = float(params.scale[component])
    gl = float(forcing_profile.left_asym[0])
    gr = float(forcing_profile.right_asym[0])
    out = green_values(l1, l2, sc, forcing_profile.h, g, gl, gr)
    return forcing_profile.with_values(out[:, None], [gl / beta], [gr / beta])


def forcing(spec: SystemSpec, phi: ProfileGrid, other: ProfileGrid | None = None):
    """Nodal forcing ``beta*phi + f(...)`` and its two asymptotic values.

    With ``other`` given, cross arguments in the decreasing sets are taken
    from ``other`` (the coupled evaluation of a sweep).
    """
    beta = spec.lipschitz
    taus = spec.delays
    pd = phi.delayed_nodes(taus)
    if other is None:
        f_nodes = spec.f(phi.values, pd)
        f_left = spec.f(phi.left_asym, phi.left_asym)
        f_right = spec.f(phi.right_asym, phi.right_asym)
    else:
        od = other.delayed_nodes(taus)
        f_nodes = spec.f_coupled(phi.values, other.values, pd, od)
        f_left = spec.f_coupled(phi.left_asym[None], other.left_asym[None],
                                phi.left_asym[None], other.left_asym[None])[0]
        f_right = spec.f_coupled(phi.right_asym[None], other.right_asym[None],
                                 phi.right_asym[None], other.right_asym[None])[0]
    g = f_nodes + beta * phi.values
    return g, f_left + beta * phi.left_asym, f_right + beta * phi.right_asym


def _green_all(params: KernelParams, h: float, g, g_left, g_right) -> np.ndarray:
    out = np.empty_like(g)
    for i in range(g.shape[1]):
        out[:, i] = green_values(float(params.lambda1[i]), float(params.lambda2[i]),
                                 float(params.scale[i]), h, g[:, i],
                                 float(g_left[i]), float(g_right[i]))
    return out


def apply_F(spec: SystemSpec, params: KernelParams, phi: ProfileGrid,
            other: ProfileGrid | None = None, tol_box: float = 1e-9,
            check_box: bool = True) -> ProfileGrid:
    """The fixed-point operator on one profile (or a coupled sweep half with ``other``)."""
    if check_box and not phi.in_box(spec.k_state, tol_box):
        raise DomainError("profile leaves the box [0, K]; F is only defined inside it")
    g, gl, gr = forcing(spec, phi, other)
    out = _green_all(params, phi.h, g, gl, gr)
    return phi.with_values(out, gl / params.beta, gr / params.beta)
