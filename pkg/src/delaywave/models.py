"""Built-in delayed systems and explicit candidate pairs.

Two models are provided: a delayed Belousov-Zhabotinskii system (as given
and after the change of variable ``w = 1 - v``) and a mutualistic
Lotka-Volterra system.  Each builder returns ``(spec, pair, kernel)``.

Two candidate families are available:

``published``
    symmetric exponential kinks ``K/2 e^{l t}`` / ``K - K/2 e^{-l t}`` for the
    upper and ``dk e^{l3 t}`` / ``k - dk e^{-l3 t}`` for the lower, with the
    rates chosen by the published recipe.
``corrected`` (default)
    upper kinks with separate left and right rates, the left rate tied to
    the slow decay of the linearization at 0 (on the grid when a step is
    given), and a smooth lower that levels off at its maximum.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np

from .grid import ProfileGrid
from .iterate import CandidatePair
from .kernel import KernelParams, grid_slow_decay_rate, kernel_params, slow_decay_rate
from .system import ParameterError, QuasimonotoneSplit, SystemSpec

__all__ = ["BZParams", "LVParams", "CandidateParams", "EquilibriumError",
           "SubcriticalSpeedError", "PiecewiseExp", "ProfileFunctions", "bz_build",
           "lv_build", "critical_speed", "bz_reaction", "lv_reaction", "bz_spec",
           "lv_spec", "lv_equilibrium", "bz_published_rate", "MODEL_IDS", "build_model"]

MODEL_IDS = ("bz-literal", "bz-transformed", "lv-mutualistic")
# largest lower-candidate value at -T that the constant tail can absorb
LEFT_EDGE_TOL = 1e-14


class SubcriticalSpeedError(ParameterError):
    """The wave speed is at or below the construction threshold."""


class EquilibriumError(ParameterError):
    """The coexistence equilibrium is not positive."""


# ---------------------------------------------------------------------------
# analytic candidate profiles


@dataclass(frozen=True)
class PiecewiseExp:
    """``const + sum coef*e^{rate t}`` on each side of a kink at ``t0``.

    ``left``/``right`` are tuples of ``(coef, rate)`` pairs; the left branch
    is used for ``t <= t0``.
    """

    left_const: float = 0.0
    left: tuple = ()
    right_const: float = 0.0
    right: tuple = ()
    t0: float = 0.0

    def _eval(self, t, order):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        lm = t <= self.t0
        tl = np.where(lm, t, self.t0)
        tr = np.where(lm, self.t0, t)
        for const, terms, tt, mask in ((self.left_const, self.left, tl, lm),
                                       (self.right_const, self.right, tr, ~lm)):
            part = np.full_like(t, const if order == 0 else 0.0)
            for coef, rate in terms:
                part = part + coef * rate**order * np.exp(rate * tt)
            out = np.where(mask, part, out)
        return out

    def value(self, t):
        return self._eval(t, 0)

    def first(self, t):
        return self._eval(t, 1)

    def second(self, t):
        return self._eval(t, 2)

    def jumps(self) -> tuple[float, float, float]:
        """Jumps of value, first and second derivative across the kink."""
        out = []
        for order in range(3):
            lval = sum(c * r**order * math.exp(r * self.t0) for c, r in self.left)
            rval = sum(c * r**order * math.exp(r * self.t0) for c, r in self.right)
            if order == 0:
                lval += self.left_const
                rval += self.right_const
            out.append(rval - lval)
        return tuple(out)

    @classmethod
    def constant(cls, value: float) -> "PiecewiseExp":
        return cls(value, (), value, ())


@dataclass(frozen=True)
class ProfileFunctions:
    """Analytic evaluators for an n-component candidate."""

    parts: tuple

    @property
    def n(self) -> int:
        return len(self.parts)

    def _stack(self, t, name):
        t = np.asarray(t, dtype=float)
        return np.stack([getattr(p, name)(t) for p in self.parts], axis=-1)

    def values(self, t):
        return self._stack(t, "value")

    def first(self, t):
        return self._stack(t, "first")

    def second(self, t):
        return self._stack(t, "second")

    @property
    def kinks(self) -> tuple:
        return tuple(() if (not p.left and not p.right and p.left_const == p.right_const)
                     else (p.t0,) for p in self.parts)


def _sym_kink(K: float, lam: float, t0: float = 0.0) -> PiecewiseExp:
    """``K/2 e^{lam (t-t0)}`` then ``K - K/2 e^{-lam (t-t0)}``."""
    return _kink(K, lam, lam, t0)


def _kink(K: float, mu: float, nu: float, t0: float = 0.0) -> PiecewiseExp:
    """C^1 kink: ``K A e^{mu s}`` (s <= 0), ``K (1 - B e^{-nu s})`` (s > 0), ``s = t - t0``.

    ``A = nu/(mu+nu)``, ``B = mu/(mu+nu)`` match value and slope at the kink.
    """
    A = nu / (mu + nu)
    B = mu / (mu + nu)
    return PiecewiseExp(0.0, ((K * A * math.exp(-mu * t0), mu),),
                        K, ((-K * B * math.exp(nu * t0), -nu),), t0)


def _published_lower(k: float, delta: float, lam3: float) -> PiecewiseExp:
    return PiecewiseExp(0.0, ((delta * k, lam3),), k, ((-delta * k, -lam3),), 0.0)


def _cap_lower(k: float, mu: float, eta: float) -> PiecewiseExp:
    """``k (e^{mu t} - q e^{(mu+eta) t})`` up to its maximum at 0, constant after."""
    q = mu / (mu + eta)
    return PiecewiseExp(0.0, ((k, mu), (-k * q, mu + eta)), k * eta / (mu + eta), (), 0.0)


@dataclass(frozen=True)
class CandidateParams:
    """Rates and amplitudes of the published candidate family.

    ``lambda1``/``lambda2`` are the upper rates, ``lambda3`` the lower rate,
    ``delta``/``k`` the lower amplitudes and ``eps1``/``eps2`` the small
    offsets used to pick ``lambda2`` and ``lambda3``.
    """

    lambda1: float
    lambda2: float
    lambda3: float
    delta: float = 1e-2
    k: float = 1e-2
    eps1: float = 1e-3
    eps2: float = 1e-3

    def __post_init__(self):
        for name in ("lambda1", "lambda2", "lambda3", "delta", "k", "eps1", "eps2"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be positive")
        if not self.delta < 1 or not self.k < 1:
            raise ParameterError("delta and k must lie in (0, 1)")


# ---------------------------------------------------------------------------
# Belousov-Zhabotinskii


@dataclass(frozen=True)
class BZParams:
    r: float = 0.5
    b: float = 1.0
    tau1: float = 0.5
    tau2: float = 0.5
    variant: str = "transformed"

    def __post_init__(self):
        if self.variant not in ("literal", "transformed"):
            raise ParameterError(f"variant must be 'literal' or 'transformed', got {self.variant!r}")
        if not self.r > 0:
            raise ParameterError("r must be positive")
        if not self.b > 0:
            raise ParameterError("b must be positive")
        if self.tau1 < 0 or self.tau2 < 0:
            raise ParameterError("delays tau1, tau2 must be nonnegative")


def bz_reaction(p: BZParams):
    r, b = p.r, p.b
    if p.variant == "transformed":
        def f(u, ud):
            out = np.empty(np.broadcast_shapes(u.shape, ud.shape))
            out[..., 0] = u[..., 0] * (1 - r - u[..., 0] + r * ud[..., 1])
            out[..., 1] = b * ud[..., 0] * (1 - u[..., 1])
            return out
    else:
        def f(u, ud):
            out = np.empty(np.broadcast_shapes(u.shape, ud.shape))
            out[..., 0] = u[..., 0] * (1 - u[..., 0] - r * ud[..., 1])
            out[..., 1] = -b * ud[..., 0] * u[..., 1]
            return out
    return f


def bz_spec(p: BZParams) -> SystemSpec:
    """The BZ system on ``K = (1, 1)``.

    Lipschitz bounds are the sums of the partial-derivative suprema over the
    unit box: ``1 + 2r`` and ``2b`` in both variants.
    """
    if p.variant == "transformed":
        split = QuasimonotoneSplit.ordered(2)
    else:
        split = QuasimonotoneSplit.from_dec(2, [(), ()], [(1,), (0,)])
    return SystemSpec(2, [1.0, 1.0], [p.tau1, p.tau2], bz_reaction(p), split,
                      [1.0, 1.0], [1 + 2 * p.r, 2 * p.b], name=f"bz-{p.variant}",
                      params=asdict(p))


def bz_published_rate(c: float) -> float:
    """Smaller root of ``l - l^2/c^2 = 1``, i.e. ``c^2 (1 - sqrt(1 - 4/c^2)) / 2``."""
    disc = 1 - 4 / c**2
    if disc < 0:
        raise SubcriticalSpeedError(
            f"c={c} is below the critical speed 2: discriminant 1-4/c^2 = {disc:.6g} < 0, "
            "the decay rate is not real")
    return 2.0 / (1.0 + math.sqrt(disc))


def _check_bz_speed(c: float):
    if not c >= 2:
        bz_published_rate(c)
    if c == 2:
        warnings.warn("c equals the critical speed 2; inequality margins may vanish",
                      stacklevel=3)


def bz_build(p: BZParams, c: float, T: float = 200.0, h: float = 0.05,
             candidate: str = "corrected", cand: CandidateParams | None = None,
             grid_rate: bool = True):
    """System, candidate pair and kernel for the BZ model at speed ``c``.

    ``candidate='corrected'`` builds kinks that satisfy the wave inequalities
    (see module docstring); ``'published'`` reproduces the published choice with
    ``cand`` overriding its small parameters.  With ``grid_rate`` the
    corrected upper decays at the grid-consistent rate for step ``h``.
    """
    _check_bz_speed(c)
    if p.variant == "transformed" and not p.r < 1:
        raise ParameterError(f"r={p.r} must be < 1 for the candidate construction")
    spec = bz_spec(p)
    kp = kernel_params(spec, c)
    grid = ProfileGrid.from_function(lambda t: np.zeros((t.size, 2)), T, h)
    h_adj = grid.h
    kind = "ordered" if p.variant == "transformed" else "coupled"
    if candidate == "published":
        lam1 = bz_published_rate(c)
        cp = cand or CandidateParams(lam1, 1e-3, lam1 - 1e-3)
        up = ProfileFunctions((_sym_kink(1.0, cp.lambda1), _sym_kink(1.0, cp.lambda2)))
        lo = ProfileFunctions((_published_lower(cp.k, cp.delta, cp.lambda3), PiecewiseExp.constant(0.0)))
        meta = {"candidate": "published", **asdict(cp)}
    elif candidate == "corrected":
        up, lo, meta = _bz_corrected(p, c, kp, h_adj if grid_rate else None, T)
    else:
        raise ParameterError(f"unknown candidate family {candidate!r}")
    pair = _make_pair(up, lo, T, h, kind, meta)
    return spec, pair, kp


def _bz_corrected(p: BZParams, c: float, kp: KernelParams, h, T):
    r, b = p.r, p.b
    a = 1 - r   # linear growth rate of u ahead of the front in both variants
    mu_s = slow_decay_rate(1.0, c, a)
    mu = grid_slow_decay_rate(kp, 0, a, h) if h is not None else mu_s
    # right rate: nu + nu^2/c^2 >= 1.05 max(1, b)
    target = 1.05 * max(1.0, b)
    nu = c**2 * (-1 + math.sqrt(1 + 4 * target / c**2)) / 2
    # w is shifted left so its left branch dominates b u_tau
    sigma = 1.1 * max(0.0, math.log(b * math.exp(-mu * p.tau1) / a) / mu) + 0.05
    upper_u = _kink(1.0, mu, nu)
    upper_w = _kink(1.0, mu, nu, -sigma)
    # r w(t - tau2) <= u(t) on t <= 0 keeps the cross term dominated
    ts = np.linspace(-40.0, 0.0, 4001)
    ratio = r * upper_w.value(ts - p.tau2) / upper_u.value(ts)
    if ratio.max() > 1.0:
        raise ParameterError(
            f"no corrected upper for r={r}, b={b}: cross term ratio {ratio.max():.4g} > 1; "
            "the construction needs r*b*exp(-mu*(tau1+tau2)) below about 1-r")
    mu_f = c**2 - mu_s   # fast root of l - l^2/c^2 = a
    eta = min(0.5 * mu_s, 0.5 * (mu_f - mu_s))
    q = mu_s / (mu_s + eta)
    g = (mu_s + eta) - (mu_s + eta)**2 / c**2 - a
    A = nu / (mu + nu)
    k = min(0.5 * q * g, 0.5 * A * math.exp(-(mu - mu_s) * T), 0.5 * a)
    lower_u = _cap_lower(k, mu_s, eta)
    if p.variant == "transformed":
        up = ProfileFunctions((upper_u, upper_w))
        lo = ProfileFunctions((lower_u, PiecewiseExp.constant(0.0)))
    else:
        # v = 1 - w: the lower w bounds the upper v and vice versa
        up = ProfileFunctions((upper_u, PiecewiseExp.constant(1.0)))
        lo = ProfileFunctions((lower_u, _reflect(upper_w)))
    meta = {"candidate": "corrected", "mu_upper": mu, "mu_lower": mu_s, "nu": nu,
            "sigma": sigma, "eta": eta, "k": k, "a": a}
    return up, lo, meta


def _reflect(pe: PiecewiseExp) -> PiecewiseExp:
    """``1 - pe``."""
    return PiecewiseExp(1 - pe.left_const, tuple((-cf, rt) for cf, rt in pe.left),
                        1 - pe.right_const, tuple((-cf, rt) for cf, rt in pe.right), pe.t0)


def _asym(fn: ProfileFunctions):
    ends = fn.values(np.array([-np.inf, np.inf]))
    return ends[0], ends[1]


def _make_pair(up, lo, T, h, kind, meta) -> CandidatePair:
    with np.errstate(over="ignore", invalid="ignore"):
        U = ProfileGrid.from_function(up.values, T, h, *_asym(up))
        L = ProfileGrid.from_function(lo.values, T, h, *_asym(lo))
    edge = float(np.abs(L.values[0] - L.left_asym).max())
    if edge > LEFT_EDGE_TOL:
        warnings.warn(f"lower candidate differs from its left asymptote by {edge:.3g} at -T; "
                      "the truncated tail can break the ordering chain, increase T",
                      stacklevel=3)
    return CandidatePair(U, L, kind, "quasi", up, lo, meta)


# ---------------------------------------------------------------------------
# Lotka-Volterra


@dataclass(frozen=True)
class LVParams:
    r: float = 1.0
    a1: float = 2.0
    a2: float = 1.0
    b1: float = 1.0
    b2: float = 1.0
    d1: float = 1.0
    d2: float = 1.0
    tau: float = 0.5

    def __post_init__(self):
        for name in ("r", "a1", "a2", "b1", "b2", "d1", "d2"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be positive")
        if self.tau < 0:
            raise ParameterError("tau must be nonnegative")


def lv_equilibrium(p: LVParams) -> tuple[float, float]:
    """Coexistence state ``(b2/a2, (a1 b2/a2 - 1)/b1)``; raises if not positive."""
    u = p.b2 / p.a2
    v = (p.a1 * p.b2 / p.a2 - 1) / p.b1
    if not v > 0:
        raise EquilibriumError(
            f"equilibrium v* = {v:.6g} <= 0: positivity needs a1*b2 > a2 "
            f"(got a1*b2 = {p.a1 * p.b2:.6g}, a2 = {p.a2:.6g}); the condition printed "
            "as (g2), a2 > a1*b2, has the inequality reversed")
    return u, v


def lv_reaction(p: LVParams):
    r, a1, a2, b1, b2 = p.r, p.a1, p.a2, p.b1, p.b2

    def f(u, ud):
        out = np.empty(np.broadcast_shapes(u.shape, ud.shape))
        out[..., 0] = r * u[..., 0] * (1 - a1 * u[..., 0] + b1 * u[..., 1])
        out[..., 1] = u[..., 1] * (a2 * ud[..., 0] - b2)
        return out
    return f


def lv_spec(p: LVParams) -> SystemSpec:
    """The LV system on ``K = (u*, v*)``.

    ``beta1 = r (1 + 2 a1 u* + b1 v*) + r b1 u*`` and
    ``beta2 = |a2 u* - b2| + b2 + a2 v*`` bound the sums of the partials.
    """
    us, vs = lv_equilibrium(p)
    beta1 = p.r * (1 + 2 * p.a1 * us + p.b1 * vs) + p.r * p.b1 * us
    beta2 = max(abs(p.a2 * us - p.b2), p.b2) + p.a2 * vs
    return SystemSpec(2, [p.d1, p.d2], [p.tau, p.tau], lv_reaction(p),
                      QuasimonotoneSplit.ordered(2), [us, vs], [beta1, beta2],
                      name="lv-mutualistic", params=asdict(p))


def lv_published_rate(p: LVParams, c: float) -> float:
    """Larger root of ``l - d1 l^2/c^2 = r``."""
    disc = 1 - 4 * p.r * p.d1 / c**2
    if disc < 0:
        raise SubcriticalSpeedError(
            f"c={c} <= 2*sqrt(r*d1)={2 * math.sqrt(p.r * p.d1):.6g}: decay rate not real")
    return c**2 * (1 + math.sqrt(disc)) / (2 * p.d1)


def lv_build(p: LVParams, c: float, T: float = 200.0, h: float = 0.05,
             candidate: str = "corrected", cand: CandidateParams | None = None,
             grid_rate: bool = True):
    """System, candidate pair and kernel for the mutualistic LV model."""
    us, vs = lv_equilibrium(p)
    cs = critical_speed("lv-mutualistic", p)
    if not c >= cs:
        raise SubcriticalSpeedError(f"c={c} is below the critical speed c*={cs:.9g}")
    if c == cs:
        warnings.warn(f"c equals the critical speed {cs}; margins may vanish", stacklevel=2)
    spec = lv_spec(p)
    kp = kernel_params(spec, c)
    if candidate == "published":
        lam1 = lv_published_rate(p, c)
        cp = cand or CandidateParams(lam1, 1e-3, 1e-3)
        up = ProfileFunctions((_sym_kink(us, cp.lambda1), _sym_kink(vs, cp.lambda2)))
        lo = ProfileFunctions((_published_lower(cp.k, cp.delta, cp.lambda3),
                               PiecewiseExp.constant(0.0)))
        meta = {"candidate": "published", **asdict(cp)}
    elif candidate == "corrected":
        up, lo, meta = _lv_corrected(p, c, kp, T, h, grid_rate)
    else:
        raise ParameterError(f"unknown candidate family {candidate!r}")
    pair = _make_pair(up, lo, T, h, "ordered", meta)
    return spec, pair, kp


def _lv_corrected(p: LVParams, c: float, kp: KernelParams, T, h, grid_rate):
    us, vs = lv_equilibrium(p)
    a = p.r
    mu_s = slow_decay_rate(p.d1, c, a)
    h_adj = 2 * T / max(int(round(2 * T / h)), 1)
    mu = grid_slow_decay_rate(kp, 0, a, h_adj) if grid_rate else mu_s
    if not mu < c**2 / p.d2:
        raise ParameterError(f"decay rate {mu:.6g} too fast for d2={p.d2} at c={c}")
    # nu + d1 nu^2/c^2 >= 1.05 r
    target = 1.05 * p.r
    nu = c**2 * (-1 + math.sqrt(1 + 4 * p.d1 * target / c**2)) / (2 * p.d1)
    up = ProfileFunctions((_kink(us, mu, nu), _kink(vs, mu, nu)))
    mu_f = c**2 / p.d1 - mu_s
    eta = min(0.5 * mu_s, 0.5 * (mu_f - mu_s))
    q = mu_s / (mu_s + eta)
    g = (mu_s + eta) - p.d1 * (mu_s + eta)**2 / c**2 - a
    A = nu / (mu + nu)
    k = min(0.5 * q * g / (a * p.a1), 0.5 * us * A * math.exp(-(mu - mu_s) * T),
            0.5 / p.a1)
    lo = ProfileFunctions((_cap_lower(k, mu_s, eta), PiecewiseExp.constant(0.0)))
    meta = {"candidate": "corrected", "mu_upper": mu, "mu_lower": mu_s, "nu": nu,
            "eta": eta, "k": k, "u_star": us, "v_star": vs}
    return up, lo, meta


# ---------------------------------------------------------------------------


def critical_speed(model_id: str, params) -> float:
    """Threshold speed of the candidate constructions."""
    if model_id in ("bz-literal", "bz-transformed", "bz"):
        return 2.0
    if model_id in ("lv-mutualistic", "lv"):
        p = params
        return max(2 * math.sqrt(p.r * p.d1),
                   math.sqrt(p.d1 * (p.r + p.a1 * p.b2 / p.a2 - 1)))
    raise ParameterError(f"unknown model id {model_id!r}; expected one of {MODEL_IDS}")


def build_model(model_id: str, c: float, params: dict | None = None, T: float = 200.0,
                h: float = 0.05, candidate: str = "corrected"):
    """Dispatch on a model id with a parameter dict."""
    params = dict(params or {})
    if model_id in ("bz-literal", "bz-transformed"):
        params["variant"] = model_id.split("-")[1]
        return bz_build(BZParams(**params), c, T, h, candidate)
    if model_id == "lv-mutualistic":
        return lv_build(LVParams(**params), c, T, h, candidate)
    raise ParameterError(f"unknown model id {model_id!r}; expected one of {MODEL_IDS}")


