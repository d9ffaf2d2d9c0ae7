"""Delayed reaction-diffusion systems and their standing hypotheses.

A system is ``u_t - D u_xx = f(u, u_tau)`` with one discrete delay per
component.  The reaction is an opaque evaluator; its monotone structure is
declared through a :class:`QuasimonotoneSplit` and only checked by sampling.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "ParameterError",
    "StructuralError",
    "QuasimonotoneSplit",
    "SystemSpec",
    "ValidationReport",
    "MonotonicityReport",
    "validate_system",
    "check_quasimonotone",
    "sample_lipschitz",
]

Reaction = Callable[[np.ndarray, np.ndarray], np.ndarray]


class ParameterError(ValueError):
    """A model or numerical parameter is outside its admissible range."""


class StructuralError(ValueError):
    """Dimensions of a system do not agree."""


@dataclass(frozen=True)
class QuasimonotoneSplit:
    """Per-component monotonicity declaration (0-based component indices).

    ``inc_now[i]``/``dec_now[i]`` partition the undelayed arguments other
    than ``i``; ``inc_delayed[i]``/``dec_delayed[i]`` partition all delayed
    arguments.
    """

    inc_now: tuple[tuple[int, ...], ...]
    dec_now: tuple[tuple[int, ...], ...]
    inc_delayed: tuple[tuple[int, ...], ...]
    dec_delayed: tuple[tuple[int, ...], ...]

    @classmethod
    def ordered(cls, n: int) -> "QuasimonotoneSplit":
        """Quasimonotone nondecreasing split: every cross argument increasing."""
        return cls(
            inc_now=tuple(tuple(j for j in range(n) if j != i) for i in range(n)),
            dec_now=tuple(() for _ in range(n)),
            inc_delayed=tuple(tuple(range(n)) for _ in range(n)),
            dec_delayed=tuple(() for _ in range(n)),
        )

    @classmethod
    def from_dec(cls, n: int, dec_now: Sequence[Sequence[int]],
                 dec_delayed: Sequence[Sequence[int]]) -> "QuasimonotoneSplit":
        """Build a split from the decreasing sets; everything else increases."""
        dn = tuple(tuple(sorted(s)) for s in dec_now)
        dd = tuple(tuple(sorted(s)) for s in dec_delayed)
        inc_now = tuple(tuple(j for j in range(n) if j != i and j not in dn[i])
                        for i in range(n))
        inc_del = tuple(tuple(j for j in range(n) if j not in dd[i]) for i in range(n))
        return cls(inc_now, dn, inc_del, dd)

    @property
    def n(self) -> int:
        return len(self.inc_now)

    @property
    def is_ordered(self) -> bool:
        return all(len(s) == 0 for s in self.dec_now) and all(
            len(s) == 0 for s in self.dec_delayed)

    def problems(self) -> list[str]:
        """Partition violations, as human-readable strings (empty when valid)."""
        out = []
        n = self.n
        sets = (self.dec_now, self.inc_delayed, self.dec_delayed)
        if any(len(s) != n for s in sets):
            return [f"split has inconsistent lengths for n={n}"]
        for i in range(n):
            now = list(self.inc_now[i]) + list(self.dec_now[i])
            if sorted(now) != [j for j in range(n) if j != i]:
                out.append(f"component {i}: now-sets do not partition the other "
                           f"{n - 1} arguments (got {sorted(now)})")
            dl = list(self.inc_delayed[i]) + list(self.dec_delayed[i])
            if sorted(dl) != list(range(n)):
                out.append(f"component {i}: delayed sets do not partition all {n} "
                           f"arguments (got {sorted(dl)})")
        return out

    def masks(self) -> tuple[np.ndarray, np.ndarray]:
        """Boolean masks ``(dec_now, dec_delayed)`` of shape ``(n, n)``.

        Row ``i`` marks the arguments of ``f_i`` that are taken from the
        opposite profile in a coupled evaluation.
        """
        n = self.n
        mn = np.zeros((n, n), dtype=bool)
        md = np.zeros((n, n), dtype=bool)
        for i in range(n):
            mn[i, list(self.dec_now[i])] = True
            md[i, list(self.dec_delayed[i])] = True
        return mn, md

    def to_dict(self) -> dict:
        return {"dec_now": [list(s) for s in self.dec_now],
                "dec_delayed": [list(s) for s in self.dec_delayed]}


@dataclass(frozen=True, eq=False)
class SystemSpec:
    """One delayed reaction-diffusion system on the box ``[0, K]``.

    ``reaction(u, ud)`` takes arrays whose last axis has length ``n`` (current
    and delayed states) and returns an array of the same shape.
    """

    n: int
    diffusion: np.ndarray
    delays: np.ndarray
    reaction: Reaction
    split: QuasimonotoneSplit
    k_state: np.ndarray
    lipschitz: np.ndarray
    zero_state: np.ndarray = None  # type: ignore[assignment]
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        n = int(self.n)
        for attr in ("diffusion", "delays", "k_state", "lipschitz"):
            arr = np.atleast_1d(np.asarray(getattr(self, attr), dtype=float)).copy()
            if arr.shape != (n,):
                raise StructuralError(f"{attr} has shape {arr.shape}, expected ({n},)")
            arr.setflags(write=False)
            object.__setattr__(self, attr, arr)
        z = np.zeros(n) if self.zero_state is None else np.asarray(self.zero_state, float)
        if z.shape != (n,):
            raise StructuralError(f"zero_state has shape {z.shape}, expected ({n},)")
        z = z.copy()
        z.setflags(write=False)
        object.__setattr__(self, "zero_state", z)
        if self.split.n != n:
            raise StructuralError(f"split describes {self.split.n} components, system has {n}")
        if np.any(self.diffusion <= 0):
            raise ParameterError("diffusion coefficients must be positive")
        if np.any(self.delays < 0):
            raise ParameterError("delays must be nonnegative")
        if np.any(self.lipschitz <= 0):
            raise ParameterError("Lipschitz constants beta_i must be positive")
        if np.any(self.k_state <= 0):
            raise ParameterError("K must be positive componentwise")

    @property
    def max_delay(self) -> float:
        return float(self.delays.max()) if self.n else 0.0

    def f(self, u, ud) -> np.ndarray:
        """Evaluate the reaction, checking the output shape."""
        u = np.asarray(u, dtype=float)
        ud = np.asarray(ud, dtype=float)
        out = np.asarray(self.reaction(u, ud), dtype=float)
        if out.shape != np.broadcast_shapes(u.shape, ud.shape):
            raise StructuralError(
                f"reaction returned shape {out.shape} for inputs of shape {u.shape}")
        return out

    def f_coupled(self, own, other, own_del, other_del) -> np.ndarray:
        """Reaction with cross arguments mixed between two profiles.

        Component ``i`` of the result is
        ``f_i(own_i, [own]_{a_i}, [other]_{b_i}, [own_del]_{c_i}, [other_del]_{d_i})``.
        Arrays have shape ``(m, n)``.  For an ordered split this is simply
        ``f(own, own_del)``.
        """
        if self.split.is_ordered:
            return self.f(own, own_del)
        mn, md = self.split.masks()
        out = np.empty(np.shape(own), dtype=float)
        for i in range(self.n):
            u = np.where(mn[i], other, own)
            ud = np.where(md[i], other_del, own_del)
            out[..., i] = self.f(u, ud)[..., i]
        return out


@dataclass
class ValidationReport:
    residual_zero: np.ndarray
    residual_k: np.ndarray
    split_problems: list[str]
    tol_eq: float

    @property
    def passed(self) -> bool:
        return (not self.split_problems
                and bool(np.all(self.residual_zero <= self.tol_eq))
                and bool(np.all(self.residual_k <= self.tol_eq)))

    def to_dict(self) -> dict:
        return {"passed": self.passed, "tol_eq": self.tol_eq,
                "residual_zero": self.residual_zero.tolist(),
                "residual_k": self.residual_k.tolist(),
                "split_problems": list(self.split_problems)}


def validate_system(spec: SystemSpec, tol_eq: float = 1e-12) -> ValidationReport:
    """Check ``f(0,0) = f(K,K) = 0`` and the split partitions."""
    z = spec.zero_state
    k = spec.k_state
    r0 = np.abs(spec.f(z, z))
    rk = np.abs(spec.f(k, k))
    if r0.shape != (spec.n,):
        raise StructuralError(f"reaction output has shape {r0.shape}, expected ({spec.n},)")
    return ValidationReport(r0, rk, spec.split.problems(), tol_eq)


@dataclass
class MonotonicityReport:
    # each violation: (component i, "now"/"delayed", argument j, signed difference)
    violations: list[tuple[int, str, int, float]]
    samples: int
    h_fd: float
    tol_mono: float

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {"passed": self.passed, "samples": self.samples,
                "violations": [list(v) for v in self.violations[:50]],
                "violation_count": len(self.violations)}


def check_quasimonotone(spec: SystemSpec, sample_count: int = 1000, rng_seed: int = 0,
                        h_fd: float | None = None,
                        tol_mono: float = 1e-10) -> MonotonicityReport:
    """Sample the sign of cross partial differences against the declared split.

    Forward differences are taken at uniform random points of
    ``[0,K] x [0,K]``; a difference within ``tol_mono`` of zero is accepted
    for either declared direction.
    """
    if sample_count < 1:
        raise ParameterError("sample_count must be >= 1")
    n = spec.n
    k = spec.k_state
    h = 1e-6 * float(k.max()) if h_fd is None else float(h_fd)
    rng = np.random.default_rng(rng_seed)
    u = rng.uniform(0.0, 1.0, (sample_count, n)) * k
    ud = rng.uniform(0.0, 1.0, (sample_count, n)) * k
    base = spec.f(u, ud)
    mn, md = spec.split.masks()
    violations = []
    for j in range(n):
        for delayed in (False, True):
            up, udp = u.copy(), ud.copy()
            (udp if delayed else up)[:, j] += h
            diff = spec.f(up, udp) - base
            for i in range(n):
                if not delayed and i == j:
                    continue
                dec = md[i, j] if delayed else mn[i, j]
                bad = diff[:, i] < -tol_mono if not dec else diff[:, i] > tol_mono
                for s in np.flatnonzero(bad):
                    violations.append((i, "delayed" if delayed else "now", j,
                                       float(diff[s, i])))
    return MonotonicityReport(violations, sample_count, h, tol_mono)


def sample_lipschitz(spec: SystemSpec, sample_count: int = 2000, rng_seed: int = 0,
                     warn: bool = True) -> np.ndarray:
    """Largest sampled Lipschitz quotient of each ``f_i`` over the box.

    The quotient uses the sup norm on the current and delayed states
    separately and adds them.  Emits a warning for any component whose
    sampled quotient exceeds its declared ``beta_i``.
    """
    rng = np.random.default_rng(rng_seed)
    n, k = spec.n, spec.k_state
    pts = [rng.uniform(0.0, 1.0, (sample_count, n)) * k for _ in range(4)]
    u, ud, v, vd = pts
    # half the pairs are close together so local slopes are probed too
    half = sample_count // 2
    v[:half] = np.clip(u[:half] + 1e-3 * k * rng.standard_normal((half, n)), 0, k)
    vd[:half] = np.clip(ud[:half] + 1e-3 * k * rng.standard_normal((half, n)), 0, k)
    num = np.abs(spec.f(u, ud) - spec.f(v, vd))
    den = np.abs(u - v).max(axis=1) + np.abs(ud - vd).max(axis=1)
    ok = den > 0
    q = (num[ok] / den[ok, None]).max(axis=0)
    if warn:
        for i in np.flatnonzero(q > spec.lipschitz * (1 + 1e-9)):
            warnings.warn(f"sampled Lipschitz quotient {q[i]:.6g} of component {i} "
                          f"exceeds declared beta={spec.lipschitz[i]:.6g}", stacklevel=2)
    return q
