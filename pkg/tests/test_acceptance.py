"""One test per acceptance criterion, at the stated tolerances."""

import json
import math
import time

import numpy as np
import pytest
from oracle import green_simpson, random_forcing

from delaywave import cli
from delaywave.grid import ProfileGrid
from delaywave.iterate import coupled_sweep, ode_residual, solve_wave, sweep_violation
from delaywave.kernel import apply_F, char_roots, green_values
from delaywave.models import (BZParams, EquilibriumError, LVParams, SubcriticalSpeedError,
                              bz_build, critical_speed, lv_build)
from delaywave.pdesim import SimConfig, crossvalidate
from delaywave.verify import margins, verify_pair

BZ = BZParams(r=0.5, b=1.0, tau1=0.5, tau2=0.5)
# same physical neighbourhood of each kink excluded on every grid
KINK_EXCLUSION = 0.5


def test_criterion_01_characteristic_roots():
    rng = np.random.default_rng(1)
    start = time.perf_counter()
    for _ in range(100):
        d, beta = rng.uniform(0.1, 10, 2)
        c = rng.uniform(0.5, 10)
        l1, l2 = char_roots(d, c, beta)
        a = d / c**2
        for l in (l1, l2):
            assert abs(a * l * l - l - beta) / max(a * l * l, abs(l), beta) < 1e-12
        assert abs((l1 + l2) - 1 / a) <= 1e-12 * (abs(l1) + abs(l2))
        assert abs(l1 * l2 + beta / a) <= 1e-12 * abs(beta / a)
    assert time.perf_counter() - start < 1.0


def test_criterion_02_kernel_oracle():
    rng = np.random.default_rng(2)
    t = np.linspace(-2, 2, 65)
    h = t[1] - t[0]
    start = time.perf_counter()
    worst = 0.0
    for _ in range(50):
        d, c, beta = rng.uniform(0.5, 2), rng.uniform(1, 2.5), rng.uniform(0.1, 5)
        g, gl, gr = random_forcing(rng, t)
        l1, l2 = char_roots(d, c, beta)
        ours = green_values(l1, l2, c**2 / (d * (l2 - l1)), h, g, gl, gr)
        worst = max(worst, np.abs(ours - green_simpson(d, c, beta, t, g, gl, gr)).max())
    assert worst <= 1e-8
    assert time.perf_counter() - start < 10.0


def test_criterion_03_equilibrium_fixed_points():
    for spec, _, kp in (bz_build(BZ, 3.0), lv_build(LVParams(), 3.0)):
        for state in (np.zeros(2), spec.k_state):
            phi = ProfileGrid.constant(state, 200.0, 0.05)
            out = apply_F(spec, kp, phi)
            assert np.abs(out.values - state).max() <= 1e-10
    l1, l2 = char_roots(1.0, 3.0, 2.0)
    gamma = 0.73
    out = green_values(l1, l2, 9.0 / (l2 - l1), 0.05, np.full(401, gamma), gamma, gamma)
    assert np.abs(out - gamma / 2.0).max() <= 1e-12


def test_criterion_04_bz_critical_speed():
    rng = np.random.default_rng(4)
    start = time.perf_counter()
    for _ in range(20):
        p = BZParams(r=0.5, b=rng.uniform(0.1, 5), tau1=rng.uniform(0, 3), tau2=rng.uniform(0, 3))
        assert critical_speed("bz-transformed", p) == 2
    with pytest.raises(SubcriticalSpeedError, match="1-4/c"):
        bz_build(BZ, 1.9)
    for c in (2.1, 3.0):
        spec, pair, kp = bz_build(BZ, c)
        rep = verify_pair(spec, kp, pair)
        assert rep.passed
        assert rep.min_margin >= -1e-8
    assert time.perf_counter() - start < 30.0


def test_criterion_05_lv_critical_speed():
    rng = np.random.default_rng(5)
    n = 0
    while n < 20:
        r, a1, a2, b1, b2, d1 = rng.uniform(0.1, 5, 6)
        if not a1 * b2 > a2:
            continue
        p = LVParams(r=r, a1=a1, a2=a2, b1=b1, b2=b2, d1=d1)
        ref = max(2 * math.sqrt(r * d1), math.sqrt(d1 * (r + a1 * b2 / a2 - 1)))
        assert abs(critical_speed("lv-mutualistic", p) - ref) <= 1e-14 * ref
        n += 1
    with pytest.raises(EquilibriumError, match=r"\(g2\)"):
        lv_build(LVParams(a1=1.0, a2=2.0, b2=1.0), 3.0)


def test_criterion_06_sandwich_and_monotone_iteration():
    start = time.perf_counter()
    spec, pair, kp = bz_build(BZ, 3.0, T=200, h=0.05)
    _, rep = solve_wave(spec, kp, pair, tol=1e-6, max_iter=500)
    assert rep.iterations > 0
    assert min(rep.sandwich_violations) >= -1e-9
    spec, pair, kp = lv_build(LVParams(), 3.0)
    cur = pair
    for _ in range(20):
        new = coupled_sweep(spec, kp, cur)
        assert (cur.upper.values - new.upper.values).min() >= -1e-9
        assert (new.lower.values - cur.lower.values).min() >= -1e-9
        assert sweep_violation(cur, new) >= -1e-9
        cur = new
    assert time.perf_counter() - start < 60.0


def test_criterion_07_wave_convergence(bz_wave):
    spec, kp, phi, rep = bz_wave
    assert rep.converged and rep.iterations <= 500
    assert rep.fixed_point_residual <= 1e-6
    assert np.diff(phi.values, axis=0).min() >= -1e-6
    assert np.abs(phi.values[0]).max() <= 1e-3
    assert np.abs(phi.values[-1] - 1.0).max() <= 1e-3
    r_coarse = np.abs(ode_residual(spec, kp, phi)).max()
    assert r_coarse <= 1e-3
    spec2, pair2, kp2 = bz_build(BZ, 3.0, T=200, h=0.025)
    phi2, rep2 = solve_wave(spec2, kp2, pair2, tol=1e-6, max_iter=500)
    assert rep2.converged
    r_fine = np.abs(ode_residual(spec2, kp2, phi2)).max()
    assert r_coarse / r_fine >= 3


def test_criterion_08_pde_crossvalidation(bz_wave):
    spec, kp, phi, _ = bz_wave
    start = time.perf_counter()
    cfg = SimConfig(x_min=0.0, x_max=800.0, nx=8001, t_end=50.0)
    rep, _ = crossvalidate(spec, phi, 3.0, cfg)
    assert not rep.front_absent
    assert rep.speed_deviation <= 0.05
    assert rep.shape_drift <= 1e-2
    assert time.perf_counter() - start < 300.0


def _fd_gap(spec, kp, pair, h):
    _, ua, la, skip = margins(spec, kp, pair, deriv="analytic")
    _, uf, lf, _ = margins(spec, kp, pair, deriv="finite-difference")
    t = pair.upper.t
    keep = ~skip & (np.abs(t) < t[-1] - 10)
    for k in pair.kinks():
        keep &= np.abs(t - k) > KINK_EXCLUSION
    return max(np.nanmax(np.abs(ua - uf)[keep]), np.nanmax(np.abs(la - lf)[keep]))


@pytest.mark.parametrize("build", [lambda: bz_build(BZ, 3.0), lambda: lv_build(LVParams(), 3.0)],
                         ids=["bz", "lv"])
def test_criterion_09_verifier_order(build):
    spec, pair, kp = build()
    gaps = [_fd_gap(spec, kp, pair.resample(200.0, h), h) for h in (0.05, 0.025)]
    assert math.log2(gaps[0] / gaps[1]) >= 1.8


def test_criterion_10_determinism(tmp_path, capsys):
    for cmd in ("verify", "solve"):
        blobs = []
        for k in range(2):
            out = tmp_path / f"{cmd}{k}"
            assert cli.main([cmd, "--c", "3", "--out", str(out)]) == 0
            blobs.append({p.name: p.read_bytes() for p in out.glob("*.json")})
        assert blobs[0] and blobs[0] == blobs[1]
        for blob in blobs[0].values():
            json.loads(blob)
    capsys.readouterr()
