import math

import numpy as np
import pytest
from scipy.integrate import trapezoid
from oracle import green_simpson, random_forcing

from delaywave.grid import ProfileGrid
from delaywave.kernel import (DomainError, apply_F, apply_green, cell_weights, char_roots,
                              exp_multiplier, green_values, grid_slow_decay_rate, kernel_params,
                              slow_decay_rate)
from delaywave.models import BZParams, bz_spec
from delaywave.system import ParameterError


def test_roots_examples():
    l1, l2 = char_roots(2.0, 1.0, 3.0)
    assert l1 == pytest.approx(-1.0, abs=1e-14)
    assert l2 == pytest.approx(1.5, abs=1e-14)
    l1, l2 = char_roots(1.0, 2.0, 1.0)
    assert l1 == pytest.approx(2 - 2 * math.sqrt(2), abs=1e-14)
    assert l2 == pytest.approx(2 + 2 * math.sqrt(2), abs=1e-14)


@pytest.mark.parametrize("d,c,beta", [(1, 3, 2), (0.01, 50, 1e-6), (5, 0.1, 100), (1, 1e3, 1)])
def test_roots_satisfy_quadratic(d, c, beta):
    l1, l2 = char_roots(d, c, beta)
    a = d / c**2
    for l in (l1, l2):
        assert abs(a * l * l - l - beta) <= 1e-12 * max(a * l * l, abs(l), beta)
    assert l1 < 0 < l2


@pytest.mark.parametrize("args", [(0, 1, 1), (1, 0, 1), (1, 1, 0), (-1, 1, 1)])
def test_roots_reject_nonpositive(args):
    with pytest.raises(ParameterError):
        char_roots(*args)


def test_cell_weights_series_matches_closed_form():
    h = 0.1
    for lam in (1e-5, -1e-5, 0.5, -3.0):
        a, near, far = cell_weights(lam, h)
        u = np.linspace(0, h, 20001)
        ref0 = trapezoid(np.exp(lam * u) * (1 - u / h), u)
        ref1 = trapezoid(np.exp(lam * u) * (u / h), u)
        assert near == pytest.approx(ref0, rel=1e-8)
        assert far == pytest.approx(ref1, rel=1e-8)
        assert a == pytest.approx(math.exp(lam * h))


def test_zero_forcing_maps_to_zero():
    l1, l2 = char_roots(1.0, 3.0, 2.0)
    assert not np.any(green_values(l1, l2, 1.0, 0.1, np.zeros(11), 0.0, 0.0))


def test_constant_forcing_maps_to_constant_over_beta():
    l1, l2 = char_roots(1.0, 3.0, 2.0)
    scale = 9.0 / (l2 - l1)
    out = green_values(l1, l2, scale, 0.1, np.full(101, 1.4), 1.4, 1.4)
    np.testing.assert_allclose(out, 0.7, rtol=1e-13)


def test_green_matches_simpson(rng):
    t = np.linspace(-2, 2, 65)
    for _ in range(10):
        d, c, beta = rng.uniform(0.5, 2), rng.uniform(1, 2.5), rng.uniform(0.1, 5)
        g, gl, gr = random_forcing(rng, t)
        l1, l2 = char_roots(d, c, beta)
        scale = c**2 / (d * (l2 - l1))
        ours = green_values(l1, l2, scale, t[1] - t[0], g, gl, gr)
        ref = green_simpson(d, c, beta, t, g, gl, gr)
        assert np.abs(ours - ref).max() <= 1e-8


def test_green_is_positive_and_linear(rng):
    l1, l2 = char_roots(1.0, 2.0, 1.5)
    sc = 4.0 / (l2 - l1)
    g1, g2 = rng.uniform(0, 1, 61), rng.uniform(-1, 1, 61)
    G = lambda g, a, b: green_values(l1, l2, sc, 0.1, g, a, b)  # noqa: E731
    assert np.all(G(g1, 0.2, 0.3) > 0)
    np.testing.assert_allclose(G(2 * g1 + g2, 0.1, 0.2),
                               2 * G(g1, 0.0, 0.0) + G(g2, 0.1, 0.2), atol=1e-13)


def test_exp_multiplier_grid_converges_to_continuum():
    kp = kernel_params(bz_spec(BZParams()), 3.0)
    mu = 0.6
    m0 = exp_multiplier(kp, 0, mu)
    errs = [abs(exp_multiplier(kp, 0, mu, h) - m0) for h in (0.1, 0.05)]
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)
    with pytest.raises(ParameterError):
        exp_multiplier(kp, 0, 1e3)


def test_grid_decay_rate_reproduces_exponential():
    kp = kernel_params(bz_spec(BZParams()), 3.0)
    a, h = 0.5, 0.05
    mu = grid_slow_decay_rate(kp, 0, a, h)
    mu0 = slow_decay_rate(1.0, 3.0, a)
    assert abs(mu - mu0) < 1e-3
    assert (kp.beta[0] + a) * exp_multiplier(kp, 0, mu, h) == pytest.approx(1.0, abs=1e-13)


def test_slow_rate_below_threshold():
    with pytest.raises(ParameterError):
        slow_decay_rate(1.0, 1.0, 1.0)


def test_apply_green_asymptotes():
    kp = kernel_params(bz_spec(BZParams()), 3.0)
    g = ProfileGrid.from_function(lambda t: np.tanh(t)[:, None] + 1, 20, 0.1, [0.0], [2.0])
    out = apply_green(kp, g, 0)
    assert out.right_asym[0] == pytest.approx(2.0 / kp.beta[0])
    assert out.values[-1, 0] == pytest.approx(2.0 / kp.beta[0], abs=1e-6)


def test_apply_F_fixes_equilibria_and_rejects_out_of_box():
    spec = bz_spec(BZParams())
    kp = kernel_params(spec, 3.0)
    for k in ([0.0, 0.0], [1.0, 1.0]):
        p = ProfileGrid.constant(k, 10, 0.1)
        np.testing.assert_allclose(apply_F(spec, kp, p).values, np.broadcast_to(k, p.values.shape),
                                   atol=1e-14)
    with pytest.raises(DomainError):
        apply_F(spec, kp, ProfileGrid.constant([1.5, 0.2], 10, 0.1))


def test_apply_F_is_monotone(bz3, rng):
    spec, pair, kp = bz3
    lo = pair.lower
    hi = pair.upper
    a, b = apply_F(spec, kp, lo), apply_F(spec, kp, hi)
    assert np.all(b.values - a.values >= -1e-12)
