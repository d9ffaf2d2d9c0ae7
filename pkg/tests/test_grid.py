import math

import numpy as np
import pytest

from delaywave.grid import NormConfig, ProfileGrid, delayed_eval, eval, node_times, norm_rho, sup_norm


@pytest.fixture
def prof():
    return ProfileGrid.from_function(lambda t: np.stack([np.tanh(t), t**2 / 100], 1), 10.0, 0.1,
                                     [-1, 1], [1, 1])


def test_node_count_adjusts_h():
    t, h = node_times(1.0, 0.3)
    assert len(t) - 1 == 7 and h == pytest.approx(2 / 7)
    g = ProfileGrid.constant([1.0], 1.0, 0.3)
    assert g.N * g.h == pytest.approx(2.0, abs=1e-15)


def test_eval_nodes_tails_midpoints(prof):
    t3 = prof.t_min + 3 * prof.h
    assert eval(prof, 0, t3) == prof.values[3, 0]
    assert eval(prof, 0, prof.t_min - 10) == -1.0
    assert eval(prof, 1, prof.t_min - 10) == 1.0
    assert eval(prof, 1, prof.t_max + 0.5) == 1.0
    mid = prof.t_min + 4.5 * prof.h
    assert eval(prof, 0, mid) == pytest.approx(0.5 * (prof.values[4, 0] + prof.values[5, 0]), abs=1e-15)
    with pytest.raises(IndexError):
        eval(prof, 2, 0.0)


def test_delayed_eval_identity(prof, rng):
    for t, tau in zip(rng.uniform(-12, 12, 50), rng.uniform(0, 3, 50)):
        assert delayed_eval(prof, 0, t, tau) == eval(prof, 0, t - tau)
    assert delayed_eval(prof, 0, 1.3, 0.0) == eval(prof, 0, 1.3)
    k = ProfileGrid.constant([2.0, 3.0], 5, 0.1)
    assert delayed_eval(k, 1, 0.7, 1.9) == 3.0
    with pytest.raises(ValueError):
        delayed_eval(prof, 0, 0.0, -1.0)


def test_eval_lipschitz_continuity(prof, rng):
    L = np.abs(np.diff(prof.values[:, 0])).max() / prof.h
    a, b = rng.uniform(-10, 10, 200), rng.uniform(-10, 10, 200)
    lhs = np.abs(prof.sample(a)[:, 0] - prof.sample(b)[:, 0])
    assert np.all(lhs <= L * np.abs(a - b) + 1e-14)


def test_norm_rho_examples():
    one = ProfileGrid.constant([1.0, 1.0], 5.0, 0.1)
    assert norm_rho(one, NormConfig(0.7)) == pytest.approx(1.0, abs=1e-15)
    zero = ProfileGrid.constant([0.0], 5.0, 0.1)
    assert norm_rho(zero, NormConfig(1.0)) == 0.0
    g = ProfileGrid.constant([0.0], 5.0, 0.5)
    v = g.values.copy()
    j = int(round((1.0 - g.t_min) / g.h))
    v[j, 0] = 2.0
    spike = g.with_values(v)
    assert norm_rho(spike, NormConfig(1.0)) == pytest.approx(2 * math.exp(-1), rel=1e-12)
    assert norm_rho(spike, NormConfig(1.0)) == pytest.approx(0.7357589, abs=1e-7)


def test_norm_bounds(prof):
    assert norm_rho(prof, NormConfig(0.3)) <= sup_norm(prof)


def test_csv_roundtrip(tmp_path, prof):
    path = prof.to_csv(tmp_path / "p.csv")
    back = ProfileGrid.from_csv(path)
    np.testing.assert_array_equal(back.values, prof.values)
    np.testing.assert_array_equal(back.left_asym, prof.left_asym)
    assert back.h == prof.h and back.T == prof.T
    assert path.read_text().splitlines()[0] == "t,phi_1,phi_2"


def test_immutable(prof):
    with pytest.raises(ValueError):
        prof.values[0, 0] = 5.0


def test_box(prof):
    assert not prof.in_box([1, 1])
    assert ProfileGrid.constant([0.5], 1, 0.1).in_box([1])
