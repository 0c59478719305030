import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import naive_loglik, si_quadrature
from pdsir.model import (IncidenceCounts, LatentPath, ObservationGrid, Params, PriorHyper,
                         bin_infections, compartment_trajectory, r0, sir_loglik, sufficient_stats)


def path(inf, rem, s0, i0):
    return LatentPath(np.array(inf, float), np.array(rem, float), s0, i0)


# ---------------------------------------------------------------- types


@pytest.mark.parametrize("kw", [dict(beta=0, lam=1), dict(beta=1, lam=-1), dict(beta=1, lam=1, shape=0),
                                dict(beta=math.inf, lam=1)])
def test_params_reject_non_positive(kw):
    with pytest.raises(ValueError):
        Params(**kw)


def test_prior_hyper_rejects_zero():
    with pytest.raises(ValueError):
        PriorHyper(0.0, 1.0, 1.0, 1.0)


@pytest.mark.parametrize("bp", [[0.0], [1.0, 2.0], [0.0, 2.0, 1.0], [0.0, 1.0, 1.0]])
def test_grid_validation(bp):
    with pytest.raises(ValueError):
        ObservationGrid(np.array(bp))


def test_grid_interval_convention():
    g = ObservationGrid(np.array([0.0, 1.0, 2.0]))
    assert list(g.interval_of([0.0, 0.5, 1.0, 1.0000001, 2.0, 2.5])) == [0, 1, 1, 2, 2, 3]


def test_counts_validation():
    with pytest.raises(ValueError):
        IncidenceCounts(np.array([1, -1]))
    with pytest.raises(ValueError):
        IncidenceCounts(np.array([1.5, 1]))
    g = ObservationGrid.uniform(1.0, 2)
    with pytest.raises(ValueError):
        IncidenceCounts(np.array([1, 2, 3])).check(g, 10)
    with pytest.raises(ValueError):
        IncidenceCounts(np.array([6, 5])).check(g, 10)


def test_path_violations():
    assert path([0, 0.5], [np.inf, 0.75], 1, 1).violations(1.0) == []
    assert path([0, 0.5], [np.inf, 0.4], 1, 1).violations(1.0)
    assert path([0, 1.5], [np.inf, np.inf], 1, 1).violations(1.0)
    assert path([0.1, 0.5], [np.inf, np.inf], 1, 1).violations(1.0)


# ---------------------------------------------------------------- trajectory


def test_trajectory_no_events():
    tr = compartment_trajectory(path([0, 0], [np.inf, np.inf], 10, 2))
    assert tr.at(0.0) == (10, 2, 0) and tr.at(5.0) == (10, 2, 0)


def test_trajectory_single_infection():
    tr = compartment_trajectory(path([0, 1.0], [np.inf, np.inf], 1, 1))
    assert tr.at(0.999) == (1, 1, 0)
    assert tr.at(1.0) == (0, 2, 0)


def test_trajectory_tie_removal_first():
    tr = compartment_trajectory(path([0, 1.0], [1.0, np.inf], 1, 1))
    assert list(zip(tr.S, tr.I, tr.R))[:3] == [(1, 1, 0), (1, 0, 1), (0, 1, 1)]


# ---------------------------------------------------------------- sufficient stats


def test_stats_no_events():
    s = sufficient_stats(path([0, 0], [np.inf, np.inf], 10, 2), ObservationGrid.uniform(1.0, 1), 1.0)
    assert (s.integral_si, s.n_infections, s.n_removals) == (20.0, 0, 0)


def test_stats_hand_example():
    s = sufficient_stats(path([0, 0.5], [np.inf, 0.75], 1, 1), ObservationGrid.uniform(1.0, 1), 1.0)
    assert s.integral_si == pytest.approx(0.5, abs=1e-15)
    assert s.sum_powered_durations == pytest.approx(0.25 + 1.0, abs=1e-15)
    assert (s.n_infections, s.n_removals) == (1, 1)


def random_path(rng, s0=None, i0=None, T=1.0, a=1.5):
    s0 = s0 or int(rng.integers(1, 8))
    i0 = i0 or int(rng.integers(1, 3))
    m = int(rng.integers(0, s0 + 1))
    inf = np.concatenate((np.zeros(i0), rng.uniform(0, T, m)))
    dur = rng.exponential(0.5, i0 + m)
    rem = np.where(inf + dur <= T, inf + dur, np.inf)
    return LatentPath(inf, rem, s0, i0)


def test_integral_matches_quadrature(rng):
    g = ObservationGrid.uniform(1.0, 1)
    for _ in range(100):
        p = random_path(rng)
        got = sufficient_stats(p, g, 1.0).integral_si
        want = si_quadrature(p.infection_time, p.removal_time, p.s0, p.i0, 1.0)
        assert got == pytest.approx(want, rel=1e-6)


# ---------------------------------------------------------------- likelihood


def test_loglik_zero_when_nobody_infectious():
    p = path([0, 0.8], [0.5, np.inf], 1, 1)
    assert sir_loglik(p, Params(1.0, 1.0), ObservationGrid.uniform(1.0, 1)) == -math.inf


def test_loglik_two_individuals_hand():
    # one initial infective removed at 0.7, one infection at 0.4 censored at T = 1
    beta, lam = 0.8, 1.3
    p = path([0, 0.4], [0.7, np.inf], 1, 1)
    want = (math.log(beta * 1) - beta * 0.4 + math.log(lam) - lam * 0.7 - lam * 0.6)
    got = sir_loglik(p, Params(beta, lam, 1.0), ObservationGrid.uniform(1.0, 1))
    assert got == pytest.approx(want, abs=1e-12)


def test_loglik_matches_naive(rng):
    g = ObservationGrid.uniform(1.0, 1)
    for _ in range(200):
        p = random_path(rng)
        params = Params(float(rng.uniform(0.1, 3)), float(rng.uniform(0.1, 3)), float(rng.choice([1.0, 2.0, 0.7])))
        got = sir_loglik(p, params, g)
        want = naive_loglik(p.infection_time, p.removal_time, p.s0, p.i0, 1.0, params.beta, params.lam,
                            params.shape)
        if want == -math.inf:
            assert got == -math.inf
        else:
            assert got == pytest.approx(want, rel=1e-10, abs=1e-10)


def test_loglik_factorisation():
    g = ObservationGrid.uniform(1.0, 1)
    p = path([0, 0.2, 0.5], [0.6, 0.9, np.inf], 4, 1)
    # changing beta only moves n_I log beta - beta * integral
    st = sufficient_stats(p, g, 2.0)
    d = sir_loglik(p, Params(2.0, 1.0, 2.0), g) - sir_loglik(p, Params(1.0, 1.0, 2.0), g)
    assert d == pytest.approx(st.n_infections * math.log(2.0) - st.integral_si, abs=1e-12)
    # moving a removal (not crossing any infection) changes only the removal factor
    q = path([0, 0.2, 0.5], [0.6, 0.95, np.inf], 4, 1)
    d_full = sir_loglik(q, Params(1.0, 1.0, 2.0), g) - sir_loglik(p, Params(1.0, 1.0, 2.0), g)
    d_inf = sufficient_stats(p, g, 2.0).integral_si - sufficient_stats(q, g, 2.0).integral_si
    d_rem = (math.log(0.75) - 0.75 ** 2) - (math.log(0.7) - 0.7 ** 2)
    assert d_full == pytest.approx(d_inf + d_rem, abs=1e-12)


# ---------------------------------------------------------------- binning, r0


def test_bin_infections():
    g = ObservationGrid(np.array([0.0, 1.0, 2.0]))
    assert list(bin_infections(path([0, 0], [np.inf, np.inf], 3, 2), g).counts) == [0, 0]
    assert list(bin_infections(path([0, 1.0, 1.5, 2.0], [np.inf] * 4, 3, 1), g).counts) == [1, 2]


def test_r0_examples():
    assert r0(Params(0.00225, 1.0, 2.0), 1000) == pytest.approx(1.994, abs=5e-4)
    assert r0(Params(1 / 1000, 1.0, 1.0), 1000) == pytest.approx(1.0)
    assert r0(Params(0.003, 1.0, 1.0), 1000) == pytest.approx(3.0)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_trajectory_invariants(seed):
    p = random_path(np.random.default_rng(seed))
    tr = compartment_trajectory(p)
    assert np.all(tr.S + tr.I + tr.R == p.n)
    assert np.all(np.diff(tr.S) <= 0) and np.all(np.diff(tr.R) >= 0)
    assert np.all(np.diff(tr.times) >= 0)
