"""
observables 模块测试：光子统计、激发概率、稳态 p_D、囚禁态判定与时间平均
"""

import math

import numpy as np
import pytest

from ppdsim.dynamics import build_liouvillian, fixed_point, simulate
from ppdsim.errors import DomainError, InconsistentStateError
from ppdsim.observables import (
    PoissonClass,
    detect_trapping,
    excitation_probability,
    rabi_angle,
    stationary_p_D,
    statistics,
    statistics_from_distribution,
    time_average,
)
from ppdsim.state import DotLevel, SystemParams, mixture, new_pure, pump_map, random_state

TRAP = SystemParams(g=1.0, kappa=1e-4, T=2 * np.pi, n_max=30)


@pytest.fixture(scope="module")
def trapped_state():
    result = fixed_point(build_liouvillian(TRAP), tol=1e-10, max_iter=100_000)
    assert result.converged
    return result.state


# ---------------------------------------------------------------------------
# 光子统计
# ---------------------------------------------------------------------------

def test_two_point_distribution():
    stats = statistics_from_distribution([0.5, 0.5])
    assert stats.mean_n == pytest.approx(0.5)
    assert stats.variance == pytest.approx(0.25)
    assert stats.mandel_Q == pytest.approx(-0.5)
    assert stats.classification is PoissonClass.SUB


@pytest.mark.parametrize("n", [1, 2, 7])
def test_fock_state_is_maximally_sub_poissonian(n):
    stats = statistics(new_pure(DotLevel.GROUND, n, 10))
    assert stats.mean_n == n
    assert stats.variance == 0.0
    assert stats.mandel_Q == -1.0


def test_truncated_poisson_is_poissonian():
    lam = 0.5
    p = np.array([math.exp(-lam) * lam ** n / math.factorial(n) for n in range(21)])
    stats = statistics_from_distribution(p / p.sum())
    assert abs(stats.mandel_Q) < 1e-6
    assert stats.classification is PoissonClass.POISSONIAN


def test_thermal_like_distribution_is_super_poissonian():
    p = 0.5 ** np.arange(1, 40)
    stats = statistics_from_distribution(p / p.sum())
    assert stats.mandel_Q > 0.5
    assert stats.classification is PoissonClass.SUPER


def test_vacuum_has_no_mandel_q():
    stats = statistics(new_pure(DotLevel.EXCITED, 0, 4))
    assert stats.mean_n == 0.0
    assert stats.mandel_Q is None
    assert stats.classification is None
    assert stats.as_dict()["classification"] is None


def test_unnormalised_distribution_rejected():
    with pytest.raises(DomainError):
        statistics_from_distribution([0.5, 0.4])


def test_moments_consistent_and_q_bounded():
    rng = np.random.default_rng(13)
    for _ in range(200):
        p = rng.random(rng.integers(2, 25)) ** 3
        p /= p.sum()
        stats = statistics_from_distribution(p)
        n = np.arange(len(p))
        assert stats.mean_n == pytest.approx(float(n @ p), abs=1e-12)
        assert stats.variance == pytest.approx(float(n ** 2 @ p) - stats.mean_n ** 2, abs=1e-12)
        if stats.mandel_Q is not None:
            assert stats.mandel_Q >= -1.0 - 1e-12


# ---------------------------------------------------------------------------
# 激发概率
# ---------------------------------------------------------------------------

def test_excitation_probability_examples():
    assert excitation_probability(new_pure(DotLevel.EXCITED, 2, 4)) == (1.0, 1.0)
    assert excitation_probability(new_pure(DotLevel.SEMI_EXCITED, 2, 4)) == (0.0, 1.0)
    assert excitation_probability(new_pure(DotLevel.GROUND, 2, 4)) == (0.0, 0.0)


def test_post_pump_value_matches_pump_map():
    rng = np.random.default_rng(19)
    for _ in range(20):
        state = random_state(6, rng)
        assert excitation_probability(state)[1] == pump_map(state).c_ee.sum()


def test_stationary_p_D_decoupled():
    L = build_liouvillian(SystemParams(g=0.0, kappa=0.5, T=1.0, n_max=3))
    state = fixed_point(L).require()
    assert stationary_p_D(state, L) == pytest.approx(1.0, abs=1e-12)


def test_stationary_p_D_rejects_transient_states():
    L = build_liouvillian(SystemParams(g=0.0, kappa=0.5, T=1.0, n_max=3))
    with pytest.raises(InconsistentStateError):
        stationary_p_D(new_pure(DotLevel.GROUND, 0, 3), L)


def test_stationary_p_D_trapping(trapped_state):
    assert stationary_p_D(trapped_state, build_liouvillian(TRAP)) == pytest.approx(1.0, abs=0.01)


# ---------------------------------------------------------------------------
# 囚禁态
# ---------------------------------------------------------------------------

def test_rabi_angle():
    assert rabi_angle(TRAP, 0) == pytest.approx(np.pi)
    assert rabi_angle(TRAP, 3) == pytest.approx(2 * np.pi)


def test_trapping_below_full_rabi_cycle():
    p = np.zeros(31)
    p[:4] = 0.25
    assert detect_trapping(p, 1e-2, TRAP) == 3


def test_flat_tail_has_no_trapping():
    p = np.full(31, 1 / 31)
    assert detect_trapping(p, 1e-2, TRAP) is None


def test_trapping_threshold_domain():
    with pytest.raises(DomainError):
        detect_trapping([1.0, 0.0], 1.0, TRAP)
    with pytest.raises(DomainError):
        detect_trapping([1.0, 0.0], 0.0, TRAP)


def test_trapping_monotone_in_threshold():
    rng = np.random.default_rng(29)
    params = SystemParams(g=1.0, kappa=1e-3, T=2.0, n_max=30)
    thresholds = [1e-4, 1e-3, 1e-2, 0.1, 0.5]
    for _ in range(50):
        p = rng.random(31) * np.exp(-np.arange(31) * rng.uniform(0.1, 2.0))
        p /= p.sum()
        found = [detect_trapping(p, th, params) for th in thresholds]
        previous = None
        for n_star in found:
            if previous is not None and n_star is not None:
                assert n_star <= previous
            if n_star is not None:
                previous = n_star


def test_trapped_vacuum(trapped_state):
    stats = statistics(trapped_state)
    assert stats.p_n[0] > 0.99
    assert stats.p_n[1:].sum() < 1e-2
    assert detect_trapping(stats.p_n, 1e-2, TRAP) == 0


# ---------------------------------------------------------------------------
# 时间平均
# ---------------------------------------------------------------------------

def _short_trajectory():
    params = SystemParams(g=0.5, kappa=0.3, T=2.0, n_max=4, tail_threshold=None)
    return simulate(build_liouvillian(params), new_pure(DotLevel.EXCITED, 0, 4), 6, 20)


def test_time_average_of_constant():
    assert time_average(_short_trajectory(), "trace", (0, 6)) == pytest.approx(1.0, abs=1e-12)


def test_time_average_window_checks():
    traj = _short_trajectory()
    with pytest.raises(DomainError):
        time_average(traj, "trace", (3, 3))
    with pytest.raises(DomainError):
        time_average(traj, "trace", (0, 7))
    with pytest.raises(DomainError):
        time_average(traj, "photons", (0, 2))


def test_photon_train_time_average():
    params = SystemParams(g=0.1, kappa=1.0, T=500.0, n_max=1, tail_threshold=None)
    traj = simulate(build_liouvillian(params), new_pure(DotLevel.EXCITED, 0, 1), 40, 1000)
    average = time_average(traj, "mean_n", (10, 40))
    assert average == pytest.approx(1.0 / (1.0 * 500.0), rel=0.005)


def test_mixture_statistics_combine_linearly():
    a = new_pure(DotLevel.EXCITED, 0, 3)
    b = new_pure(DotLevel.GROUND, 2, 3)
    stats = statistics(mixture([0.5, 0.5], [a, b]))
    assert stats.mean_n == pytest.approx(1.0)
    assert stats.variance == pytest.approx(1.0)
    assert stats.classification is PoissonClass.POISSONIAN
