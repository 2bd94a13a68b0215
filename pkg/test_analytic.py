"""
analytic 模块测试：单光子概率 p1、光子列、平均光子数与一阶相干函数
"""

import numpy as np
import pytest
from scipy.integrate import quad

from ppdsim.analytic import (
    Regime,
    TrainParams,
    g1,
    g1_first_zero,
    mean_photon_number,
    p1,
    photon_train,
    slow_decay_rate,
    weak_coupling_rate,
)
from ppdsim.errors import DomainError


def test_regime_flag():
    assert TrainParams(0.1, 1.0, 10.0).regime is Regime.OVERDAMPED
    assert TrainParams(0.25, 1.0, 10.0).regime is Regime.CRITICAL
    assert TrainParams(1.0, 1.0, 10.0).regime is Regime.UNDERDAMPED
    params = TrainParams(0.1, 1.0, 10.0)
    assert params.beta == pytest.approx(np.sqrt(0.84))
    assert params.phi == pytest.approx(np.arctan(5.0))


def test_train_params_validation():
    with pytest.raises(DomainError):
        TrainParams(0.0, 1.0, 1.0)
    with pytest.raises(DomainError):
        TrainParams(0.1, -1.0, 1.0)
    with pytest.raises(DomainError):
        TrainParams(0.1, 1.0, 0.0)


def test_p1_starts_at_zero():
    for g, kappa in ((0.1, 1.0), (0.25, 1.0), (1.0, 0.5)):
        assert p1(0.0, TrainParams(g, kappa, 1.0)) == 0.0


def test_p1_negative_time_rejected():
    with pytest.raises(DomainError):
        p1(-1.0, TrainParams(0.1, 1.0, 1.0))


def test_p1_critical_value():
    assert p1(4.0, TrainParams(0.25, 1.0, 1.0)) == pytest.approx(np.exp(-2.0), rel=1e-12)


def test_p1_matches_printed_form_away_from_critical():
    params = TrainParams(0.1, 1.0, 1.0)
    t = np.linspace(0.0, 40.0, 81)
    delta = params.kappa ** 2 - 16 * params.g ** 2
    printed = 8 * params.g ** 2 / delta * np.exp(-params.kappa * t / 2) * (np.cosh(0.5 * t * np.sqrt(delta)) - 1)
    np.testing.assert_allclose(p1(t, params), printed, rtol=1e-10, atol=1e-15)


def test_p1_continuous_across_critical_point():
    kappa = 1.0
    eps = 1e-8 * kappa ** 2
    above = TrainParams(np.sqrt((kappa ** 2 - eps) / 16), kappa, 1.0)
    below = TrainParams(np.sqrt((kappa ** 2 + eps) / 16), kappa, 1.0)
    critical = TrainParams(0.25, kappa, 1.0)
    t = np.linspace(0.0, 30.0, 61)
    assert np.max(np.abs(p1(t, above) - p1(t, below))) < 1e-6
    assert np.max(np.abs(p1(t, above) - p1(t, critical))) < 1e-6


def test_p1_is_a_probability():
    rng = np.random.default_rng(17)
    t = np.linspace(0.0, 200.0, 2001)
    for _ in range(100):
        params = TrainParams(rng.uniform(0.01, 2.0), rng.uniform(0.0, 3.0), 1.0)
        values = p1(t, params)
        assert values.min() >= 0.0
        assert values.max() <= 1.0 + 1e-12


@pytest.mark.parametrize("ratio", [0.05, 0.1, 0.2])
def test_late_time_decay_rate(ratio):
    params = TrainParams(ratio, 1.0, 1.0)
    t = np.linspace(40.0, 80.0, 201)
    fitted = -np.polyfit(t, np.log(p1(t, params)), 1)[0]
    assert fitted == pytest.approx(slow_decay_rate(params), rel=1e-3)
    if ratio < 0.2:
        assert fitted == pytest.approx(weak_coupling_rate(params), rel=0.05)


def test_decay_rate_on_short_window():
    params = TrainParams(0.1, 1.0, 1.0)
    t = np.linspace(20.0, 40.0, 101)
    fitted = -np.polyfit(t, np.log(p1(t, params)), 1)[0]
    assert fitted == pytest.approx(4 * 0.1 ** 2 / 1.0, rel=0.05)


def test_slow_rate_undefined_when_underdamped():
    with pytest.raises(DomainError):
        slow_decay_rate(TrainParams(1.0, 1.0, 1.0))


def test_p1_integral_identity():
    rng = np.random.default_rng(23)
    for _ in range(100):
        kappa = rng.uniform(0.5, 2.0)
        params = TrainParams(rng.uniform(0.03, 0.24) * kappa, kappa, 1.0)
        split = 20.0 / kappa
        head, _ = quad(lambda t: p1(t, params), 0.0, split, epsabs=1e-13, epsrel=1e-12, limit=200)
        tail, _ = quad(lambda t: p1(t, params), split, np.inf, epsabs=1e-13, epsrel=1e-12, limit=200)
        assert kappa * (head + tail) == pytest.approx(1.0, abs=1e-8)


def test_photon_train_first_window_and_periodicity():
    params = TrainParams(0.1, 1.0, 50.0)
    t = np.linspace(0.01, 49.99, 300)
    np.testing.assert_array_equal(photon_train(t, params), p1(t, params))
    np.testing.assert_allclose(photon_train(t + 50.0, params), photon_train(t, params), rtol=1e-9, atol=1e-15)
    assert photon_train(50.0, params) == 0.0
    assert photon_train(0.0, params) == 0.0


def test_photon_train_mean_matches_closed_form():
    g, kappa = 0.1, 1.0
    T = 100 * kappa / (4 * g ** 2)
    params = TrainParams(g, kappa, T)
    integral, _ = quad(lambda t: photon_train(t, params), 0.0, T, epsabs=1e-12, limit=500, points=[50.0])
    assert integral / T == pytest.approx(mean_photon_number(params), abs=1e-6)


def test_mean_photon_number_examples():
    assert mean_photon_number(TrainParams(0.1, 1.0, 10.0)) == pytest.approx(0.1)
    assert mean_photon_number(TrainParams(0.1, 2.0, 5.0)) == pytest.approx(0.1)
    assert mean_photon_number(TrainParams(0.1, 1.0, 1e12)) < 1e-11
    with pytest.raises(DomainError):
        mean_photon_number(TrainParams(0.1, 0.0, 10.0))


def test_g1_normalisation_and_parity():
    rng = np.random.default_rng(31)
    for _ in range(20):
        params = TrainParams(rng.uniform(0.05, 2.0), rng.uniform(0.0, 3.0), 1.0)
        assert g1(0.0, params) == pytest.approx(1.0, abs=1e-12)
        tau = rng.uniform(0.0, 20.0, 50)
        np.testing.assert_array_equal(g1(tau, params), g1(-tau, params))
        envelope = np.sqrt(1 + params.kappa ** 2 / (4 * params.g ** 2)) * np.exp(-params.kappa * tau / 2)
        assert np.all(np.abs(g1(tau, params)) <= envelope * (1 + 1e-12))


def test_g1_quarter_turn_zero():
    g = 0.7
    params = TrainParams(g, 2 * g, 1.0)
    assert g1(np.pi / (4 * g), params) == pytest.approx(0.0, abs=1e-12)
    tau = np.linspace(0.0, 5.0, 11)
    expected = np.sqrt(2) * np.exp(-g * tau) * np.cos(g * tau + np.pi / 4)
    np.testing.assert_allclose(g1(tau, params), expected, rtol=1e-12, atol=1e-15)


@pytest.mark.parametrize("g, kappa", [(0.1, 1.0), (0.7, 1.4), (1.0, 0.1), (2.0, 0.0)])
def test_g1_first_zero(g, kappa):
    params = TrainParams(g, kappa, 1.0)
    expected = (np.pi / 2 - params.phi) / g
    assert g1_first_zero(params) == pytest.approx(expected, abs=1e-9)
