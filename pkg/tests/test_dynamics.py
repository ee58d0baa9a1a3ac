"""Decay-trace simulation, lifetime fitting, and the bad-cavity limit."""

import numpy as np
import pytest

from cqedkit import dynamics
from cqedkit.dynamics import DecayTrace
from cqedkit.errors import ConfigurationError, RegimeWarning
from cqedkit.qdyn import HilbertConfig, SystemParams

CFG = HilbertConfig(n_max=1)


def fitted_rate_ghz(params, kappa):
    rate_guess = dynamics.effective_rate_bad_cavity(params)
    tau_guess = 1.0 / (2 * np.pi * rate_guess)
    trace = dynamics.simulate_decay(CFG, params, t_final=3.0 * tau_guess,
                                    dt=tau_guess / 60)
    fit = dynamics.fit_decay_lifetime(
        trace, skip_initial_ns=dynamics.cavity_loading_time(kappa))
    assert fit.converged
    return 1.0 / (2 * np.pi * fit.params["tau"].value)


class TestDecayTrace:
    def test_invariants(self):
        with pytest.raises(ConfigurationError):
            DecayTrace(t0=0.0, dt=0.0, values=np.ones(3))
        with pytest.raises(ConfigurationError):
            DecayTrace(t0=0.0, dt=0.1, values=np.array([1.0, -0.5]))
        with pytest.raises(ConfigurationError):
            DecayTrace(t0=0.0, dt=0.1, values=np.array([]))
        trace = DecayTrace(t0=0.5, dt=0.25, values=np.array([3.0, 2.0, 1.0]))
        np.testing.assert_allclose(trace.times, [0.5, 0.75, 1.0])


class TestSimulateDecay:
    def test_decoupled_matches_exponential(self):
        # energy decay time 1.84 ns; curve within 1e-5 everywhere
        params = SystemParams(g=0.0, kappa=0.0,
                              gamma_rad=1.0 / (2 * np.pi * 1.84))
        trace = dynamics.simulate_decay(CFG, params, t_final=5.0, dt=0.05)
        expected = np.exp(-trace.times / 1.84)
        assert np.max(np.abs(trace.values - expected)) < 1e-5

    def test_bad_cavity_lifetime(self):
        # g=1, kappa=100: adiabatic rate 4g^2/kappa -> tau = 3.979 ns
        params = SystemParams(g=1.0, kappa=100.0, gamma_rad=0.0)
        rate = fitted_rate_ghz(params, 100.0)
        assert 1.0 / (2 * np.pi * rate) == pytest.approx(3.979, rel=0.05)

    def test_rejects_drive(self):
        params = SystemParams(g=1.0, kappa=10.0, omega_drive=0.5)
        with pytest.raises(ConfigurationError):
            dynamics.simulate_decay(CFG, params, t_final=1.0, dt=0.1)

    def test_monotone_after_transient(self):
        # kappa >= 4g: no Rabi revival once the cavity has loaded
        rng = np.random.default_rng(5)
        for _ in range(4):
            g = float(rng.uniform(0.3, 1.5))
            kappa = float(rng.uniform(4.0, 20.0)) * g
            params = SystemParams(g=g, kappa=kappa,
                                  gamma_rad=float(rng.uniform(0.0, 0.1)))
            trace = dynamics.simulate_decay(CFG, params, t_final=4.0, dt=0.02)
            start = np.searchsorted(trace.times,
                                    2 * dynamics.cavity_loading_time(kappa))
            tail = trace.values[start:]
            assert np.all(np.diff(tail) <= 1e-10)


class TestEffectiveRate:
    def test_decoupled(self):
        params = SystemParams(g=0.0, kappa=10.0, gamma_rad=0.3)
        assert dynamics.effective_rate_bad_cavity(params) == pytest.approx(0.3)

    def test_resonant_formula(self):
        params = SystemParams(g=1.0, kappa=100.0, gamma_rad=0.0)
        assert dynamics.effective_rate_bad_cavity(params) == pytest.approx(0.04)

    def test_regime_warning(self):
        params = SystemParams(g=2.0, kappa=10.0)
        with pytest.warns(RegimeWarning):
            dynamics.effective_rate_bad_cavity(params)

    def test_detuning_lorentzian(self):
        params = SystemParams(g=1.0, kappa=40.0, gamma_rad=0.1,
                              delta_a=20.0)
        expected = 0.1 + 4.0 / 40.0 / (1.0 + 1.0)
        assert dynamics.effective_rate_bad_cavity(params) == pytest.approx(expected)


class TestMasterEquationAgreement:
    def test_fitted_rate_matches_adiabatic(self):
        # kappa/g >= 20 and no dephasing: within 5%
        for kappa in (25.0, 60.0):
            params = SystemParams(g=1.0, kappa=kappa, gamma_rad=0.02)
            rate = fitted_rate_ghz(params, kappa)
            expected = dynamics.effective_rate_bad_cavity(params)
            assert rate == pytest.approx(expected, rel=0.05)

    def test_detuning_sweep_follows_lorentzian(self):
        g, kappa, gamma_rad = 1.0, 30.0, 0.02
        base = fitted_rate_ghz(
            SystemParams(g=g, kappa=kappa, gamma_rad=gamma_rad, delta_a=300.0),
            kappa)
        for delta in (0.0, 10.0, 20.0):
            rate = fitted_rate_ghz(
                SystemParams(g=g, kappa=kappa, gamma_rad=gamma_rad,
                             delta_a=delta), kappa)
            predicted = 4 * g ** 2 / kappa / (1 + (2 * delta / kappa) ** 2)
            assert rate - base == pytest.approx(predicted, rel=0.05)

    def test_beta_from_two_traces(self):
        # resonant and far-detuned traces with the same gamma_rad reproduce
        # beta = enhancement/(enhancement + gamma_rad)
        g, kappa, gamma_rad = 1.0, 50.0, 0.05
        on = fitted_rate_ghz(SystemParams(g=g, kappa=kappa,
                                          gamma_rad=gamma_rad), kappa)
        off = fitted_rate_ghz(SystemParams(g=g, kappa=kappa,
                                           gamma_rad=gamma_rad,
                                           delta_a=500.0), kappa)
        beta = 1.0 - off / on  # = 1 - tau_on/tau_off
        expected = (4 * g ** 2 / kappa) / (gamma_rad + 4 * g ** 2 / kappa)
        assert beta == pytest.approx(expected, rel=0.05)


class TestCountsTrace:
    def test_seeded_and_deterministic(self):
        params = SystemParams(g=0.0, kappa=0.0, gamma_rad=0.1)
        trace = dynamics.simulate_decay(CFG, params, t_final=2.0, dt=0.05)
        a = dynamics.counts_trace(trace, 1e4, np.random.default_rng(9))
        b = dynamics.counts_trace(trace, 1e4, np.random.default_rng(9))
        np.testing.assert_array_equal(a.values, b.values)
        assert a.kind == "counts"
        assert a.values.max() <= 1.3e4

    def test_requires_signal(self):
        trace = DecayTrace(t0=0.0, dt=0.1, values=np.zeros(5))
        with pytest.raises(ConfigurationError):
            dynamics.counts_trace(trace, 100.0, np.random.default_rng(0))
