"""Pendulum action/period/localization against quadrature and ODE oracles."""

import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad, solve_ivp
from scipy.stats import halfnorm, kstest

from ionlattice import (
    AdiabaticityWarning,
    DomainError,
    EnergyEnsemble,
    IonSpecies,
    LatticeConfig,
    RampProfile,
    SeparatrixError,
    TurningPointError,
    action_density,
    bunching,
    bunching_given_energy,
    delocalized_scattering_probability,
    dimensionless_action,
    energy_density,
    lattice_frequency,
    mean_scattering_rate,
    normalized_period,
    position_density_given_energy,
    scattering_probability,
    scattering_rate,
)
from ionlattice import constants as cn
from ionlattice.specfun import integrate_with_endpoint_singularity

U0 = cn.KB * 25e-3  # reference depth throughout


# ---------------------------------------------------------------------
# oracles: the action from its defining phase-space integral


def action_oracle(E, u0):
    """(4/pi) integral of sqrt(x - sin^2) over the accessible interval."""
    x = E / u0
    if x <= 1.0:
        theta_t = math.asin(math.sqrt(x))
        val, _ = quad(lambda t: math.sqrt(max(x - math.sin(t) ** 2, 0.0)),
                      0.0, theta_t, epsabs=1e-13, epsrel=1e-13, limit=200)
    else:
        val, _ = quad(lambda t: math.sqrt(x - math.sin(t) ** 2),
                      0.0, math.pi / 2.0, epsabs=1e-13, epsrel=1e-13,
                      limit=200)
    return 4.0 / math.pi * val


class TestAction:
    def test_against_oracle_below_and_above(self):
        for x in [1e-6, 0.01, 0.3, 0.7, 0.999, 1.001, 1.5, 4.0, 100.0]:
            e = x * U0
            np.testing.assert_allclose(dimensionless_action(e, U0),
                                       action_oracle(e, U0), rtol=1e-9)

    def test_separatrix_value(self):
        assert dimensionless_action(U0, U0) == pytest.approx(4.0 / math.pi,
                                                             rel=1e-12)

    def test_zero_energy(self):
        assert dimensionless_action(0.0, U0) == 0.0

    def test_deep_limit(self):
        # far above the barrier the free-rotor action 2 sqrt(E/U0) applies
        e = 1e4 * U0
        assert dimensionless_action(e, U0) == pytest.approx(
            2.0 * math.sqrt(1e4), rel=1e-4)

    @settings(max_examples=150, deadline=None)
    @given(st.floats(min_value=1e-6, max_value=50.0))
    def test_monotone_in_energy(self, x):
        e = x * U0
        e2 = (x + 1e-3) * U0
        assert dimensionless_action(e2, U0) > dimensionless_action(e, U0)


class TestPeriod:
    def test_harmonic_bottom(self):
        # normalized period -> (2/pi) K(0) = 1 at the well bottom
        assert normalized_period(1e-12 * U0, U0) == pytest.approx(1.0,
                                                                  rel=1e-6)

    def test_separatrix_divergence(self):
        with pytest.raises(SeparatrixError):
            normalized_period(U0, U0)
        assert normalized_period((1.0 - 1e-12) * U0, U0) > 5.0

    def test_tau_is_action_derivative(self):
        # tau = ds/dx on both sides of the separatrix, 1e-6 relative
        h = 1e-7
        for x in [0.05, 0.3, 0.8, 0.99, 1.01, 1.6, 3.0, 20.0]:
            ds = (dimensionless_action((x + h) * U0, U0)
                  - dimensionless_action((x - h) * U0, U0)) / (2.0 * h)
            tau = normalized_period(x * U0, U0)
            np.testing.assert_allclose(tau, ds, rtol=1e-6)


class TestEnergyDistribution:
    @pytest.mark.parametrize("theta", [0.05, 0.144, 1.0, 10.0])
    def test_energy_density_normalized(self, theta):
        t0 = theta * U0 / cn.KB

        val = integrate_with_endpoint_singularity(
            lambda e: energy_density(e, t0, U0), 0.0, np.inf,
            singular_points=[U0], tol=1e-10)
        assert val == pytest.approx(1.0, abs=1e-6)

    def test_action_density_normalized(self):
        t0 = 0.144 * U0 / cn.KB
        val, _ = quad(lambda s: action_density(s, t0, U0), 0.0, np.inf)
        assert val == pytest.approx(1.0, abs=1e-8)

    def test_action_sampling_matches_density(self, rng):
        # |N(0, sqrt(2 theta))| against its analytic CDF
        theta = 0.2
        ens = EnergyEnsemble(T0=theta * U0 / cn.KB, U0=U0)
        s = ens.sample_actions(20000, rng)
        res = kstest(s, halfnorm(scale=math.sqrt(2.0 * theta)).cdf)
        assert res.pvalue > 1e-3

    def test_energies_from_actions_round_trip(self, rng):
        ens = EnergyEnsemble(T0=3.6e-3, U0=U0)
        s = ens.sample_actions(500, rng)
        e = ens.energies_from_actions(s)
        s_back = np.array([dimensionless_action(ei, U0) for ei in e])
        np.testing.assert_allclose(s_back, s, rtol=1e-9, atol=1e-12)

    def test_adiabatic_invariant_under_depth_change(self, rng):
        # the action, not the energy, carries over when the depth moves
        ens = EnergyEnsemble(T0=3.6e-3, U0=U0)
        s = ens.sample_actions(200, rng)
        e1 = ens.energies_from_actions(s)
        ens2 = ens.at_depth(0.37 * U0)
        e2 = ens2.energies_from_actions(s)
        s1 = [dimensionless_action(e, ens.U0) for e in e1]
        s2 = [dimensionless_action(e, ens2.U0) for e in e2]
        np.testing.assert_allclose(s1, s2, rtol=1e-9)
        assert not np.allclose(e1, e2, rtol=1e-3, atol=0.0)


class TestPositionDistribution:
    @pytest.mark.parametrize("x", [0.1, 0.5, 0.96, 1.4, 5.0])
    def test_normalized_over_one_well(self, x):
        # support is (-zt, zt) below the barrier, the whole well above it
        e = x * U0
        zt = math.asin(math.sqrt(min(x, 1.0)))
        val = integrate_with_endpoint_singularity(
            lambda kz: position_density_given_energy(kz, e, U0),
            -zt, zt, tol=1e-9)
        assert val == pytest.approx(1.0, abs=1e-6)

    def test_forbidden_region_raises(self):
        with pytest.raises(TurningPointError):
            position_density_given_energy(1.0, 0.25 * U0, U0)

    def test_mean_sin2_consistent_with_position_density(self):
        # <sin^2> from the closed form vs direct quadrature over P(kz|E):
        # two independent routes that must agree
        for x in [0.2, 0.7, 0.98, 1.3, 6.0]:
            e = x * U0
            zt = math.asin(math.sqrt(min(x, 1.0)))
            val = integrate_with_endpoint_singularity(
                lambda kz: math.sin(kz) ** 2
                * position_density_given_energy(kz, e, U0),
                -zt, zt, tol=1e-9)
            np.testing.assert_allclose(bunching_given_energy(e, U0), val,
                                       rtol=0, atol=1e-6)

    def test_mean_sin2_limits(self):
        assert bunching_given_energy(0.0, U0) == 0.0
        assert bunching_given_energy(U0, U0) == 1.0
        assert bunching_given_energy(1e6 * U0, U0) == pytest.approx(0.5,
                                                                    rel=1e-5)


class TestBunching:
    # reference values from the defining double integral at tol 1e-10
    ANCHORS = {
        1e-5: 0.00178413,
        1e-3: 0.01784242,
        0.144: 0.21703265,
        1.0: 0.41291767,
        100.0: 0.49878840,
    }

    def test_anchor_values(self):
        for theta, b in self.ANCHORS.items():
            t0 = theta * U0 / cn.KB
            assert bunching(t0, U0) == pytest.approx(b, abs=2e-8)

    def test_deep_lattice_limit(self):
        theta = 1e-5
        t0 = theta * U0 / cn.KB
        assert bunching(t0, U0) == pytest.approx(math.sqrt(theta / math.pi),
                                                 rel=2e-3)

    def test_delocalized_limit(self):
        assert bunching(10.0, 1e-6 * cn.KB) == pytest.approx(0.5, abs=1e-4)

    def test_monotone_in_theta(self):
        t0s = np.geomspace(1e-4, 1.0, 12) * U0 / cn.KB
        vals = [bunching(t, U0) for t in t0s]
        assert np.all(np.diff(vals) > 0)

    def test_fast_path_matches_quadrature(self):
        # the interpolation table behind mean_scattering_rate vs the
        # exact integral it tabulates
        from ionlattice.pendulum import _bunching_table, _bunching_theta
        rng = np.random.default_rng(5)
        thetas = 10.0 ** rng.uniform(-4.8, 3.8, 25)
        exact = np.array([_bunching_theta(t, 1e-10) for t in thetas])
        np.testing.assert_allclose(_bunching_table(thetas), exact,
                                   rtol=0, atol=1e-6)


# ---------------------------------------------------------------------
# species / lattice / ramp plumbing


class TestParameterBundles:
    def test_lattice_frequency_anchor(self, ca40):
        nu = lattice_frequency(25e-3, ca40, ca40.lattice_wavevector)
        assert nu == pytest.approx(3.7244e6, rel=1e-4)

    def test_depth_frequency_round_trip(self, ca40):
        cfg = LatticeConfig(depth_U0=U0, wavevector_k=ca40.lattice_wavevector,
                            detuning=2 * math.pi * 0.76e12)
        nu = cfg.vibrational_frequency(ca40)
        assert nu == pytest.approx(
            lattice_frequency(25e-3, ca40, ca40.lattice_wavevector),
            rel=1e-12)

    def test_lattice_sign_consistency(self, ca40):
        with pytest.raises(DomainError):
            LatticeConfig(depth_U0=U0, wavevector_k=ca40.lattice_wavevector,
                          detuning=-2 * math.pi * 0.76e12)

    def test_ramp_profile(self):
        ramp = RampProfile(u0_max=U0, ramp_duration=2e-6, hold_duration=1e-6)
        assert ramp.depth(0.0) == 0.0
        assert ramp.depth(1e-6) == pytest.approx(0.5 * U0)
        assert ramp.depth(2e-6) == U0
        assert ramp.depth(3e-6) == U0
        with pytest.raises(DomainError):
            ramp.depth(-1e-9)
        with pytest.raises(DomainError):
            ramp.depth(3e-6 + 1e-9)

    def test_smoothstep_shape(self):
        ramp = RampProfile(u0_max=U0, ramp_duration=2e-6, hold_duration=0.0,
                           shape="smoothstep")
        assert ramp.depth(1e-6) == pytest.approx(0.5 * U0)
        assert ramp.depth(0.5e-6) < 0.25 * U0  # slow start

    def test_bad_shape(self):
        with pytest.raises(DomainError):
            RampProfile(u0_max=U0, ramp_duration=1e-6, hold_duration=0.0,
                        shape="cubic")


# ---------------------------------------------------------------------
# scattering


def _blue(ca40, depth=U0):
    return LatticeConfig(depth_U0=depth, wavevector_k=ca40.lattice_wavevector,
                         detuning=2 * math.pi * 0.76e12)


def _red(ca40, depth=U0):
    return LatticeConfig(depth_U0=-depth,
                         wavevector_k=ca40.lattice_wavevector,
                         detuning=-2 * math.pi * 0.76e12)


PAPER_RAMP = RampProfile(u0_max=U0, ramp_duration=2e-6, hold_duration=1e-6)


class TestScattering:
    def test_rate_vanishes_at_node(self, ca40):
        cfg = _blue(ca40)
        assert scattering_rate(0.0, cfg.rabi, cfg, ca40) == 0.0

    def test_full_lorentzian_far_detuned_limit(self, ca40):
        # at 0.76 THz the Lorentzian collapses onto the U0-proportional
        # form within (Gamma/Delta)^2 corrections
        cfg = _blue(ca40)
        kz = 0.7
        full = scattering_rate(kz, cfg.rabi, cfg, ca40)
        far = (ca40.gamma_397 / (cn.HBAR * abs(cfg.detuning)) * U0
               * math.sin(kz) ** 2)
        np.testing.assert_allclose(full, far, rtol=1e-3)

    def test_probability_against_ode_oracle(self, ca40):
        # independent route: integrate dp/dt = <Gamma>(t) (1 - p) directly
        for cfg in (_blue(ca40), _red(ca40)):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", AdiabaticityWarning)
                p = scattering_probability(3e-6, 3.6e-3, PAPER_RAMP, cfg,
                                           ca40)

            def rhs(t, y):
                return [mean_scattering_rate(t, 3.6e-3, PAPER_RAMP, cfg,
                                             ca40) * (1.0 - y[0])]

            sol = solve_ivp(rhs, (0.0, 3e-6), [0.0], rtol=1e-10, atol=1e-14,
                            dense_output=False, max_step=1e-7)
            np.testing.assert_allclose(p, sol.y[0, -1], rtol=0, atol=1e-6)

    def test_red_exceeds_blue(self, ca40):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", AdiabaticityWarning)
            for t0 in (1e-3, 3.6e-3, 10e-3):
                pb = scattering_probability(3e-6, t0, PAPER_RAMP,
                                            _blue(ca40), ca40)
                pr = scattering_probability(3e-6, t0, PAPER_RAMP,
                                            _red(ca40), ca40)
                assert pr >= pb

    def test_probability_monotone_in_time(self, ca40):
        cfg = _blue(ca40)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", AdiabaticityWarning)
            ps = [scattering_probability(t, 3.6e-3, PAPER_RAMP, cfg, ca40)
                  for t in (0.5e-6, 1e-6, 2e-6, 3e-6)]
        assert np.all(np.diff(ps) > 0)

    def test_pumping_scales_linearly(self, ca40):
        cfg = _blue(ca40)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", AdiabaticityWarning)
            p1 = scattering_probability(3e-6, 3.6e-3, PAPER_RAMP, cfg, ca40)
            p2 = scattering_probability(3e-6, 3.6e-3, PAPER_RAMP, cfg, ca40,
                                        p0=0.5)
        assert p2 == pytest.approx(0.5 * p1, rel=1e-12)

    def test_adiabaticity_warning_on_fast_ramp(self, ca40):
        cfg = _blue(ca40)
        fast = RampProfile(u0_max=U0, ramp_duration=50e-9,
                           hold_duration=1e-6)
        with pytest.warns(AdiabaticityWarning):
            scattering_probability(1e-6, 3.6e-3, fast, cfg, ca40)

    def test_delocalized_baseline(self, ca40):
        # closed form: exponent = pref * integral of U0(t) / 2
        cfg = _blue(ca40)
        p = delocalized_scattering_probability(3e-6, PAPER_RAMP, cfg, ca40)
        pref = ca40.gamma_397 / (cn.HBAR * cfg.detuning)
        expo = 0.5 * pref * U0 * (1e-6 + 1e-6)  # ramp/2 + hold
        assert p == pytest.approx(-math.expm1(-expo), rel=1e-9)
        # red and blue coincide on the uniform baseline
        pr = delocalized_scattering_probability(3e-6, PAPER_RAMP, _red(ca40),
                                                ca40)
        assert pr == pytest.approx(p, rel=1e-12)

    def test_static_lattice_needs_detuning(self, ca40):
        cfg = LatticeConfig(depth_U0=U0,
                            wavevector_k=ca40.lattice_wavevector,
                            detuning=0.0)
        with pytest.raises(DomainError):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", AdiabaticityWarning)
                scattering_probability(3e-6, 3.6e-3, PAPER_RAMP, cfg, ca40)

    def test_p32_channel_increases_rate(self, ca40):
        cfg = _blue(ca40)
        base = mean_scattering_rate(2.5e-6, 3.6e-3, PAPER_RAMP, cfg, ca40)
        both = mean_scattering_rate(2.5e-6, 3.6e-3, PAPER_RAMP, cfg, ca40,
                                    include_p32=True)
        assert both > base
        assert (both - base) / base < 0.2  # small correction, not dominant
