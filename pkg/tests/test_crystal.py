"""Equilibria, normal modes, continuation tracking, classification."""

import math

import numpy as np
import pytest

from ionlattice import (
    DomainError,
    EquilibriumError,
    IonSpecies,
    LatticeConfig,
    SingularConfigurationError,
    SoftModeError,
    TrapConfig,
    UnstableConfigurationError,
    classify_structure,
    continuation,
    equilibrium,
    gamma_parameters,
    length_scale,
    normal_modes,
    spot_variance_model,
    total_potential,
)
from ionlattice import constants as cn


def potential_oracle(positions, trap, species):
    """Plain double loop over the defining energy expression."""
    pos = np.asarray(positions, dtype=float)
    n = pos.shape[0]
    m = species.mass
    w2 = np.array([trap.omega_x ** 2, trap.omega_y ** 2, trap.omega_z ** 2])
    v = 0.5 * m * float(np.sum(w2 * pos ** 2))
    kq = cn.ECHARGE ** 2 / (4.0 * math.pi * cn.EPS0)
    for i in range(n):
        for j in range(i + 1, n):
            v += kq / np.linalg.norm(pos[i] - pos[j])
    return v


class TestLengthScale:
    def test_anchor_85khz(self, ca40):
        trap = TrapConfig.from_frequencies(85e3, 170e3)
        assert length_scale(trap, ca40) == pytest.approx(23.0137e-6,
                                                         rel=1e-4)

    def test_scaling_with_frequency(self, ca40):
        # ell ~ omega_z^(-2/3)
        t1 = TrapConfig.from_frequencies(85e3, 300e3)
        t2 = TrapConfig.from_frequencies(170e3, 300e3)
        ratio = length_scale(t1, ca40) / length_scale(t2, ca40)
        assert ratio == pytest.approx(2.0 ** (2.0 / 3.0), rel=1e-12)


class TestEquilibrium:
    def test_two_ion_spacing(self, ca40):
        trap = TrapConfig.from_frequencies(85e3, 350e3)
        st = equilibrium(2, trap, seed=0)
        z = np.sort(st.positions[:, 2]) / length_scale(trap, ca40)
        np.testing.assert_allclose(z, [-2.0 ** (-2.0 / 3.0),
                                       2.0 ** (-2.0 / 3.0)], rtol=1e-9)
        assert np.abs(st.positions[:, :2]).max() < 1e-15

    def test_three_ion_positions(self, ca40):
        trap = TrapConfig.from_frequencies(85e3, 350e3)
        st = equilibrium(3, trap, seed=0)
        z = np.sort(st.positions[:, 2]) / length_scale(trap, ca40)
        c = (5.0 / 4.0) ** (1.0 / 3.0)
        np.testing.assert_allclose(z, [-c, 0.0, c], rtol=1e-9, atol=1e-12)

    def test_three_ion_axial_mode_ratios(self):
        trap = TrapConfig.from_frequencies(85e3, 350e3)
        st = equilibrium(3, trap, seed=0)
        md = normal_modes(st, trap)
        lam = np.sort(md.eigenvalues[md.block_weight("z") > 0.99])
        np.testing.assert_allclose(lam, [1.0, 3.0, 5.8], rtol=1e-9)

    def test_zigzag_geometry(self, ca40, trap_zigzag4, zigzag4):
        p = zigzag4.positions / length_scale(trap_zigzag4, ca40)
        assert np.abs(p[:, 0]).max() < 1e-12  # buckles along the soft axis
        np.testing.assert_allclose(
            np.sort(np.abs(p[:, 1])),
            [0.06763967, 0.06763967, 0.23173056, 0.23173056], rtol=1e-5)
        np.testing.assert_allclose(
            np.sort(np.abs(p[:, 2])),
            [0.40039682, 0.40039682, 1.37174197, 1.37174197], rtol=1e-5)

    def test_gradient_converged(self, string8, zigzag4, octa6):
        for st in (string8, zigzag4, octa6):
            assert st.gradient_norm <= 1e-10
            assert not st.is_saddle

    def test_deterministic_in_seed(self, trap_zigzag4):
        a = equilibrium(4, trap_zigzag4, seed=7)
        b = equilibrium(4, trap_zigzag4, seed=7)
        np.testing.assert_array_equal(a.positions, b.positions)

    def test_potential_matches_oracle(self, ca40, trap_octa6, octa6):
        v = total_potential(octa6.positions, trap_octa6, species=ca40)
        assert v == pytest.approx(
            potential_oracle(octa6.positions, trap_octa6, ca40), rel=1e-12)
        assert v == pytest.approx(octa6.potential_value, rel=1e-12)

    def test_potential_with_lattice(self, ca40, trap_zigzag4, zigzag4):
        latt = LatticeConfig(depth_U0=cn.KB * 5e-3,
                             wavevector_k=ca40.lattice_wavevector,
                             detuning=2 * math.pi * 0.76e12)
        v = total_potential(zigzag4.positions, trap_zigzag4, latt,
                            species=ca40)
        k = ca40.lattice_wavevector
        extra = latt.depth_U0 * float(
            np.sum(np.sin(k * zigzag4.positions[:, 2]) ** 2))
        base = potential_oracle(zigzag4.positions, trap_zigzag4, ca40)
        assert v == pytest.approx(base + extra, rel=1e-12)

    def test_coincident_ions_rejected(self, trap_zigzag4):
        pos = np.zeros((2, 3))
        with pytest.raises(SingularConfigurationError):
            total_potential(pos, trap_zigzag4)

    def test_single_ion(self, trap_zigzag4):
        st = equilibrium(1, trap_zigzag4, seed=0)
        np.testing.assert_allclose(st.positions, np.zeros((1, 3)),
                                   atol=1e-20)

    def test_zero_ions_rejected(self, trap_zigzag4):
        with pytest.raises(DomainError):
            equilibrium(0, trap_zigzag4)


class TestNormalModes:
    def test_orthonormal_eigenvectors(self, string8_modes, trap_zigzag4,
                                      zigzag4, trap_octa6, octa6):
        mods = [string8_modes,
                normal_modes(zigzag4, trap_zigzag4),
                normal_modes(octa6, trap_octa6)]
        for md in mods:
            b = md.coordinates
            gram = b.T @ b
            assert np.abs(gram - np.eye(b.shape[0])).max() <= 1e-10

    def test_string8_top_mode(self, string8_modes):
        top = string8_modes.frequencies.max() / (2.0 * math.pi)
        assert top == pytest.approx(381.0044e3, rel=1e-5)

    def test_com_modes_at_trap_frequencies(self, string8_modes, trap_string8):
        # the three center-of-mass modes sit exactly at the trap frequencies
        f = string8_modes.frequencies
        for w in (trap_string8.omega_x, trap_string8.omega_y,
                  trap_string8.omega_z):
            assert np.min(np.abs(f - w)) / w < 1e-9

    def test_requires_equilibrium(self, string8, trap_string8):
        bad = string8.positions.copy()
        bad[0, 2] *= 1.05
        from ionlattice import CrystalState
        st = CrystalState(positions=bad, potential_value=0.0,
                          lattice_depth=0.0, gradient_norm=1.0)
        with pytest.raises(EquilibriumError):
            normal_modes(st, trap_string8)

    def test_saddle_string_rejected(self, trap_zigzag4):
        # a 4-ion string is stationary but unstable at (85, 170) kHz;
        # warm-starting from a genuinely linear crystal lands exactly on it
        tight = TrapConfig.from_frequencies(85e3, 500e3)
        string = equilibrium(4, tight, seed=1)
        saddle = equilibrium(4, trap_zigzag4,
                             initial_guess=string.positions)
        assert saddle.is_saddle
        with pytest.raises(UnstableConfigurationError):
            normal_modes(saddle, trap_zigzag4)

    def test_soft_rotation_mode(self):
        # degenerate radial trap: the zigzag plane costs nothing to rotate
        trap = TrapConfig.from_frequencies(85e3, 170e3, asymmetry=0.0)
        st = equilibrium(4, trap, seed=7)
        md = normal_modes(st, trap)
        assert md.eigenvalues.min() == 0.0
        with pytest.raises(SoftModeError):
            gamma_parameters(md)


class TestGamma:
    def test_brute_force_route(self, string8_modes, string8_gamma):
        # independent accumulation, one scalar sum per (ion, axis)
        b = string8_modes.coordinates
        lam = string8_modes.eigenvalues
        n = string8_modes.n_ions
        for mth in range(n):
            for a in range(3):
                g2 = sum(b[a * n + mth, p] ** 2 / lam[p]
                         for p in range(3 * n))
                assert string8_gamma.gamma[mth, a] == pytest.approx(
                    math.sqrt(g2), rel=1e-12)
        for mth in range(n):
            g2 = sum((b[mth, p] + b[n + mth, p]) ** 2 / (2.0 * lam[p])
                     for p in range(3 * n))
            assert string8_gamma.gamma_radial_projected[mth] == \
                pytest.approx(math.sqrt(g2), rel=1e-12)

    def test_single_ion_gamma_is_trap_ratio(self, trap_string8, ca40):
        st = equilibrium(1, trap_string8, seed=0)
        md = normal_modes(st, trap_string8)
        g = gamma_parameters(md)
        assert g.axial[0] == pytest.approx(1.0, rel=1e-12)
        assert g.gamma[0, 0] == pytest.approx(
            trap_string8.omega_z / trap_string8.omega_x, rel=1e-12)

    def test_spot_variance_model(self, string8_gamma, trap_string8, ca40):
        g = string8_gamma.axial[0]
        v = spot_variance_model(3.5e-3, g, trap_string8, ca40, 2.23e-6)
        thermal = cn.KB * 3.5e-3 / (ca40.mass * trap_string8.omega_z ** 2)
        assert v == pytest.approx(thermal * g ** 2 + 2.23e-6 ** 2,
                                  rel=1e-12)
        assert spot_variance_model(0.0, g, trap_string8, ca40, 2e-6) \
            == pytest.approx(4e-12, rel=1e-12)
        with pytest.raises(DomainError):
            spot_variance_model(-1e-3, g, trap_string8, ca40, 2e-6)


class TestClassification:
    def test_linear(self, string8, trap_string8):
        rep = classify_structure(string8, trap_string8)
        assert rep.kind == "linear"
        assert rep.out_of_plane_count == 0

    def test_planar_zigzag(self, zigzag4, trap_zigzag4):
        rep = classify_structure(zigzag4, trap_zigzag4)
        assert rep.kind == "planar"
        assert rep.out_of_plane_count == 0
        # buckling happens along y, so the plane is the y-z plane
        assert rep.plane_angle == pytest.approx(math.pi / 2.0, abs=1e-6)

    def test_three_dimensional(self, octa6, trap_octa6):
        rep = classify_structure(octa6, trap_octa6)
        assert rep.kind == "three-dimensional"
        assert rep.out_of_plane_count == 2


NU_GRID = (0.0487e6, 0.099e6, 0.149e6, 0.20e6)


@pytest.fixture(scope="module")
def swept(ca40, trap_zigzag4):
    latt = LatticeConfig(
        depth_U0=ca40.mass * (2 * math.pi * 0.20e6) ** 2
        / (2.0 * ca40.lattice_wavevector ** 2),
        wavevector_k=ca40.lattice_wavevector,
        detuning=2 * math.pi * 0.76e12)
    return continuation(4, trap_zigzag4, latt, species=ca40, seed=7,
                        nu_grid=NU_GRID)


class TestContinuation:
    NU_GRID = NU_GRID

    def test_zero_depth_row_matches_free_modes(self, swept, trap_zigzag4,
                                               zigzag4):
        assert swept.nu_latt[0] == 0.0
        md = normal_modes(zigzag4, trap_zigzag4)
        np.testing.assert_allclose(
            np.sort(swept.frequencies[:, 0]),
            np.sort(md.frequencies / (2.0 * math.pi)), rtol=1e-9)

    def test_final_row_matches_fresh_solve(self, swept, trap_zigzag4, ca40):
        latt = LatticeConfig(
            depth_U0=swept.depths[-1],
            wavevector_k=ca40.lattice_wavevector,
            detuning=2 * math.pi * 0.76e12)
        st = equilibrium(4, trap_zigzag4, latt,
                         initial_guess=swept.positions[-1], species=ca40)
        md = normal_modes(st, trap_zigzag4, latt, species=ca40)
        np.testing.assert_allclose(
            np.sort(swept.frequencies[:, -1]),
            np.sort(md.frequencies / (2.0 * math.pi)), rtol=1e-8)

    def test_requested_points_present(self, swept):
        for nu in self.NU_GRID:
            assert np.min(np.abs(swept.nu_latt - nu)) < 1e-9
        assert not swept.refined[0]
        assert swept.refined.shape == swept.nu_latt.shape

    def test_sign_continuity(self, swept):
        # tracked eigenvectors never flip sign between adjacent steps
        c = swept.coordinates
        for i in range(c.shape[0] - 1):
            ov = np.sum(c[i] * c[i + 1], axis=0)
            assert ov.min() > 0.0

    def test_branch_exchange(self, swept):
        # branches 2 and 3 trade axial character across the sweep
        az = swept.block_weight("z")
        idx = [int(np.argmin(np.abs(swept.nu_latt - nu)))
               for nu in self.NU_GRID]
        np.testing.assert_allclose(az[2, idx],
                                   [0.985, 0.460, 0.084, 0.038], atol=0.01)
        np.testing.assert_allclose(az[3, idx],
                                   [0.162, 0.656, 0.986, 0.998], atol=0.01)

    def test_no_ambiguous_crossings(self, swept):
        assert swept.flagged == []

    def test_frequencies_stay_positive(self, swept):
        assert swept.frequencies[:, 1:].min() > 0.0

    def test_grid_validation(self, trap_zigzag4, ca40):
        latt = LatticeConfig(depth_U0=cn.KB * 1e-3,
                             wavevector_k=ca40.lattice_wavevector,
                             detuning=2 * math.pi * 0.76e12)
        with pytest.raises(DomainError):
            continuation(2, trap_zigzag4, latt, steps=1, species=ca40)
