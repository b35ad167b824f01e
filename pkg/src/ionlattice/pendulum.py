"""Single-ion pendulum model of an optical standing wave.

An ion prepared in a thermal state (temperature T0) experiences, once the
lattice beams are on, the 1-D potential U(z) = U0 sin^2(kz): the classical
pendulum. If the depth is ramped slowly compared to the oscillation period
the action of the trajectory is conserved, so the action distribution of
the initial ideal gas fixes the statistics at any later depth. Everything
downstream (energy distribution, position statistics, bunching parameter,
photon-scattering probability during the ramp) follows from that invariant
plus complete elliptic integrals.

Conventions
-----------
* All elliptic integrals use the parameter m (see specfun).
* Dimensionless action: s(E) rises from 0 at the well bottom, reaches
  4/pi at the separatrix E = U0, and grows like 2 sqrt(E/U0) far above it.
* Normalized period tau(E) is the trajectory period in units of the
  small-oscillation period 1/nu_latt. Above the barrier the "period" is
  the transit time across one lattice cell (length pi/k), which is the
  unique reading consistent with tau = ds/d(E/U0) on both branches.
* Densities are normalized over one lattice well kz in [-pi/2, pi/2].
  sin^2 has period pi, so averages over [-pi, pi] are identical.
"""

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.integrate import IntegrationWarning, quad
from scipy.interpolate import PchipInterpolator

from . import constants as cn
from .errors import (
    AdiabaticityWarning,
    DomainError,
    SeparatrixError,
    TurningPointError,
)
from .specfun import (
    _ellipe_vec,
    _ellipk_vec,
    elliptic_e,
    elliptic_k,
    integrate_with_endpoint_singularity,
)

__all__ = [
    "IonSpecies",
    "LatticeConfig",
    "RampProfile",
    "EnergyEnsemble",
    "lattice_frequency",
    "action_density",
    "dimensionless_action",
    "normalized_period",
    "energy_density",
    "position_density_given_energy",
    "bunching_given_energy",
    "bunching",
    "scattering_rate",
    "mean_scattering_rate",
    "scattering_probability",
    "delocalized_scattering_probability",
]

_4_OVER_PI = 4.0 / math.pi


# ----------------------------------------------------------------------
# parameter bundles


@dataclass(frozen=True)
class IonSpecies:
    """Atomic constants of the trapped species.

    The decay rates and branching fractions are configuration inputs with
    literature defaults for Ca-40, not hard-coded truths: gamma_397 is the
    partial P1/2 -> S1/2 rate (the detected 397 nm photons), and
    branching_leave is the probability per scattering event that the ion
    leaves the lattice-coupled state.
    """

    mass: float  # kg
    lattice_transition_wavelength: float = cn.CA40_LATTICE_WAVELENGTH
    detection_wavelength: float = cn.CA40_DETECTION_WAVELENGTH
    gamma_p_total: float = cn.CA40_GAMMA_P
    gamma_397: float = cn.CA40_BRANCHING_397 * cn.CA40_GAMMA_P
    branching_leave: float = cn.CA40_BRANCHING_LEAVE
    fine_structure_splitting: Optional[float] = cn.CA40_FINE_STRUCTURE

    def __post_init__(self):
        if self.mass <= 0:
            raise DomainError("ion mass must be positive")
        if not 0 < self.gamma_397 <= self.gamma_p_total:
            raise DomainError("need 0 < gamma_397 <= gamma_p_total")
        if not 0 <= self.branching_leave <= 1:
            raise DomainError("branching_leave must lie in [0, 1]")

    @classmethod
    def ca40(cls):
        return cls(mass=cn.CA40_MASS)

    @property
    def lattice_wavevector(self):
        return 2.0 * math.pi / self.lattice_transition_wavelength


@dataclass(frozen=True)
class LatticeConfig:
    """Standing-wave parameters.

    depth_U0 is signed: positive for a blue-detuned lattice (ions collect
    at intensity nodes), negative for red. detuning is the lattice beam's
    detuning from the coupled transition and must carry the same sign.
    antinode_intensity / cross_section_397 are only needed when the mean
    scattering rate is computed from the photon flux instead of from the
    depth itself.
    """

    depth_U0: float  # J, signed
    wavevector_k: float  # 1/m
    detuning: float = 0.0  # rad/s, sign = blue/red
    antinode_intensity: Optional[float] = None  # W/m^2
    cross_section_397: Optional[float] = None  # m^2

    def __post_init__(self):
        if self.wavevector_k <= 0:
            raise DomainError("wavevector_k must be positive")
        if self.depth_U0 * self.detuning < 0:
            raise DomainError(
                "depth_U0 and detuning must carry the same sign "
                "(U0 = hbar*Omega^2/(4*Delta))")

    @property
    def depth(self):
        """Well depth |U0| in J."""
        return abs(self.depth_U0)

    @property
    def t_latt(self):
        """Depth expressed as a temperature |U0|/kB."""
        return self.depth / cn.KB

    @property
    def is_blue(self):
        sign = self.detuning if self.detuning != 0 else self.depth_U0
        return sign >= 0

    @property
    def rabi(self):
        """Antinode Rabi frequency Omega = sqrt(4 Delta U0 / hbar)."""
        prod = 4.0 * self.detuning * self.depth_U0
        return math.sqrt(prod / cn.HBAR)

    def vibrational_frequency(self, species):
        """nu_latt (Hz) for the given species at this depth."""
        return lattice_frequency(self.t_latt, species, self.wavevector_k)


@dataclass(frozen=True)
class RampProfile:
    """Depth schedule |U0|(t): a ramp over [0, ramp_duration] followed by a
    hold at u0_max for hold_duration. Shape "linear" is linear in depth;
    "smoothstep" uses 3x^2-2x^3 for a differentiable turn-on."""

    u0_max: float  # J, depth magnitude at the end of the ramp
    ramp_duration: float  # s
    hold_duration: float  # s
    shape: str = "linear"

    def __post_init__(self):
        if self.u0_max < 0:
            raise DomainError("u0_max is a depth magnitude, must be >= 0")
        if self.ramp_duration < 0 or self.hold_duration < 0:
            raise DomainError("durations must be non-negative")
        if self.shape not in ("linear", "smoothstep"):
            raise DomainError(f"unknown ramp shape {self.shape!r}")

    @property
    def t_end(self):
        return self.ramp_duration + self.hold_duration

    def depth(self, t):
        """|U0| at time t; t must lie in [0, t_end]."""
        if t < 0 or t > self.t_end:
            raise DomainError(f"t={t!r} outside ramp domain [0, {self.t_end}]")
        if t >= self.ramp_duration:
            return self.u0_max
        x = t / self.ramp_duration
        if self.shape == "smoothstep":
            x = x * x * (3.0 - 2.0 * x)
        return self.u0_max * x


# ----------------------------------------------------------------------
# pendulum kinematics


def lattice_frequency(T_latt, species, k):
    """Small-oscillation frequency nu_latt (Hz) at depth kB*T_latt.

    nu_latt = (k/2pi)*sqrt(2 kB T_latt / M): expanding U0 sin^2(kz) about
    a well bottom gives an angular frequency k*sqrt(2 U0/M).
    """
    if T_latt < 0:
        raise DomainError("T_latt must be non-negative")
    return k / (2.0 * math.pi) * math.sqrt(2.0 * cn.KB * T_latt / species.mass)


def dimensionless_action(E, U0):
    """Action of the trajectory with energy E, in units of U0/nu_latt.

    Continuous and monotone in E, with s(U0) = 4/pi at the separatrix.
    Below the barrier s = (4/pi)[E(m) - (1-m)K(m)], m = E/U0; above it
    s = (4/pi)sqrt(E/U0) E(U0/E).
    """
    if U0 <= 0:
        raise DomainError("U0 must be positive")
    if E < 0:
        raise DomainError("E must be non-negative")
    m = E / U0
    if m == 1.0:
        return _4_OVER_PI
    if m < 1.0:
        return _4_OVER_PI * (elliptic_e(m) - (1.0 - m) * elliptic_k(m))
    return _4_OVER_PI * math.sqrt(m) * elliptic_e(1.0 / m)


def normalized_period(E, U0):
    """Trajectory period over the small-oscillation period 1/nu_latt.

    tau = (2/pi) K(E/U0) below the barrier. Above it the relevant period
    is the transit time over one lattice cell, tau = (2/pi) sqrt(U0/E)
    K(U0/E); this branch is fixed (against a typographically ambiguous
    alternative) by requiring tau = ds/d(E/U0), which holds analytically,
    and by the free-flight limit tau -> sqrt(U0/E).
    """
    if U0 <= 0:
        raise DomainError("U0 must be positive")
    if E < 0:
        raise DomainError("E must be non-negative")
    m = E / U0
    if m == 1.0:
        raise SeparatrixError(
            "trajectory period diverges at the separatrix E = U0")
    if m < 1.0:
        return (2.0 / math.pi) * elliptic_k(m)
    return (2.0 / math.pi) * math.sqrt(1.0 / m) * elliptic_k(1.0 / m)


def action_density(s, T0, U0):
    """Density of the dimensionless action in the initial thermal gas.

    Half-Gaussian: exp(-s^2/(4 theta))/sqrt(pi theta) with
    theta = kB T0/U0. Conserved under adiabatic depth changes.
    """
    _check_t0_u0(T0, U0)
    if s < 0:
        raise DomainError("dimensionless action must be non-negative")
    theta = cn.KB * T0 / U0
    return math.exp(-s * s / (4.0 * theta)) / math.sqrt(math.pi * theta)


def energy_density(E, T0, U0):
    """Energy density P(E) at depth U0 for an initial temperature T0.

    P(E) = exp(-s(E)^2 U0/(4 kB T0)) / (U0 sqrt(pi kB T0/U0)) * tau(E).
    Diverges logarithmically (integrably) at E = U0; integrate across it
    with the singular point declared.
    """
    _check_t0_u0(T0, U0)
    s = dimensionless_action(E, U0)
    tau = normalized_period(E, U0)  # raises at the separatrix
    theta = cn.KB * T0 / U0
    return math.exp(-s * s / (4.0 * theta)) / (U0 * math.sqrt(math.pi * theta)) * tau


def position_density_given_energy(kz, E, U0):
    """Dwell-time density of the phase kz on a trajectory of energy E.

    P(kz|E) = 1/(pi tau(E) sqrt(E/U0 - sin^2 kz)), normalized to one over
    a single well kz in [-pi/2, pi/2] (and periodic beyond it). Below the
    barrier the trajectory never reaches sin^2(kz) >= E/U0; asking for the
    density there is a domain error rather than silently zero.
    """
    tau = normalized_period(E, U0)  # validates E, U0; raises on separatrix
    m = E / U0
    sin2 = math.sin(kz) ** 2
    if m < 1.0 and sin2 >= m:
        raise TurningPointError(
            f"kz={kz!r} lies beyond the turning point sin^2(kz) = E/U0 = {m}")
    return 1.0 / (math.pi * tau * math.sqrt(m - sin2))


def bunching_given_energy(E, U0):
    """Time average of sin^2(kz) on the trajectory with energy E.

    1 - E(m)/K(m) with m = E/U0 below the barrier and, above it,
    (E/U0)(1 - E(m)/K(m)) with m = U0/E. Rises from 0 (well bottom)
    through 1 at the separatrix and relaxes to 1/2 (delocalized).
    """
    if U0 <= 0:
        raise DomainError("U0 must be positive")
    if E < 0:
        raise DomainError("E must be non-negative")
    x = E / U0
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    if x < 1.0:
        return 1.0 - elliptic_e(x) / elliptic_k(x)
    m = 1.0 / x
    return x * (1.0 - elliptic_e(m) / elliptic_k(m))


def bunching(T0, U0, tol=1e-9):
    """Thermal bunching parameter B = integral P(E) <sin^2>(E) dE.

    Performed in the variable x = E/U0 with the separatrix declared as a
    singular point. B in [0, 1/2]: ~ kB T0/(2 U0) deep in the well,
    -> 1/2 when the lattice is a small perturbation.
    """
    _check_t0_u0(T0, U0)
    theta = cn.KB * T0 / U0
    return _bunching_theta(theta, tol)


def _bunching_theta(theta, tol=1e-9):
    # x = E/U0; P(E) dE = w(x) dx with w = exp(-s^2/(4 theta)) tau / sqrt(pi theta)
    norm = 1.0 / math.sqrt(math.pi * theta)

    def integrand(x):
        s = dimensionless_action(x, 1.0)
        tau = normalized_period(x, 1.0)
        b = bunching_given_energy(x, 1.0)
        return norm * math.exp(-s * s / (4.0 * theta)) * tau * b

    return integrate_with_endpoint_singularity(
        integrand, 0.0, np.inf, singular_points=[1.0], tol=tol)


class _BunchingTable:
    """Lazily built monotone interpolant of B(theta), theta = kB T0/U0.

    The scattering-probability integral and the depth scans evaluate B at
    thousands of depths; a PCHIP table in log10(theta) over [1e-5, 1e4]
    with analytic tails (B -> sqrt(theta/pi) deep, B -> 1/2 shallow)
    reproduces the quadrature to ~1e-7 at negligible cost.
    """

    LO, HI = 1e-5, 1e4

    def __init__(self):
        self._interp = None
        self._c_hi = None

    def _build(self):
        logs = np.linspace(math.log10(self.LO), math.log10(self.HI), 271)
        vals = np.array([_bunching_theta(10.0 ** lg, 1e-10) for lg in logs])
        self._interp = PchipInterpolator(logs, vals, extrapolate=False)
        self._c_hi = (0.5 - vals[-1]) * math.sqrt(self.HI)

    def __call__(self, theta):
        if self._interp is None:
            self._build()
        th = np.asarray(theta, dtype=float)
        scalar = th.ndim == 0
        th = np.atleast_1d(th)
        out = np.empty_like(th)
        lo = th < self.LO
        hi = th > self.HI
        mid = ~lo & ~hi
        out[lo] = np.sqrt(th[lo] / math.pi)
        out[hi] = 0.5 - self._c_hi / np.sqrt(th[hi])
        out[mid] = self._interp(np.log10(th[mid]))
        return float(out[0]) if scalar else out


_bunching_table = _BunchingTable()


# ----------------------------------------------------------------------
# thermal ensemble


class EnergyEnsemble:
    """Thermal ensemble of pendulum trajectories at depth U0.

    Frozen action statistics from the initial gas at T0; energies and
    densities at the current depth follow by mapping through s(E).
    """

    def __init__(self, T0, U0):
        _check_t0_u0(T0, U0)
        self.T0 = float(T0)
        self.U0 = float(U0)

    @property
    def theta(self):
        """kB T0 / U0, the single dimensionless parameter of the model."""
        return cn.KB * self.T0 / self.U0

    def action_density(self, s):
        return action_density(s, self.T0, self.U0)

    def energy_density(self, E):
        return energy_density(E, self.T0, self.U0)

    def bunching(self, tol=1e-9):
        return bunching(self.T0, self.U0, tol)

    def sample_actions(self, n, rng):
        """n draws of the dimensionless action (half-Gaussian)."""
        return np.abs(rng.normal(0.0, math.sqrt(2.0 * self.theta), size=n))

    def sample_energies(self, n, rng):
        """n energy draws (J) at the current depth via action inversion."""
        s = self.sample_actions(n, rng)
        return self.energies_from_actions(s)

    def energies_from_actions(self, s):
        """Map dimensionless actions to energies (J) at the current depth."""
        s = np.asarray(s, dtype=float)
        if np.any(s < 0):
            raise DomainError("actions must be non-negative")
        return _ratio_from_action(s) * self.U0

    def at_depth(self, U0):
        """Same ensemble adiabatically transported to a new depth."""
        return EnergyEnsemble(self.T0, U0)


def _action_of_ratio(x):
    # s as a function of x = E/U0, vectorized over both branches
    x = np.asarray(x, dtype=float)
    out = np.full(x.shape, _4_OVER_PI)
    below = x < 1.0
    above = x > 1.0
    xb = x[below]
    out[below] = _4_OVER_PI * (
        _ellipe_vec(xb) - (1.0 - xb) * _ellipk_vec(xb))
    xa = x[above]
    out[above] = _4_OVER_PI * np.sqrt(xa) * _ellipe_vec(1.0 / xa)
    return out


def _ratio_from_action(s):
    # invert the monotone s(x) by bisection; s >= 0 arrays
    s = np.atleast_1d(np.asarray(s, dtype=float))
    lo = np.zeros_like(s)
    # free limit s ~ 2 sqrt(x), padded so s(hi) > s everywhere
    hi = 1.5 * (s / 2.0) ** 2 + 2.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        take = _action_of_ratio(mid) < s
        lo = np.where(take, mid, lo)
        hi = np.where(take, hi, mid)
    return 0.5 * (lo + hi)


def _check_t0_u0(T0, U0):
    if T0 <= 0:
        raise DomainError("T0 must be positive")
    if U0 <= 0:
        raise DomainError("U0 must be positive")


# ----------------------------------------------------------------------
# photon scattering


def scattering_rate(kz, rabi, config, species):
    """Steady-state photon-scattering rate at phase kz (two-level OBE).

    Gamma_sc = (gamma_397/2) * (Omega sin kz)^2/2
               / (Gamma_P^2/4 + (Omega sin kz)^2/2 + Delta^2)

    with Delta = config.detuning. The position dependence enters through
    the local Rabi frequency Omega*sin(kz) of the standing wave.
    """
    if rabi < 0:
        raise DomainError("rabi must be non-negative")
    half_o2 = 0.5 * (rabi * math.sin(kz)) ** 2
    denom = 0.25 * species.gamma_p_total ** 2 + half_o2 + config.detuning ** 2
    return 0.5 * species.gamma_397 * half_o2 / denom


def _far_detuned_prefactor(config, species, include_p32):
    # rate per unit (depth * spatial factor): Gamma_sc = pref * U0(t) * X
    delta = config.detuning
    if delta == 0.0:
        raise DomainError(
            "far-detuned mean rate needs a nonzero lattice detuning")
    if config.antinode_intensity is not None and config.cross_section_397 is not None:
        # photon-flux form: (I/hbar omega) sigma_397, with the optical
        # angular frequency of the lattice beam and I scaled to depth
        omega_opt = 2.0 * math.pi * cn.C_LIGHT / species.lattice_transition_wavelength
        flux_max = config.antinode_intensity / (cn.HBAR * omega_opt)
        pref = flux_max * config.cross_section_397 / config.depth
    else:
        pref = species.gamma_397 / (cn.HBAR * abs(delta))
    if include_p32:
        if species.fine_structure_splitting is None:
            raise DomainError(
                "include_p32 requires species.fine_structure_splitting")
        # additive far-detuned channel at detuning Delta - Delta_fs, same
        # spatial profile; a small correction, not a full multi-level model
        d2 = delta - species.fine_structure_splitting
        pref += species.gamma_397 * abs(delta) / (cn.HBAR * d2 * d2)
    return pref


def mean_scattering_rate(t, T0, ramp, config, species, include_p32=False):
    """Ensemble-mean scattering rate at time t of the ramp.

    Far-detuned: <Gamma_sc>(t) = pref * U0(t) * X with X the thermal mean
    of the normalized local intensity: X = B for a blue lattice (ions
    pile up at the nodes), X = 1 - B for red. The position distribution
    follows the instantaneous depth adiabatically. Returns 0 when the
    lattice is off.
    """
    u0t = ramp.depth(t)
    if u0t <= 0.0:
        return 0.0
    pref = _far_detuned_prefactor(config, species, include_p32)
    b = _bunching_table(cn.KB * T0 / u0t)
    x_factor = b if config.is_blue else 1.0 - b
    return pref * u0t * x_factor


def scattering_probability(t0, T0, ramp, config, species, p0=1.0,
                           include_p32=False, tol=1e-12):
    """Probability of at least one scattering event by time t0.

    p(t0) = p0 * (1 - exp(-integral_0^t0 <Gamma_sc> dt)); p0 is the
    initial occupancy of the lattice-coupled state (optical pumping makes
    it ~1). Warns when the ramp is fast compared to the final lattice
    period, where the conserved-action assumption degrades.
    """
    if t0 < 0:
        raise DomainError("t0 must be non-negative")
    if not 0.0 <= p0 <= 1.0:
        raise DomainError("p0 must lie in [0, 1]")
    nu_final = lattice_frequency(ramp.u0_max / cn.KB, species,
                                 config.wavevector_k)
    if nu_final > 0 and ramp.ramp_duration < 10.0 / nu_final:
        warnings.warn(
            f"ramp_duration {ramp.ramp_duration:.3g} s is shorter than ten "
            f"lattice periods ({10.0 / nu_final:.3g} s); the adiabatic "
            "model may be unreliable", AdiabaticityWarning, stacklevel=2)

    t_up = min(t0, ramp.t_end)
    if t_up <= 0.0 or ramp.u0_max == 0.0:
        return 0.0

    def rate(t):
        return mean_scattering_rate(t, T0, ramp, config, species, include_p32)

    accum = 0.0
    t_ramp = min(t_up, ramp.ramp_duration)
    if t_ramp > 0.0:
        # near-zero depths push epsrel below roundoff; the absolute bound
        # is what the probability accuracy rests on, so judge by abserr
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", IntegrationWarning)
            val, err = quad(rate, 0.0, t_ramp, epsabs=tol, epsrel=1e-10,
                            limit=200)
        if err > 1e-8:
            warnings.warn(
                f"scattering-rate time integral only reached an error "
                f"bound of {err:.3g}", RuntimeWarning, stacklevel=2)
        accum += val
    if t_up > ramp.ramp_duration:  # hold segment: rate is constant
        accum += rate(ramp.t_end) * (t_up - ramp.ramp_duration)
    return p0 * -math.expm1(-accum)


def delocalized_scattering_probability(t0, ramp, config, species, p0=1.0,
                                       include_p32=False):
    """Scattering probability with the position factor pinned at 1/2.

    Reference baseline for an ion that samples the standing wave
    uniformly (no thermal localization): <sin^2 kz> = 1/2 regardless of
    depth, so blue and red coincide. Everything else matches
    scattering_probability.
    """
    if t0 < 0:
        raise DomainError("t0 must be non-negative")
    if not 0.0 <= p0 <= 1.0:
        raise DomainError("p0 must lie in [0, 1]")
    t_up = min(t0, ramp.t_end)
    if t_up <= 0.0 or ramp.u0_max == 0.0:
        return 0.0
    pref = _far_detuned_prefactor(config, species, include_p32)
    t_ramp = min(t_up, ramp.ramp_duration)
    depth_integral = 0.0
    if t_ramp > 0.0:
        depth_integral += quad(ramp.depth, 0.0, t_ramp,
                               epsabs=1e-14, epsrel=1e-12, limit=200)[0]
    if t_up > ramp.ramp_duration:
        depth_integral += ramp.u0_max * (t_up - ramp.ramp_duration)
    return p0 * -math.expm1(-0.5 * pref * depth_integral)
