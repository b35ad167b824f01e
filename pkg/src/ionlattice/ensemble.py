"""Crystal-scale scattering statistics.

A stored crystal sits in a Gaussian lattice beam propagating along the
trap axis, so each ion sees a depth reduced by its radial offset:
U0,i = U0 exp(-2 (x_i^2 + y_i^2)/w^2). Single-ion scattering
probabilities (pendulum.scattering_probability, each ion with its own
scaled ramp) combine into the per-ion mean p, the binomial distribution
of scatter counts across the crystal, and the fraction of detection
sequences that are not the first to scatter,

    f = 1 - (1 - (1 - p)^N) / (N p),

which is the experimentally visible contamination of "fresh" events.
"""

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from . import constants as cn
from .errors import DomainError
from .pendulum import (
    IonSpecies,
    bunching,
    delocalized_scattering_probability,
    lattice_frequency,
    scattering_probability,
)

__all__ = [
    "BeamProfile",
    "ScatteringScenario",
    "per_ion_depths",
    "mean_scattering_probability_per_ion",
    "scatter_count_pmf",
    "subsequent_fraction",
    "scan_depth",
]


@dataclass(frozen=True)
class BeamProfile:
    """Gaussian lattice beam along the trap z axis."""

    waist_radius: float  # m, 1/e^2 intensity radius

    def __post_init__(self):
        if self.waist_radius <= 0:
            raise DomainError("waist_radius must be positive")

    def depth_factor(self, positions):
        """Per-ion relative depth from the radial offsets (N,) in [0, 1]."""
        pos = np.asarray(positions, dtype=float)
        r2 = pos[:, 0] ** 2 + pos[:, 1] ** 2
        return np.exp(-2.0 * r2 / self.waist_radius ** 2)


@dataclass(frozen=True, eq=False)
class ScatteringScenario:
    """Everything one detection sequence needs.

    crystal: equilibrium CrystalState (positions set the depth factors),
    lattice: LatticeConfig at full depth, ramp: how it is switched on,
    T0: pre-lattice ion temperature, pumping_efficiency_per_ion: initial
    occupancy of the lattice-coupled state.
    """

    crystal: object
    species: IonSpecies
    lattice: object
    ramp: object
    T0: float  # K
    pumping_efficiency_per_ion: float = 1.0

    def __post_init__(self):
        if self.T0 <= 0:
            raise DomainError("T0 must be positive")
        if not 0.0 <= self.pumping_efficiency_per_ion <= 1.0:
            raise DomainError("pumping efficiency must lie in [0, 1]")

    @property
    def n_ions(self):
        return self.crystal.positions.shape[0]


def per_ion_depths(crystal, lattice, beam):
    """Signed per-ion depth (N,) in J: U0 * exp(-2 r_i^2 / w^2)."""
    return lattice.depth_U0 * beam.depth_factor(crystal.positions)


def mean_scattering_probability_per_ion(scenario, beam, t0=None,
                                        include_p32=False,
                                        delocalized=False):
    """Arithmetic mean over ions of the single-ion scattering probability.

    Each ion's ramp is rescaled by its beam depth factor; ions on the
    axis reproduce the single-ion value exactly. delocalized=True swaps
    in the uniform-position baseline (standing-wave factor 1/2).
    """
    if t0 is None:
        t0 = scenario.ramp.t_end
    factors = beam.depth_factor(scenario.crystal.positions)
    p0 = scenario.pumping_efficiency_per_ion
    total = 0.0
    for f in factors:
        ramp_i = dataclasses.replace(scenario.ramp,
                                     u0_max=scenario.ramp.u0_max * f)
        lattice_i = dataclasses.replace(scenario.lattice,
                                        depth_U0=scenario.lattice.depth_U0 * f)
        if delocalized:
            total += delocalized_scattering_probability(
                t0, ramp_i, lattice_i, scenario.species, p0=p0,
                include_p32=include_p32)
        else:
            total += scattering_probability(
                t0, scenario.T0, ramp_i, lattice_i, scenario.species, p0=p0,
                include_p32=include_p32)
    return total / len(factors)


def scatter_count_pmf(n_ions, p):
    """Binomial pmf over the number of ions that scattered, length N+1."""
    if n_ions < 1:
        raise DomainError("need at least one ion")
    if not 0.0 <= p <= 1.0:
        raise DomainError("per-ion probability must lie in [0, 1]")
    q = 1.0 - p
    return np.array([math.comb(n_ions, k) * p ** k * q ** (n_ions - k)
                     for k in range(n_ions + 1)])


def subsequent_fraction(n_ions, p):
    """Fraction of scattering sequences that were not the crystal's first.

    f = 1 - (1 - (1-p)^N) / (N p), the complement of the chance that a
    uniformly chosen scattering ion was the earliest among N independent
    attempts. Evaluated via expm1/log1p so the p -> 0 limit is a clean 0;
    f -> 1 - 1/N as p -> 1.
    """
    if n_ions < 1:
        raise DomainError("need at least one ion")
    if not 0.0 <= p <= 1.0:
        raise DomainError("per-ion probability must lie in [0, 1]")
    if p == 0.0 or n_ions == 1:
        return 0.0
    if p == 1.0:  # log1p(-1) diverges; the limit itself is finite
        return 1.0 - 1.0 / n_ions
    return 1.0 + math.expm1(n_ions * math.log1p(-p)) / (n_ions * p)


def scan_depth(scenario, beam, depth_grid, include_p32=False,
               delocalized=False):
    """Sweep the final lattice depth; one row per grid point.

    Returns a list of dicts with keys depth (J), nu_latt (Hz, on-axis
    final depth), p_per_ion, subsequent_fraction, and bunching (the
    single-ion localization at the on-axis depth; 1/2 at zero depth).
    Ramp shape and timings are held fixed while u0_max is rescaled.
    """
    n = scenario.n_ions
    rows = []
    for depth in np.asarray(depth_grid, dtype=float):
        if depth < 0:
            raise DomainError("depth grid entries must be non-negative")
        if depth == 0.0:
            rows.append({"depth": 0.0, "nu_latt": 0.0, "p_per_ion": 0.0,
                         "subsequent_fraction": 0.0, "bunching": 0.5})
            continue
        scale = depth / scenario.ramp.u0_max
        scen = dataclasses.replace(
            scenario,
            ramp=dataclasses.replace(scenario.ramp, u0_max=depth),
            lattice=dataclasses.replace(
                scenario.lattice,
                depth_U0=scenario.lattice.depth_U0 * scale))
        p = mean_scattering_probability_per_ion(
            scen, beam, include_p32=include_p32, delocalized=delocalized)
        rows.append({
            "depth": depth,
            "nu_latt": lattice_frequency(depth / cn.KB, scenario.species,
                                         scenario.lattice.wavevector_k),
            "p_per_ion": p,
            "subsequent_fraction": subsequent_fraction(n, p),
            "bunching": 0.5 if delocalized
            else bunching(scenario.T0, depth),
        })
    return rows
