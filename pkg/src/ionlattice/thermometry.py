"""Fluorescence-spot thermometry.

The imaged spot of a trapped ion is the convolution of its thermal position
spread with the imaging resolution, so for ion m along axis u

    sigma^2_{m,u} = (kB T / (M omega_z^2)) gamma^2_{m,u} + sigma_res^2,

with gamma from the normal-mode decomposition (crystal.gamma_parameters).
This module closes the loop in both directions: synthesize pixelated,
Poisson-noisy spot profiles at a known temperature, fit 1-D Gaussians with
confidence intervals, and recover T by a weighted least-squares fit of the
single slope parameter across ions.

The resolution numbers are standard deviations in meters (the often-quoted
"sigma^2 = 2.23 um" style values are read as sigma, since a variance in um
would be dimensionally inconsistent). Default analysis uses axial spots
only; the radial projection (camera at 45 degrees to the trap's radial
axes) is available behind a flag because its gamma values are sensitive to
the radial-asymmetry bias.
"""

import csv
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.optimize import least_squares
from scipy.stats import t as student_t

from . import constants as cn
from .crystal import spot_variance_model
from .errors import (
    DegenerateFitError,
    DomainError,
    FitConvergenceError,
    NegativeThermalVarianceError,
    SpotParseError,
)
from .pendulum import IonSpecies

__all__ = [
    "ImagingConfig",
    "SpotMeasurement",
    "TemperatureEstimate",
    "GaussianFit",
    "fit_gaussian_profile",
    "estimate_temperature",
    "synthesize_spots",
    "ion_temperature_from_mode_temperatures",
    "read_spot_profiles",
    "write_spot_profiles",
    "fit_spot_profiles",
]

_AXES = ("axial", "radial")


@dataclass(frozen=True)
class ImagingConfig:
    """Imaging-chain constants: per-axis resolution (std dev) and pixel pitch."""

    sigma_res_axial: float  # m
    sigma_res_radial: float  # m
    pixel_pitch: float  # m per pixel

    def __post_init__(self):
        if min(self.sigma_res_axial, self.sigma_res_radial,
               self.pixel_pitch) <= 0:
            raise DomainError("imaging constants must be positive")

    def sigma_res(self, axis):
        return self.sigma_res_axial if axis == "axial" \
            else self.sigma_res_radial


@dataclass(frozen=True, eq=False)
class SpotMeasurement:
    """One fitted 1-D spot profile.

    profile holds the raw (pixel, counts) samples; fitted values are in
    meters. overlapping marks spots whose center lies within two widths
    of another ion's center on the same projection axis.
    """

    ion_index: int
    axis: str  # "axial" or "radial"
    profile: np.ndarray  # (n, 2): pixel coordinate, counts
    fitted_center: float  # m
    fitted_sigma: float  # m
    sigma_ci95: float  # m, half-width
    overlapping: bool = False


@dataclass(frozen=True, eq=False)
class TemperatureEstimate:
    T: float  # K
    ci95: float  # K, half-width
    per_ion_residuals: np.ndarray  # m^2, one per spot used


class GaussianFit(NamedTuple):
    center: float
    sigma: float
    amplitude: float
    offset: float
    ci95: tuple  # (center, sigma, amplitude, offset) half-widths


def _gauss(x, a, c, s, b):
    return a * np.exp(-0.5 * ((x - c) / s) ** 2) + b


def fit_gaussian_profile(profile, pixel_pitch=1.0, poisson_weights=True):
    """Least-squares Gaussian fit A exp(-(x-c)^2/(2 sigma^2)) + B.

    profile is a sequence of (pixel, counts) pairs; results are scaled by
    pixel_pitch so they come back in meters when the pitch is given (and
    in pixel units for the default pitch of 1). Confidence intervals are
    95% from the linearized covariance at the optimum, scaled by the
    reduced chi-square. With poisson_weights a second fit runs with
    residuals weighted by the first fit's model (weights frozen, so the
    estimate stays unbiased); the chi-square scaling makes the intervals
    insensitive to an overall gain either way.

    Raises DegenerateFitError for a constant profile or a width collapsing
    below a quarter pixel, FitConvergenceError if the solver stalls.
    """
    arr = np.asarray(list(profile), dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 5:
        raise DegenerateFitError(
            "need at least 5 (pixel, counts) samples to fit a Gaussian")
    x, y = arr[:, 0], arr[:, 1]
    if np.ptp(y) == 0.0:
        raise DegenerateFitError("constant profile has no peak to fit")

    b0 = float(np.min(y))
    a0 = float(np.max(y) - b0)
    c0 = float(x[np.argmax(y)])
    wsum = max(float(np.sum(y - b0)), 1e-12)
    s0 = math.sqrt(max(float(np.sum((y - b0) * (x - c0) ** 2)) / wsum, 0.25))

    def make_funcs(sig):
        def resid(p):
            return (_gauss(x, *p) - y) / sig

        def jac(p):
            a, c, s, _ = p
            u = (x - c) / s
            e = np.exp(-0.5 * u * u)
            return np.column_stack([e, a * e * u / s, a * e * u * u / s,
                                    np.ones_like(x)]) / sig[:, None]
        return resid, jac

    resid, jac = make_funcs(np.ones_like(y))
    res = least_squares(resid, [a0, c0, s0, b0], jac=jac, method="lm",
                        xtol=1e-14, ftol=1e-14, gtol=1e-14, max_nfev=2000)
    if not res.success:
        raise FitConvergenceError(f"Gaussian fit did not converge: {res.message}")
    if poisson_weights:
        sig = np.sqrt(np.maximum(_gauss(x, *res.x), 1.0))
        resid, jac = make_funcs(sig)
        res = least_squares(resid, res.x, jac=jac, method="lm",
                            xtol=1e-14, ftol=1e-14, gtol=1e-14,
                            max_nfev=2000)
        if not res.success:
            raise FitConvergenceError(
                f"weighted Gaussian fit did not converge: {res.message}")
    a, c, s, b = res.x
    s = abs(s)
    if s < 0.25:  # below a quarter pixel the model is unresolvable
        raise DegenerateFitError(
            f"fitted width {s:.3g} px is below pixel_pitch/4")

    dof = max(len(y) - 4, 1)
    s2 = 2.0 * res.cost / dof
    jtj = res.jac.T @ res.jac
    try:
        cov = s2 * np.linalg.inv(jtj)
    except np.linalg.LinAlgError:
        cov = s2 * np.linalg.pinv(jtj)
    ci = 1.96 * np.sqrt(np.clip(np.diag(cov), 0.0, None))
    return GaussianFit(
        center=c * pixel_pitch,
        sigma=s * pixel_pitch,
        amplitude=a,
        offset=b,
        ci95=(ci[1] * pixel_pitch, ci[2] * pixel_pitch, ci[0], ci[3]),
    )


def _spot_gamma(spot, gamma):
    if spot.axis == "axial":
        return float(gamma.axial[spot.ion_index])
    return float(gamma.gamma_radial_projected[spot.ion_index])


def estimate_temperature(spots, gamma, trap, species, imaging,
                         include_radial=False):
    """Single-parameter weighted fit of T across many spots.

    Each spot contributes sigma_fit^2 - sigma_res^2 = c * gamma^2 with
    c = kB T/(M omega_z^2); weights are the inverse variances of the
    fitted sigma^2 (propagated from the 95% CI of sigma). Axial spots
    only by default. Because those weights are themselves estimates, the
    interval uses a Student-t quantile and is inflated by the reduced
    chi-square when the scatter exceeds the stated errors. A negative
    fitted c means every spot is narrower than the stated resolution;
    that raises, carrying the per-spot variance deficits.
    """
    used = [s for s in spots
            if s.axis == "axial" or (include_radial and s.axis == "radial")]
    if not used:
        raise DomainError("no usable spots (axial missing and radial excluded)")

    g2 = np.array([_spot_gamma(s, gamma) ** 2 for s in used])
    v = np.array([s.fitted_sigma ** 2 for s in used])
    res2 = np.array([imaging.sigma_res(s.axis) ** 2 for s in used])
    t = v - res2

    dsig = np.array([s.sigma_ci95 / 1.96 for s in used])
    var_v = (2.0 * np.sqrt(v) * dsig) ** 2
    if np.all(var_v == 0.0) or not np.any(np.isfinite(var_v)):
        w = np.ones_like(v)
        exact_weights = False
    else:
        with np.errstate(divide="ignore"):
            w = 1.0 / var_v
        w[~np.isfinite(var_v)] = 0.0  # infinite-CI spots carry no weight
        exact_weights = True
        if not np.any(w > 0):
            w = np.ones_like(v)
            exact_weights = False

    denom = float(np.sum(w * g2 * g2))
    c_hat = float(np.sum(w * g2 * t)) / denom
    if c_hat < 0.0:
        raise NegativeThermalVarianceError(
            "fitted thermal variance is negative: spots are narrower than "
            "the imaging resolution", deficits=t)
    resid = t - c_hat * g2
    n = len(used)
    dof = max(n - 1, 1)
    if exact_weights:
        var_c = 1.0 / denom
        if n > 1:  # estimated weights: inflate when scatter exceeds them
            chi2_red = float(np.sum(w * resid * resid)) / dof
            var_c *= max(1.0, chi2_red)
    else:  # no per-spot errors: estimate the scatter from the residuals
        s2 = float(np.sum(resid * resid)) / dof
        var_c = s2 / float(np.sum(g2 * g2))
    quantile = student_t.ppf(0.975, dof) if n > 1 else 1.96

    scale = species.mass * trap.omega_z ** 2 / cn.KB
    return TemperatureEstimate(
        T=c_hat * scale,
        ci95=quantile * math.sqrt(max(var_c, 0.0)) * scale,
        per_ion_residuals=resid,
    )


def _projected_center(position, axis):
    if axis == "axial":
        return float(position[2])
    return float((position[0] + position[1]) / math.sqrt(2.0))


def synthesize_spots(T, state, gamma, imaging, photon_budget, seed,
                     trap=None, species=None, axes=_AXES, noise=True,
                     background=0.0):
    """Generate per-ion pixelated spot profiles and fit them.

    For each ion and requested axis: expected spot width from
    spot_variance_model, the Gaussian sampled at pixel centers with the
    amplitude scaled so the total is photon_budget, optional Poisson
    noise (deterministic under seed), then a Gaussian fit of the result.
    Spots whose centers sit within two widths of another ion on the same
    projection axis are marked overlapping.
    """
    if T < 0:
        raise DomainError("temperature must be non-negative")
    if trap is None:
        raise DomainError("synthesize_spots needs the trap configuration")
    species = species if species is not None else IonSpecies.ca40()
    rng = np.random.default_rng(seed)
    pitch = imaging.pixel_pitch
    pos = np.asarray(state.positions, dtype=float)
    n = pos.shape[0]

    spots = []
    for axis in axes:
        if axis not in _AXES:
            raise DomainError(f"unknown spot axis {axis!r}")
        centers = np.array([_projected_center(pos[m], axis) for m in range(n)])
        gammas = gamma.axial if axis == "axial" else gamma.gamma_radial_projected
        sigmas = np.sqrt([
            spot_variance_model(T, float(gm), trap, species,
                                imaging.sigma_res(axis))
            for gm in gammas])
        for m in range(n):
            c, s = centers[m], sigmas[m]
            others = np.delete(np.arange(n), m)
            overlap = bool(np.any(
                np.abs(centers[others] - c)
                < 2.0 * np.maximum(sigmas[others], s)))
            lo = math.floor((c - 5.0 * s) / pitch)
            hi = math.ceil((c + 5.0 * s) / pitch)
            px = np.arange(lo, hi + 1, dtype=float)
            amp = photon_budget * pitch / (s * math.sqrt(2.0 * math.pi))
            expected = amp * np.exp(
                -0.5 * ((px * pitch - c) / s) ** 2) + background
            counts = rng.poisson(expected).astype(float) if noise else expected
            fit = fit_gaussian_profile(np.column_stack([px, counts]),
                                       pixel_pitch=pitch)
            spots.append(SpotMeasurement(
                ion_index=m, axis=axis,
                profile=np.column_stack([px, counts]),
                fitted_center=fit.center, fitted_sigma=fit.sigma,
                sigma_ci95=fit.ci95[1], overlapping=overlap))
    return spots


def ion_temperature_from_mode_temperatures(modes, mode_temperatures):
    """Per-ion, per-axis temperatures T_{m,a} = sum_p (b_{aN+m}^p)^2 T_p.

    With all mode temperatures equal this returns that temperature in
    every entry (eigenvector completeness); in general it redistributes
    per-mode energy onto ions and axes.
    """
    tp = np.asarray(mode_temperatures, dtype=float)
    b = modes.coordinates
    if tp.shape != (b.shape[0],):
        raise DomainError(
            f"need {b.shape[0]} mode temperatures, got {tp.shape}")
    n = modes.n_ions
    t_la = (b * b) @ tp  # length 3N, block-stacked
    return t_la.reshape(3, n).T  # (N, 3): x, y, z columns


# ----------------------------------------------------------------------
# CSV interface: columns ion_index, axis, pixel, counts


_HEADER = ["ion_index", "axis", "pixel", "counts"]


def read_spot_profiles(path):
    """Parse a spot CSV into [(ion_index, axis, (n,2) array), ...].

    Rows are grouped by (ion_index, axis) in order of first appearance.
    Malformed content raises SpotParseError naming the offending line.
    """
    groups = {}
    order = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SpotParseError("line 1: empty file, expected header "
                                 + ",".join(_HEADER)) from None
        if [h.strip() for h in header] != _HEADER:
            raise SpotParseError(
                f"line 1: expected header {','.join(_HEADER)!r}, "
                f"got {','.join(header)!r}")
        for i, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise SpotParseError(f"line {i}: expected 4 fields, got {len(row)}")
            try:
                ion = int(row[0])
                pixel = float(row[2])
                counts = float(row[3])
            except ValueError as exc:
                raise SpotParseError(f"line {i}: {exc}") from None
            axis = row[1].strip()
            if axis not in _AXES:
                raise SpotParseError(
                    f"line {i}: axis must be one of {_AXES}, got {axis!r}")
            key = (ion, axis)
            if key not in groups:
                groups[key] = []
                order.append(key)
            groups[key].append((pixel, counts))
    return [(ion, axis, np.asarray(groups[(ion, axis)], dtype=float))
            for ion, axis in order]


def write_spot_profiles(spots, path):
    """Write SpotMeasurements (or (ion, axis, profile) triples) to CSV."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_HEADER)
        for spot in spots:
            if isinstance(spot, SpotMeasurement):
                ion, axis, prof = spot.ion_index, spot.axis, spot.profile
            else:
                ion, axis, prof = spot
            for pixel, counts in np.asarray(prof, dtype=float):
                writer.writerow([ion, axis, "%.9g" % pixel, "%.9g" % counts])


def fit_spot_profiles(profiles, imaging):
    """Fit raw (ion, axis, profile) triples into SpotMeasurements."""
    out = []
    for ion, axis, prof in profiles:
        fit = fit_gaussian_profile(prof, pixel_pitch=imaging.pixel_pitch)
        out.append(SpotMeasurement(
            ion_index=ion, axis=axis, profile=np.asarray(prof, dtype=float),
            fitted_center=fit.center, fitted_sigma=fit.sigma,
            sigma_ci95=fit.ci95[1]))
    return out
