"""Complete elliptic integrals and singularity-aware quadrature.

Argument convention
-------------------
All elliptic integrals here take the PARAMETER m, not the modulus k:

    K(m) = integral_0^{pi/2} dtheta / sqrt(1 - m sin^2 theta)
    E(m) = integral_0^{pi/2} sqrt(1 - m sin^2 theta) dtheta

so that energy ratios E/U0 (or U0/E) are passed directly as the argument.
Mixing up m and k = sqrt(m) silently corrupts every pendulum formula built
on top of these, which is why the convention is stated here once and tested.

Implementation is the arithmetic-geometric mean iteration (quadratic
convergence, no tables), good to ~1e-15 relative over the full domain.
"""

import math

import numpy as np
from scipy.integrate import quad

from .errors import (
    DomainError,
    EllipticDivergenceError,
    QuadratureConvergenceError,
)

__all__ = [
    "elliptic_k",
    "elliptic_e",
    "integrate_with_endpoint_singularity",
]

# convergence tolerance for the AGM loops; must sit safely above machine
# epsilon or the iteration can cycle at the last ulp and never terminate
_EPS = 1e-15
_MAX_AGM = 64


def elliptic_k(m):
    """Complete elliptic integral of the first kind, parameter convention.

    Parameters
    ----------
    m : float
        Parameter, 0 <= m < 1.

    Returns
    -------
    float
        K(m), relative error <= 1e-12.

    Raises
    ------
    EllipticDivergenceError
        If m is so close to 1 that K diverges (m = 1 included).
    DomainError
        If m < 0 or m > 1.

    Accepts arrays elementwise under the same domain rules.
    """
    if np.ndim(m) != 0:
        m = np.asarray(m, dtype=float)
        if np.any(m < 0.0) or np.any(m > 1.0):
            raise DomainError("elliptic parameter outside [0, 1)")
        if np.any(m == 1.0):
            raise EllipticDivergenceError(
                "K(m) diverges logarithmically at m=1 (separatrix)")
        return _ellipk_vec(m)
    if m < 0.0 or m > 1.0:
        raise DomainError(f"elliptic parameter m={m!r} outside [0, 1)")
    if 1.0 - m <= 0.0:
        raise EllipticDivergenceError(
            "K(m) diverges logarithmically at m=1 (separatrix)")
    a, b = 1.0, math.sqrt(1.0 - m)
    for _ in range(_MAX_AGM):
        if abs(a - b) <= _EPS * a:
            break
        a, b = 0.5 * (a + b), math.sqrt(a * b)
    return math.pi / (2.0 * a)


def elliptic_e(m):
    """Complete elliptic integral of the second kind, parameter convention.

    Parameters
    ----------
    m : float
        Parameter, 0 <= m <= 1.

    Returns
    -------
    float
        E(m), relative error <= 1e-12. E(1) = 1 exactly.

    Accepts arrays elementwise under the same domain rules.
    """
    if np.ndim(m) != 0:
        m = np.asarray(m, dtype=float)
        if np.any(m < 0.0) or np.any(m > 1.0):
            raise DomainError("elliptic parameter outside [0, 1]")
        return _ellipe_vec(m)
    if m < 0.0 or m > 1.0:
        raise DomainError(f"elliptic parameter m={m!r} outside [0, 1]")
    if m == 1.0:
        return 1.0
    a, b = 1.0, math.sqrt(1.0 - m)
    c2_sum = 0.5 * m  # 2^{-1} c_0^2 with c_0 = sqrt(m)
    pow2 = 1.0
    for _ in range(_MAX_AGM):
        if abs(a - b) <= _EPS * a:
            break
        c = 0.5 * (a - b)
        a, b = 0.5 * (a + b), math.sqrt(a * b)
        c2_sum += pow2 * c * c
        pow2 *= 2.0
    return math.pi / (2.0 * a) * (1.0 - c2_sum)


def _ellipk_vec(m):
    # vectorized AGM; caller guarantees 0 <= m < 1
    m = np.asarray(m, dtype=float)
    a = np.ones_like(m)
    b = np.sqrt(1.0 - m)
    for _ in range(_MAX_AGM):
        if np.all(np.abs(a - b) <= _EPS * a):
            break
        a, b = 0.5 * (a + b), np.sqrt(a * b)
    return np.pi / (2.0 * a)


def _ellipe_vec(m):
    # vectorized AGM; caller guarantees 0 <= m <= 1
    m = np.asarray(m, dtype=float)
    one = m == 1.0
    msafe = np.where(one, 0.0, m)
    a = np.ones_like(msafe)
    b = np.sqrt(1.0 - msafe)
    c2_sum = 0.5 * msafe
    pow2 = 1.0
    for _ in range(_MAX_AGM):
        if np.all(np.abs(a - b) <= _EPS * a):
            break
        c = 0.5 * (a - b)
        a, b = 0.5 * (a + b), np.sqrt(a * b)
        c2_sum = c2_sum + pow2 * c * c
        pow2 *= 2.0
    out = np.pi / (2.0 * a) * (1.0 - c2_sum)
    return np.where(one, 1.0, out)


def integrate_with_endpoint_singularity(f, a, b, singular_points=(), tol=1e-9):
    """Adaptive quadrature of ``f`` on [a, b] with declared singular points.

    The interval is subdivided at every listed singular abscissa and each
    sub-panel is handled by a Gauss-Kronrod scheme whose extrapolation
    absorbs integrable endpoint singularities (log or inverse-square-root
    type). ``b`` may be ``numpy.inf``; the tail is then split off at a
    finite cut beyond the last singular point and transformed.

    Parameters
    ----------
    f : callable
        Scalar integrand, integrable on [a, b]. It is never evaluated
        exactly at a declared singular point.
    a, b : float
        Integration limits, a < b; b may be +inf.
    singular_points : sequence of float
        Interior abscissae where f has (integrable) singularities.
        Points must lie in [a, b].
    tol : float
        Requested absolute error.

    Returns
    -------
    float

    Raises
    ------
    QuadratureConvergenceError
        If the requested tolerance cannot be certified; the exception
        carries ``best_estimate`` and ``error_bound``.
    DomainError
        If a singular point lies outside [a, b].
    """
    pts = sorted(float(p) for p in singular_points)
    for p in pts:
        if p < a or p > b:
            raise DomainError(
                f"declared singular point {p!r} outside [{a!r}, {b!r}]")
    interior = [p for p in pts if a < p < b]

    def _run(g, lo, hi, points):
        kwargs = dict(epsabs=tol, epsrel=0.0, limit=200, full_output=1)
        if points:
            out = quad(g, lo, hi, points=points, **kwargs)
        else:
            out = quad(g, lo, hi, **kwargs)
        result, abserr = out[0], out[1]
        if len(out) > 3:  # ier != 0 path returns an explanation message
            raise QuadratureConvergenceError(
                f"quadrature on [{lo}, {hi}] did not converge: {out[3]}",
                best_estimate=result, error_bound=abserr)
        return result, abserr

    if math.isinf(b):
        cut = 2.0 * interior[-1] - a if interior else a + 1.0
        # fold [cut, inf) onto (0, 1] with a length taken from the
        # singular-point geometry; a fixed unit scale would put every
        # node far outside the support of integrands whose natural
        # units are very small or very large
        scale = cut - a if interior else 1.0

        def tail_integrand(t):
            x = cut + scale * (1.0 - t) / t
            return f(x) * scale / (t * t)

        total, err = _run(f, a, cut, interior)
        tail, terr = _run(tail_integrand, 0.0, 1.0, None)
        return total + tail
    total, err = _run(f, a, b, interior)
    return total
