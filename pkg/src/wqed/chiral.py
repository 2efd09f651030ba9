"""Single-photon transport through atoms on a chiral (one-way) waveguide.

A right-moving photon picks up one complex factor per atom,

    T_j = (delta_j + i(gamma_j - Gamma_j)) / (delta_j + i(gamma_j + Gamma_j)),

with ``delta_j = omega - omega_j``, so the chain transmission is the product
of ``|T_j|**2`` and does not depend on where the atoms sit.

For Gaussian frequency disorder the average ``<|tau|^2>`` and the
localization length ``xi = -1/<ln|tau|^2>`` (in atoms) reduce to
one-dimensional integrals evaluated here by adaptive Gauss-Kronrod
quadrature.
"""
from __future__ import annotations

import math
import warnings

import numpy as np
from scipy import integrate

from .core import Atom, AtomChain

QUAD_EPSABS = 1e-12
QUAD_EPSREL = 1e-10
# e^{-u^2} is below 1e-35 beyond this many units of sqrt(2)*sigma
_GAUSS_CUTOFF = 9.0


class QuadratureError(ArithmeticError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, message: str, estimate: float, abserr: float):
        super().__init__(f"{message} (estimate={estimate!r}, error bound={abserr!r})")
        self.estimate = estimate
        self.abserr = abserr


def _quad(f, a, b, points=None, what="integral"):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        out = integrate.quad(f, a, b, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL,
                             limit=400, points=points, full_output=1)
    value, abserr = out[0], out[1]
    if len(out) > 3 and abserr > max(QUAD_EPSABS, QUAD_EPSREL * abs(value)) * 100:
        raise QuadratureError(f"{what}: {out[3]}", value, abserr)
    return value


def atom_factor(delta, gamma, big_gamma):
    """Vectorised per-atom transmission factor ``T_j``.

    A decoupled, lossless atom exactly on resonance (0/0) is transparent.
    """
    delta = np.asarray(delta, dtype=float)
    num = delta + 1j * (gamma - big_gamma)
    den = delta + 1j * (gamma + big_gamma)
    with np.errstate(invalid="ignore", divide="ignore"):
        t = num / den
    return np.where(den == 0, 1.0 + 0j, t)


def tau_squared(delta, gamma, big_gamma):
    """``|tau|^2 = (delta^2 + (gamma-Gamma)^2) / (delta^2 + (gamma+Gamma)^2)``."""
    delta = np.asarray(delta, dtype=float)
    num = delta**2 + (gamma - big_gamma) ** 2
    den = delta**2 + (gamma + big_gamma) ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        out = num / den
    return np.where(den == 0, 1.0, out)


def log_tau_squared(delta, gamma, big_gamma):
    """``ln|tau|^2``, accurate both near 1 and near the critical-coupling zero."""
    delta = np.asarray(delta, dtype=float)
    d2 = delta**2
    num = d2 + (gamma - big_gamma) ** 2
    den = d2 + (gamma + big_gamma) ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        frac = 4.0 * gamma * big_gamma / den
        near_one = np.log1p(-frac)
        direct = np.log(num) - np.log(den)
    out = np.where(frac < 0.5, near_one, direct)
    return np.where(den == 0, 0.0, out)


def chiral_atom_factor(atom: Atom, omega: float) -> complex:
    return complex(atom_factor(omega - atom.omega, atom.gamma, atom.gamma_r))


def _abs2_factors(chain: AtomChain, omega: float) -> np.ndarray:
    return tau_squared(omega - chain.column("omega"), chain.column("gamma"),
                       chain.column("gamma_r"))


def chiral_transmission(chain: AtomChain, omega: float) -> float:
    """``T = prod_j |T_j|^2``.

    Factors are multiplied in sorted order so the result is bit-identical
    under any reordering or displacement of the atoms.
    """
    return math.prod(sorted(_abs2_factors(chain, omega).tolist()))


def chiral_log_transmission(chain: AtomChain, omega: float) -> float:
    """``ln T`` as an exactly rounded sum; ``-inf`` if some factor vanishes."""
    logs = log_tau_squared(omega - chain.column("omega"), chain.column("gamma"),
                           chain.column("gamma_r"))
    if np.isneginf(logs).any():
        return -math.inf
    return math.fsum(logs.tolist())


def chiral_amplitude_profile(chain: AtomChain, omega: float) -> np.ndarray:
    """Coefficients ``t_1..t_N`` of ``phi(x) = t_j e^{iqx}`` between atoms (``t_0 = 1``)."""
    factors = atom_factor(omega - chain.column("omega"), chain.column("gamma"),
                          chain.column("gamma_r"))
    return np.cumprod(factors)


def chiral_transmission_sweep(chain: AtomChain, omegas) -> np.ndarray:
    """Transmission on a frequency grid; same values as :func:`chiral_transmission`."""
    return np.array([chiral_transmission(chain, float(w)) for w in np.atleast_1d(omegas)])


# -- frequency disorder, closed forms -------------------------------------------

def _check_rates(sigma, gamma, big_gamma):
    if sigma < 0 or gamma < 0 or big_gamma < 0:
        raise ValueError("sigma, gamma and Gamma must be non-negative")


def avg_tau_squared(mean_delta: float, sigma: float, gamma: float, big_gamma: float) -> float:
    """Gaussian average of ``|tau|^2`` over detunings ``N(mean_delta, sigma)``.

    Uses ``<|tau|^2> = 1 - 4 gamma Gamma I`` with

        I = int_0^inf exp(-l (gamma+Gamma)^2 - l d^2/(1 + 2 l s^2)) / sqrt(1 + 2 l s^2) dl,

    mapped onto ``[0, 1)`` by ``l = c s/(1-s)`` with ``c = (gamma+Gamma)^-2``.
    """
    _check_rates(sigma, gamma, big_gamma)
    if gamma * big_gamma == 0:
        return 1.0
    if sigma == 0:
        return float(tau_squared(mean_delta, gamma, big_gamma))
    a = (gamma + big_gamma) ** 2
    c = 1.0 / a
    d2, s2 = mean_delta**2, sigma**2

    def integrand(s):
        if s >= 1.0:
            return 0.0
        lam = c * s / (1.0 - s)
        g = 1.0 + 2.0 * lam * s2
        return math.exp(-lam * a - lam * d2 / g) / math.sqrt(g) * c / (1.0 - s) ** 2

    integral = _quad(integrand, 0.0, 1.0, what="<|tau|^2> integral")
    return min(1.0, max(0.0, 1.0 - 4.0 * gamma * big_gamma * integral))


def avg_transmission_chiral(n: int, mean_delta: float, sigma: float, gamma: float,
                            big_gamma: float) -> float:
    """``<T> = <|tau|^2>^n`` for ``n`` atoms with i.i.d. detunings."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return avg_tau_squared(mean_delta, sigma, gamma, big_gamma) ** n


def inverse_localization_length_chiral(mean_delta: float, sigma: float, gamma: float,
                                       big_gamma: float) -> float:
    """``-<ln|tau|^2>`` over ``delta ~ N(mean_delta, sigma)`` (per atom)."""
    _check_rates(sigma, gamma, big_gamma)
    if sigma == 0:
        return -float(log_tau_squared(mean_delta, gamma, big_gamma))
    scale = math.sqrt(2.0) * sigma

    def integrand(u):
        return -float(log_tau_squared(mean_delta + scale * u, gamma, big_gamma)) * math.exp(-u * u)

    points = None
    u0 = -mean_delta / scale  # where delta = 0, the only possible log singularity
    if gamma == big_gamma and -_GAUSS_CUTOFF < u0 < _GAUSS_CUTOFF:
        points = [u0]
    val = _quad(integrand, -_GAUSS_CUTOFF, _GAUSS_CUTOFF, points=points,
                what="<ln|tau|^2> integral")
    return val / math.sqrt(math.pi)


def inverse_localization_length_critical(mean_delta: float, sigma: float,
                                         big_gamma: float) -> float:
    """Critical-coupling (``gamma = Gamma``) form in the scaled variable ``x = delta/(2 Gamma)``:

        xi^-1 = -(2 Gamma / sqrt(2 pi sigma^2)) int ln(1 - 1/(1+x^2)) exp(-(2 Gamma x - d)^2 / 2 sigma^2) dx
    """
    if sigma <= 0 or big_gamma <= 0:
        raise ValueError("critical-coupling integral needs sigma > 0 and Gamma > 0")
    center = mean_delta / (2.0 * big_gamma)
    width = sigma / (2.0 * big_gamma)
    lo = center - _GAUSS_CUTOFF * math.sqrt(2.0) * width
    hi = center + _GAUSS_CUTOFF * math.sqrt(2.0) * width
    norm = 2.0 * big_gamma / math.sqrt(2.0 * math.pi * sigma**2)

    def integrand(x):
        if x == 0.0:
            return -math.inf
        # ln(1 - 1/(1+x^2)) written without the cancellation near x = 0
        log_term = 2.0 * math.log(abs(x)) - math.log1p(x * x)
        return log_term * math.exp(-((2.0 * big_gamma * x - mean_delta) ** 2) / (2.0 * sigma**2))

    points = [0.0] if lo < 0.0 < hi else []
    # a second break point almost on top of the singular one only confuses the subdivision
    if abs(center) > 1e-6 * width:
        points.append(center)
    points = sorted(points) or None
    val = _quad(integrand, lo, hi, points=points, what="critical-coupling integral")
    return -norm * val


def localization_length_chiral(mean_delta: float, sigma: float, gamma: float,
                               big_gamma: float) -> float:
    """Localization length in atoms; ``0`` for a perfectly reflecting atom, ``inf`` without loss."""
    inv = inverse_localization_length_chiral(mean_delta, sigma, gamma, big_gamma)
    if inv == math.inf:
        return 0.0
    if inv <= 0:
        return math.inf
    return 1.0 / inv
