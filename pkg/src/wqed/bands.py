"""Band structure of an infinite periodic chain of identical lossless atoms.

``e^{iKL}`` is an eigenvalue of the one-period transfer matrix. For lossless
atoms that matrix has a unimodular determinant (exactly one only for
symmetric coupling), so the Bloch condition is written on the
determinant-normalised trace::

    cos(KL) = tr(T) / (2 sqrt(det T))
            = (D cos(phi) + S sin(phi)) / (sgn(D) sqrt(D^2 + d^2))

with ``D = omega - omega_a``, ``S = Gamma_R + Gamma_L``, ``d = Gamma_R - Gamma_L``
and ``phi = (q_R + q_L) L / 2``. The sign of the square-root branch is the
one that recovers the free-photon relation ``cos(KL) = cos(phi)`` far from
resonance on either side; for symmetric coupling this is
``cos(KL) = cos(qL) + (2 Gamma / D) sin(qL)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bidirectional import SingularTransferError, _phase_rate, cleared_transfer_matrix
from .core import Atom, ConfigError, WaveguideConfig

EDGE_TOL = 1e-8


@dataclass(frozen=True)
class DispersionSample:
    omega: float
    cos_kl: float
    kl: float          # Bloch phase in [0, pi]; nan inside a gap
    allowed: bool


@dataclass(frozen=True)
class BandInterval:
    start: float
    end: float
    allowed: bool


def _sample(omega, cos_kl) -> DispersionSample:
    allowed = bool(abs(cos_kl) <= 1.0)
    kl = math.acos(cos_kl) if allowed else math.nan
    return DispersionSample(float(omega), float(cos_kl), kl, allowed)


def _check(atom: Atom, l: float, wg: WaveguideConfig):
    if atom.gamma != 0:
        raise ConfigError("band structure is defined for lossless atoms (gamma = 0)")
    if not l > 0:
        raise ConfigError(f"lattice spacing must be positive, got {l}")
    if wg.is_chiral:
        raise ConfigError("a chiral waveguide has no band structure; use a bidirectional config")


def cos_kl_general(omega, wg: WaveguideConfig, atom: Atom, l: float):
    """Closed-form right-hand side of the dispersion relation (vectorised over ``omega``)."""
    omega = np.asarray(omega, dtype=float)
    D = omega - atom.omega
    s = atom.gamma_r + atom.gamma_l
    d = atom.gamma_r - atom.gamma_l
    phi = _phase_rate(omega, wg) * l
    num = D * np.cos(phi) + s * np.sin(phi)
    den = np.where(D < 0, -1.0, 1.0) * np.sqrt(D * D + d * d)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = num / den
    # D = 0 with symmetric coupling: |cos KL| diverges unless the sine term vanishes
    singular = den == 0
    if np.any(singular):
        inf = np.copysign(np.inf, s * np.sin(phi))
        fallback = np.where((s == 0) | (np.sin(phi) == 0), np.cos(phi), inf)
        out = np.where(singular, fallback, out)
    return out


def dispersion_general(omega: float, wg: WaveguideConfig, atom_template: Atom, l: float) -> DispersionSample:
    _check(atom_template, l, wg)
    return _sample(omega, float(cos_kl_general(omega, wg, atom_template, l)))


def dispersion_from_matrix(omega: float, wg: WaveguideConfig, atom_template: Atom, l: float) -> DispersionSample:
    """Bloch condition from the eigenvalues of the assembled one-period matrix.

    ``cos(KL) = (lam_+ + lam_-) / (2 sqrt(lam_+ lam_-))`` with the principal
    square root, which tends to 1 as the atoms decouple.
    """
    _check(atom_template, l, wg)
    atom = Atom(x=l, omega=atom_template.omega, gamma=0.0,
                gamma_r=atom_template.gamma_r, gamma_l=atom_template.gamma_l)
    # T = C / c: solve lam^2 - tr lam + det = 0 for the well-scaled C, then divide by c
    m, c = cleared_transfer_matrix(atom, 0.0, omega, wg)
    if c == 0:
        raise SingularTransferError(f"perfect reflector at omega={omega}; no transfer matrix")
    tr, det = m.m11 + m.m22, m.det()
    disc = np.sqrt(tr * tr - 4.0 * det)
    if (tr.conjugate() * disc).real < 0:
        disc = -disc
    mu_p = 0.5 * (tr + disc)
    mu_m = det / mu_p if mu_p != 0 else 0.5 * (tr - disc)
    lam_p, lam_m = mu_p / c, mu_m / c
    root = np.sqrt(lam_p * lam_m)
    return _sample(omega, float(((lam_p + lam_m) / (2.0 * root)).real))


def _bisect_edge(f, a, b, fa_allowed):
    """Locate the switch between allowed and forbidden on ``[a, b]`` to ``EDGE_TOL``."""
    while b - a > EDGE_TOL:
        mid = 0.5 * (a + b)
        if (abs(f(mid)) <= 1.0) == fa_allowed:
            a = mid
        else:
            b = mid
    return 0.5 * (a + b)


def scan_bands(omega_range: tuple[float, float], steps: int, wg: WaveguideConfig,
               atom_template: Atom, l: float) -> list[BandInterval]:
    """Split a frequency window into allowed bands and gaps.

    Sample on a uniform grid, merge runs of equal classification and refine
    every interior edge by bisection. Features narrower than the grid step
    can be missed.
    """
    if steps < 2:
        raise ConfigError("scan needs at least two grid points")
    _check(atom_template, l, wg)
    lo, hi = omega_range
    grid = np.linspace(lo, hi, steps)
    allowed = np.abs(cos_kl_general(grid, wg, atom_template, l)) <= 1.0

    def f(w):
        return float(cos_kl_general(w, wg, atom_template, l))

    intervals = []
    start = float(grid[0])
    for i in range(1, steps):
        if allowed[i] != allowed[i - 1]:
            edge = _bisect_edge(f, float(grid[i - 1]), float(grid[i]), bool(allowed[i - 1]))
            intervals.append(BandInterval(start, edge, bool(allowed[i - 1])))
            start = edge
    intervals.append(BandInterval(start, float(grid[-1]), bool(allowed[-1])))
    return intervals


def gaps(intervals: list[BandInterval]) -> list[BandInterval]:
    return [iv for iv in intervals if not iv.allowed]
