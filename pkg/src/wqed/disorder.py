"""Gaussian disorder, Monte Carlo averages and localization lengths.

Random numbers come from counter-based Philox streams keyed by
``(seed, target, block)``. Realizations are grouped in fixed blocks of
``BLOCK`` rows, so realization ``i`` is always row ``i % BLOCK`` of block
``i // BLOCK`` no matter how many realizations are requested or how many
workers run. Per-realization values are reduced with ``math.fsum`` in
index order, which makes every estimate bit-reproducible.
"""
from __future__ import annotations

import enum
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import chiral
from .bidirectional import propagate_batch
from .core import Atom, AtomChain, ConfigError, WaveguideConfig, build_periodic_chain, require_valid

log = logging.getLogger(__name__)

BLOCK = 1024
EXCLUDED_WARN_FRACTION = 1e-3


class DisorderTarget(str, enum.Enum):
    POSITION = "position"
    FREQUENCY = "frequency"


class Observable(str, enum.Enum):
    T = "T"
    LNT = "lnT"
    R = "R"


_TARGET_CODE = {DisorderTarget.POSITION: 1, DisorderTarget.FREQUENCY: 2}


@dataclass(frozen=True)
class DisorderSpec:
    """Which parameter is random and how.

    ``mean`` and ``sigma`` are in wavelengths for position disorder (an offset
    added to each lattice site) and in units of ``omega_1`` for frequency
    disorder (the transition frequencies themselves).
    """

    target: DisorderTarget = DisorderTarget.POSITION
    mean: float = 0.0
    sigma: float = 0.0
    realizations: int = 1000
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "target", DisorderTarget(self.target))
        if not self.sigma >= 0:
            raise ConfigError(f"disorder sigma must be >= 0, got {self.sigma}")
        if self.realizations < 1:
            raise ConfigError("need at least one realization")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")

    def to_dict(self) -> dict:
        return {"target": self.target.value, "mean": self.mean, "sigma": self.sigma,
                "realizations": self.realizations, "seed": self.seed}


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_err: float
    r: int
    excluded: int = 0
    flags: tuple[str, ...] = ()


@dataclass(frozen=True)
class LocalizationFit:
    xi: float
    xi_err: float
    fit_r2: float
    slope: float
    intercept: float
    n_values: tuple[int, ...] = ()
    per_n: tuple[McEstimate, ...] = field(default=(), repr=False)


@dataclass(frozen=True)
class SweepPoint:
    sigma: float
    xi: float
    xi_err: float
    mean_lnt: McEstimate


# -- sampling ------------------------------------------------------------------

def _block_normals(spec: DisorderSpec, block: int, n: int) -> np.ndarray:
    ss = np.random.SeedSequence(entropy=spec.seed, spawn_key=(_TARGET_CODE[spec.target], block))
    return np.random.Generator(np.random.Philox(ss)).standard_normal((BLOCK, n))


def _base_columns(base: AtomChain):
    return {c: base.column(c) for c in ("x", "omega", "gamma", "gamma_r", "gamma_l")}


def _sample_block(cols: dict, spec: DisorderSpec, block: int) -> dict:
    n = len(cols["x"])
    z = _block_normals(spec, block, n)
    out = {c: np.broadcast_to(v, (BLOCK, n)) for c, v in cols.items()}
    if spec.target is DisorderTarget.POSITION:
        x = cols["x"] + (spec.mean + spec.sigma * z)
        order = np.argsort(x, axis=1, kind="stable")
        out = {c: np.take_along_axis(np.asarray(v), order, axis=1) for c, v in out.items()}
        out["x"] = np.take_along_axis(x, order, axis=1)
    else:
        out["omega"] = spec.mean + spec.sigma * z
    return out


def sample_chain(base: AtomChain, spec: DisorderSpec, realization_index: int) -> AtomChain:
    """One disordered realization of ``base``, reconstructible from its index alone."""
    require_valid(base)
    if realization_index < 0:
        raise ValueError("realization index must be non-negative")
    if spec.sigma == 0 and spec.mean == 0 and spec.target is DisorderTarget.POSITION:
        return base
    block, row = divmod(realization_index, BLOCK)
    arrays = _sample_block(_base_columns(base), spec, block)
    return AtomChain(tuple(
        Atom(x=float(arrays["x"][row, j]), omega=float(arrays["omega"][row, j]),
             gamma=float(arrays["gamma"][row, j]), gamma_r=float(arrays["gamma_r"][row, j]),
             gamma_l=float(arrays["gamma_l"][row, j]))
        for j in range(base.n)))


# -- observables ----------------------------------------------------------------

def _block_observable(arrays: dict, omega: float, wg: WaveguideConfig, obs: Observable) -> np.ndarray:
    if wg.is_chiral:
        if obs is Observable.R:
            return np.zeros(arrays["x"].shape[0])
        delta = omega - arrays["omega"]
        # sorted factors: the reduction is invariant under any reordering of the atoms
        if obs is Observable.T:
            f = np.sort(chiral.tau_squared(delta, arrays["gamma"], arrays["gamma_r"]), axis=1)
            return np.prod(f, axis=1)
        f = np.sort(chiral.log_tau_squared(delta, arrays["gamma"], arrays["gamma_r"]), axis=1)
        return f.sum(axis=1)
    res = propagate_batch(arrays["x"], arrays["omega"], arrays["gamma"], arrays["gamma_r"],
                          arrays["gamma_l"], omega, wg)
    if obs is Observable.T:
        return res.transmission
    if obs is Observable.LNT:
        return res.log_t
    return res.reflection


def realization_values(base: AtomChain, spec: DisorderSpec, omega: float, wg: WaveguideConfig,
                       observable: Observable | str = Observable.T, workers: int = 1) -> np.ndarray:
    """Per-realization observable values in realization-index order."""
    require_valid(base)
    obs = Observable(observable)
    cols = _base_columns(base)
    n_blocks = -(-spec.realizations // BLOCK)

    def work(block):
        return _block_observable(_sample_block(cols, spec, block), omega, wg, obs)

    if workers > 1 and n_blocks > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(work, range(n_blocks)))
    else:
        parts = [work(b) for b in range(n_blocks)]
    return np.concatenate(parts)[:spec.realizations]


def summarize(values: np.ndarray) -> McEstimate:
    """Mean and standard error with ``-inf`` samples (``ln 0``) excluded and counted."""
    values = np.asarray(values, dtype=float)
    keep = values[np.isfinite(values)]
    excluded = int(values.size - keep.size)
    flags = []
    if keep.size == 0:
        return McEstimate(-math.inf, math.nan, 0, excluded, ("all-excluded",))
    if excluded > EXCLUDED_WARN_FRACTION * values.size:
        flags.append("excluded-fraction")
        log.warning("%d of %d realizations had T = 0 and were excluded", excluded, values.size)
    r = int(keep.size)
    mean = math.fsum(keep.tolist()) / r
    if r == 1:
        flags.append("single-realization")
        return McEstimate(mean, 0.0, 1, excluded, tuple(flags))
    var = math.fsum(((keep - mean) ** 2).tolist()) / (r - 1)
    return McEstimate(mean, math.sqrt(var / r), r, excluded, tuple(flags))


def mc_average(base: AtomChain, spec: DisorderSpec, omega: float, wg: WaveguideConfig,
               observable: Observable | str = Observable.T, workers: int = 1) -> McEstimate:
    return summarize(realization_values(base, spec, omega, wg, observable, workers))


# -- localization length ---------------------------------------------------------

def localization_length_mc(template: Atom, spacing: float, spec: DisorderSpec, omega: float,
                           wg: WaveguideConfig, n_values, workers: int = 1) -> LocalizationFit:
    """Fit ``<ln T> = c - N/xi`` over chain lengths ``n_values``.

    ``xi`` is ``inf`` when the fitted slope is not negative by at least two
    standard errors (no decay detected).
    """
    n_values = tuple(int(n) for n in n_values)
    if len(set(n_values)) < 3 or min(n_values) < 1:
        raise ConfigError("need at least three distinct chain lengths >= 1")
    per_n = tuple(mc_average(build_periodic_chain(n, spacing, template), spec, omega, wg,
                             Observable.LNT, workers) for n in n_values)
    ns = np.array(n_values, dtype=float)
    ys = np.array([e.mean for e in per_n])
    slope, intercept = np.polyfit(ns, ys, 1)
    resid = ys - (slope * ns + intercept)
    ss_res = float(resid @ resid)
    ss_tot = float(((ys - ys.mean()) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    sxx = float(((ns - ns.mean()) ** 2).sum())
    slope_err = math.sqrt(ss_res / (len(ns) - 2) / sxx) if len(ns) > 2 else 0.0
    if slope >= 0 or -slope <= 2.0 * slope_err:
        xi, xi_err = math.inf, math.nan
    else:
        xi = -1.0 / slope
        xi_err = slope_err / slope**2
    return LocalizationFit(xi=xi, xi_err=xi_err, fit_r2=r2, slope=float(slope),
                           intercept=float(intercept), n_values=n_values, per_n=per_n)


def xi_from_mean_lnt(n: int, est: McEstimate) -> tuple[float, float]:
    """``xi = -n / <ln T>`` with its propagated standard error."""
    if not est.mean < 0:
        return math.inf, math.nan
    if est.mean == -math.inf:
        return 0.0, 0.0
    return -n / est.mean, n * est.std_err / est.mean**2


def localization_sweep(template: Atom, spacing: float, sigmas, spec: DisorderSpec, omega: float,
                       wg: WaveguideConfig, n: int = 1000, workers: int = 1) -> list[SweepPoint]:
    """Fixed-length estimate ``xi = -n/<ln T>`` for each disorder strength.

    All strengths share the same underlying normal draws, which keeps the
    curve smooth in ``sigma``.
    """
    base = build_periodic_chain(n, spacing, template)
    out = []
    for sigma in sigmas:
        est = mc_average(base, replace(spec, sigma=float(sigma)), omega, wg, Observable.LNT, workers)
        xi, err = xi_from_mean_lnt(n, est)
        out.append(SweepPoint(float(sigma), xi, err, est))
    return out
