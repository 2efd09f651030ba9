"""Command-line front end.

    wqed <spectrum|bands|localization> --config cfg.json [--out DIR] [--seed U64]
         [--threads N] [--svg]

Config keys (all lengths in wavelengths, frequencies in units of omega_1)::

    waveguide     {kind, v_r, v_l, omega_0}
    chain         {n, spacing, omega, gamma, gamma_r, gamma_l}
    photon        {omega} or {sweep: {min, max, steps}}
    disorder      {target, mean, sigma, realizations, seed}      optional
    localization  {mode: fit|ratio, n_values, sigmas, n}         localization only

A ``spectrum`` run with a ``disorder`` block writes disorder-averaged columns.
Every CSV starts with ``#`` lines holding the package version and the fully
resolved config; values use 17 significant digits.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__, bands, chiral, disorder
from .bidirectional import SingularSystemError, SingularTransferError, chain_scattering
from .core import ChainSpec, ConfigError, WaveguideConfig, _num, _reject_unknown, load_json, photon_grid

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
EXPERIMENTS = ("spectrum", "bands", "localization")
DEFAULT_N_VALUES = (25, 50, 100, 200, 400)
_TOP_KEYS = {"waveguide", "chain", "photon", "disorder", "localization"}


class NumericalError(ArithmeticError):
    """A computation could not produce a trustworthy number."""


@dataclass(frozen=True)
class LocalizationPlan:
    mode: str
    n_values: tuple[int, ...]
    sigmas: tuple[float, ...]
    n: int

    def to_dict(self) -> dict:
        return {"mode": self.mode, "n_values": list(self.n_values),
                "sigmas": list(self.sigmas), "n": self.n}


@dataclass(frozen=True)
class RunConfig:
    experiment: str
    waveguide: WaveguideConfig
    chain: ChainSpec
    omegas: np.ndarray
    photon: dict
    disorder: disorder.DisorderSpec | None
    localization: LocalizationPlan | None
    out_dir: Path
    workers: int
    svg: bool

    def resolved(self) -> dict:
        """Everything that determines the numbers; excludes workers and paths on purpose."""
        d = {"experiment": self.experiment, "waveguide": self.waveguide.to_dict(),
             "chain": self.chain.to_dict(), "photon": self.photon}
        if self.disorder is not None:
            d["disorder"] = self.disorder.to_dict()
        if self.localization is not None:
            d["localization"] = self.localization.to_dict()
        return d


def _int(d: dict, key: str, default):
    v = d.get(key, default)
    if isinstance(v, float) and v.is_integer():
        v = int(v)
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{key} must be an integer, got {v!r}")
    return v


def _parse_disorder(d: dict, seed_override: int | None) -> disorder.DisorderSpec:
    _reject_unknown(d, {"target", "mean", "sigma", "realizations", "seed"}, "disorder")
    try:
        target = disorder.DisorderTarget(d.get("target", "position"))
    except ValueError as exc:
        raise ConfigError(f"unknown disorder target {d.get('target')!r}") from exc
    seed = _int(d, "seed", 0) if seed_override is None else seed_override
    return disorder.DisorderSpec(target=target, mean=_num(d, "mean", 0.0), sigma=_num(d, "sigma", 0.0),
                                 realizations=_int(d, "realizations", 1000), seed=seed)


def _parse_localization(d: dict, spec: disorder.DisorderSpec) -> LocalizationPlan:
    _reject_unknown(d, {"mode", "n_values", "sigmas", "n"}, "localization")
    mode = d.get("mode", "fit")
    if mode not in ("fit", "ratio"):
        raise ConfigError(f"localization.mode must be 'fit' or 'ratio', got {mode!r}")
    n_values = d.get("n_values", list(DEFAULT_N_VALUES))
    sigmas = d.get("sigmas", [spec.sigma])
    if not isinstance(n_values, list) or not isinstance(sigmas, list) or not sigmas:
        raise ConfigError("localization.n_values and localization.sigmas must be non-empty lists")
    n_values = tuple(_int({"n": n}, "n", None) for n in n_values)
    sigmas = tuple(_num({"sigma": s}, "sigma", None) for s in sigmas)
    if any(s < 0 for s in sigmas):
        raise ConfigError("localization.sigmas must be non-negative")
    if mode == "fit" and (len(set(n_values)) < 3 or min(n_values) < 1):
        raise ConfigError("fit mode needs at least three distinct n_values >= 1")
    n = _int(d, "n", 1000)
    if n < 1:
        raise ConfigError("localization.n must be >= 1")
    return LocalizationPlan(mode, n_values, sigmas, n)


def resolve_workers(flag: int | None) -> int:
    if flag is not None:
        value = flag
    elif os.environ.get("WQED_THREADS"):
        try:
            value = int(os.environ["WQED_THREADS"])
        except ValueError as exc:
            raise ConfigError("WQED_THREADS must be an integer") from exc
    else:
        value = os.cpu_count() or 1
    if value < 1:
        raise ConfigError("thread count must be >= 1")
    return value


def build_config(experiment: str, raw: dict, out_dir: str | Path = ".", seed: int | None = None,
                 threads: int | None = None, svg: bool = False) -> RunConfig:
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}")
    _reject_unknown(raw, _TOP_KEYS, "config")
    wg = WaveguideConfig.from_dict(raw.get("waveguide", {}))
    chain = ChainSpec.from_dict(raw.get("chain", {}))
    if "photon" not in raw:
        raise ConfigError("missing required key 'photon'")
    omegas, photon = photon_grid(raw["photon"])
    spec = _parse_disorder(raw["disorder"], seed) if "disorder" in raw else None
    plan = None
    if experiment == "localization":
        if spec is None:
            raise ConfigError("localization needs a 'disorder' block")
        if "omega" not in photon:
            raise ConfigError("localization needs a single photon.omega")
        plan = _parse_localization(raw.get("localization", {}), spec)
    elif "localization" in raw:
        raise ConfigError(f"'localization' block is not used by {experiment}")
    if experiment == "bands":
        if chain.gamma != 0:
            raise ConfigError("bands needs gamma = 0: the dispersion relation assumes lossless atoms")
        if wg.is_chiral:
            raise ConfigError("bands needs a bidirectional waveguide")
        if spec is not None:
            raise ConfigError("bands does not take a 'disorder' block")
        if omegas.size < 2:
            raise ConfigError("bands needs a photon.sweep with at least two steps")
    out = Path(out_dir)
    return RunConfig(experiment, wg, chain, omegas, photon, spec, plan, out,
                     resolve_workers(threads), svg)


# -- CSV -------------------------------------------------------------------------

def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return format(v, ".17g")


def write_csv(path: Path, cfg: RunConfig, columns: list[str], rows, warnings_=()) -> None:
    lines = [f"# wqed {__version__}",
             "# config: " + json.dumps(cfg.resolved(), sort_keys=True, separators=(",", ":")),
             ",".join(columns)]
    lines += [",".join(fmt(v) for v in row) for row in rows]
    lines += [f"# warning: {w}" for w in warnings_]
    path.write_text("\n".join(lines) + "\n")


def _svg(path: Path, x, series: dict, xlabel: str) -> None:
    import matplotlib
    matplotlib.use("svg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "wqed"
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, y in series.items():
        ax.plot(x, y, label=label)
    ax.set_xlabel(xlabel)
    ax.legend()
    fig.savefig(path, metadata={"Date": None})
    plt.close(fig)


# -- experiments -------------------------------------------------------------------

def _quality(est: disorder.McEstimate, where: str) -> list[str]:
    return [f"{where}: {flag} (excluded {est.excluded} of {est.r + est.excluded})" for flag in est.flags
            if flag != "single-realization"]


def run_spectrum(cfg: RunConfig) -> list[Path]:
    base = cfg.chain.build()
    out = cfg.out_dir / "spectrum.csv"
    chiral_wg = cfg.waveguide.is_chiral
    warn: list[str] = []
    if cfg.disorder is None:
        rows = []
        for w in cfg.omegas:
            w = float(w)
            if chiral_wg:
                rows.append((w, chiral.chiral_transmission(base, w)))
            else:
                res = chain_scattering(base, w, cfg.waveguide)
                rows.append((w, res.transmission, res.reflection))
        cols = ["omega", "T"] if chiral_wg else ["omega", "T", "R"]
    else:
        rows = []
        n = base.n
        for w in cfg.omegas:
            w = float(w)
            t = disorder.mc_average(base, cfg.disorder, w, cfg.waveguide, "T", cfg.workers)
            lt = disorder.mc_average(base, cfg.disorder, w, cfg.waveguide, "lnT", cfg.workers)
            xi, _ = disorder.xi_from_mean_lnt(n, lt)
            warn += _quality(lt, f"omega={fmt(w)}")
            row = [w, t.mean, t.std_err, lt.mean, lt.std_err, xi]
            if not chiral_wg:
                r = disorder.mc_average(base, cfg.disorder, w, cfg.waveguide, "R", cfg.workers)
                row += [r.mean, r.std_err]
            rows.append(tuple(row))
        cols = ["omega", "T", "T_err", "lnT", "lnT_err", "xi"] + ([] if chiral_wg else ["R", "R_err"])
    # ln T may legitimately be -inf (every realization blocked); the footer says so
    _check_finite(rows, cols, allow=("xi", "lnT", "lnT_err"))
    write_csv(out, cfg, cols, rows, warn)
    files = [out]
    if cfg.svg:
        arr = np.array(rows, dtype=float)
        series = {"T": arr[:, 1]}
        if "R" in cols:
            series["R"] = arr[:, cols.index("R")]
        _svg(cfg.out_dir / "spectrum.svg", arr[:, 0], series, "omega / omega_1")
        files.append(cfg.out_dir / "spectrum.svg")
    return files


def run_bands(cfg: RunConfig) -> list[Path]:
    atom, l = cfg.chain.template, cfg.chain.spacing
    grid = cfg.omegas
    cos_kl = bands.cos_kl_general(grid, cfg.waveguide, atom, l)
    rows = []
    for w, c in zip(grid, cos_kl):
        allowed = bool(abs(c) <= 1.0)
        rows.append((float(w), float(c), math.acos(c) if allowed else math.nan, allowed))
    intervals = bands.scan_bands((float(grid[0]), float(grid[-1])), grid.size, cfg.waveguide, atom, l)
    gap_rows = [(iv.start, iv.end) for iv in bands.gaps(intervals)]
    b, g = cfg.out_dir / "bands.csv", cfg.out_dir / "gaps.csv"
    write_csv(b, cfg, ["omega", "cos_kl", "kl", "allowed"], rows)
    write_csv(g, cfg, ["gap_start", "gap_end"], gap_rows)
    files = [b, g]
    if cfg.svg:
        arr = np.array([r[:3] for r in rows], dtype=float)
        _svg(cfg.out_dir / "bands.svg", arr[:, 0], {"KL": arr[:, 2]}, "omega / omega_1")
        files.append(cfg.out_dir / "bands.svg")
    return files


def run_localization(cfg: RunConfig) -> list[Path]:
    plan, spec, omega = cfg.localization, cfg.disorder, float(cfg.omegas[0])
    atom, l = cfg.chain.template, cfg.chain.spacing
    warn: list[str] = []
    n_rows, xi_rows = [], []
    if plan.mode == "fit":
        n_cols = ["sigma", "n", "mean_lnT", "std_err"] if len(plan.sigmas) > 1 else ["n", "mean_lnT", "std_err"]
        for sigma in plan.sigmas:
            s = disorder.DisorderSpec(spec.target, spec.mean, sigma, spec.realizations, spec.seed)
            fit = disorder.localization_length_mc(atom, l, s, omega, cfg.waveguide, plan.n_values, cfg.workers)
            for n, est in zip(fit.n_values, fit.per_n):
                n_rows.append(((sigma,) if len(plan.sigmas) > 1 else ()) + (n, est.mean, est.std_err))
                warn += _quality(est, f"sigma={fmt(sigma)} n={n}")
            if fit.fit_r2 < 0.9 and math.isfinite(fit.xi):
                warn.append(f"sigma={fmt(sigma)}: poor linear fit, r2={fmt(fit.fit_r2)}")
            xi_rows.append((sigma, fit.xi, fit.xi_err, fit.fit_r2))
        xi_cols = ["sigma", "xi", "xi_err", "fit_r2"]
    else:
        n_cols = ["sigma", "n", "mean_lnT", "std_err"]
        for p in disorder.localization_sweep(atom, l, plan.sigmas, spec, omega, cfg.waveguide,
                                             plan.n, cfg.workers):
            n_rows.append((p.sigma, plan.n, p.mean_lnt.mean, p.mean_lnt.std_err))
            warn += _quality(p.mean_lnt, f"sigma={fmt(p.sigma)}")
            xi_rows.append((p.sigma, p.xi, p.xi_err))
        xi_cols = ["sigma", "xi", "xi_err"]
    a, b = cfg.out_dir / "lnT_vs_N.csv", cfg.out_dir / "xi.csv"
    write_csv(a, cfg, n_cols, n_rows, warn)
    write_csv(b, cfg, xi_cols, xi_rows, warn)
    files = [a, b]
    if cfg.svg:
        arr = np.array(xi_rows, dtype=float)
        _svg(cfg.out_dir / "xi.svg", arr[:, 0], {"xi": arr[:, 1]}, "sigma / lambda")
        files.append(cfg.out_dir / "xi.svg")
    return files


def _check_finite(rows, cols, allow=()):
    for row in rows:
        for name, v in zip(cols, row):
            if name not in allow and not math.isfinite(v):
                raise NumericalError(f"non-finite {name} at omega={row[0]!r}")


RUNNERS = {"spectrum": run_spectrum, "bands": run_bands, "localization": run_localization}


def run(cfg: RunConfig) -> list[Path]:
    try:
        cfg.out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {cfg.out_dir}: {exc}") from exc
    if not os.access(cfg.out_dir, os.W_OK):
        raise ConfigError(f"output directory {cfg.out_dir} is not writable")
    return RUNNERS[cfg.experiment](cfg)


def _error(kind: str, message: str, code: int) -> int:
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)
    return code


def main(argv=None) -> int:
    p = argparse.ArgumentParser(prog="wqed", description="Single-photon transport in waveguide QED chains.")
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--config", required=True, help="JSON config file")
    p.add_argument("--out", default=".", help="output directory (default: current)")
    p.add_argument("--seed", type=int, default=None, help="overrides disorder.seed")
    p.add_argument("--threads", type=int, default=None, help="worker threads (env WQED_THREADS)")
    p.add_argument("--svg", action="store_true", help="also write quick-look SVG plots")
    args = p.parse_args(argv)
    try:
        cfg = build_config(args.experiment, load_json(args.config), args.out, args.seed,
                           args.threads, args.svg)
        files = run(cfg)
    except ConfigError as exc:
        return _error("config", str(exc), EXIT_CONFIG)
    except (NumericalError, chiral.QuadratureError, SingularSystemError, SingularTransferError,
            FloatingPointError, ZeroDivisionError) as exc:
        return _error("numerical", str(exc), EXIT_NUMERIC)
    for f in files:
        print(f)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
