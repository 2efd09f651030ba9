"""Acceptance criteria 1-8.

Each criterion is a plain function returning ``(passed, detail)``; the pytest
wrappers print one ``criterion N: PASS|FAIL`` line and assert. Running this
file directly prints the same lines without pytest.
"""
import contextlib
import io
import json
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
from scipy import optimize

from wqed import bands, chiral, cli
from wqed.bidirectional import chain_scattering, solve_amplitudes_dense
from wqed.core import Atom, AtomChain, WaveguideConfig, build_periodic_chain
from wqed.disorder import DisorderSpec, localization_length_mc, localization_sweep, mc_average

CHIRAL = WaveguideConfig(kind="chiral")
SYM = WaveguideConfig()
SMALL_BACK = WaveguideConfig(v_l=10.0)


def timed(budget_s):
    def wrap(fn):
        def run():
            t0 = time.perf_counter()
            ok, detail = fn()
            dt = time.perf_counter() - t0
            in_time = dt < budget_s
            return ok and in_time, f"{detail}; runtime {dt:.1f}s (budget {budget_s:g}s)"
        run.__name__ = fn.__name__
        return run
    return wrap


@timed(1.0)
def criterion_1():
    g = 0.1
    single = AtomChain((Atom(omega=1.0, gamma=g, gamma_r=g),))
    zero = chiral.chiral_transmission(single, 1.0) == 0.0
    widths = []
    for n in (2, 5, 10, 50, 100):
        chain = build_periodic_chain(n, 0.5, Atom(omega=1.0, gamma=g, gamma_r=g))
        # T is even and increasing in |delta| at critical coupling: bracket the T = 0.1 edge
        edge = optimize.brentq(lambda d: chiral.chiral_transmission(chain, 1.0 + d) - 0.1, 1e-12, 100.0,
                               xtol=1e-14, rtol=1e-14)
        widths.append(2 * edge)
    increasing = all(b > a for a, b in zip(widths, widths[1:]))
    return zero and increasing, f"T(0)={'0' if zero else 'nonzero'}, widths {[round(w, 4) for w in widths]}"


@timed(1.0)
def criterion_2():
    rng = np.random.default_rng(2)
    omegas = 1.0 + 0.05 * rng.standard_normal(50)
    base = AtomChain(tuple(Atom(x=0.5 * (j + 1), omega=float(w), gamma=0.03, gamma_r=0.1)
                           for j, w in enumerate(omegas)))
    ref = chiral.chiral_transmission(base, 1.02)
    same = 0
    for _ in range(100):
        xs = base.column("x") + rng.normal(0.0, 3.0, 50)
        moved = AtomChain(tuple(Atom(x=float(x), omega=a.omega, gamma=a.gamma, gamma_r=a.gamma_r)
                                for x, a in zip(xs, base.atoms))).sorted()
        same += chiral.chiral_transmission(moved, 1.02) == ref
    return same == 100, f"{same}/100 perturbed chains bit-identical (T={ref:.6g})"


@timed(120.0)
def criterion_3():
    rng = np.random.default_rng(3)
    worst = 0.0
    for k in range(20):
        n = int(rng.integers(1, 11))
        big, gamma = rng.uniform(0.05, 0.2), rng.uniform(0.0, 0.2)
        mean, sigma = rng.uniform(-0.3, 0.3), rng.uniform(0.01, 0.3)
        base = build_periodic_chain(n, 0.5, Atom(omega=1.0, gamma=gamma, gamma_r=big))
        # detuning mean delta = omega - <omega_j>: photon at 1, atoms centred at 1 - mean
        est = mc_average(base, DisorderSpec("frequency", 1.0 - mean, sigma, 10**5, seed=100 + k), 1.0, CHIRAL, "T")
        exact = chiral.avg_transmission_chiral(n, mean, sigma, gamma, big)
        worst = max(worst, abs(est.mean - exact) / est.std_err)
    mc_ok = worst < 3.0
    big, mean, sigma = 0.1, 0.3, 0.1
    spec = DisorderSpec("frequency", 1.0, sigma, 10**4, seed=7)
    fit = localization_length_mc(Atom(omega=1.0, gamma=big, gamma_r=big), 0.5, spec, 1.0 + mean, CHIRAL,
                                 [25, 50, 100, 200])
    exact_xi = 1.0 / chiral.inverse_localization_length_critical(mean, sigma, big)
    rel = abs(fit.xi - exact_xi) / exact_xi
    return mc_ok and rel < 0.02, (f"worst |MC-exact| = {worst:.2f} SE over 20 sets; "
                                  f"xi fit {fit.xi:.5g} vs integral {exact_xi:.5g} (rel {rel:.2e})")


@timed(60.0)
def criterion_4():
    g = 0.1
    sig = np.linspace(0.0, 3.0, 61) * g
    t0 = np.array([chiral.avg_tau_squared(0.0, s, g, g) for s in sig])
    xi0 = np.array([chiral.localization_length_chiral(0.0, s, g, g) for s in sig])
    res_ok = t0[0] == 0.0 and xi0[0] == 0.0 and np.all(np.diff(t0) > 0) and np.all(np.diff(xi0) > 0)
    t1 = chiral.avg_tau_squared(g, 0.0, g, g)
    xi1 = np.array([chiral.localization_length_chiral(g, s, g, g) for s in sig])
    s_min = sig[int(np.argmin(xi1))]
    off_ok = t1 > 0 and 0.5 * g <= s_min <= 1.5 * g
    return res_ok and off_ok, (f"resonant: <T>, xi start at 0 and increase: {bool(res_ok)}; "
                               f"detuned <T>(0)={t1:.3g}, xi minimum at sigma={s_min / g:.2f} Gamma")


@timed(30.0)
def criterion_5():
    rng = np.random.default_rng(5)
    worst_flux = worst_rel = 0.0
    for _ in range(1000):
        n = int(rng.integers(1, 101))
        wg = WaveguideConfig(v_r=1.0, v_l=float(rng.uniform(0.2, 20)))
        xs = np.sort(rng.uniform(0, 0.5 * n, n))
        chain = AtomChain(tuple(Atom(x=float(x), omega=float(rng.uniform(0.9, 1.1)), gamma=0.0,
                                     gamma_r=float(rng.uniform(0, 0.2)), gamma_l=float(rng.uniform(0, 0.2)))
                                for x in xs))
        w = float(rng.uniform(0.5, 2.0))
        tm, dense = chain_scattering(chain, w, wg), solve_amplitudes_dense(chain, w, wg)
        worst_flux = max(worst_flux, abs(tm.transmission + tm.reflection - 1.0))
        a, b = np.array([tm.t_amp, tm.r_amp]), np.array([dense.t_amp, dense.r_amp])
        worst_rel = max(worst_rel, np.linalg.norm(a - b) / np.linalg.norm(b))
    g = 0.1
    atom = AtomChain((Atom(x=0.25, omega=1.0, gamma_r=g, gamma_l=g),))
    lorentz = [abs(chain_scattering(atom, 1.0, SYM).reflection - 1.0),
               abs(chain_scattering(atom, 1.0 + 2 * g, SYM).reflection - 0.5),
               abs(chain_scattering(atom, 1.0 - 2 * g, SYM).reflection - 0.5)]
    ok = worst_flux <= 1e-10 and worst_rel <= 1e-8 and max(lorentz) <= 1e-10
    return ok, (f"max |T+R-1| {worst_flux:.1e}, max TM/dense rel {worst_rel:.1e}, "
                f"Lorentzian error {max(lorentz):.1e}")


@timed(30.0)
def criterion_6():
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(1000):
        wg = WaveguideConfig(v_r=float(rng.uniform(0.3, 3)), v_l=float(rng.uniform(0.3, 10)))
        atom = Atom(omega=1.0, gamma_r=float(rng.uniform(0, 0.3)), gamma_l=float(rng.uniform(0, 0.3)))
        l, w = float(rng.uniform(0.05, 2)), float(rng.uniform(0.3, 3))
        a = bands.dispersion_general(w, wg, atom, l).cos_kl
        b = bands.dispersion_from_matrix(w, wg, atom, l).cos_kl
        worst = max(worst, abs(a - b) / max(1.0, abs(a)))
    agree = worst <= 1e-10
    atom = Atom(omega=1.0, gamma_r=0.1, gamma_l=0.1)
    ivs = bands.scan_bands((0.5, 2.5), 2001, SYM, atom, 0.5)
    gap = [iv for iv in ivs if not iv.allowed and iv.start < 1.0 < iv.end]
    if not gap:
        return False, "no gap containing omega_1"
    gap = gap[0]
    band = max((iv for iv in ivs if iv.allowed), key=lambda iv: iv.end - iv.start)
    chain = build_periodic_chain(100, 0.5, atom)
    in_gap = max(chain_scattering(chain, gap.start + f * (gap.end - gap.start), SYM).transmission
                 for f in (0.1, 0.25, 0.5, 0.75, 0.9))
    mid = chain_scattering(chain, 0.5 * (band.start + band.end), SYM).transmission
    ok = agree and in_gap < 1e-3 and mid >= 1e3 * in_gap
    return ok, (f"max dispersion mismatch {worst:.1e} (relative to max(1,|cos KL|)); "
                f"gap [{gap.start:.4f}, {gap.end:.4f}]; in-gap T <= {in_gap:.2e}, mid-band T {mid:.3g}")


@timed(600.0)
def criterion_7():
    sym_atom = Atom(omega=1.0, gamma_r=0.1, gamma_l=0.1)
    fit = localization_length_mc(sym_atom, 0.5, DisorderSpec("position", 0.0, 1.0, 10**4, seed=71), 2.0, SYM,
                                 [25, 50, 100, 200, 400])
    fit_ok = fit.fit_r2 > 0.99
    sigmas = [0.0125, 0.025, 0.05, 0.1, 0.2]
    spec = DisorderSpec("position", 0.0, 0.0, 1000, seed=72)

    def xi(atom, wg):
        return np.array([p.xi for p in localization_sweep(atom, 0.5, sigmas, spec, 1.6, wg, n=400)])

    strong = xi(Atom(omega=1.0, gamma_r=0.1, gamma_l=0.01), SMALL_BACK)
    weak = xi(Atom(omega=1.0, gamma_r=0.02, gamma_l=0.002), SMALL_BACK)
    sym = xi(sym_atom, SYM)
    decreasing = bool(np.all(np.diff(strong) < 0) and np.all(np.diff(weak) < 0))
    ordering = bool(np.all(strong < weak))
    ratio = float(np.min(strong / sym))
    ok = fit_ok and decreasing and ordering and ratio >= 5.0
    return ok, (f"fit r2 {fit.fit_r2:.5f}; xi decreasing in sigma: {decreasing}; strong < weak: {ordering}; "
                f"min small-back/symmetric xi ratio {ratio:.1f}")


@timed(300.0)
def criterion_8():
    configs = {
        "spectrum": {"waveguide": {"kind": "bidirectional", "v_l": 10.0},
                     "chain": {"n": 10, "spacing": 0.5, "gamma_r": 0.1, "gamma_l": 0.01},
                     "photon": {"sweep": {"min": 0.5, "max": 2.5, "steps": 21}},
                     "disorder": {"target": "position", "sigma": 2.0, "realizations": 3000, "seed": 1}},
        "bands": {"waveguide": {"kind": "bidirectional"}, "chain": {"spacing": 0.5, "gamma_r": 0.1, "gamma_l": 0.1},
                  "photon": {"sweep": {"min": 0.5, "max": 2.5, "steps": 401}}},
        "localization": {"waveguide": {"kind": "bidirectional"},
                         "chain": {"spacing": 0.5, "gamma_r": 0.1, "gamma_l": 0.1}, "photon": {"omega": 2.0},
                         "disorder": {"target": "position", "sigma": 1.0, "realizations": 3000, "seed": 2},
                         "localization": {"mode": "fit", "n_values": [25, 50, 100]}},
    }
    identical = total = 0
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        for name, cfg in configs.items():
            path = tmp / f"{name}.json"
            path.write_text(json.dumps(cfg))
            outputs = []
            for run, threads in enumerate(("1", "4", "1")):
                out = tmp / f"{name}-{run}"
                with contextlib.redirect_stdout(io.StringIO()):
                    code = cli.main([name, "--config", str(path), "--out", str(out), "--threads", threads])
                if code != 0:
                    return False, f"{name} run failed"
                outputs.append({p.name: p.read_bytes() for p in sorted(out.glob("*.csv"))})
            for other in outputs[1:]:
                total += 1
                identical += other == outputs[0]
    return identical == total, f"{identical}/{total} reruns byte-identical across --threads 1/4"


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7,
            criterion_8]


def _report(k, ok, detail):
    print(f"criterion {k}: {'PASS' if ok else 'FAIL'} - {detail}", flush=True)


def _run(k, capsys):
    ok, detail = CRITERIA[k - 1]()
    with capsys.disabled():
        print()
        _report(k, ok, detail)
    assert ok, detail


def test_criterion_1_chiral_critical_coupling(capsys):
    _run(1, capsys)


def test_criterion_2_chiral_position_immunity(capsys):
    _run(2, capsys)


def test_criterion_3_analytic_vs_monte_carlo(capsys):
    _run(3, capsys)


def test_criterion_4_disorder_average_shapes(capsys):
    _run(4, capsys)


def test_criterion_5_bidirectional_correctness(capsys):
    _run(5, capsys)


def test_criterion_6_band_structure(capsys):
    _run(6, capsys)


def test_criterion_7_localization_scaling(capsys):
    _run(7, capsys)


def test_criterion_8_determinism(capsys):
    _run(8, capsys)


if __name__ == "__main__":
    failed = 0
    for k, fn in enumerate(CRITERIA, start=1):
        ok, detail = fn()
        _report(k, ok, detail)
        failed += not ok
    sys.exit(1 if failed else 0)
