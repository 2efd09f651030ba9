import math

import numpy as np
import pytest

from wqed import bands
from wqed.bidirectional import chain_scattering
from wqed.core import Atom, ConfigError, WaveguideConfig, build_periodic_chain

SYM = WaveguideConfig()
SMALL_BACK = WaveguideConfig(v_l=10.0)


def symmetric(g=0.1):
    return Atom(gamma_r=g, gamma_l=g)


def test_matrix_and_closed_form_agree():
    rng = np.random.default_rng(2)
    for _ in range(500):
        wg = WaveguideConfig(v_r=rng.uniform(0.3, 3), v_l=rng.uniform(0.3, 10))
        atom = Atom(omega=1.0, gamma_r=rng.uniform(0, 0.3), gamma_l=rng.uniform(0, 0.3))
        l, w = rng.uniform(0.05, 2), rng.uniform(0.3, 3)
        a = bands.dispersion_general(w, wg, atom, l)
        b = bands.dispersion_from_matrix(w, wg, atom, l)
        assert abs(a.cos_kl - b.cos_kl) <= 1e-10 * max(1.0, abs(a.cos_kl))


def test_symmetric_reduces_to_textbook_form():
    atom, l = symmetric(), 0.37
    for w in (0.6, 0.95, 1.2, 1.9):
        ql = 2 * math.pi * w * l
        expected = math.cos(ql) + 2 * 0.1 / (w - 1.0) * math.sin(ql)
        assert bands.dispersion_general(w, SYM, atom, l).cos_kl == pytest.approx(expected, rel=1e-13)


def test_quarter_wave_at_two_gamma_detuning():
    # qL = pi/2 and Delta = 2 Gamma: cos(KL) = 1, the band edge
    w = 1.2
    l = 1 / (4 * w)
    assert bands.dispersion_general(w, SYM, symmetric(), l).cos_kl == pytest.approx(1.0, abs=1e-15)


def test_symmetric_half_wave_gap_contains_resonance():
    ivs = bands.scan_bands((0.5, 2.5), 801, SYM, symmetric(), 0.5)
    gap = [g for g in bands.gaps(ivs) if g.start < 1.0 < g.end]
    assert len(gap) == 1
    assert gap[0].start == pytest.approx(0.6608, abs=1e-3) and gap[0].end == pytest.approx(1.3392, abs=1e-3)


def test_gap_predicts_finite_chain_transmission():
    ivs = bands.scan_bands((0.5, 2.5), 801, SYM, symmetric(), 0.5)
    chain = build_periodic_chain(60, 0.5, symmetric())
    for iv in ivs:
        mid = 0.5 * (iv.start + iv.end)
        t = chain_scattering(chain, mid, SYM).transmission
        assert (t > 1e-3) if iv.allowed else (t < 1e-3)


def test_no_gaps_without_backward_coupling():
    ivs = bands.scan_bands((0.3, 3.0), 500, SMALL_BACK, Atom(gamma_r=0.1, gamma_l=0.0), 0.5)
    assert bands.gaps(ivs) == []
    ivs = bands.scan_bands((0.3, 3.0), 500, SYM, Atom(gamma_r=0.0, gamma_l=0.0), 0.5)
    assert bands.gaps(ivs) == [] and all(iv.allowed for iv in ivs)


def test_small_back_reflection_gaps_are_narrower():
    sym = bands.gaps(bands.scan_bands((0.3, 3.0), 1000, SYM, symmetric(), 0.5))
    small = bands.gaps(bands.scan_bands((0.3, 3.0), 1000, SMALL_BACK, Atom(gamma_r=0.1, gamma_l=0.01), 0.5))
    assert small
    assert max(g.end - g.start for g in small) < max(g.end - g.start for g in sym)


def test_resonant_gap_shrinks_with_spacing_and_bands_multiply():
    def resonant_width(l):
        g = [g for g in bands.gaps(bands.scan_bands((0.3, 3.0), 1500, SYM, symmetric(), l)) if g.start < 1 < g.end]
        return g[0].end - g[0].start
    assert resonant_width(0.5) == pytest.approx(0.678, abs=2e-3)
    assert resonant_width(1.0) == pytest.approx(0.458, abs=2e-3)
    n_gaps = [len(bands.gaps(bands.scan_bands((0.3, 3.0), 1500, SYM, symmetric(), l))) for l in (0.3, 1.0, 2.0)]
    assert n_gaps[0] < n_gaps[1] < n_gaps[2]


def test_allowed_samples_carry_bloch_phase():
    s = bands.dispersion_general(1.6, SYM, symmetric(), 0.5)
    assert s.allowed and s.kl == pytest.approx(math.acos(s.cos_kl))
    s = bands.dispersion_general(1.0001, SYM, symmetric(), 0.5)
    assert not s.allowed and math.isnan(s.kl)


@pytest.mark.parametrize("atom, l, wg", [(Atom(gamma=0.1), 0.5, SYM), (symmetric(), 0.0, SYM),
                                         (symmetric(), 0.5, WaveguideConfig(kind="chiral"))])
def test_preconditions(atom, l, wg):
    with pytest.raises(ConfigError):
        bands.dispersion_general(1.2, wg, atom, l)
