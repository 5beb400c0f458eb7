import json
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from apsi.errors import InvalidArgument, OutOfBandError, RefinementFailed
from apsi.signal import APSignal, SampledRecord, synthesize
from apsi.spectral import (
    AnalysisConfig,
    SpectrumEstimate,
    extract_frequency_set,
    fit_exponents,
    fourier_exponent,
    fourier_exponents,
    golden_section_max,
    grid_spectrum,
    refine_peak,
    scan_spectrum,
)

from helpers import tone

TWO_PI = 2 * math.pi


@pytest.fixture(autouse=True)
def _quiet():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        yield


def cosine_exponent_oracle(w0, amp, omega, T):
    """(1/T) * integral_0^T amp*cos(w0 t) exp(-j omega t) dt, in closed form."""
    def seg(a):
        return (np.exp(1j * a * T) - 1) / (1j * a)

    return amp / (2 * T) * (seg(w0 - omega) + seg(-w0 - omega))


def dense_energy(record, omegas):
    # direct rectangle-free oracle: trapezoid built by hand, one omega at a time
    t, x, dt = record.times, record.samples, record.dt
    out = []
    for w in omegas:
        f = x * np.exp(-1j * w * t)
        c = dt * (f.sum() - 0.5 * (f[0] + f[-1])) / record.duration
        out.append(abs(c) ** 2)
    return np.array(out)


# --- config and types ----------------------------------------------------------


def test_config_validation():
    AnalysisConfig((0.0, 1.0))
    for bad in [dict(band=(1.0, 1.0)), dict(band=(-1.0, 2.0)),
                dict(band=(0, 1), energy_threshold=0.0), dict(band=(0, 1), energy_threshold=1.0),
                dict(band=(0, 1), refine_tolerance=0.0),
                dict(band=(0, 1), max_refine_iterations=0)]:
        with pytest.raises(InvalidArgument):
            AnalysisConfig(**bad)


def test_spectrum_estimate_invariants_and_json():
    r = SampledRecord(np.zeros(101), 0.1)
    est = SpectrumEstimate.for_record(r, [(1.0, 0.5 + 0.25j), (2.0, -1j)])
    assert est.resolution == TWO_PI / est.record_span
    d = json.loads(est.to_json())
    assert set(d) == {"resolution", "record_span", "lines"}
    assert d["lines"][0] == {"omega": 1.0, "re": 0.5, "im": 0.25}
    assert SpectrumEstimate.from_dict(d) == est
    assert est.to_csv().splitlines()[0] == "omega,re,im,magnitude"
    with pytest.raises(InvalidArgument):
        SpectrumEstimate(((2.0, 0j), (1.0, 0j)), 1.0, TWO_PI)


# --- fourier_exponent ------------------------------------------------------------


def test_exponent_on_bin():
    r = synthesize(tone(TWO_PI, 2.0), 10.0, 0.001)
    c = fourier_exponent(r, TWO_PI)
    assert abs(c - 1.0) < 1e-3


def test_exponent_off_bin_closed_form():
    T = 10.0
    r = synthesize(tone(TWO_PI, 2.0), T, 0.001)
    w = TWO_PI * 1.05
    oracle = cosine_exponent_oracle(TWO_PI, 2.0, w, T)
    assert abs(fourier_exponent(r, w) - oracle) < 1e-6


def test_exponent_zero_record_and_dc():
    r = SampledRecord(np.zeros(50), 0.1)
    assert fourier_exponent(r, 3.0) == 0j
    assert fourier_exponent(SampledRecord(np.full(9, 2.5), 0.1), 0.0) == pytest.approx(2.5)


def test_exponent_out_of_band():
    r = SampledRecord(np.zeros(50), 0.1)
    with pytest.raises(OutOfBandError):
        fourier_exponent(r, math.pi / 0.1)
    with pytest.raises(InvalidArgument):
        fourier_exponent(r, -1.0)


def test_vectorised_matches_scalar():
    r = synthesize(APSignal.from_triples([(1.0, 1.0, 0.2), (2.7, 0.4, 1.0)]), 40.0, 0.05)
    ws = np.linspace(0.1, 5.0, 37)
    vec = fourier_exponents(r, ws)
    np.testing.assert_allclose(vec, [fourier_exponent(r, w) for w in ws], atol=1e-14)


def test_naive_exponent_leakage_bound():
    sig = APSignal.from_triples([(2.0, 1.0, 0.3), (3.1, 0.7, 1.0), (4.5, 1.2, -2.0)])
    for T in (100.0, 200.0):
        r = synthesize(sig, T, 0.05)
        est = fourier_exponents(r, sig.frequencies)
        for k, c in enumerate(sig.components):
            bound = sum(
                m.amplitude / (abs(m.frequency - c.frequency) * T)
                + m.amplitude / ((m.frequency + c.frequency) * T)
                for m in sig.components if m is not c
            ) + c.amplitude / (2 * c.frequency * T)
            assert abs(est[k] - c.exponent) <= bound


# --- golden section ----------------------------------------------------------------


def test_golden_section_quadratic():
    x, fx = golden_section_max(lambda v: -(v - 0.3) ** 2, -1.0, 2.0, 1e-10)
    assert x == pytest.approx(0.3, abs=1e-9)
    assert fx == pytest.approx(0.0, abs=1e-18)


# --- scan_spectrum --------------------------------------------------------------------


def test_scan_two_tones_against_dense_oracle():
    T = 100.0
    r = synthesize(APSignal.from_triples([(3.0, 1.0, 0.0), (7.0, 0.5, 0.0)]), T, 0.05)
    dw = TWO_PI / T
    est = scan_spectrum(r, AnalysisConfig((0.5, 10.0)))
    cand = np.array(est.frequencies)
    for true in (3.0, 7.0):
        dense = np.arange(true - dw, true + dw, 1e-4)
        peak = dense[np.argmax(dense_energy(r, dense))]
        nearest = cand[np.argmin(np.abs(cand - peak))]
        assert abs(nearest - peak) <= dw / 2
        assert abs(nearest - true) <= dw / 2
    # the two strongest candidates are the true lines
    top = cand[np.argsort(-np.abs(np.array(est.exponents)))[:2]]
    assert sorted(np.round(top)) == [3.0, 7.0]


def test_scan_zero_record():
    r = SampledRecord(np.zeros(2001), 0.05)
    assert len(scan_spectrum(r, AnalysisConfig((0.5, 10.0)))) == 0


def test_scan_line_outside_band_only_leaks():
    T = 100.0
    r = synthesize(tone(3.0), T, 0.005)
    cfg = AnalysisConfig((4.0, 10.0))
    est = scan_spectrum(r, cfg)
    assert all(abs(w - 3.0) > TWO_PI / T for w in est.frequencies)
    # every in-band exponent is pure leakage, matching the closed form and
    # far below the energy of the true line
    grid, exps = grid_spectrum(r, cfg)
    oracle = cosine_exponent_oracle(3.0, 1.0, grid, T)
    np.testing.assert_allclose(exps, oracle, atol=1e-6)
    assert np.max(np.abs(exps) ** 2) < 1e-3 * 0.5 ** 2
    fs, _ = extract_frequency_set(r, cfg)
    assert all(abs(w - 3.0) > TWO_PI / T for w in fs.frequencies)


def test_scan_band_without_grid_points():
    r = SampledRecord(np.zeros(101), 0.1)
    with pytest.raises(InvalidArgument):
        scan_spectrum(r, AnalysisConfig((40.0, 50.0)))


# --- refine_peak -----------------------------------------------------------------------


def test_refine_off_grid_against_dense_oracle():
    T = 50.0
    r = synthesize(tone(3.017), T, 0.05)
    dw = TWO_PI / T
    cfg = AnalysisConfig((0.5, 10.0))
    grid, exps = grid_spectrum(r, cfg)
    seed = grid[np.argmax(np.abs(exps))]
    dense = np.arange(seed - dw, seed + dw, 1e-5)
    oracle = dense[np.argmax(dense_energy(r, dense))]
    w = refine_peak(r, seed, cfg)
    assert abs(w - 3.017) < 1e-3
    assert abs(oracle - 3.017) < 1e-3


def test_refine_on_grid_line():
    T = TWO_PI / 3 * 30
    r = synthesize(tone(3.0), T, T / 2000)
    cfg = AnalysisConfig((0.5, 10.0))
    assert refine_peak(r, 3.0, cfg) == pytest.approx(3.0, abs=cfg.refine_tolerance)


def test_refine_fails_between_two_peaks():
    T = 100.0
    dw = TWO_PI / T
    w1 = 40 * dw
    r = synthesize(APSignal.from_triples([(w1, 1.0, 0.0), (w1 + 2 * dw, 1.0, 0.0)]), T, 0.05)
    with pytest.raises(RefinementFailed) as info:
        refine_peak(r, w1 + dw, AnalysisConfig((0.5, 10.0)))
    assert info.value.seed_omega == pytest.approx(w1 + dw)


def test_unresolvable_pair_gives_single_line():
    T = 200.0
    dw = TWO_PI / T
    r = synthesize(APSignal.from_triples([(5.0, 1.0, 0.3), (5.0 + 0.4 * dw, 1.0, 1.9)]), T, 0.05)
    fs, _ = extract_frequency_set(r, AnalysisConfig((0.5, 12.0)))
    assert len(fs) == 1
    assert abs(fs.frequencies[0] - 5.0) < 2 * dw


# --- extract_frequency_set --------------------------------------------------------------


def test_extract_three_lines():
    sig = APSignal.from_triples([(3.0, 1.0, 0.0), (7.0, 0.5, 0.0), (11.3, 0.3, 0.0)])
    r = synthesize(sig, 100.0, 0.05)
    fs, est = extract_frequency_set(r, AnalysisConfig((0.5, 15.0)))
    assert len(fs) == 3
    np.testing.assert_allclose(fs.frequencies, [3.0, 7.0, 11.3], atol=1e-2)
    assert fs.delta == pytest.approx(TWO_PI / 100.0)
    assert est.frequencies == fs.frequencies


def test_extract_threshold_drops_weak_line():
    ratio = (0.005 / 2) ** 2 / 0.5 ** 2
    assert ratio == pytest.approx(2.5e-5)
    sig = APSignal.from_triples([(3.0, 1.0, 0.0), (7.0, 0.005, 0.0)])
    r = synthesize(sig, 100.0, 0.05)
    fs, _ = extract_frequency_set(r, AnalysisConfig((0.5, 10.0), energy_threshold=1e-3))
    assert len(fs) == 1 and fs.frequencies[0] == pytest.approx(3.0, abs=1e-2)
    # a threshold below the ratio keeps it
    fs, _ = extract_frequency_set(r, AnalysisConfig((0.5, 10.0), energy_threshold=1e-5))
    assert len(fs) == 2


def test_extract_zero_record():
    fs, est = extract_frequency_set(SampledRecord(np.zeros(2001), 0.05), AnalysisConfig((0.5, 10.0)))
    assert len(fs) == 0 and len(est) == 0


def test_extract_without_deleak_follows_plain_recipe():
    sig = APSignal.from_triples([(3.0, 1.0, 0.0), (7.0, 0.5, 1.0)])
    r = synthesize(sig, 100.0, 0.05)
    cfg = AnalysisConfig((0.5, 10.0), deleak=False)
    fs, est = extract_frequency_set(r, cfg)
    assert len(fs) == 2
    np.testing.assert_allclose(est.exponents, fourier_exponents(r, fs.frequencies))


SUITE = APSignal.from_triples([(2.0, 1.0, 0.3), (3.1, 0.7, 1.0), (4.5, 1.2, -2.0), (6.3, 0.5, 0.4)])


def test_consistency_and_exponent_accuracy():
    cfg = AnalysisConfig((0.5, 10.0))
    truth = np.array(SUITE.frequencies)
    exact = np.array([c.exponent for c in SUITE.components])
    prev = None
    for T in (100.0, 200.0, 400.0):
        fs, est = extract_frequency_set(synthesize(SUITE, T, 0.05), cfg)
        assert len(fs) == truth.size
        err = np.max(np.abs(np.array(fs.frequencies) - truth))
        assert err <= cfg.refine_tolerance + 1.0 / T
        if prev is not None:
            # halving until the refinement tolerance floor is reached
            assert err <= max(prev / 2, 10 * cfg.refine_tolerance)
        prev = err
        for k, c in enumerate(SUITE.components):
            bound = sum(m.amplitude / (abs(m.frequency - c.frequency) * T)
                        for m in SUITE.components if m is not c)
            assert abs(est.exponents[k] - exact[k]) <= bound


@settings(max_examples=8, deadline=None)
@given(st.floats(0.05, 20.0))
def test_gain_equivariance(c):
    cfg = AnalysisConfig((0.5, 10.0))
    r = synthesize(SUITE, 100.0, 0.05)
    fs, est = extract_frequency_set(r, cfg)
    fs2, est2 = extract_frequency_set(r.scaled(c), cfg)
    assert len(fs2) == len(fs)
    np.testing.assert_allclose(fs2.frequencies, fs.frequencies, atol=1e-6)
    np.testing.assert_allclose(est2.exponents, c * np.array(est.exponents), rtol=1e-5, atol=1e-9)


def test_resolution_law_single_seed():
    T = 200.0
    dw = TWO_PI / T
    sig = APSignal.from_triples([(5.0, 1.0, 0.0), (5.0 + 2.5 * dw, 1.0, 2.0)])
    fs, _ = extract_frequency_set(synthesize(sig, T, 0.05), AnalysisConfig((0.5, 12.0)))
    assert len(fs) == 2


def test_fit_exponents_is_leakage_free():
    sig = APSignal.from_triples([(2.0, 1.0, 0.3), (2.2, 0.6, -1.0)])
    r = synthesize(sig, 100.0, 0.05)
    c = fit_exponents(r, sig.frequencies)
    np.testing.assert_allclose(c, [x.exponent for x in sig.components], atol=1e-10)
    with pytest.raises(OutOfBandError):
        fit_exponents(r, [100.0])
