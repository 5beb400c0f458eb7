"""
Fourier exponents of finite records and extraction of harmonic frequency sets.

The estimator evaluates C(w) = (1/T) * integral x(t) exp(-j w t) dt on an
arbitrary frequency grid (no FFT), so any w below Nyquist can be probed.
Extraction follows the usual peak-picking recipe:

1. scan |C|^2 on the grid w_lo, w_lo + dw, ... with dw = 2*pi/T,
2. refine each strict grid maximum by golden-section search within +-dw,
3. drop lines whose energy falls below a fraction of the strongest,
4. merge refined lines closer than 2*dw.

With ``deleak`` enabled (default) the surviving lines are then polished by
cyclic relaxation: every line is re-located on the record with all other
fitted lines subtracted, amplitudes are refitted jointly by weighted least
squares, and the residual is re-scanned for lines hidden under the sidelobes
of stronger ones.  This removes the rectangular-window leakage that otherwise
limits exponent accuracy to roughly A/(gap*T).
"""
from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import AnalysisWarning, InvalidArgument, OutOfBandError, RefinementFailed
from .freqset import FrequencySet
from .signal import TWO_PI, SampledRecord, bohr_mean

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0

# Grid evaluation works in blocks of this many (frequency x sample) products.
_BLOCK = 1 << 22


@dataclass(frozen=True)
class AnalysisConfig:
    band: tuple[float, float]
    energy_threshold: float = 1e-4
    refine_tolerance: float = 1e-7
    max_refine_iterations: int = 200
    deleak: bool = True
    max_sweeps: int = 200
    max_passes: int = 20

    def __post_init__(self):
        lo, hi = (float(v) for v in self.band)
        object.__setattr__(self, "band", (lo, hi))
        if not 0.0 <= lo < hi:
            raise InvalidArgument(f"band must satisfy 0 <= lo < hi, got {self.band}")
        if not 0.0 < self.energy_threshold < 1.0:
            raise InvalidArgument("energy_threshold must lie in (0, 1)")
        if not self.refine_tolerance > 0:
            raise InvalidArgument("refine_tolerance must be > 0")
        if self.max_refine_iterations < 1:
            raise InvalidArgument("max_refine_iterations must be >= 1")


@dataclass(frozen=True)
class SpectrumEstimate:
    lines: tuple[tuple[float, complex], ...]
    resolution: float
    record_span: float
    warnings: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        lines = tuple((float(w), complex(c)) for w, c in self.lines)
        for (a, _), (b, _) in zip(lines, lines[1:]):
            if not b > a:
                raise InvalidArgument("spectrum lines must be strictly increasing")
        if lines and lines[0][0] < 0:
            raise InvalidArgument("spectrum frequencies must be >= 0")
        object.__setattr__(self, "lines", lines)

    @classmethod
    def for_record(cls, record: SampledRecord, lines=(), warnings=()) -> "SpectrumEstimate":
        return cls(tuple(lines), TWO_PI / record.duration, record.duration, tuple(warnings))

    @property
    def frequencies(self) -> tuple[float, ...]:
        return tuple(w for w, _ in self.lines)

    @property
    def exponents(self) -> tuple[complex, ...]:
        return tuple(c for _, c in self.lines)

    def __len__(self):
        return len(self.lines)

    def to_dict(self) -> dict:
        return {
            "resolution": self.resolution,
            "record_span": self.record_span,
            "lines": [{"omega": w, "re": c.real, "im": c.imag} for w, c in self.lines],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "SpectrumEstimate":
        return cls(
            tuple((ln["omega"], complex(ln["re"], ln["im"])) for ln in d["lines"]),
            d["resolution"],
            d["record_span"],
        )

    def to_csv(self) -> str:
        return spectrum_csv(self.frequencies, self.exponents)


def spectrum_csv(omegas, exponents) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["omega", "re", "im", "magnitude"])
    for om, c in zip(omegas, exponents):
        c = complex(c)
        w.writerow([repr(float(om)), repr(c.real), repr(c.imag), repr(abs(c))])
    return buf.getvalue()


# --------------------------------------------------------------------------
# Fourier exponents


def _check_omega(record: SampledRecord, omega: float) -> None:
    if omega < 0:
        raise InvalidArgument(f"omega must be >= 0, got {omega}")
    if omega >= record.nyquist:
        raise OutOfBandError(f"omega={omega:g} is at or above Nyquist {record.nyquist:g}")


def fourier_exponent(record: SampledRecord, omega: float) -> complex:
    """Trapezoidal (1/T) * integral of x(t) exp(-j omega t) over the record."""
    omega = float(omega)
    _check_omega(record, omega)
    if omega == 0.0:
        return complex(bohr_mean(record), 0.0)
    wx = record.weights * record.samples
    t = record.times
    return complex(wx @ np.cos(omega * t), -(wx @ np.sin(omega * t)))


def fourier_exponents(record: SampledRecord, omegas) -> np.ndarray:
    """Vectorised `fourier_exponent` over many frequencies."""
    omegas = np.atleast_1d(np.asarray(omegas, dtype=float))
    if omegas.size == 0:
        return np.zeros(0, dtype=complex)
    if omegas.min() < 0:
        raise InvalidArgument("omega must be >= 0")
    if omegas.max() >= record.nyquist:
        raise OutOfBandError(
            f"omega={omegas.max():g} is at or above Nyquist {record.nyquist:g}"
        )
    return _exponents(record.times, record.weights * record.samples, omegas)


def _exponents(t: np.ndarray, wx: np.ndarray, omegas: np.ndarray) -> np.ndarray:
    out = np.empty(omegas.size, dtype=complex)
    step = max(1, _BLOCK // t.size)
    for i in range(0, omegas.size, step):
        phase = np.outer(omegas[i : i + step], t)
        out[i : i + step] = np.cos(phase) @ wx - 1j * (np.sin(phase) @ wx)
    return out


def analysis_grid(record: SampledRecord, config: AnalysisConfig) -> np.ndarray:
    lo, hi = config.band
    if hi >= record.nyquist:
        raise OutOfBandError(
            f"band upper edge {hi:g} is at or above Nyquist {record.nyquist:g}"
        )
    dw = TWO_PI / record.duration
    n = int(math.floor((hi - lo) / dw + 1e-9)) + 1
    grid = lo + dw * np.arange(n)
    if grid.size == 0:
        raise InvalidArgument(f"band {config.band} contains no grid points")
    return grid


def grid_spectrum(record: SampledRecord, config: AnalysisConfig) -> tuple[np.ndarray, np.ndarray]:
    """Exponents on the analysis grid, e.g. for plotting."""
    grid = analysis_grid(record, config)
    return grid, fourier_exponents(record, grid)


def _grid_maxima(t, wx, grid, dw, nyquist) -> tuple[np.ndarray, np.ndarray]:
    """Strict local maxima of |C|^2 on the grid, judged against the grid neighbours
    (including the points just outside the grid, when those are admissible)."""
    ext = np.concatenate(([grid[0] - dw], grid, [grid[-1] + dw]))
    c = np.empty(ext.size, dtype=complex)
    c[1:-1] = _exponents(t, wx, grid)
    edge = np.array([ext[0], ext[-1]])
    ok = (edge > 0) & (edge < nyquist)
    c[[0, -1]] = 0.0
    if ok.any():
        c[[0, -1]] = np.where(ok, _exponents(t, wx, np.where(ok, edge, 0.0)), 0.0)
    p = np.abs(c) ** 2
    inner = p[1:-1]
    is_max = (inner > p[:-2]) & (inner > p[2:]) & (grid > 0)
    idx = np.flatnonzero(is_max)
    return grid[idx], c[1:-1][idx]


# --------------------------------------------------------------------------
# Peak search


def golden_section_max(f, a: float, b: float, tol: float, max_iter: int = 200):
    """
    Maximise a unimodal `f` on [a, b] by golden-section search.

    Stops when the bracket is narrower than `tol` or after `max_iter`
    shrink steps.  Returns (x_best, f_best) over all evaluated points.
    """
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    it = 0
    while b - a > tol and it < max_iter:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
        it += 1
    return (c, fc) if fc >= fd else (d, fd)


def refine_peak(record: SampledRecord, seed_omega: float, config: AnalysisConfig) -> float:
    """
    Locate the spectral peak within one grid step of `seed_omega`.

    The objective is the energy of the least-squares projection of the record
    onto cos/sin at w.  It tracks |C(w)|^2 but is not pulled off the line by
    the negative-frequency image, so a clean tone refines to its exact
    frequency.  Raises RefinementFailed when both bracket ends exceed the
    centre, i.e. the seed is not a local maximum of the bracket.
    """
    _check_omega(record, seed_omega)
    dw = TWO_PI / record.duration
    return _refine(record.times, record.weights, record.samples, seed_omega, dw,
                   record.nyquist, config)


def _projection_energy(t, w, r, omega) -> float:
    c, s = np.cos(omega * t), np.sin(omega * t)
    wc, ws = w * c, w * s
    g1, g2 = wc @ r, ws @ r
    a11, a12, a22 = wc @ c, wc @ s, ws @ s
    det = a11 * a22 - a12 * a12
    if det <= 1e-300:
        return 0.0
    return float((a22 * g1 * g1 - 2 * a12 * g1 * g2 + a11 * g2 * g2) / det)


def _refine(t, w, x, seed, dw, nyquist, config) -> float:
    def energy(om):
        return _projection_energy(t, w, x, om)

    a = max(seed - dw, 0.0)
    b = min(seed + dw, nyquist * (1 - 1e-12))
    f_seed = energy(seed)
    if energy(a) > f_seed and energy(b) > f_seed:
        raise RefinementFailed(seed)
    om, f_om = golden_section_max(
        energy, a, b, config.refine_tolerance, config.max_refine_iterations
    )
    return om if f_om >= f_seed else seed


# --------------------------------------------------------------------------
# Extraction


def scan_spectrum(record: SampledRecord, config: AnalysisConfig) -> SpectrumEstimate:
    """Unrefined candidate lines: strict local maxima of |C|^2 on the grid."""
    grid = analysis_grid(record, config)
    dw = TWO_PI / record.duration
    w, c = _grid_maxima(record.times, record.weights * record.samples, grid, dw, record.nyquist)
    return SpectrumEstimate.for_record(record, zip(w.tolist(), c.tolist()))


def extract_frequency_set(
    record: SampledRecord, config: AnalysisConfig
) -> tuple[FrequencySet, SpectrumEstimate]:
    """
    Frequency analysis of one record: the set of harmonic frequencies present
    in the band plus their Fourier exponents.

    Refinement failures do not abort; they are reported in
    ``SpectrumEstimate.warnings`` (and through the warnings module) and the
    grid frequency is kept for that line.
    """
    dw = TWO_PI / record.duration
    t = record.times
    wx = record.weights * record.samples
    notes: list[str] = []

    cands = scan_spectrum(record, config)
    refined = []
    for w0, _ in cands.lines:
        try:
            refined.append(_refine(t, record.weights, record.samples, w0, dw,
                                   record.nyquist, config))
        except RefinementFailed as exc:
            notes.append(str(exc))
            refined.append(w0)
    freqs = np.asarray(refined)
    energy = np.abs(_exponents(t, wx, freqs)) ** 2 if freqs.size else np.zeros(0)
    freqs, energy = _threshold(freqs, energy, config.energy_threshold)
    freqs, energy = _merge(freqs, energy, 2 * dw)

    if config.deleak and freqs.size:
        freqs, exps, more = _Relaxation(record, config).run(freqs)
        notes.extend(more)
    else:
        exps = _exponents(t, wx, freqs) if freqs.size else np.zeros(0, dtype=complex)

    for n in notes:
        warnings.warn(n, AnalysisWarning, stacklevel=2)
    est = SpectrumEstimate.for_record(record, zip(freqs.tolist(), exps.tolist()), notes)
    return FrequencySet(tuple(freqs.tolist()), dw), est


def _threshold(freqs, energy, rel):
    if freqs.size == 0 or energy.max() <= 0:
        return freqs[:0], energy[:0]
    keep = energy >= rel * energy.max()
    return freqs[keep], energy[keep]


def _merge(freqs, energy, min_gap):
    """Collapse lines closer than `min_gap`, keeping the more energetic one."""
    order = np.argsort(freqs, kind="stable")
    freqs, energy = freqs[order], energy[order]
    kept: list[int] = []
    for i in range(freqs.size):
        if kept and freqs[i] - freqs[kept[-1]] < min_gap:
            if energy[i] > energy[kept[-1]]:
                kept[-1] = i
        else:
            kept.append(i)
    idx = np.asarray(kept, dtype=int)
    return freqs[idx], energy[idx]


def fit_exponents(record: SampledRecord, omegas) -> np.ndarray:
    """
    Joint weighted least-squares exponents of sinusoids at `omegas`
    (plus a constant term), i.e. leakage-free amplitudes when `omegas`
    contains every line present in the record.
    """
    omegas = np.asarray(omegas, dtype=float)
    if omegas.size and omegas.max() >= record.nyquist:
        raise OutOfBandError("frequency at or above Nyquist")
    if omegas.size and omegas.min() <= 0:
        raise InvalidArgument("fit frequencies must be > 0")
    sol = _lsq(record.times, np.sqrt(record.weights), record.samples, omegas)
    return 0.5 * (sol[1::2] - 1j * sol[2::2])


def _basis(t, omegas):
    cols = [np.ones_like(t)]
    for w in omegas:
        cols.append(np.cos(w * t))
        cols.append(np.sin(w * t))
    return np.column_stack(cols)


def _lsq(t, sw, x, omegas):
    B = _basis(t, omegas)
    sol, *_ = np.linalg.lstsq(B * sw[:, None], x * sw, rcond=None)
    return sol


class _Relaxation:
    """Cyclic relaxation of a multi-sinusoid model against one record."""

    def __init__(self, record: SampledRecord, config: AnalysisConfig):
        self.t = record.times
        self.x = record.samples
        self.w = record.weights
        self.sw = np.sqrt(self.w)
        self.nyquist = record.nyquist
        self.dw = TWO_PI / record.duration
        self.cfg = config
        self.notes: list[str] = []

    def _fit(self, freqs):
        sol = _lsq(self.t, self.sw, self.x, freqs)
        return sol, 0.5 * (sol[1::2] - 1j * sol[2::2])

    def _projection_energy(self, r, omega):
        return _projection_energy(self.t, self.w, r, omega)

    def _sweep(self, freqs, sol):
        """One Gauss-Seidel pass; returns new frequencies and the largest move."""
        freqs = freqs.copy()
        waves = [sol[1 + 2 * k] * np.cos(w * self.t) + sol[2 + 2 * k] * np.sin(w * self.t)
                 for k, w in enumerate(freqs)]
        model = sol[0] + np.sum(waves, axis=0)
        shift = 0.0
        half = 0.5 * self.dw
        for k, w0 in enumerate(freqs):
            r = self.x - model + waves[k]
            lo = max(w0 - half, 0.5 * w0)
            hi = min(w0 + half, self.nyquist * (1 - 1e-9))
            w, _ = golden_section_max(
                lambda om: self._projection_energy(r, om), lo, hi,
                self.cfg.refine_tolerance, self.cfg.max_refine_iterations,
            )
            if self._projection_energy(r, w) < self._projection_energy(r, w0):
                w = w0
            c, s = np.cos(w * self.t), np.sin(w * self.t)
            sub = np.column_stack([c, s]) * self.sw[:, None]
            ab, *_ = np.linalg.lstsq(sub, r * self.sw, rcond=None)
            new_wave = ab[0] * c + ab[1] * s
            model += new_wave - waves[k]
            waves[k] = new_wave
            shift = max(shift, abs(w - w0))
            freqs[k] = w
        return freqs, shift

    def _prune(self, freqs, exps):
        energy = np.abs(exps) ** 2
        keep = energy >= self.cfg.energy_threshold * energy.max()
        freqs, energy = freqs[keep], energy[keep]
        return _merge(freqs, energy, 2 * self.dw)[0]

    def _converge(self, freqs):
        for _ in range(self.cfg.max_sweeps):
            sol, exps = self._fit(freqs)
            pruned = self._prune(freqs, exps)
            if pruned.size != freqs.size:
                freqs = pruned
                continue
            freqs, shift = self._sweep(freqs, sol)
            order = np.argsort(freqs)
            freqs = freqs[order]
            if shift < self.cfg.refine_tolerance:
                break
        else:
            self.notes.append(
                f"relaxation did not converge within {self.cfg.max_sweeps} sweeps"
            )
        sol, exps = self._fit(freqs)
        pruned = self._prune(freqs, exps)
        if pruned.size != freqs.size:
            return self._converge(pruned)
        return freqs, sol, exps

    def _new_lines(self, freqs, sol, exps):
        """Residual peaks strong enough to be lines and clear of existing ones."""
        resid = self.x - _basis(self.t, freqs) @ sol
        lo, hi = self.cfg.band
        n = int(math.floor((hi - lo) / self.dw + 1e-9)) + 1
        grid = lo + self.dw * np.arange(n)
        wr = self.w * resid
        cand, c = _grid_maxima(self.t, wr, grid, self.dw, self.nyquist)
        floor = self.cfg.energy_threshold * float(np.max(np.abs(exps) ** 2))
        found = []
        for w0, c0 in zip(cand, c):
            if abs(c0) ** 2 < floor:
                continue
            try:
                w = _refine(self.t, self.w, resid, w0, self.dw, self.nyquist, self.cfg)
            except RefinementFailed:
                w = w0
            if np.min(np.abs(freqs - w)) >= 2 * self.dw and all(
                abs(w - f) >= 2 * self.dw for f in found
            ):
                found.append(w)
        return found

    def run(self, freqs):
        freqs = np.sort(np.asarray(freqs, dtype=float))
        freqs, sol, exps = self._converge(freqs)
        for _ in range(self.cfg.max_passes):
            extra = self._new_lines(freqs, sol, exps)
            if not extra:
                break
            freqs, sol, exps = self._converge(np.sort(np.concatenate([freqs, extra])))
        return freqs, exps, self.notes
