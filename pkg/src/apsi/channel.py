"""
LTI channels acting on almost-periodic signals, and synthetic multi-input
multi-output scenarios used as ground truth for identification.

A channel multiplies each harmonic by its frequency response K(jw): a line
(w, A, phi) becomes (w, A*|K|, phi + arg K).  Outputs are therefore
synthesised exactly, with no time-domain integration.
"""
from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import GenerationFailed, InvalidArgument
from .freqset import FrequencySet
from .signal import TWO_PI, APSignal, HarmonicComponent, SampledRecord, synthesize


def _polyval_jw(coeffs: Sequence[float], omega: float) -> complex:
    """sum_k coeffs[k] * (j omega)^k, ascending powers."""
    s = 1j * omega
    acc = 0j
    for c in reversed(coeffs):
        acc = acc * s + c
    return acc


@dataclass(frozen=True)
class ChannelResponse:
    """Frequency response K(jw) evaluated for w >= 0.

    ``descriptor`` is the JSON-able definition used for serialisation; it is
    empty for channels built from an arbitrary callable.
    """

    evaluator: Callable[[float], complex]
    description: str = ""
    descriptor: dict = field(default_factory=dict, compare=False)

    def __call__(self, omega: float) -> complex:
        return complex(self.evaluator(float(omega)))

    @classmethod
    def rational(cls, numerator: Sequence[float], denominator: Sequence[float]):
        """K(jw) = N(jw) / D(jw), coefficients in ascending powers."""
        num = tuple(float(c) for c in numerator)
        den = tuple(float(c) for c in denominator)
        if not any(den):
            raise InvalidArgument("denominator is identically zero")
        return cls(
            lambda w: _polyval_jw(num, w) / _polyval_jw(den, w),
            f"rational num={list(num)} den={list(den)}",
            {"kind": "rational", "numerator": list(num), "denominator": list(den)},
        )

    @classmethod
    def ode(cls, coefficients: Sequence[float]):
        """Channel of sum_k a_k y^(k) = x, i.e. K(jw) = 1 / sum_k a_k (jw)^k."""
        a = tuple(float(c) for c in coefficients)
        ch = cls.rational((1.0,), a)
        return cls(ch.evaluator, f"ode a={list(a)}", {"kind": "ode", "coefficients": list(a)})

    @classmethod
    def gain(cls, value: complex):
        value = complex(value)
        return cls(
            lambda w: value, f"gain {value}",
            {"kind": "gain", "re": value.real, "im": value.imag},
        )

    @classmethod
    def identity(cls):
        ch = cls.gain(1.0)
        return cls(ch.evaluator, "identity", {"kind": "identity"})

    @classmethod
    def zero(cls):
        ch = cls.gain(0.0)
        return cls(ch.evaluator, "zero", {"kind": "zero"})

    def to_dict(self) -> dict:
        if not self.descriptor:
            raise InvalidArgument(f"channel {self.description!r} has no serialisable form")
        return dict(self.descriptor)

    @classmethod
    def from_dict(cls, d: dict) -> "ChannelResponse":
        kind = d.get("kind")
        if kind == "ode":
            return cls.ode(d["coefficients"])
        if kind == "rational":
            return cls.rational(d["numerator"], d["denominator"])
        if kind == "gain":
            return cls.gain(complex(d.get("re", 0.0), d.get("im", 0.0)))
        if kind == "identity":
            return cls.identity()
        if kind == "zero":
            return cls.zero()
        raise InvalidArgument(f"unknown channel kind {kind!r}")


def apply_channel(signal: APSignal, channel: ChannelResponse) -> APSignal:
    out = []
    for c in signal.components:
        k = channel(c.frequency)
        if abs(k) == 0.0:
            continue
        if c.frequency == 0.0:
            out.append(HarmonicComponent(0.0, c.amplitude * k.real, 0.0))
        else:
            out.append(HarmonicComponent(c.frequency, c.amplitude * abs(k), c.phase + cmath.phase(k)))
    return APSignal(tuple(out))


@dataclass(frozen=True)
class MimoScenario:
    """
    Cross-coupled multi-input system with a shared link signal and additive
    noise on every input and output.

    ``channels[l][q]`` maps input l to output q.  All constituent frequency
    sets must be pairwise separated by at least ``min_gap_factor *
    resolution``, where ``resolution`` is 2*pi over the planned record length.
    """

    inputs: tuple[APSignal, ...]
    link: APSignal
    input_noises: tuple[APSignal, ...]
    channels: tuple[tuple[ChannelResponse, ...], ...]
    output_noises: tuple[APSignal, ...]
    resolution: float
    min_gap_factor: float = 4.0

    def __post_init__(self):
        for name in ("inputs", "input_noises", "output_noises"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        object.__setattr__(self, "channels", tuple(tuple(row) for row in self.channels))
        d = len(self.inputs)
        if len(self.input_noises) != d:
            raise InvalidArgument("need one input-noise signal per input")
        if len(self.channels) != d or any(len(r) != self.n_outputs for r in self.channels):
            raise InvalidArgument("channels must be an n_inputs x n_outputs matrix")
        if not self.resolution > 0:
            raise InvalidArgument("resolution must be > 0")
        gap = min_pairwise_gap(list(self._all_sets().values()))
        if gap < self.min_gap_factor * self.resolution * (1 - 1e-12):
            raise InvalidArgument(
                f"constituent frequency sets only {gap:g} rad/s apart; "
                f"need {self.min_gap_factor * self.resolution:g}"
            )

    @property
    def n_inputs(self) -> int:
        return len(self.inputs)

    @property
    def n_outputs(self) -> int:
        return len(self.output_noises)

    def _all_sets(self) -> dict[str, tuple[float, ...]]:
        sets = {"link": self.link.frequencies}
        for l, (x, n) in enumerate(zip(self.inputs, self.input_noises)):
            sets[f"x{l}"] = x.frequencies
            sets[f"n{l}"] = n.frequencies
        for q, m in enumerate(self.output_noises):
            sets[f"m{q}"] = m.frequencies
        return sets

    def truth(self) -> dict[str, FrequencySet]:
        """Construction-time frequency sets at the planned resolution."""
        return {k: FrequencySet(v, self.resolution) for k, v in self._all_sets().items()}

    def input_signal(self, l: int) -> APSignal:
        self._check_index(l, self.n_inputs, "input")
        return APSignal.superpose(self.inputs[l], self.link, self.input_noises[l])

    def output_signal(self, q: int) -> APSignal:
        self._check_index(q, self.n_outputs, "output")
        parts = [
            apply_channel(APSignal.superpose(x, self.link), row[q])
            for x, row in zip(self.inputs, self.channels)
        ]
        return APSignal.superpose(*parts, self.output_noises[q])

    @staticmethod
    def _check_index(i, n, what):
        if not 0 <= i < n:
            raise InvalidArgument(f"{what} index {i} out of range 0..{n - 1}")

    def to_dict(self) -> dict:
        return {
            "resolution": self.resolution,
            "min_gap_factor": self.min_gap_factor,
            "inputs": [s.to_dict() for s in self.inputs],
            "link": self.link.to_dict(),
            "input_noises": [s.to_dict() for s in self.input_noises],
            "output_noises": [s.to_dict() for s in self.output_noises],
            "channels": [[ch.to_dict() for ch in row] for row in self.channels],
            "truth": {k: v.to_dict() for k, v in self.truth().items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "MimoScenario":
        return cls(
            inputs=tuple(APSignal.from_dict(s) for s in d["inputs"]),
            link=APSignal.from_dict(d["link"]),
            input_noises=tuple(APSignal.from_dict(s) for s in d["input_noises"]),
            channels=tuple(
                tuple(ChannelResponse.from_dict(c) for c in row) for row in d["channels"]
            ),
            output_noises=tuple(APSignal.from_dict(s) for s in d["output_noises"]),
            resolution=d["resolution"],
            min_gap_factor=d.get("min_gap_factor", 4.0),
        )


def min_pairwise_gap(sets: Sequence[Sequence[float]]) -> float:
    """Smallest distance between any two frequencies drawn from all sets."""
    allf = np.sort(np.concatenate([np.asarray(s, dtype=float) for s in sets] or [np.zeros(0)]))
    if allf.size < 2:
        return math.inf
    return float(np.min(np.diff(allf)))


def _check_sampling(signal: APSignal, dt: float) -> None:
    wmax = signal.max_frequency()
    if wmax > 0 and not dt < math.pi / wmax:
        raise InvalidArgument(
            f"dt={dt:g} violates Nyquist for w_max={wmax:g} (needs dt < {math.pi / wmax:g})"
        )


def realize_input(scenario: MimoScenario, l: int, duration: float, dt: float) -> SampledRecord:
    sig = scenario.input_signal(l)
    _check_sampling(sig, dt)
    return synthesize(sig, duration, dt)


def realize_output(scenario: MimoScenario, q: int, duration: float, dt: float) -> SampledRecord:
    sig = scenario.output_signal(q)
    _check_sampling(sig, dt)
    return synthesize(sig, duration, dt)


@dataclass(frozen=True)
class ScenarioSpec:
    """Line counts, bands and channels for `random_scenario`.

    ``channels`` is an n_inputs x n_outputs matrix of channel descriptors
    (see ``ChannelResponse.from_dict``); by default every channel is the
    identity.
    """

    n_inputs: int = 2
    n_outputs: int = 2
    input_lines: int = 2
    link_lines: int = 1
    input_noise_lines: int = 2
    output_noise_lines: int = 2
    band: tuple[float, float] = (1.0, 50.0)
    planned_duration: float = 100.0
    amplitude_range: tuple[float, float] = (0.5, 2.0)
    noise_amplitude_range: tuple[float, float] = (0.2, 1.0)
    min_gap_factor: float = 4.0
    channels: tuple | None = None
    max_attempts: int = 1000

    @property
    def resolution(self) -> float:
        return TWO_PI / self.planned_duration

    def channel_matrix(self) -> tuple[tuple[ChannelResponse, ...], ...]:
        if self.channels is None:
            return tuple(
                tuple(ChannelResponse.identity() for _ in range(self.n_outputs))
                for _ in range(self.n_inputs)
            )
        rows = tuple(
            tuple(c if isinstance(c, ChannelResponse) else ChannelResponse.from_dict(c) for c in row)
            for row in self.channels
        )
        if len(rows) != self.n_inputs or any(len(r) != self.n_outputs for r in rows):
            raise InvalidArgument("channels must be an n_inputs x n_outputs matrix")
        return rows

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioSpec":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise InvalidArgument(f"unknown scenario fields: {sorted(unknown)}")
        kw = dict(d)
        for key in ("band", "amplitude_range", "noise_amplitude_range"):
            if key in kw:
                kw[key] = tuple(kw[key])
        if kw.get("channels") is not None:
            kw["channels"] = tuple(tuple(row) for row in kw["channels"])
        return cls(**kw)


def _draw_frequencies(rng, count, band, taken, min_gap, attempts):
    lo, hi = band
    out = []
    for _ in range(count):
        for _ in range(attempts):
            w = float(rng.uniform(lo, hi))
            if all(abs(w - v) >= min_gap for v in taken) and all(
                abs(w - v) >= min_gap for v in out
            ):
                out.append(w)
                break
        else:
            raise GenerationFailed(
                f"band ({lo:g}, {hi:g}) too crowded for lines {min_gap:g} rad/s apart"
            )
    return sorted(out)


def _draw_signal(rng, freqs, amp_range) -> APSignal:
    lo, hi = amp_range
    comps = []
    for w in freqs:
        a = float(math.exp(rng.uniform(math.log(lo), math.log(hi))))
        p = float(rng.uniform(-math.pi, math.pi))
        comps.append(HarmonicComponent(w, a, p))
    return APSignal(tuple(comps))


def random_scenario(spec: ScenarioSpec, seed: int) -> MimoScenario:
    """
    Draw a scenario whose constituent frequency sets are mutually separated
    by at least ``min_gap_factor`` resolutions.  Deterministic in `seed`.
    """
    lo, hi = spec.band
    if not 0 < lo < hi:
        raise InvalidArgument(f"invalid band {spec.band}")
    for r in (spec.amplitude_range, spec.noise_amplitude_range):
        if not 0 < r[0] <= r[1]:
            raise InvalidArgument(f"invalid amplitude range {r}")
    gap = spec.min_gap_factor * spec.resolution
    total = (
        spec.n_inputs * (spec.input_lines + spec.input_noise_lines)
        + spec.link_lines
        + spec.n_outputs * spec.output_noise_lines
    )
    if total * gap > hi - lo:
        raise GenerationFailed(
            f"band ({lo:g}, {hi:g}) cannot hold {total} lines {gap:g} rad/s apart"
        )
    channels = spec.channel_matrix()
    rng = np.random.default_rng(seed)
    for _ in range(spec.max_attempts):
        taken: list[float] = []
        try:
            def draw(count, amps):
                f = _draw_frequencies(rng, count, spec.band, taken, gap, 200)
                taken.extend(f)
                return _draw_signal(rng, f, amps)

            link = draw(spec.link_lines, spec.amplitude_range)
            inputs, in_noise = [], []
            for _l in range(spec.n_inputs):
                inputs.append(draw(spec.input_lines, spec.amplitude_range))
                in_noise.append(draw(spec.input_noise_lines, spec.noise_amplitude_range))
            out_noise = [
                draw(spec.output_noise_lines, spec.noise_amplitude_range)
                for _q in range(spec.n_outputs)
            ]
        except GenerationFailed:
            continue
        return MimoScenario(
            tuple(inputs), link, tuple(in_noise), channels, tuple(out_noise),
            spec.resolution, spec.min_gap_factor,
        )
    raise GenerationFailed(
        f"band ({lo:g}, {hi:g}) too crowded: no feasible draw in {spec.max_attempts} attempts"
    )
