"""
Signal data model for almost-periodic signals and time-average functionals.

A signal is a finite sum of real harmonics

    x(t) = sum_k A_k cos(w_k t + phi_k)

stored one-sided: each component carries (w >= 0, A, phi) and its Fourier
exponent is C(w) = (A/2) exp(j phi) for w > 0 and C(0) = A for the DC term.

All time averages are taken over [t0, t0 + T] of a finite record and use the
trapezoidal rule, normalised by the span T.
"""
from __future__ import annotations

import csv
import enum
import io
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidArgument

TWO_PI = 2.0 * math.pi


def normalize_phase(phase: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    p = math.remainder(phase, TWO_PI)
    if p <= -math.pi:
        p += TWO_PI
    return p


@dataclass(frozen=True)
class HarmonicComponent:
    frequency: float
    amplitude: float
    phase: float = 0.0

    def __post_init__(self):
        w, a, p = float(self.frequency), float(self.amplitude), float(self.phase)
        if not (math.isfinite(w) and math.isfinite(a) and math.isfinite(p)):
            raise InvalidArgument("harmonic component fields must be finite")
        if w < 0:
            raise InvalidArgument(f"frequency must be >= 0, got {w}")
        if w == 0.0:
            # DC: fold the phase into a signed amplitude
            a, p = a * math.cos(p), 0.0
        elif a < 0:
            raise InvalidArgument(f"amplitude must be >= 0 for w > 0, got {a}")
        else:
            p = normalize_phase(p)
        object.__setattr__(self, "frequency", w)
        object.__setattr__(self, "amplitude", a)
        object.__setattr__(self, "phase", p)

    @property
    def exponent(self) -> complex:
        """One-sided Fourier exponent C(w)."""
        if self.frequency == 0.0:
            return complex(self.amplitude, 0.0)
        return 0.5 * self.amplitude * complex(math.cos(self.phase), math.sin(self.phase))

    @classmethod
    def from_exponent(cls, frequency: float, exponent: complex) -> "HarmonicComponent":
        if frequency == 0.0:
            return cls(0.0, exponent.real, 0.0)
        return cls(frequency, 2.0 * abs(exponent), math.atan2(exponent.imag, exponent.real))

    def to_dict(self) -> dict:
        return {"omega": self.frequency, "amplitude": self.amplitude, "phase": self.phase}


@dataclass(frozen=True)
class APSignal:
    """Almost-periodic signal: a finite set of harmonics with distinct frequencies."""

    components: tuple[HarmonicComponent, ...] = ()

    def __post_init__(self):
        comps = tuple(sorted(self.components, key=lambda c: c.frequency))
        for a, b in zip(comps, comps[1:]):
            if not b.frequency > a.frequency:
                raise InvalidArgument(f"duplicate frequency {a.frequency} in APSignal")
        object.__setattr__(self, "components", comps)

    @classmethod
    def from_triples(cls, triples: Iterable[Sequence[float]]) -> "APSignal":
        return cls(tuple(HarmonicComponent(*t) for t in triples))

    @classmethod
    def superpose(cls, *signals: "APSignal") -> "APSignal":
        """Sum of signals; components sharing a frequency are added as phasors."""
        acc: dict[float, complex] = {}
        for s in signals:
            for c in s.components:
                acc[c.frequency] = acc.get(c.frequency, 0j) + c.exponent
        return cls(tuple(HarmonicComponent.from_exponent(w, z) for w, z in acc.items()))

    def __len__(self):
        return len(self.components)

    def __bool__(self):
        return bool(self.components)

    @property
    def frequencies(self) -> tuple[float, ...]:
        return tuple(c.frequency for c in self.components)

    def max_frequency(self) -> float:
        return max(self.frequencies, default=0.0)

    def min_frequency(self) -> float:
        """Smallest nonzero frequency, or 0 for a DC-only/empty signal."""
        return min((w for w in self.frequencies if w > 0), default=0.0)

    def min_spacing(self) -> float:
        f = self.frequencies
        return min((b - a for a, b in zip(f, f[1:])), default=math.inf)

    def check_spacing(self, min_gap: float) -> None:
        if self.min_spacing() < min_gap:
            raise InvalidArgument(
                f"components closer than the minimum spacing {min_gap:g} rad/s"
            )

    def power(self) -> float:
        """Average power: sum of A^2/2 over harmonics plus A_dc^2."""
        return sum(
            c.amplitude ** 2 if c.frequency == 0.0 else 0.5 * c.amplitude ** 2
            for c in self.components
        )

    def scaled(self, gain: float) -> "APSignal":
        if gain < 0:
            raise InvalidArgument("gain must be >= 0")
        return APSignal(
            tuple(HarmonicComponent(c.frequency, c.amplitude * gain, c.phase) for c in self.components)
        )

    def evaluate(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for c in self.components:
            out += c.amplitude * np.cos(c.frequency * t + c.phase)
        return out

    def autocorrelation(self, tau) -> np.ndarray:
        """Infinite-time autocorrelation sum_k (A_k^2/2) cos(w_k tau) (+ A_dc^2)."""
        tau = np.asarray(tau, dtype=float)
        out = np.zeros_like(tau)
        for c in self.components:
            if c.frequency == 0.0:
                out += c.amplitude ** 2
            else:
                out += 0.5 * c.amplitude ** 2 * np.cos(c.frequency * tau)
        return out

    def to_dict(self) -> dict:
        return {"components": [c.to_dict() for c in self.components]}

    @classmethod
    def from_dict(cls, d: dict) -> "APSignal":
        return cls(
            tuple(
                HarmonicComponent(c["omega"], c["amplitude"], c.get("phase", 0.0))
                for c in d.get("components", [])
            )
        )


@dataclass(frozen=True)
class SampledRecord:
    """Uniformly sampled finite realization on t0 + i*dt, i = 0..n-1."""

    samples: np.ndarray
    dt: float
    t0: float = 0.0
    _weights: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        x = np.array(self.samples, dtype=float).ravel()
        if not self.dt > 0 or not math.isfinite(self.dt):
            raise InvalidArgument(f"dt must be > 0, got {self.dt}")
        if x.size < 2:
            raise InvalidArgument("a record needs at least 2 samples")
        if not np.all(np.isfinite(x)):
            raise InvalidArgument("record contains non-finite samples")
        x.setflags(write=False)
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "dt", float(self.dt))
        object.__setattr__(self, "t0", float(self.t0))
        object.__setattr__(self, "_weights", _trapezoid_weights(x.size, self.dt))

    def __len__(self):
        return self.samples.size

    def __eq__(self, other):
        if not isinstance(other, SampledRecord):
            return NotImplemented
        return (
            self.dt == other.dt
            and self.t0 == other.t0
            and np.array_equal(self.samples, other.samples)
        )

    __hash__ = None

    @property
    def duration(self) -> float:
        return self.dt * (self.samples.size - 1)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.samples.size)

    @property
    def nyquist(self) -> float:
        return math.pi / self.dt

    @property
    def weights(self) -> np.ndarray:
        """Trapezoidal quadrature weights normalised so that they sum to 1."""
        return self._weights

    def same_grid(self, other: "SampledRecord") -> bool:
        return (
            len(self) == len(other)
            and math.isclose(self.dt, other.dt, rel_tol=1e-12)
            and math.isclose(self.t0, other.t0, rel_tol=1e-12, abs_tol=1e-12 * self.dt)
        )

    def scaled(self, gain: float) -> "SampledRecord":
        return SampledRecord(self.samples * gain, self.dt, self.t0)

    def head(self, n: int) -> "SampledRecord":
        return SampledRecord(self.samples[:n], self.dt, self.t0)

    # serialisation

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "value"])
        for t, v in zip(self.times, self.samples):
            w.writerow([repr(float(t)), repr(float(v))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "SampledRecord":
        """Parse `t,value` CSV; errors name the offending line number."""
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or [h.strip() for h in rows[0]] != ["t", "value"]:
            raise InvalidArgument("line 1: expected header 't,value'")
        ts, xs, lines = [], [], []
        for lineno, row in enumerate(rows[1:], start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise InvalidArgument(f"line {lineno}: expected 2 columns, got {len(row)}")
            try:
                ts.append(float(row[0]))
                xs.append(float(row[1]))
            except ValueError:
                raise InvalidArgument(f"line {lineno}: non-numeric value {row!r}") from None
            lines.append(lineno)
        if len(ts) < 2:
            raise InvalidArgument("record needs at least 2 samples")
        t = np.asarray(ts)
        steps = np.diff(t)
        dt = steps[0]
        if not dt > 0:
            raise InvalidArgument(f"line {lines[1]}: time column is not increasing")
        bad = np.flatnonzero(np.abs(steps - dt) > 1e-6 * dt)
        if bad.size:
            raise InvalidArgument(f"line {lines[bad[0] + 1]}: time column is not uniform")
        dt = (t[-1] - t[0]) / (t.size - 1)
        return cls(np.asarray(xs), dt, t[0])

    def to_dict(self) -> dict:
        return {"dt": self.dt, "t0": self.t0, "samples": self.samples.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "SampledRecord":
        return cls(np.asarray(d["samples"], dtype=float), d["dt"], d.get("t0", 0.0))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _trapezoid_weights(n: int, dt: float) -> np.ndarray:
    w = np.full(n, 1.0 / (n - 1))
    w[0] *= 0.5
    w[-1] *= 0.5
    w.setflags(write=False)
    return w


def _sample_count(duration: float, dt: float) -> int:
    # tolerate duration/dt landing a hair below an integer
    return int(math.floor(duration / dt + 1e-9)) + 1


def synthesize(signal: APSignal, duration: float, dt: float, t0: float = 0.0) -> SampledRecord:
    """Evaluate `signal` exactly at t0 + i*dt for i*dt <= duration."""
    if not dt > 0:
        raise InvalidArgument(f"dt must be > 0, got {dt}")
    if not duration > 0:
        raise InvalidArgument(f"duration must be > 0, got {duration}")
    wmax = signal.max_frequency()
    if wmax > 0 and not dt < math.pi / wmax:
        raise InvalidArgument(
            f"dt={dt:g} violates Nyquist for w_max={wmax:g} (needs dt < {math.pi / wmax:g})"
        )
    wmin = signal.min_frequency()
    if wmin > 0 and duration < 10 * TWO_PI / wmin:
        warnings.warn(
            f"duration {duration:g} s is shorter than 10 periods of the lowest line",
            stacklevel=2,
        )
    n = _sample_count(duration, dt)
    t = t0 + dt * np.arange(n)
    return SampledRecord(signal.evaluate(t), dt, t0)


def bohr_mean(record: SampledRecord) -> float:
    """Finite-span mean (1/T) * integral of x over the record (trapezoidal)."""
    if len(record) < 2:
        raise InvalidArgument("bohr_mean needs at least 2 samples")
    return float(record.weights @ record.samples)


def inner_product(a: SampledRecord, b: SampledRecord) -> float:
    if not a.same_grid(b):
        raise InvalidArgument("records are not on the same sampling grid")
    return float(a.weights @ (a.samples * b.samples))


def running_mean(record: SampledRecord) -> np.ndarray:
    """
    Bohr means over every leading span [t0, t0 + k*dt], k = 1..n-1.

    Element k-1 equals ``bohr_mean(record.head(k + 1))``.
    """
    x = record.samples
    area = np.cumsum(0.5 * record.dt * (x[1:] + x[:-1]))
    return area / (record.dt * np.arange(1, x.size))


def running_inner_product(a: SampledRecord, b: SampledRecord) -> np.ndarray:
    """`inner_product` over every leading span, as in `running_mean`."""
    if not a.same_grid(b):
        raise InvalidArgument("records are not on the same sampling grid")
    return running_mean(SampledRecord(a.samples * b.samples, a.dt, a.t0))


def autocorrelation(record: SampledRecord, lags: Iterable[float]) -> list[float]:
    """
    Single-realization autocorrelation estimate.

    R(tau) = 1/(T - |tau|) * integral over the overlap of x(t - tau) x(t),
    with lags restricted to whole multiples of dt and |tau| < T/2.
    """
    x = record.samples
    n = x.size
    T = record.duration
    out = []
    for tau in lags:
        k_float = abs(tau) / record.dt
        k = int(round(k_float))
        if abs(k_float - k) > 1e-6:
            raise InvalidArgument(f"lag {tau} is not a multiple of dt={record.dt}")
        if not abs(tau) < T / 2:
            raise InvalidArgument(f"|lag| {abs(tau)} must be < T/2 = {T / 2}")
        prod = x[: n - k] * x[k:]
        w = _trapezoid_weights(n - k, record.dt)
        out.append(float(w @ prod))
    return out


class EnergyClass(str, enum.Enum):
    DECAYING = "decays-as-1/T"
    PERSISTENT = "persistent"
    INDETERMINATE = "indeterminate"


def average_power(record: SampledRecord, span: float | None = None) -> float:
    """Mean of x^2 over [t0, t0 + span] (whole record by default)."""
    if span is None:
        return inner_product(record, record)
    n = _sample_count(span, record.dt)
    if n < 2 or n > len(record):
        raise InvalidArgument(f"span {span} not inside the record")
    return inner_product(record.head(n), record.head(n))


def is_finite_energy(record: SampledRecord) -> EnergyClass:
    """
    Classify a record by how its average power scales with the averaging span.

    Power over the whole record is compared with power over its leading
    half.  A finite-energy (L2) signal loses power as 1/T (ratio ~0.5 per
    doubling); an almost-periodic one keeps it (ratio ~1).  At least 9
    samples are required so that the half span holds a few samples.
    """
    n = len(record)
    if n < 9:
        raise InvalidArgument("record too short to nest a half span (need >= 9 samples)")
    half = record.head((n - 1) // 2 + 1)
    p_half = inner_product(half, half)
    if p_half <= 0.0:
        return EnergyClass.INDETERMINATE
    ratio = inner_product(record, record) / p_half
    if ratio < 0.6:
        return EnergyClass.DECAYING
    if ratio > 0.8:
        return EnergyClass.PERSISTENT
    return EnergyClass.INDETERMINATE
