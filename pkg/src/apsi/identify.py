"""
Channel identification: exact-signal frequencies, frequency response, and
ODE coefficients of the model sum_k a_k y^(k) = x.
"""
from __future__ import annotations

import cmath
import csv
import io
import json
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import (
    AnalysisWarning,
    EstimationFailed,
    FitFailed,
    InvalidArgument,
    NoCommonSupportWarning,
)
from .freqset import FrequencySet, difference, intersect
from .signal import SampledRecord
from .spectral import fit_exponents, fourier_exponents

MAX_CONDITION = 1e12


@dataclass(frozen=True)
class FrequencyResponse:
    points: tuple[tuple[float, complex], ...]
    warnings: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        pts = tuple((float(w), complex(v)) for w, v in self.points)
        for (a, _), (b, _) in zip(pts, pts[1:]):
            if not b > a:
                raise InvalidArgument("frequency response points must be strictly increasing")
        for _, v in pts:
            if not (math.isfinite(v.real) and math.isfinite(v.imag)):
                raise InvalidArgument("frequency response values must be finite")
        object.__setattr__(self, "points", pts)

    @classmethod
    def from_function(cls, omegas, fn) -> "FrequencyResponse":
        return cls(tuple((w, fn(w)) for w in sorted(omegas)))

    def __len__(self):
        return len(self.points)

    @property
    def omegas(self) -> np.ndarray:
        return np.array([w for w, _ in self.points])

    @property
    def values(self) -> np.ndarray:
        return np.array([v for _, v in self.points], dtype=complex)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["omega", "re", "im", "magnitude", "phase"])
        for om, v in self.points:
            w.writerow([repr(om), repr(v.real), repr(v.imag), repr(abs(v)), repr(cmath.phase(v))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "FrequencyResponse":
        rows = list(csv.DictReader(io.StringIO(text)))
        return cls(tuple((float(r["omega"]), complex(float(r["re"]), float(r["im"]))) for r in rows))


@dataclass(frozen=True)
class OdeModel:
    """sum_{k=0..order} coefficients[k] * y^(k)(t) = x(t)."""

    order: int
    coefficients: tuple[float, ...]
    residual: float = 0.0
    converged: bool = True

    def __post_init__(self):
        a = tuple(float(c) for c in self.coefficients)
        if self.order < 1 or len(a) != self.order + 1:
            raise InvalidArgument("need order >= 1 and order + 1 coefficients")
        if not all(math.isfinite(c) for c in a):
            raise InvalidArgument("coefficients must be finite")
        if a[-1] == 0.0:
            raise InvalidArgument("leading coefficient must be nonzero")
        object.__setattr__(self, "coefficients", a)

    def response(self, omega: float) -> complex:
        s = 1j * omega
        return 1.0 / sum(c * s ** k for k, c in enumerate(self.coefficients))

    def to_dict(self) -> dict:
        return {
            "order": self.order,
            "coefficients": list(self.coefficients),
            "residual": self.residual,
            "converged": self.converged,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def filter_exact_frequencies(
    input_set: FrequencySet, output_set: FrequencySet, link_set: FrequencySet
) -> FrequencySet:
    """
    Frequencies of the exact input that actually drive the output.

    The link set is removed from the input set first; what survives and
    also appears in the output set cannot be input noise (absent from the
    output) nor output noise (absent from the input).
    """
    result = intersect(difference(input_set, link_set), output_set)
    if not result:
        warnings.warn("input and output sets share no frequency", NoCommonSupportWarning, stacklevel=2)
    return result


def _exponents_at(record, omegas, context):
    if context is None:
        return fourier_exponents(record, omegas)
    # joint fit over the record's own lines, with the requested frequencies
    # standing in for the context lines they match
    tol = 2 * context.delta
    extra = [w for w in context.frequencies if np.min(np.abs(omegas - w)) >= tol]
    freqs = np.concatenate([omegas, np.asarray(extra, dtype=float)])
    return fit_exponents(record, freqs)[: omegas.size]


def estimate_frf(
    input_record: SampledRecord,
    output_record: SampledRecord,
    exact_set: FrequencySet,
    floor: float = 1e-6,
    input_context: FrequencySet | None = None,
    output_context: FrequencySet | None = None,
) -> FrequencyResponse:
    """
    W(jw) = C_y(w) / C_x(w) at each exact-input frequency.

    Without context sets the exponents are plain finite-time averages and
    carry leakage from every other line of order A/(gap*T).  Passing the
    full extracted frequency sets of the two records as contexts fits all
    lines jointly instead, which removes that leakage.

    Points whose input exponent is below `floor` times the strongest are
    skipped with a warning.
    """
    if not input_record.same_grid(output_record):
        raise InvalidArgument("input and output records must share dt and span")
    omegas = np.asarray(exact_set.frequencies, dtype=float)
    if omegas.size == 0:
        raise EstimationFailed("exact frequency set is empty")
    cx = _exponents_at(input_record, omegas, input_context)
    cy = _exponents_at(output_record, omegas, output_context)
    mags = np.abs(cx)
    notes = []
    points = []
    for w, x, y, m in zip(omegas, cx, cy, mags):
        if m < floor * mags.max() or m == 0.0:
            notes.append(f"skipped omega={w:.6g}: input exponent below floor")
            continue
        points.append((float(w), complex(y / x)))
    for n in notes:
        warnings.warn(n, AnalysisWarning, stacklevel=2)
    if not points:
        raise EstimationFailed("every frequency was below the input floor")
    return FrequencyResponse(tuple(points), tuple(notes))


def _design(omegas: np.ndarray, order: int) -> np.ndarray:
    """Real rows [Re; Im] of sum_k b_k (j w)^k for unit-scaled w."""
    s = 1j * omegas
    V = np.column_stack([s ** k for k in range(order + 1)])
    return np.vstack([V.real, V.imag])


def fit_ode(frf: FrequencyResponse, order: int) -> OdeModel:
    """
    Least-squares ODE coefficients from sum_k a_k (jw)^k = 1/W(jw).

    Frequencies are scaled to unit geometric mean before solving; the
    returned coefficients are in the original units.
    """
    if order < 1:
        raise InvalidArgument("order must be >= 1")
    omegas = frf.omegas
    values = frf.values
    if omegas.size < math.ceil((order + 1) / 2):
        raise InvalidArgument(f"order {order} needs at least {math.ceil((order + 1) / 2)} points")
    if np.any(values == 0):
        raise InvalidArgument("frequency response vanishes at some point")
    if np.any(omegas <= 0):
        raise InvalidArgument("fit frequencies must be > 0")
    scale = float(np.exp(np.mean(np.log(omegas))))
    A = _design(omegas / scale, order)
    rhs_c = 1.0 / values
    rhs = np.concatenate([rhs_c.real, rhs_c.imag])
    # unit-norm columns keep the condition estimate meaningful
    norms = np.linalg.norm(A, axis=0)
    if np.any(norms == 0):
        raise FitFailed("design matrix has an empty column", math.inf)
    An = A / norms
    cond = float(np.linalg.cond(An))
    if not cond < MAX_CONDITION:
        raise FitFailed(f"ill-conditioned fit (condition {cond:.3g})", cond)
    b, *_ = np.linalg.lstsq(An, rhs, rcond=None)
    b = b / norms
    misfit = np.linalg.norm(A @ b - rhs) / np.linalg.norm(rhs)
    a = b / scale ** np.arange(order + 1)
    if a[-1] == 0.0:
        raise FitFailed("leading coefficient vanished", cond)
    return OdeModel(order, tuple(a.tolist()), float(misfit))


def select_order(frf: FrequencyResponse, max_order: int, residual_tol: float = 1e-3) -> OdeModel:
    """
    Smallest order in 1..max_order whose relative misfit is below
    `residual_tol`; otherwise the best-fitting model, marked unconverged.
    """
    if max_order < 1:
        raise InvalidArgument("max_order must be >= 1")
    best = None
    failures = []
    for n in range(1, max_order + 1):
        try:
            model = fit_ode(frf, n)
        except (FitFailed, InvalidArgument) as exc:
            failures.append(exc)
            continue
        if model.residual < residual_tol:
            return model
        if best is None or model.residual < best.residual:
            best = model
    if best is None:
        last = failures[-1]
        raise FitFailed(f"no order in 1..{max_order} could be fitted: {last}",
                        getattr(last, "condition", None))
    return replace(best, converged=False)
