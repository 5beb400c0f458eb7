"""
End-to-end stages composed from the library operations.  The command-line
interface is a thin I/O layer over these functions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Sequence

import numpy as np

from .channel import MimoScenario, ScenarioSpec, random_scenario, realize_input, realize_output
from .errors import ApsiError, InvalidArgument
from .freqset import FrequencySet, decorrelate, set_equal
from .identify import FrequencyResponse, OdeModel, estimate_frf, filter_exact_frequencies, select_order
from .signal import APSignal, HarmonicComponent, SampledRecord, average_power, synthesize
from .spectral import AnalysisConfig, SpectrumEstimate, extract_frequency_set


@dataclass(frozen=True)
class PipelineConfig:
    scenario: ScenarioSpec = field(default_factory=ScenarioSpec)
    duration: float = 100.0
    dt: float = 0.05
    seed: int = 0
    band: tuple[float, float] | None = None
    energy_threshold: float = 1e-4
    refine_tolerance: float = 1e-7
    max_order: int = 5
    residual_tol: float = 1e-3

    def __post_init__(self):
        for name in ("duration", "dt", "energy_threshold", "refine_tolerance", "residual_tol"):
            if not getattr(self, name) > 0:
                raise InvalidArgument(f"{name} must be positive")
        if self.max_order < 1:
            raise InvalidArgument("max_order must be >= 1")
        if self.seed < 0:
            raise InvalidArgument("seed must be >= 0")

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise InvalidArgument(f"unknown config fields: {sorted(unknown)}")
        kw = dict(d)
        if "scenario" in kw:
            kw["scenario"] = ScenarioSpec.from_dict(kw["scenario"])
        if kw.get("band") is not None:
            kw["band"] = tuple(kw["band"])
        try:
            return cls(**kw)
        except TypeError as exc:
            raise InvalidArgument(str(exc)) from None

    def override(self, **kw) -> "PipelineConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})

    def analysis(self, record: SampledRecord) -> AnalysisConfig:
        band = self.band
        if band is None:
            band = (0.0, 0.5 * record.nyquist)
        return AnalysisConfig(
            band, energy_threshold=self.energy_threshold, refine_tolerance=self.refine_tolerance
        )


def synthesize_scenario(config: PipelineConfig):
    """Scenario plus realised input and output records."""
    sc = random_scenario(config.scenario, config.seed)
    ins = [realize_input(sc, l, config.duration, config.dt) for l in range(sc.n_inputs)]
    outs = [realize_output(sc, q, config.duration, config.dt) for q in range(sc.n_outputs)]
    return sc, ins, outs


@dataclass(frozen=True)
class Identification:
    input_sets: tuple[FrequencySet, ...]
    output_set: FrequencySet
    link: FrequencySet
    exact_set: FrequencySet
    frf: FrequencyResponse | None = None
    model: OdeModel | None = None


class StageFailed(ApsiError):
    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"{stage}: {cause}")


def identify_channel(
    inputs: Sequence[SampledRecord],
    output: SampledRecord,
    p: int,
    config: PipelineConfig,
) -> Identification:
    """
    extract -> decorrelate (several inputs) -> filter -> FRF -> order selection,
    for the channel from input `p` (0-based) to `output`.

    Algorithmic failures are re-raised as StageFailed naming the stage.
    """
    if not 0 <= p < len(inputs):
        raise InvalidArgument(f"input index {p} out of range")
    try:
        in_sets = tuple(extract_frequency_set(r, config.analysis(r))[0] for r in inputs)
        out_set = extract_frequency_set(output, config.analysis(output))[0]
    except InvalidArgument:
        raise
    except ApsiError as exc:
        raise StageFailed("extract", exc) from exc
    if len(in_sets) > 1:
        try:
            link, _ = decorrelate(in_sets)
        except ApsiError as exc:
            raise StageFailed("decorrelate", exc) from exc
    else:
        link = FrequencySet.empty(in_sets[0].delta)
    exact = filter_exact_frequencies(in_sets[p], out_set, link)
    try:
        frf = estimate_frf(
            inputs[p], output, exact, input_context=in_sets[p], output_context=out_set
        )
    except InvalidArgument:
        raise
    except ApsiError as exc:
        raise StageFailed("frf", exc) from exc
    try:
        model = select_order(frf, config.max_order, config.residual_tol)
    except ApsiError as exc:
        raise StageFailed("fit", exc) from exc
    return Identification(in_sets, out_set, link, exact, frf, model)


def identification_report(result: Identification, scenario: MimoScenario, p: int, q: int) -> dict:
    """Compare an identification against the scenario's construction truth."""
    truth = scenario.truth()[f"x{p}"]
    report = {
        "input": p + 1,
        "output": q + 1,
        "exact_set_matches_truth": set_equal(result.exact_set, truth),
        "truth_exact_set": truth.to_dict(),
    }
    desc = scenario.channels[p][q].descriptor
    if result.frf is not None:
        k = scenario.channels[p][q]
        report["frf_max_relative_error"] = max(
            abs(v - k(w)) / abs(k(w)) for w, v in result.frf.points
        )
    if desc.get("kind") == "ode" and result.model is not None:
        true_a = np.asarray(desc["coefficients"], dtype=float)
        report["true_order"] = len(true_a) - 1
        report["order_matches"] = result.model.order == len(true_a) - 1
        if report["order_matches"]:
            est = np.asarray(result.model.coefficients)
            scale = np.where(true_a != 0, np.abs(true_a), 1.0)
            report["coefficient_relative_errors"] = (np.abs(est - true_a) / scale).tolist()
    return report


PARADOX_SPANS = (25.0, 50.0, 100.0, 200.0)


def paradox_table(spans=PARADOX_SPANS, dt: float = 0.01) -> list[dict]:
    """
    Average power over growing spans for a finite-energy pulse exp(-|t|)
    and for cos(t).  The pulse's power falls as 1/T; the cosine's does not.
    """
    longest = max(spans)
    n = int(round(longest / dt)) + 1
    t = dt * np.arange(n)
    pulse = SampledRecord(np.exp(-np.abs(t)), dt)
    tone = synthesize(APSignal((HarmonicComponent(1.0, 1.0, 0.0),)), longest, dt)
    rows = []
    for T in spans:
        rows.append({
            "T": T,
            "pulse_power": average_power(pulse, T),
            "pulse_closed_form": (1 - math.exp(-2 * T)) / (2 * T),
            "cos_power": average_power(tone, T),
        })
    return rows
