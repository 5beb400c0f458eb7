"""
Command-line entry point.

    apsi synth     --config demo.json --out runs/demo
    apsi spectrum  runs/demo/input_1.csv --band 0.5 12 --out runs/spec
    apsi setop     intersect a.json b.json --out c.json
    apsi identify  runs/demo --input 1 --output 1 --out runs/id
    apsi paradox

Input/output indices on the command line and in file names are 1-based.
Exit status: 0 success, 2 input or configuration error, 3 algorithmic failure.
"""
from __future__ import annotations

import argparse
import json
import re
import sys
import warnings
from pathlib import Path

from .channel import MimoScenario
from .errors import ApsiError, GenerationFailed, InvalidArgument
from .freqset import FrequencySet, difference, intersect, union
from .pipeline import (
    PipelineConfig,
    StageFailed,
    identification_report,
    identify_channel,
    paradox_table,
    synthesize_scenario,
)
from .signal import SampledRecord
from .spectral import extract_frequency_set, grid_spectrum, spectrum_csv

EXIT_OK, EXIT_INPUT, EXIT_ALGO = 0, 2, 3


class UsageError(Exception):
    pass


def _load_config(path) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path}: invalid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise UsageError(f"config {path}: expected a JSON object")
    return PipelineConfig.from_dict(data)


def _config(args) -> PipelineConfig:
    cfg = _load_config(getattr(args, "config", None))
    return cfg.override(
        seed=getattr(args, "seed", None),
        duration=getattr(args, "duration", None),
        dt=getattr(args, "dt", None),
        band=tuple(args.band) if getattr(args, "band", None) else None,
        energy_threshold=getattr(args, "threshold", None),
        refine_tolerance=getattr(args, "refine_tol", None),
        max_order=getattr(args, "max_order", None),
        residual_tol=getattr(args, "residual_tol", None),
    )


def _read_record(path) -> SampledRecord:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise UsageError(f"cannot read record {p}: {exc.strerror}") from None
    try:
        return SampledRecord.from_csv(text)
    except InvalidArgument as exc:
        raise UsageError(f"{p}: {exc}") from None


def _read_set(path) -> FrequencySet:
    try:
        return FrequencySet.from_dict(json.loads(Path(path).read_text()))
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    except (json.JSONDecodeError, InvalidArgument) as exc:
        raise UsageError(f"{path}: not a frequency set ({exc})") from None


def _out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_synth(args) -> int:
    cfg = _config(args)
    out = _out_dir(args.out)
    scenario, ins, outs = synthesize_scenario(cfg)
    for l, rec in enumerate(ins, start=1):
        (out / f"input_{l}.csv").write_text(rec.to_csv())
    for q, rec in enumerate(outs, start=1):
        (out / f"output_{q}.csv").write_text(rec.to_csv())
    (out / "scenario.json").write_text(scenario.to_json())
    print(f"wrote {len(ins)} inputs, {len(outs)} outputs to {out}")
    return EXIT_OK


def cmd_spectrum(args) -> int:
    cfg = _config(args)
    rec = _read_record(args.record)
    analysis = cfg.analysis(rec)
    fs, est = extract_frequency_set(rec, analysis)
    grid, exps = grid_spectrum(rec, analysis)
    out = _out_dir(args.out)
    (out / "spectrum.csv").write_text(spectrum_csv(grid, exps))
    (out / "lines.json").write_text(est.to_json())
    (out / "freqset.json").write_text(fs.to_json())
    print(fs.to_text())
    return EXIT_OK


_SETOPS = {"union": union, "intersect": intersect, "diff": difference}


def cmd_setop(args) -> int:
    a, b = _read_set(args.a), _read_set(args.b)
    result = _SETOPS[args.op](a, b)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(result.to_json())
    print(result.to_text())
    return EXIT_OK


def _indexed(directory: Path, prefix: str) -> dict[int, Path]:
    found = {}
    for p in directory.glob(f"{prefix}_*.csv"):
        m = re.fullmatch(rf"{prefix}_(\d+)\.csv", p.name)
        if m:
            found[int(m.group(1))] = p
    return found


def cmd_identify(args) -> int:
    cfg = _config(args)
    src = Path(args.scenario_dir)
    if not src.is_dir():
        raise UsageError(f"{src} is not a directory")
    in_paths = _indexed(src, "input")
    if not in_paths:
        raise UsageError(f"no input_<l>.csv records in {src}")
    if args.input not in in_paths:
        raise UsageError(f"missing input_{args.input}.csv in {src}")
    out_path = src / f"output_{args.output}.csv"
    if not out_path.exists():
        raise UsageError(f"missing {out_path.name} in {src}")
    inputs = [_read_record(in_paths[k]) for k in sorted(in_paths)]
    output = _read_record(out_path)
    p = sorted(in_paths).index(args.input)

    out = _out_dir(args.out)
    result = identify_channel(inputs, output, p, cfg)
    (out / "exact_set.json").write_text(result.exact_set.to_json())
    (out / "frf.csv").write_text(result.frf.to_csv())
    (out / "model.json").write_text(result.model.to_json())
    scen_file = src / "scenario.json"
    if scen_file.exists():
        scenario = MimoScenario.from_dict(json.loads(scen_file.read_text()))
        report = identification_report(result, scenario, args.input - 1, args.output - 1)
        (out / "report.json").write_text(json.dumps(report, indent=2))
    print(f"exact set  {result.exact_set.to_text()}")
    print(f"model      order {result.model.order}, a = {list(result.model.coefficients)}, "
          f"residual {result.model.residual:.3g}, converged {result.model.converged}")
    return EXIT_OK


def cmd_paradox(args) -> int:
    rows = paradox_table()
    print(f"{'T':>6}  {'P_pulse(T)':>12}  {'closed form':>12}  {'P_cos(T)':>10}")
    for r in rows:
        print(f"{r['T']:6.0f}  {r['pulse_power']:12.6f}  {r['pulse_closed_form']:12.6f}  "
              f"{r['cos_power']:10.6f}")
    print("ratios P(2T)/P(T):")
    for a, b in zip(rows, rows[1:]):
        print(f"  T={a['T']:g}->{b['T']:g}: pulse {b['pulse_power'] / a['pulse_power']:.4f}, "
              f"cos {b['cos_power'] / a['cos_power']:.4f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="apsi",
        description="Identify LTI channels from signals with discrete spectra.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def analysis_flags(p):
        p.add_argument("--config", help="pipeline config JSON")
        p.add_argument("--band", nargs=2, type=float, metavar=("LO", "HI"),
                       help="analysis band, rad/s")
        p.add_argument("--threshold", type=float, help="relative energy threshold")
        p.add_argument("--refine-tol", type=float, help="peak refinement tolerance, rad/s")

    p = sub.add_parser("synth", help="generate a random scenario and its records")
    p.add_argument("--config", help="pipeline config JSON")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--duration", type=float)
    p.add_argument("--dt", type=float)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("spectrum", help="extract the frequency set of one record")
    p.add_argument("record")
    analysis_flags(p)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("setop", help="union / intersect / diff of two frequency sets")
    p.add_argument("op", choices=sorted(_SETOPS))
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--out")
    p.set_defaults(func=cmd_setop)

    p = sub.add_parser("identify", help="identify one input -> output channel")
    p.add_argument("scenario_dir")
    p.add_argument("--input", type=int, required=True, help="1-based input index")
    p.add_argument("--output", type=int, required=True, help="1-based output index")
    analysis_flags(p)
    p.add_argument("--max-order", type=int)
    p.add_argument("--residual-tol", type=float)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser("paradox", help="average power of L2 vs almost-periodic signals")
    p.set_defaults(func=cmd_paradox)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings():
            # diagnostics belong in the output files, not on the console
            warnings.simplefilter("ignore")
            return args.func(args)
    except StageFailed as exc:
        print(f"apsi: {exc.stage} stage failed: {exc.cause}", file=sys.stderr)
        return EXIT_ALGO
    except (UsageError, InvalidArgument, GenerationFailed) as exc:
        print(f"apsi: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ApsiError as exc:
        print(f"apsi: {exc}", file=sys.stderr)
        return EXIT_ALGO


if __name__ == "__main__":
    sys.exit(main())
