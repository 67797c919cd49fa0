"""Command-line surface: design -> evaluate -> sensitivity -> spectrum.

Exit codes: 0 success, 1 validation error, 2 numeric failure (design target
not reached), 3 I/O error.  Output files are written atomically; a failing
run never leaves partial artifacts.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import __version__
from .config import ConfigError, JobConfig, load_config
from .grape import EnsembleMember, GrapeError, design, member_fidelity
from .propagation import PulseError, propagate
from .pulsefile import PulseFileError, read_pulse, write_pulse
from .sensitivity import DeviationError, DeviationSpec, scan
from .spectro import (SpectrumError, default_windows, integrate_lines,
                      pulse_spectrum, simulate_readout)
from .spins import (ExpressionError, OperatorError, SpinSystemError,
                    thermal_deviation_state)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERIC = 2
EXIT_IO = 3

_VALIDATION_ERRORS = (ConfigError, PulseFileError, PulseError, GrapeError,
                      DeviationError, SpectrumError, SpinSystemError,
                      OperatorError, ExpressionError, ValueError)


def _write_text(path: str, text: str):
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _load_pulse_for(cfg: JobConfig, path: str):
    pulse = read_pulse(path)
    if tuple(pulse.channels) != cfg.problem.channels:
        raise PulseError(f"pulse channels {pulse.channels} do not match config "
                         f"channels {cfg.problem.channels}")
    return pulse


def _cmd_design(args) -> int:
    cfg = load_config(args.config)
    seeds = cfg.seeds
    if args.seeds:
        seeds = tuple(int(s) for s in args.seeds.split(","))
    if not seeds:
        raise ConfigError("no seeds given (config 'seeds' or --seeds)")
    result = design(cfg.problem, cfg.options, seeds)
    write_pulse(result.pulse, args.out)
    report = {
        "config": os.fspath(args.config),
        "seeds": list(seeds),
        "target_fidelity": cfg.options.target_fidelity,
        "best": result.report.to_dict(),
        "runs": [{"seed": r["seed"],
                  "phase1": r["phase1"].to_dict(),
                  "phase2": r["phase2"].to_dict()} for r in result.reports],
    }
    if args.report:
        _write_text(args.report, json.dumps(report, indent=2) + "\n")
    reached = result.report.nominal_fidelity >= cfg.options.target_fidelity
    print(f"design: best nominal fidelity {result.report.nominal_fidelity:.6f} "
          f"(target {cfg.options.target_fidelity}), "
          f"worst ensemble member {min(result.report.member_fidelities):.6f}")
    print(f"pulse written to {args.out}")
    return EXIT_OK if reached else EXIT_NUMERIC


def _cmd_evaluate(args) -> int:
    cfg = load_config(args.config)
    pulse = _load_pulse_for(cfg, args.pulse)
    member = None
    if args.rf_scale is not None:
        member = EnsembleMember({ch: args.rf_scale for ch in cfg.problem.channels}, 1.0)
    fid = member_fidelity(cfg.problem, pulse, member)
    print(f"{fid:.6f}")
    return EXIT_OK


def _spec_from_dict(item: dict, index: int) -> DeviationSpec:
    where = f"specs[{index}]"
    if not isinstance(item, dict):
        raise DeviationError(f"{where}: expected an object")
    kind = item.get("kind")
    if not isinstance(kind, str):
        raise DeviationError(f"{where}.kind: expected a string")
    value = item.get("value")
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise DeviationError(f"{where}.value: expected a number")
    target = item.get("target")
    if isinstance(target, list):
        if len(target) != 2 or not all(isinstance(t, str) for t in target):
            raise DeviationError(f"{where}.target: pair must be two spin names")
        target = (target[0], target[1])
    label = item.get("label")
    if label is not None and not isinstance(label, str):
        raise DeviationError(f"{where}.label: expected a string")
    return DeviationSpec(kind=kind, value=float(value), target=target, label=label)


def _cmd_sensitivity(args) -> int:
    cfg = load_config(args.config)
    pulse = _load_pulse_for(cfg, args.pulse)
    with open(args.specs, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as e:
            raise DeviationError(f"{args.specs}: invalid JSON: {e}") from None
    items = data.get("specs") if isinstance(data, dict) else data
    if not isinstance(items, list):
        raise DeviationError("spec file must hold a list under 'specs'")
    specs = [_spec_from_dict(item, i) for i, item in enumerate(items)]
    report = scan(pulse, cfg.problem, specs)
    csv = report.to_csv()
    if args.out:
        _write_text(args.out, csv)
        print(f"sensitivity report written to {args.out}")
    else:
        sys.stdout.write(csv)
    return EXIT_OK


def _spectrum_csv(xs, values) -> str:
    lines = ["x,real,imag"]
    for x, v in zip(xs, values):
        lines.append(f"{float(x)!r},{float(v.real)!r},{float(v.imag)!r}")
    return "\n".join(lines) + "\n"


def _cmd_spectrum(args) -> int:
    cfg = load_config(args.config)
    system = cfg.system
    channel = args.readout
    system.channel(channel)
    rho_eq = thermal_deviation_state(system)
    state = rho_eq
    if args.pulse:
        pulse = _load_pulse_for(cfg, args.pulse)
        state = propagate(rho_eq, pulse, cfg.problem.drift, cfg.problem.controls).final
    spec, fid = simulate_readout(system, state, channel, cfg.acquisition)
    ref_spec, _ = simulate_readout(system, rho_eq, channel, cfg.acquisition)
    windows = cfg.windows or default_windows(system, channel,
                                             cfg.acquisition.linewidth_factor)
    pols = integrate_lines(spec, ref_spec, windows)

    _write_text(args.out + "_fid.csv", _spectrum_csv(fid.times_s, fid.samples))
    _write_text(args.out + "_spectrum.csv",
                _spectrum_csv(spec.frequencies_hz, spec.values))
    pol_lines = ["spin,polarization"]
    for spin in sorted(pols):
        pol_lines.append(f"{spin},{pols[spin]:.6f}")
    _write_text(args.out + "_polarizations.csv", "\n".join(pol_lines) + "\n")

    print(f"spin polarizations relative to equilibrium ({channel} readout):")
    for spin in sorted(pols):
        print(f"  {spin}: {pols[spin]:+.4f}")
    print(f"files written: {args.out}_fid.csv, {args.out}_spectrum.csv, "
          f"{args.out}_polarizations.csv")
    return EXIT_OK


def _cmd_convert(args) -> int:
    pulse = read_pulse(args.pulse)
    channel = args.channel or pulse.channels[0]
    spec = pulse_spectrum(pulse, channel, args.component)
    sys.stdout.write(_spectrum_csv(spec.frequencies_hz, spec.values))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spingrape",
        description="Design and verify shaped RF pulses for entropy-manipulating "
                    "gates on coupled spin-1/2 systems.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("design", help="run the two-phase multi-seed pulse design")
    p.add_argument("config")
    p.add_argument("--seeds", help="comma-separated seeds (overrides config)")
    p.add_argument("--out", required=True, help="output pulse file")
    p.add_argument("--report", help="output JSON report with full histories")
    p.set_defaults(func=_cmd_design)

    p = sub.add_parser("evaluate", help="print the fidelity of a pulse")
    p.add_argument("config")
    p.add_argument("pulse")
    p.add_argument("--rf-scale", type=float, dest="rf_scale",
                   help="apply this RF amplitude scale on all channels")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("sensitivity", help="fidelity under parameter deviations")
    p.add_argument("config")
    p.add_argument("pulse")
    p.add_argument("specs", help="JSON file with deviation rows")
    p.add_argument("--out", help="write CSV here instead of stdout")
    p.set_defaults(func=_cmd_sensitivity)

    p = sub.add_parser("spectrum", help="simulate readout, FID, spectrum, and "
                                        "line-integral polarizations")
    p.add_argument("config")
    p.add_argument("pulse", nargs="?", help="pulse to apply first; omit for the "
                                            "reference spectrum")
    p.add_argument("--readout", required=True, help="channel to read out")
    p.add_argument("--out", required=True, help="output file prefix")
    p.set_defaults(func=_cmd_spectrum)

    p = sub.add_parser("convert", help="print the Fourier transform of a pulse "
                                       "waveform as CSV")
    p.add_argument("pulse")
    p.add_argument("--channel", help="channel label (default: first)")
    p.add_argument("--component", choices=("x", "y"), default="x")
    p.set_defaults(func=_cmd_convert)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BrokenPipeError:
        return EXIT_OK
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except _VALIDATION_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
