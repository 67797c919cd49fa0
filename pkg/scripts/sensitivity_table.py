#!/usr/bin/env python3
"""Estimate a designed pulse's tolerance budget: fidelity under single-
parameter deviations of the Hamiltonian and timing: the standard
two-sided battery over the three-spin system (8 parameters, 2 values each).

Usage:
    python scripts/sensitivity_table.py configs/tce_comp.json out/comp.pulse
"""

import argparse
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from spingrape import DeviationSpec, load_config, read_pulse, scan


def standard_specs(problem):
    t = problem.duration_s
    return [
        DeviationSpec("b0_scale", 606.13 / 600.55, label="field scale +0.93%"),
        DeviationSpec("b0_scale", 594.55 / 600.55, label="field scale -1.00%"),
        DeviationSpec("j_coupling", 221.0, ("H", "C2"), label="J(H,C2) 221 Hz"),
        DeviationSpec("j_coupling", 180.0, ("H", "C2"), label="J(H,C2) 180 Hz"),
        DeviationSpec("j_coupling", 113.0, ("C1", "C2"), label="J(C1,C2) 113 Hz"),
        DeviationSpec("j_coupling", 93.0, ("C1", "C2"), label="J(C1,C2) 93 Hz"),
        DeviationSpec("j_coupling", 12.0, ("C1", "H"), label="J(C1,H) 12 Hz"),
        DeviationSpec("j_coupling", 5.0, ("C1", "H"), label="J(C1,H) 5 Hz"),
        DeviationSpec("duration_scale", 0.0132 / t, label="duration 13.2 ms"),
        DeviationSpec("duration_scale", 0.0128 / t, label="duration 12.8 ms"),
        DeviationSpec("channel_offset", -20.0, "hydrogen", label="H carrier +20 Hz"),
        DeviationSpec("channel_offset", +20.0, "hydrogen", label="H carrier -20 Hz"),
        DeviationSpec("channel_offset", -20.0, "carbon", label="C carrier +20 Hz"),
        DeviationSpec("channel_offset", +20.0, "carbon", label="C carrier -20 Hz"),
        DeviationSpec("pair_larmor_difference", 1103.0, ("C1", "C2"),
                      label="carbon Larmor diff 1103 Hz"),
        DeviationSpec("pair_larmor_difference", 1063.0, ("C1", "C2"),
                      label="carbon Larmor diff 1063 Hz"),
    ]


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("config")
    ap.add_argument("pulse")
    ap.add_argument("--out", help="write CSV here instead of stdout")
    args = ap.parse_args()

    cfg = load_config(args.config)
    pulse = read_pulse(args.pulse)
    try:
        report = scan(pulse, cfg.problem, standard_specs(cfg.problem))
    except Exception as e:
        print(f"error: {e}", file=sys.stderr)
        print("note: the standard battery addresses the C1/C2/H system; "
              "for other systems use the `spingrape sensitivity` subcommand "
              "with a custom spec file", file=sys.stderr)
        return 1
    csv = report.to_csv()
    if args.out:
        os.makedirs(os.path.dirname(args.out) or ".", exist_ok=True)
        with open(args.out, "w") as fh:
            fh.write(csv)
        print(f"written to {args.out}")
    else:
        sys.stdout.write(csv)
    return 0


if __name__ == "__main__":
    sys.exit(main())
