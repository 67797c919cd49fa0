#!/usr/bin/env python3
"""Score a designed pulse the way the lab would: apply it to the thermal
state, read out, integrate spectral lines against the reference spectrum,
and compare with the ideal-gate prediction.

Usage:
    python scripts/verify_pulse.py configs/tce_pe.json out/pe.pulse --gate exchange
    python scripts/verify_pulse.py configs/tce_comp.json out/comp.pulse --gate compression
"""

import argparse
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from spingrape import (conjugate_state, default_windows, ideal_comp_unitary,
                       ideal_pe_unitary, integrate_lines, load_config,
                       member_fidelity, propagate, read_pulse,
                       simulate_readout, thermal_deviation_state)


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("config")
    ap.add_argument("pulse")
    ap.add_argument("--gate", choices=("exchange", "compression"),
                    required=True)
    ap.add_argument("--readout", default="carbon")
    ap.add_argument("--rf-scale", type=float, default=1.0)
    args = ap.parse_args()

    cfg = load_config(args.config)
    system = cfg.system
    problem = cfg.problem
    pulse = read_pulse(args.pulse)

    eq = thermal_deviation_state(system)
    ref, _ = simulate_readout(system, eq, args.readout, cfg.acquisition)
    windows = cfg.windows or default_windows(system, args.readout,
                                             cfg.acquisition.linewidth_factor)

    rf = {ch: args.rf_scale for ch in problem.channels}
    evolved = propagate(eq, pulse, problem.drift, problem.controls,
                        rf_scale=rf).final
    spec, _ = simulate_readout(system, evolved, args.readout, cfg.acquisition)
    measured = integrate_lines(spec, ref, windows)

    if args.gate == "exchange":
        ideal_u = ideal_pe_unitary("phase_variant",
                                   (system.spin_index("C2"), system.spin_index("H")),
                                   system.n_spins)
    else:
        ideal_u = ideal_comp_unitary(system.n_spins)
    ideal_state = conjugate_state(eq, ideal_u)
    ideal_spec, _ = simulate_readout(system, ideal_state, args.readout,
                                     cfg.acquisition)
    ideal = integrate_lines(ideal_spec, ref, windows)

    fid = member_fidelity(problem, pulse)
    print(f"pulse fidelity to the design target: {fid:.6f} "
          f"(rf_scale {args.rf_scale})")
    print(f"{'spin':>6} {'pulse':>9} {'ideal':>9} {'efficiency':>11}")
    for spin in sorted(measured):
        eff = measured[spin] / ideal[spin] if ideal[spin] else float("nan")
        print(f"{spin:>6} {measured[spin]:+9.4f} {ideal[spin]:+9.4f} {eff:11.1%}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
