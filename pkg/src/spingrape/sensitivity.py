"""Fidelity of a fixed pulse under systematic parameter deviations.

Each deviation rebuilds the problem with one Hamiltonian or timing
parameter changed and re-evaluates the nominal-member fidelity, which is
how the tolerance budget of a designed pulse is estimated.  Combined
deviations are deliberately not modeled; rows are single-parameter.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .grape import GrapeProblem, member_fidelity
from .propagation import ControlPulse
from .spins import SpinSystem, build_drift_hamiltonian

KINDS = ("b0_scale", "j_coupling", "duration_scale", "channel_offset",
         "pair_larmor_difference")


class DeviationError(ValueError):
    """Invalid deviation specification."""


@dataclass(frozen=True)
class DeviationSpec:
    """One deviated parameter.

    kind / target / value semantics:
      b0_scale                target unused; value scales every chemical
                              shift (J is field independent)
      j_coupling              target is a spin pair; value is the new J in Hz
      duration_scale          target unused; value scales the pulse duration
      channel_offset          target is a channel; value in Hz is added to
                              every offset on it (a carrier miscalibration
                              of +f shifts offsets by -f)
      pair_larmor_difference  target is a spin pair; value is their new
                              offset difference in Hz, mean preserved
    """

    kind: str
    value: float
    target: str | tuple[str, str] | None = None
    label: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DeviationError(f"unknown deviation kind {self.kind!r}")
        if not np.isfinite(self.value):
            raise DeviationError(f"{self.kind}: value must be finite")
        if self.kind in ("j_coupling", "pair_larmor_difference"):
            if not (isinstance(self.target, tuple) and len(self.target) == 2):
                raise DeviationError(f"{self.kind} needs a (spin, spin) target pair")
        elif self.kind == "channel_offset":
            if not isinstance(self.target, str):
                raise DeviationError("channel_offset needs a channel-name target")

    def describe(self) -> str:
        if self.label:
            return self.label
        if self.target is None:
            return self.kind
        t = ",".join(self.target) if isinstance(self.target, tuple) else self.target
        return f"{self.kind}({t})"


def _with_offsets(system: SpinSystem, offsets: dict[str, float]) -> SpinSystem:
    spins = tuple(replace(s, offset_hz=offsets.get(s.name, s.offset_hz))
                  for s in system.spins)
    return replace(system, spins=spins)


def nominal_value(problem: GrapeProblem, spec: DeviationSpec) -> float:
    """The undeviated value of the parameter a spec addresses."""
    system = problem.system
    if spec.kind == "b0_scale":
        return 1.0
    if spec.kind == "j_coupling":
        a, b = spec.target
        return system.j_hz(a, b)
    if spec.kind == "duration_scale":
        return problem.duration_s
    if spec.kind == "channel_offset":
        return 0.0
    a, b = spec.target
    return system.spin(a).offset_hz - system.spin(b).offset_hz


def deviated_value(problem: GrapeProblem, spec: DeviationSpec) -> float:
    """The parameter value after applying the spec, in the same units as
    nominal_value."""
    if spec.kind == "b0_scale":
        return spec.value
    if spec.kind == "duration_scale":
        return problem.duration_s * spec.value
    return spec.value


def apply_deviation(problem: GrapeProblem, spec: DeviationSpec) -> GrapeProblem:
    """A copy of the problem with one parameter deviated.

    Pure: the input problem is never modified.  The drift Hamiltonian is
    rebuilt from the deviated system; control operators are unaffected
    because channel membership does not change.
    """
    system = problem.system
    if spec.kind == "b0_scale":
        offsets = {s.name: s.offset_hz * spec.value for s in system.spins}
        new_system = _with_offsets(system, offsets)
        return replace(problem, system=new_system,
                       drift=build_drift_hamiltonian(new_system))
    if spec.kind == "j_coupling":
        a, b = spec.target
        for name in (a, b):
            system.spin_index(name)
        if not any({c.a, c.b} == {a, b} for c in system.couplings):
            raise DeviationError(f"no coupling between {a} and {b} to deviate")
        couplings = tuple(replace(c, j_hz=spec.value) if {c.a, c.b} == {a, b} else c
                          for c in system.couplings)
        new_system = replace(system, couplings=couplings)
        return replace(problem, system=new_system,
                       drift=build_drift_hamiltonian(new_system))
    if spec.kind == "duration_scale":
        if spec.value <= 0:
            raise DeviationError("duration_scale must be positive")
        return replace(problem, duration_s=problem.duration_s * spec.value)
    if spec.kind == "channel_offset":
        spins = system.channel_spins(spec.target)
        offsets = {s.name: s.offset_hz + spec.value for s in spins}
        new_system = _with_offsets(system, offsets)
        return replace(problem, system=new_system,
                       drift=build_drift_hamiltonian(new_system))
    # pair_larmor_difference: move the pair to mean -/+ value/2, keeping the
    # spin that started higher on top
    a, b = spec.target
    sa, sb = system.spin(a), system.spin(b)
    mean = 0.5 * (sa.offset_hz + sb.offset_hz)
    sign = 1.0 if sa.offset_hz >= sb.offset_hz else -1.0
    offsets = {a: mean + sign * spec.value / 2.0, b: mean - sign * spec.value / 2.0}
    new_system = _with_offsets(system, offsets)
    return replace(problem, system=new_system,
                   drift=build_drift_hamiltonian(new_system))


@dataclass(frozen=True)
class SensitivityRow:
    label: str
    nominal: float | None
    deviated: float | None
    fidelity: float


@dataclass(frozen=True)
class SensitivityReport:
    """Row zero is always the nominal evaluation; one row per spec follows."""

    rows: tuple[SensitivityRow, ...]

    @property
    def nominal_fidelity(self) -> float:
        return self.rows[0].fidelity

    def to_csv(self) -> str:
        lines = ["label,nominal,deviated,fidelity"]
        for r in self.rows:
            nom = "" if r.nominal is None else repr(float(r.nominal))
            dev = "" if r.deviated is None else repr(float(r.deviated))
            lines.append(f"{r.label},{nom},{dev},{r.fidelity:.6f}")
        return "\n".join(lines) + "\n"


def scan(pulse: ControlPulse, problem: GrapeProblem,
         specs: Sequence[DeviationSpec]) -> SensitivityReport:
    """Evaluate the pulse on the nominal problem and on each deviation.

    Fidelities use the nominal ensemble member only.  Rows are independent;
    each deviation starts from the undeviated problem.
    """
    rows = [SensitivityRow("nominal", None, None,
                           member_fidelity(problem, pulse))]
    for spec in specs:
        deviated = apply_deviation(problem, spec)
        fid = member_fidelity(deviated, pulse)
        rows.append(SensitivityRow(spec.describe(),
                                   nominal_value(problem, spec),
                                   deviated_value(problem, spec),
                                   fid))
    return SensitivityReport(tuple(rows))
