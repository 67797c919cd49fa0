"""Shaped-pulse design and simulated NMR verification for entropy-manipulating
gates (polarization exchange, 3-spin compression) on coupled spin-1/2 systems."""

__version__ = "0.1.0"

from .spins import (Channel, Coupling, OperatorMatrix, Spin, SpinSystem,
                    build_control_operators, build_drift_hamiltonian,
                    conjugate_state, expectation, ideal_comp_unitary,
                    ideal_pe_unitary, parse_operator_expression,
                    single_spin_operator, thermal_deviation_state)
from .propagation import (ControlPulse, Trajectory, expm_step, fidelity,
                          propagate)
from .grape import (AscentOptions, AscentReport, DesignResult, EnsembleMember,
                    GrapeProblem, ascend, clamp, default_robust_ensemble,
                    design, ensemble_fidelity, gradient, init_random_pulse,
                    member_fidelity, nominal_member)
from .sensitivity import DeviationSpec, SensitivityReport, apply_deviation, scan
from .spectro import (AcquisitionSettings, FidRecord, Spectrum, Window,
                      acquire, default_windows, integrate_lines,
                      pulse_spectrum, readout_90, simulate_readout,
                      to_spectrum)
from .pulsefile import read_pulse, write_pulse
from .config import JobConfig, load_config
