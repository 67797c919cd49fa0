"""Exact piecewise-constant time evolution and the overlap functional.

Propagators are computed from the eigendecomposition of each Hermitian step
Hamiltonian, so they are exact for any step length.  Evolution follows
U = exp(-i H dt), rho -> U rho U^dag.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .spins import HERMITIAN_TOL, OperatorError, OperatorMatrix

MAX_CONTROL_STEPS = 5000


class PulseError(ValueError):
    """Invalid control pulse data."""


@dataclass(frozen=True)
class ControlPulse:
    """Piecewise-constant multi-channel RF waveform.

    amplitudes has shape (steps, n_channels, 2) holding the Cartesian
    (ux, uy) components in Hz.  max_rf_hz, when present, records the
    per-channel amplitude cap the pulse was designed against.
    """

    dt_s: float
    channels: tuple[str, ...]
    amplitudes: np.ndarray
    max_rf_hz: Mapping[str, float] | None = None

    def __post_init__(self):
        if not (np.isfinite(self.dt_s) and self.dt_s > 0):
            raise PulseError(f"dt must be positive, got {self.dt_s}")
        channels = tuple(self.channels)
        if not channels or len(set(channels)) != len(channels):
            raise PulseError(f"channels must be non-empty and unique, got {channels}")
        object.__setattr__(self, "channels", channels)
        amps = np.array(self.amplitudes, dtype=float)
        if amps.ndim != 3 or amps.shape[1] != len(channels) or amps.shape[2] != 2:
            raise PulseError(f"amplitudes must have shape (steps, {len(channels)}, 2), "
                             f"got {amps.shape}")
        if not 1 <= amps.shape[0] <= MAX_CONTROL_STEPS:
            raise PulseError(f"steps must be in [1, {MAX_CONTROL_STEPS}], got {amps.shape[0]}")
        if not np.all(np.isfinite(amps)):
            raise PulseError("amplitudes contain non-finite values")
        amps.flags.writeable = False
        object.__setattr__(self, "amplitudes", amps)
        if self.max_rf_hz is not None:
            caps = dict(self.max_rf_hz)
            for ch in channels:
                if ch not in caps:
                    raise PulseError(f"max_rf_hz missing channel {ch!r}")
                if not (np.isfinite(caps[ch]) and caps[ch] > 0):
                    raise PulseError(f"max_rf_hz[{ch!r}] must be positive")
            object.__setattr__(self, "max_rf_hz", caps)

    @property
    def steps(self) -> int:
        return self.amplitudes.shape[0]

    @property
    def duration_s(self) -> float:
        return self.steps * self.dt_s

    def channel_index(self, name: str) -> int:
        try:
            return self.channels.index(name)
        except ValueError:
            raise PulseError(f"pulse has no channel {name!r}") from None

    def with_amplitudes(self, amplitudes: np.ndarray) -> "ControlPulse":
        return ControlPulse(self.dt_s, self.channels, amplitudes, self.max_rf_hz)


@dataclass(frozen=True)
class Trajectory:
    """Result of propagating a state through a pulse.

    states, when retained, has shape (steps+1, dim, dim) and includes the
    initial state; propagators has shape (steps, dim, dim).
    """

    final: OperatorMatrix
    states: np.ndarray | None = None
    propagators: np.ndarray | None = None


def _require_hermitian(m: np.ndarray, what: str) -> np.ndarray:
    dev = np.max(np.abs(m - m.conj().T))
    if dev > HERMITIAN_TOL:
        raise OperatorError(f"{what} must be Hermitian (max |M - M^dag| = {dev:.3e})")
    return m


def expm_step(h: OperatorMatrix, dt_s: float) -> OperatorMatrix:
    """Exact unitary exp(-i H dt) of a Hermitian step Hamiltonian."""
    if not np.isfinite(dt_s):
        raise OperatorError(f"dt must be finite, got {dt_s}")
    m = _require_hermitian(np.asarray(h.entries, dtype=complex), "step Hamiltonian")
    w, v = np.linalg.eigh(m)
    u = (v * np.exp(-1j * dt_s * w)) @ v.conj().T
    return OperatorMatrix(u, role="propagator")


def step_hamiltonians(drift: OperatorMatrix,
                      controls: Mapping[str, tuple[OperatorMatrix, OperatorMatrix]],
                      pulse: ControlPulse,
                      rf_scale: Mapping[str, float] | None = None) -> np.ndarray:
    """Per-step Hamiltonians H_j = H0 + sum_ch s_ch (ux Hx + uy Hy), shape (N, d, d).

    Amplitudes are in Hz; the control operators already carry the 2*pi.
    """
    d = drift.dim
    for ch in pulse.channels:
        if ch not in controls:
            raise PulseError(f"no control operators for channel {ch!r}")
        if controls[ch][0].dim != d or controls[ch][1].dim != d:
            raise PulseError(f"control operators for {ch!r} do not match drift dimension {d}")
    scales = np.ones(len(pulse.channels))
    if rf_scale is not None:
        for c, ch in enumerate(pulse.channels):
            scales[c] = rf_scale.get(ch, 1.0)
    h = np.broadcast_to(drift.entries, (pulse.steps, d, d)).copy()
    for c, ch in enumerate(pulse.channels):
        hx, hy = controls[ch]
        u = scales[c] * pulse.amplitudes[:, c, :]
        h += u[:, 0, None, None] * hx.entries + u[:, 1, None, None] * hy.entries
    return h


def eig_propagators(h: np.ndarray, dt_s: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Batched eigendecomposition and propagators for stacked Hamiltonians.

    Returns (w, v, u) with w (N, d) eigenvalues, v (N, d, d) eigenvectors,
    and u (N, d, d) the unitaries exp(-i h dt).
    """
    w, v = np.linalg.eigh(h)
    phase = np.exp(-1j * dt_s * w)
    u = (v * phase[:, None, :]) @ np.conjugate(np.swapaxes(v, -1, -2))
    return w, v, u


def propagate(rho0: OperatorMatrix,
              pulse: ControlPulse,
              drift: OperatorMatrix,
              controls: Mapping[str, tuple[OperatorMatrix, OperatorMatrix]],
              rf_scale: Mapping[str, float] | None = None,
              keep_states: bool = False,
              keep_propagators: bool = False) -> Trajectory:
    """Evolve a deviation state through a pulse; exact per-step exponentials.

    rf_scale multiplies both Cartesian components per channel (RF
    miscalibration model).  Trace and Frobenius norm are conserved.
    """
    if rho0.dim != drift.dim:
        raise OperatorError(f"state dimension {rho0.dim} does not match drift {drift.dim}")
    h = step_hamiltonians(drift, controls, pulse, rf_scale)
    _, _, u = eig_propagators(h, pulse.dt_s)
    rho = np.asarray(rho0.entries, dtype=complex)
    states = np.empty((pulse.steps + 1, rho.shape[0], rho.shape[1]), dtype=complex) \
        if keep_states else None
    if states is not None:
        states[0] = rho
    for j in range(pulse.steps):
        rho = u[j] @ rho @ u[j].conj().T
        if states is not None:
            states[j + 1] = rho
    final = OperatorMatrix(0.5 * (rho + rho.conj().T), role=rho0.role)
    return Trajectory(final=final,
                      states=states,
                      propagators=u if keep_propagators else None)


def fidelity(rho_t: OperatorMatrix, target: OperatorMatrix) -> float:
    """Normalized Frobenius overlap Re Tr(target^dag rho) / (|target| |rho|).

    Equals 1.0 exactly when rho is a positive multiple of the target, and is
    invariant under simultaneous unitary conjugation of both arguments.
    """
    return fidelity_matrices(rho_t.entries, target.entries)


def fidelity_matrices(rho_t: np.ndarray, target: np.ndarray) -> float:
    if rho_t.shape != target.shape:
        raise OperatorError(f"dimension mismatch: {rho_t.shape} vs {target.shape}")
    norm_t = np.linalg.norm(target)
    norm_r = np.linalg.norm(rho_t)
    if norm_t == 0.0 or norm_r == 0.0:
        raise OperatorError("overlap undefined for a zero-norm state")
    return float(np.real(np.vdot(target, rho_t)) / (norm_t * norm_r))
