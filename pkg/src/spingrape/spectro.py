"""Simulated NMR verification: hard readout pulses, free-induction decay
with per-spin T2* envelopes, discrete Fourier transforms, and spectral line
integration as the polarization measure.

Polarizations come out in units of the reference (equilibrium) value of the
same spin, which is how shaped pulses are scored against a plain excitation
spectrum.  Line integrals are insensitive to T2* because the decay envelope
redistributes line shape, not area.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .propagation import ControlPulse, expm_step
from .spins import (OperatorMatrix, SpinSystem, build_drift_hamiltonian,
                    conjugate_state, single_spin_operator)


class SpectrumError(ValueError):
    """Invalid acquisition or integration request."""


@dataclass(frozen=True)
class FidRecord:
    """Complex time-domain signal acquired on one channel."""

    dwell_s: float
    samples: np.ndarray
    observed_channel: str

    def __post_init__(self):
        if not (np.isfinite(self.dwell_s) and self.dwell_s > 0):
            raise SpectrumError(f"dwell must be positive, got {self.dwell_s}")
        s = np.asarray(self.samples, dtype=complex)
        if s.ndim != 1 or s.size < 2:
            raise SpectrumError("FID needs at least 2 samples")
        if not np.all(np.isfinite(s.view(float))):
            raise SpectrumError("FID samples must be finite")
        s = s.copy()
        s.flags.writeable = False
        object.__setattr__(self, "samples", s)

    @property
    def points(self) -> int:
        return self.samples.size

    @property
    def times_s(self) -> np.ndarray:
        return np.arange(self.points) * self.dwell_s


@dataclass(frozen=True)
class Window:
    """Frequency window [f_lo, f_hi] attributed to one spin's multiplet."""

    spin: str
    f_lo_hz: float
    f_hi_hz: float

    def __post_init__(self):
        if not self.f_lo_hz < self.f_hi_hz:
            raise SpectrumError(f"window for {self.spin}: f_lo must be below f_hi")


@dataclass(frozen=True)
class Spectrum:
    """Complex spectrum on a strictly increasing frequency axis centered on
    the channel carrier."""

    frequencies_hz: np.ndarray
    values: np.ndarray
    windows: tuple[Window, ...] = ()

    def __post_init__(self):
        f = np.asarray(self.frequencies_hz, dtype=float)
        v = np.asarray(self.values, dtype=complex)
        if f.ndim != 1 or f.shape != v.shape:
            raise SpectrumError("frequency axis and values must be 1-d and equal length")
        if not np.all(np.diff(f) > 0):
            raise SpectrumError("frequency axis must be strictly increasing")
        for w in self.windows:
            if w.f_lo_hz < f[0] or w.f_hi_hz > f[-1]:
                raise SpectrumError(f"window for {w.spin} outside the frequency axis")
        f = f.copy(); f.flags.writeable = False
        v = v.copy(); v.flags.writeable = False
        object.__setattr__(self, "frequencies_hz", f)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "windows", tuple(self.windows))


def readout_90(rho: OperatorMatrix, system: SpinSystem, channel: str,
               phase: float = 0.0) -> OperatorMatrix:
    """Ideal instantaneous 90-degree pulse on every spin of a channel.

    Conjugates by exp(-i (pi/2) sum_i (Ix_i cos(phase) + Iy_i sin(phase))).
    With phase 0 this takes Iz to -Iy; with phase pi/2 it takes Iz to Ix.
    """
    spins = system.channel_spins(channel)
    n = system.n_spins
    gen = np.zeros((system.dim, system.dim), dtype=complex)
    for s in spins:
        k = system.spin_index(s.name)
        gen += (np.cos(phase) * single_spin_operator("x", k, n).entries
                + np.sin(phase) * single_spin_operator("y", k, n).entries)
    u = expm_step(OperatorMatrix(gen, role="hamiltonian"), np.pi / 2.0)
    return conjugate_state(rho, u)


def acquire(rho: OperatorMatrix, system: SpinSystem, channel: str,
            dwell_s: float, points: int) -> FidRecord:
    """Free-induction decay of a state observed on one channel.

    Each sample is sum_i Tr((Ix_i + i Iy_i) rho(t)) * exp(-t / T2*_i) over
    the channel's spins, with exact free evolution under the drift
    Hamiltonian between samples.
    """
    if points < 2:
        raise SpectrumError(f"need at least 2 points, got {points}")
    if not (np.isfinite(dwell_s) and dwell_s > 0):
        raise SpectrumError(f"dwell must be positive, got {dwell_s}")
    spins = system.channel_spins(channel)
    for s in spins:
        if s.t2star_s is None:
            raise SpectrumError(f"spin {s.name} has no t2star_s; cannot simulate decay")
    n = system.n_spins
    h0 = build_drift_hamiltonian(system).entries
    w, v = np.linalg.eigh(h0)
    vh = v.conj().T
    rho_e = vh @ rho.entries @ v
    times = np.arange(points) * dwell_s

    # in the eigenbasis, rho_kl(t) = rho_kl * exp(-i (w_k - w_l) t), so each
    # detection trace is a small sum over Bohr frequencies
    omega = w[:, None] - w[None, :]
    signal = np.zeros(points, dtype=complex)
    for s in spins:
        k = system.spin_index(s.name)
        det = (single_spin_operator("x", k, n).entries
               + 1j * single_spin_operator("y", k, n).entries)
        det_e = vh @ det @ v
        coeff = det_e.T * rho_e                     # coeff_kl = det_lk rho_kl
        phases = np.exp(-1j * np.outer(times, omega.ravel()))
        contrib = phases @ coeff.ravel()
        signal += contrib * np.exp(-times / s.t2star_s)
    return FidRecord(dwell_s=dwell_s, samples=signal, observed_channel=channel)


def _next_pow2(n: int) -> int:
    p = 1
    while p < n:
        p *= 2
    return p


def to_spectrum(fid: FidRecord, zero_fill: int = 2) -> Spectrum:
    """Discrete Fourier transform with zero-filling to a power of two.

    The frequency axis spans +/- 1/(2 dwell).  No apodization is applied.
    """
    if zero_fill < 1:
        raise SpectrumError(f"zero_fill must be >= 1, got {zero_fill}")
    n_pad = _next_pow2(fid.points * zero_fill)
    values = np.fft.fftshift(np.fft.fft(fid.samples, n=n_pad))
    freqs = np.fft.fftshift(np.fft.fftfreq(n_pad, d=fid.dwell_s))
    return Spectrum(frequencies_hz=freqs, values=values)


def default_windows(system: SpinSystem, channel: str,
                    linewidth_factor: float = 5.0) -> tuple[Window, ...]:
    """One window per channel spin: the offset +/- (half the summed |J| plus
    a few linewidths), wide enough to cover the full multiplet."""
    windows = []
    for s in system.channel_spins(channel):
        half = sum(abs(system.j_hz(s.name, other.name)) for other in system.spins
                   if other.name != s.name) / 2.0
        lw = 1.0 / (np.pi * s.t2star_s) if s.t2star_s else 1.0
        half += linewidth_factor * lw
        windows.append(Window(s.name, s.offset_hz - half, s.offset_hz + half))
    return tuple(windows)


def window_integral(spectrum: Spectrum, window: Window) -> float:
    """Real-part integral of the spectrum over one window."""
    f = spectrum.frequencies_hz
    mask = (f >= window.f_lo_hz) & (f <= window.f_hi_hz)
    if not np.any(mask):
        raise SpectrumError(f"window for {window.spin} contains no spectrum bins")
    df = f[1] - f[0]
    return float(np.sum(np.real(spectrum.values[mask])) * df)


def integrate_lines(spectrum: Spectrum, reference: Spectrum,
                    windows: Sequence[Window]) -> dict[str, float]:
    """Per-spin polarization: the windowed real-part integral of the
    spectrum normalized by the same integral of the reference spectrum.

    Windows must be disjoint.  Several windows may share a spin label; their
    integrals are summed before normalization.
    """
    ordered = sorted(windows, key=lambda w: w.f_lo_hz)
    for a, b in zip(ordered, ordered[1:]):
        if b.f_lo_hz < a.f_hi_hz:
            raise SpectrumError(f"windows for {a.spin} and {b.spin} overlap")
    num: dict[str, float] = {}
    den: dict[str, float] = {}
    for w in windows:
        num[w.spin] = num.get(w.spin, 0.0) + window_integral(spectrum, w)
        den[w.spin] = den.get(w.spin, 0.0) + window_integral(reference, w)
    out = {}
    for spin in num:
        if den[spin] == 0.0:
            raise SpectrumError(f"reference integral for {spin} is zero")
        out[spin] = num[spin] / den[spin]
    return out


def pulse_spectrum(pulse: ControlPulse, channel: str,
                   component: str = "x", zero_fill: int = 2) -> Spectrum:
    """DFT of one Cartesian component of a pulse waveform.

    The axis spans +/- 1/(2 dt), i.e. the full modulation bandwidth the
    piecewise-constant shape can express.
    """
    if component not in ("x", "y"):
        raise SpectrumError(f"component must be 'x' or 'y', got {component!r}")
    c = pulse.channel_index(channel)
    series = pulse.amplitudes[:, c, 0 if component == "x" else 1].astype(complex)
    n_pad = _next_pow2(max(series.size * zero_fill, 2))
    values = np.fft.fftshift(np.fft.fft(series, n=n_pad))
    freqs = np.fft.fftshift(np.fft.fftfreq(n_pad, d=pulse.dt_s))
    return Spectrum(frequencies_hz=freqs, values=values)


@dataclass(frozen=True)
class AcquisitionSettings:
    """Acquisition defaults sized for kHz-scale offsets: the +/-2.5 kHz
    window covers both carbons and the 0.6 Hz bin width resolves the
    smallest 9 Hz splitting."""

    dwell_s: float = 2e-4
    points: int = 8192
    zero_fill: int = 2
    readout_phase: float = np.pi / 2.0
    linewidth_factor: float = 5.0


def simulate_readout(system: SpinSystem, state: OperatorMatrix, channel: str,
                     settings: AcquisitionSettings = AcquisitionSettings(),
                     ) -> tuple[Spectrum, FidRecord]:
    """Hard 90-degree readout followed by acquisition and DFT.

    The default readout phase (pi/2, a rotation about y) turns +Iz into +Ix
    so that positive longitudinal polarization integrates positive in the
    real part of the spectrum.  The first FID point is half-weighted before
    the transform (the usual first-point correction): the rectangle-rule DFT
    of a one-sided signal otherwise carries a flat s(0)/2 baseline that
    biases windowed integrals.
    """
    rotated = readout_90(state, system, channel, phase=settings.readout_phase)
    fid = acquire(rotated, system, channel, settings.dwell_s, settings.points)
    corrected = fid.samples.copy()
    corrected[0] *= 0.5
    half_first = FidRecord(fid.dwell_s, corrected, fid.observed_channel)
    return to_spectrum(half_first, settings.zero_fill), fid
