import numpy as np
import pytest

from spingrape import (AcquisitionSettings, ControlPulse, OperatorMatrix,
                       Spin, SpinSystem, Channel, Coupling, Window, acquire,
                       conjugate_state, default_windows, ideal_comp_unitary,
                       ideal_pe_unitary, integrate_lines, parse_operator_expression,
                       pulse_spectrum, readout_90, simulate_readout,
                       single_spin_operator, thermal_deviation_state, to_spectrum)
from spingrape.spectro import SpectrumError, window_integral


def single_spin_system(offset=120.0, t2=0.1):
    return SpinSystem(spins=(Spin("A", "ch", offset, 1.0, None, t2),),
                      channels=(Channel("ch", 1000.0),))


class TestReadout:
    def test_phase_zero_takes_iz_to_minus_iy(self):
        system = single_spin_system()
        iz = OperatorMatrix(single_spin_operator("z", 0, 1).entries, role="state")
        out = readout_90(iz, system, "ch", phase=0.0)
        assert np.max(np.abs(out.entries
                             + single_spin_operator("y", 0, 1).entries)) <= 1e-12

    def test_two_readouts_invert_iz(self):
        system = single_spin_system()
        iz = OperatorMatrix(single_spin_operator("z", 0, 1).entries, role="state")
        out = readout_90(readout_90(iz, system, "ch"), system, "ch")
        assert np.max(np.abs(out.entries - (-iz.entries))) <= 1e-12

    def test_phase_quarter_takes_iz_to_ix(self):
        system = single_spin_system()
        iz = OperatorMatrix(single_spin_operator("z", 0, 1).entries, role="state")
        out = readout_90(iz, system, "ch", phase=np.pi / 2)
        assert np.max(np.abs(out.entries
                             - single_spin_operator("x", 0, 1).entries)) <= 1e-12

    def test_channel_selectivity(self, tce, tce_equilibrium):
        out = readout_90(tce_equilibrium, tce, "carbon")
        izh = single_spin_operator("z", 2, 3).entries
        before = np.real(np.einsum("ij,ji->", izh, tce_equilibrium.entries))
        after = np.real(np.einsum("ij,ji->", izh, out.entries))
        assert after == pytest.approx(before, abs=1e-12)

    def test_unknown_channel(self, tce, tce_equilibrium):
        with pytest.raises(Exception):
            readout_90(tce_equilibrium, tce, "xenon")


class TestAcquire:
    def test_longitudinal_state_gives_zero_signal(self):
        system = single_spin_system()
        iz = OperatorMatrix(single_spin_operator("z", 0, 1).entries, role="state")
        fid = acquire(iz, system, "ch", 1e-3, 64)
        assert np.max(np.abs(fid.samples)) <= 1e-14

    def test_single_spin_closed_form(self):
        nu, t2 = 120.0, 0.1
        system = single_spin_system(nu, t2)
        iz = OperatorMatrix(single_spin_operator("z", 0, 1).entries, role="state")
        rho = readout_90(iz, system, "ch")
        fid = acquire(rho, system, "ch", 5e-4, 256)
        t = fid.times_s
        expected = fid.samples[0] * np.exp(2j * np.pi * nu * t - t / t2)
        assert np.max(np.abs(fid.samples - expected)) <= 1e-12 * np.abs(fid.samples[0])

    def test_spectrum_peak_at_offset(self):
        nu = 120.0
        system = single_spin_system(nu, 0.1)
        iz = OperatorMatrix(single_spin_operator("z", 0, 1).entries, role="state")
        spec, _ = simulate_readout(system, iz, "ch",
                                   AcquisitionSettings(dwell_s=1e-3, points=2048))
        peak = spec.frequencies_hz[np.argmax(np.abs(spec.values))]
        assert abs(peak - nu) <= 0.5

    def test_matches_stepwise_evolution(self, tce, tce_equilibrium):
        from spingrape import build_drift_hamiltonian, expm_step
        rho = readout_90(tce_equilibrium, tce, "carbon", phase=np.pi / 2)
        dwell, points = 3e-4, 24
        fid = acquire(rho, tce, "carbon", dwell, points)
        u = expm_step(build_drift_hamiltonian(tce), dwell)
        det = {}
        for name in ("C1", "C2"):
            k = tce.spin_index(name)
            det[name] = (single_spin_operator("x", k, 3).entries
                         + 1j * single_spin_operator("y", k, 3).entries)
        state = rho
        expected = []
        for m in range(points):
            t = m * dwell
            val = 0.0
            for name in ("C1", "C2"):
                tr = np.einsum("ij,ji->", det[name], state.entries)
                val += tr * np.exp(-t / tce.spin(name).t2star_s)
            expected.append(val)
            state = conjugate_state(state, u)
        assert np.max(np.abs(fid.samples - np.array(expected))) <= 1e-10

    def test_missing_t2star_rejected(self):
        system = SpinSystem(spins=(Spin("A", "ch", 0.0),),
                            channels=(Channel("ch", 1000.0),))
        iz = OperatorMatrix(single_spin_operator("z", 0, 1).entries, role="state")
        with pytest.raises(SpectrumError):
            acquire(iz, system, "ch", 1e-3, 16)


class TestToSpectrum:
    def test_zero_fid_zero_spectrum(self):
        from spingrape.spectro import FidRecord
        fid = FidRecord(1e-3, np.zeros(64, dtype=complex), "ch")
        spec = to_spectrum(fid)
        assert np.max(np.abs(spec.values)) == 0.0

    def test_pure_tone_single_bin(self):
        from spingrape.spectro import FidRecord
        dwell, n = 1e-3, 256
        t = np.arange(n) * dwell
        nu = 62.5  # exactly on a bin for n*zero_fill samples
        fid = FidRecord(dwell, np.exp(2j * np.pi * nu * t), "ch")
        spec = to_spectrum(fid, zero_fill=1)
        idx = np.argmax(np.abs(spec.values))
        assert spec.frequencies_hz[idx] == pytest.approx(nu, abs=1e-9)

    def test_axis_spans_nyquist(self):
        from spingrape.spectro import FidRecord
        fid = FidRecord(2e-4, np.ones(100, dtype=complex), "ch")
        spec = to_spectrum(fid)
        assert spec.frequencies_hz[0] == pytest.approx(-2500.0)
        assert spec.frequencies_hz[-1] == pytest.approx(2500.0, rel=1e-2)

    def test_lorentzian_width(self):
        t2 = 0.1
        system = single_spin_system(0.0, t2)
        iz = OperatorMatrix(single_spin_operator("z", 0, 1).entries, role="state")
        spec, _ = simulate_readout(system, iz, "ch",
                                   AcquisitionSettings(dwell_s=1e-3, points=8192))
        vals = np.real(spec.values)
        half = np.max(vals) / 2.0
        above = spec.frequencies_hz[vals >= half]
        fwhm = above[-1] - above[0]
        assert fwhm == pytest.approx(1.0 / (np.pi * t2), rel=0.1)

    def test_parseval(self, tce, tce_equilibrium):
        rho = readout_90(tce_equilibrium, tce, "carbon", phase=np.pi / 2)
        fid = acquire(rho, tce, "carbon", 2e-4, 512)
        spec = to_spectrum(fid, zero_fill=2)
        n_pad = spec.values.size
        time_energy = np.sum(np.abs(fid.samples) ** 2)
        freq_energy = np.sum(np.abs(spec.values) ** 2) / n_pad
        assert freq_energy == pytest.approx(time_energy, rel=1e-9)


class TestIntegrateLines:
    def test_reference_against_itself(self, tce, tce_equilibrium):
        spec, _ = simulate_readout(tce, tce_equilibrium, "carbon")
        windows = default_windows(tce, "carbon")
        pols = integrate_lines(spec, spec, windows)
        assert pols["C1"] == pytest.approx(1.0)
        assert pols["C2"] == pytest.approx(1.0)

    def test_equilibrium_carbons_equal(self, tce, tce_equilibrium):
        # equal weights on both carbons: the pipeline must report both at 1.0
        # against the reference within the 2 percent discretization budget
        spec, _ = simulate_readout(tce, tce_equilibrium, "carbon")
        ref, _ = simulate_readout(tce, tce_equilibrium, "carbon")
        pols = integrate_lines(spec, ref, default_windows(tce, "carbon"))
        assert pols["C1"] == pytest.approx(1.0, abs=0.02)
        assert pols["C2"] == pytest.approx(1.0, abs=0.02)

    def test_ideal_exchange_polarizations(self, tce, tce_equilibrium):
        after = conjugate_state(tce_equilibrium,
                                ideal_pe_unitary("phase_variant", (1, 2), 3))
        spec, _ = simulate_readout(tce, after, "carbon")
        ref, _ = simulate_readout(tce, tce_equilibrium, "carbon")
        pols = integrate_lines(spec, ref, default_windows(tce, "carbon"))
        assert pols["C2"] == pytest.approx(4.0, rel=0.02)
        assert pols["C1"] == pytest.approx(1.0, rel=0.02)

    def test_ideal_compression_polarizations(self, tce, tce_equilibrium):
        after = conjugate_state(tce_equilibrium, ideal_comp_unitary())
        spec, _ = simulate_readout(tce, after, "carbon")
        ref, _ = simulate_readout(tce, tce_equilibrium, "carbon")
        pols = integrate_lines(spec, ref, default_windows(tce, "carbon"))
        assert pols["C1"] == pytest.approx(3.0, rel=0.02)
        assert pols["C2"] == pytest.approx(-1.0, rel=0.02)

    def test_overlapping_windows_rejected(self, tce, tce_equilibrium):
        spec, _ = simulate_readout(tce, tce_equilibrium, "carbon")
        windows = (Window("C1", 400.0, 700.0), Window("C2", 600.0, 900.0))
        with pytest.raises(SpectrumError):
            integrate_lines(spec, spec, windows)

    def test_channel_total_integral_invariant_under_j(self, tce):
        # couplings split lines but conserve the total channel integral
        from dataclasses import replace
        eq = thermal_deviation_state(tce)
        spec, _ = simulate_readout(tce, eq, "carbon")
        moved = SpinSystem(
            spins=tce.spins,
            couplings=tuple(replace(c, j_hz=c.j_hz * 1.45) for c in tce.couplings),
            channels=tce.channels)
        spec2, _ = simulate_readout(moved, thermal_deviation_state(moved), "carbon")
        df = spec.frequencies_hz[1] - spec.frequencies_hz[0]
        total1 = np.sum(np.real(spec.values)) * df
        total2 = np.sum(np.real(spec2.values)) * df
        assert total2 == pytest.approx(total1, rel=0.02)


class TestPulseSpectrum:
    def test_zero_pulse(self):
        pulse = ControlPulse(1e-5, ("ch",), np.zeros((64, 1, 2)))
        spec = pulse_spectrum(pulse, "ch")
        assert np.max(np.abs(spec.values)) == 0.0

    def test_constant_peak_at_zero(self):
        amps = np.zeros((128, 1, 2))
        amps[:, 0, 0] = 1500.0
        pulse = ControlPulse(1e-5, ("ch",), amps)
        spec = pulse_spectrum(pulse, "ch")
        idx = np.argmax(np.abs(spec.values))
        assert spec.frequencies_hz[idx] == pytest.approx(0.0, abs=1e-9)

    def test_cosine_peaks_at_plus_minus_f(self):
        dt, n, f = 1e-5, 512, 12000.0
        t = np.arange(n) * dt
        amps = np.zeros((n, 1, 2))
        amps[:, 0, 0] = 800.0 * np.cos(2 * np.pi * f * t)
        pulse = ControlPulse(dt, ("ch",), amps)
        spec = pulse_spectrum(pulse, "ch", zero_fill=1)
        mag = np.abs(spec.values)
        top2 = np.sort(spec.frequencies_hz[np.argsort(mag)[-2:]])
        assert top2[0] == pytest.approx(-f, abs=200.0)
        assert top2[1] == pytest.approx(f, abs=200.0)

    def test_axis_matches_step_bandwidth(self):
        pulse = ControlPulse(13e-6, ("ch",), np.zeros((1000, 1, 2)))
        spec = pulse_spectrum(pulse, "ch")
        nyquist = 1.0 / (2 * 13e-6)
        assert spec.frequencies_hz[0] == pytest.approx(-nyquist, rel=1e-9)

    def test_unknown_channel(self):
        pulse = ControlPulse(1e-5, ("ch",), np.zeros((8, 1, 2)))
        with pytest.raises(Exception):
            pulse_spectrum(pulse, "other")


class TestMultipletStructure:
    def test_carbon_lines_at_expected_positions(self, tce, tce_equilibrium):
        spec, _ = simulate_readout(tce, tce_equilibrium, "carbon")
        f = spec.frequencies_hz
        vals = np.real(spec.values)
        # C1 couples to C2 (103.1) and H (9): four lines around +541.7
        c1_lines = [541.7 + s1 * 103.1 / 2 + s2 * 9.0 / 2
                    for s1 in (-1, 1) for s2 in (-1, 1)]
        # C2 couples to H (200.8) and C1 (103.1): four lines around -541.7
        c2_lines = [-541.7 + s1 * 200.8 / 2 + s2 * 103.1 / 2
                    for s1 in (-1, 1) for s2 in (-1, 1)]
        for line in c1_lines + c2_lines:
            window = (f > line - 3.0) & (f < line + 3.0)
            local_peak = f[window][np.argmax(vals[window])]
            assert abs(local_peak - line) <= 1.0

    def test_windows_disjoint_and_inside_axis(self, tce, tce_equilibrium):
        spec, _ = simulate_readout(tce, tce_equilibrium, "carbon")
        windows = sorted(default_windows(tce, "carbon"), key=lambda w: w.f_lo_hz)
        for a, b in zip(windows, windows[1:]):
            assert a.f_hi_hz < b.f_lo_hz
        for w in windows:
            assert window_integral(spec, w) != 0.0
