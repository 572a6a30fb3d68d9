"""Closed-form device and defect physics."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from tlspectro.errors import BiasInsensitiveTlsError, ConfigurationError
from tlspectro.model import (
    DeviceParams,
    TlsParams,
    coupling_g,
    effective_coupling,
    gate_field,
    resonance_biases,
    rms_field,
    splitting,
    tls_frequency,
)
from tlspectro.units import HBAR

DEV = DeviceParams()

# independent statement of the frequency law, used as the oracle below
H = 6.62607015e-34
E_CHG = 1.602176634e-19


def oracle_freq(v, delta0_hz, delta_hz, p_z_ea, d0_m):
    field = v / (2.0 * d0_m)
    off = delta_hz - 2.0 * p_z_ea * E_CHG * 1e-10 * field / H
    return math.sqrt(delta0_hz**2 + off**2)


class TestGateField:
    def test_zero(self):
        assert gate_field(0.0, DEV) == 0.0

    def test_single_crossing_bias(self):
        # 9.4 mV across 2 x 49 nm
        assert gate_field(9.4e-3, DEV) == pytest.approx(9.5918e4, rel=1e-4)

    def test_ten_volts_is_about_100_mv_per_m(self):
        assert gate_field(10.0, DEV) == pytest.approx(100e6, abs=3e6)

    def test_sign_preserving(self):
        assert gate_field(-2e-3, DEV) == -gate_field(2e-3, DEV)


class TestTlsFrequency:
    def test_vertex_value_is_delta0(self):
        tls = TlsParams(3.1e9, 0.0, 0.4, 1e5)
        assert tls_frequency(tls, 0.0) == 3.1e9

    def test_symmetric_limit(self):
        tls = TlsParams(1e-3, 1e9, 0.4, 1e5)
        assert tls_frequency(tls, 0.0) == pytest.approx(1e9, rel=1e-6)

    def test_against_oracle_at_crossing_bias(self):
        tls = TlsParams(4.0e9, 0.0, 0.5, 1e5)
        v = 5.1903e-3
        got = tls_frequency(tls, gate_field(v, DEV))
        assert got == pytest.approx(oracle_freq(v, 4.0e9, 0.0, 0.5, DEV.d0), rel=1e-12)
        assert got == pytest.approx(4.2e9, rel=1e-5)

    @given(
        delta0=st.floats(1e8, 1e10),
        delta=st.floats(-2e10, 2e10),
        p_z=st.floats(0.01, 1.5),
        v=st.floats(-0.05, 0.05),
    )
    @settings(max_examples=200, deadline=None)
    def test_even_about_vertex_and_bounded_below(self, delta0, delta, p_z, v):
        tls = TlsParams(delta0, delta, p_z, 1e5)
        dev = DEV
        v_vertex = delta * dev.d0 * H / (p_z * E_CHG * 1e-10)
        f_plus = tls_frequency(tls, gate_field(v_vertex + v, dev))
        f_minus = tls_frequency(tls, gate_field(v_vertex - v, dev))
        assert f_plus == pytest.approx(f_minus, rel=1e-9)
        x = delta - 2 * p_z * E_CHG * 1e-10 * gate_field(v, dev) / H
        assert tls_frequency(tls, gate_field(v, dev)) >= max(delta0, abs(x)) * (1 - 1e-12)


class TestRmsField:
    def test_reference_value(self):
        assert rms_field(DEV) == pytest.approx(53.0, abs=2.0)

    def test_inverse_sqrt_volume_scaling(self):
        big = DeviceParams(v_total=4 * DEV.v_total)
        assert rms_field(big) == pytest.approx(rms_field(DEV) / 2.0, rel=1e-12)

    def test_volume_ratio_against_larger_reference_device(self):
        ref = DeviceParams(v_total=78e-18)
        assert rms_field(DEV) / rms_field(ref) == pytest.approx(math.sqrt(78 / 5.6), rel=1e-12)


class TestCoupling:
    def test_zero_dipole(self):
        assert coupling_g(0.0, DEV) == 0.0

    def test_reported_splitting(self):
        assert splitting(0.5, DEV) == pytest.approx(1.3e6, abs=0.1e6)

    def test_linear_in_dipole(self):
        assert coupling_g(0.8, DEV) == pytest.approx(2 * coupling_g(0.4, DEV), rel=1e-12)

    def test_consistent_with_rms_field(self):
        p_si = 0.37 * E_CHG * 1e-10
        expected = p_si * rms_field(DEV) / HBAR / (2 * math.pi)
        assert coupling_g(0.37, DEV) == pytest.approx(expected, rel=1e-14)


class TestEffectiveCoupling:
    def test_equals_g_at_vertex(self):
        tls = TlsParams(4.2e9, 0.0, 0.5, 1e5)
        assert effective_coupling(tls, 0.0, DEV) == pytest.approx(coupling_g(0.5, DEV), rel=1e-12)

    def test_half_at_double_frequency(self):
        tls = TlsParams(2.1e9, 0.0, 0.5, 1e5)
        e_g = gate_field(resonance_biases(tls, 4.2e9, DEV)[1], DEV)
        got = effective_coupling(tls, e_g, DEV)
        assert got == pytest.approx(0.5 * coupling_g(0.5, DEV), rel=1e-9)

    def test_vanishing_tunneling_energy(self):
        tls = TlsParams(1.0, 1e9, 0.5, 1e5)
        assert effective_coupling(tls, 0.0, DEV) < 1e-3


class TestResonanceBiases:
    def test_degenerate_single_solution(self):
        tls = TlsParams(4.2e9, 0.0, 0.5, 1e5)
        assert resonance_biases(tls, 4.2e9, DEV) == [0.0]

    def test_two_solutions_match_root_finder(self):
        tls = TlsParams(4.0e9, 0.0, 0.5, 1e5)
        got = resonance_biases(tls, 4.2e9, DEV)
        v_oracle = brentq(
            lambda v: oracle_freq(v, 4.0e9, 0.0, 0.5, DEV.d0) - 4.2e9, 1e-4, 1e-2, xtol=1e-18
        )
        assert got == pytest.approx([-v_oracle, v_oracle], rel=1e-9)
        assert got[1] == pytest.approx(5.19e-3, abs=0.01e-3)

    def test_below_vertex_no_solution(self):
        tls = TlsParams(5.0e9, 0.0, 0.5, 1e5)
        assert resonance_biases(tls, 4.2e9, DEV) == []

    def test_zero_dipole_signals(self):
        tls = TlsParams(4.0e9, 1e9, 0.0, 1e5)
        with pytest.raises(BiasInsensitiveTlsError):
            resonance_biases(tls, 4.2e9, DEV)

    @given(
        delta0=st.floats(5e8, 6e9),
        delta=st.floats(-2e10, 2e10),
        p_z=st.floats(0.05, 1.2),
        f_target=st.floats(1e9, 8e9),
    )
    @settings(max_examples=200, deadline=None)
    def test_round_trip(self, delta0, delta, p_z, f_target):
        tls = TlsParams(delta0, delta, p_z, 1e5)
        for v in resonance_biases(tls, f_target, DEV):
            f_back = tls_frequency(tls, gate_field(v, DEV))
            assert abs(f_back - f_target) <= 1e-9 * f_target


class TestValidation:
    def test_rejects_bad_device(self):
        with pytest.raises(ConfigurationError):
            DeviceParams(d0=-1e-9)
        with pytest.raises(ConfigurationError):
            DeviceParams(eps_r=0.5)

    def test_rejects_bad_tls(self):
        with pytest.raises(ConfigurationError):
            TlsParams(-1e9, 0.0, 0.5, 1e5)
        with pytest.raises(ConfigurationError):
            TlsParams(1e9, 0.0, -0.5, 1e5)
        with pytest.raises(ConfigurationError):
            TlsParams(1e9, 0.0, 0.5, 0.0)
