import math

import numpy as np
import pytest

from buck_trojan_sim.circuit import parity
from buck_trojan_sim.circuit.parity import GateNodeModel
from buck_trojan_sim.errors import SizingError
from buck_trojan_sim.scenario import DEFAULT_SCENARIO, with_value

FREQ = 1e6
DUTY = 0.848


def model(c_par=500e-12, r_drv=10e3, c_gate=5e-12, t_slew=1e-9, vsup=1.2) -> GateNodeModel:
    return GateNodeModel(c_par=c_par, r_drv=r_drv, c_gate=c_gate, t_slew=t_slew, vsup=vsup, threshold=vsup / 2)


class TestRootWaveform:
    def test_plateau(self):
        assert parity.root_waveform(5e-9, 1, 1.2, 1e-9) == (1.2, 0.0)
        assert parity.root_waveform(5e-9, 0, 1.2, 1e-9) == (0.0, 0.0)

    def test_rising_edge_midpoint(self):
        v, slope = parity.root_waveform(0.5e-9, 1, 1.2, 1e-9)
        assert v == pytest.approx(0.6)
        assert slope == pytest.approx(1.2e9)

    def test_falling_edge_midpoint(self):
        v, slope = parity.root_waveform(0.5e-9, 0, 1.2, 1e-9)
        assert v == pytest.approx(0.6)
        assert slope == pytest.approx(-1.2e9)


class TestGateNode:
    def test_from_scenario(self):
        m = GateNodeModel.from_scenario(with_value(DEFAULT_SCENARIO, "mitigation.parity_cap_pf", 500))
        assert m.c_par == pytest.approx(500e-12)
        assert m.r_drv == pytest.approx(10e3)
        assert m.threshold == pytest.approx(0.6)

    def test_equilibrium_at_phase_parity(self):
        assert parity.gate_node_derivative(1.2, 0.0, 1.2, model()) == 0.0
        assert parity.gate_node_derivative(0.0, 0.0, 0.0, model()) == 0.0

    def test_edge_coupling_fraction(self):
        m = model()
        assert m.divider == pytest.approx(0.990, abs=1e-3)
        _, b_slope, _ = parity.gate_node_coefficients(m)
        assert b_slope == pytest.approx(m.divider)

    def test_locked_driver_time_constant(self):
        m = model()
        a, _, _ = parity.gate_node_coefficients(m)
        assert -1.0 / a == pytest.approx(5.05e-6)

    def test_relaxes_toward_driver(self):
        m = model()
        assert parity.gate_node_derivative(1.0, 0.0, 0.0, m) < 0
        assert parity.gate_node_derivative(0.2, 0.0, 1.2, m) > 0


class TestComparator:
    def test_hysteresis_band(self):
        v = np.array([0.604, 0.606])
        np.testing.assert_array_equal(parity.comparator(v, False, 0.6), [False, True])
        v = np.array([0.596, 0.594])
        np.testing.assert_array_equal(parity.comparator(v, True, 0.6), [True, False])

    def test_first_flip(self):
        v = np.array([0.1, 0.3, 0.59, 0.61, 0.9])
        assert parity.first_flip(v, False, 0.6) == 3
        assert parity.first_flip(v[:3], False, 0.6) == -1


class TestMinParityCap:
    def test_hundreds_of_picofarads_at_one_megahertz(self):
        c_min = parity.min_parity_cap(model(), FREQ, DUTY)
        assert 100e-12 < c_min < 500e-12

    def test_five_hundred_picofarads_meets_margin(self):
        assert parity.parity_margin(model(), 500e-12, FREQ, DUTY) >= 0

    def test_result_sits_on_the_criterion(self):
        c_min = parity.min_parity_cap(model(), FREQ, DUTY)
        assert parity.parity_margin(model(), c_min + 2e-12, FREQ, DUTY) >= 0
        assert parity.parity_margin(model(), c_min - 2e-12, FREQ, DUTY) < 0

    def test_higher_frequency_needs_less(self):
        assert parity.min_parity_cap(model(), 10 * FREQ, DUTY) < parity.min_parity_cap(model(), FREQ, DUTY)

    def test_divider_limit_without_droop(self):
        required = 0.6 + 0.1 * 1.2
        expected = 5e-12 * required / (1.2 - required)
        c_min = parity.min_parity_cap(model(r_drv=math.inf), FREQ, DUTY)
        assert c_min == pytest.approx(expected, abs=2e-12)

    def test_no_solution_reports_achievable_swing(self):
        with pytest.raises(SizingError) as e:
            parity.min_parity_cap(model(r_drv=1.0), FREQ, DUTY)
        assert 0 < e.value.achievable_margin < 0.72


class TestPhaseShift:
    def test_disabled(self):
        assert parity.phase_shift_estimate(model(c_par=0.0), FREQ) == 0.0

    def test_default_parts(self):
        assert parity.phase_shift_estimate(model(), FREQ) == pytest.approx(0.505e-9, rel=1e-2)

    def test_unity_divider_limit(self):
        assert parity.phase_shift_estimate(model(c_gate=1e-18), FREQ) == pytest.approx(0.5e-9, rel=1e-6)
