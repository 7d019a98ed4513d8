"""
Parity-capacitor countermeasure.

A capacitor from the PWM root to the FET gate net couples every true PWM edge
onto the gate. While the gate follows the root no current flows through it;
when a locked driver holds the net against the root, the coupled edges still
carry the gate across the switching threshold.
"""

import logging
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy import optimize

from buck_trojan_sim.errors import SizingError
from buck_trojan_sim.models.schemas import Scenario

logger = logging.getLogger(__name__)

HYSTERESIS_V = 0.010
SIZING_MARGIN = 0.10
SIZING_UPPER_F = 1e-6
SIZING_TOLERANCE_F = 1e-12


@dataclass(frozen=True)
class GateNodeModel:
    c_par: float
    r_drv: float
    c_gate: float
    t_slew: float
    vsup: float
    threshold: float

    @classmethod
    def from_scenario(cls, s: Scenario) -> "GateNodeModel":
        mit = s.mitigation
        vsup = s.converter.vsup
        return cls(
            c_par=mit.c_par,
            r_drv=mit.r_drv,
            c_gate=mit.c_gate,
            t_slew=mit.t_slew,
            vsup=vsup,
            threshold=vsup / 2,
        )

    @property
    def c_total(self) -> float:
        return self.c_par + self.c_gate

    @property
    def divider(self) -> float:
        """Fraction of a root step that appears on the gate"""
        return self.c_par / self.c_total


def root_waveform(t_since_edge: float, level: int, vsup: float, t_slew: float) -> Tuple[float, float]:
    """
    PWM-root voltage and slope, `t_since_edge` after the last command edge.

    Edges are linear ramps of duration t_slew toward `level`·vsup.
    """
    target = vsup if level else 0.0
    if t_since_edge >= t_slew:
        return target, 0.0
    slope = vsup / t_slew
    if level:
        return slope * t_since_edge, slope
    return vsup - slope * t_since_edge, -slope


def gate_node_coefficients(m: GateNodeModel) -> Tuple[float, float, float]:
    """(a, b_slope, b_logic) with dv_g/dt = a·v_g + b_slope·dv_root/dt + b_logic·v_logic"""
    c_total = m.c_total
    return -1.0 / (m.r_drv * c_total), m.c_par / c_total, 1.0 / (m.r_drv * c_total)


def gate_node_derivative(v_g: float, v_root_slope: float, v_logic: float, m: GateNodeModel) -> float:
    a, b_slope, b_logic = gate_node_coefficients(m)
    return a * v_g + b_slope * v_root_slope + b_logic * v_logic


def comparator(v_g: np.ndarray, high: bool, threshold: float) -> np.ndarray:
    """Comparator output along a trajectory, starting from `high`, ignoring flips after the first"""
    half = HYSTERESIS_V / 2
    if high:
        return ~(v_g < threshold - half)
    return v_g > threshold + half


def first_flip(v_g: np.ndarray, high: bool, threshold: float) -> int:
    """Index of the first sample at which the comparator leaves `high`, or -1"""
    flipped = comparator(v_g, high, threshold) != high
    hits = np.flatnonzero(flipped)
    return int(hits[0]) if hits.size else -1


def parity_margin(m: GateNodeModel, c_par: float, freq: float, duty: float) -> float:
    """
    Coupled swing left at the end of the longest drive phase against a locked
    driver, minus the required threshold-plus-margin level.
    """
    t_phase = max(duty, 1.0 - duty) / freq
    c_total = c_par + m.c_gate
    droop = math.exp(-t_phase / (m.r_drv * c_total)) if math.isfinite(m.r_drv) else 1.0
    required = m.threshold + SIZING_MARGIN * m.vsup
    return m.vsup * (c_par / c_total) * droop - required


def min_parity_cap(m: GateNodeModel, freq: float, duty: float) -> float:
    """Smallest parity capacitance (c_par of `m` ignored) meeting the crossing margin"""
    lower, upper = m.c_gate, SIZING_UPPER_F

    def margin(c: float) -> float:
        return parity_margin(m, c, freq, duty)

    if margin(lower) >= 0:
        return lower
    if margin(upper) < 0:
        achievable = margin(upper) + m.threshold + SIZING_MARGIN * m.vsup
        raise SizingError(
            f"no parity capacitance up to {SIZING_UPPER_F:.3g} F crosses the threshold with margin; "
            f"achievable swing at the limit is {achievable:.4g} V",
            achievable_margin=achievable,
        )
    c_min = optimize.bisect(margin, lower, upper, xtol=SIZING_TOLERANCE_F)
    logger.debug(f"Minimum parity capacitance {c_min * 1e12:.1f} pF at {freq:.4g} Hz")
    return c_min


def phase_shift_estimate(m: GateNodeModel, freq: float) -> float:
    """Threshold-crossing delay of the gate behind the root edge (trojan-free, mitigated)"""
    if m.c_par <= 0:
        return 0.0
    delay = m.t_slew * m.threshold / (m.vsup * m.divider)
    return min(delay, 0.5 / freq)
