"""
Steady-state measurements, first-order oracles and outcome classification.
"""

import logging
import math
from typing import Optional, Tuple

import numpy as np
from scipy import optimize

from buck_trojan_sim.circuit.traces import TraceSet
from buck_trojan_sim.errors import MeasurementError, UnreachableTargetError
from buck_trojan_sim.models.schemas import (
    EnergyBalance,
    LossBudget,
    OutcomeClass,
    OutcomeKind,
    RunSummary,
    Scenario,
    SteadyStateMetrics,
)
from buck_trojan_sim.scenario import MIN_WINDOW_PERIODS

logger = logging.getLogger(__name__)

Window = Tuple[float, float]

DISABLED_FRACTION = 0.3
OVERVOLT_FRACTION = 1.08
SEVERE_OUTPUT_FRACTION = 1.5
SEVERE_SWITCH_FRACTION = 2.0
NOMINAL_TOLERANCE = 0.05

DUTY_ITERATIONS = 3
REPORTED_EFFICIENCY = 0.933
REPORTED_RIPPLE_V = 23.8e-3


def _window_indices(traces: TraceSet, s: Scenario, window: Optional[Window]) -> Tuple[int, int]:
    t0, t1 = window if window is not None else (s.sim.record_start, s.sim.t_end)
    i0, i1 = traces.index_at(t0), traces.index_at(t1)
    span = (i1 - i0) * traces.dt
    # tolerate grid rounding of the window edges
    if span < MIN_WINDOW_PERIODS * s.pwm.period * (1 - 1e-6):
        raise MeasurementError(
            f"measurement window of {span:.6g} s holds fewer than {MIN_WINDOW_PERIODS} switching periods"
        )
    return i0, i1


def switching_loss(s: Scenario) -> float:
    """Lumped gate-drive loss c_sw·vsup²·f"""
    cp = s.converter
    return cp.c_sw * cp.vsup ** 2 * s.pwm.freq


def _step_mean(values: np.ndarray, i0: int, i1: int) -> float:
    return float(np.mean(0.5 * (values[i0:i1] + values[i0 + 1 : i1 + 1])))


def measure(traces: TraceSet, s: Scenario, window: Optional[Window] = None) -> SteadyStateMetrics:
    """
    Windowed steady-state figures. Means are trapezoidal over the samples
    spanning the window, matching the mid-step power ledger; extremes
    include both window edges.
    """
    i0, i1 = _window_indices(traces, s, window)
    cp = s.converter
    steps = slice(i0, i1)
    samples = slice(i0, i1 + 1)

    v_out = traces.v_out[samples]
    p_out = float(np.mean(traces.ledger.p_out[steps]))
    p_in = float(np.mean(traces.ledger.p_in[steps])) + switching_loss(s)
    efficiency = p_out / p_in if p_in > 0 else 0.0

    both_on = traces.pmos_on[steps] & traces.nmos_on[steps]
    i_cross = np.clip(traces.v_sw[steps] / cp.ron_n, 0.0, None)
    shoot_through = float(np.sum(cp.vsup * i_cross[both_on]) * traces.dt)

    return SteadyStateMetrics(
        v_avg=_step_mean(traces.v_out, i0, i1),
        ripple_pp=float(np.max(v_out) - np.min(v_out)),
        efficiency=efficiency,
        i_l_avg=_step_mean(traces.i_l, i0, i1),
        v_out_max=float(np.max(v_out)),
        v_out_min=float(np.min(v_out)),
        v_sw_min=float(np.min(traces.v_sw[samples])),
        v_sw_max=float(np.max(traces.v_sw[samples])),
        duty_effective=float(np.mean(traces.pmos_on[steps])),
        shoot_through_energy=shoot_through,
    )


def _series_resistance(duty: float, s: Scenario) -> float:
    cp = s.converter
    return cp.esr_l + duty * cp.ron_p + (1.0 - duty) * cp.ron_n


def duty_for_target(v_target: float, s: Scenario) -> float:
    """Loss-compensated duty for v_target at the scenario's load"""
    cp = s.converter
    i_total = v_target / cp.r_load + cp.i_load
    duty = v_target / cp.vsup
    for _ in range(DUTY_ITERATIONS):
        duty = (v_target + i_total * _series_resistance(min(max(duty, 0.0), 1.0), s)) / cp.vsup
    if duty > 1.0 or duty < 0.0:
        raise UnreachableTargetError(
            f"{v_target:.6g} V needs duty {duty:.6g} from a {cp.vsup:.6g} V supply"
        )
    return duty


def predicted_output(duty: float, s: Scenario) -> float:
    """First-order output voltage for a duty (inverse of duty_for_target)"""
    cp = s.converter
    r = _series_resistance(duty, s)
    return (duty * cp.vsup - cp.i_load * r) / (1.0 + r / cp.r_load)


def ripple_analytic(s: Scenario, duty: Optional[float] = None) -> float:
    """First-order peak-to-peak output ripple: capacitive charge term plus ESR term"""
    cp = s.converter
    duty = s.pwm.duty if duty is None else duty
    freq = s.pwm.freq
    v_target = duty * cp.vsup
    delta_i = v_target * (1.0 - duty) / (cp.l * freq)
    return delta_i / (8.0 * cp.c_out * freq) + delta_i * cp.esr_c


def loss_budget(s: Scenario) -> LossBudget:
    cp = s.converter
    duty = s.pwm.duty
    freq = s.pwm.freq
    v_out = predicted_output(duty, s)
    i_out = v_out / cp.r_load + cp.i_load
    delta_i = duty * cp.vsup * (1.0 - duty) / (cp.l * freq)
    ripple_sq = delta_i ** 2 / 12.0
    return LossBudget(
        p_out=v_out * i_out,
        p_conduction=(i_out ** 2 + ripple_sq) * _series_resistance(duty, s),
        p_esr_c=ripple_sq * cp.esr_c,
        p_off_state=cp.vsup ** 2 / cp.roff,
        p_switching=switching_loss(s),
    )


def calibrate_switching_capacitance(s: Scenario, target_efficiency: float = REPORTED_EFFICIENCY) -> float:
    """c_sw (F) that makes the loss budget hit target_efficiency"""
    budget = loss_budget(s)
    other_losses = budget.p_conduction + budget.p_esr_c + budget.p_off_state
    p_switching = budget.p_out / target_efficiency - budget.p_out - other_losses
    if p_switching < 0:
        ceiling = budget.p_out / (budget.p_out + other_losses)
        raise UnreachableTargetError(
            f"efficiency {target_efficiency:.4g} exceeds the conduction-limited {ceiling:.4g}"
        )
    cp = s.converter
    c_sw = p_switching / (cp.vsup ** 2 * s.pwm.freq)
    logger.debug(f"Calibrated c_sw = {c_sw * 1e12:.1f} pF for {target_efficiency:.1%}")
    return c_sw


def find_ripple_match(
    s: Scenario, target_ripple: float = REPORTED_RIPPLE_V, v_out: float = 1.0
) -> Tuple[float, float]:
    """
    (vsup, duty) whose analytic ripple is target_ripple while the first-order
    output stays at v_out. The loss-compensated drive D·vsup is fixed, so
    the ripple falls monotonically with D.
    """
    cp = s.converter
    v_drive = v_out + (v_out / cp.r_load + cp.i_load) * _series_resistance(0.5, s)

    def excess(duty: float) -> float:
        scaled = s.model_copy(update={"converter": cp.model_copy(update={"vsup_v": v_drive / duty})})
        return ripple_analytic(scaled, duty) - target_ripple

    lower, upper = 1e-3, 1.0 - 1e-9
    if excess(lower) < 0:
        raise UnreachableTargetError(f"ripple of {target_ripple:.4g} V is above the reachable range")
    duty = optimize.brentq(excess, lower, upper, xtol=1e-12)
    return v_drive / duty, duty


def classify(m: SteadyStateMetrics, v_target: float, vsup: float) -> OutcomeClass:
    """Outcome for a run, by the first matching rule"""
    if m.v_avg < DISABLED_FRACTION * v_target:
        return OutcomeClass(
            kind=OutcomeKind.DISABLED,
            explanation=f"mean output {m.v_avg:.4g} V is below {DISABLED_FRACTION:g} of the {v_target:.4g} V target",
        )
    switch_stress = max(abs(m.v_sw_min), m.v_sw_max)
    if switch_stress >= SEVERE_SWITCH_FRACTION * vsup:
        return OutcomeClass(
            kind=OutcomeKind.SEVERE_OVERVOLT,
            explanation=f"switch node reaches {switch_stress:.4g} V, at least {SEVERE_SWITCH_FRACTION:g}x the {vsup:.4g} V supply",
        )
    if m.v_out_max >= SEVERE_OUTPUT_FRACTION * v_target:
        return OutcomeClass(
            kind=OutcomeKind.SEVERE_OVERVOLT,
            explanation=f"output peaks at {m.v_out_max:.4g} V, at least {SEVERE_OUTPUT_FRACTION:g}x the target",
        )
    if m.v_avg >= OVERVOLT_FRACTION * v_target:
        return OutcomeClass(
            kind=OutcomeKind.OVERVOLT,
            explanation=f"mean output {m.v_avg:.4g} V is at least {OVERVOLT_FRACTION:g}x the {v_target:.4g} V target",
        )
    deviation = abs(m.v_avg - v_target)
    if deviation <= NOMINAL_TOLERANCE * v_target and m.ripple_pp <= NOMINAL_TOLERANCE * v_target:
        return OutcomeClass(
            kind=OutcomeKind.NOMINAL,
            explanation=f"mean output {m.v_avg:.4g} V with {m.ripple_pp * 1e3:.3g} mVpp ripple",
        )
    return OutcomeClass(
        kind=OutcomeKind.DEGRADED,
        explanation=f"mean output {m.v_avg:.4g} V off target by {deviation:.3g} V, ripple {m.ripple_pp * 1e3:.3g} mVpp",
    )


def energy_balance(traces: TraceSet, s: Scenario, window: Optional[Window] = None) -> EnergyBalance:
    """Energy totals over the window (the measurement window by default), switching loss on both sides"""
    t0, t1 = window if window is not None else (s.sim.record_start, s.sim.t_end)
    i0, i1 = traces.index_at(t0), traces.index_at(t1)
    ledger = traces.ledger
    dt = traces.dt
    e_switching = switching_loss(s) * (i1 - i0) * dt
    return EnergyBalance(
        energy_in=float(np.sum(ledger.p_in[i0:i1]) * dt) + e_switching,
        energy_out=float(np.sum(ledger.p_out[i0:i1]) * dt),
        energy_dissipated=float(np.sum(ledger.p_dissipated[i0:i1]) * dt) + e_switching,
        energy_stored_change=float(ledger.e_stored[i1] - ledger.e_stored[i0]),
    )


def summarize(traces: TraceSet, s: Scenario, window: Optional[Window] = None) -> RunSummary:
    m = measure(traces, s, window)
    outcome = classify(m, s.pwm.vref, s.converter.vsup)
    return RunSummary(
        label=s.label,
        v_avg_v=m.v_avg,
        ripple_mvpp=m.ripple_pp * 1e3,
        efficiency_pct=m.efficiency * 100.0 if math.isfinite(m.efficiency) else 0.0,
        i_l_avg_ma=m.i_l_avg * 1e3,
        v_sw_min_v=m.v_sw_min,
        v_sw_max_v=m.v_sw_max,
        duty_effective=m.duty_effective,
        outcome=outcome.kind.value,
        explanation=outcome.explanation,
    )
