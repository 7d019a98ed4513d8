import logging
from typing import List, Optional

from buck_trojan_sim.analysis import metrics
from buck_trojan_sim.circuit.simcore import simulate
from buck_trojan_sim.circuit.traces import TraceSet
from buck_trojan_sim.models.schemas import CheckResult, ControlMode, Scenario

logger = logging.getLogger(__name__)

RIPPLE_TOLERANCE = 0.15
OUTPUT_TOLERANCE = 0.02
ENERGY_TOLERANCE = 0.01
EFFICIENCY_TOLERANCE_PP = 0.5


def _not_applicable(name: str, s: Scenario) -> Optional[CheckResult]:
    if s.trojan.active:
        return CheckResult(name=name, status="not applicable", detail=f"trojan targets {s.trojan.target.value}")
    if s.pwm.control is ControlMode.PI:
        return CheckResult(name=name, status="not applicable", detail="closed-loop duty")
    return None


def _relative(measured: float, expected: float) -> float:
    return abs(measured - expected) / abs(expected) if expected else abs(measured)


def check_ripple(traces: TraceSet, s: Scenario) -> CheckResult:
    skipped = _not_applicable("ripple", s)
    if skipped:
        return skipped
    simulated = metrics.measure(traces, s).ripple_pp
    analytic = metrics.ripple_analytic(s)
    delta = _relative(simulated, analytic)
    return CheckResult(
        name="ripple",
        status="pass" if delta <= RIPPLE_TOLERANCE else "fail",
        detail=f"simulated {simulated * 1e3:.4g} mVpp, analytic {analytic * 1e3:.4g} mVpp, delta {delta:.1%}",
    )


def check_duty(traces: TraceSet, s: Scenario) -> CheckResult:
    skipped = _not_applicable("duty", s)
    if skipped:
        return skipped
    achieved = metrics.measure(traces, s).v_avg
    predicted = metrics.predicted_output(s.pwm.duty, s)
    delta = _relative(achieved, predicted)
    return CheckResult(
        name="duty",
        status="pass" if delta <= OUTPUT_TOLERANCE else "fail",
        detail=f"duty {s.pwm.duty:.4g}: achieved {achieved:.5g} V, predicted {predicted:.5g} V, delta {delta:.2%}",
    )


def check_energy(traces: TraceSet, s: Scenario) -> CheckResult:
    balance = metrics.energy_balance(traces, s)
    return CheckResult(
        name="energy balance",
        status="pass" if balance.imbalance <= ENERGY_TOLERANCE else "fail",
        detail=f"imbalance {balance.imbalance:.3e} of {balance.energy_in:.4g} J input",
    )


def check_loss_budget(traces: TraceSet, s: Scenario) -> CheckResult:
    skipped = _not_applicable("loss budget", s)
    if skipped:
        return skipped
    measured = metrics.measure(traces, s).efficiency * 100.0
    budgeted = metrics.loss_budget(s).efficiency * 100.0
    delta = abs(measured - budgeted)
    return CheckResult(
        name="loss budget",
        status="pass" if delta <= EFFICIENCY_TOLERANCE_PP else "fail",
        detail=f"simulated {measured:.2f} %, budgeted {budgeted:.2f} %, delta {delta:.2f} pp",
    )


CHECKS = (check_ripple, check_duty, check_energy, check_loss_budget)


def run_checks(s: Scenario, traces: Optional[TraceSet] = None) -> List[CheckResult]:
    """Simulate (unless traces are given) and evaluate every oracle"""
    if traces is None:
        traces = simulate(s)
    results = [check(traces, s) for check in CHECKS]
    for r in results:
        logger.debug(f"Check {r.name}: {r.status} ({r.detail})")
    return results


def all_passed(results: List[CheckResult]) -> bool:
    return all(r.status != "fail" for r in results)
