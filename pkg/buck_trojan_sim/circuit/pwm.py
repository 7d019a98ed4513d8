from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

from buck_trojan_sim.models.schemas import PwmParams

ArrayOrFloat = Union[float, np.ndarray]


def pwm_levels(t: ArrayOrFloat, p: PwmParams, current_duty: float) -> Tuple[ArrayOrFloat, ArrayOrFloat]:
    """
    Conduction commands (pwm0 for the PMOS path, pwm1 for the NMOS path) at time t.

    PMOS conducts for duty·T from the start of every period; NMOS conducts for
    the rest of the period shortened by the dead time at both edges. These are
    conduction commands, not gate voltages: the PMOS active-low inversion is
    applied when the gate net is formed.
    """
    period = p.period
    phase = np.mod(t, period)
    on_time = current_duty * period
    pwm0 = (phase < on_time).astype(np.int8)
    pwm1 = ((phase >= on_time + p.deadtime) & (phase < period - p.deadtime)).astype(np.int8)
    if np.ndim(t) == 0:
        return int(pwm0), int(pwm1)
    return pwm0, pwm1


@dataclass(frozen=True)
class PeriodCommands:
    """Grid-snapped commands for one switching period, steps [start, stop)"""
    index: int
    start: int
    stop: int
    duty: float
    pwm0: np.ndarray
    pwm1: np.ndarray

    def __len__(self) -> int:
        return self.stop - self.start


def period_bounds(index: int, p: PwmParams, dt: float) -> Tuple[int, int]:
    period = p.period
    return int(round(index * period / dt)), int(round((index + 1) * period / dt))


def period_commands(index: int, p: PwmParams, duty: float, dt: float) -> PeriodCommands:
    """
    Commands for every step of period `index`, with the PMOS turn-off edge and
    the dead-band boundaries rounded to the integration grid.
    """
    start, stop = period_bounds(index, p, dt)
    n = stop - start
    on_steps = min(n, int(round(duty * p.period / dt)))
    dead_steps = int(round(p.deadtime / dt))

    steps = np.arange(n)
    pwm0 = (steps < on_steps).astype(np.int8)
    pwm1 = ((steps >= on_steps + dead_steps) & (steps < n - dead_steps)).astype(np.int8)
    return PeriodCommands(index=index, start=start, stop=stop, duty=duty, pwm0=pwm0, pwm1=pwm1)


@dataclass(frozen=True)
class GateLevels:
    """Gate-net logic levels, 1 = rail. PMOS conducts at 0, NMOS at 1."""
    pmos_drive: int
    nmos_drive: int

    @property
    def pmos_conducts(self) -> bool:
        return self.pmos_drive == 0

    @property
    def nmos_conducts(self) -> bool:
        return self.nmos_drive == 1


def nominal_gate_levels(pwm0: ArrayOrFloat, pwm1: ArrayOrFloat) -> Tuple[ArrayOrFloat, ArrayOrFloat]:
    """Gate nets for the given conduction commands (PMOS is active low)"""
    return 1 - pwm0, pwm1
