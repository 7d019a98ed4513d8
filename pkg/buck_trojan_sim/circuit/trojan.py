"""
PWM-locking trojan: an OR/NOR gate spliced into one FET gate net.

The trigger condition circuit is reduced to a time window. When triggered, OR
locks the net high and NOR locks it low; untriggered, OR is transparent and
NOR sees an inverted feed so it is transparent as well.
"""

import logging
import math
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

from buck_trojan_sim.circuit.pwm import GateLevels
from buck_trojan_sim.models.schemas import TrojanConfig, TrojanGate, TrojanTarget

logger = logging.getLogger(__name__)

Logic = Union[int, np.ndarray]


@dataclass(frozen=True)
class TriggerSchedule:
    t_trigger: float
    t_release: float = math.inf

    @classmethod
    def from_config(cls, cfg: TrojanConfig) -> "TriggerSchedule":
        return cls(t_trigger=cfg.t_trigger, t_release=cfg.t_release)


@dataclass(frozen=True)
class TriggerStructure:
    gates: int
    transistors: int
    description: str


# lock gate (OR/NOR) plus the inverter on its PWM feed
TRIGGER_STRUCTURE = TriggerStructure(
    gates=2,
    transistors=7,
    description="OR/NOR lock gate on the FET gate net, inverter on its PWM feed",
)


def trigger_active(t: Union[float, np.ndarray], sched: TriggerSchedule) -> Logic:
    active = (np.asarray(t) >= sched.t_trigger) & (np.asarray(t) < sched.t_release)
    if np.ndim(active) == 0:
        return int(active)
    return active.astype(np.int8)


def corrupt(pwm: Logic, trig: Logic, gate: TrojanGate) -> Logic:
    """Output of the inserted gate for its two inputs"""
    either = np.bitwise_or(pwm, trig)
    if gate is TrojanGate.NOR:
        return 1 - either
    return either


def _lock_level(gate: TrojanGate) -> int:
    return 1 if gate is TrojanGate.OR else 0


def _forces_conduction(cfg: TrojanConfig) -> bool:
    level = _lock_level(cfg.gate)
    if cfg.target is TrojanTarget.PMOS:
        return level == 0
    return level == 1


def corrupt_nets(
    gate_p: np.ndarray, gate_n: np.ndarray, trig: np.ndarray, cfg: TrojanConfig
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    Apply the trojan to both gate nets over a block of steps.

    Returns the corrupted nets and, per net, a flag marking the steps at which
    the net is held by the trojan rather than by the PWM logic.
    """
    trig = np.asarray(trig, dtype=np.int8)
    held_p = np.zeros_like(trig, dtype=bool)
    held_n = np.zeros_like(trig, dtype=bool)
    if not cfg.active:
        return gate_p, gate_n, held_p, held_n

    targets_p = cfg.target is TrojanTarget.PMOS
    net = gate_p if targets_p else gate_n
    # NOR gets an inverted feed so that it is transparent while dormant
    feed = 1 - net if cfg.gate is TrojanGate.NOR else net
    locked = np.asarray(corrupt(feed, trig, cfg.gate), dtype=np.int8)
    held = trig.astype(bool)

    if targets_p:
        gate_p, held_p = locked, held
    else:
        gate_n, held_n = locked, held

    if cfg.suppress_complement and _forces_conduction(cfg):
        # companion gate holds the opposite FET off while the target is forced on
        if targets_p:
            gate_n = np.where(held, 0, gate_n).astype(np.int8)
            held_n = held
        else:
            gate_p = np.where(held, 1, gate_p).astype(np.int8)
            held_p = held
    return gate_p, gate_n, held_p, held_n


def apply_trojan(drive: GateLevels, t: float, cfg: TrojanConfig) -> GateLevels:
    """Corrupt the targeted gate net at time t; target=None leaves the drive unchanged"""
    if not cfg.active:
        return drive
    trig = np.array([trigger_active(t, TriggerSchedule.from_config(cfg))], dtype=np.int8)
    gate_p, gate_n, _, _ = corrupt_nets(
        np.array([drive.pmos_drive], dtype=np.int8),
        np.array([drive.nmos_drive], dtype=np.int8),
        trig,
        cfg,
    )
    return GateLevels(pmos_drive=int(gate_p[0]), nmos_drive=int(gate_n[0]))
