import numpy as np
import pytest

from buck_trojan_sim.circuit.pwm import GateLevels
from buck_trojan_sim.circuit.trojan import (
    TRIGGER_STRUCTURE,
    TriggerSchedule,
    apply_trojan,
    corrupt,
    corrupt_nets,
    trigger_active,
)
from buck_trojan_sim.models.schemas import TrojanConfig, TrojanGate, TrojanTarget

NETS_P = np.array([1, 1, 0, 0, 1, 0], dtype=np.int8)
NETS_N = np.array([0, 0, 1, 1, 0, 1], dtype=np.int8)


class TestTruthTable:
    @pytest.mark.parametrize(
        "pwm,trig,or_out,nor_out",
        [(0, 0, 0, 1), (0, 1, 1, 0), (1, 0, 1, 0), (1, 1, 1, 0)],
    )
    def test_gates(self, pwm, trig, or_out, nor_out):
        assert corrupt(pwm, trig, TrojanGate.OR) == or_out
        assert corrupt(pwm, trig, TrojanGate.NOR) == nor_out


class TestTrigger:
    def test_half_open_window(self):
        sched = TriggerSchedule(t_trigger=5e-6, t_release=8e-6)
        assert trigger_active(4.999e-6, sched) == 0
        assert trigger_active(5e-6, sched) == 1
        assert trigger_active(7.999e-6, sched) == 1
        assert trigger_active(8e-6, sched) == 0

    def test_never_released_by_default(self):
        sched = TriggerSchedule.from_config(TrojanConfig(target=TrojanTarget.PMOS))
        assert trigger_active(1.0, sched) == 1

    def test_structure(self):
        assert TRIGGER_STRUCTURE.gates == 2
        assert TRIGGER_STRUCTURE.transistors == 7


class TestCorruptNets:
    @pytest.mark.parametrize("target", [TrojanTarget.PMOS, TrojanTarget.NMOS])
    @pytest.mark.parametrize("gate", [TrojanGate.OR, TrojanGate.NOR])
    def test_dormant_is_transparent(self, target, gate):
        cfg = TrojanConfig(target=target, gate=gate, suppress_complement=True)
        trig = np.zeros(len(NETS_P), dtype=np.int8)
        gate_p, gate_n, held_p, held_n = corrupt_nets(NETS_P, NETS_N, trig, cfg)
        np.testing.assert_array_equal(gate_p, NETS_P)
        np.testing.assert_array_equal(gate_n, NETS_N)
        assert not held_p.any() and not held_n.any()

    def test_pmos_locked_low_holds_nmos_off(self):
        cfg = TrojanConfig(target=TrojanTarget.PMOS, gate=TrojanGate.NOR, suppress_complement=True)
        trig = np.ones(len(NETS_P), dtype=np.int8)
        gate_p, gate_n, held_p, held_n = corrupt_nets(NETS_P, NETS_N, trig, cfg)
        assert not gate_p.any()
        assert not gate_n.any()
        assert held_p.all() and held_n.all()

    def test_pmos_locked_low_without_suppression(self):
        cfg = TrojanConfig(target=TrojanTarget.PMOS, gate=TrojanGate.NOR)
        trig = np.ones(len(NETS_P), dtype=np.int8)
        gate_p, gate_n, _, held_n = corrupt_nets(NETS_P, NETS_N, trig, cfg)
        assert not gate_p.any()
        np.testing.assert_array_equal(gate_n, NETS_N)
        assert not held_n.any()

    def test_suppression_inert_when_target_forced_off(self):
        cfg = TrojanConfig(target=TrojanTarget.PMOS, gate=TrojanGate.OR, suppress_complement=True)
        trig = np.ones(len(NETS_P), dtype=np.int8)
        gate_p, gate_n, _, held_n = corrupt_nets(NETS_P, NETS_N, trig, cfg)
        assert gate_p.all()
        np.testing.assert_array_equal(gate_n, NETS_N)
        assert not held_n.any()

    def test_nmos_locked_high_holds_pmos_off(self):
        cfg = TrojanConfig(target=TrojanTarget.NMOS, gate=TrojanGate.OR, suppress_complement=True)
        trig = np.ones(len(NETS_N), dtype=np.int8)
        gate_p, gate_n, held_p, _ = corrupt_nets(NETS_P, NETS_N, trig, cfg)
        assert gate_n.all()
        assert gate_p.all()
        assert held_p.all()

    def test_partial_trigger(self):
        cfg = TrojanConfig(target=TrojanTarget.NMOS, gate=TrojanGate.NOR)
        trig = np.array([0, 0, 0, 1, 1, 1], dtype=np.int8)
        _, gate_n, _, held_n = corrupt_nets(NETS_P, NETS_N, trig, cfg)
        np.testing.assert_array_equal(gate_n, [0, 0, 1, 0, 0, 0])
        np.testing.assert_array_equal(held_n, trig.astype(bool))


class TestApplyTrojan:
    def test_no_target_is_identity(self):
        drive = GateLevels(pmos_drive=0, nmos_drive=0)
        assert apply_trojan(drive, 1.0, TrojanConfig()) == drive

    def test_before_trigger_is_identity(self):
        drive = GateLevels(pmos_drive=1, nmos_drive=1)
        cfg = TrojanConfig(target=TrojanTarget.NMOS, gate=TrojanGate.NOR, t_trigger_us=500)
        assert apply_trojan(drive, 100e-6, cfg) == drive

    def test_after_trigger_locks(self):
        drive = GateLevels(pmos_drive=1, nmos_drive=1)
        cfg = TrojanConfig(target=TrojanTarget.NMOS, gate=TrojanGate.NOR, t_trigger_us=500)
        locked = apply_trojan(drive, 600e-6, cfg)
        assert locked.nmos_drive == 0
        assert not locked.nmos_conducts
