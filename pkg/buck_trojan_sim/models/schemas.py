import math
from enum import Enum
from typing import List, Literal

from pydantic import BaseModel, ConfigDict, Field


class ControlMode(str, Enum):
    OPEN_LOOP = "open_loop"
    PI = "pi"


class TrojanTarget(str, Enum):
    NONE = "none"
    PMOS = "pmos"
    NMOS = "nmos"


class TrojanGate(str, Enum):
    OR = "or"
    NOR = "nor"


class OutcomeKind(str, Enum):
    NOMINAL = "Nominal"
    OVERVOLT = "Overvolt"
    SEVERE_OVERVOLT = "SevereOvervolt"
    DISABLED = "Disabled"
    DEGRADED = "Degraded"


class ScenarioSection(BaseModel):
    """Scenario sections hold the file's unit-suffixed numbers; SI values are properties"""
    model_config = ConfigDict(frozen=True, extra="forbid")


class ConverterParams(ScenarioSection):
    vsup_v: float = Field(default=1.2, description="Supply rail")
    l_uh: float = Field(default=55.5, description="Inductance")
    esr_l_ohm: float = Field(default=0.777, description="Inductor series resistance")
    c_out_nf: float = Field(default=40.0, description="Output capacitance")
    esr_c_ohm: float = Field(default=0.358, description="Capacitor series resistance")
    r_load_ohm: float = Field(default=100.0, description="Resistive load")
    i_load_ma: float = Field(default=0.0, description="Constant current sink in parallel with the load")
    ron_p_ohm: float = 1.0
    ron_n_ohm: float = 1.0
    roff_mohm: float = 1.0
    # loss-budget calibration for 93.3 % at the baseline, see analysis.metrics.calibrate_switching_capacitance
    c_sw_pf: float = Field(default=373.0, description="Lumped switching-loss capacitance")
    body_diodes: bool = False

    @property
    def vsup(self) -> float:
        return self.vsup_v

    @property
    def l(self) -> float:
        return self.l_uh * 1e-6

    @property
    def esr_l(self) -> float:
        return self.esr_l_ohm

    @property
    def c_out(self) -> float:
        return self.c_out_nf * 1e-9

    @property
    def esr_c(self) -> float:
        return self.esr_c_ohm

    @property
    def r_load(self) -> float:
        return self.r_load_ohm

    @property
    def i_load(self) -> float:
        return self.i_load_ma * 1e-3

    @property
    def ron_p(self) -> float:
        return self.ron_p_ohm

    @property
    def ron_n(self) -> float:
        return self.ron_n_ohm

    @property
    def roff(self) -> float:
        return self.roff_mohm * 1e6

    @property
    def c_sw(self) -> float:
        return self.c_sw_pf * 1e-12


class PwmParams(ScenarioSection):
    f_khz: float = Field(default=1000.0, description="Switching frequency")
    duty: float = Field(default=0.848, description="Commanded PMOS conduction fraction")
    deadtime_ns: float = 0.0
    driver_delay_ns: float = 2.0
    control: ControlMode = ControlMode.OPEN_LOOP
    vref_v: float = 1.0
    kp: float = 0.05
    ki: float = 0.0

    @property
    def freq(self) -> float:
        return self.f_khz * 1e3

    @property
    def period(self) -> float:
        return 1.0 / self.freq

    @property
    def deadtime(self) -> float:
        return self.deadtime_ns * 1e-9

    @property
    def driver_delay(self) -> float:
        return self.driver_delay_ns * 1e-9

    @property
    def vref(self) -> float:
        return self.vref_v


class TrojanConfig(ScenarioSection):
    target: TrojanTarget = TrojanTarget.NONE
    gate: TrojanGate = TrojanGate.OR
    t_trigger_us: float = 500.0
    t_release_us: float = math.inf
    suppress_complement: bool = False

    @property
    def t_trigger(self) -> float:
        return self.t_trigger_us * 1e-6

    @property
    def t_release(self) -> float:
        return self.t_release_us * 1e-6

    @property
    def active(self) -> bool:
        return self.target is not TrojanTarget.NONE


class MitigationConfig(ScenarioSection):
    parity_cap_pf: float = Field(default=0.0, description="Parity capacitor, 0 disables mitigation")
    r_drv_kohm: float = 10.0
    c_gate_pf: float = 5.0
    slew_ns: float = 1.0
    trojan_downstream_of_cap: bool = False

    @property
    def c_par(self) -> float:
        return self.parity_cap_pf * 1e-12

    @property
    def r_drv(self) -> float:
        return self.r_drv_kohm * 1e3

    @property
    def c_gate(self) -> float:
        return self.c_gate_pf * 1e-12

    @property
    def t_slew(self) -> float:
        return self.slew_ns * 1e-9

    @property
    def enabled(self) -> bool:
        return self.parity_cap_pf > 0


class SimParams(ScenarioSection):
    t_end_us: float = 1000.0
    dt_ns: float = 1.0
    record_start_us: float = 900.0

    @property
    def t_end(self) -> float:
        return self.t_end_us * 1e-6

    @property
    def dt(self) -> float:
        return self.dt_ns * 1e-9

    @property
    def record_start(self) -> float:
        return self.record_start_us * 1e-6


class Scenario(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    converter: ConverterParams = Field(default_factory=ConverterParams)
    pwm: PwmParams = Field(default_factory=PwmParams)
    trojan: TrojanConfig = Field(default_factory=TrojanConfig)
    mitigation: MitigationConfig = Field(default_factory=MitigationConfig)
    sim: SimParams = Field(default_factory=SimParams)
    label: str = "baseline"


class OutcomeClass(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: OutcomeKind
    explanation: str


class SteadyStateMetrics(BaseModel):
    model_config = ConfigDict(frozen=True)

    v_avg: float
    ripple_pp: float
    efficiency: float
    i_l_avg: float
    v_out_max: float
    v_out_min: float
    v_sw_min: float
    v_sw_max: float
    duty_effective: float
    shoot_through_energy: float


class EnergyBalance(BaseModel):
    model_config = ConfigDict(frozen=True)

    energy_in: float
    energy_out: float
    energy_dissipated: float
    energy_stored_change: float

    @property
    def imbalance(self) -> float:
        """Residual as a fraction of input energy"""
        residual = self.energy_in - self.energy_out - self.energy_dissipated - self.energy_stored_change
        if self.energy_in == 0:
            return abs(residual)
        return abs(residual) / abs(self.energy_in)


class LossBudget(BaseModel):
    model_config = ConfigDict(frozen=True)

    p_out: float
    p_conduction: float
    p_esr_c: float
    p_off_state: float
    p_switching: float

    @property
    def p_in(self) -> float:
        return self.p_out + self.p_conduction + self.p_esr_c + self.p_off_state + self.p_switching

    @property
    def efficiency(self) -> float:
        return self.p_out / self.p_in


class RunSummary(BaseModel):
    label: str
    v_avg_v: float
    ripple_mvpp: float
    efficiency_pct: float
    i_l_avg_ma: float
    v_sw_min_v: float
    v_sw_max_v: float
    duty_effective: float
    outcome: str
    explanation: str


class CheckResult(BaseModel):
    name: str
    status: Literal["pass", "fail", "not applicable"]
    detail: str = ""


class SweepSpec(BaseModel):
    param: str = Field(..., description="Dotted scenario key, e.g. mitigation.parity_cap_pf")
    values: List[float] = Field(..., min_length=1)
    out_dir: str = "./out"
