from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Tuple, Union

import numpy as np

CSV_COLUMNS = ("t_s", "v_out", "v_sw", "i_l", "v_c", "v_gate_p", "v_gate_n", "trig", "i_supply")
CSV_FORMAT = "%.9g"


@dataclass
class PowerLedger:
    """Mid-step powers of step k (from sample k to k+1) and stored energy per sample"""
    p_in: np.ndarray
    p_out: np.ndarray
    p_dissipated: np.ndarray
    e_stored: np.ndarray


@dataclass
class TraceSet:
    """Uniformly sampled waveforms; sample k is at t = k·dt"""
    dt: float
    t: np.ndarray
    v_out: np.ndarray
    v_sw: np.ndarray
    i_l: np.ndarray
    v_c: np.ndarray
    v_gate_p: np.ndarray
    v_gate_n: np.ndarray
    trig: np.ndarray
    i_supply: np.ndarray
    pmos_on: np.ndarray
    nmos_on: np.ndarray
    ledger: PowerLedger
    duty_history: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        n = len(self.t)
        lengths = {name: len(getattr(self, name)) for name in self.columns()}
        lengths["pmos_on"] = len(self.pmos_on)
        lengths["nmos_on"] = len(self.nmos_on)
        if any(length != n for length in lengths.values()):
            raise ValueError(f"trace columns differ in length: {lengths}")

    @staticmethod
    def columns() -> Tuple[str, ...]:
        return ("t",) + CSV_COLUMNS[1:]

    def __len__(self) -> int:
        return len(self.t)

    def index_at(self, time: float) -> int:
        """Sample index of `time`, rounded to the grid and clipped to the trace"""
        return int(min(max(round(time / self.dt), 0), len(self.t) - 1))

    def as_dict(self) -> Dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in self.columns()}

    def to_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        table = np.column_stack([np.asarray(getattr(self, name), dtype=float) for name in self.columns()])
        np.savetxt(path, table, fmt=CSV_FORMAT, delimiter=",", header=",".join(CSV_COLUMNS), comments="")
        return path
