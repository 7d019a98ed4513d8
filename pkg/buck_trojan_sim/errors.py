from typing import Optional, Sequence


class SimulatorError(Exception):
    """Base error; exit_code is what the CLI returns for it"""
    exit_code: int = 1

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class ScenarioError(SimulatorError):
    """Unreadable, malformed or invalid scenario"""
    exit_code = 2

    def __init__(self, detail: str, line: Optional[int] = None, column: Optional[int] = None):
        if line is not None:
            detail = f"line {line}, column {column or 1}: {detail}"
        super().__init__(detail)
        self.line = line
        self.column = column


class MeasurementError(SimulatorError):
    exit_code = 2


class UnreachableTargetError(SimulatorError):
    exit_code = 2


class SizingError(SimulatorError):
    """No parity capacitance in the search range meets the margin"""
    exit_code = 2

    def __init__(self, detail: str, achievable_margin: float):
        super().__init__(detail)
        self.achievable_margin = achievable_margin


class DivergenceError(SimulatorError):
    """Non-finite state during integration"""
    exit_code = 3

    def __init__(self, time: float, state: Sequence[float]):
        self.time = time
        self.state = tuple(float(v) for v in state)
        super().__init__(f"numerical divergence at t={time:.9g} s, state={self.state}")


class OracleFailure(SimulatorError):
    exit_code = 1
