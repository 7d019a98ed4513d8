from pathlib import Path
from typing import Callable, Dict, Tuple

import pytest

from buck_trojan_sim.circuit.simcore import simulate
from buck_trojan_sim.circuit.traces import TraceSet
from buck_trojan_sim.cli.commands import load_scenario
from buck_trojan_sim.models.schemas import Scenario
from buck_trojan_sim.scenario import DEFAULT_SCENARIO

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"


@pytest.fixture
def baseline() -> Scenario:
    return DEFAULT_SCENARIO


@pytest.fixture
def shorten() -> Callable[..., Scenario]:
    """Copy of a scenario with a shorter run; other sections may be overridden by keyword"""

    def _shorten(s: Scenario, t_end_us: float = 200.0, record_start_us: float = 100.0, **sections) -> Scenario:
        sim = s.sim.model_copy(update={"t_end_us": t_end_us, "record_start_us": record_start_us})
        updates = {"sim": sim}
        for name, fields in sections.items():
            section = getattr(s, name)
            updates[name] = type(section).model_validate({**section.model_dump(), **fields})
        return s.model_copy(update=updates)

    return _shorten


@pytest.fixture(scope="session")
def shipped() -> Callable[[str], Tuple[Scenario, TraceSet]]:
    """Simulate a scenario from scenarios/ once per test session"""
    cache: Dict[str, Tuple[Scenario, TraceSet]] = {}

    def _run(name: str) -> Tuple[Scenario, TraceSet]:
        if name not in cache:
            s = load_scenario(str(SCENARIO_DIR / f"{name}.cfg"))
            cache[name] = (s, simulate(s))
        return cache[name]

    return _run
