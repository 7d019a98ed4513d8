import asyncio
import logging
import os
from concurrent.futures import Executor, ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from threading import RLock
from typing import Any, Dict, List, Optional

from buck_trojan_sim.analysis.metrics import summarize
from buck_trojan_sim.circuit.simcore import simulate
from buck_trojan_sim.errors import SimulatorError
from buck_trojan_sim.models.schemas import RunSummary, Scenario, SweepSpec
from buck_trojan_sim.scenario import with_value

logger = logging.getLogger(__name__)

ERROR_OUTCOME = "Error"


@dataclass
class SweepRun:
    """One point of a sweep"""
    index: int
    value: float
    scenario: Scenario
    status: str = "pending"
    summary: Optional[RunSummary] = None
    error: Optional[str] = None
    created_at: datetime = field(default_factory=datetime.now)
    finished_at: Optional[datetime] = None

    def row(self) -> Dict[str, Any]:
        """sweep.csv row: the value then the summary fields"""
        if self.summary is not None:
            return {"value": self.value, **self.summary.model_dump()}
        fields = dict.fromkeys(RunSummary.model_fields)
        fields.update(label=self.scenario.label, outcome=ERROR_OUTCOME, explanation=self.error or "")
        return {"value": self.value, **fields}


def sweep_label(base: str, param: str, value: float) -> str:
    key = param.split(".")[-1]
    return f"{base}__{key}={value:.15g}"


def execute_run(scenario: Scenario, out_dir: str) -> RunSummary:
    """Simulate one scenario and write its trace and summary; runs inside a worker"""
    traces = simulate(scenario)
    summary = summarize(traces, scenario)
    out = Path(out_dir)
    traces.to_csv(out / f"{scenario.label}.csv")
    (out / f"{scenario.label}.summary.json").write_text(summary.model_dump_json(indent=2) + "\n")
    return summary


class SweepManager:
    """Thread-safe registry of sweep runs executed on a worker pool"""

    def __init__(self, jobs: int = 0, executor: Optional[Executor] = None):
        self._runs: Dict[int, SweepRun] = {}
        self._lock = RLock()
        self._jobs = jobs or os.cpu_count() or 1
        self._executor = executor

    def plan(self, base: Scenario, spec: SweepSpec) -> List[SweepRun]:
        """Register one run per value; the scenario key must be numeric"""
        runs = []
        labels = [sweep_label(base.label, spec.param, value) for value in spec.values]
        for index, value in enumerate(spec.values):
            label = labels[index]
            # repeated labels get the run index
            if labels.count(label) > 1:
                label = f"{label}__{index}"
            scenario = with_value(base, spec.param, value)
            scenario = scenario.model_copy(update={"label": label})
            runs.append(SweepRun(index=index, value=value, scenario=scenario))
        with self._lock:
            self._runs = {run.index: run for run in runs}
        logger.info(f"Planned sweep of {spec.param} over {len(runs)} values")
        return runs

    def _executor_for(self, count: int) -> Executor:
        if self._executor is not None:
            return self._executor
        workers = max(1, min(self._jobs, count))
        if workers == 1:
            return ThreadPoolExecutor(max_workers=1)
        return ProcessPoolExecutor(max_workers=workers)

    async def _execute(self, executor: Executor, run: SweepRun, out_dir: str) -> SweepRun:
        loop = asyncio.get_running_loop()
        with self._lock:
            run.status = "running"
        try:
            summary = await loop.run_in_executor(executor, execute_run, run.scenario, out_dir)
            with self._lock:
                run.summary = summary
                run.status = "completed"
            logger.info(f"Run {run.index} ({run.value:g}): {summary.outcome}")
        except SimulatorError as e:
            with self._lock:
                run.status = "error"
                run.error = e.detail
            logger.warning(f"Run {run.index} ({run.value:g}) failed: {e.detail}")
        except Exception as e:
            with self._lock:
                run.status = "error"
                run.error = f"{type(e).__name__}: {e}"
            logger.error(f"Run {run.index} ({run.value:g}) failed: {e}")
        finally:
            run.finished_at = datetime.now()
        return run

    async def run_all(self, out_dir: str) -> List[SweepRun]:
        """Execute every planned run; the result order is the value order"""
        with self._lock:
            runs = [self._runs[i] for i in sorted(self._runs)]
        executor = self._executor_for(len(runs))
        try:
            await asyncio.gather(*(self._execute(executor, run, out_dir) for run in runs))
        finally:
            if executor is not self._executor:
                executor.shutdown(wait=True)
        return runs

    def run(self, base: Scenario, spec: SweepSpec) -> List[SweepRun]:
        self.plan(base, spec)
        return asyncio.run(self.run_all(spec.out_dir))

    def get_run_count(self) -> int:
        with self._lock:
            return len(self._runs)

    def get_run_info(self) -> Dict[int, Dict[str, Any]]:
        with self._lock:
            return {
                index: {
                    "value": run.value,
                    "status": run.status,
                    "outcome": run.summary.outcome if run.summary else None,
                    "error": run.error,
                }
                for index, run in self._runs.items()
            }

    def failed(self) -> List[SweepRun]:
        with self._lock:
            return [run for run in self._runs.values() if run.status == "error"]
