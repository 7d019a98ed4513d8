import csv
import logging
from pathlib import Path
from typing import List

from buck_trojan_sim.analysis.metrics import summarize
from buck_trojan_sim.analysis.oracles import all_passed, run_checks
from buck_trojan_sim.circuit import parity
from buck_trojan_sim.circuit.simcore import simulate
from buck_trojan_sim.circuit.trojan import TRIGGER_STRUCTURE
from buck_trojan_sim.errors import OracleFailure, ScenarioError
from buck_trojan_sim.models.schemas import RunSummary, Scenario, SweepSpec
from buck_trojan_sim.scenario import parse_scenario
from buck_trojan_sim.sweep import SweepManager

logger = logging.getLogger(__name__)

SWEEP_FILE = "sweep.csv"


def load_scenario(path: str) -> Scenario:
    """Read a scenario file; the label defaults to the file stem"""
    source = Path(path)
    try:
        data = source.read_bytes()
    except OSError as e:
        raise ScenarioError(f"cannot read scenario {path}: {e.strerror or e}")
    return parse_scenario(data, default_label=source.stem)


def parse_values(text: str) -> List[float]:
    items = [item.strip() for item in text.split(",") if item.strip()]
    try:
        return [float(item) for item in items]
    except ValueError as e:
        raise ScenarioError(f"--values must be a comma-separated list of numbers ({e})")


def _describe(s: Scenario):
    if s.trojan.active:
        logger.info(
            f"Trojan: {s.trojan.gate.value.upper()} lock on the {s.trojan.target.value.upper()} gate net "
            f"({TRIGGER_STRUCTURE.gates} gates, {TRIGGER_STRUCTURE.transistors} transistors), "
            f"trigger at {s.trojan.t_trigger_us:g} us"
        )
    if s.mitigation.enabled:
        model = parity.GateNodeModel.from_scenario(s)
        shift = parity.phase_shift_estimate(model, s.pwm.freq)
        logger.info(f"Parity capacitor {s.mitigation.parity_cap_pf:g} pF, estimated gate phase shift {shift * 1e9:.3g} ns")


def write_summary(summary: RunSummary, out_dir: Path) -> Path:
    path = out_dir / f"{summary.label}.summary.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(summary.model_dump_json(indent=2) + "\n")
    return path


def cmd_run(scenario_path: str, out: str) -> int:
    s = load_scenario(scenario_path)
    _describe(s)
    traces = simulate(s)
    summary = summarize(traces, s)

    out_dir = Path(out)
    csv_path = traces.to_csv(out_dir / f"{s.label}.csv")
    summary_path = write_summary(summary, out_dir)
    logger.info(f"Wrote {csv_path} and {summary_path}")

    print(summary.model_dump_json(indent=2))
    return 0


def cmd_sweep(scenario_path: str, param: str, values: str, out: str, jobs: int = 0) -> int:
    s = load_scenario(scenario_path)
    parsed = parse_values(values)
    if not parsed:
        raise ScenarioError("--values must name at least one value")
    spec = SweepSpec(param=param, values=parsed, out_dir=out)

    manager = SweepManager(jobs=jobs)
    runs = manager.run(s, spec)

    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    fieldnames = ["value", *RunSummary.model_fields]
    with open(out_dir / SWEEP_FILE, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=fieldnames, lineterminator="\n")
        writer.writeheader()
        for run in runs:
            writer.writerow(run.row())

    for run in runs:
        row = run.row()
        print(f"{param}={run.value:g}: {row['outcome']}")
    failed = manager.failed()
    if failed:
        logger.warning(f"{len(failed)} of {len(runs)} sweep runs failed, see {out_dir / SWEEP_FILE}")
    return 0


def cmd_check(scenario_path: str) -> int:
    s = load_scenario(scenario_path)
    results = run_checks(s)
    for r in results:
        print(f"{r.name}: {r.status} ({r.detail})")
    if not all_passed(results):
        deltas = "; ".join(f"{r.name}: {r.detail}" for r in results if r.status == "fail")
        raise OracleFailure(f"oracle checks failed: {deltas}")
    return 0
