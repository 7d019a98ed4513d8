"""
Scenario files: parse, render, validate.

The format is line oriented::

    # comment
    [pwm]
    duty = 0.848
    control = open_loop

    [trojan]
    target = pmos
    gate = nor
    t_trigger_us = 500

Every key carries its unit in its name and maps one-to-one onto a field of the
matching section model. Missing keys take the baseline defaults; unknown
keys and sections are errors.
"""

import configparser
import logging
import math
import re
from enum import Enum
from typing import Dict, List, Optional, Tuple, Type, Union

from pydantic import ValidationError

from buck_trojan_sim.errors import ScenarioError
from buck_trojan_sim.models.schemas import (
    ConverterParams,
    MitigationConfig,
    PwmParams,
    Scenario,
    SimParams,
    TrojanConfig,
    ScenarioSection,
)

logger = logging.getLogger(__name__)

SECTIONS: Dict[str, Type[ScenarioSection]] = {
    "sim": SimParams,
    "converter": ConverterParams,
    "pwm": PwmParams,
    "trojan": TrojanConfig,
    "mitigation": MitigationConfig,
}

# label is not a SimParams field but is written in [sim]
LABEL_SECTION = "sim"
LABEL_KEY = "label"

# t_release_us accepts `inf`; every other number must be finite
INFINITE_ALLOWED = {("trojan", "t_release_us")}

MIN_STEPS_PER_PERIOD = 200
MIN_WINDOW_PERIODS = 20
MIN_OFF_ON_RATIO = 1000.0

_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}
_SECTION_RE = re.compile(r"^\s*\[([^\]]*)\]")

DEFAULT_SCENARIO = Scenario()


def _new_parser() -> configparser.ConfigParser:
    parser = configparser.ConfigParser(
        delimiters=("=",),
        comment_prefixes=("#",),
        inline_comment_prefixes=("#",),
        strict=True,
        empty_lines_in_values=False,
        interpolation=None,
        default_section="\x00defaults",
    )
    return parser


def _column_of(text: str, line: Optional[int]) -> int:
    if not line:
        return 1
    lines = text.splitlines()
    if line - 1 >= len(lines):
        return 1
    raw = lines[line - 1]
    return len(raw) - len(raw.lstrip()) + 1


def _locate(text: str, section: str, key: Optional[str] = None) -> Tuple[Optional[int], int]:
    """Line/column of a section header or of a key inside it"""
    current = None
    for number, raw in enumerate(text.splitlines(), start=1):
        header = _SECTION_RE.match(raw)
        if header:
            current = header.group(1).strip()
            if key is None and current == section:
                return number, raw.index("[") + 1
            continue
        if key is not None and current == section:
            name = raw.split("=", 1)[0].strip().lower()
            if name == key:
                return number, len(raw) - len(raw.lstrip()) + 1
    return None, 1


def _convert(section: str, key: str, raw: str, annotation) -> object:
    value = raw.strip()
    if isinstance(annotation, type) and issubclass(annotation, Enum):
        try:
            return annotation(value.lower())
        except ValueError:
            allowed = "|".join(member.value for member in annotation)
            raise ValueError(f"type mismatch: [{section}] {key} expects one of {allowed}, got {value!r}")
    if annotation is bool:
        lowered = value.lower()
        if lowered in _TRUE:
            return True
        if lowered in _FALSE:
            return False
        raise ValueError(f"type mismatch: [{section}] {key} expects true|false, got {value!r}")
    if annotation is float:
        try:
            number = float(value)
        except ValueError:
            raise ValueError(f"type mismatch: [{section}] {key} expects a number, got {value!r}")
        return number
    return value


def parse_scenario(text: Union[str, bytes], default_label: Optional[str] = None) -> Scenario:
    """Parse a scenario document; raises ScenarioError for anything that is not a valid Scenario"""
    if isinstance(text, (bytes, bytearray)):
        try:
            text = bytes(text).decode("utf-8")
        except UnicodeDecodeError as e:
            raise ScenarioError(f"syntax error: scenario is not UTF-8 text ({e.reason} at byte {e.start})")
    if "\x00" in text:
        raise ScenarioError("syntax error: NUL byte in scenario text")

    parser = _new_parser()
    try:
        parser.read_string(text)
    except configparser.MissingSectionHeaderError as e:
        raise ScenarioError("syntax error: entry outside of any [section]", e.lineno, _column_of(text, e.lineno))
    except configparser.ParsingError as e:
        line = e.errors[0][0] if e.errors else None
        raise ScenarioError("syntax error: expected `key = value`", line, _column_of(text, line))
    except (configparser.DuplicateSectionError, configparser.DuplicateOptionError) as e:
        line = getattr(e, "lineno", None)
        raise ScenarioError(f"syntax error: {e.message}", line, _column_of(text, line))
    except configparser.Error as e:
        raise ScenarioError(f"syntax error: {e.message}")

    values: Dict[str, Dict[str, object]] = {name: {} for name in SECTIONS}
    label = default_label if default_label is not None else DEFAULT_SCENARIO.label

    for section in parser.sections():
        if section not in SECTIONS:
            line, column = _locate(text, section)
            raise ScenarioError(f"unknown section [{section}]", line, column)
        fields = SECTIONS[section].model_fields
        for key, raw in parser.items(section):
            if section == LABEL_SECTION and key == LABEL_KEY:
                label = raw.strip()
                continue
            if key not in fields:
                line, column = _locate(text, section, key)
                raise ScenarioError(f"unknown key `{key}` in [{section}]", line, column)
            try:
                values[section][key] = _convert(section, key, raw, fields[key].annotation)
            except ValueError as e:
                line, column = _locate(text, section, key)
                raise ScenarioError(str(e), line, column)

    try:
        scenario = Scenario(
            label=label,
            **{name: model.model_validate(values[name]) for name, model in SECTIONS.items()},
        )
    except ValidationError as e:
        raise ScenarioError(f"type mismatch: {e.errors()[0]['msg']}")

    violations = validate_scenario(scenario)
    if violations:
        raise ScenarioError("invariant violation: " + "; ".join(violations))

    logger.debug(f"Parsed scenario {scenario.label!r}")
    return scenario


def _format_value(value: object) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_scenario(scenario: Scenario) -> str:
    """Textual form that parses back to an equal Scenario"""
    lines: List[str] = []
    for name in SECTIONS:
        section = getattr(scenario, name)
        lines.append(f"[{name}]")
        if name == LABEL_SECTION:
            lines.append(f"{LABEL_KEY} = {scenario.label}")
        for key in type(section).model_fields:
            lines.append(f"{key} = {_format_value(getattr(section, key))}")
        lines.append("")
    return "\n".join(lines)


def numeric_keys() -> List[str]:
    """Dotted names of every numeric scenario key"""
    return [
        f"{name}.{key}"
        for name, model in SECTIONS.items()
        for key, info in model.model_fields.items()
        if info.annotation is float
    ]


def with_value(scenario: Scenario, dotted_key: str, value: float) -> Scenario:
    """Copy of the scenario with one numeric key replaced"""
    if dotted_key not in numeric_keys():
        raise ScenarioError(f"`{dotted_key}` is not a numeric scenario key")
    name, key = dotted_key.split(".", 1)
    section = getattr(scenario, name)
    updated = type(section).model_validate({**section.model_dump(), key: float(value)})
    return scenario.model_copy(update={name: updated})


def _finite_violations(scenario: Scenario) -> List[str]:
    found = []
    for name in SECTIONS:
        section = getattr(scenario, name)
        for key, info in type(section).model_fields.items():
            if info.annotation is not float:
                continue
            value = getattr(section, key)
            if math.isnan(value):
                found.append(f"{name}.{key}: must be a number, not NaN")
            elif math.isinf(value) and (name, key) not in INFINITE_ALLOWED:
                found.append(f"{name}.{key}: must be finite")
    return found


def validate_scenario(s: Scenario) -> List[str]:
    """All invariant violations, each naming its field and rule; empty when valid"""
    violations = _finite_violations(s)
    if violations:
        return violations

    cp, pwm, trojan, mit, sim = s.converter, s.pwm, s.trojan, s.mitigation, s.sim

    if cp.vsup <= 0:
        violations.append("converter.vsup_v: vsup must be positive")
    for key in ("l_uh", "c_out_nf", "r_load_ohm", "ron_p_ohm", "ron_n_ohm", "roff_mohm"):
        if getattr(cp, key) <= 0:
            violations.append(f"converter.{key}: must be strictly positive")
    for key in ("esr_l_ohm", "esr_c_ohm", "c_sw_pf"):
        if getattr(cp, key) < 0:
            violations.append(f"converter.{key}: must not be negative")
    if cp.ron_p > 0 and cp.ron_n > 0 and cp.roff < MIN_OFF_ON_RATIO * max(cp.ron_p, cp.ron_n):
        violations.append("converter.roff_mohm: roff/ron ratio below 1000")

    if pwm.freq <= 0:
        violations.append("pwm.f_khz: freq must be positive")
        return violations
    period = pwm.period
    if not 0.0 <= pwm.duty <= 1.0:
        violations.append("pwm.duty: duty ∈ [0,1]")
    if pwm.deadtime < 0:
        violations.append("pwm.deadtime_ns: must not be negative")
    elif pwm.deadtime >= period / 4:
        violations.append("pwm.deadtime_ns: deadtime exceeds quarter period")
    if pwm.driver_delay < 0:
        violations.append("pwm.driver_delay_ns: must not be negative")
    elif pwm.driver_delay >= period:
        violations.append("pwm.driver_delay_ns: driver_delay must be shorter than one period")
    if pwm.vref <= 0:
        violations.append("pwm.vref_v: must be positive")
    if 0.0 < pwm.duty < 1.0:
        edge_budget = pwm.deadtime + 2 * pwm.driver_delay
        if edge_budget >= pwm.duty * period:
            violations.append("pwm.deadtime_ns: deadtime + 2·driver_delay must be shorter than duty·period")
        if edge_budget >= (1 - pwm.duty) * period:
            violations.append("pwm.deadtime_ns: deadtime + 2·driver_delay must be shorter than (1−duty)·period")

    if trojan.active:
        if trojan.t_trigger < 0:
            violations.append("trojan.t_trigger_us: must not be negative")
        if not trojan.t_release > trojan.t_trigger:
            violations.append("trojan.t_release_us: t_release must exceed t_trigger")

    if mit.c_par < 0:
        violations.append("mitigation.parity_cap_pf: must not be negative")
    elif mit.enabled:
        for key in ("r_drv_kohm", "c_gate_pf", "slew_ns"):
            if getattr(mit, key) <= 0:
                violations.append(f"mitigation.{key}: must be positive when the parity capacitor is enabled")
        if mit.t_slew >= period / 4:
            violations.append("mitigation.slew_ns: slew exceeds quarter period")

    if sim.dt <= 0:
        violations.append("sim.dt_ns: dt must be positive")
    elif sim.dt > period / MIN_STEPS_PER_PERIOD:
        violations.append("sim.dt_ns: fewer than 200 steps per switching period")
    if sim.t_end <= 0:
        violations.append("sim.t_end_us: must be positive")
    if sim.record_start < 0:
        violations.append("sim.record_start_us: must not be negative")
    if not sim.record_start < sim.t_end:
        violations.append("sim.record_start_us: record_start must precede t_end")
    elif sim.t_end - sim.record_start < MIN_WINDOW_PERIODS * period * (1 - 1e-9):
        violations.append("sim.record_start_us: measurement window shorter than 20 switching periods")

    if "#" in s.label or "\n" in s.label or "\r" in s.label or s.label != s.label.strip():
        violations.append("label: must be one line without `#` or surrounding spaces")

    return violations
