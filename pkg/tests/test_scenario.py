import math

import pytest

from buck_trojan_sim.errors import ScenarioError
from buck_trojan_sim.models.schemas import ControlMode, Scenario, TrojanGate, TrojanTarget
from buck_trojan_sim.scenario import (
    DEFAULT_SCENARIO,
    numeric_keys,
    parse_scenario,
    render_scenario,
    validate_scenario,
    with_value,
)
from tests.conftest import SCENARIO_DIR


class TestParse:
    def test_empty_document_gives_defaults(self):
        assert parse_scenario("") == DEFAULT_SCENARIO

    def test_default_label_used_when_absent(self):
        assert parse_scenario("[pwm]\nduty = 0.5\n", default_label="run7").label == "run7"

    def test_label_key_wins_over_default(self):
        s = parse_scenario("[sim]\nlabel = attack\n", default_label="file_stem")
        assert s.label == "attack"

    def test_values_and_enums(self):
        text = (
            "# attack\n"
            "[pwm]\n"
            "duty = 0.5  # half\n"
            "control = PI\n"
            "[trojan]\n"
            "target = pmos\n"
            "gate = nor\n"
            "suppress_complement = yes\n"
        )
        s = parse_scenario(text)
        assert s.pwm.duty == 0.5
        assert s.pwm.control is ControlMode.PI
        assert s.trojan.target is TrojanTarget.PMOS
        assert s.trojan.gate is TrojanGate.NOR
        assert s.trojan.suppress_complement is True

    def test_si_properties(self):
        s = parse_scenario("[converter]\nl_uh = 55.5\nc_out_nf = 40\n")
        assert s.converter.l == pytest.approx(55.5e-6)
        assert s.converter.c_out == pytest.approx(40e-9)
        assert s.converter.roff == pytest.approx(1e6)

    def test_release_may_be_infinite(self):
        s = parse_scenario("[trojan]\ntarget = nmos\nt_release_us = inf\n")
        assert math.isinf(s.trojan.t_release)

    def test_bytes_accepted(self):
        assert parse_scenario(b"[pwm]\nduty = 0.25\n").pwm.duty == 0.25


class TestParseErrors:
    def test_unknown_key_reports_position(self):
        with pytest.raises(ScenarioError) as e:
            parse_scenario("[pwm]\nbogus = 1\n")
        assert "unknown key" in e.value.detail
        assert e.value.line == 2
        assert e.value.detail.startswith("line 2, column 1")

    def test_unknown_section(self):
        with pytest.raises(ScenarioError) as e:
            parse_scenario("[pwm]\nduty = 0.5\n[gizmo]\nx = 1\n")
        assert "unknown section" in e.value.detail
        assert e.value.line == 3

    def test_type_mismatch(self):
        with pytest.raises(ScenarioError, match="type mismatch"):
            parse_scenario("[pwm]\nduty = lots\n")

    def test_bad_enum(self):
        with pytest.raises(ScenarioError, match="type mismatch"):
            parse_scenario("[trojan]\ngate = xor\n")

    def test_entry_outside_section(self):
        with pytest.raises(ScenarioError, match="syntax error") as e:
            parse_scenario("duty = 0.5\n")
        assert e.value.line == 1

    def test_not_utf8(self):
        with pytest.raises(ScenarioError, match="syntax error"):
            parse_scenario(b"[pwm]\nduty = \xff\n")

    def test_duty_out_of_range(self):
        with pytest.raises(ScenarioError, match="invariant violation") as e:
            parse_scenario("[pwm]\nduty = 1.5\n")
        assert "pwm.duty" in e.value.detail

    def test_coarse_step(self):
        with pytest.raises(ScenarioError, match="fewer than 200 steps"):
            parse_scenario("[sim]\ndt_ns = 10\n")

    def test_infinite_end_time_rejected(self):
        with pytest.raises(ScenarioError, match="sim.t_end_us"):
            parse_scenario("[sim]\nt_end_us = inf\n")

    def test_release_before_trigger(self):
        with pytest.raises(ScenarioError, match="t_release must exceed t_trigger"):
            parse_scenario("[trojan]\ntarget = pmos\nt_trigger_us = 500\nt_release_us = 400\n")

    def test_short_window(self):
        with pytest.raises(ScenarioError, match="20 switching periods"):
            parse_scenario("[sim]\nrecord_start_us = 990\n")


class TestValidate:
    def test_default_is_valid(self):
        assert validate_scenario(DEFAULT_SCENARIO) == []

    def test_reports_every_violation(self):
        s = with_value(with_value(DEFAULT_SCENARIO, "converter.l_uh", -1.0), "pwm.duty", 2.0)
        violations = validate_scenario(s)
        assert any(v.startswith("converter.l_uh") for v in violations)
        assert any(v.startswith("pwm.duty") for v in violations)

    def test_off_resistance_ratio(self):
        s = with_value(DEFAULT_SCENARIO, "converter.roff_mohm", 1e-4)
        assert "converter.roff_mohm: roff/ron ratio below 1000" in validate_scenario(s)

    def test_zero_losses_allowed(self):
        s = DEFAULT_SCENARIO
        for key in ("converter.esr_l_ohm", "converter.esr_c_ohm", "converter.c_sw_pf"):
            s = with_value(s, key, 0.0)
        assert validate_scenario(s) == []

    @pytest.mark.parametrize("duty", [0.0, 1.0])
    def test_driver_delay_bounded_at_full_duty(self, duty):
        s = with_value(with_value(DEFAULT_SCENARIO, "pwm.duty", duty), "pwm.driver_delay_ns", 1500.0)
        assert "pwm.driver_delay_ns: driver_delay must be shorter than one period" in validate_scenario(s)

    def test_parity_slew_limit(self):
        s = with_value(DEFAULT_SCENARIO, "mitigation.parity_cap_pf", 500.0)
        s = with_value(s, "mitigation.slew_ns", 300.0)
        assert any("slew exceeds quarter period" in v for v in validate_scenario(s))


class TestRender:
    def test_default_round_trip(self):
        assert parse_scenario(render_scenario(DEFAULT_SCENARIO)) == DEFAULT_SCENARIO

    def test_modified_round_trip(self):
        s = parse_scenario(
            "[sim]\nlabel = mixed\n"
            "[pwm]\nduty = 0.3333333333333333\ncontrol = pi\n"
            "[trojan]\ntarget = nmos\ngate = nor\nt_release_us = 750.25\n"
            "[mitigation]\nparity_cap_pf = 123.456\ntrojan_downstream_of_cap = true\n"
        )
        assert parse_scenario(render_scenario(s)) == s

    def test_infinite_release_round_trip(self):
        text = render_scenario(DEFAULT_SCENARIO)
        assert "t_release_us = inf" in text
        assert math.isinf(parse_scenario(text).trojan.t_release_us)


class TestWithValue:
    def test_numeric_keys_are_dotted(self):
        keys = numeric_keys()
        assert "mitigation.parity_cap_pf" in keys
        assert "pwm.duty" in keys
        assert "trojan.target" not in keys
        assert "converter.body_diodes" not in keys

    def test_replaces_one_value(self):
        s = with_value(DEFAULT_SCENARIO, "mitigation.parity_cap_pf", 500)
        assert s.mitigation.parity_cap_pf == 500.0
        assert s.pwm == DEFAULT_SCENARIO.pwm

    @pytest.mark.parametrize("key", ["trojan.target", "pwm.nothing", "duty"])
    def test_rejects_non_numeric_keys(self, key):
        with pytest.raises(ScenarioError):
            with_value(DEFAULT_SCENARIO, key, 1.0)


class TestShippedScenarios:
    @pytest.mark.parametrize("path", sorted(SCENARIO_DIR.glob("*.cfg")), ids=lambda p: p.stem)
    def test_parses_with_matching_label(self, path):
        s = parse_scenario(path.read_bytes(), default_label=path.stem)
        assert isinstance(s, Scenario)
        assert s.label == path.stem
