"""Command-line front end: exit codes and output formats."""

import json

from click.testing import CliRunner

from conftest import SCENARIO_DIR
from ddsim.cli import main

runner = CliRunner()


def invoke(*args):
    return runner.invoke(main, list(args))


def scenario(name: str) -> str:
    return str(SCENARIO_DIR / f"{name}.dds")


def test_run_clean_scenario_exits_0():
    result = invoke("run", scenario("clean"))
    assert result.exit_code == 0
    assert "exit: 0" in result.output


def test_run_error_scenario_exits_1():
    result = invoke("run", scenario("geometry_exclude"))
    assert result.exit_code == 1
    assert "E_PARTIAL_DEEPCOPY" in result.output


def test_check_downgrades_partial_deepcopy():
    result = invoke("check", scenario("geometry_exclude"))
    assert result.exit_code == 0
    assert "[warning] E_PARTIAL_DEEPCOPY" in result.output


def test_check_illegal_nesting_exits_1():
    assert invoke("check", scenario("nest_illegal")).exit_code == 1


def test_missing_file_exits_2():
    result = invoke("run", "no_such_scenario.dds")
    assert result.exit_code == 2


def test_parse_error_exits_2(tmp_path):
    bad = tmp_path / "bad.dds"
    bad.write_text("type {")
    assert invoke("run", str(bad)).exit_code == 2


def test_json_output_is_valid_and_deterministic():
    a = invoke("run", scenario("geometry_default"), "--format", "json")
    b = invoke("run", scenario("geometry_default"), "--format", "json")
    assert a.exit_code == 0
    doc = json.loads(a.output)
    assert doc["scenario"] == "geometry_default"
    assert a.output == b.output


def test_trace_includes_events():
    result = invoke("run", scenario("clean"), "--trace")
    assert "copy_to_device" in result.output


def test_deterministic_reductions_flag():
    result = invoke("run", scenario("reduction_det"),
                    "--deterministic-reductions", "--format", "json")
    doc = json.loads(result.output)
    assert all(r["deterministic"] for r in doc["reductions"])


def test_help_lists_commands():
    result = invoke("--help")
    assert result.exit_code == 0
    for cmd in ("run", "check", "serve"):
        assert cmd in result.output
