"""Command-line surface."""

import json
import os

import pytest
from click.testing import CliRunner

from conftest import PACKS_DIR

from unistore.cli import main
from unistore.packs import ALL_PACKS, pack_filename


@pytest.fixture
def runner():
    return CliRunner()


def _run(runner, data_dir, *args, ok=True):
    result = runner.invoke(main, ["--data-dir", data_dir, *args])
    if ok and result.exit_code != 0:
        raise AssertionError(f"{args} failed ({result.exit_code}): {result.output} "
                             f"{result.exception}")
    return result


@pytest.fixture
def seeded_dir(tmp_path, runner):
    data = str(tmp_path / "store")
    _run(runner, data, "init")
    for name in ALL_PACKS:
        _run(runner, data, "pack", "load", os.path.join(PACKS_DIR, pack_filename(name)))
        _run(runner, data, "pack", "apply", name)
    _run(runner, data, "seed", "--employees", "30")
    return data


def test_init_reports_state_zero(tmp_path, runner):
    result = _run(runner, str(tmp_path / "s"), "init")
    assert "state 0" in result.output


def test_pack_load_then_apply_then_seed(seeded_dir, runner):
    result = _run(runner, seeded_dir, "query", "--domain", "Employee",
                  "--formula", "status = 'active'")
    payload = json.loads(result.output)
    assert len(payload["matches"]) == 30


def test_pack_apply_unloaded_pack_fails(tmp_path, runner):
    data = str(tmp_path / "s")
    _run(runner, data, "init")
    result = _run(runner, data, "pack", "apply", "Personal Data", ok=False)
    assert result.exit_code == 1
    assert "not loaded" in result.output


def test_seed_without_packs_fails(tmp_path, runner):
    data = str(tmp_path / "s")
    _run(runner, data, "init")
    result = _run(runner, data, "seed", "--employees", "5", ok=False)
    assert result.exit_code == 1
    assert "VALIDATION" in result.output


def test_query_individuate(seeded_dir, runner):
    listing = json.loads(_run(runner, seeded_dir, "query", "--domain", "Employee",
                              "--formula", "status = 'active'").output)
    some = listing["matches"][0]
    export = _run(runner, seeded_dir, "export", "--format", "json",
                  "--out", seeded_dir + "/exp")
    content = json.load(open(export.output.strip()))
    name = next(i["values"]["name"] for i in content["individuals"] if i["id"] == some)
    quoted = name.replace("'", "''")
    result = _run(runner, seeded_dir, "query", "--domain", "Employee",
                  "--formula", f"name = '{quoted}'", "--individuate")
    assert json.loads(result.output)["individual"] == some


def test_appraise_prints_breakdown(seeded_dir, runner):
    listing = json.loads(_run(runner, seeded_dir, "query", "--domain", "OrgUnit",
                              "--formula", "name = 'Corporation'").output)
    root = listing["matches"][0]
    result = _run(runner, seeded_dir, "appraise", "--unit", str(root))
    assert "value" in result.output
    assert "coverage" in result.output


def test_appraise_requires_a_target(seeded_dir, runner):
    result = _run(runner, seeded_dir, "appraise", ok=False)
    assert result.exit_code == 2


def test_replay_and_rollback(seeded_dir, runner):
    replay_out = _run(runner, seeded_dir, "replay", "--to", "10").output
    assert "state 10 hash" in replay_out
    result = _run(runner, seeded_dir, "rollback", "--to", "99999", ok=False)
    assert result.exit_code == 1
    assert "STATE_BEYOND_HEAD" in result.output
    ok = _run(runner, seeded_dir, "rollback", "--to", "10")
    assert "rolled back" in ok.output
    # content at the new head equals the replayed state-10 content
    hash10 = replay_out.split("hash ")[1].strip()
    head_line = _run(runner, seeded_dir, "replay", "--to", "10").output
    assert hash10 in head_line


def test_export_csv(seeded_dir, runner, tmp_path):
    out = str(tmp_path / "csv")
    result = _run(runner, seeded_dir, "export", "--format", "csv", "--out", out)
    paths = result.output.strip().splitlines()
    assert any(p.endswith("Employee.csv") for p in paths)
    header = open(os.path.join(out, "Employee.csv")).readline()
    assert header.startswith("id,name,hire_date")


def test_bench_reports_p50(seeded_dir, runner):
    result = _run(runner, seeded_dir, "bench", "--ops", "20")
    assert "p50" in result.output


def test_usage_error_exit_code(runner, tmp_path):
    result = runner.invoke(main, ["--data-dir", str(tmp_path / "s"), "nonsense"])
    assert result.exit_code == 2
