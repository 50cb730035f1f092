"""Command-line behaviour, driven through main() without subprocesses."""
import json

import pytest

from polinfer.cli import main
from polinfer.model_io import scenario_to_document
from polinfer.pollinator import (
    DEFAULT_HORIZON,
    POLLINATOR_UTILITY,
    SCENARIOS,
    VARIABLES,
)
from polinfer.temporal import run_scenario


def write_scenario(tmp_path, doc, name="scn.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc), encoding="utf-8")
    return str(path)


def test_validate_bundled_model(capsys):
    assert main(["validate"]) == 0
    out = capsys.readouterr().out
    assert "model OK: pollinator-panel (10 variables)" in out
    assert "model hash: " in out


def test_validate_with_scenario(tmp_path, capsys):
    path = write_scenario(tmp_path, scenario_to_document(SCENARIOS["2"], 10))
    assert main(["validate", "--scenario", path]) == 0
    assert "scenario OK: 2 (2 interventions, horizon 10)" in capsys.readouterr().out


def test_validate_missing_model(capsys):
    assert main(["validate", "--model", "/no/such/model.json"]) == 1
    assert "error:" in capsys.readouterr().err


def test_validate_rejects_bad_window(tmp_path, capsys):
    doc = scenario_to_document(SCENARIOS["1a"], 10)
    doc["interventions"][0]["window"] = [0, 1]
    path = write_scenario(tmp_path, doc)
    assert main(["validate", "--scenario", path]) == 1
    assert "start at slice 1 or later" in capsys.readouterr().err


def test_run_bundled_scenario_with_outputs(tmp_path, bundled, capsys):
    out = tmp_path / "report"
    assert main(["run", "--scenario", "1a", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "scenario 1a over 10 years" in text
    assert "steady state" in text

    names = {p.name for p in out.iterdir()}
    assert names == {"timeline.csv", "contributions.csv", "run.json",
                     "timeline.png", "contributions.png"}

    payload = json.loads((out / "run.json").read_text())
    assert payload["model_hash"] == bundled.digest
    direct = run_scenario(bundled.dbn, SCENARIOS["1a"], DEFAULT_HORIZON,
                          POLLINATOR_UTILITY,
                          track=[v.name for v in VARIABLES])
    for rec, pt in zip(payload["timeline"], direct.points):
        assert rec["utility"] == pytest.approx(pt.utility, abs=1e-12)


def test_run_scenario_document_with_no_interventions(tmp_path, bundled):
    doc = {"schema_version": 1, "name": "noop", "horizon": 4,
           "interventions": []}
    out = tmp_path / "report"
    assert main(["run", "--scenario", write_scenario(tmp_path, doc),
                 "--out", str(out)]) == 0
    payload = json.loads((out / "run.json").read_text())
    assert len(payload["timeline"]) == 4
    base = run_scenario(bundled.dbn, SCENARIOS["baseline"], 4,
                        POLLINATOR_UTILITY)
    for rec, pt in zip(payload["timeline"], base.points):
        assert rec["utility"] == pytest.approx(pt.utility, abs=1e-12)


def test_run_horizon_override(tmp_path):
    out = tmp_path / "report"
    assert main(["run", "--scenario", "baseline", "--horizon", "3",
                 "--out", str(out)]) == 0
    payload = json.loads((out / "run.json").read_text())
    assert [r["slice"] for r in payload["timeline"]] == [1, 2, 3]
    assert not list(out.glob("*.tmp"))


def test_run_unknown_scenario(capsys):
    assert main(["run", "--scenario", "9z"]) == 1
    assert "neither a bundled scenario" in capsys.readouterr().err


def test_sensitivity_outputs(tmp_path, capsys):
    out = tmp_path / "sens"
    assert main(["sensitivity", "--target", "HoneybeeAbundance",
                 "--top", "3", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "sensitivity of HoneybeeAbundance[2]" in text
    csv_text = (out / "sensitivity.csv").read_text()
    assert csv_text.splitlines()[1].startswith("DiseaseAndPestPressure[2],")
    assert (out / "sensitivity.png").read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_sensitivity_unknown_target_writes_nothing(tmp_path, capsys):
    out = tmp_path / "sens"
    assert main(["sensitivity", "--target", "Abundance",
                 "--out", str(out)]) == 1
    assert "unknown variable" in capsys.readouterr().err
    assert not out.exists()


def test_calibrate_diagnostic_budget(tmp_path, capsys):
    out = tmp_path / "fit"
    assert main(["calibrate", "--max-evals", "2", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "did not converge" in text
    assert (out / "pollinator_model.json").exists()
    report = json.loads((out / "fit_report.json").read_text())
    assert report["success"] is False
    scenario_files = sorted(p.name for p in (out / "scenarios").iterdir())
    assert scenario_files == sorted(
        f"{n}.json" for n in SCENARIOS)


def test_global_seed_flag(capsys):
    assert main(["--seed", "7", "validate"]) == 0
    capsys.readouterr()
