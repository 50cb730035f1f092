"""Serialization: canonical JSON, document validation, run records."""
import json

import pytest

from polinfer.errors import DocumentError
from polinfer.model_io import (
    ModelDocument,
    RunStore,
    ScenarioDocument,
    canonical_json,
    content_digest,
    document_from_json,
    load_model,
    model_from_document,
    model_to_document,
    run_payload,
    save_model,
    scenario_from_document,
    scenario_to_document,
    timeline_payload,
)
from polinfer.pollinator import POLLINATOR_UTILITY, SCENARIOS
from polinfer.temporal import run_scenario


def tiny_doc():
    return {
        "schema_version": 1,
        "name": "tiny",
        "variables": [
            {"name": "A", "states": ["yes", "no"]},
            {"name": "B", "states": ["yes", "no"]},
        ],
        "edges": {"intra": [["A", "B"]], "temporal": [["B", "B"]]},
        "cpts": {
            "initial": {
                "A": {"parents": [], "table": [0.5, 0.5]},
                "B": {"parents": ["A"], "table": [[0.7, 0.3], [0.2, 0.8]]},
            },
            "transition": {
                "B": {"parents": ["B[t-1]"], "table": [[0.6, 0.4], [0.1, 0.9]]},
            },
        },
        "metadata": {},
    }


def test_canonical_json_is_stable():
    a = canonical_json({"b": 1, "a": [1.5, "é"]})
    assert a == '{"a":[1.5,"é"],"b":1}'.encode("utf-8")
    d1 = content_digest({"x": 1, "y": [2, 3]})
    d2 = content_digest({"y": [2, 3], "x": 1})
    assert d1 == d2
    assert len(d1) == 64
    assert content_digest({"x": 1, "y": [2, 4]}) != d1


def test_bundled_round_trip_is_bit_exact(bundled, tmp_path):
    rebuilt = model_to_document(
        bundled.dbn, name=bundled.name, metadata=bundled.document["metadata"]
    )
    assert content_digest(rebuilt) == bundled.digest
    out = tmp_path / "copy.json"
    save_model(bundled.document, out)
    again = load_model(out)
    assert again.digest == bundled.digest
    assert again.name == bundled.name


def test_unknown_fields_rejected():
    doc = tiny_doc()
    doc["surprise"] = True
    with pytest.raises(DocumentError) as err:
        document_from_json(json.dumps(doc), ModelDocument)
    assert "surprise" in str(err.value)

    scn = {"schema_version": 1, "name": "s", "horizon": 5,
           "interventions": [], "extra": 1}
    with pytest.raises(DocumentError) as err:
        document_from_json(json.dumps(scn), ScenarioDocument)
    assert "extra" in str(err.value)


def test_bad_row_sum_names_variable_and_row():
    doc = tiny_doc()
    doc["cpts"]["initial"]["B"]["table"][0] = [0.7, 0.2]
    with pytest.raises(DocumentError) as err:
        model_from_document(doc)
    msg = str(err.value)
    assert "B row ['yes']" in msg and "sum to" in msg


def test_near_miss_row_is_renormalised():
    doc = tiny_doc()
    doc["cpts"]["initial"]["B"]["table"][0] = [0.7, 0.3 + 5e-7]
    dbn = model_from_document(doc)
    row = dbn.initial.cpts["B"].row(("yes",))
    assert sum(row) == pytest.approx(1.0, abs=1e-15)
    assert row[0] == pytest.approx(0.7 / (1.0 + 5e-7), abs=1e-12)


def test_row_shape_errors():
    doc = tiny_doc()
    doc["cpts"]["initial"]["A"]["table"] = [1.0]
    with pytest.raises(DocumentError, match="expected 2 probabilities"):
        model_from_document(doc)

    doc = tiny_doc()
    doc["cpts"]["initial"]["B"]["table"] = [[0.7, 0.3]]
    with pytest.raises(DocumentError, match="expected 2 blocks for parent A"):
        model_from_document(doc)

    doc = tiny_doc()
    doc["cpts"]["initial"]["B"]["table"][1] = [0.5, -0.5]
    with pytest.raises(DocumentError, match="negative probability"):
        model_from_document(doc)


def test_edge_declarations_must_match():
    doc = tiny_doc()
    doc["edges"]["intra"] = []
    with pytest.raises(DocumentError, match="intra-slice edges"):
        model_from_document(doc)

    doc = tiny_doc()
    doc["edges"]["temporal"] = []
    with pytest.raises(DocumentError, match="temporal edges"):
        model_from_document(doc)


def test_missing_initial_cpt():
    doc = tiny_doc()
    del doc["cpts"]["initial"]["B"]
    doc["edges"]["intra"] = []
    with pytest.raises(DocumentError, match=r"missing initial CPTs for \['B'\]"):
        model_from_document(doc)


def test_unknown_parent_and_lag_refs_in_initial():
    doc = tiny_doc()
    doc["cpts"]["initial"]["B"]["parents"] = ["Z"]
    with pytest.raises(DocumentError, match="unknown parent"):
        model_from_document(doc)

    doc = tiny_doc()
    doc["cpts"]["initial"]["B"]["parents"] = ["A[t-1]"]
    with pytest.raises(DocumentError, match=r"unknown parent A\[t-1\]"):
        model_from_document(doc)


def test_document_from_json_reports_problems():
    with pytest.raises(DocumentError, match="not valid JSON"):
        document_from_json("{", ModelDocument)
    scn = {"schema_version": 1, "name": "s", "horizon": "soon",
           "interventions": []}
    with pytest.raises(DocumentError, match="horizon"):
        document_from_json(json.dumps(scn), ScenarioDocument)


def test_window_rules_enforced_at_parse_time():
    base = {"schema_version": 1, "name": "s", "horizon": 5,
            "interventions": [{"target": "PesticideUse", "kind": "fix",
                               "value": "Low", "window": [0, 3]}]}
    with pytest.raises(DocumentError, match="start at slice 1 or later"):
        document_from_json(json.dumps(base), ScenarioDocument)
    base["interventions"][0]["window"] = [4, 2]
    with pytest.raises(DocumentError, match="must not precede its start"):
        document_from_json(json.dumps(base), ScenarioDocument)


def test_scenario_round_trip(dbn):
    doc = scenario_to_document(SCENARIOS["4"], 10)
    scn, horizon, utility = scenario_from_document(doc, dbn)
    assert horizon == 10
    assert utility == "pollinator-linear"
    assert scn.interventions == SCENARIOS["4"].interventions

    doc = scenario_to_document(SCENARIOS["5"], 12)
    scn, horizon, _ = scenario_from_document(doc, dbn)
    assert horizon == 12
    assert scn.interventions[0].probs == (0.43, 0.57)


def test_scenario_against_model_errors(dbn):
    def doc_with(iv):
        return {"schema_version": 1, "name": "s", "horizon": 5,
                "interventions": [iv]}

    with pytest.raises(DocumentError, match=r"interventions\[0\]: unknown variable"):
        scenario_from_document(doc_with(
            {"target": "Nope", "kind": "fix", "value": "Low", "window": [1, 2]}
        ), dbn)
    with pytest.raises(DocumentError, match="has no state 'Off'"):
        scenario_from_document(doc_with(
            {"target": "PesticideUse", "kind": "fix", "value": "Off",
             "window": [1, 2]}
        ), dbn)
    with pytest.raises(DocumentError, match="needs 2 probabilities, got 3"):
        scenario_from_document(doc_with(
            {"target": "Weather", "kind": "prior", "value": [0.2, 0.3, 0.5],
             "window": [1, 2]}
        ), dbn)
    with pytest.raises(DocumentError, match="takes a state name"):
        scenario_from_document(doc_with(
            {"target": "Weather", "kind": "fix", "value": [0.4, 0.6],
             "window": [1, 2]}
        ), dbn)
    with pytest.raises(DocumentError, match="takes a probability list"):
        scenario_from_document(doc_with(
            {"target": "Weather", "kind": "prior", "value": "Average",
             "window": [1, 2]}
        ), dbn)


def test_run_payload_id_is_deterministic(bundled, dbn):
    tl = run_scenario(dbn, SCENARIOS["baseline"], 3, POLLINATOR_UTILITY,
                      track=["HoneybeeAbundance"])
    doc = scenario_to_document(SCENARIOS["baseline"], 3)
    p1 = run_payload(bundled.digest, doc, tl)
    p2 = run_payload(bundled.digest, doc, tl)
    assert p1["run_id"] == p2["run_id"]
    body = {k: v for k, v in p1.items() if k != "run_id"}
    assert content_digest(body) == p1["run_id"]

    other = run_payload(bundled.digest, scenario_to_document(
        SCENARIOS["baseline"], 4),
        run_scenario(dbn, SCENARIOS["baseline"], 4, POLLINATOR_UTILITY))
    assert other["run_id"] != p1["run_id"]


def test_timeline_payload_shape(dbn):
    tl = run_scenario(dbn, SCENARIOS["1a"], 2, POLLINATOR_UTILITY,
                      track=["HoneybeeAbundance", "Environment"])
    rows = timeline_payload(tl)
    assert [r["slice"] for r in rows] == [1, 2]
    top = rows[0]["marginals"]["HoneybeeAbundance"]
    assert set(top) == {"Good", "Poor"}
    assert sum(top.values()) == pytest.approx(1.0, abs=1e-12)


def test_run_store(bundled, dbn, tmp_path):
    store = RunStore(tmp_path / "runs")
    tl = run_scenario(dbn, SCENARIOS["1a"], 3, POLLINATOR_UTILITY)
    payload = run_payload(
        bundled.digest, scenario_to_document(SCENARIOS["1a"], 3), tl)

    run_id = store.save(payload)
    first = store.get(run_id)
    assert first["created_at"]
    assert store.save(payload) == run_id
    assert store.get(run_id)["created_at"] == first["created_at"]
    stripped = {k: v for k, v in first.items() if k != "created_at"}
    assert stripped == payload

    listing = store.list_runs()
    assert [r["run_id"] for r in listing] == [run_id]
    assert listing[0]["name"] == "1a"
    assert listing[0]["model_hash"] == bundled.digest

    with pytest.raises(KeyError):
        store.get("0" * 64)
    with pytest.raises(KeyError):
        store.get("../escape")
    assert not list((tmp_path / "runs").glob("*.tmp"))
