"""HTTP/JSON front end for the panel engine.

Every successful response carries the model hash so clients can detect a
model swap. Error codes: 400 for malformed documents (field-level detail),
404 for unknown nodes or runs, 409 for a model-hash mismatch against a
persisted run, 422 for a scenario that is well-formed but infeasible
against this model (a prior change on a non-root, a window past the
horizon).
"""
from __future__ import annotations

import os
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, Query, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, ConfigDict

from .analytics import entropy, sensitivity_ranking
from .errors import (
    DocumentError,
    InterventionError,
    InterventionWindowError,
    ScenarioConflictError,
)
from .inference import posterior_marginal
from .model_io import (
    LoadedModel,
    RunStore,
    ScenarioDocument,
    load_model,
    run_payload,
    scenario_from_document,
    timeline_payload,
)
from .pollinator import SCENARIO_ORDER, UTILITY_SPECS, bundled_model_path
from .reports import contributions
from .temporal import run_scenario, slice_name, unroll

__all__ = ["create_app", "http_api", "resolve_model_path"]

MODEL_PATH_ENV = "POLINFER_MODEL_PATH"
RUN_DIR_ENV = "POLINFER_RUN_DIR"


def resolve_model_path(explicit=None) -> Path:
    if explicit:
        return Path(explicit)
    env = os.environ.get(MODEL_PATH_ENV)
    if env:
        return Path(env)
    return Path(str(bundled_model_path()))


class RunRequest(BaseModel):
    model_config = ConfigDict(extra="forbid", protected_namespaces=())
    scenario: ScenarioDocument
    expected_model_hash: Optional[str] = None


def create_app(model_path=None, run_directory=None) -> FastAPI:
    loaded: LoadedModel = load_model(resolve_model_path(model_path))
    dbn = loaded.dbn
    digest = loaded.digest
    run_dir = Path(run_directory) if run_directory else Path(
        os.environ.get(RUN_DIR_ENV, "runs")
    )
    app = FastAPI(title="polinfer", version="0.1.0")
    app.state.model = loaded
    app.state.store = RunStore(run_dir)
    app.state.sensitivity_cache = {}
    names = [v.name for v in dbn.variables]

    def err(status: int, message: str, detail=None) -> JSONResponse:
        body = {"error": message, "model_hash": digest}
        if detail is not None:
            body["detail"] = detail
        return JSONResponse(body, status_code=status)

    @app.exception_handler(RequestValidationError)
    async def _on_validation(request: Request, exc: RequestValidationError):
        detail = [
            {
                "field": ".".join(
                    str(p) for p in e["loc"] if p not in ("body", "query")
                ),
                "message": e["msg"],
            }
            for e in exc.errors()
        ]
        return err(400, "request failed validation", detail)

    @app.exception_handler(DocumentError)
    async def _on_document(request: Request, exc: DocumentError):
        return err(400, str(exc))

    @app.exception_handler(ScenarioConflictError)
    async def _on_conflict(request: Request, exc: ScenarioConflictError):
        return err(400, str(exc))

    @app.exception_handler(InterventionWindowError)
    async def _on_window(request: Request, exc: InterventionWindowError):
        # construction-time window problems arrive as DocumentError or 400
        # validation failures; reaching here means the window was legal but
        # does not fit the requested horizon
        return err(422, str(exc))

    @app.exception_handler(InterventionError)
    async def _on_intervention(request: Request, exc: InterventionError):
        return err(422, str(exc))

    slice1 = {
        name: posterior_marginal(dbn.initial, name) for name in names
    }

    def marginal_map(m):
        return {s: float(p) for s, p in zip(m.states, m.probs)}

    def evaluate(sdoc: ScenarioDocument):
        scn, horizon, utility_name = scenario_from_document(sdoc, dbn)
        spec = UTILITY_SPECS.get(utility_name)
        if spec is None:
            raise DocumentError(
                f"unknown utility spec {utility_name!r}; "
                f"available: {', '.join(sorted(UTILITY_SPECS))}"
            )
        timeline = run_scenario(dbn, scn, horizon, spec, track=names)
        return scn, horizon, utility_name, spec, timeline

    @app.get("/model")
    def get_model():
        doc = loaded.document
        spec = UTILITY_SPECS["pollinator-linear"]
        return {
            "model_hash": digest,
            "name": loaded.name,
            "schema_version": doc["schema_version"],
            "variables": doc["variables"],
            "edges": doc["edges"],
            "marginals": {n: marginal_map(slice1[n]) for n in names},
            "utility": {
                "name": "pollinator-linear",
                "scale": spec.scale,
                "targets": [
                    {
                        "variable": t.variable,
                        "good_state": t.good_state,
                        "weight": t.weight,
                    }
                    for t in spec.targets
                ],
            },
            "scenarios": list(SCENARIO_ORDER),
        }

    @app.get("/nodes/{name}")
    def get_node(name: str):
        if name not in dbn.initial.names:
            return err(404, f"unknown node {name!r}")
        var = dbn.initial.variable(name)
        doc = loaded.document
        initial = doc["cpts"]["initial"][name]
        transition = doc["cpts"]["transition"].get(name)
        return {
            "model_hash": digest,
            "name": name,
            "states": list(var.states),
            "parents": {
                "initial": initial["parents"],
                "transition": transition["parents"] if transition else None,
            },
            "cpt": {
                "initial": initial["table"],
                "transition": transition["table"] if transition else None,
            },
            "marginal": marginal_map(slice1[name]),
        }

    @app.post("/scenarios/evaluate")
    def evaluate_scenario(sdoc: ScenarioDocument):
        scn, horizon, utility_name, spec, timeline = evaluate(sdoc)
        return {
            "model_hash": digest,
            "scenario": sdoc.model_dump(mode="json"),
            "horizon": horizon,
            "utility_spec": utility_name,
            "timeline": timeline_payload(timeline),
            "contributions": contributions(timeline, spec),
        }

    @app.get("/sensitivity")
    def get_sensitivity(
        target: str,
        slice: int = Query(default=2, ge=1, le=50),
        top: Optional[int] = Query(default=None, ge=1),
    ):
        if target not in dbn.initial.names:
            return err(404, f"unknown node {target!r}")
        key = (target, slice)
        report = app.state.sensitivity_cache.get(key)
        if report is None:
            net = unroll(dbn, slice).network
            report = sensitivity_ranking(net, slice_name(target, slice))
            app.state.sensitivity_cache[key] = report
        rows = report.rows[:top] if top else report.rows
        target_node = slice_name(target, slice)
        net = unroll(dbn, slice).network
        return {
            "model_hash": digest,
            "target": target,
            "slice": slice,
            "target_node": target_node,
            "target_entropy_bits": entropy(posterior_marginal(net, target_node)),
            "rows": [
                {
                    "source": r.source,
                    "mutual_information": r.mutual_information,
                    "percent_of_entropy": r.percent_of_entropy,
                    "variance_of_belief": r.variance_of_belief,
                }
                for r in rows
            ],
        }

    @app.get("/runs")
    def list_runs():
        return {"model_hash": digest, "runs": app.state.store.list_runs()}

    @app.get("/runs/{run_id}")
    def get_run(run_id: str):
        try:
            record = app.state.store.get(run_id)
        except KeyError:
            return err(404, f"unknown run {run_id!r}")
        return {"model_hash": digest, "run": record}

    @app.post("/runs", status_code=201)
    def create_run(req: RunRequest):
        if req.expected_model_hash and req.expected_model_hash != digest:
            return err(
                409,
                "model hash mismatch: expected "
                f"{req.expected_model_hash}, serving {digest}",
            )
        scn, horizon, utility_name, spec, timeline = evaluate(req.scenario)
        payload = run_payload(
            digest, req.scenario.model_dump(mode="json"), timeline
        )
        run_id = app.state.store.save(payload)
        return {"model_hash": digest, "run": app.state.store.get(run_id)}

    @app.post("/runs/{run_id}/replay")
    def replay_run(run_id: str):
        try:
            record = app.state.store.get(run_id)
        except KeyError:
            return err(404, f"unknown run {run_id!r}")
        if record["model_hash"] != digest:
            return err(
                409,
                f"run {run_id} was recorded against model "
                f"{record['model_hash']}, serving {digest}",
            )
        sdoc = ScenarioDocument.model_validate(record["scenario"])
        scn, horizon, utility_name, spec, timeline = evaluate(sdoc)
        fresh = run_payload(digest, record["scenario"], timeline)
        stored = {
            k: v for k, v in record.items() if k != "created_at"
        }
        return {
            "model_hash": digest,
            "run_id": run_id,
            "identical": fresh == stored,
            "recomputed_run_id": fresh["run_id"],
        }

    return app


def http_api(config: Optional[dict] = None) -> FastAPI:
    """Build the service from a plain config mapping."""
    config = config or {}
    return create_app(
        model_path=config.get("model_path"),
        run_directory=config.get("run_directory"),
    )
