"""Model, scenario and run documents: schemas, canonical JSON, hashing.

Documents are strict JSON (unknown fields rejected). The canonical form
sorts keys, drops whitespace and keeps UTF-8, so equal content gives equal
bytes and a stable SHA-256 digest. CPT tables are nested arrays indexed by
parent states in declared order, innermost arrays being distributions over
the child's states.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Literal, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .core import Cpt, Variable, network
from .errors import DocumentError
from .interventions import HardDo, PriorDo, Scenario
from .temporal import TwoSliceDBN, UtilityTimeline, base_of_ref, is_prev_ref, prev_ref

__all__ = [
    "SCHEMA_VERSION", "canonical_json", "content_digest",
    "VariableDoc", "EdgesDoc", "CptDoc", "CptGroupDoc", "ModelDocument",
    "InterventionDoc", "ScenarioDocument",
    "model_to_document", "model_from_document", "document_from_json",
    "LoadedModel", "load_model", "save_model",
    "scenario_to_document", "scenario_from_document",
    "timeline_payload", "run_payload", "RunStore",
]

SCHEMA_VERSION = 1


def canonical_json(value) -> bytes:
    return json.dumps(
        value, sort_keys=True, separators=(",", ":"), ensure_ascii=False
    ).encode("utf-8")


def content_digest(value) -> str:
    return hashlib.sha256(canonical_json(value)).hexdigest()


# ---------------------------------------------------------------------------
# schemas
# ---------------------------------------------------------------------------

class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class VariableDoc(_Strict):
    name: str = Field(min_length=1)
    states: list[str] = Field(min_length=2)

    @field_validator("states")
    @classmethod
    def _distinct(cls, v):
        if len(set(v)) != len(v):
            raise ValueError("states must be distinct")
        return v


class EdgesDoc(_Strict):
    intra: list[tuple[str, str]] = Field(default_factory=list)
    temporal: list[tuple[str, str]] = Field(default_factory=list)


class CptDoc(_Strict):
    parents: list[str] = Field(default_factory=list)
    table: list


class CptGroupDoc(_Strict):
    initial: dict[str, CptDoc]
    transition: dict[str, CptDoc] = Field(default_factory=dict)


class ModelDocument(_Strict):
    schema_version: Literal[1]
    name: str = Field(min_length=1)
    variables: list[VariableDoc] = Field(min_length=1)
    edges: EdgesDoc
    cpts: CptGroupDoc
    metadata: dict = Field(default_factory=dict)


class InterventionDoc(_Strict):
    target: str = Field(min_length=1)
    kind: Literal["fix", "prior"]
    value: Union[str, list[float]]
    window: tuple[int, int]

    @field_validator("window")
    @classmethod
    def _ordered(cls, w):
        if w[0] < 1:
            raise ValueError("window must start at slice 1 or later")
        if w[1] < w[0]:
            raise ValueError("window end must not precede its start")
        return w


class ScenarioDocument(_Strict):
    schema_version: Literal[1]
    name: str = Field(min_length=1)
    description: str = ""
    horizon: int = Field(ge=1, le=200)
    utility: str = "pollinator-linear"
    interventions: list[InterventionDoc] = Field(default_factory=list)


# ---------------------------------------------------------------------------
# model conversion
# ---------------------------------------------------------------------------

def _nested_table(cpt: Cpt, parent_vars: list[Variable]) -> list:
    def build(prefix: tuple[str, ...], depth: int):
        if depth == len(parent_vars):
            return [float(x) for x in cpt.row(prefix)]
        return [
            build(prefix + (s,), depth + 1) for s in parent_vars[depth].states
        ]

    return build((), 0)


def _rows_from_table(child: str, table, parent_vars: list[Variable], n_states: int) -> dict:
    rows: dict[tuple[str, ...], tuple[float, ...]] = {}

    def walk(node, prefix: tuple[str, ...], depth: int):
        where = f"{child} row {list(prefix)}" if prefix else child
        if depth == len(parent_vars):
            if (not isinstance(node, list)
                    or len(node) != n_states
                    or not all(isinstance(x, (int, float)) and not isinstance(x, bool)
                               for x in node)):
                raise DocumentError(
                    f"{where}: expected {n_states} probabilities, got {node!r}"
                )
            vals = [float(x) for x in node]
            if any(x < 0.0 for x in vals):
                raise DocumentError(f"{where}: negative probability")
            s = sum(vals)
            if abs(s - 1.0) > 1e-6:
                raise DocumentError(f"{where}: probabilities sum to {s!r}, not 1")
            rows[prefix] = tuple(x / s for x in vals)
            return
        states = parent_vars[depth].states
        if not isinstance(node, list) or len(node) != len(states):
            raise DocumentError(
                f"{where}: expected {len(states)} blocks for parent "
                f"{parent_vars[depth].name}"
            )
        for s, sub in zip(states, node):
            walk(sub, prefix + (s,), depth + 1)

    walk(table, (), 0)
    return rows


def model_to_document(
    dbn: TwoSliceDBN, *, name: str, metadata: dict | None = None
) -> dict:
    net = dbn.initial
    by_name = {v.name: v for v in net.variables}

    def doc_cpt(cpt: Cpt) -> dict:
        pvars = []
        for p in cpt.parents:
            base = base_of_ref(p) if is_prev_ref(p) else p
            pvars.append(Variable(p, by_name[base].states))
        return {"parents": list(cpt.parents), "table": _nested_table(cpt, pvars)}

    doc = {
        "schema_version": SCHEMA_VERSION,
        "name": name,
        "variables": [
            {"name": v.name, "states": list(v.states)} for v in net.variables
        ],
        "edges": {
            "intra": sorted([list(e) for e in net.edges]),
            "temporal": sorted(
                [list(e) for e in dbn.temporal_edges]
            ),
        },
        "cpts": {
            "initial": {
                v.name: doc_cpt(net.cpts[v.name]) for v in net.variables
            },
            "transition": {
                t.child: doc_cpt(t) for t in dbn.transitions
            },
        },
        "metadata": metadata if metadata is not None else {},
    }
    ModelDocument.model_validate(doc)
    return doc


def document_from_json(text: str, schema) -> BaseModel:
    """Parse and validate raw JSON against a document schema."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DocumentError(f"not valid JSON: {exc}") from exc
    try:
        return schema.model_validate(raw)
    except ValidationError as exc:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in e['loc'])}: {e['msg']}" for e in exc.errors()
        )
        raise DocumentError(problems) from exc


def model_from_document(doc: dict | ModelDocument) -> TwoSliceDBN:
    if not isinstance(doc, ModelDocument):
        doc = ModelDocument.model_validate(doc)
    variables = tuple(Variable(v.name, tuple(v.states)) for v in doc.variables)
    by_name = {v.name: v for v in variables}

    def to_cpt(child: str, cd: CptDoc, allow_prev: bool) -> Cpt:
        if child not in by_name:
            raise DocumentError(f"CPT for unknown variable {child}")
        pvars = []
        for p in cd.parents:
            base = base_of_ref(p) if (allow_prev and is_prev_ref(p)) else p
            if base not in by_name:
                raise DocumentError(f"{child}: unknown parent {p}")
            pvars.append(Variable(p, by_name[base].states))
        rows = _rows_from_table(
            child, cd.table, pvars, len(by_name[child].states)
        )
        return Cpt(child, tuple(cd.parents), rows)

    initial_cpts = [
        to_cpt(name, cd, allow_prev=False) for name, cd in doc.cpts.initial.items()
    ]
    missing = set(by_name) - {c.child for c in initial_cpts}
    if missing:
        raise DocumentError(f"missing initial CPTs for {sorted(missing)}")
    net = network(variables, initial_cpts)
    declared_intra = {tuple(e) for e in doc.edges.intra}
    if declared_intra != set(net.edges):
        raise DocumentError(
            "declared intra-slice edges do not match the CPT parent sets"
        )
    transitions = tuple(
        to_cpt(name, cd, allow_prev=True)
        for name, cd in doc.cpts.transition.items()
    )
    dbn = TwoSliceDBN(net, transitions)
    declared_temporal = {tuple(e) for e in doc.edges.temporal}
    if declared_temporal != set(dbn.temporal_edges):
        raise DocumentError(
            "declared temporal edges do not match the transition parent sets"
        )
    return dbn


@dataclass(frozen=True)
class LoadedModel:
    dbn: TwoSliceDBN
    document: dict
    digest: str
    name: str


def load_model(path) -> LoadedModel:
    text = Path(path).read_text(encoding="utf-8")
    doc = document_from_json(text, ModelDocument)
    dbn = model_from_document(doc)
    plain = doc.model_dump(mode="json")
    return LoadedModel(dbn, plain, content_digest(plain), doc.name)


def save_model(doc: dict, path) -> None:
    ModelDocument.model_validate(doc)
    Path(path).write_text(
        json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )


# ---------------------------------------------------------------------------
# scenario conversion
# ---------------------------------------------------------------------------

def scenario_to_document(
    scn: Scenario, horizon: int, utility: str = "pollinator-linear"
) -> dict:
    docs = []
    for iv in scn.interventions:
        if isinstance(iv, HardDo):
            docs.append({
                "target": iv.variable, "kind": "fix", "value": iv.state,
                "window": list(iv.window),
            })
        else:
            docs.append({
                "target": iv.variable, "kind": "prior",
                "value": [float(x) for x in iv.probs],
                "window": list(iv.window),
            })
    doc = {
        "schema_version": SCHEMA_VERSION,
        "name": scn.name,
        "description": scn.description,
        "horizon": horizon,
        "utility": utility,
        "interventions": docs,
    }
    ScenarioDocument.model_validate(doc)
    return doc


def scenario_from_document(
    doc: dict | ScenarioDocument, dbn: TwoSliceDBN
) -> tuple[Scenario, int, str]:
    """Build a Scenario against a concrete model.

    Raises DocumentError when a target or state does not exist in the
    model; structural intervention problems (bad windows, conflicting
    overlaps) surface as the intervention errors themselves.
    """
    if not isinstance(doc, ScenarioDocument):
        doc = ScenarioDocument.model_validate(doc)
    by_name = {v.name: v for v in dbn.variables}
    built = []
    for i, iv in enumerate(doc.interventions):
        where = f"interventions[{i}]"
        var = by_name.get(iv.target)
        if var is None:
            raise DocumentError(f"{where}: unknown variable {iv.target!r}")
        window = (iv.window[0], iv.window[1])
        if iv.kind == "fix":
            if not isinstance(iv.value, str):
                raise DocumentError(
                    f"{where}: a fix intervention takes a state name"
                )
            if iv.value not in var.states:
                raise DocumentError(
                    f"{where}: {iv.target} has no state {iv.value!r}"
                )
            built.append(HardDo(iv.target, iv.value, window))
        else:
            if not isinstance(iv.value, list):
                raise DocumentError(
                    f"{where}: a prior intervention takes a probability list"
                )
            if len(iv.value) != len(var.states):
                raise DocumentError(
                    f"{where}: {iv.target} needs {len(var.states)} "
                    f"probabilities, got {len(iv.value)}"
                )
            built.append(PriorDo(iv.target, tuple(iv.value), window))
    return Scenario(doc.name, tuple(built), doc.description), doc.horizon, doc.utility


# ---------------------------------------------------------------------------
# run records
# ---------------------------------------------------------------------------

def timeline_payload(timeline: UtilityTimeline) -> list[dict]:
    return [
        {
            "slice": pt.slice_index,
            "utility": float(pt.utility),
            "marginals": {
                name: {
                    s: float(p) for s, p in zip(m.states, m.probs)
                }
                for name, m in sorted(pt.marginals.items())
            },
        }
        for pt in timeline.points
    ]


def run_payload(
    model_digest: str, scenario_doc: dict, timeline: UtilityTimeline
) -> dict:
    """Deterministic run content; its digest is the run id."""
    payload = {
        "schema_version": SCHEMA_VERSION,
        "model_hash": model_digest,
        "scenario": scenario_doc,
        "timeline": timeline_payload(timeline),
    }
    payload["run_id"] = content_digest(payload)
    return payload


class RunStore:
    """Append-only store: one flat JSON file per run, named by content hash.

    Re-saving identical content is a no-op, so records are never mutated
    in place.
    """

    def __init__(self, directory):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def _path(self, run_id: str) -> Path:
        if not run_id.isalnum():
            raise KeyError(run_id)
        return self.directory / f"{run_id}.json"

    def save(self, payload: dict) -> str:
        run_id = payload["run_id"]
        path = self._path(run_id)
        if not path.exists():
            record = dict(payload)
            record["created_at"] = datetime.now(timezone.utc).isoformat()
            tmp = path.with_suffix(".tmp")
            tmp.write_text(
                json.dumps(record, indent=2, sort_keys=True) + "\n",
                encoding="utf-8",
            )
            tmp.rename(path)
        return run_id

    def get(self, run_id: str) -> dict:
        path = self._path(run_id)
        if not path.exists():
            raise KeyError(run_id)
        return json.loads(path.read_text(encoding="utf-8"))

    def list_runs(self) -> list[dict]:
        out = []
        for path in sorted(self.directory.glob("*.json")):
            rec = json.loads(path.read_text(encoding="utf-8"))
            out.append({
                "run_id": rec["run_id"],
                "name": rec["scenario"]["name"],
                "model_hash": rec["model_hash"],
                "created_at": rec.get("created_at"),
            })
        out.sort(key=lambda r: (r["created_at"] or "", r["run_id"]))
        return out
