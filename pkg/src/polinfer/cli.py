"""Command-line front end.

Subcommands: validate, run, sensitivity, calibrate, serve. The model path
comes from --model, then the POLINFER_MODEL_PATH environment variable,
then the bundled calibrated model. Report outputs are computed fully
before anything is written, and each file lands via a temp-and-rename, so
a failing invocation exits non-zero without leaving partial files.
"""
from __future__ import annotations

import argparse
import json
import random
import sys
from pathlib import Path

import numpy as np

from . import pollinator
from .analytics import sensitivity_ranking
from .errors import PolinferError
from .model_io import (
    ScenarioDocument,
    document_from_json,
    run_payload,
    scenario_from_document,
    scenario_to_document,
    save_model,
)
from .reports import (
    contributions_csv,
    contributions_png,
    sensitivity_csv,
    sensitivity_png,
    timeline_csv,
    timeline_png,
)
from .interventions import compose
from .service import resolve_model_path
from .temporal import run_scenario, slice_name, steady_state_check, unroll

__all__ = ["main", "build_parser", "cli_run"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="polinfer",
        description="Panel Bayesian-network scenario engine for pollinator policy",
    )
    parser.add_argument("--seed", type=int, default=None,
                        help="seed for any randomized utility work")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a model (and optionally a scenario)")
    p.add_argument("--model", default=None, help="model document path")
    p.add_argument("--scenario", default=None,
                   help="scenario document path to validate against the model")

    p = sub.add_parser("run", help="evaluate a scenario and report the timeline")
    p.add_argument("--model", default=None)
    p.add_argument("--scenario", required=True,
                   help="bundled scenario name or scenario document path")
    p.add_argument("--horizon", type=int, default=None,
                   help="override the scenario horizon")
    p.add_argument("--out", default=None,
                   help="directory for CSV, JSON and figure outputs")

    p = sub.add_parser("sensitivity", help="rank information sources for a target")
    p.add_argument("--model", default=None)
    p.add_argument("--target", required=True, help="target variable name")
    p.add_argument("--slice", type=int, default=2, dest="slice_index")
    p.add_argument("--top", type=int, default=None)
    p.add_argument("--out", default=None)

    p = sub.add_parser("calibrate", help="fit the free parameters to the anchors")
    p.add_argument("--out", default=None,
                   help="directory for the fitted model, fit report and scenarios")
    p.add_argument("--max-evals", type=int, default=None,
                   help="cap optimizer evaluations (diagnostic fits only)")

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--model", default=None)
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--runs", default=None, help="run-record directory")
    return parser


def _write_all(outputs: dict[Path, object]) -> None:
    for path, content in outputs.items():
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(path.name + ".tmp")
        if isinstance(content, bytes):
            tmp.write_bytes(content)
        else:
            tmp.write_text(content, encoding="utf-8")
        tmp.rename(path)


def _load(model_arg):
    from .model_io import load_model

    return load_model(resolve_model_path(model_arg))


def _resolve_scenario(value: str, dbn, horizon_override):
    if value in pollinator.SCENARIOS:
        scn = pollinator.SCENARIOS[value]
        horizon = horizon_override or pollinator.DEFAULT_HORIZON
        return scn, horizon, "pollinator-linear"
    path = Path(value)
    if not path.exists():
        raise PolinferError(
            f"{value!r} is neither a bundled scenario "
            f"({', '.join(pollinator.SCENARIO_ORDER)}) nor a file"
        )
    doc = document_from_json(path.read_text(encoding="utf-8"), ScenarioDocument)
    scn, horizon, utility = scenario_from_document(doc, dbn)
    return scn, horizon_override or horizon, utility


def _cmd_validate(args) -> int:
    loaded = _load(args.model)
    print(f"model OK: {loaded.name} ({len(loaded.dbn.variables)} variables)")
    print(f"model hash: {loaded.digest}")
    if args.scenario:
        doc = document_from_json(
            Path(args.scenario).read_text(encoding="utf-8"), ScenarioDocument
        )
        scn, horizon, utility = scenario_from_document(doc, loaded.dbn)
        if utility not in pollinator.UTILITY_SPECS:
            raise PolinferError(f"unknown utility spec {utility!r}")
        compose(scn, unroll(loaded.dbn, horizon))
        print(
            f"scenario OK: {scn.name} "
            f"({len(scn.interventions)} interventions, horizon {horizon})"
        )
    return 0


def _cmd_run(args) -> int:
    loaded = _load(args.model)
    scn, horizon, utility_name = _resolve_scenario(
        args.scenario, loaded.dbn, args.horizon
    )
    spec = pollinator.UTILITY_SPECS.get(utility_name)
    if spec is None:
        raise PolinferError(f"unknown utility spec {utility_name!r}")
    names = [v.name for v in loaded.dbn.variables]
    timeline = run_scenario(loaded.dbn, scn, horizon, spec, track=names)
    print(f"scenario {scn.name} over {horizon} years (model {loaded.digest[:12]})")
    print("slice  " + "  ".join(
        f"{t.variable.replace('Abundance', '')}" for t in spec.targets
    ) + "  utility")
    for pt in timeline.points:
        probs = "  ".join(
            f"{pt.marginals[t.variable][t.good_state]:.3f}" for t in spec.targets
        )
        print(f"{pt.slice_index:>5}  {probs}  {pt.utility:7.2f}")
    steady = steady_state_check(timeline)
    if steady is None:
        print("steady state: not reached within the horizon")
    else:
        print(f"steady state: from slice {steady}")
    if args.out:
        out = Path(args.out)
        sdoc = scenario_to_document(scn, horizon, utility_name)
        payload = run_payload(loaded.digest, sdoc, timeline)
        _write_all({
            out / "timeline.csv": timeline_csv(timeline, spec),
            out / "contributions.csv": contributions_csv(timeline, spec),
            out / "run.json": json.dumps(payload, indent=2, sort_keys=True) + "\n",
            out / "timeline.png": timeline_png({scn.name: timeline}),
            out / "contributions.png": contributions_png(timeline, spec),
        })
        print(f"wrote timeline.csv, contributions.csv, run.json and figures to {out}")
    return 0


def _cmd_sensitivity(args) -> int:
    loaded = _load(args.model)
    if args.target not in loaded.dbn.initial.names:
        raise PolinferError(f"unknown variable {args.target!r}")
    if args.slice_index < 1:
        raise PolinferError("slice must be 1 or greater")
    net = unroll(loaded.dbn, args.slice_index).network
    report = sensitivity_ranking(
        net, slice_name(args.target, args.slice_index), top_k=args.top
    )
    print(f"sensitivity of {report.target} (model {loaded.digest[:12]})")
    print(f"{'source':<34} {'MI (bits)':>10} {'% of H':>8} {'belief var':>11}")
    for row in report.rows:
        print(
            f"{row.source:<34} {row.mutual_information:>10.5f} "
            f"{row.percent_of_entropy:>8.2f} {row.variance_of_belief:>11.7f}"
        )
    if args.out:
        out = Path(args.out)
        _write_all({
            out / "sensitivity.csv": sensitivity_csv(report),
            out / "sensitivity.png": sensitivity_png(report),
        })
        print(f"wrote sensitivity.csv and sensitivity.png to {out}")
    return 0


def _cmd_calibrate(args) -> int:
    result = pollinator.calibrate(max_evaluations=args.max_evals)
    report = result.report
    print(
        f"calibration {'succeeded' if report['success'] else 'did not converge'}: "
        f"max marginal error {report['max_marginal_error']:.5f} "
        f"({report['worst_marginal_anchor']}), "
        f"{report['evaluations']} evaluations"
    )
    if args.out:
        out = Path(args.out)
        doc = pollinator.export_model(result)
        outputs = {
            out / "fit_report.json":
                json.dumps(report, indent=2, sort_keys=True) + "\n",
        }
        for name in pollinator.SCENARIO_ORDER:
            sdoc = scenario_to_document(
                pollinator.SCENARIOS[name], pollinator.DEFAULT_HORIZON
            )
            fname = f"{name}.json"
            outputs[out / "scenarios" / fname] = (
                json.dumps(sdoc, indent=2, sort_keys=True) + "\n"
            )
        _write_all(outputs)
        save_model(doc, out / "pollinator_model.json")
        print(f"wrote pollinator_model.json, fit_report.json and scenarios to {out}")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(model_path=args.model, run_directory=args.runs)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


_COMMANDS = {
    "validate": _cmd_validate,
    "run": _cmd_run,
    "sensitivity": _cmd_sensitivity,
    "calibrate": _cmd_calibrate,
    "serve": _cmd_serve,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.seed is not None:
        random.seed(args.seed)
        np.random.seed(args.seed % (2 ** 32))
    try:
        return _COMMANDS[args.command](args)
    except (PolinferError, FileNotFoundError, KeyError) as exc:
        msg = str(exc) if not isinstance(exc, KeyError) else str(exc.args[0])
        print(f"error: {msg}", file=sys.stderr)
        return 1


def cli_run(args: list[str]) -> int:
    """Programmatic entry point mirroring the console script."""
    return main(args)


if __name__ == "__main__":
    sys.exit(main())
