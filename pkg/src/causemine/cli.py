"""Command-line interface.

Subcommands mirror the pipeline stages: ``simulate`` writes synthetic
telemetry, ``train-encoder`` pre-trains and saves the encoder artifact,
``run`` executes the full analysis, ``prune``/``extend``/``rca``/``eval``
operate on saved graph files, and ``serve`` starts the HTTP API.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import PipelineConfig
from .graph import CausalGraph, evaluate
from .ingest import load_metrics, load_traces
from .pipeline import (
    EncoderArtifact,
    prepare_data,
    report,
    report_dict,
    run_pipeline,
    train_encoder_artifact,
)
from .prune import PruneConfig, prune
from .rca import RcaConfig, detect_anomaly, random_walk_rca
from .rules import apply_rules, parse_rules
from .simulate import default_avp_spec, write_system_files


def _load_config(args) -> PipelineConfig:
    if getattr(args, "config", None):
        return PipelineConfig.from_file(args.config)
    return PipelineConfig()


def cmd_simulate(args) -> int:
    config = _load_config(args)
    spec, fault, _ = default_avp_spec()
    spec.seed = config.seed if args.seed is None else args.seed
    paths = write_system_files(
        args.out,
        spec,
        fault,
        horizon=config.horizon,
        drop_services=tuple(args.drop_service),
    )
    for name, path in paths.items():
        print(f"{name}: {path}")
    return 0


def cmd_train_encoder(args) -> int:
    config = _load_config(args)
    if args.variant:
        config.variant = args.variant
    if args.seed is not None:
        config.seed = args.seed
    artifact = train_encoder_artifact(config)
    artifact.save(args.out)
    losses = artifact.params.loss_history
    print(f"encoder ({config.variant}) trained: {len(losses)} epochs, "
          f"final loss {losses[-1]:.4f}; saved to {args.out}")
    return 0


def cmd_run(args) -> int:
    config = _load_config(args)
    data = prepare_data(config)
    if args.encoder and Path(args.encoder).exists():
        artifact = EncoderArtifact.load(args.encoder)
    else:
        artifact = train_encoder_artifact(config, data)
    rules = parse_rules(args.rules) if args.rules else None
    run = run_pipeline(
        config,
        feedback_source="oracle",
        feedback_budget=args.budget,
        encoder_artifact=artifact,
        data=data,
        rules=rules,
    )
    print(report(run))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(json.dumps(report_dict(run), indent=2))
        for stage, graph in run.stage_graphs.items():
            (out / f"graph_{stage}.json").write_text(graph.to_json())
        print(f"\nartifacts written to {out}")
    return 0


def cmd_prune(args) -> int:
    graph = CausalGraph.from_json(Path(args.graph).read_text())
    traces = load_traces(args.traces)
    cfg = PruneConfig(tau_conf=args.tau_conf)
    result = prune(graph, traces, cfg)
    output = result.to_json()
    if args.out:
        Path(args.out).write_text(output)
    else:
        print(output)
    return 0


def cmd_extend(args) -> int:
    graph = CausalGraph.from_json(Path(args.graph).read_text())
    rules = parse_rules(args.rules)
    step = args.step or max(1, args.window // 6)
    batches = load_metrics(args.metrics, window=args.window, step=step)
    extended, outcomes = apply_rules(graph, rules, batches[-1])
    for outcome in outcomes:
        print(json.dumps(outcome.to_dict()))
    if args.out:
        Path(args.out).write_text(extended.to_json())
    else:
        print(extended.to_json())
    return 0


def cmd_rca(args) -> int:
    graph = CausalGraph.from_json(Path(args.graph).read_text())
    anomaly = args.anomaly
    if anomaly is None:
        if not args.metrics:
            print("either --anomaly or --metrics is required", file=sys.stderr)
            return 2
        step = args.step or max(1, args.window // 6)
        batches = load_metrics(args.metrics, window=args.window, step=step)
        anomaly = detect_anomaly(batches[-1], z_threshold=args.z_threshold)
        if anomaly is None:
            print("no anomaly detected", file=sys.stderr)
            return 1
    result = random_walk_rca(graph, anomaly, RcaConfig(seed=args.seed))
    print(json.dumps(result.to_dict(), indent=2))
    return 0


def cmd_eval(args) -> int:
    predicted = CausalGraph.from_json(Path(args.predicted).read_text())
    truth = CausalGraph.from_json(Path(args.truth).read_text())
    metrics = evaluate(predicted, truth, level=args.level)
    print(json.dumps({
        "edges": metrics.edge_count,
        "precision": metrics.precision,
        "recall": metrics.recall,
        "f1": metrics.f1,
    }, indent=2))
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .server import create_app

    config = _load_config(args)
    app = create_app(state_dir=args.state_dir, config=config)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="causemine",
        description="Causal diagnosis for microservice telemetry",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write synthetic metrics/traces/ground truth")
    p.add_argument("--out", default="data", help="output directory")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--drop-service", action="append", default=[],
                   help="omit this service from the trace file (repeatable)")
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train-encoder", help="pre-train the embedding encoder")
    p.add_argument("--variant", choices=["gcn", "gat"], default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default="encoder.json")
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_train_encoder)

    p = sub.add_parser("run", help="run the full analysis pipeline (oracle feedback)")
    p.add_argument("--budget", type=int, default=30, help="oracle feedback answers")
    p.add_argument("--encoder", default=None, help="saved encoder artifact")
    p.add_argument("--rules", default=None, help="context rule file")
    p.add_argument("--out", default=None, help="directory for report and stage graphs")
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("prune", help="prune a graph against a trace file")
    p.add_argument("--graph", required=True)
    p.add_argument("--traces", required=True)
    p.add_argument("--tau-conf", type=float, default=0.5)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_prune)

    p = sub.add_parser("extend", help="apply context rules to a pruned graph")
    p.add_argument("--graph", required=True)
    p.add_argument("--rules", required=True)
    p.add_argument("--metrics", required=True)
    p.add_argument("--window", type=int, default=100)
    p.add_argument("--step", type=int, default=None,
                   help="window stride (default window/6; the last window reaches the newest data)")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_extend)

    p = sub.add_parser("rca", help="random-walk root cause analysis")
    p.add_argument("--graph", required=True)
    p.add_argument("--anomaly", default=None)
    p.add_argument("--metrics", default=None, help="metric file for auto-detection")
    p.add_argument("--window", type=int, default=100)
    p.add_argument("--step", type=int, default=None,
                   help="window stride (default window/6; the last window reaches the newest data)")
    p.add_argument("--z-threshold", type=float, default=3.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_rca)

    p = sub.add_parser("eval", help="precision/recall/F1 against a ground truth graph")
    p.add_argument("--predicted", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--level", choices=["node", "service"], default="node")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("serve", help="start the HTTP API")
    p.add_argument("--state-dir", default="state")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
