"""End-to-end orchestration of the continuous analysis loop.

Stage order is fixed: encode -> raw decode -> feedback rounds -> prune ->
context extension -> RCA. Every completed stage snapshot is recorded on the
run and never mutated afterwards; metrics against the ground truth (when
available) are computed at both node and service granularity.

The mining window is the first sliding batch (assumed normal operation);
anomaly detection, rule conditions and RCA read the most recent batch.
"""

from __future__ import annotations

import json
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import feedback as fb
from .config import PipelineConfig
from .decode import BasePolicyConfig, decode_raw
from .encoder import EncoderParams, encode, node_features, train_contrastive
from .graph import CausalGraph, GraphMetrics, evaluate
from .ingest import MetricBatch, TraceDependencyGraph, load_metrics, load_traces
from .pc import Skeleton, pc_skeleton
from .prune import PruneConfig, prune
from .rca import RcaConfig, RcaResult, detect_anomaly, random_walk_rca
from .rules import ContextRule, RuleOutcome, apply_rules, parse_rules
from .simulate import GroundTruth, default_avp_spec, generate_metrics, generate_traces

STAGE_ORDER = ("raw", "feedback_adjusted", "pruned", "context_extended")


@dataclass
class PipelineData:
    batches: list[MetricBatch]
    traces: TraceDependencyGraph
    ground_truth: GroundTruth | None = None

    @property
    def mining_batch(self) -> MetricBatch:
        return self.batches[0]

    @property
    def latest_batch(self) -> MetricBatch:
        return self.batches[-1]


@dataclass
class EncoderArtifact:
    params: EncoderParams
    skeleton: Skeleton

    def to_dict(self) -> dict:
        return {"encoder": self.params.to_dict(), "skeleton": self.skeleton.to_dict()}

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    @classmethod
    def load(cls, path: str | Path) -> "EncoderArtifact":
        data = json.loads(Path(path).read_text())
        return cls(
            params=EncoderParams.from_dict(data["encoder"]),
            skeleton=Skeleton.from_dict(data["skeleton"]),
        )


@dataclass
class PipelineRun:
    run_id: str
    config: dict
    status: str = "running"  # running | completed | partial_timeout
    stage_graphs: dict[str, CausalGraph] = field(default_factory=dict)
    stage_metrics: dict[str, dict[str, GraphMetrics]] = field(default_factory=dict)
    anomaly: str | None = None
    rca: RcaResult | None = None
    rule_outcomes: list[RuleOutcome] = field(default_factory=list)
    answered: int = 0

    def record_stage(
        self, stage: str, graph: CausalGraph, truth: GroundTruth | None
    ) -> None:
        if stage in self.stage_graphs:
            raise ValueError(f"stage {stage!r} already recorded")
        produced = list(self.stage_graphs)
        if stage != STAGE_ORDER[len(produced)]:
            raise ValueError(f"stages out of order: {produced} then {stage!r}")
        self.stage_graphs[stage] = graph.copy()
        if truth is not None:
            self.stage_metrics[stage] = {
                "node": evaluate(graph, truth.causal_graph, level="node"),
                "service": evaluate(graph, truth.causal_graph, level="service"),
            }


def prepare_data(config: PipelineConfig) -> PipelineData:
    """Resolve input data: load the configured directory, or simulate."""
    if config.data_dir:
        base = Path(config.data_dir)
        batches = load_metrics(base / "metrics.jsonl", config.window, config.step)
        traces = load_traces(base / "traces.json")
        truth = None
        truth_path = base / "ground_truth.json"
        if truth_path.exists():
            truth = GroundTruth(
                causal_graph=CausalGraph.from_json(truth_path.read_text()),
                trace_graph=traces,
            )
        return PipelineData(batches=batches, traces=traces, ground_truth=truth)

    spec, fault, truth = default_avp_spec()
    spec.seed = config.seed
    full = generate_metrics(spec, fault, config.horizon)
    batches = []
    for start in range(0, full.n_samples - config.window + 1, config.step):
        sl = slice(start, start + config.window)
        batches.append(
            MetricBatch(
                node_ids=list(full.node_ids),
                timestamps=full.timestamps[sl],
                values=full.values[:, sl].copy(),
            )
        )
    traces = generate_traces(spec, drop_services=tuple(config.drop_services))
    return PipelineData(batches=batches, traces=traces, ground_truth=truth)


def train_encoder_artifact(
    config: PipelineConfig, data: PipelineData | None = None
) -> EncoderArtifact:
    """Pre-training step: PC skeleton on the mining window, then contrastive fit."""
    data = data or prepare_data(config)
    skeleton = pc_skeleton(
        data.mining_batch.thin(config.pc_thin), alpha=config.alpha, max_cond=config.max_cond
    )
    features = node_features(data.mining_batch)
    params = train_contrastive(
        features,
        skeleton,
        epochs=config.encoder_epochs,
        lr=config.encoder_lr,
        seed=config.seed,
        variant=config.variant,
        hidden=config.hidden_dim,
        out_dim=config.embed_dim,
        margin=config.margin,
    )
    return EncoderArtifact(params=params, skeleton=skeleton)


class FeedbackSession:
    """Drives query generation, answering, and retrain cycles for one run."""

    def __init__(
        self,
        config: PipelineConfig,
        store: fb.FeedbackStore,
        embeddings: fb.Embeddings,
        candidate_graph: CausalGraph,
        truth: GroundTruth | None,
        rng: np.random.Generator,
    ):
        self.config = config
        self.store = store
        self.embeddings = embeddings
        self.candidate_graph = candidate_graph
        self.truth = truth
        self.rng = rng
        self.low = fb.init_low_policy(
            embed_dim=len(next(iter(embeddings.values()))),
            capacity=config.buffer_capacity,
            seed=config.seed + 11,
        )
        self.low.noise_std = config.noise_std
        self.low.actor_lr = config.actor_lr
        self.low.critic_lr = config.critic_lr
        self.high = fb.HighPolicyState(
            epsilon=config.epsilon, alpha=config.q_alpha, gamma=config.gamma
        )
        self.reward_params: fb.RewardModelParams | None = None
        self.current_graph = candidate_graph
        self._query_counter = 0
        self._asked: set[tuple[str, str, str]] = set()
        self.retrains = 0

    # -- rounds ----------------------------------------------------------

    def eligible_targets(self) -> list[str]:
        return [
            n
            for n in sorted(self.candidate_graph.nodes)
            if len(self.candidate_graph.in_edges(n)) >= 2
        ]

    def _query_graph(self) -> CausalGraph:
        """Candidate pool per target: its highest-confidence raw predecessors."""
        cap = self.config.candidate_pool
        trimmed = CausalGraph(stage="raw", nodes=set(self.candidate_graph.nodes))
        for node in sorted(self.candidate_graph.nodes):
            ins = sorted(
                self.candidate_graph.in_edges(node),
                key=lambda e: (-e.confidence, e.source),
            )
            for edge in ins[:cap]:
                trimmed.add_edge(edge)
        return trimmed

    def next_queries(self, budget_left: int) -> list[fb.QueryTriplet]:
        eligible = self.eligible_targets()
        if not eligible:
            return []
        targets: list[str] = []
        pool = list(eligible)
        while pool and len(targets) < min(self.config.targets_per_round, budget_left):
            target = fb.select_target_node(self.high, pool, self.rng)
            targets.append(target)
            pool.remove(target)
        queries = []
        query_graph = self._query_graph()
        for target in targets:
            self._query_counter += 1
            query = fb.generate_query(
                self.low,
                query_graph,
                target,
                self.embeddings,
                query_id=f"query-{self._query_counter:04d}",
                exclude=self._asked,
            )
            self._asked.add((query.target, query.candidate_a, query.candidate_b))
            self.store.add_pending(query)
            queries.append(query)
        return queries

    def answer_with_oracle(self, query: fb.QueryTriplet) -> bool:
        if self.truth is None:
            raise ValueError("oracle feedback requires a ground truth")
        choice = fb.oracle_answer(
            query, self.truth.causal_graph, noise=self.config.oracle_noise, rng=self.rng
        )
        return self.store.submit_feedback(query.query_id, choice, source="oracle")

    def retrain(self) -> None:
        cfg = self.config
        self.reward_params = fb.train_reward_model(
            self.store,
            self.embeddings,
            epochs=cfg.reward_epochs,
            lr=cfg.reward_lr,
            seed=cfg.seed + 23,
            l2_score=cfg.reward_l2,
        )
        nodes = sorted(self.embeddings)
        pairs = [(t, c) for t in nodes for c in nodes if t != c]
        self.low.buffer.clear()  # scores below were computed by the old model
        fb.fill_replay(
            self.low, self.reward_params, self.embeddings, pairs, self.rng,
            center_quantile=cfg.reward_center_quantile,
        )
        warmup = int(cfg.ddpg_updates * cfg.critic_warmup_frac)
        for step in range(cfg.ddpg_updates):
            fb.ddpg_update(self.low, cfg.ddpg_batch, self.rng, update_actor=step >= warmup)
        self.low.trained = True
        self.current_graph = fb.decode_feedback_adjusted(
            self.low, self.embeddings, cfg.tau_policy
        )
        for node in nodes:
            neighbors = [e.source for e in self.current_graph.in_edges(node)]
            gain = fb.reward_high(self.reward_params, node, neighbors, self.embeddings)
            fb.q_update(self.high, node, "select", gain)
        self.store.mark_retrained()
        self.retrains += 1

    def final_graph(self, raw_graph: CausalGraph) -> CausalGraph:
        if not self.low.trained:
            # documented fallback: base-policy decode promoted to this stage
            fallback = raw_graph.copy(stage="feedback_adjusted")
            return fallback
        return fb.decode_feedback_adjusted(self.low, self.embeddings, self.config.tau_policy)


def run_pipeline(
    config: PipelineConfig,
    feedback_source: str = "oracle",
    feedback_budget: int = 30,
    encoder_artifact: EncoderArtifact | None = None,
    data: PipelineData | None = None,
    store: fb.FeedbackStore | None = None,
    rules: list[ContextRule] | None = None,
    anomaly_override: str | None = None,
    run_id: str | None = None,
) -> PipelineRun:
    """Execute all stages; with the oracle source answers ``feedback_budget``
    queries, with the interactive source blocks on the store until answered
    or ``config.feedback_timeout`` elapses (partial run flagged)."""
    if feedback_source not in ("oracle", "interactive"):
        raise ValueError(f"unknown feedback source {feedback_source!r}")
    if encoder_artifact is None:
        raise ValueError("missing encoder: pre-train one with train_encoder_artifact")
    data = data or prepare_data(config)
    store = store if store is not None else fb.FeedbackStore(
        retrain_threshold=config.retrain_threshold
    )
    if rules is None and config.rules_path:
        rules = parse_rules(config.rules_path)
    rng = np.random.default_rng(config.seed + 101)
    run = PipelineRun(run_id=run_id or uuid.uuid4().hex[:12], config=config.to_dict())

    features = node_features(data.mining_batch)
    embeddings = encode(encoder_artifact.params, features, encoder_artifact.skeleton)

    raw_graph = decode_raw(embeddings, BasePolicyConfig(tau_base=config.tau_base))
    run.record_stage("raw", raw_graph, data.ground_truth)

    session = FeedbackSession(
        config, store, embeddings, raw_graph, data.ground_truth, rng
    )
    answered = 0
    while answered < feedback_budget:
        queries = session.next_queries(feedback_budget - answered)
        if not queries:
            break
        if feedback_source == "oracle":
            for query in queries:
                triggered = session.answer_with_oracle(query)
                answered += 1
                if triggered:
                    session.retrain()
        else:
            deadline = time.monotonic() + config.feedback_timeout
            query_ids = {q.query_id for q in queries}
            while query_ids & set(store.pending):
                if time.monotonic() > deadline:
                    run.status = "partial_timeout"
                    break
                time.sleep(0.05)
            newly = len(query_ids) - len(query_ids & set(store.pending))
            answered += newly
            for query_id in query_ids & set(store.pending):
                del store.pending[query_id]  # expire unanswered queries
            store._sync_pending()
            if run.status == "partial_timeout":
                break
            if store.answered_since_retrain >= config.retrain_threshold:
                session.retrain()
    run.answered = answered

    feedback_graph = session.final_graph(raw_graph)
    run.record_stage("feedback_adjusted", feedback_graph, data.ground_truth)

    prune_cfg = PruneConfig(
        tau_conf=config.tau_conf,
        suffixes=list(config.metric_suffixes),
        drop_intra_service=config.drop_intra_service,
    )
    pruned = prune(feedback_graph, data.traces, prune_cfg)
    run.record_stage("pruned", pruned, data.ground_truth)

    context_graph, outcomes = apply_rules(pruned, rules or [], data.latest_batch)
    run.rule_outcomes = outcomes
    run.record_stage("context_extended", context_graph, data.ground_truth)

    anomaly = anomaly_override or detect_anomaly(data.latest_batch, config.z_threshold)
    run.anomaly = anomaly
    if anomaly is not None and anomaly in context_graph.nodes:
        run.rca = random_walk_rca(
            context_graph,
            anomaly,
            RcaConfig(
                walks=config.walks,
                max_steps=config.max_steps,
                restart_prob=config.restart_prob,
                seed=config.seed + 307,
            ),
        )
    if run.status == "running":
        run.status = "completed"
    return run


# ---------------------------------------------------------------------------
# reporting


def _fmt(metrics: GraphMetrics | None, attr: str) -> str:
    if metrics is None:
        return "—"
    return f"{getattr(metrics, attr):.2f}"


def report(run: PipelineRun) -> str:
    """Stage-by-stage quality table (node level, then service level)."""
    lines = [f"run {run.run_id}  status={run.status}  answered={run.answered}"]
    for level in ("node", "service"):
        lines.append("")
        lines.append(f"[{level} level]")
        lines.append(f"{'stage':<20} {'edges':>6} {'precision':>10} {'recall':>8} {'f1':>6}")
        for stage in STAGE_ORDER:
            graph = run.stage_graphs.get(stage)
            if graph is None:
                continue
            metrics = run.stage_metrics.get(stage, {}).get(level)
            shown = metrics.edge_count if metrics and level == "service" else graph.edge_count
            lines.append(
                f"{stage:<20} {shown:>6} {_fmt(metrics, 'precision'):>10} "
                f"{_fmt(metrics, 'recall'):>8} {_fmt(metrics, 'f1'):>6}"
            )
    if run.rca is not None:
        lines.append("")
        lines.append(f"anomaly: {run.anomaly}")
        lines.append("root-cause ranking:")
        for node, score in run.rca.ranked[:5]:
            lines.append(f"  {node:<40} {score:.3f}")
    return "\n".join(lines)


def report_dict(run: PipelineRun) -> dict:
    stages = {}
    for stage, graph in run.stage_graphs.items():
        metrics = run.stage_metrics.get(stage, {})
        stages[stage] = {
            "graph": graph.to_dict(),
            "metrics": {
                level: (
                    {
                        "edge_count": m.edge_count,
                        "precision": m.precision,
                        "recall": m.recall,
                        "f1": m.f1,
                    }
                    if (m := metrics.get(level)) is not None
                    else None
                )
                for level in ("node", "service")
            },
        }
    return {
        "run_id": run.run_id,
        "status": run.status,
        "answered": run.answered,
        "config": run.config,
        "stages": stages,
        "anomaly": run.anomaly,
        "rca": run.rca.to_dict() if run.rca else None,
        "rule_outcomes": [o.to_dict() for o in run.rule_outcomes],
    }
