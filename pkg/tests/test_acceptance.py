"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line with the measured quantities.

Run with ``pytest tests/test_acceptance.py -v -s`` for the full trace.
"""

import itertools
import time

import numpy as np
import pytest

from causemine import feedback as fb
from causemine.config import PipelineConfig
from causemine.encoder import (
    EncoderParams,
    build_triplets,
    gradient_check,
    init_params,
    _forward,
    _neighbor_lists,
)
from causemine.graph import (
    CausalEdge,
    CausalGraph,
    evaluate,
    graph_from_edges,
    is_dag,
    would_create_cycle,
)
from causemine.ingest import MetricBatch
from causemine.pc import Skeleton, fisher_z_test, pc_skeleton
from causemine.pipeline import run_pipeline
from causemine.prune import PruneConfig, prune
from causemine.rca import RcaConfig, detect_anomaly, random_walk_rca
from causemine.rules import ContextRule, apply_rules, parse_rules_text
from causemine.simulate import AVP_LOW_TRAFFIC_SERVICE, default_avp_spec, generate_traces


def report_line(name, ok, detail):
    status = "PASS" if ok else "FAIL"
    print(f"\n[{status}] {name}: {detail}")
    return ok


# ---------------------------------------------------------------------------
# 1. Table-shaped quality progression on the default synthetic system


@pytest.fixture(scope="module")
def full_run(default_config, default_data, default_artifact, queue_rule_text):
    start = time.monotonic()
    run = run_pipeline(
        default_config,
        feedback_source="oracle",
        feedback_budget=30,
        encoder_artifact=default_artifact,
        data=default_data,
        rules=parse_rules_text(queue_rule_text),
    )
    return run, time.monotonic() - start


def test_quality_progression(full_run, default_config, default_data):
    run, elapsed = full_run
    truth = default_data.ground_truth
    raw = run.stage_graphs["raw"]
    adjusted = run.stage_graphs["feedback_adjusted"]
    pruned = run.stage_graphs["pruned"]

    raw_m = evaluate(raw, truth.causal_graph, level="node")
    adj_m = evaluate(adjusted, truth.causal_graph, level="node")
    pruned_svc = evaluate(pruned, truth.causal_graph, level="service")

    ok_raw = raw_m.recall == 1.0 and raw_m.precision <= 0.30
    assert report_line(
        "raw stage", ok_raw,
        f"recall={raw_m.recall:.2f} (need 1.00), precision={raw_m.precision:.2f} (need <=0.30), "
        f"{raw.edge_count} edges",
    )

    ok_adjusted = (
        adj_m.precision > raw_m.precision and adjusted.edge_count < raw.edge_count
    )
    assert report_line(
        "feedback-adjusted stage", ok_adjusted,
        f"precision {raw_m.precision:.3f} -> {adj_m.precision:.3f} (strict increase), "
        f"edges {raw.edge_count} -> {adjusted.edge_count} (strict decrease)",
    )

    # (c) exact service-level precision with the full trace graph
    ok_pruned_precision = pruned_svc.precision == 1.0
    assert report_line(
        "pruned precision (full traces)", ok_pruned_precision,
        f"service-level precision={pruned_svc.precision:.2f} (need exactly 1.00)",
    )

    # (c) recall with one low-traffic service on the trace drop list
    spec, _, _ = default_avp_spec()
    spec.seed = default_config.seed
    dropped_traces = generate_traces(spec, drop_services=(AVP_LOW_TRAFFIC_SERVICE,))
    pruned_dropped = prune(adjusted, dropped_traces, PruneConfig())
    dropped_svc = evaluate(pruned_dropped, truth.causal_graph, level="service")
    ok_recall = dropped_svc.recall >= 0.80 and dropped_svc.precision == 1.0
    assert report_line(
        "pruned recall (drop list)", ok_recall,
        f"service-level recall={dropped_svc.recall:.2f} (need >=0.80) with "
        f"{AVP_LOW_TRAFFIC_SERVICE!r} dropped, precision={dropped_svc.precision:.2f}",
    )

    ok_time = elapsed < 300.0
    assert report_line(
        "runtime budget", ok_time, f"full run took {elapsed:.1f}s (need <300s)"
    )


# ---------------------------------------------------------------------------
# 2. Queue-overflow RCA scenario


def test_rca_queue_overflow_scenario(full_run, default_config, default_data, queue_rule_text):
    run, _ = full_run
    context_graph = run.stage_graphs["context_extended"]
    assert "parking_queue" in context_graph.nodes

    anomaly = detect_anomaly(default_data.latest_batch, default_config.z_threshold)
    assert anomaly == "valetparking_cpu_by_pod"

    hits = 0
    for seed in range(100):
        result = random_walk_rca(context_graph, anomaly, RcaConfig(seed=seed))
        hits += result.top() == "parking_queue"
    ok_with_rule = hits >= 95
    assert report_line(
        "rca with rule", ok_with_rule,
        f"'parking_queue' ranked first in {hits}/100 seeded runs (need >=95)",
    )

    # without the rule the latent node cannot appear anywhere
    bare, _ = apply_rules(run.stage_graphs["pruned"], [], default_data.latest_batch)
    assert "parking_queue" not in bare.nodes
    appearances = 0
    for seed in range(100):
        result = random_walk_rca(bare, anomaly, RcaConfig(seed=seed))
        appearances += any(node == "parking_queue" for node, _ in result.ranked)
    assert report_line(
        "rca without rule", appearances == 0,
        f"'parking_queue' appeared in {appearances}/100 rankings (need 0)",
    )


# ---------------------------------------------------------------------------
# 3. Gradient numerics for every learned component


def _encoder_point(variant, seed, n=5):
    rng = np.random.default_rng(seed)
    names = [f"n{i}" for i in range(n)]
    sk = Skeleton(nodes=names)
    for a, b in zip(names, names[1:]):
        sk.add(a, b)
    neigh = _neighbor_lists(names, sk)
    for attempt in range(60):
        x = rng.normal(0, 1, (n, 6))
        base = init_params(variant, hidden=6, out_dim=4, seed=seed * 97 + attempt)
        params = EncoderParams(
            variant,
            base.w1 + rng.normal(0, 0.2, base.w1.shape),
            base.w2 + rng.normal(0, 0.2, base.w2.shape),
            a1=None if base.a1 is None else base.a1 + rng.normal(0, 0.1, base.a1.shape),
            a2=None if base.a2 is None else base.a2 + rng.normal(0, 0.1, base.a2.shape),
        )
        triplets = build_triplets(sk, names, rng, negatives_per_pair=2)
        z, cache = _forward(params, x, neigh)
        ia, ip, ineg = triplets[:, 0], triplets[:, 1], triplets[:, 2]
        hinge = params.margin - np.sum(z[ia] * z[ip], 1) + np.sum(z[ia] * z[ineg], 1)
        kinks = [np.abs(hinge).min()]
        if variant == "gcn":
            kinks.append(np.abs(cache["p1"]).min())
        else:
            kinks.append(np.abs(cache["agg1"]).min())
            kinks.extend(np.abs(info["pre"]).min() for info in cache["att1"])
            kinks.extend(np.abs(info["pre"]).min() for info in cache["att2"])
        if min(kinks) > 1e-3:
            return params, x, neigh, triplets
    raise RuntimeError(f"no smooth point for {variant} seed {seed}")


def _fd_worst(loss_fn, params_obj, grads, names, step=1e-5):
    worst = 0.0
    for name in names:
        arr = getattr(params_obj, name)
        flat = arr.reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + step
            up = loss_fn()
            flat[k] = orig - step
            down = loss_fn()
            flat[k] = orig
            numeric = (up - down) / (2 * step)
            analytic = grads[name].reshape(-1)[k]
            worst = max(
                worst, abs(numeric - analytic) / max(abs(numeric), abs(analytic), 1e-6)
            )
    return worst


def test_gradient_numerics():
    tol = 1e-4
    worst_encoder = 0.0
    for seed in range(10):
        for variant in ("gcn", "gat"):
            params, x, neigh, triplets = _encoder_point(variant, seed + 1)
            worst_encoder = max(worst_encoder, gradient_check(params, x, neigh, triplets))
    ok_encoder = worst_encoder < tol
    assert report_line(
        "encoder triplet-loss gradients", ok_encoder,
        f"max relative error {worst_encoder:.2e} over 20 points (need <1e-4)",
    )

    worst_bt = 0.0
    for seed in range(20):
        rng = np.random.default_rng(300 + seed)
        params = fb.init_reward_model(embed_dim=3, seed=seed)
        params.b1 = rng.normal(0, 0.1, params.b1.shape)
        pref = rng.normal(0, 1, (4, 6))
        rej = rng.normal(0, 1, (4, 6))
        _, grads = fb.bt_loss_and_grads(params, pref, rej, l2_score=0.01)
        worst_bt = max(
            worst_bt,
            _fd_worst(
                lambda: fb.bt_loss_and_grads(params, pref, rej, l2_score=0.01)[0],
                params, grads, ("w1", "b1", "w2"),
            ),
        )
    ok_bt = worst_bt < tol
    assert report_line(
        "reward-model pairwise-loss gradients", ok_bt,
        f"max relative error {worst_bt:.2e} over 20 points (need <1e-4)",
    )

    worst_critic = 0.0
    worst_actor = 0.0
    for seed in range(20):
        rng = np.random.default_rng(600 + seed)
        low = fb.init_low_policy(embed_dim=3, seed=seed)
        low.actor.w2 = rng.normal(0, 0.3, low.actor.w2.shape)
        low.critic.w2 = rng.normal(0, 0.3, low.critic.w2.shape)
        states = rng.normal(0, 0.5, (5, 6))
        actions = rng.random(5)
        rewards = rng.normal(0, 1, 5)
        _, cg = fb.critic_loss_and_grads(low.critic, states, actions, rewards)
        worst_critic = max(
            worst_critic,
            _fd_worst(
                lambda: fb.critic_loss_and_grads(low.critic, states, actions, rewards)[0],
                low.critic, cg, ("w1", "b1", "w2"),
            ),
        )
        _, ag = fb.actor_objective_and_grads(low.actor, low.critic, states)
        worst_actor = max(
            worst_actor,
            _fd_worst(
                lambda: fb.actor_objective_and_grads(low.actor, low.critic, states)[0],
                low.actor, ag, ("w1", "b1", "w2"),
            ),
        )
    ok_ddpg = worst_critic < tol and worst_actor < tol
    assert report_line(
        "ddpg actor/critic gradients", ok_ddpg,
        f"max relative error critic {worst_critic:.2e}, actor {worst_actor:.2e} "
        f"over 20 points each (need <1e-4)",
    )


# ---------------------------------------------------------------------------
# 4. PC oracle equivalence


def _sem_batch(edges, n, seed, coef, nodes):
    rng = np.random.default_rng(seed)
    values = {}
    for node in nodes:
        col = rng.normal(0, 1, n)
        for src, dst in edges:
            if dst == node:
                w = coef[(src, dst)] if isinstance(coef, dict) else coef
                col = col + w * values[src]
        values[node] = col
    return MetricBatch(
        node_ids=list(nodes), timestamps=list(range(n)),
        values=np.stack([values[m] for m in nodes]),
    )


def _brute_force_skeleton(batch, alpha, max_cond):
    nodes = sorted(batch.node_ids)
    skeleton = Skeleton(nodes=nodes, alpha=alpha)
    for a, b in itertools.combinations(nodes, 2):
        rest = [n for n in nodes if n not in (a, b)]
        independent = False
        for size in range(0, min(max_cond, len(rest)) + 1):
            for sub in itertools.combinations(rest, size):
                if fisher_z_test(batch, a, b, set(sub), alpha):
                    independent = True
                    break
            if independent:
                break
        if not independent:
            skeleton.add(a, b)
    return skeleton


def test_pc_oracle_equivalence():
    nodes = ["x0", "x1", "x2"]
    pairs = [(a, b) for i, a in enumerate(nodes) for b in nodes[i + 1 :]]
    mismatches = 0
    instances = 0
    for mask in range(2 ** len(pairs)):
        edges = [pairs[i] for i in range(len(pairs)) if mask >> i & 1]
        for coef in (0.8, -0.6):
            instances += 1
            batch = _sem_batch(edges, n=4000, seed=7000 + instances, coef=coef, nodes=nodes)
            ours = pc_skeleton(batch, alpha=0.05, max_cond=1)
            oracle = _brute_force_skeleton(batch, alpha=0.05, max_cond=1)
            mismatches += ours.adjacency != oracle.adjacency
    ok_exact = mismatches == 0
    assert report_line(
        "pc vs exhaustive oracle (3 nodes)", ok_exact,
        f"{mismatches}/{instances} instances differ (need 0)",
    )

    hits = 0
    for seed in range(50):
        rng = np.random.default_rng(seed)
        names = [f"x{i}" for i in range(4)]
        edges, coefs = [], {}
        for i in range(4):
            for j in range(i + 1, 4):
                if rng.random() < 0.5:
                    edges.append((names[i], names[j]))
                    coefs[(names[i], names[j])] = float(
                        rng.uniform(0.5, 0.9) * rng.choice([-1, 1])
                    )
        batch = _sem_batch(edges, n=5000, seed=9000 + seed, coef=coefs, nodes=names)
        found = pc_skeleton(batch, alpha=0.05, max_cond=2)
        hits += found.adjacency == {tuple(sorted(e)) for e in edges}
    ok_recovery = hits >= 40
    assert report_line(
        "pc structure recovery (4 nodes)", ok_recovery,
        f"exact skeleton recovered in {hits}/50 seeded instances (need >=40)",
    )


# ---------------------------------------------------------------------------
# 5. DAG safety


def test_dag_safety():
    rng = np.random.default_rng(123)
    cyclic = 0
    for trial in range(1000):
        n = int(rng.integers(3, 9))
        names = [f"s{i}_cpu_by_pod" for i in range(n)]
        graph = CausalGraph(stage="pruned", nodes=set(names))
        for i in range(n):
            for j in range(i + 1, n):
                if rng.random() < 0.4:
                    graph.add_edge(CausalEdge(names[i], names[j], float(rng.uniform(0.2, 1))))
        rules = []
        for k in range(int(rng.integers(1, 10))):
            pool = names + [f"ctx{k}"]
            src, dst = rng.choice(len(pool), size=2, replace=False)
            rules.append(
                ContextRule(f"r{k}", names[0], 0.0, ">", f"ctx{k}", pool[src], pool[dst])
            )
        batch = MetricBatch(
            node_ids=names,
            timestamps=list(range(30)),
            values=np.ones((n, 30)),
        )
        out, _ = apply_rules(graph, rules, batch)
        cyclic += not is_dag(out)
    ok_rules = cyclic == 0
    assert report_line(
        "rule-injection DAG safety", ok_rules,
        f"{cyclic}/1000 random injection sequences produced a cycle (need 0)",
    )

    disagreements = 0
    checks = 0
    for n in (2, 3, 4, 5, 6):
        names = [f"v{i}" for i in range(n)]
        pairs = [(a, b) for a in names for b in names if a != b]
        if n <= 3:
            masks = range(2 ** len(pairs))
        else:
            masks = [int(m) for m in rng.integers(0, 2 ** len(pairs), size=300)]
        for mask in masks:
            edges = [pairs[i] for i in range(len(pairs)) if mask >> i & 1]
            graph = graph_from_edges(edges, nodes=set(names))
            closure = _transitive_closure(names, edges)
            for src, dst in pairs:
                checks += 1
                expected = closure[dst][src]
                if would_create_cycle(graph, CausalEdge(src, dst, 1.0)) != expected:
                    disagreements += 1
    ok_cycle = disagreements == 0
    assert report_line(
        "cycle check vs path-enumeration oracle", ok_cycle,
        f"{disagreements}/{checks} disagreements on graphs up to 6 nodes (need 0)",
    )


def _transitive_closure(names, edges):
    reach = {a: {b: a == b for b in names} for a in names}
    for src, dst in edges:
        reach[src][dst] = True
    for k in names:
        for i in names:
            if reach[i][k]:
                for j in names:
                    if reach[k][j]:
                        reach[i][j] = True
    return reach


# ---------------------------------------------------------------------------
# 6. Persistence across service restart


def test_persistence_across_restart(tmp_path):
    def scripted_queries():
        return [
            fb.QueryTriplet(f"q{i}", "t_cpu_by_pod", f"a{i}_cpu_by_pod", f"b{i}_cpu_by_pod", 0.9)
            for i in range(6)
        ]

    choices = ["a", "b", "a", "a", "b", "a"]
    rng = np.random.default_rng(0)
    names = sorted({q.target for q in scripted_queries()}
                   | {q.candidate_a for q in scripted_queries()}
                   | {q.candidate_b for q in scripted_queries()})
    embeddings = {}
    for n in names:
        v = rng.normal(size=8)
        embeddings[n] = v / np.linalg.norm(v)

    # uninterrupted session
    dir_a = tmp_path / "uninterrupted"
    store_a = fb.FeedbackStore(state_dir=dir_a, retrain_threshold=10)
    for q in scripted_queries():
        store_a.add_pending(q)
    for q, choice in zip(scripted_queries(), choices):
        store_a.submit_feedback(q.query_id, choice)

    # interrupted twin: killed after 3 answers, restarted from disk
    dir_b = tmp_path / "interrupted"
    store_b1 = fb.FeedbackStore(state_dir=dir_b, retrain_threshold=10)
    for q in scripted_queries():
        store_b1.add_pending(q)
    for q, choice in list(zip(scripted_queries(), choices))[:3]:
        store_b1.submit_feedback(q.query_id, choice)
    snapshot_history = (dir_b / "feedback.jsonl").read_bytes()
    snapshot_pending = (dir_b / "pending.json").read_bytes()
    del store_b1  # the "kill"

    store_b2 = fb.FeedbackStore(state_dir=dir_b, retrain_threshold=10)
    ok_reload = (
        (dir_b / "feedback.jsonl").read_bytes() == snapshot_history
        and (dir_b / "pending.json").read_bytes() == snapshot_pending
        and list(store_b2.pending) == ["q3", "q4", "q5"]
        and len(store_b2.triplets) == 3
    )
    assert report_line(
        "store reload after kill", ok_reload,
        "history and pending queue reload byte-identical from disk",
    )

    for q, choice in list(zip(scripted_queries(), choices))[3:]:
        store_b2.submit_feedback(q.query_id, choice)

    ok_bytes = (dir_a / "feedback.jsonl").read_bytes() == (dir_b / "feedback.jsonl").read_bytes()
    assert report_line(
        "interrupted vs uninterrupted history", ok_bytes,
        "JSONL histories byte-identical after completing the session",
    )

    model_a = fb.train_reward_model(store_a, embeddings, epochs=200, lr=0.1, seed=5)
    model_b = fb.train_reward_model(store_b2, embeddings, epochs=200, lr=0.1, seed=5)
    ok_model = (
        np.array_equal(model_a.w1, model_b.w1)
        and np.array_equal(model_a.b1, model_b.b1)
        and np.array_equal(model_a.w2, model_b.w2)
        and model_a.b2 == model_b.b2
    )
    assert report_line(
        "retrain equivalence", ok_model,
        "reward model retrained after restart equals uninterrupted run bit-for-bit",
    )

    # the same guarantee exercised through the HTTP service layer
    from fastapi.testclient import TestClient

    from causemine.server import create_app

    service_dir = tmp_path / "service"
    config = PipelineConfig(
        seed=17, encoder_epochs=60, reward_epochs=100, ddpg_updates=200,
        walks=200, feedback_timeout=30.0,
    )
    app1 = create_app(state_dir=service_dir, config=config)
    with TestClient(app1) as client:
        client.post("/run", json={"feedback_source": "interactive", "budget": 4})
        answered = 0
        deadline = time.monotonic() + 30
        while answered < 2 and time.monotonic() < deadline:
            nxt = client.get("/feedback/next")
            if nxt.status_code == 404:
                time.sleep(0.05)
                continue
            client.post(
                "/feedback/answer",
                json={"query_id": nxt.json()["query_id"], "choice": "a"},
            )
            answered += 1
    files_at_kill = (service_dir / "feedback" / "feedback.jsonl").read_bytes()

    app2 = create_app(state_dir=service_dir, config=config)
    with TestClient(app2) as client:
        restored = (service_dir / "feedback" / "feedback.jsonl").read_bytes()
        history_intact = restored == files_at_kill and len(restored.splitlines()) == 2
    assert report_line(
        "service restart", history_intact,
        "HTTP service restart reproduces the feedback history exactly",
    )


# ---------------------------------------------------------------------------
# 7. Rule-file format conformance


def test_rule_format_conformance(queue_rule_text):
    (rule,) = parse_rules_text(queue_rule_text)
    checks = {
        "metric": rule.metric == "valetparking_cpu_by_pod",
        "threshold": rule.threshold == 80.0,
        "operator": rule.operator == ">",
        "inject_node": rule.inject_node == "parking_queue",
        "edge": (rule.edge_from, rule.edge_to)
        == ("parking_queue", "valetparking_cpu_by_pod"),
    }
    ok = all(checks.values())
    assert report_line(
        "rule format conformance", ok,
        "verbatim rule file parses to exact field values "
        + ("" if ok else f"(failed: {[k for k, v in checks.items() if not v]})"),
    )
