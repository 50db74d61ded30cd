import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from causemine.graph import CausalEdge, CausalGraph, graph_from_edges, is_dag
from causemine.ingest import MetricBatch
from causemine.rules import ContextRule, apply_rules, evaluate_condition, parse_rules, parse_rules_text

QUEUE_RULE = '''rule_id: "parking_queue_overflow"
condition:
  metric: "valetparking_cpu_by_pod"
  threshold: 80.0
  operator: ">"
inject_node: "parking_queue"
inject_edge:
  from: "parking_queue"
  to: "valetparking_cpu_by_pod"
'''


def batch_with(values_by_node, n=30):
    nodes = sorted(values_by_node)
    rows = []
    for node in nodes:
        series = np.zeros(n)
        series[-1] = values_by_node[node]
        rows.append(series)
    return MetricBatch(node_ids=nodes, timestamps=list(range(n)), values=np.array(rows))


def test_parse_queue_rule_field_values():
    (rule,) = parse_rules_text(QUEUE_RULE)
    assert rule.rule_id == "parking_queue_overflow"
    assert rule.metric == "valetparking_cpu_by_pod"
    assert rule.threshold == 80.0
    assert rule.operator == ">"
    assert rule.inject_node == "parking_queue"
    assert rule.edge_from == "parking_queue"
    assert rule.edge_to == "valetparking_cpu_by_pod"


def test_parse_rules_from_file(tmp_path):
    path = tmp_path / "rules.yaml"
    path.write_text(QUEUE_RULE)
    assert len(parse_rules(path)) == 1


def test_unknown_operator_rejected():
    with pytest.raises(ValueError, match="operator"):
        parse_rules_text(QUEUE_RULE.replace('">"', '"~"'))


def test_missing_field_names_field_and_index():
    broken = QUEUE_RULE.replace("inject_node: \"parking_queue\"\n", "")
    with pytest.raises(ValueError, match="rule 0.*inject_node"):
        parse_rules_text(broken)


def test_multi_document_with_distinct_ids():
    second = QUEUE_RULE.replace("parking_queue_overflow", "second_rule").replace(
        "parking_queue", "other_queue"
    )
    rules = parse_rules_text(QUEUE_RULE + "---\n" + second)
    assert [r.rule_id for r in rules] == ["parking_queue_overflow", "second_rule"]


def test_duplicate_rule_ids_rejected():
    with pytest.raises(ValueError, match="duplicate"):
        parse_rules_text(QUEUE_RULE + "---\n" + QUEUE_RULE)


def test_condition_strictly_greater():
    (rule,) = parse_rules_text(QUEUE_RULE)
    assert evaluate_condition(rule, batch_with({"valetparking_cpu_by_pod": 85.0})) is True
    assert evaluate_condition(rule, batch_with({"valetparking_cpu_by_pod": 80.0})) is False


def test_condition_multiple_pods_take_maximum():
    (rule,) = parse_rules_text(QUEUE_RULE)
    batch = batch_with({
        "valetparking-1a2b3c4d5-aaaaa_cpu_by_pod": 70.0,
        "valetparking-9z8y7x6w5-bbbbb_cpu_by_pod": 90.0,
    })
    assert evaluate_condition(rule, batch) is True


def test_condition_missing_metric_errors():
    (rule,) = parse_rules_text(QUEUE_RULE)
    with pytest.raises(ValueError, match="valetparking_cpu_by_pod"):
        evaluate_condition(rule, batch_with({"other_cpu_by_pod": 1.0}))


def test_condition_equality_tolerance():
    rule = ContextRule("r", "m_cpu_by_pod", 5.0, "==", "x", "x", "m_cpu_by_pod")
    assert evaluate_condition(rule, batch_with({"m_cpu_by_pod": 5.0 + 5e-10})) is True
    assert evaluate_condition(rule, batch_with({"m_cpu_by_pod": 5.1})) is False


def test_apply_injects_node_and_edge():
    (rule,) = parse_rules_text(QUEUE_RULE)
    graph = graph_from_edges(
        [("valetparking_cpu_by_pod", "authgateway_cpu_by_pod")], stage="pruned"
    )
    batch = batch_with({"valetparking_cpu_by_pod": 85.0})
    out, outcomes = apply_rules(graph, [rule], batch)
    assert out.stage == "context_extended"
    assert "parking_queue" in out.nodes
    edge = out.get_edge("parking_queue", "valetparking_cpu_by_pod")
    assert edge is not None
    assert edge.provenance == "rule"
    assert edge.confidence == 1.0
    assert outcomes[0].fired and outcomes[0].injected


def test_apply_condition_false_leaves_graph_unchanged():
    (rule,) = parse_rules_text(QUEUE_RULE)
    graph = graph_from_edges(
        [("valetparking_cpu_by_pod", "authgateway_cpu_by_pod")], stage="pruned"
    )
    batch = batch_with({"valetparking_cpu_by_pod": 10.0})
    out, outcomes = apply_rules(graph, [rule], batch)
    assert out.stage == "context_extended"
    assert out.to_dict()["edges"] == graph.copy(stage="context_extended").to_dict()["edges"]
    assert outcomes[0].reason == "condition false"
    assert not outcomes[0].fired


def test_apply_rejects_cycle():
    rule = ContextRule(
        "closes_cycle", "a_cpu_by_pod", 0.0, ">", "a_cpu_by_pod",
        "b_cpu_by_pod", "a_cpu_by_pod",
    )
    graph = graph_from_edges([("a_cpu_by_pod", "b_cpu_by_pod")], stage="pruned")
    batch = batch_with({"a_cpu_by_pod": 1.0, "b_cpu_by_pod": 1.0})
    out, outcomes = apply_rules(graph, [rule], batch)
    assert outcomes[0].fired and not outcomes[0].injected
    assert outcomes[0].reason == "cycle rejected"
    assert not out.has_edge("b_cpu_by_pod", "a_cpu_by_pod")
    assert is_dag(out)


def test_apply_unresolvable_endpoint_continues_with_other_rules():
    bad = ContextRule("bad", "a_cpu_by_pod", 0.0, ">", "ghost", "ghost", "missing_node")
    good = ContextRule("good", "a_cpu_by_pod", 0.0, ">", "ctx", "ctx", "a_cpu_by_pod")
    graph = graph_from_edges([("a_cpu_by_pod", "b_cpu_by_pod")], stage="pruned")
    batch = batch_with({"a_cpu_by_pod": 1.0})
    out, outcomes = apply_rules(graph, [bad, good], batch)
    assert "unresolvable" in outcomes[0].reason
    assert outcomes[1].injected
    assert out.has_edge("ctx", "a_cpu_by_pod")


def test_rule_metric_matches_pod_level_node():
    (rule,) = parse_rules_text(QUEUE_RULE)
    graph = CausalGraph(stage="pruned", nodes={"valetparking-1a2b3c4d5-aaaaa_cpu_by_pod"})
    batch = batch_with({"valetparking-1a2b3c4d5-aaaaa_cpu_by_pod": 99.0})
    out, outcomes = apply_rules(graph, [rule], batch)
    assert outcomes[0].injected
    assert out.has_edge("parking_queue", "valetparking-1a2b3c4d5-aaaaa_cpu_by_pod")


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_random_rule_sequences_never_create_cycles(data):
    n = data.draw(st.integers(min_value=3, max_value=7))
    nodes = [f"s{i}_cpu_by_pod" for i in range(n)]
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            if data.draw(st.booleans()):
                edges.append((nodes[i], nodes[j]))
    graph = graph_from_edges(edges, stage="pruned", nodes=set(nodes))

    n_rules = data.draw(st.integers(min_value=1, max_value=12))
    rules = []
    for k in range(n_rules):
        src = data.draw(st.sampled_from(nodes + [f"ctx{k}"]))
        dst = data.draw(st.sampled_from(nodes + [f"ctx{k}"]))
        if src == dst:
            continue
        rules.append(ContextRule(f"r{k}", nodes[0], 0.0, ">", f"ctx{k}", src, dst))
    batch = batch_with({node: 1.0 for node in nodes})
    out, _ = apply_rules(graph, rules, batch)
    assert is_dag(out)
    assert out.stage == "context_extended"
