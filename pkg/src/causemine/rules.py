"""Expert context rules: condition-triggered node/edge injection.

Rule files are YAML, one rule per document:

    rule_id: "parking_queue_overflow"
    condition:
      metric: "valetparking_cpu_by_pod"
      threshold: 80.0
      operator: ">"
    inject_node: "parking_queue"
    inject_edge:
      from: "parking_queue"
      to: "valetparking_cpu_by_pod"

A fired rule injects its node and edge into the pruned graph; any edge
that would close a directed cycle is rejected, so the output is always a
DAG.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import yaml

from .graph import CausalEdge, CausalGraph, NodeId, would_create_cycle
from .ingest import MetricBatch, extract_service_name

OPERATORS = (">", "<", ">=", "<=", "==")
EQ_TOLERANCE = 1e-9


@dataclass(frozen=True)
class ContextRule:
    rule_id: str
    metric: str
    threshold: float
    operator: str
    inject_node: NodeId
    edge_from: NodeId
    edge_to: NodeId

    def __post_init__(self) -> None:
        if self.operator not in OPERATORS:
            raise ValueError(f"unknown operator {self.operator!r} in rule {self.rule_id!r}")

    def to_dict(self) -> dict:
        return {
            "rule_id": self.rule_id,
            "condition": {
                "metric": self.metric,
                "threshold": self.threshold,
                "operator": self.operator,
            },
            "inject_node": self.inject_node,
            "inject_edge": {"from": self.edge_from, "to": self.edge_to},
        }


@dataclass(frozen=True)
class RuleOutcome:
    rule_id: str
    fired: bool
    injected: bool
    reason: str

    def to_dict(self) -> dict:
        return {
            "rule_id": self.rule_id,
            "fired": self.fired,
            "injected": self.injected,
            "reason": self.reason,
        }


def _require(data: dict, key: str, rule_index: int):
    if not isinstance(data, dict) or key not in data:
        raise ValueError(f"rule {rule_index}: missing field {key!r}")
    return data[key]


def parse_rules_text(text: str) -> list[ContextRule]:
    try:
        documents = [d for d in yaml.safe_load_all(text) if d is not None]
    except yaml.YAMLError as exc:
        raise ValueError(f"rule file is not valid YAML: {exc}") from exc
    rules = []
    seen_ids: set[str] = set()
    for idx, doc in enumerate(documents):
        rule_id = str(_require(doc, "rule_id", idx))
        condition = _require(doc, "condition", idx)
        metric = str(_require(condition, "metric", idx))
        threshold = float(_require(condition, "threshold", idx))
        operator = str(_require(condition, "operator", idx))
        inject_node = str(_require(doc, "inject_node", idx))
        inject_edge = _require(doc, "inject_edge", idx)
        edge_from = str(_require(inject_edge, "from", idx))
        edge_to = str(_require(inject_edge, "to", idx))
        if operator not in OPERATORS:
            raise ValueError(f"rule {idx}: unknown operator {operator!r}")
        if rule_id in seen_ids:
            raise ValueError(f"rule {idx}: duplicate rule_id {rule_id!r}")
        seen_ids.add(rule_id)
        rules.append(
            ContextRule(rule_id, metric, threshold, operator, inject_node, edge_from, edge_to)
        )
    return rules


def parse_rules(path: str | Path) -> list[ContextRule]:
    """Parse a YAML rule file (multi-document allowed, one rule each)."""
    return parse_rules_text(Path(path).read_text())


def _normalized(node: NodeId) -> str:
    from .ingest import DEFAULT_SUFFIXES

    for suffix in DEFAULT_SUFFIXES:
        if node.endswith(suffix):
            try:
                return extract_service_name(node, list(DEFAULT_SUFFIXES)) + suffix
            except ValueError:
                return node
    return node


def evaluate_condition(rule: ContextRule, batch: MetricBatch) -> bool:
    """Compare the most recent value of the rule metric against the threshold.

    Several matching series (replica pods) reduce by maximum: a breach
    anywhere fires the rule. The ``==`` operator compares within 1e-9.
    """
    indices = [
        i
        for i, node in enumerate(batch.node_ids)
        if node == rule.metric or _normalized(node) == rule.metric
    ]
    if not indices:
        raise ValueError(f"rule metric {rule.metric!r} not present in batch")
    latest = max(float(batch.values[i, -1]) for i in indices)
    if rule.operator == ">":
        return latest > rule.threshold
    if rule.operator == "<":
        return latest < rule.threshold
    if rule.operator == ">=":
        return latest >= rule.threshold
    if rule.operator == "<=":
        return latest <= rule.threshold
    return abs(latest - rule.threshold) <= EQ_TOLERANCE


def _resolve_endpoint(
    name: NodeId, graph: CausalGraph, inject_node: NodeId
) -> NodeId | None:
    if name == inject_node or name in graph.nodes:
        return name
    normalized = {_normalized(n): n for n in sorted(graph.nodes)}
    return normalized.get(name)


def apply_rules(
    graph: CausalGraph, rules: list[ContextRule], batch: MetricBatch
) -> tuple[CausalGraph, list[RuleOutcome]]:
    """Evaluate rules in file order against the batch and inject into the graph.

    Returns the context-extended graph (always a DAG) and one outcome per
    rule; a failing rule never blocks the remaining ones.
    """
    out = graph.copy(stage="context_extended")
    outcomes = []
    for rule in rules:
        try:
            fired = evaluate_condition(rule, batch)
        except ValueError as exc:
            outcomes.append(RuleOutcome(rule.rule_id, False, False, str(exc)))
            continue
        if not fired:
            outcomes.append(RuleOutcome(rule.rule_id, False, False, "condition false"))
            continue
        src = _resolve_endpoint(rule.edge_from, out, rule.inject_node)
        dst = _resolve_endpoint(rule.edge_to, out, rule.inject_node)
        if src is None or dst is None:
            missing = rule.edge_from if src is None else rule.edge_to
            outcomes.append(
                RuleOutcome(rule.rule_id, True, False, f"unresolvable endpoint {missing!r}")
            )
            continue
        candidate = CausalEdge(src, dst, 1.0, "rule")
        if would_create_cycle(out, candidate):
            outcomes.append(RuleOutcome(rule.rule_id, True, False, "cycle rejected"))
            continue
        out.add_node(rule.inject_node)
        out.add_edge(candidate)
        outcomes.append(RuleOutcome(rule.rule_id, True, True, "injected"))
    out.validate()
    return out, outcomes
