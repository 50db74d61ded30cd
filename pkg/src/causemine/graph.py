"""Core causal-graph types, cycle checks, and evaluation against a ground truth.

Nodes are pod-metric identifiers (e.g. ``valetparking_cpu_by_pod``) or
injected context nodes (e.g. ``parking_queue``). Edges are directed, carry a
confidence in [0, 1] and a provenance tag recording which pipeline stage
asserted them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

NodeId = str

PROVENANCES = ("base", "policy", "rule")
STAGES = ("raw", "feedback_adjusted", "pruned", "context_extended")


@dataclass(frozen=True)
class CausalEdge:
    source: NodeId
    target: NodeId
    confidence: float
    provenance: str = "base"

    def __post_init__(self) -> None:
        if not self.source or not self.target:
            raise ValueError("edge endpoints must be non-empty node ids")
        if self.source == self.target:
            raise ValueError(f"self-loop edge not allowed: {self.source!r}")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")

    @property
    def pair(self) -> tuple[NodeId, NodeId]:
        return (self.source, self.target)


@dataclass
class CausalGraph:
    """Directed graph with value semantics; one edge per (source, target).

    Duplicate insertions keep the maximum-confidence variant. A graph at
    stage ``context_extended`` must be acyclic (checked by ``validate``).
    """

    stage: str = "raw"
    nodes: set[NodeId] = field(default_factory=set)
    _edges: dict[tuple[NodeId, NodeId], CausalEdge] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.stage not in STAGES:
            raise ValueError(f"unknown stage {self.stage!r}")

    @property
    def edges(self) -> list[CausalEdge]:
        """Edges in canonical order (lexicographic by source, then target)."""
        return [self._edges[k] for k in sorted(self._edges)]

    @property
    def edge_count(self) -> int:
        return len(self._edges)

    def add_node(self, node: NodeId) -> None:
        if not node:
            raise ValueError("node id must be non-empty")
        self.nodes.add(node)

    def add_edge(self, edge: CausalEdge) -> None:
        self.nodes.add(edge.source)
        self.nodes.add(edge.target)
        existing = self._edges.get(edge.pair)
        if existing is None or edge.confidence > existing.confidence:
            self._edges[edge.pair] = edge

    def has_edge(self, source: NodeId, target: NodeId) -> bool:
        return (source, target) in self._edges

    def get_edge(self, source: NodeId, target: NodeId) -> CausalEdge | None:
        return self._edges.get((source, target))

    def in_edges(self, node: NodeId) -> list[CausalEdge]:
        return [e for e in self.edges if e.target == node]

    def out_edges(self, node: NodeId) -> list[CausalEdge]:
        return [e for e in self.edges if e.source == node]

    def successors(self, node: NodeId) -> list[NodeId]:
        return sorted(e.target for e in self._edges.values() if e.source == node)

    def copy(self, stage: str | None = None) -> "CausalGraph":
        return CausalGraph(
            stage=stage if stage is not None else self.stage,
            nodes=set(self.nodes),
            _edges=dict(self._edges),
        )

    def validate(self) -> None:
        for edge in self._edges.values():
            if edge.source not in self.nodes or edge.target not in self.nodes:
                raise ValueError(f"edge {edge.pair} references unknown node")
        if self.stage == "context_extended" and not is_dag(self):
            raise ValueError("context_extended graph must be acyclic")

    # -- serialization ---------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "stage": self.stage,
            "nodes": sorted(self.nodes),
            "edges": [
                {
                    "source": e.source,
                    "target": e.target,
                    "confidence": e.confidence,
                    "provenance": e.provenance,
                }
                for e in self.edges
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "CausalGraph":
        graph = cls(stage=data["stage"], nodes=set(data["nodes"]))
        for item in data["edges"]:
            graph.add_edge(
                CausalEdge(
                    source=item["source"],
                    target=item["target"],
                    confidence=item["confidence"],
                    provenance=item.get("provenance", "base"),
                )
            )
        graph.validate()
        return graph

    @classmethod
    def from_json(cls, text: str) -> "CausalGraph":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class GraphMetrics:
    edge_count: int
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_counts(cls, tp: int, predicted: int, expected: int) -> "GraphMetrics":
        precision = tp / predicted if predicted > 0 else 0.0
        recall = tp / expected if expected > 0 else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        return cls(edge_count=predicted, precision=precision, recall=recall, f1=f1)


def _reachable(graph: CausalGraph, start: NodeId, goal: NodeId) -> bool:
    """True iff a directed path start -> goal exists (DFS, lexicographic order)."""
    if start == goal:
        return True
    stack = [start]
    seen = {start}
    while stack:
        node = stack.pop()
        for succ in reversed(graph.successors(node)):
            if succ == goal:
                return True
            if succ not in seen:
                seen.add(succ)
                stack.append(succ)
    return False


def would_create_cycle(graph: CausalGraph, candidate: CausalEdge) -> bool:
    """True iff adding ``candidate`` would close a directed cycle.

    Equivalent to: a directed path candidate.target -> candidate.source
    already exists in ``graph``.
    """
    return _reachable(graph, candidate.target, candidate.source)


def is_dag(graph: CausalGraph) -> bool:
    """True iff the graph contains no directed cycle (empty graph is a DAG)."""
    WHITE, GRAY, BLACK = 0, 1, 2
    color = {node: WHITE for node in graph.nodes}

    for root in sorted(graph.nodes):
        if color[root] != WHITE:
            continue
        stack: list[tuple[NodeId, int]] = [(root, 0)]
        color[root] = GRAY
        while stack:
            node, idx = stack[-1]
            succs = graph.successors(node)
            if idx < len(succs):
                stack[-1] = (node, idx + 1)
                succ = succs[idx]
                if color[succ] == GRAY:
                    return False
                if color[succ] == WHITE:
                    color[succ] = GRAY
                    stack.append((succ, 0))
            else:
                color[node] = BLACK
                stack.pop()
    return True


def _service_projection(
    graph: CausalGraph, suffixes: list[str]
) -> set[tuple[str, str]]:
    from .ingest import extract_service_name

    pairs: set[tuple[str, str]] = set()
    for edge in graph.edges:
        src = extract_service_name(edge.source, suffixes)
        dst = extract_service_name(edge.target, suffixes)
        if src != dst:
            pairs.add((src, dst))
    return pairs


def evaluate(
    predicted: CausalGraph,
    ground_truth: CausalGraph,
    level: str = "node",
    suffixes: list[str] | None = None,
) -> GraphMetrics:
    """Precision/recall/F1 of directed edge matches at node or service level.

    At node level each directed (source, target) pair is one claim; a
    predicted reverse of a true edge counts as a false positive. At service
    level both graphs are projected onto service pairs first (intra-service
    pairs drop out of the projection). Unresolvable node names raise with
    the offending node named.
    """
    if level not in ("node", "service"):
        raise ValueError(f"unknown evaluation level {level!r}")
    if level == "node":
        pred = {e.pair for e in predicted.edges}
        truth = {e.pair for e in ground_truth.edges}
    else:
        from .ingest import DEFAULT_SUFFIXES

        suffixes = suffixes if suffixes is not None else list(DEFAULT_SUFFIXES)
        pred = _service_projection(predicted, suffixes)
        truth = _service_projection(ground_truth, suffixes)
    tp = len(pred & truth)
    return GraphMetrics.from_counts(tp=tp, predicted=len(pred), expected=len(truth))


def graph_from_edges(
    edges: list[tuple[NodeId, NodeId]] | list[CausalEdge],
    stage: str = "raw",
    nodes: set[NodeId] | None = None,
    confidence: float = 1.0,
    provenance: str = "base",
) -> CausalGraph:
    """Convenience constructor used throughout tests and the simulator."""
    graph = CausalGraph(stage=stage, nodes=set(nodes) if nodes else set())
    for item in edges:
        if isinstance(item, CausalEdge):
            graph.add_edge(item)
        else:
            src, dst = item
            graph.add_edge(CausalEdge(src, dst, confidence, provenance))
    return graph
