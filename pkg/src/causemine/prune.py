"""Three-filter pruning of the feedback-adjusted graph against trace data.

Order is fixed: confidence filter, trace validation (with orientation
correction), duplicate aggregation. Orientation is corrected before
aggregation so that flipped duplicates merge.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .graph import CausalEdge, CausalGraph
from .ingest import DEFAULT_SUFFIXES, TraceDependencyGraph, extract_service_name

log = logging.getLogger(__name__)


@dataclass
class PruneConfig:
    tau_conf: float = 0.5
    suffixes: list[str] = field(default_factory=lambda: list(DEFAULT_SUFFIXES))
    drop_intra_service: bool = True

    def __post_init__(self) -> None:
        if not 0.0 <= self.tau_conf <= 1.0:
            raise ValueError(f"tau_conf must be in [0,1], got {self.tau_conf}")


def confidence_filter(graph: CausalGraph, cfg: PruneConfig) -> CausalGraph:
    """Keep edges with confidence >= tau_conf."""
    out = CausalGraph(stage=graph.stage, nodes=set(graph.nodes))
    for edge in graph.edges:
        if edge.confidence >= cfg.tau_conf:
            out.add_edge(edge)
    return out


def trace_validate(
    graph: CausalGraph, traces: TraceDependencyGraph, cfg: PruneConfig
) -> CausalGraph:
    """Keep edges whose service pair communicates; flip when only the
    reverse call direction exists; drop the structurally implausible rest."""
    out = CausalGraph(stage=graph.stage, nodes=set(graph.nodes))
    for edge in graph.edges:
        svc_src = extract_service_name(edge.source, cfg.suffixes)
        svc_dst = extract_service_name(edge.target, cfg.suffixes)
        if svc_src == svc_dst:
            if not cfg.drop_intra_service:
                out.add_edge(edge)
            continue
        if traces.has(svc_src, svc_dst):
            out.add_edge(edge)
        elif traces.has(svc_dst, svc_src):
            out.add_edge(
                CausalEdge(edge.target, edge.source, edge.confidence, edge.provenance)
            )
        # neither direction traced: structurally implausible, discard
    return out


def aggregate_duplicates(graph: CausalGraph, cfg: PruneConfig) -> CausalGraph:
    """One edge per resolved service pair: highest confidence wins,
    lexicographically smallest (source, target) on ties."""
    best: dict[tuple[str, str], CausalEdge] = {}
    for edge in graph.edges:  # canonical order makes the tie-break lexicographic
        svc_pair = (
            extract_service_name(edge.source, cfg.suffixes),
            extract_service_name(edge.target, cfg.suffixes),
        )
        current = best.get(svc_pair)
        if current is None or edge.confidence > current.confidence:
            best[svc_pair] = edge
    out = CausalGraph(stage="pruned", nodes=set(graph.nodes))
    for edge in best.values():
        out.add_edge(edge)
    return out


def prune(
    graph: CausalGraph, traces: TraceDependencyGraph, cfg: PruneConfig | None = None
) -> CausalGraph:
    """confidence_filter -> trace_validate -> aggregate_duplicates."""
    cfg = cfg or PruneConfig()
    if graph.stage != "feedback_adjusted":
        log.warning("pruning a graph at stage %r (expected feedback_adjusted)", graph.stage)
    filtered = confidence_filter(graph, cfg)
    validated = trace_validate(filtered, traces, cfg)
    return aggregate_duplicates(validated, cfg)
