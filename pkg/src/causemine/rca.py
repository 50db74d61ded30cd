"""Root cause analysis: backward random walk with restart on the final graph.

Walks start at the anomalous node and step backward along incoming edges
(toward candidate causes) with probability proportional to edge confidence,
restarting at the anomaly with a fixed probability. A node without parents
absorbs the walk with a terminal visit. Scores are visit fractions, so
uniformly scaling all confidences leaves the ranking unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import run_walks
from .graph import CausalGraph, NodeId, is_dag
from .ingest import MetricBatch


@dataclass
class RcaConfig:
    walks: int = 1000
    max_steps: int = 10
    restart_prob: float = 0.15
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.restart_prob < 1.0:
            raise ValueError(f"restart_prob must be in (0,1), got {self.restart_prob}")
        if self.walks < 1 or self.max_steps < 1:
            raise ValueError("walks and max_steps must be >= 1")


@dataclass
class RcaResult:
    anomaly: NodeId
    ranked: list[tuple[NodeId, float]]  # descending score, lexicographic ties

    def top(self) -> NodeId | None:
        return self.ranked[0][0] if self.ranked else None

    def to_dict(self) -> dict:
        return {
            "anomaly": self.anomaly,
            "ranked": [{"node": n, "score": s} for n, s in self.ranked],
        }


def detect_anomaly(batch: MetricBatch, z_threshold: float = 3.0) -> NodeId | None:
    """Node whose latest value deviates most from its own window statistics.

    Returns None when no node's |z| exceeds the threshold. Zero-variance
    series are skipped.
    """
    if batch.n_samples < 30:
        raise ValueError(f"need >= 30 samples, have {batch.n_samples}")
    best_node, best_z = None, 0.0
    for i, node in enumerate(batch.node_ids):
        series = batch.values[i]
        std = float(series.std())
        if std < 1e-12:
            continue
        z = abs(float(series[-1]) - float(series.mean())) / std
        if z > best_z:
            best_node, best_z = node, z
    if best_z > z_threshold:
        return best_node
    return None


def _in_edge_csr(graph: CausalGraph, nodes: list[NodeId]):
    """CSR over incoming edges with per-segment cumulative confidence sums."""
    index = {n: i for i, n in enumerate(nodes)}
    parents_per_node: list[list[tuple[int, float]]] = [[] for _ in nodes]
    for edge in graph.edges:  # canonical order: deterministic segment layout
        parents_per_node[index[edge.target]].append((index[edge.source], edge.confidence))
    indptr = np.zeros(len(nodes) + 1, dtype=np.int64)
    parents, cums = [], []
    for i, plist in enumerate(parents_per_node):
        running = 0.0
        for parent, conf in plist:
            running += conf
            parents.append(parent)
            cums.append(running)
        indptr[i + 1] = len(parents)
    return (
        indptr,
        np.array(parents, dtype=np.int64),
        np.array(cums, dtype=np.float64),
    )


def random_walk_rca(
    graph: CausalGraph, anomaly: NodeId, cfg: RcaConfig | None = None
) -> RcaResult:
    """Rank candidate root causes of ``anomaly`` by backward-walk visits."""
    cfg = cfg or RcaConfig()
    if anomaly not in graph.nodes:
        raise ValueError(f"anomaly node {anomaly!r} not in graph")
    if not is_dag(graph):
        raise ValueError("random-walk RCA requires an acyclic graph")
    nodes = sorted(graph.nodes)
    indptr, parents, cums = _in_edge_csr(graph, nodes)
    rng = np.random.default_rng(cfg.seed)
    uniforms = rng.random((cfg.walks, cfg.max_steps, 2))
    visits = run_walks(
        indptr, parents, cums, nodes.index(anomaly),
        cfg.restart_prob, cfg.max_steps, uniforms,
    )
    total = int(visits.sum())
    if total == 0:
        return RcaResult(anomaly=anomaly, ranked=[])
    scored = [
        (nodes[i], visits[i] / total) for i in np.nonzero(visits)[0]
    ]
    scored.sort(key=lambda item: (-item[1], item[0]))
    return RcaResult(anomaly=anomaly, ranked=scored)
