"""Similarity-threshold decoder: frozen embeddings -> raw causal graph.

Edge probability for a pair is the sigmoid of the embedding dot product
(cosine similarity for unit vectors); both directions of a super-threshold
pair are emitted, since similarity carries no orientation. Direction is
resolved later by trace validation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import CausalEdge, CausalGraph, NodeId


@dataclass
class BasePolicyConfig:
    tau_base: float = 0.55  # calibrated for full recall on the default simulator

    def __post_init__(self) -> None:
        if not 0.0 < self.tau_base < 1.0:
            raise ValueError(f"tau_base must be in (0,1), got {self.tau_base}")


def sigmoid(x: float | np.ndarray):
    return 1.0 / (1.0 + np.exp(-x))


def base_edge_probability(e_i: np.ndarray, e_j: np.ndarray) -> float:
    """sigma(e_i . e_j); symmetric in its arguments."""
    return float(sigmoid(float(np.dot(e_i, e_j))))


def decode_raw(
    embeddings: dict[NodeId, np.ndarray], cfg: BasePolicyConfig | None = None
) -> CausalGraph:
    """Include every ordered pair whose probability exceeds tau_base.

    High recall by design; many false positives are expected and removed in
    later stages.
    """
    cfg = cfg or BasePolicyConfig()
    nodes = sorted(embeddings)
    if len(nodes) < 2:
        raise ValueError("need at least 2 embedded nodes to decode")
    graph = CausalGraph(stage="raw", nodes=set(nodes))
    for src in nodes:
        for dst in nodes:
            if src == dst:
                continue
            prob = base_edge_probability(embeddings[src], embeddings[dst])
            if prob > cfg.tau_base:
                graph.add_edge(CausalEdge(src, dst, prob, "base"))
    return graph
