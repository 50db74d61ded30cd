"""Constraint-based skeleton discovery: PC with Fisher-z partial correlation.

Produces the undirected adjacency used as pseudo-labels for contrastive
encoder training. Stable-PC semantics: conditional-independence tests in one
level all see the adjacency snapshot from the previous level, and every
iteration order (pairs, conditioning subsets) is lexicographic, which makes
the result a pure function of (data, alpha, max_cond).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy import stats

from .graph import NodeId
from .ingest import MetricBatch


@dataclass
class Skeleton:
    """Undirected adjacency over nodes; pairs stored sorted, no self-pairs."""

    nodes: list[NodeId]
    adjacency: set[tuple[NodeId, NodeId]] = field(default_factory=set)
    alpha: float = 0.05

    def __post_init__(self) -> None:
        self.nodes = sorted(self.nodes)
        for a, b in self.adjacency:
            if a == b:
                raise ValueError(f"self-pair in skeleton: {a!r}")
            if (a, b) != tuple(sorted((a, b))):
                raise ValueError(f"skeleton pair not sorted: {(a, b)}")

    def has(self, a: NodeId, b: NodeId) -> bool:
        return tuple(sorted((a, b))) in self.adjacency

    def add(self, a: NodeId, b: NodeId) -> None:
        if a == b:
            raise ValueError(f"self-pair in skeleton: {a!r}")
        self.adjacency.add(tuple(sorted((a, b))))

    def neighbors(self, node: NodeId) -> list[NodeId]:
        out = {b if a == node else a for a, b in self.adjacency if node in (a, b)}
        return sorted(out)

    def pairs(self) -> list[tuple[NodeId, NodeId]]:
        return sorted(self.adjacency)

    def non_adjacent(self, node: NodeId) -> list[NodeId]:
        adj = set(self.neighbors(node)) | {node}
        return [n for n in self.nodes if n not in adj]

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "nodes": self.nodes, "pairs": self.pairs()}

    @classmethod
    def from_dict(cls, data: dict) -> "Skeleton":
        return cls(
            nodes=list(data["nodes"]),
            adjacency={tuple(p) for p in data["pairs"]},
            alpha=data.get("alpha", 0.05),
        )


def partial_correlation(
    values: np.ndarray, i: int, j: int, conditioning: tuple[int, ...]
) -> float:
    """Partial correlation of rows i, j given conditioning rows.

    Computed from the inverse of the correlation matrix of the involved
    rows. Raises on constant series or a numerically singular matrix.
    """
    idx = [i, j, *conditioning]
    sub = values[idx]
    stds = sub.std(axis=1)
    if np.any(stds < 1e-12):
        flat = np.array(idx)[stds < 1e-12][0]
        raise ValueError(f"constant series at node index {flat}; cannot test")
    corr = np.corrcoef(sub)
    if not conditioning:
        return float(np.clip(corr[0, 1], -1.0, 1.0))
    try:
        precision = np.linalg.inv(corr)
    except np.linalg.LinAlgError as exc:
        raise ValueError("degenerate data: singular correlation matrix") from exc
    if not np.isfinite(precision).all() or abs(np.linalg.det(corr)) < 1e-14:
        raise ValueError("degenerate data: singular correlation matrix")
    rho = -precision[0, 1] / np.sqrt(precision[0, 0] * precision[1, 1])
    return float(np.clip(rho, -1.0, 1.0))


def fisher_z_test(
    batch: MetricBatch,
    i: NodeId,
    j: NodeId,
    conditioning: set[NodeId] | list[NodeId] = (),
    alpha: float = 0.05,
) -> bool:
    """True iff independence of i and j given the conditioning set is NOT rejected."""
    cond = sorted(conditioning)
    for node in (i, j, *cond):
        if node not in batch.node_ids:
            raise ValueError(f"node {node!r} not in batch")
    if len(cond) > len(batch.node_ids) - 2:
        raise ValueError("conditioning set too large for node count")
    n = batch.n_samples
    if n <= len(cond) + 3:
        raise ValueError(f"need more than |S|+3 samples, have {n}")

    ii = batch.node_ids.index(i)
    jj = batch.node_ids.index(j)
    cc = tuple(batch.node_ids.index(c) for c in cond)
    rho = partial_correlation(batch.values, ii, jj, cc)
    if abs(rho) >= 1.0 - 1e-12:
        return False  # perfectly correlated: dependence
    z = 0.5 * np.log((1.0 + rho) / (1.0 - rho))
    statistic = np.sqrt(n - len(cond) - 3) * abs(z)
    return bool(statistic <= stats.norm.ppf(1.0 - alpha / 2.0))


def pc_skeleton(batch: MetricBatch, alpha: float = 0.05, max_cond: int = 3) -> Skeleton:
    """PC skeleton phase: prune a complete graph by CI tests of growing order."""
    if len(batch.node_ids) < 3:
        raise ValueError("need at least 3 nodes for skeleton discovery")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0,1), got {alpha}")

    nodes = sorted(batch.node_ids)
    adjacent: dict[NodeId, set[NodeId]] = {
        n: set(nodes) - {n} for n in nodes
    }

    for level in range(0, max_cond + 1):
        snapshot = {n: sorted(neigh) for n, neigh in adjacent.items()}
        if all(len(snapshot[n]) - 1 < level for n in nodes):
            break
        removals: list[tuple[NodeId, NodeId]] = []
        for a, b in combinations(nodes, 2):
            if b not in adjacent[a]:
                continue
            tested: set[tuple[NodeId, ...]] = set()
            independent = False
            for base in (a, b):
                other = b if base == a else a
                pool = [n for n in snapshot[base] if n != other]
                if len(pool) < level:
                    continue
                for subset in combinations(pool, level):
                    if subset in tested:
                        continue
                    tested.add(subset)
                    if fisher_z_test(batch, a, b, set(subset), alpha):
                        independent = True
                        break
                if independent:
                    break
            if independent:
                removals.append((a, b))
        for a, b in removals:
            adjacent[a].discard(b)
            adjacent[b].discard(a)

    skeleton = Skeleton(nodes=nodes, alpha=alpha)
    for a in nodes:
        for b in adjacent[a]:
            if a < b:
                skeleton.add(a, b)
    return skeleton
