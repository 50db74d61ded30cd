"""Metric/trace file parsing, window alignment, and service-name extraction.

File formats:

* Metrics: JSON Lines, one sample per line:
  ``{"metric": "cpu_by_pod", "pod": "valetparking-7d9f8b6ab-x2k4j", "ts": 1700000000, "value": 12.5}``
  The node id is ``<pod-or-service>_<metric>``; trailing Kubernetes
  deployment/pod identifiers are stripped from the pod name on load, so
  replicas of one service share a node.
* Traces: a single JSON object ``{"edges": [{"caller": ..., "callee": ..., "count": ...}]}``
  at service granularity.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .graph import NodeId

log = logging.getLogger(__name__)

DEFAULT_SUFFIXES = ("_cpu_by_pod", "_mem_by_pod")

# Kubernetes-style deployment/pod identifier: `-<6..10 alnum>-<5 alnum>`
_POD_ID_RE = re.compile(r"-[a-z0-9]{6,10}-[a-z0-9]{5}$")


@dataclass
class MetricBatch:
    """Aligned multivariate window: values[i, t] is node i at timestamps[t]."""

    node_ids: list[NodeId]
    timestamps: list[int]
    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (len(self.node_ids), len(self.timestamps)):
            raise ValueError(
                f"values shape {self.values.shape} does not match "
                f"{len(self.node_ids)} nodes x {len(self.timestamps)} timestamps"
            )
        ts = self.timestamps
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("timestamps must be strictly increasing")
        if np.isnan(self.values).any():
            raise ValueError("batch contains missing values after alignment")

    @property
    def n_samples(self) -> int:
        return len(self.timestamps)

    def series(self, node: NodeId) -> np.ndarray:
        return self.values[self.node_ids.index(node)]

    def latest(self, node: NodeId) -> float:
        return float(self.series(node)[-1])

    def thin(self, step: int) -> "MetricBatch":
        """Every step-th sample; used to de-correlate series before CI tests."""
        if step < 1:
            raise ValueError(f"thin step must be >= 1, got {step}")
        return MetricBatch(
            node_ids=list(self.node_ids),
            timestamps=self.timestamps[::step],
            values=self.values[:, ::step].copy(),
        )


@dataclass(frozen=True)
class TraceEdge:
    caller: str
    callee: str
    call_count: int

    def __post_init__(self) -> None:
        if self.caller == self.callee:
            raise ValueError(f"self-loop trace edge: {self.caller!r}")
        if self.call_count < 1:
            raise ValueError(f"call count must be >= 1, got {self.call_count}")


@dataclass
class TraceDependencyGraph:
    """Service-level call graph; one edge per (caller, callee) pair."""

    _edges: dict[tuple[str, str], TraceEdge] = field(default_factory=dict)

    @property
    def edges(self) -> list[TraceEdge]:
        return [self._edges[k] for k in sorted(self._edges)]

    @property
    def edge_count(self) -> int:
        return len(self._edges)

    def add(self, caller: str, callee: str, count: int = 1) -> None:
        if caller == callee:
            raise ValueError(f"self-loop trace edge: {caller!r}")
        key = (caller, callee)
        existing = self._edges.get(key)
        total = count + (existing.call_count if existing else 0)
        self._edges[key] = TraceEdge(caller, callee, total)

    def has(self, caller: str, callee: str) -> bool:
        return (caller, callee) in self._edges

    def pairs(self) -> set[tuple[str, str]]:
        return set(self._edges)

    def to_dict(self) -> dict:
        return {
            "edges": [
                {"caller": e.caller, "callee": e.callee, "count": e.call_count}
                for e in self.edges
            ]
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TraceDependencyGraph":
        graph = cls()
        for item in data.get("edges", []):
            graph.add(item["caller"], item["callee"], item["count"])
        return graph


def extract_service_name(node: NodeId, suffixes: list[str] | None = None) -> str:
    """Strip the longest matching metric suffix, then a trailing pod identifier.

    ``"parkingspotmanager-7d9f8b6-x2k4j_mem_by_pod"`` -> ``"parkingspotmanager"``.
    Raises on empty remainder.
    """
    suffixes = list(suffixes) if suffixes is not None else list(DEFAULT_SUFFIXES)
    if not suffixes:
        raise ValueError("suffix list must be non-empty")
    remainder = node
    for suffix in sorted(suffixes, key=len, reverse=True):
        if remainder.endswith(suffix):
            remainder = remainder[: -len(suffix)]
            break
    remainder = _POD_ID_RE.sub("", remainder)
    if not remainder:
        raise ValueError(f"unresolvable service: node {node!r} reduces to empty name")
    return remainder


def write_metrics(path: str | Path, batch: MetricBatch) -> None:
    """Emit a batch in the JSON Lines sample format (one line per sample)."""
    with open(path, "w") as fh:
        for t, ts in enumerate(batch.timestamps):
            for i, node in enumerate(batch.node_ids):
                pod, metric = _split_node(node)
                record = {
                    "metric": metric,
                    "pod": pod,
                    "ts": int(ts),
                    "value": batch.values[i, t],
                }
                fh.write(json.dumps(record) + "\n")


def _split_node(node: NodeId) -> tuple[str, str]:
    """Invert `<pod>_<metric>` using the known metric suffix convention."""
    for suffix in DEFAULT_SUFFIXES:
        if node.endswith(suffix):
            return node[: -len(suffix)], suffix[1:]
    pod, _, metric = node.partition("_")
    if not metric:
        raise ValueError(f"cannot split node id {node!r} into pod and metric")
    return pod, metric


def write_traces(path: str | Path, traces: TraceDependencyGraph) -> None:
    Path(path).write_text(json.dumps(traces.to_dict(), indent=2, sort_keys=True))


def load_traces(path: str | Path) -> TraceDependencyGraph:
    """Parse a trace file; duplicate rows are summed, self-loops skipped."""
    data = json.loads(Path(path).read_text())
    graph = TraceDependencyGraph()
    for idx, item in enumerate(data.get("edges", [])):
        caller, callee, count = item["caller"], item["callee"], item["count"]
        if count < 0:
            raise ValueError(f"negative call count in trace edge {idx}: {count}")
        if caller == callee:
            log.warning("skipping self-loop trace edge %r (row %d)", caller, idx)
            continue
        if count == 0:
            continue
        graph.add(caller, callee, count)
    return graph


def _parse_metric_lines(path: str | Path) -> dict[NodeId, dict[int, float]]:
    series: dict[NodeId, dict[int, float]] = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                pod = _POD_ID_RE.sub("", record["pod"])
                node = f"{pod}_{record['metric']}"
                ts = int(record["ts"])
                value = float(record["value"])
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"malformed metric line {lineno}: {exc}") from exc
            if np.isnan(value):
                continue  # explicit NaN sample counts as a gap
            series.setdefault(node, {})[ts] = value
    if not series:
        raise ValueError(f"empty metric file: {path}")
    return series


def load_metrics(path: str | Path, window: int, step: int) -> list[MetricBatch]:
    """Sliding windows of length ``window`` with stride ``step``.

    Gaps inside a series are forward-filled. A series missing more than 20%
    of a window's timestamps is excluded from that window with a warning.
    """
    if window < 10:
        raise ValueError(f"window must be >= 10, got {window}")
    if step < 1:
        raise ValueError(f"step must be >= 1, got {step}")
    series = _parse_metric_lines(path)

    all_ts = sorted({ts for values in series.values() for ts in values})
    if window > len(all_ts):
        raise ValueError(
            f"window exceeds data: window={window}, samples={len(all_ts)}"
        )

    batches = []
    for start in range(0, len(all_ts) - window + 1, step):
        win_ts = all_ts[start : start + window]
        node_ids, rows = [], []
        for node in sorted(series):
            points = series[node]
            missing = sum(1 for ts in win_ts if ts not in points)
            if missing > 0.2 * window:
                log.warning(
                    "excluding %s from window starting at %d: %d/%d samples missing",
                    node, win_ts[0], missing, window,
                )
                continue
            row, last = [], None
            for ts in win_ts:
                if ts in points:
                    last = points[ts]
                elif last is None:
                    # leading gap: backfill from first available point in window
                    upcoming = [points[u] for u in win_ts if u in points]
                    last = upcoming[0]
                row.append(last)
            node_ids.append(node)
            rows.append(row)
        batches.append(
            MetricBatch(node_ids=node_ids, timestamps=list(win_ts), values=np.array(rows))
        )
    return batches
