"""Synthetic telemetry and trace generation from a known causal structure.

The generator runs a lag-1 linear structural model over the pod-metric
nodes at a fine tick resolution:
``x_i(t) = ar_coef * x_i(t-1) + sum_j a_ji * x_j(t-1) + eps_i(t)``
with Gaussian innovations, and emits every ``scrape_every``-th tick the way
a metrics scraper samples a gauge. Causal propagation (one tick) is much
faster than the scrape interval, so cause and effect co-occur within an
emitted sample while consecutive emitted samples are essentially
decorrelated; the conditional-independence structure of the emitted series
then mirrors the generating adjacency, which is what downstream
constraint-based discovery assumes.

The queue-overflow fault maintains a latent AR(1) backlog series (per
emitted sample) that is scaled and added to the target service's cpu
metric at emission time; the latent series itself never appears in the
batch, which is exactly the hidden-cause situation the context rules
exist for.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._kernels import var1_recurrence
from .graph import CausalEdge, CausalGraph, NodeId, is_dag
from .ingest import MetricBatch, TraceDependencyGraph

QUEUE_AR_COEF = 0.95
BURN_IN = 300  # pre-horizon samples discarded so emitted series start stationary
TS_START = 1_700_000_000
TS_STEP = 15


@dataclass
class SystemSpec:
    services: list[str]
    causal_adjacency: dict[tuple[NodeId, NodeId], float]
    metrics_per_service: list[str] = field(
        default_factory=lambda: ["cpu_by_pod", "mem_by_pod"]
    )
    noise_std: float = 1.0
    ar_coef: float = 0.4
    scrape_every: int = 10
    seed: int = 0

    def __post_init__(self) -> None:
        if self.noise_std <= 0:
            raise ValueError("noise_std must be > 0")
        if self.scrape_every < 1:
            raise ValueError("scrape_every must be >= 1")
        nodes = set(self.node_ids())
        for (src, dst), coef in self.causal_adjacency.items():
            if src not in nodes or dst not in nodes:
                raise ValueError(f"adjacency references unknown node: {(src, dst)}")
            if src == dst:
                raise ValueError(f"self-loop in causal adjacency: {src!r}")
            if abs(coef) > 0.95:
                raise ValueError(f"|coefficient| must be <= 0.95, got {coef} on {(src, dst)}")
        if not is_dag(self.causal_graph()):
            raise ValueError("causal adjacency must be acyclic")

    def node_ids(self) -> list[NodeId]:
        return sorted(
            f"{svc}_{metric}" for svc in self.services for metric in self.metrics_per_service
        )

    def causal_graph(self, stage: str = "context_extended") -> CausalGraph:
        graph = CausalGraph(stage=stage, nodes=set(self.node_ids()))
        for (src, dst), coef in sorted(self.causal_adjacency.items()):
            graph.add_edge(CausalEdge(src, dst, min(abs(coef), 1.0), "base"))
        return graph

    def pod_names(self) -> dict[str, str]:
        """Deterministic Kubernetes-style pod name per service."""
        rng = np.random.default_rng(self.seed + 1)
        hex_chars = np.array(list("0123456789abcdef"))
        alnum = np.array(list("abcdefghijklmnopqrstuvwxyz0123456789"))
        names = {}
        for svc in sorted(self.services):
            deploy = "".join(rng.choice(hex_chars, size=9))
            pod = "".join(rng.choice(alnum, size=5))
            names[svc] = f"{svc}-{deploy}-{pod}"
        return names


@dataclass
class FaultSpec:
    kind: str = "none"
    target_service: str = ""
    onset: int = 0
    magnitude: float = 0.0
    latent_node: NodeId = "parking_queue"

    def __post_init__(self) -> None:
        if self.kind not in ("queue_overflow", "none"):
            raise ValueError(f"unknown fault kind {self.kind!r}")
        if self.kind == "queue_overflow" and self.magnitude <= 0:
            raise ValueError("fault magnitude must be > 0")


@dataclass
class GroundTruth:
    causal_graph: CausalGraph
    trace_graph: TraceDependencyGraph
    fault_root: NodeId | None = None


def _coef_matrix(spec: SystemSpec) -> tuple[list[NodeId], np.ndarray]:
    nodes = spec.node_ids()
    index = {node: i for i, node in enumerate(nodes)}
    coef = np.zeros((len(nodes), len(nodes)))
    np.fill_diagonal(coef, spec.ar_coef)
    for (src, dst), value in spec.causal_adjacency.items():
        coef[index[src], index[dst]] = value
    return nodes, coef


def latent_queue_series(horizon: int, onset: int) -> np.ndarray:
    """Backlog ramp: zero before onset, then q(t) = 0.95 q(t-1) + 1."""
    q = np.zeros(horizon)
    prev = 0.0
    for t in range(onset, horizon):
        prev = QUEUE_AR_COEF * prev + 1.0
        q[t] = prev
    return q


def generate_metrics(spec: SystemSpec, fault: FaultSpec, horizon: int) -> MetricBatch:
    """Simulate ``horizon`` samples of every pod-metric node.

    Deterministic given ``spec.seed``. Raises if the coefficient matrix is
    unstable (spectral radius >= 1) or the fault onset lies outside the
    horizon.
    """
    if horizon < 100:
        raise ValueError(f"horizon must be >= 100, got {horizon}")
    nodes, coef = _coef_matrix(spec)
    radius = float(np.max(np.abs(np.linalg.eigvals(coef))))
    if radius >= 1.0:
        raise ValueError(f"unstable spec: spectral radius {radius:.3f} >= 1")

    rng = np.random.default_rng(spec.seed)
    ticks = BURN_IN + horizon * spec.scrape_every
    innovations = rng.normal(0.0, spec.noise_std, size=(ticks, len(nodes)))
    trajectory = var1_recurrence(coef, innovations)
    scraped = trajectory[BURN_IN + spec.scrape_every - 1 :: spec.scrape_every]
    values = scraped.copy()  # (horizon, n)

    if fault.kind == "queue_overflow":
        if not 0 <= fault.onset < horizon:
            raise ValueError(f"fault onset {fault.onset} outside horizon {horizon}")
        target = f"{fault.target_service}_cpu_by_pod"
        if target not in nodes:
            raise ValueError(f"fault target node {target!r} not in system")
        queue = latent_queue_series(horizon, fault.onset)
        values[:, nodes.index(target)] += fault.magnitude * queue

    timestamps = [TS_START + TS_STEP * t for t in range(horizon)]
    return MetricBatch(node_ids=nodes, timestamps=timestamps, values=values.T.copy())


def generate_traces(
    spec: SystemSpec, drop_services: tuple[str, ...] = ()
) -> TraceDependencyGraph:
    """Service-level projection of the causal adjacency as a call graph.

    ``drop_services`` models services whose invocations never made it into
    the trace sample; all edges touching them are omitted.
    """
    counts: dict[tuple[str, str], int] = {}
    for src, dst in spec.causal_adjacency:
        src_svc = _service_of(src, spec)
        dst_svc = _service_of(dst, spec)
        if src_svc == dst_svc:
            continue
        if src_svc in drop_services or dst_svc in drop_services:
            continue
        counts[(src_svc, dst_svc)] = counts.get((src_svc, dst_svc), 0) + 100
    traces = TraceDependencyGraph()
    for (caller, callee), count in sorted(counts.items()):
        traces.add(caller, callee, count)
    return traces


def _service_of(node: NodeId, spec: SystemSpec) -> str:
    for metric in spec.metrics_per_service:
        suffix = f"_{metric}"
        if node.endswith(suffix):
            return node[: -len(suffix)]
    raise ValueError(f"node {node!r} does not carry a known metric suffix")


AVP_SERVICES = [
    "authgateway",
    "carcontrol",
    "fleetcoord",
    "mapprovider",
    "parkinglotmgmt",
    "parkingspotmanager",
    "valetparking",
]

# 19 node-level edges over 10 service pairs: parallel cpu/mem request
# chains, three cross-metric spillovers, four intra-service cpu->mem links.
# Layered (no node-level triangles, in-degree <= 2), which keeps the
# conditional-independence structure of the stationary series close to the
# adjacency.
AVP_ADJACENCY: dict[tuple[NodeId, NodeId], float] = {
    # cpu request chain
    ("valetparking_cpu_by_pod", "authgateway_cpu_by_pod"): 0.42,
    ("valetparking_cpu_by_pod", "parkingspotmanager_cpu_by_pod"): 0.42,
    ("parkingspotmanager_cpu_by_pod", "fleetcoord_cpu_by_pod"): 0.4,
    ("fleetcoord_cpu_by_pod", "carcontrol_cpu_by_pod"): 0.42,
    ("carcontrol_cpu_by_pod", "mapprovider_cpu_by_pod"): 0.4,
    ("valetparking_cpu_by_pod", "parkinglotmgmt_cpu_by_pod"): 0.42,
    # mem chain
    ("valetparking_mem_by_pod", "parkingspotmanager_mem_by_pod"): 0.42,
    ("parkingspotmanager_mem_by_pod", "fleetcoord_mem_by_pod"): 0.4,
    ("fleetcoord_mem_by_pod", "carcontrol_mem_by_pod"): 0.42,
    ("carcontrol_mem_by_pod", "mapprovider_mem_by_pod"): 0.4,
    ("valetparking_mem_by_pod", "parkinglotmgmt_mem_by_pod"): 0.42,
    ("parkinglotmgmt_mem_by_pod", "mapprovider_mem_by_pod"): 0.36,
    # cross-metric spillovers
    ("parkinglotmgmt_mem_by_pod", "fleetcoord_cpu_by_pod"): 0.36,
    ("fleetcoord_mem_by_pod", "mapprovider_cpu_by_pod"): 0.36,
    ("parkingspotmanager_mem_by_pod", "carcontrol_cpu_by_pod"): 0.36,
    # intra-service load -> memory pressure
    ("valetparking_cpu_by_pod", "valetparking_mem_by_pod"): 0.42,
    ("parkingspotmanager_cpu_by_pod", "parkingspotmanager_mem_by_pod"): 0.4,
    ("parkinglotmgmt_cpu_by_pod", "parkinglotmgmt_mem_by_pod"): 0.4,
    ("fleetcoord_cpu_by_pod", "fleetcoord_mem_by_pod"): 0.4,
}

# authgateway has a single inbound call edge; putting it on the trace drop
# list loses exactly 1 of 10 service-level edges.
AVP_LOW_TRAFFIC_SERVICE = "authgateway"

DEFAULT_HORIZON = 4000
DEFAULT_FAULT_ONSET = 3950
DEFAULT_FAULT_MAGNITUDE = 8.0


def default_avp_spec() -> tuple[SystemSpec, FaultSpec, GroundTruth]:
    """Seven-service valet-parking analogue with a 19-edge ground truth."""
    spec = SystemSpec(
        services=list(AVP_SERVICES),
        causal_adjacency=dict(AVP_ADJACENCY),
        seed=7,
    )
    fault = FaultSpec(
        kind="queue_overflow",
        target_service="valetparking",
        onset=DEFAULT_FAULT_ONSET,
        magnitude=DEFAULT_FAULT_MAGNITUDE,
        latent_node="parking_queue",
    )
    truth = GroundTruth(
        causal_graph=spec.causal_graph(),
        trace_graph=generate_traces(spec),
        fault_root=fault.latent_node,
    )
    return spec, fault, truth


def write_system_files(
    out_dir: str | Path,
    spec: SystemSpec,
    fault: FaultSpec,
    horizon: int,
    drop_services: tuple[str, ...] = (),
) -> dict[str, Path]:
    """Emit metrics.jsonl / traces.json / ground_truth.json for ingestion."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    batch = generate_metrics(spec, fault, horizon)
    pods = spec.pod_names()

    metrics_path = out / "metrics.jsonl"
    with open(metrics_path, "w") as fh:
        for t, ts in enumerate(batch.timestamps):
            for i, node in enumerate(batch.node_ids):
                svc = _service_of(node, spec)
                metric = node[len(svc) + 1 :]
                record = {
                    "metric": metric,
                    "pod": pods[svc],
                    "ts": ts,
                    "value": batch.values[i, t],
                }
                fh.write(json.dumps(record) + "\n")

    traces_path = out / "traces.json"
    traces = generate_traces(spec, drop_services=drop_services)
    traces_path.write_text(json.dumps(traces.to_dict(), indent=2, sort_keys=True))

    truth_path = out / "ground_truth.json"
    truth_path.write_text(spec.causal_graph().to_json())
    return {"metrics": metrics_path, "traces": traces_path, "ground_truth": truth_path}
