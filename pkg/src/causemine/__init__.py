"""Causal-diagnosis engine for distributed systems telemetry.

Pipeline: encode metrics -> similarity decode -> preference-feedback
refinement -> trace-based pruning -> rule-based context extension ->
random-walk root cause analysis.
"""

from .config import PipelineConfig
from .graph import (
    CausalEdge,
    CausalGraph,
    GraphMetrics,
    evaluate,
    is_dag,
    would_create_cycle,
)
from .ingest import MetricBatch, TraceDependencyGraph, extract_service_name

__version__ = "0.1.0"

__all__ = [
    "CausalEdge",
    "CausalGraph",
    "GraphMetrics",
    "MetricBatch",
    "PipelineConfig",
    "TraceDependencyGraph",
    "evaluate",
    "extract_service_name",
    "is_dag",
    "would_create_cycle",
    "__version__",
]
