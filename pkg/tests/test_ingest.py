import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from causemine.ingest import (
    MetricBatch,
    TraceDependencyGraph,
    extract_service_name,
    load_metrics,
    load_traces,
    write_traces,
)
from causemine.simulate import FaultSpec, default_avp_spec, generate_metrics, write_system_files


def write_samples(path, rows):
    with open(path, "w") as fh:
        for metric, pod, ts, value in rows:
            fh.write(json.dumps({"metric": metric, "pod": pod, "ts": ts, "value": value}) + "\n")


def test_window_count(tmp_path):
    rows = [("cpu_by_pod", "svc", 1000 + t, float(t)) for t in range(100)]
    path = tmp_path / "metrics.jsonl"
    write_samples(path, rows)
    batches = load_metrics(path, window=50, step=25)
    assert len(batches) == 3


def test_forward_fill_gap(tmp_path):
    path = tmp_path / "m.jsonl"
    rows = [("cpu_by_pod", "svc", 1000 + t, float(t)) for t in range(30)]
    rows[7] = ("cpu_by_pod", "svc", 1007, math.nan)  # NaN sample counts as a gap
    write_samples(path, rows)
    # a second full series keeps timestamp 1007 in the union grid
    with open(path, "a") as fh:
        for t in range(30):
            fh.write(json.dumps({"metric": "mem_by_pod", "pod": "svc", "ts": 1000 + t, "value": 1.0}) + "\n")
    (batch,) = load_metrics(path, window=30, step=30)
    filled = batch.series("svc_cpu_by_pod")
    assert filled[7] == filled[6] == 6.0


def test_window_exceeds_data(tmp_path):
    path = tmp_path / "m.jsonl"
    write_samples(path, [("cpu_by_pod", "svc", 1000 + t, 0.0) for t in range(9)])
    with pytest.raises(ValueError, match="window exceeds data"):
        load_metrics(path, window=10, step=5)


def test_malformed_line_reports_number(tmp_path):
    path = tmp_path / "m.jsonl"
    path.write_text('{"metric": "cpu_by_pod", "pod": "a", "ts": 1, "value": 1.0}\nnot json\n')
    with pytest.raises(ValueError, match="line 2"):
        load_metrics(path, window=10, step=10)


def test_empty_file_errors(tmp_path):
    path = tmp_path / "m.jsonl"
    path.write_text("")
    with pytest.raises(ValueError, match="empty"):
        load_metrics(path, window=10, step=10)


def test_sparse_series_excluded_with_warning(tmp_path, caplog):
    path = tmp_path / "m.jsonl"
    rows = [("cpu_by_pod", "a", 1000 + t, 1.0) for t in range(50)]
    rows += [("mem_by_pod", "a", 1000 + t, 2.0) for t in range(0, 50, 4)]  # 75% missing
    write_samples(path, rows)
    with caplog.at_level("WARNING"):
        (batch,) = load_metrics(path, window=50, step=50)
    assert batch.node_ids == ["a_cpu_by_pod"]
    assert "excluding" in caplog.text


def test_trace_aggregation(tmp_path):
    path = tmp_path / "t.json"
    path.write_text(json.dumps({"edges": [
        {"caller": "A", "callee": "B", "count": 3},
        {"caller": "A", "callee": "B", "count": 2},
    ]}))
    graph = load_traces(path)
    assert graph.edge_count == 1
    assert graph.edges[0].call_count == 5


def test_trace_self_loop_skipped_with_warning(tmp_path, caplog):
    path = tmp_path / "t.json"
    path.write_text(json.dumps({"edges": [{"caller": "A", "callee": "A", "count": 1}]}))
    with caplog.at_level("WARNING"):
        graph = load_traces(path)
    assert graph.edge_count == 0
    assert "self-loop" in caplog.text


def test_trace_negative_count_errors(tmp_path):
    path = tmp_path / "t.json"
    path.write_text(json.dumps({"edges": [{"caller": "A", "callee": "B", "count": -1}]}))
    with pytest.raises(ValueError, match="negative"):
        load_traces(path)


def test_trace_empty_is_valid(tmp_path):
    path = tmp_path / "t.json"
    path.write_text(json.dumps({"edges": []}))
    assert load_traces(path).edge_count == 0


def test_extract_service_name_plain():
    assert extract_service_name("valetparking_cpu_by_pod") == "valetparking"


def test_extract_service_name_with_pod_identifier():
    assert (
        extract_service_name("parkingspotmanager-7d9f8b6-x2k4j_mem_by_pod")
        == "parkingspotmanager"
    )


def test_extract_service_name_empty_remainder():
    with pytest.raises(ValueError, match="unresolvable service"):
        extract_service_name("_cpu_by_pod")


def test_extract_service_name_idempotent():
    once = extract_service_name("valetparking-7d9f8b6ab-x2k4j_cpu_by_pod")
    assert extract_service_name(once + "_cpu_by_pod") == once


@settings(max_examples=50, deadline=None)
@given(st.text(alphabet="abcdefgh", min_size=1, max_size=12))
def test_extract_idempotent_on_clean_names(name):
    assert extract_service_name(name) == name


def test_round_trip_bit_exact(tmp_path):
    spec, fault, _ = default_avp_spec()
    fault = FaultSpec(kind="queue_overflow", target_service="valetparking",
                      onset=100, magnitude=fault.magnitude)
    paths = write_system_files(tmp_path, spec, fault, horizon=150)
    batch = generate_metrics(spec, fault, 150)
    loaded = load_metrics(paths["metrics"], window=150, step=150)[0]
    assert loaded.node_ids == batch.node_ids
    assert loaded.timestamps == batch.timestamps
    assert np.array_equal(loaded.values, batch.values)  # bit-equal reals


def test_trace_file_round_trip(tmp_path):
    graph = TraceDependencyGraph()
    graph.add("A", "B", 5)
    graph.add("B", "C", 2)
    path = tmp_path / "t.json"
    write_traces(path, graph)
    back = load_traces(path)
    assert back.to_dict() == graph.to_dict()


def test_batch_invariants():
    with pytest.raises(ValueError, match="strictly increasing"):
        MetricBatch(node_ids=["a"], timestamps=[2, 2], values=np.zeros((1, 2)))
    with pytest.raises(ValueError, match="shape"):
        MetricBatch(node_ids=["a"], timestamps=[1, 2], values=np.zeros((2, 2)))
    with pytest.raises(ValueError, match="missing"):
        MetricBatch(node_ids=["a"], timestamps=[1, 2], values=np.array([[1.0, math.nan]]))


@settings(max_examples=30, deadline=None)
@given(
    st.integers(min_value=2, max_value=4),
    st.integers(min_value=12, max_value=40),
    st.integers(min_value=0, max_value=10_000),
)
def test_loaded_batches_satisfy_invariants(n_series, n_samples, seed):
    import tempfile, pathlib
    rng = np.random.default_rng(seed)
    tmp = pathlib.Path(tempfile.mkdtemp())
    path = tmp / "m.jsonl"
    rows = []
    for i in range(n_series):
        for t in range(n_samples):
            if rng.random() < 0.05:
                continue  # random gap
            rows.append(("cpu_by_pod", f"svc{i}", 1000 + t, float(rng.normal())))
    if not rows:
        return
    write_samples(path, rows)
    for batch in load_metrics(path, window=10, step=5):
        assert all(b > a for a, b in zip(batch.timestamps, batch.timestamps[1:]))
        assert batch.values.shape == (len(batch.node_ids), len(batch.timestamps))
        assert np.isfinite(batch.values).all()
