#!/usr/bin/env python3
"""Calibrate the base-decoder threshold on the default simulator.

For each seed: train the encoder, embed the mining window, and find the
largest threshold that still includes every ground-truth edge (full recall).
The shipped default must sit below the minimum over seeds with some margin,
while keeping raw precision under the acceptance ceiling.

Usage: python scripts/calibrate_tau_base.py [--seeds 17 3 99 42 7]
"""

import argparse

from causemine.config import PipelineConfig
from causemine.decode import BasePolicyConfig, base_edge_probability, decode_raw
from causemine.encoder import encode, node_features
from causemine.graph import evaluate
from causemine.pipeline import prepare_data, train_encoder_artifact


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seeds", type=int, nargs="+", default=[17, 3, 99, 42, 7])
    parser.add_argument("--margin", type=float, default=0.02)
    args = parser.parse_args()

    default = PipelineConfig()
    rows = []
    for seed in args.seeds:
        config = PipelineConfig(seed=seed)
        data = prepare_data(config)
        artifact = train_encoder_artifact(config, data)
        features = node_features(data.mining_batch)
        embeddings = encode(artifact.params, features, artifact.skeleton)
        truth = data.ground_truth.causal_graph
        min_prob = min(
            base_edge_probability(embeddings[e.source], embeddings[e.target])
            for e in truth.edges
        )
        raw = decode_raw(embeddings, BasePolicyConfig(tau_base=default.tau_base))
        metrics = evaluate(raw, truth, level="node")
        rows.append((seed, min_prob, raw.edge_count, metrics.precision, metrics.recall))
        print(
            f"seed {seed:>5}: weakest true-edge probability {min_prob:.4f} | "
            f"raw@{default.tau_base}: {raw.edge_count} edges, "
            f"P={metrics.precision:.3f}, R={metrics.recall:.3f}"
        )

    ceiling = min(r[1] for r in rows)
    recommended = ceiling - args.margin
    print(f"\nlargest full-recall threshold across seeds: {ceiling:.4f}")
    print(f"recommended tau_base (margin {args.margin}): <= {recommended:.4f}")
    status = "OK" if default.tau_base <= recommended else "TOO HIGH"
    print(f"shipped default tau_base = {default.tau_base}: {status}")
    worst_precision = max(r[3] for r in rows)
    print(f"worst raw precision at default: {worst_precision:.3f} (acceptance ceiling 0.30)")


if __name__ == "__main__":
    main()
