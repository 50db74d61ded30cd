"""Pipeline configuration: one documented key per tunable default."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from .ingest import DEFAULT_SUFFIXES


@dataclass
class PipelineConfig:
    # data acquisition: directory with metrics.jsonl/traces.json (None -> simulate)
    data_dir: str | None = None
    horizon: int = 4000
    window: int = 3000
    step: int = 500
    metric_suffixes: list[str] = field(default_factory=lambda: list(DEFAULT_SUFFIXES))
    drop_services: list[str] = field(default_factory=list)
    seed: int = 17

    # skeleton discovery
    alpha: float = 0.05
    max_cond: int = 3
    pc_thin: int = 4

    # encoder
    variant: str = "gcn"
    hidden_dim: int = 32
    embed_dim: int = 16
    margin: float = 0.5
    encoder_lr: float = 1e-3
    encoder_epochs: int = 500

    # decoding thresholds
    tau_base: float = 0.55
    tau_policy: float = 0.5

    # feedback loop
    retrain_threshold: int = 10
    targets_per_round: int = 5
    candidate_pool: int = 8
    reward_epochs: int = 3000
    reward_lr: float = 0.1
    reward_l2: float = 0.001
    ddpg_updates: int = 12000
    ddpg_batch: int = 256
    critic_warmup_frac: float = 0.5
    reward_center_quantile: float = 0.4
    buffer_capacity: int = 1024
    noise_std: float = 0.2
    actor_lr: float = 0.02
    critic_lr: float = 0.1
    epsilon: float = 0.2
    q_alpha: float = 0.1
    gamma: float = 0.0
    oracle_noise: float = 0.0
    feedback_timeout: float = 120.0

    # pruning
    tau_conf: float = 0.5
    drop_intra_service: bool = True

    # context rules and RCA
    rules_path: str | None = None
    z_threshold: float = 3.0
    walks: int = 1000
    max_steps: int = 10
    restart_prob: float = 0.15

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path: str | Path) -> "PipelineConfig":
        data = yaml.safe_load(Path(path).read_text()) or {}
        if not isinstance(data, dict):
            raise ValueError("config file must contain a key-value mapping")
        return cls.from_dict(data)
