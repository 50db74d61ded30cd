"""Shared fixtures: one pre-trained encoder artifact and simulated data per
session, so the heavier pipeline/API/acceptance tests don't repeat the
expensive setup."""

import pytest

from causemine.config import PipelineConfig
from causemine.pipeline import prepare_data, train_encoder_artifact


@pytest.fixture(scope="session")
def default_config():
    return PipelineConfig()


@pytest.fixture(scope="session")
def default_data(default_config):
    return prepare_data(default_config)


@pytest.fixture(scope="session")
def default_artifact(default_config, default_data):
    return train_encoder_artifact(default_config, default_data)


QUEUE_RULE_TEXT = '''rule_id: "parking_queue_overflow"
condition:
  metric: "valetparking_cpu_by_pod"
  threshold: 80.0
  operator: ">"
inject_node: "parking_queue"
inject_edge:
  from: "parking_queue"
  to: "valetparking_cpu_by_pod"
'''


@pytest.fixture(scope="session")
def queue_rule_text():
    return QUEUE_RULE_TEXT
