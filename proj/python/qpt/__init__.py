"""Hamiltonian reconstruction from time-delayed measurements.

Thin convenience layer over the compiled core: configs and reports cross the
boundary as json text, these wrappers turn them into plain dicts.
"""

import json

from ._core import (
    QptError,
    aggregate_reports_json,
    dense_hamiltonian,
    evolve_state,
    expectation,
    pauli_labels,
    preset_config_json,
    preset_names,
    random_state,
    run_experiment_json,
    sample_trajectory_csv,
    simulate_to_dir,
    time_schedule,
)

__all__ = [
    "QptError",
    "aggregate_reports",
    "dense_hamiltonian",
    "evolve_state",
    "expectation",
    "pauli_labels",
    "preset_config",
    "preset_names",
    "random_state",
    "run_experiment",
    "sample_trajectory_csv",
    "simulate_to_dir",
    "time_schedule",
]


def preset_config(name):
    """Fully resolved configuration of a shipped preset, as a dict."""
    return json.loads(preset_config_json(name))


def run_experiment(config):
    """Run the configured trials and return the report as a dict.

    `config` may be a dict (e.g. a modified `preset_config` result) or json
    text.  Unknown keys are rejected.
    """
    if isinstance(config, dict):
        config = json.dumps(config)
    return json.loads(run_experiment_json(config))


def aggregate_reports(reports):
    """Pool per-trial histories of several reports into quantile curves.

    `reports` is an iterable of report dicts or json texts; returns a dict
    with `loss` and, when present, `error` curve blocks.
    """
    texts = [r if isinstance(r, str) else json.dumps(r) for r in reports]
    return json.loads(aggregate_reports_json(texts))
