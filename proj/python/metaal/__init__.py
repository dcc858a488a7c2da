"""Meta-learned active selection: selectors, predictor and experiment runner."""

import json

from ._core import (
    CompareError,
    ConfigError,
    Dataset,
    cosine_similarity,
    euclidean_similarity,
    gen_synthetic,
    kmedoids,
    load_dataset,
    predict,
    replay,
    sample_alpha,
    select_random,
)

__all__ = [
    "CompareError",
    "ConfigError",
    "Dataset",
    "compare",
    "cosine_similarity",
    "default_config",
    "euclidean_similarity",
    "gen_synthetic",
    "kmedoids",
    "load_dataset",
    "predict",
    "replay",
    "run_experiment",
    "sample_alpha",
    "select_random",
]


def default_config():
    """The run configuration used when a key is not overridden."""
    from ._core import default_config_json

    return json.loads(default_config_json())


def run_experiment(config):
    """Run with `config` merged over default_config() (nested dicts merge key by key).

    Returns a dict with the result rows and the paths of results.csv,
    manifest.json and train_log.csv.
    """
    from ._core import run_experiment_json

    return run_experiment_json(json.dumps(config))


def compare(paths):
    from ._core import compare_json

    return json.loads(compare_json([str(p) for p in paths]))
