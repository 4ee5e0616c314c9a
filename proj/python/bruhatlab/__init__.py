"""Numerical experiments on the Bruhat sphere groupoid."""

import json

from ._core import *  # noqa: F401,F403
from ._core import BruhatError, ConfigInvalid, run_experiment_json


def run_experiment(config):
    """Run an experiment from a config dict (or JSON text) and return the report as a dict."""
    text = config if isinstance(config, str) else json.dumps(config)
    return json.loads(run_experiment_json(text))
