"""Limited-adaptivity linear contextual bandits and distributional G-optimal design."""

import json as _json

try:
    from adaptivity._core import *  # installed layout
    from adaptivity._core import run_experiment as _run_experiment_json
except ImportError:  # in-tree build: the module sits next to the package on sys.path
    from _core import *
    from _core import run_experiment as _run_experiment_json

__version__ = "0.1.0"


def run_experiment(config):
    """Run an experiment from a config dict (or JSON string); returns the summary dict."""
    if not isinstance(config, str):
        config = _json.dumps(config)
    return _json.loads(_run_experiment_json(config))
