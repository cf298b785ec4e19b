"""Python access to the churn toolkit's C++ core."""

import json as _json

from . import _core
from ._core import (
    ConfigError,
    ContractError,
    DataError,
    NumericError,
    churn_date,
    confusion,
    label_player,
    load_dataset,
    roc_auc,
    roc_curve,
    stratified_kfold,
)


def _cfg(config):
    return _json.dumps(config or {})


def config_hash(config=None):
    return _core.config_hash(_cfg(config))


def synth(config, out):
    """Generate events.csv and profiles.csv; returns (players, events)."""
    return _core.synth(_cfg(config), str(out))


def label(config, out):
    """Write samples.csv; returns (eligible, churners)."""
    return _core.label(_cfg(config), str(out))


def featurize(config, out):
    return _core.featurize(_cfg(config), str(out))


def train(config, out, arch):
    return _core.train(_cfg(config), str(out), arch)


def evaluate(config, out):
    return _core.evaluate(_cfg(config), str(out))


def importance(config, out):
    return _core.importance(_cfg(config), str(out))


def report(config, out):
    return _core.report(_cfg(config), str(out))


def run_pipeline(config, out):
    synth(config, out)
    label(config, out)
    featurize(config, out)
    return evaluate(config, out)
