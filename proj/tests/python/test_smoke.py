import json

import numpy as np
import pytest

import churnkit

SMALL = {
    "seed": 3,
    "synth": {"player_count": 800},
    "train": {"max_epochs": 2, "batch_size": 64},
    "forest": {"n_trees": 5},
    "architectures": ["rf", "lstm", "lstm-hidden"],
    "folds": 2,
}


def test_pipeline(tmp_path):
    players, events = churnkit.synth(SMALL, tmp_path)
    assert players == 800 and events > 0
    eligible, churners = churnkit.label(SMALL, tmp_path)
    assert 0 < churners < eligible
    assert churnkit.featurize(SMALL, tmp_path) == eligible

    data = churnkit.load_dataset(str(tmp_path / "dataset.bin"))
    assert data["temporal"].shape == (eligible, 14, 10)
    assert data["aggregate"].shape == (eligible, 36)
    assert int(np.sum(data["labels"])) == churners

    churnkit.evaluate(SMALL, tmp_path)
    metrics = json.loads((tmp_path / "metrics_lstm.json").read_text())
    assert metrics["config_hash"] == churnkit.config_hash(SMALL)
    assert 0.5 < metrics["auc"]["mean"] <= 1.0


def test_labeling_and_metrics():
    assert churnkit.churn_date([0, 1, 2], 40) == 2
    assert churnkit.roc_auc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == 0.75
    curve = churnkit.roc_curve([0.1, 0.9], [0, 1])
    assert curve[0][2] == float("inf")
    folds = churnkit.stratified_kfold([0, 1] * 10, 5, 1)
    assert sorted(i for f in folds for i in f) == list(range(20))


def test_errors():
    with pytest.raises(churnkit.ConfigError):
        churnkit.config_hash({"nope": 1})
    with pytest.raises(churnkit.ContractError):
        churnkit.roc_auc([0.1, 0.2], [1, 1])
