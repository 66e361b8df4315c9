import json
import math

import numpy as np
import pytest

import pympts


def test_mmd_closed_form():
    sigma = 0.8
    a = np.zeros((1, 2))
    b = np.full((1, 2), sigma)
    assert pympts.mmd2(a, b, [sigma]) == pytest.approx(2.0 - 2.0 * math.exp(-1.0), abs=1e-12)
    assert abs(pympts.mmd2(a, a, [sigma])) < 1e-12


def test_mmd_grad_matches_finite_differences():
    rng = np.random.default_rng(0)
    a, b = rng.normal(size=(5, 3)), rng.normal(size=(4, 3))
    ga, _ = pympts.mmd2_grad(a, b, [1.2])
    h = 1e-6
    num = np.zeros_like(a)
    for i in range(a.shape[0]):
        for j in range(a.shape[1]):
            p, m = a.copy(), a.copy()
            p[i, j] += h
            m[i, j] -= h
            num[i, j] = (pympts.mmd2(p, b, [1.2]) - pympts.mmd2(m, b, [1.2])) / (2 * h)
    assert np.max(np.abs(ga - num)) < 1e-7


def test_entropy_and_top_k():
    s = pympts.entropy_scores(np.array([[0.5, 0.5], [1.0, 0.0]]))
    assert s[0] == pytest.approx(math.log(2.0))
    assert s[1] == 0.0
    assert pympts.select_top_k([0.1, 0.9, 0.9, 0.3], 2) == [1, 2]


def test_bald_identical_passes_score_zero():
    p = np.array([[0.2, 0.8], [0.6, 0.4]])
    assert np.allclose(pympts.bald_scores([p, p, p]), 0.0, atol=1e-12)


def test_schedule():
    steps = pympts.checkpoint_steps(steps_per_epoch=3, epochs=100, n_checkpoints=5)
    assert steps == [179, 209, 239, 269, 299]
    assert pympts.cyclic_lr(0, 3) == pytest.approx(1e-3)
    assert pympts.cyclic_lr(299, 3) == pytest.approx(1e-4)


def test_model_and_training():
    x, y, c = pympts.synth_blobs(3, 30, 4, 6.0, seed=1)
    assert x.shape == (90, 4) and c == 3
    net = pympts.Mlp.init([4, 8, 3], seed=2)
    p = net.predict_proba(x)
    assert p.shape == (90, 3)
    assert np.allclose(p.sum(axis=1), 1.0)

    labeled = list(range(0, 90, 3))
    unlabeled = [i for i in range(90) if i % 3]
    r = pympts.train_round(x, list(y), labeled, unlabeled, [4, 8, 3], epochs=10,
                           base_lr=0.05, batch_size=8, n_checkpoints=2, seed=4)
    assert len(r["trajectory"]) == 2
    assert r["history"]["mean_ce"][-1] < r["history"]["mean_ce"][0]
    avg = pympts.avg_predict(r["trajectory"], x)
    assert np.allclose(avg.sum(axis=1), 1.0)


def test_errors_are_typed():
    with pytest.raises(pympts.ParameterError):
        pympts.mmd2(np.zeros((0, 2)), np.zeros((1, 2)), [1.0])
    with pytest.raises(pympts.ConfigError):
        pympts.resolve_config(json.dumps({"dataset": {"kind": "synthetic"}, "budget": 0}))


def test_experiment_is_deterministic():
    cfg = json.dumps({
        "dataset": {"kind": "synthetic", "classes": 3, "per_class": 30, "dim": 4, "separation": 5},
        "initial_count": 10, "budget": 10, "rounds": 2, "repeats": 1,
        "methods": ["mpts", "random"],
        "train": {"epochs": 4, "n_checkpoints": 2, "batch_size": 16, "base_lr": 0.05},
        "master_seed": 3,
    })
    a = pympts.run_experiment(cfg, jobs=1)
    b = pympts.run_experiment(cfg, jobs=2)
    assert a == b
    assert [r["labeled_count"] for r in a if r["method"] == "mpts"] == [10, 20]


def test_gradcheck_passes():
    assert all(s["passed"] for s in pympts.gradcheck(0))
