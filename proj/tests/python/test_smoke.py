"""Smoke tests for the compiled advsel module."""

import numpy as np
import pytest

import advsel


@pytest.fixture(scope="module")
def blobs():
    means = [[0.3] * 6, [0.7] * 6]
    return advsel.synth_gaussians(seed=5, samples_per_class=80, dims=6,
                                  class_means=means, sigma=0.08)


def test_forward_shape_and_determinism():
    model = advsel.Model.init([4, 8, 3], seed=1)
    x = np.random.RandomState(0).rand(5, 4)
    logits = model.forward(x)
    assert logits.shape == (5, 3)
    assert np.array_equal(logits, model.forward(x))
    same = advsel.Model.init([4, 8, 3], seed=1)
    assert model.equals_bitwise(same)


def test_gradients_match_finite_differences():
    model = advsel.Model.init([5, 9, 2], seed=3)
    x = np.random.RandomState(1).rand(4, 5)
    y = [0, 1, 1, 0]
    analytic = advsel.param_grad(model, x, y, [1.0] * 4)
    numeric = advsel.finite_diff_param_grad(model, x, y, step=1e-4)
    for a, n in zip(analytic.weights, numeric.weights):
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-3)
        assert np.max(np.abs(a - n) / denom) < 1e-4


def test_fgsm_and_pgd_feasibility():
    model = advsel.Model.init([6, 10, 2], seed=7)
    x = np.random.RandomState(2).rand(8, 6)
    y = [0, 1] * 4
    eps = 0.07
    adv = advsel.fgsm(model, x, y, eps)
    assert np.max(np.abs(adv - x)) <= eps
    cfg = advsel.AttackConfig(epsilon=eps, alpha=0.03, steps=5, random_start=True)
    adv2 = advsel.pgd(model, x, y, cfg, seed=42)
    assert np.max(np.abs(adv2 - x)) <= eps
    assert adv2.min() >= 0.0 and adv2.max() <= 1.0
    assert np.array_equal(adv2, advsel.pgd(model, x, y, cfg, seed=42))


def test_selection_matches_numpy_oracle():
    rng = np.random.RandomState(3)
    for _ in range(200):
        losses = np.round(rng.rand(rng.randint(1, 13)), 1)
        pup = rng.uniform(0.05, 1.0)
        result = advsel.select_top(losses.tolist(), pup)
        k = advsel.selection_count(pup, len(losses))
        order = sorted(range(len(losses)), key=lambda i: (-losses[i], i))[:k]
        assert list(result.selected_indices) == sorted(order)


def test_update_pup_recurrence():
    p = advsel.update_pup(1.0, 0.5, 0.0)
    assert p == pytest.approx(0.5)
    assert advsel.update_pup(p, 0.8, 0.0) == pytest.approx(0.1)
    assert advsel.update_pup(0.4, 1.0, 0.05) == pytest.approx(0.05)


def test_training_run_improves_and_reproduces(blobs):
    train, _, test = advsel.split(blobs, 0.8, 0.0, 0.2, seed=9)
    model = advsel.Model.init([6, 12, 2], seed=11)
    attack = advsel.AttackConfig(epsilon=0.05, alpha=0.02, steps=5)
    cfg = advsel.TrainConfig(mode=advsel.TrainMode.ds_robust, batch=16, epochs=5, lr=0.1,
                             attack=attack, eval_attack=attack,
                             policy=advsel.SelectionPolicy(kind=advsel.SelectionKind.top_loss,
                                                           pup=0.5),
                             seed=13)
    before = advsel.evaluate(model, test)
    trained, metrics = advsel.run_training(model, train, test, cfg)
    assert len(metrics) == 5
    assert advsel.evaluate(trained, test) > before
    assert metrics[-1].backward_passes > 0

    trained2, metrics2 = advsel.run_training(model, train, test, cfg)
    assert trained.equals_bitwise(trained2)
    assert [m.standard_accuracy for m in metrics] == [m.standard_accuracy for m in metrics2]


def test_min_adversarial_eps(blobs):
    train, _, test = advsel.split(blobs, 0.8, 0.0, 0.2, seed=9)
    model = advsel.Model.init([6, 12, 2], seed=11)
    attack = advsel.AttackConfig(epsilon=0.1, alpha=0.02, steps=5)
    grid = [0.0, 0.05, 0.1, 0.2, 0.4]
    eps = advsel.min_adversarial_eps(model, test.features[0], test.labels[0], grid, attack)
    assert eps is None or eps in grid


def test_dataset_roundtrip(tmp_path, blobs):
    path = str(tmp_path / "cache.bin")
    blobs.save(path)
    loaded = advsel.Dataset.load(path)
    assert np.array_equal(loaded.features, blobs.features)
    assert list(loaded.labels) == list(blobs.labels)


def test_model_roundtrip(tmp_path):
    model = advsel.Model.init([3, 5, 2], seed=21)
    path = str(tmp_path / "model.bin")
    model.save(path)
    assert advsel.Model.load(path).equals_bitwise(model)


def test_errors_surface_as_python_exceptions():
    model = advsel.Model.init([3, 2], seed=1)
    with pytest.raises(advsel.AdvselError):
        model.forward(np.zeros((2, 5)))
    with pytest.raises(advsel.AdvselError):
        advsel.select_top([], 0.5)
