import math

import numpy as np
import pytest

import oracles
from helpers import random_instance
from catmml.data import CategoricalDataset
from catmml.exceptions import AnnihilationError
from catmml.mml import (
    ANNIHILATION, FORCED_REMOVAL, INITIAL, INNER, MmlConfig,
    component_annihilation_sweep, fit_em_mml, m_step_mml_alpha, message_length,
    penalized_alpha,
)
from catmml.model import MixtureModel, e_step, log_likelihood
from catmml.synth import GenSpec, generate

TRIALS = 50


# -- message length -------------------------------------------------------

def test_message_length_twelve_observations_single_component():
    counts = np.array([[1, 0]] * 7 + [[0, 1]] * 5)
    data = CategoricalDataset(counts, (2,), (1,))
    model = MixtureModel([1.0], [[7 / 12, 5 / 12]], (2,), (1,))
    ll = log_likelihood(data, model)
    assert message_length(data, model) == pytest.approx(1.0 - ll, abs=1e-12)


def test_zero_weight_component_is_free():
    rng = np.random.default_rng(0)
    data, model, _, _ = random_instance(rng, K_max=2)
    padded = MixtureModel(np.append(model.alpha, 0.0),
                          np.vstack([model.theta, model.theta[:1]]),
                          model.n_categories, model.trials)
    assert message_length(data, padded) == pytest.approx(message_length(data, model),
                                                         abs=1e-12)


def test_message_length_matches_direct_formula():
    rng = np.random.default_rng(1)
    for _ in range(30):
        data, model, rows, theta = random_instance(rng, weighted=bool(rng.integers(2)))
        w = None if data.weights is None else list(data.weights)
        ll = oracles.brute_log_likelihood(rows, list(model.alpha), theta, w)
        ref = oracles.message_length_oracle(ll, list(model.alpha), data.n_categories,
                                            data.total_weight)
        assert message_length(data, model) == pytest.approx(ref, abs=1e-10)


# -- penalized weights ----------------------------------------------------

def _resp_with_sums(sums):
    return np.diag(sums)


def test_small_component_annihilated():
    # K=2, M=4: n_params = 1 + 2*4 = 9, penalty (9 - 2 + 1) / 4 = 2.
    alpha, dead = m_step_mml_alpha(_resp_with_sums([30.0, 1.0]), 9, 2,
                                   weights=np.ones(2))
    np.testing.assert_array_equal(alpha, [1.0, 0.0])
    assert dead.tolist() == [1]


def test_equal_sums_stay_equal():
    alpha, dead = m_step_mml_alpha(_resp_with_sums([20.0, 20.0]), 9, 2, weights=np.ones(2))
    np.testing.assert_allclose(alpha, [0.5, 0.5])
    assert dead.size == 0


def test_three_component_shrinkage():
    # K=3, M=2: n_params = 2 + 3*2 = 8, penalty (8 - 3 + 1) / 6 = 1.
    alpha, _ = m_step_mml_alpha(_resp_with_sums([10.0, 5.0, 3.0]), 8, 3, weights=np.ones(3))
    np.testing.assert_allclose(alpha, [0.6, 0.2667, 0.1333], atol=1e-4)
    np.testing.assert_allclose(alpha, oracles.penalized_weights([10, 5, 3], 1), rtol=1e-14)


def test_everything_annihilated_raises():
    with pytest.raises(AnnihilationError):
        penalized_alpha([1.0, 0.5], 2.0)


# -- component-wise sweep -------------------------------------------------

def _oracle_sweep(rows, weights, alpha, theta, penalty):
    """Plain-Python trace of one descending component-wise pass."""
    alpha, theta = list(alpha), [t for t in theta]
    removed = []

    def resp():
        return oracles.bayes_responsibilities(rows, alpha, theta)

    for k in range(len(alpha) - 1, -1, -1):
        r = resp()
        sums = [sum(w * ri[j] for w, ri in zip(weights, r)) for j in range(len(alpha))]
        a_k = oracles.penalized_weights(sums, penalty)[k]
        if a_k == 0:
            del alpha[k], theta[k]
            s = sum(alpha)
            alpha = [a / s for a in alpha]
            removed.append(k)
            continue
        alpha[k] = a_k
        s = sum(alpha)
        alpha = [a / s for a in alpha]
        weighted = [[w * ri[k]] for w, ri in zip(weights, r)]
        theta[k] = oracles.hand_theta(rows, weighted)[0]
    return alpha, theta, removed


def test_sweep_annihilates_weak_component():
    # Weighted rows give column sums (10, 5, 0.5); one variable with C=3 gives M=2,
    # so the per-component penalty is 1 and component 3 cannot survive.
    eps = 1e-12
    counts = np.array([[1, 0, 0], [0, 1, 0], [0, 0, 1]])
    weights = [10.0, 5.0, 0.5]
    data = CategoricalDataset(counts, (3,), (1,), weights=weights)
    theta = [[1 - eps, 0.0, eps], [0.0, 1 - eps, eps], [0.0, 0.0, 1.0]]
    model = MixtureModel([0.4, 0.3, 0.3], theta, (3,), (1,))
    resp = e_step(data, model)
    np.testing.assert_allclose(np.asarray(weights) @ resp, [10, 5, 0.5], atol=1e-9)

    out, out_resp, removed = component_annihilation_sweep(model, resp, data)
    assert removed == [2]
    assert out.K == 2
    rows = [[list(r)] for r in counts]
    ref_alpha, ref_theta, ref_removed = _oracle_sweep(
        rows, weights, list(model.alpha), [[t] for t in theta], 1.0)
    assert ref_removed == [2]
    np.testing.assert_allclose(out.alpha, ref_alpha, rtol=1e-9)
    np.testing.assert_allclose(out.theta, [t[0] for t in ref_theta], rtol=1e-9, atol=1e-15)


def test_penalized_weights_for_sweep_example():
    alpha = oracles.penalized_weights([10, 5, 0.5], 1)
    np.testing.assert_allclose(alpha, [9 / 13, 4 / 13, 0.0])


def test_sweep_without_annihilation_keeps_size():
    data, _ = generate(GenSpec(k_true=2, trials=20, target_separation=(0.5, 1.0), seed=3))
    model = fit_em_mml(data, MmlConfig(k_min=2, k_max=2, seed=0)).best_model
    out, _, removed = component_annihilation_sweep(model, e_step(data, model), data)
    assert removed == [] and out.K == 2
    assert out.alpha.sum() == pytest.approx(1.0, abs=1e-12)


def test_sweep_respects_k_min():
    counts = np.array([[1, 0, 0], [0, 1, 0], [0, 0, 1]])
    data = CategoricalDataset(counts, (3,), (1,), weights=[10.0, 5.0, 0.5])
    model = MixtureModel([0.4, 0.3, 0.3],
                         [[0.98, 0.01, 0.01], [0.01, 0.98, 0.01], [0.01, 0.01, 0.98]],
                         (3,), (1,))
    out, _, removed = component_annihilation_sweep(model, None, data, k_min=3)
    assert removed == [] and out.K == 3


# -- full algorithm -------------------------------------------------------

def _planted(k_true, lo, hi, seed, trials=TRIALS):
    return generate(GenSpec(k_true=k_true, trials=trials, target_separation=(lo, hi),
                            seed=seed))[0]


def test_trace_structure():
    data = _planted(2, 0.1, 0.2, 0)
    res = fit_em_mml(data, MmlConfig(k_max=6, seed=0))
    assert res.trace[0].event == INITIAL
    assert res.trace[0].k_nz == 6
    events = {e.event for e in res.trace}
    assert events <= {INITIAL, INNER, ANNIHILATION, FORCED_REMOVAL}
    candidates = [e for e in res.trace if e.candidate]
    assert candidates and all(e.event == INNER for e in candidates)
    assert candidates[-1].k_nz == 1
    assert res.best_message_length == min(e.message_length for e in candidates)
    assert res.best_model.K == res.k_nz
    assert set(res.candidate_models) <= set(range(1, 7))


def test_k_min_is_a_floor():
    data = _planted(1, 0.0, 0.0, 1)
    res = fit_em_mml(data, MmlConfig(k_min=3, k_max=5, seed=0))
    assert res.k_nz >= 3
    assert min(e.k_nz for e in res.trace) >= 3


def test_message_length_never_increases_within_a_middle_loop():
    data = _planted(3, 0.05, 0.17, 2)
    res = fit_em_mml(data, MmlConfig(k_max=8, seed=2))
    prev = None
    for e in res.trace:
        if e.event in (INITIAL, FORCED_REMOVAL, ANNIHILATION):
            prev = e.message_length
            continue
        assert e.message_length <= prev + 1e-6
        prev = e.message_length


def test_two_separated_components_found():
    hits = 0
    for seed in range(30):
        data = _planted(2, 0.05, 0.17, 100 + seed)
        hits += fit_em_mml(data, MmlConfig(k_max=10, seed=seed)).k_nz == 2
    assert hits >= 27


def test_weakly_separated_components_merge():
    for seed in range(5):
        data = _planted(2, 0.01, 0.02, 200 + seed)
        assert fit_em_mml(data, MmlConfig(k_max=10, seed=seed)).k_nz == 1


def test_single_multinomial_gives_one_component():
    for seed in range(5):
        data = _planted(1, 0.0, 0.0, 300 + seed)
        assert fit_em_mml(data, MmlConfig(k_max=5, seed=seed)).k_nz == 1


def test_same_seed_same_result():
    data = _planted(2, 0.05, 0.17, 4)
    a = fit_em_mml(data, MmlConfig(k_max=6, seed=9))
    b = fit_em_mml(data, MmlConfig(k_max=6, seed=9))
    assert a.best_message_length == b.best_message_length
    np.testing.assert_array_equal(a.best_model.theta, b.best_model.theta)


@pytest.mark.parametrize("kwargs", [dict(k_min=0), dict(k_min=4, k_max=3), dict(delta=0.0)])
def test_invalid_config(kwargs):
    with pytest.raises(ValueError):
        MmlConfig(**kwargs)


def test_message_length_is_finite_for_fitted_models():
    data = _planted(2, 0.05, 0.17, 5)
    res = fit_em_mml(data, MmlConfig(k_max=4, seed=0))
    assert all(math.isfinite(e.message_length) for e in res.trace)


def test_degenerate_forced_removal_stops_descent():
    # Each component alone explains one category; dropping either one would make
    # half the observations impossible without smoothing.
    counts = np.array([[1, 0]] * 30 + [[0, 1]] * 20)
    data = CategoricalDataset(counts, (2,), (1,))
    init = MixtureModel([0.5, 0.5], [[1.0, 0.0], [0.0, 1.0]], (2,), (1,))
    with pytest.warns(RuntimeWarning, match="stopping at 2 components"):
        res = fit_em_mml(data, MmlConfig(k_min=1, k_max=2), init=init)
    assert res.k_nz == 2
    assert res.trace[-1].candidate
    smoothed = fit_em_mml(data, MmlConfig(k_max=2, smoothing=0.5), init=init)
    assert min(e.k_nz for e in smoothed.trace) == 1
