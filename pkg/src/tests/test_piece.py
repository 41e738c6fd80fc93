import numpy as np
import pytest

from src.data.casebase import Case
from src.data.encoding import encode_case
from src.errors import ExplanationError, ModelError
from src.explainers.piece import (
    HurdleStats,
    Reason,
    exceptional_features,
    fit_hurdle,
    generate_sf_cf,
    hurdle_from_activations,
)
from src.models.mlp import forward, head_predict
from src.tests.conftest import hand_model, make_casebase


def _stats(p_pos, mu_pos, sd_pos, n):
    return HurdleStats(
        p_pos=np.asarray(p_pos, dtype=float),
        mu_pos=np.asarray(mu_pos, dtype=float),
        sd_pos=np.asarray(sd_pos, dtype=float),
        n=np.asarray(n, dtype=int),
    )


@pytest.fixture
def identity_model():
    """Penultimate layer equals relu(x); class 1 iff the second latent feature exceeds 1."""
    return hand_model([np.eye(2), [[0.0, -1.0], [0.0, 1.0]]], biases=[[0.0, 0.0], [1.0, -1.0]])


@pytest.fixture
def identity_stats():
    return _stats(
        p_pos=[[1.0, 0.0], [1.0, 0.99]],
        mu_pos=[[1.0, 0.0], [1.0, 2.0]],
        sd_pos=[[0.5, 0.0], [0.5, 0.5]],
        n=[1, 1],
    )


def test_hurdle_from_activations():
    """Activations [0, 0, 2, 4]: half positive, positive mean 3, expectation 1.5."""
    stats = hurdle_from_activations(np.array([[0.0], [0.0], [2.0], [4.0]]), np.zeros(4), 1)
    assert stats.p_pos[0, 0] == 0.5
    assert stats.mu_pos[0, 0] == 3.0
    assert stats.sd_pos[0, 0] == 1.0
    assert stats.expected[0, 0] == 1.5
    assert stats.n.tolist() == [4]


def test_hurdle_with_empty_class_is_unusable():
    stats = hurdle_from_activations(np.array([[1.0], [2.0]]), np.array([0, 0]), 2)
    assert stats.usable(0)
    assert not stats.usable(1)
    with pytest.raises(ExplanationError):
        exceptional_features(stats, np.array([1.0]), 1)


def test_fit_hurdle_on_blobs(blob_model, blob_casebase):
    stats = fit_hurdle(blob_model, blob_casebase)
    assert stats.p_pos.shape == (2, blob_model.latent_width)
    assert np.all((stats.p_pos >= 0) & (stats.p_pos <= 1))
    assert np.all(stats.mu_pos >= 0)
    assert stats.n.sum() == len(blob_casebase)


def test_fit_hurdle_needs_a_classifier(blob_casebase):
    with pytest.raises(ModelError):
        fit_hurdle(hand_model([[[1.0, 1.0]]], head="linear"), blob_casebase)


# --- exceptional features ---

def test_exceptional_features_sorted_by_score():
    stats = _stats([[0.5] * 3, [0.98, 0.97, 0.01]], [[1.0] * 3] * 2, [[1.0] * 3] * 2, [5, 5])
    found = exceptional_features(stats, np.array([0.0, 0.0, 0.5]), 1, alpha=0.05)
    assert [f.index for f in found] == [2, 0, 1]
    assert [f.reason for f in found] == [
        Reason.POSITIVE_WHERE_ZERO,
        Reason.ZERO_WHERE_POSITIVE,
        Reason.ZERO_WHERE_POSITIVE,
    ]
    assert all(f.score < 0.05 for f in found)


def test_tail_value_is_exceptional():
    stats = _stats([[1.0], [1.0]], [[1.0], [1.0]], [[0.1], [0.1]], [5, 5])
    found = exceptional_features(stats, np.array([2.0]), 1)
    assert len(found) == 1
    assert found[0].reason == Reason.TAIL_VALUE
    assert found[0].expected == 1.0


def test_value_at_the_mode_is_not_exceptional():
    stats = _stats([[1.0], [1.0]], [[1.0], [1.0]], [[0.0], [0.0]], [5, 5])
    assert exceptional_features(stats, np.array([1.0]), 1) == []


def test_alpha_zero_finds_nothing(identity_stats):
    assert exceptional_features(identity_stats, np.array([1.0, 0.0]), 1, alpha=0.0) == []


def test_alpha_out_of_range(identity_stats):
    with pytest.raises(ExplanationError):
        exceptional_features(identity_stats, np.array([1.0, 0.0]), 1, alpha=0.5)


# --- semi-factual / counterfactual generation ---

def test_single_step_flip_is_degenerate(identity_model, identity_stats):
    """One perturbation flips the class, so the semi-factual is the query itself."""
    cb = make_casebase([[1.0, 0.0], [0.0, 2.0], [2.0, 2.0]], [0, 1, 1])
    result = generate_sf_cf(identity_model, identity_stats, cb, Case(id=99, features=(1.0, 0.0)), 1)
    assert result.query_class == 0
    assert [f.index for f in result.exceptional] == [1]
    assert result.steps_to_flip == 1
    assert result.flipped
    assert result.degenerate
    assert np.allclose(result.counterfactual_latent, [1.0, 1.98])
    assert result.counterfactual_case.id == 1
    assert result.semifactual_case.id == 0


def test_no_exceptional_features_means_no_flip(identity_model, identity_stats):
    cb = make_casebase([[1.0, 0.0], [0.0, 2.0]], [0, 1])
    result = generate_sf_cf(
        identity_model, identity_stats, cb, Case(id=99, features=(1.0, 0.0)), 1, alpha=0.0
    )
    assert not result.flipped
    assert result.steps == []
    assert result.counterfactual_case is None
    assert result.steps_to_flip is None


def test_query_already_in_target(identity_model, identity_stats):
    cb = make_casebase([[1.0, 0.0], [0.0, 2.0]], [0, 1])
    with pytest.raises(ExplanationError):
        generate_sf_cf(identity_model, identity_stats, cb, Case(id=99, features=(1.0, 0.0)), 0)


def test_semifactual_stays_and_counterfactual_crosses(blob_model, blob_casebase):
    """The semi-factual keeps the query's class; a counterfactual reaches the target."""
    stats = fit_hurdle(blob_model, blob_casebase)
    for query in blob_casebase.cases[::4]:
        latent = forward(blob_model, encode_case(blob_model.encoder, query)).penultimate
        target = 1 - head_predict(blob_model, latent)
        result = generate_sf_cf(blob_model, stats, blob_casebase, query, target, alpha=0.2)
        assert head_predict(blob_model, result.semifactual_latent) == result.query_class
        if result.flipped:
            assert head_predict(blob_model, result.counterfactual_latent) == target
            assert result.steps_to_flip == len(result.steps)
        assert all(f.score < 0.2 for f in result.exceptional)


def test_perturbations_follow_the_exceptional_order_and_are_idempotent(blob_model, blob_casebase):
    stats = fit_hurdle(blob_model, blob_casebase)
    for query in blob_casebase.cases[1::5]:
        latent = forward(blob_model, encode_case(blob_model.encoder, query)).penultimate
        target = 1 - head_predict(blob_model, latent)
        result = generate_sf_cf(blob_model, stats, blob_casebase, query, target, alpha=0.3)
        expected = {f.index: f.expected for f in result.exceptional}
        assert [s.feature for s in result.steps] == [f.index for f in result.exceptional][: len(result.steps)]
        state = latent.copy()
        for step in result.steps:
            assert step.new_value == expected[step.feature]
            assert step.old_value == state[step.feature]
            state[step.feature] = step.new_value
            assert head_predict(blob_model, state) == step.predicted_class
        if result.flipped:
            assert np.array_equal(state, result.counterfactual_latent)
        for step in result.steps:
            again = state.copy()
            again[step.feature] = step.new_value
            assert np.array_equal(again, state)
