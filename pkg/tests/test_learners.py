import math
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from sklearn.base import clone

from oracles import finite_difference_gradient, lr_loss, nb_posterior_exact
from patchcatch.errors import (
    ConfigInvalid,
    DimensionMismatch,
    EmptyInput,
    IndexOutOfVocabulary,
    NonFiniteLoss,
    SingleClassInput,
)
from patchcatch.learners import (
    LogisticRegressionGD,
    MultinomialNaiveBayes,
    confidence,
    logistic_from_params,
    lr_gradient,
    lr_predict_proba,
    lr_train,
    naive_bayes_from_params,
    nb_predict_proba,
    nb_train,
    objective,
)
from patchcatch.textview import SparseVector


def sv(*pairs):
    return SparseVector(tuple((i, float(v)) for i, v in pairs))


def test_nb_two_doc_smoothing():
    model = nb_train([(sv((0, 1)), 1), (sv((1, 1)), 0)], V=2, alpha=1.0)
    assert np.allclose(np.exp(model.class_log_prior_), [0.5, 0.5])
    assert math.isclose(math.exp(model.feature_log_prob_[1, 0]), 2 / 3, rel_tol=1e-15)
    got = nb_predict_proba(model, sv((0, 1)))
    want = nb_posterior_exact([{0: 1}, {1: 1}], [1, 0], {0: 1}, 2)
    assert abs(Fraction(got) - want) <= 1e-12


def test_nb_empty_docs_are_uniform():
    model = nb_train([(sv(), 0), (sv(), 1)], V=2)
    assert np.allclose(np.exp(model.feature_log_prob_), 0.5)


def test_nb_errors():
    with pytest.raises(SingleClassInput):
        nb_train([(sv((0, 1)), 1), (sv((1, 1)), 1)], V=2)
    with pytest.raises(EmptyInput):
        nb_train([], V=2)
    with pytest.raises(ConfigInvalid):
        MultinomialNaiveBayes(alpha=0).fit(np.eye(2), [0, 1])
    model = nb_train([(sv((0, 1)), 1), (sv((1, 1)), 0)], V=2)
    with pytest.raises(IndexOutOfVocabulary):
        nb_predict_proba(model, sv((5, 1)))


def test_nb_empty_vector_returns_prior():
    model = nb_train([(sv((0, 1)), 1), (sv((1, 1)), 0), (sv((1, 2)), 0)], V=2)
    assert math.isclose(nb_predict_proba(model, sv()), 1 / 3, rel_tol=1e-12)


def test_nb_symmetric_model_gives_half():
    model = naive_bayes_from_params(np.log([0.5, 0.5]), np.log([[0.25, 0.75], [0.75, 0.25]]))
    assert math.isclose(nb_predict_proba(model, sv((0, 2), (1, 2))), 0.5, abs_tol=1e-15)


@settings(max_examples=100, deadline=None)
@given(st.data())
def test_nb_matches_exact_oracle(data):
    V = data.draw(st.integers(1, 4))
    n = data.draw(st.integers(2, 5))
    labels = data.draw(st.lists(st.integers(0, 1), min_size=n, max_size=n).filter(lambda y: len(set(y)) == 2))
    docs = [data.draw(st.dictionaries(st.integers(0, V - 1), st.integers(1, 3))) for _ in range(n)]
    x = data.draw(st.dictionaries(st.integers(0, V - 1), st.integers(1, 5)))
    alpha = data.draw(st.sampled_from([1, Fraction(1, 2), 2]))
    model = nb_train([(sv(*sorted(d.items())), y) for d, y in zip(docs, labels)], V, alpha=float(alpha))
    p1 = nb_predict_proba(model, sv(*sorted(x.items())))
    assert abs(Fraction(p1) - nb_posterior_exact(docs, labels, x, V, alpha)) <= 1e-12
    both = model.predict_proba(np.array([[x.get(t, 0) for t in range(V)]]))[0]
    assert abs(both.sum() - 1.0) <= 1e-12


def test_nb_likelihoods_normalized():
    rng = np.random.default_rng(1)
    X = rng.integers(0, 4, size=(30, 7))
    y = rng.integers(0, 2, size=30)
    y[:2] = [0, 1]
    model = MultinomialNaiveBayes().fit(X, y)
    assert np.allclose(np.exp(model.feature_log_prob_).sum(axis=1), 1.0, atol=1e-9)
    assert abs(np.exp(model.class_log_prior_).sum() - 1.0) <= 1e-9


def test_nb_is_a_clonable_estimator():
    model = MultinomialNaiveBayes(alpha=0.5)
    assert clone(model).get_params() == {"alpha": 0.5}


# -- logistic regression -------------------------------------------------------

def test_lr_separable_1d():
    model = lr_train([(np.array([-1.0]), 0), (np.array([1.0]), 1)], l2=0.0, lr=0.1, epochs=500)
    assert lr_predict_proba(model, np.array([1.0])) > 0.9
    curve = model.loss_curve_
    assert len(curve) == 501
    assert all(b <= a for a, b in zip(curve, curve[1:]))


def test_lr_large_l2_shrinks_to_zero():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(40, 3))
    y = (X[:, 0] > 0).astype(int)
    model = LogisticRegressionGD(l2=1e6, epochs=200).fit(X, y)
    assert np.abs(model.coef_).max() < 1e-5
    # bias is unregularized and settles at the log-odds of the base rate
    rate = y.mean()
    assert math.isclose(model.intercept_, math.log(rate / (1 - rate)), abs_tol=1e-3)


def test_lr_rejects_bad_params():
    with pytest.raises(ConfigInvalid):
        LogisticRegressionGD(epochs=0).fit(np.eye(2), [0, 1])
    with pytest.raises(ConfigInvalid):
        LogisticRegressionGD(learning_rate=0).fit(np.eye(2), [0, 1])
    with pytest.raises(EmptyInput):
        lr_train([])


def test_lr_divergence_is_reported():
    # the cross-entropy gradient is bounded, so only overflow can diverge
    X = np.array([[1e200], [-1e200]])
    with np.errstate(all="ignore"), pytest.raises(NonFiniteLoss):
        LogisticRegressionGD(learning_rate=1e200, epochs=5).fit(X, [1, 0])


@pytest.mark.parametrize("w, x, p", [([0.0], [5.0], 0.5), ([1.0], [0.0], 0.5), ([1.0], [math.log(3)], 0.75)])
def test_lr_sigmoid_examples(w, x, p):
    assert math.isclose(lr_predict_proba(logistic_from_params(w, 0.0), np.array(x)), p, rel_tol=1e-15)


def test_lr_sigmoid_is_stable_far_out():
    model = logistic_from_params([1.0], 0.0)
    assert lr_predict_proba(model, np.array([1e3])) == 1.0
    assert lr_predict_proba(model, np.array([-1e3])) == 0.0


def test_lr_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        lr_predict_proba(logistic_from_params([1.0, 2.0], 0.0), np.array([1.0]))


def test_bias_gradient_zero_on_symmetric_data():
    model = logistic_from_params([0.0, 0.0], 0.0)
    _, gb = lr_gradient(model, [(np.array([1.0, 2.0]), 1), (np.array([-1.0, -2.0]), 0)])
    assert gb == 0.0


def test_l2_term_contributes_lambda_w():
    X = np.array([[1.0, -2.0], [0.5, 3.0]])
    y = [1, 0]
    w = np.array([0.3, -0.7])
    plain, _ = logistic_from_params(w, 0.1, l2=0.0).gradient(X, y)
    reg, _ = logistic_from_params(w, 0.1, l2=0.25).gradient(X, y)
    assert np.allclose(reg - plain, 0.25 * w, rtol=0, atol=1e-15)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000))
def test_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    n, f = rng.integers(1, 8), rng.integers(1, 5)
    X = rng.normal(size=(n, f))
    y = rng.integers(0, 2, size=n)
    w, b, l2 = rng.normal(size=f), float(rng.normal()), float(rng.uniform(0, 1))
    gw, gb = logistic_from_params(w, b, l2=l2).gradient(X, y)
    fw, fb = finite_difference_gradient(w.tolist(), b, X.tolist(), y.tolist(), l2)
    a, num = np.append(gw, gb), np.append(fw, fb)
    assert np.linalg.norm(a - num) / max(np.linalg.norm(a), np.linalg.norm(num), 1e-12) < 1e-4


def test_objective_matches_oracle_loss():
    rng = random.Random(3)
    X = [[rng.gauss(0, 1) for _ in range(3)] for _ in range(6)]
    y = [rng.randint(0, 1) for _ in range(6)]
    w, b = [0.2, -0.1, 0.5], 0.3
    assert math.isclose(objective(np.array(w), b, np.array(X), np.array(y), 0.1),
                        lr_loss(w, b, X, y, 0.1), rel_tol=1e-12)


def test_lr_fit_is_deterministic():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(50, 4))
    y = (X.sum(axis=1) > 0).astype(int)
    a = LogisticRegressionGD(seed=1).fit(X, y)
    b = LogisticRegressionGD(seed=1).fit(X, y)
    assert np.array_equal(a.coef_, b.coef_) and a.intercept_ == b.intercept_


def test_confidence():
    assert confidence(np.array([0.1, 0.5, 0.8])).tolist() == [0.9, 0.5, 0.8]
