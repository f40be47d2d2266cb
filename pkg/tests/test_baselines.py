import math

import numpy as np
import pytest
from scipy.stats import norm
from sklearn.tree import DecisionTreeClassifier

from phishgraph.baselines import (
    LOGISTIC_REGRESSION, NAIVE_BAYES, RANDOM_FOREST, ModelError, Tree, TrainedModel, export_priors,
    load_model, load_priors, predict_proba, predict_proba_matrix, save_model, save_priors, train,
)


def separable(n=40, seed=0):
    rng = np.random.default_rng(seed)
    X0 = rng.normal([-2, -2], 0.5, size=(n, 2))
    X1 = rng.normal([2, 2], 0.5, size=(n, 2))
    return np.vstack([X0, X1]), np.array([0] * n + [1] * n)


def xor(n=200, seed=3):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1, 1, size=(n, 2))
    y = ((X[:, 0] > 0) ^ (X[:, 1] > 0)).astype(int)
    return X, y


def accuracy(model, X, y):
    return float(np.mean((predict_proba_matrix(model, X)[:, 1] >= 0.5) == y))


def test_lr_separable():
    X, y = separable()
    assert accuracy(train(LOGISTIC_REGRESSION, X, y), X, y) == 1.0


def test_nb_constant_column():
    X, y = separable()
    X = np.column_stack([X, np.full(len(X), 7.0)])
    m = train(NAIVE_BAYES, X, y)
    assert np.all(m.params["var"] >= 1e-9)
    p = predict_proba_matrix(m, X)
    assert np.all(np.isfinite(p))
    assert accuracy(m, X, y) == 1.0


def test_rf_xor():
    X, y = xor()
    assert accuracy(train(RANDOM_FOREST, X, y, seed=1), X, y) > 0.95


def test_rf_deterministic():
    X, y = xor()
    a = train(RANDOM_FOREST, X, y, seed=4, n_trees=20)
    b = train(RANDOM_FOREST, X, y, seed=4, n_trees=20)
    assert a.to_dict() == b.to_dict()
    np.testing.assert_array_equal(predict_proba_matrix(a, X), predict_proba_matrix(b, X))


def test_tree_export_matches_sklearn():
    X, y = xor(300, seed=8)
    est = DecisionTreeClassifier(max_depth=6, random_state=0).fit(X, y)
    probe = np.random.default_rng(1).uniform(-1, 1, size=(500, 2))
    np.testing.assert_array_equal(Tree.from_sklearn(est).predict(probe), est.predict(probe))


def stub_forest(n_phish, n_total=100):
    trees = [Tree.leaf(1)] * n_phish + [Tree.leaf(0)] * (n_total - n_phish)
    return TrainedModel(RANDOM_FOREST, 3, "", {"trees": trees})


def test_rf_unanimous_benign():
    assert predict_proba(stub_forest(0), np.zeros(3)).tolist() == [1.0, 0.0]


def test_rf_sixty_percent():
    np.testing.assert_allclose(predict_proba(stub_forest(60), np.zeros(3)), [0.4, 0.6], atol=1e-12)


def test_lr_zero_weights():
    m = TrainedModel(LOGISTIC_REGRESSION, 2, "", {
        "mean": np.zeros(2), "std": np.ones(2), "weights": np.zeros(2), "bias": 0.0,
    })
    assert predict_proba(m, [3.0, -1.0]).tolist() == [0.5, 0.5]


def test_lr_matches_closed_form():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(60, 5))
    y = (X[:, 0] - X[:, 2] + rng.normal(0, 0.5, 60) > 0).astype(int)
    m = train(LOGISTIC_REGRESSION, X, y, lr_epochs=50)
    p = m.params
    for x in X[:10]:
        z = sum(((x[j] - p["mean"][j]) / p["std"][j]) * p["weights"][j] for j in range(5)) + p["bias"]
        want = 1.0 / (1.0 + math.exp(-z))
        assert predict_proba(m, x)[1] == pytest.approx(want, abs=1e-12)


def test_nb_matches_closed_form():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(80, 4))
    y = (X[:, 1] > 0.2).astype(int)
    m = train(NAIVE_BAYES, X, y)
    p = m.params
    for x in X[:10]:
        z = (x - p["mean"]) / p["std"]
        joint = [
            math.exp(p["log_prior"][c]) * np.prod(norm.pdf(z, p["theta"][c], np.sqrt(p["var"][c])))
            for c in (0, 1)
        ]
        assert predict_proba(m, x)[1] == pytest.approx(joint[1] / sum(joint), abs=1e-9)


@pytest.mark.parametrize("kind", [LOGISTIC_REGRESSION, NAIVE_BAYES, RANDOM_FOREST])
def test_simplex_and_model_round_trip(kind, tmp_path):
    X, y = xor(120)
    m = train(kind, X, y, manifest="abc", n_trees=15)
    p = predict_proba_matrix(m, X)
    assert np.all(p >= 0) and np.all(p <= 1)
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-9)
    save_model(m, tmp_path / "m.json")
    back = load_model(tmp_path / "m.json")
    np.testing.assert_array_equal(predict_proba_matrix(back, X), p)


def test_manifest_and_length_checked():
    X, y = separable()
    m = train(LOGISTIC_REGRESSION, X, y, manifest="aaa")
    with pytest.raises(ModelError, match="manifest"):
        predict_proba_matrix(m, X, manifest="bbb")
    with pytest.raises(ModelError, match="features"):
        predict_proba(m, [1.0, 2.0, 3.0])


@pytest.mark.parametrize("labels", [[0] * 6, [0, 0, 0, 0, 0, 1]])
def test_single_class_rejected(labels):
    with pytest.raises(ModelError):
        train(LOGISTIC_REGRESSION, np.zeros((6, 2)), labels)


def test_unknown_kind():
    X, y = separable()
    with pytest.raises(ModelError):
        train("svm", X, y)


def test_export_priors(tmp_path):
    X, y = separable()
    m = train(NAIVE_BAYES, X, y)
    assert export_priors(m, [], np.zeros((0, 2))) == {}
    urls = [f"http://u{i}.com/?a=1,b" for i in range(len(X))]
    table = export_priors(m, urls, X)
    assert set(table) == set(urls)
    for pb, pp in table.values():
        assert abs(pb + pp - 1) <= 1e-9
    save_priors(table, tmp_path / "p.csv")
    back = load_priors(tmp_path / "p.csv")
    assert back.keys() == table.keys()
    for u in urls:
        assert max(abs(a - b) for a, b in zip(back[u], table[u])) <= 1e-12


def test_load_priors_rejects_bad_rows(tmp_path):
    (tmp_path / "p.csv").write_text("url,p_benign,p_phish\nhttp://a.com,0.7,0.7\n")
    with pytest.raises(ModelError):
        load_priors(tmp_path / "p.csv")
