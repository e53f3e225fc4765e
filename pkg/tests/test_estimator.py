import numpy as np
import pytest
from sklearn.base import clone

from grnorder.data import generate_synthetic
from grnorder.errors import DataError, NotFittedError
from grnorder.estimator import SentenceOrderer

SMALL = dict(embedding_dim=6, sentence_dim=8, entity_dim=6, edge_dim=3, steps=1, beam_size=4, max_epochs=2)


@pytest.fixture(scope="module")
def fitted():
    data = generate_synthetic(9, 12, split_fractions=(0.5, 0.5, 0.0))
    train = [p for p in data if p.split == "train"]
    valid = [p for p in data if p.split == "valid"]
    return SentenceOrderer(**SMALL).fit(train, X_valid=valid), train, valid


def test_params_round_trip_and_clone():
    est = SentenceOrderer(variant="S", steps=2)
    params = est.get_params()
    assert params["variant"] == "S" and params["beam_size"] == 64 and params["embedding_dim"] == 100
    copy = clone(est)
    assert copy.get_params() == params
    est.set_params(steps=4)
    assert est.steps == 4


def test_unfitted_estimator_refuses_to_predict(corpus):
    with pytest.raises(NotFittedError):
        SentenceOrderer().predict(corpus)
    with pytest.raises(AttributeError):
        SentenceOrderer().transform(corpus)


def test_predict_returns_permutations(fitted):
    est, _, valid = fitted
    for p, order in zip(valid, est.predict(valid)):
        assert sorted(order) == list(range(len(p)))
    assert est.predict(valid, beam_size=1) is not None


def test_prediction_follows_input_shuffles(fitted):
    est, _, valid = fitted
    base = est.predict(valid[:3])
    for p, order in zip(valid[:3], base):
        perm = np.random.default_rng(1).permutation(len(p))
        shuffled = est.predict([p.permuted(perm)])[0]
        assert tuple(int(perm[k]) for k in shuffled) == order


def test_transform_shape_and_score(fitted):
    est, train, valid = fitted
    assert est.transform(valid).shape == (len(valid), 8)
    assert -1.0 <= est.score(valid) <= 1.0
    assert est.best_epoch_ >= 1 and est.history_[-1]["epoch"] == "best"


def test_fit_without_validation(corpus):
    est = SentenceOrderer(**{**SMALL, "max_epochs": 1}).fit(corpus[:4])
    assert est.best_epoch_ == 1


def test_input_validation(fitted):
    est, _, valid = fitted
    with pytest.raises(DataError):
        est.predict(valid[0])
    with pytest.raises(DataError):
        est.predict([1, 2])
    with pytest.raises(DataError):
        est.predict([])
    with pytest.raises(DataError):
        est.predict(42)
