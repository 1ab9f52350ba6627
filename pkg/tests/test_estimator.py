import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.pipeline import Pipeline
from sklearn.preprocessing import StandardScaler

from guidedcluster.data import SyntheticSpec, generate_synthetic
from guidedcluster.estimator import GuidedClusterVAE
from guidedcluster.evaluation import clustering_accuracy


@pytest.fixture(scope="module")
def toy():
    ds = generate_synthetic(SyntheticSpec(n=800, seed=21))
    return ds.denormalized_x(), ds.denormalized_y(), ds.labels


def quick_model(**kw):
    params = dict(
        n_clusters=3,
        latent_dim=2,
        epochs=8,
        pretrain_epochs=2,
        encoder_hidden=(16,),
        decoder_hidden=(16,),
        batch_size=32,
        random_state=0,
    )
    params.update(kw)
    return GuidedClusterVAE(**params)


def test_get_set_params_and_clone():
    model = quick_model(beta=0.05)
    assert model.get_params()["beta"] == 0.05
    model.set_params(beta=0.02, n_clusters=4)
    assert model.beta == 0.02 and model.n_clusters == 4
    cloned = clone(model)
    assert cloned.get_params() == model.get_params()


def test_requires_guiding_variable(toy):
    x, _, _ = toy
    with pytest.raises(ValueError, match="guiding"):
        quick_model().fit(x)


def test_fit_predict_shapes_and_labels(toy):
    x, y, labels = toy
    model = quick_model().fit(x, y)
    assert model.labels_.shape == (len(x),)
    assert model.n_features_in_ == x.shape[1]
    pred = model.predict(x)
    assert np.array_equal(pred, model.labels_)
    proba = model.predict_proba(x)
    assert proba.shape == (len(x), 3)
    assert np.allclose(proba.sum(axis=1), 1.0, atol=1e-9)
    latent = model.transform(x)
    assert latent.shape == (len(x), 2)


def test_predict_before_fit_raises(toy):
    x, _, _ = toy
    with pytest.raises(NotFittedError):
        quick_model().predict(x)


def test_feature_count_checked(toy):
    x, y, _ = toy
    model = quick_model().fit(x, y)
    with pytest.raises(ValueError, match="features"):
        model.predict(x[:, :5])


def test_deterministic_given_random_state(toy):
    x, y, _ = toy
    a = quick_model(random_state=7).fit(x, y)
    b = quick_model(random_state=7).fit(x, y)
    assert np.array_equal(a.labels_, b.labels_)
    assert np.array_equal(a.transform(x), b.transform(x))


def test_one_dimensional_guide_accepted(toy):
    x, y, _ = toy
    model = quick_model().fit(x, y[:, 0])
    assert model.labels_.shape == (len(x),)


def test_learns_guided_structure(toy):
    x, y, labels = toy
    model = quick_model(
        epochs=30, pretrain_epochs=5, latent_dim=3, batch_size=16,
        encoder_hidden=(64, 64), decoder_hidden=(64, 64),
    ).fit(x, y)
    assert clustering_accuracy(model.labels_, labels) >= 0.8


def test_score_is_finite_and_higher_for_matched_data(toy):
    x, y, _ = toy
    model = quick_model().fit(x, y)
    assert np.isfinite(model.score(x, y))


def test_composes_in_sklearn_pipeline(toy):
    x, y, labels = toy
    pipe = Pipeline([("scale", StandardScaler()), ("cluster", quick_model(epochs=10))])
    pipe.fit(x, y)
    pred = pipe.predict(x)
    assert pred.shape == (len(x),)


def test_fit_predict_mixin(toy):
    x, y, _ = toy
    model = quick_model()
    pred = model.fit_predict(x, y)
    assert np.array_equal(pred, model.labels_)
