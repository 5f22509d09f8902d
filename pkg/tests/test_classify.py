"""Classifier oracles: exhaustive-scan KNN, QP-property checks for the SMO SVM."""

import numpy as np
import pytest

from nilmevents.classify import (
    DEFAULT_C_GRID,
    DEFAULT_GAMMA_GRID,
    KnnModel,
    Label,
    LabeledSample,
    SampleOrigin,
    grid_search,
    knn_train,
    load_model,
    save_model,
    svm_train,
)
from nilmevents.errors import DataError
from nilmevents.features import FeatureKind
from nilmevents.normalize import NormKind, NormalizationParams


def _samples_from_arrays(x, y, origin=SampleOrigin.RANDOM_NON_EVENT):
    return [
        LabeledSample(vector=x[i], label=Label(int(y[i])), origin=origin, sample_index=i)
        for i in range(len(x))
    ]


def _identity_norm(dim):
    return NormalizationParams(kind=NormKind.NONE, dim=dim)


def _knn_oracle(x, y, idx, q, k):
    """Independent exhaustive scan: python sort over (distance, sample_index)."""
    scored = sorted(
        ((float(np.dot(x[i] - q, x[i] - q)), int(idx[i]), int(y[i])) for i in range(len(x))),
    )
    votes = sum(label for _, _, label in scored[:k])
    return 1 if 2 * votes > k else 0


class TestKnn:
    @pytest.fixture(scope="class")
    @staticmethod
    def random_model():
        rng = np.random.default_rng(21)
        x = rng.normal(size=(400, 8))
        y = (rng.uniform(size=400) < 0.5).astype(int)
        samples = _samples_from_arrays(x, y)
        return x, y, knn_train(samples, 1, _identity_norm(8), FeatureKind.CUSUM, 50)

    @pytest.mark.parametrize("k", [1, 87, 137, 301])
    def test_agrees_with_exhaustive_scan(self, random_model, k):
        x, y, base = random_model
        model = KnnModel(x=base.x, y=base.y, sample_index=base.sample_index, k=k,
                         norm=base.norm, feature_kind=base.feature_kind, f0=base.f0)
        rng = np.random.default_rng(22)
        queries = rng.normal(size=(200, 8))
        got = model.predict_batch(queries, prenormalized=True)
        for qi, q in enumerate(queries):
            assert got[qi] == _knn_oracle(x, y, base.sample_index, q, k)

    def test_zero_distance_event(self):
        x = np.array([[0.0, 0.0], [5.0, 5.0]])
        y = np.array([1, 0])
        model = knn_train(_samples_from_arrays(x, y), 1, _identity_norm(2), FeatureKind.CUSUM, 50)
        assert model.predict(np.array([0.0, 0.0]), prenormalized=True) == Label.EVENT

    def test_majority_three_neighbors(self):
        x = np.array([[0.0], [0.1], [0.2], [9.0]])
        y = np.array([1, 1, 0, 0])
        model = knn_train(_samples_from_arrays(x, y), 3, _identity_norm(1), FeatureKind.CUSUM, 50)
        assert model.predict(np.array([0.0]), prenormalized=True) == Label.EVENT

    def test_even_k_tie_resolves_to_non_event(self):
        x = np.array([[1.0], [-1.0], [2.0], [-2.0]])
        y = np.array([1, 0, 1, 0])
        model = knn_train(_samples_from_arrays(x, y), 2, _identity_norm(1), FeatureKind.CUSUM, 50)
        assert model.predict(np.array([0.0]), prenormalized=True) == Label.NON_EVENT

    def test_distance_ties_resolved_by_sample_index(self):
        # two training points equidistant from the query; lower index wins the K=1 slot
        x = np.array([[1.0], [-1.0]])
        for order in ([0, 1], [1, 0]):
            samples = [
                LabeledSample(x[i], Label(1 if i == 0 else 0),
                              SampleOrigin.RANDOM_NON_EVENT, sample_index=i)
                for i in order
            ]
            model = knn_train(samples, 1, _identity_norm(1), FeatureKind.CUSUM, 50)
            assert model.predict(np.array([0.0]), prenormalized=True) == Label.EVENT

    def test_insertion_order_irrelevant(self, random_model):
        x, y, base = random_model
        rng = np.random.default_rng(23)
        perm = rng.permutation(len(x))
        shuffled = [
            LabeledSample(x[i], Label(int(y[i])), SampleOrigin.RANDOM_NON_EVENT, sample_index=i)
            for i in perm
        ]
        model = knn_train(shuffled, 17, _identity_norm(8), FeatureKind.CUSUM, 50)
        reference = KnnModel(x=base.x, y=base.y, sample_index=base.sample_index, k=17,
                             norm=base.norm, feature_kind=base.feature_kind, f0=base.f0)
        queries = rng.normal(size=(50, 8))
        assert np.array_equal(model.predict_batch(queries, prenormalized=True),
                              reference.predict_batch(queries, prenormalized=True))

    def test_k_bounds(self):
        x = np.ones((5, 2))
        y = np.array([0, 1, 0, 1, 0])
        with pytest.raises(DataError, match="outside"):
            knn_train(_samples_from_arrays(x, y), 6, _identity_norm(2), FeatureKind.CUSUM, 50)

    def test_dim_mismatch(self):
        x = np.ones((4, 3))
        y = np.array([0, 1, 0, 1])
        model = knn_train(_samples_from_arrays(x, y), 1, _identity_norm(3), FeatureKind.CUSUM, 50)
        with pytest.raises(DataError, match="dim"):
            model.predict(np.ones(4), prenormalized=True)

    def test_normalization_inside_predict_matches_external(self):
        rng = np.random.default_rng(24)
        raw = rng.normal(size=(30, 4)) * [1, 10, 100, 0.1]
        y = (rng.uniform(size=30) < 0.5).astype(int)
        from nilmevents import normalize

        params = normalize.fit(raw, NormKind.VARIANCE)
        normalized = params.transform(raw)
        model = knn_train(_samples_from_arrays(normalized, y), 5, params, FeatureKind.CUSUM, 50)
        queries = rng.normal(size=(20, 4)) * [1, 10, 100, 0.1]
        internal = model.predict_batch(queries)
        external = model.predict_batch(params.transform(queries), prenormalized=True)
        assert np.array_equal(internal, external)


def _two_blobs(rng, n=50, separation=10.0):
    a = rng.normal(size=(n, 2)) + [0.0, 0.0]
    b = rng.normal(size=(n, 2)) + [separation, 0.0]
    x = np.vstack([a, b])
    y = np.array([0] * n + [1] * n)
    return x, y


class TestSvm:
    @pytest.fixture(scope="class")
    @staticmethod
    def blob_model():
        rng = np.random.default_rng(31)
        x, y = _two_blobs(rng)
        model = svm_train(_samples_from_arrays(x, y), c=1.0, gamma=0.5)
        return x, y, model

    def test_separable_blobs_train_clean(self, blob_model):
        x, y, model = blob_model
        pred = model.predict_batch(x, prenormalized=True)
        assert np.array_equal(pred, y)

    def test_kkt_residual_small(self, blob_model):
        _, _, model = blob_model
        assert model.converged
        assert model.kkt_residual <= 1e-3

    def test_dual_equality_constraint(self, blob_model):
        _, _, model = blob_model
        assert abs(model.dual_coef.sum()) <= 1e-6

    def test_box_constraint(self, blob_model):
        _, _, model = blob_model
        assert np.all(np.abs(model.dual_coef) <= 1.0 + 1e-12)
        assert np.all(np.abs(model.dual_coef) > 0.0)

    def test_agrees_with_kernel_sum_oracle(self, blob_model):
        _, _, model = blob_model
        rng = np.random.default_rng(32)
        queries = rng.normal(size=(100, 2)) * 5.0 + [5.0, 0.0]
        got_values = model.decision_values(queries, prenormalized=True)
        got_labels = model.predict_batch(queries, prenormalized=True)
        for i, q in enumerate(queries):
            acc = model.bias
            for sv, coef in zip(model.support_vectors, model.dual_coef):
                acc += coef * np.exp(-model.gamma * float(np.dot(sv - q, sv - q)))
            assert got_values[i] == pytest.approx(acc, abs=1e-9)
            assert got_labels[i] == (1 if acc > 0 else 0)

    def test_label_flip_symmetry(self):
        rng = np.random.default_rng(33)
        x, y = _two_blobs(rng)
        queries = rng.normal(size=(40, 2)) * 4.0 + [5.0, 0.0]
        model = svm_train(_samples_from_arrays(x, y), c=1.0, gamma=0.5)
        flipped = svm_train(_samples_from_arrays(x, 1 - y), c=1.0, gamma=0.5)
        a = model.decision_values(queries, prenormalized=True)
        b = flipped.decision_values(queries, prenormalized=True)
        assert np.allclose(a, -b, atol=1e-6)

    def test_dual_objective_non_decreasing(self):
        rng = np.random.default_rng(34)
        x, y = _two_blobs(rng, n=30, separation=3.0)  # some overlap keeps SMO busy
        trace = []
        model = svm_train(_samples_from_arrays(x, y), c=5.0, gamma=0.3,
                          objective_trace=trace)
        assert len(trace) == model.iterations > 0
        diffs = np.diff(np.array(trace))
        assert np.all(diffs >= -1e-9)
        # incremental bookkeeping must agree with the closed-form dual objective
        y_signed = np.where(y == 1, 1.0, -1.0)
        alpha = np.zeros(len(x))
        sv_index = {tuple(sv): coef for sv, coef in zip(model.support_vectors, model.dual_coef)}
        for i, xi in enumerate(x):
            coef = sv_index.get(tuple(xi))
            if coef is not None:
                alpha[i] = coef * y_signed[i]
        d2 = ((x[:, None, :] - x[None, :, :]) ** 2).sum(axis=2)
        q = np.outer(y_signed, y_signed) * np.exp(-model.gamma * d2)
        direct = alpha.sum() - 0.5 * alpha @ q @ alpha
        assert trace[-1] == pytest.approx(direct, rel=1e-6, abs=1e-8)

    def test_predict_does_not_mutate_model(self, blob_model):
        _, _, model = blob_model
        sv_before = model.support_vectors.copy()
        coef_before = model.dual_coef.copy()
        rng = np.random.default_rng(35)
        model.predict_batch(rng.normal(size=(20, 2)), prenormalized=True)
        assert np.array_equal(model.support_vectors, sv_before)
        assert np.array_equal(model.dual_coef, coef_before)

    def test_conflicting_duplicates_still_converge(self):
        x = np.array([[0.0, 0.0]] * 6)
        y = np.array([0, 1, 0, 1, 0, 1])
        model = svm_train(_samples_from_arrays(x, y), c=1e6, gamma=1.0)
        assert model.converged
        pred = model.predict_batch(x, prenormalized=True)
        assert np.any(pred != y)  # inseparable: training error stays > 0

    def test_single_class_rejected(self):
        x = np.ones((4, 2))
        y = np.ones(4, dtype=int)
        with pytest.raises(DataError, match="both classes"):
            svm_train(_samples_from_arrays(x, y), c=1.0, gamma=0.5)

    def test_bad_hyperparameters_rejected(self):
        x = np.ones((4, 2))
        y = np.array([0, 1, 0, 1])
        with pytest.raises(DataError, match="positive"):
            svm_train(_samples_from_arrays(x, y), c=-1.0, gamma=0.5)


class TestGridSearch:
    def test_single_cell(self):
        rng = np.random.default_rng(41)
        x, y = _two_blobs(rng, n=20)
        c, gamma, _ = grid_search(_samples_from_arrays(x, y), [2.0], [0.25], folds=2)
        assert (c, gamma) == (2.0, 0.25)

    def test_dominant_cell_wins_with_tiebreak(self):
        rng = np.random.default_rng(42)
        x, y = _two_blobs(rng, n=25)
        samples = _samples_from_arrays(x, y)
        c, gamma, s = grid_search(samples, [1.0, 4.0], [0.125, 0.5], folds=2)
        assert s == 1.0  # separable: some cell must reach a perfect score
        scores = {
            (ci, gi): grid_search(samples, [ci], [gi], folds=2)[2]
            for ci in [1.0, 4.0] for gi in [0.125, 0.5]
        }
        perfect = [cell for cell, sc in scores.items() if sc == 1.0]
        assert (c, gamma) == min(perfect)

    def test_default_grid_covers_published_settings(self):
        assert 128.0 in DEFAULT_C_GRID
        assert 512.0 in DEFAULT_GAMMA_GRID
        assert any(abs(g - 0.0078125) < 1e-12 for g in DEFAULT_GAMMA_GRID)

    def test_degenerate_fold_rejected(self):
        x = np.vstack([np.zeros((4, 2)), np.ones((1, 2))])
        y = np.array([0, 0, 0, 0, 1])
        with pytest.raises(DataError, match="single-class"):
            grid_search(_samples_from_arrays(x, y), [1.0], [1.0], folds=2)

    def test_empty_grid_rejected(self):
        x = np.ones((4, 2))
        y = np.array([0, 1, 0, 1])
        with pytest.raises(DataError, match="non-empty"):
            grid_search(_samples_from_arrays(x, y), [], [1.0], folds=2)


class TestModelFiles:
    def test_knn_round_trip(self, tmp_path):
        rng = np.random.default_rng(51)
        x = rng.normal(size=(20, 4))
        y = (rng.uniform(size=20) < 0.5).astype(int)
        from nilmevents import normalize

        params = normalize.fit(x, NormKind.MINMAX)
        model = knn_train(_samples_from_arrays(x, y), 5, params, FeatureKind.DELTA_CUSUM, 60)
        save_model(model, tmp_path / "m.npz")
        back = load_model(tmp_path / "m.npz")
        assert back.variant == "knn" and back.k == 5 and back.f0 == 60
        assert back.feature_kind is FeatureKind.DELTA_CUSUM
        assert np.array_equal(back.x, model.x)
        assert np.array_equal(back.y, model.y)
        queries = rng.normal(size=(10, 4))
        assert np.array_equal(back.predict_batch(queries), model.predict_batch(queries))

    def test_svm_round_trip(self, tmp_path):
        rng = np.random.default_rng(52)
        x, y = _two_blobs(rng, n=15)
        model = svm_train(_samples_from_arrays(x, y), c=2.0, gamma=0.25)
        save_model(model, tmp_path / "m.npz")
        back = load_model(tmp_path / "m.npz")
        assert back.variant == "svm"
        assert back.c == 2.0 and back.gamma == 0.25 and back.bias == model.bias
        assert np.array_equal(back.support_vectors, model.support_vectors)
        assert np.array_equal(back.dual_coef, model.dual_coef)

    def test_unknown_container_rejected(self, tmp_path):
        np.savez(tmp_path / "junk.npz", meta=np.frombuffer(b'{"format": "other"}', dtype=np.uint8))
        with pytest.raises(DataError, match="container"):
            load_model(tmp_path / "junk.npz")
