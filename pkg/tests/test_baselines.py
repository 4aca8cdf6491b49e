"""KNN and coordinate-descent regression baseline tests."""

import numpy as np
import pytest

from aircov.baselines import knn_predict, lasso_fit, lasso_predict
from aircov.errors import ConvergenceError, InvalidInputError


class TestKnn:
    def test_k_equals_n_gives_global_mean(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(30, 4))
        y = rng.normal(size=(30, 3))
        got = knn_predict(x, y, rng.normal(size=4), k=30)
        assert np.allclose(got, y.mean(axis=0), rtol=0, atol=1e-12)

    def test_coincident_query_k1(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(20, 3))
        y = rng.normal(size=(20, 2))
        got = knn_predict(x, y, x[7], k=1)
        assert np.array_equal(got, y[7])

    def test_k1_interpolates_all_training_points(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(25, 3))
        y = rng.normal(size=(25, 2))
        pred = knn_predict(x, y, x, k=1)
        assert np.array_equal(pred, y)

    def test_matches_exhaustive_sort_oracle(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(120, 5))
        y = rng.normal(size=(120, 1))
        queries = rng.normal(size=(200, 5))
        k = 7
        got = knn_predict(x, y, queries, k=k)
        for i, q in enumerate(queries):
            d = np.array([float(np.sum((q - row) ** 2)) for row in x])
            order = sorted(range(len(x)), key=lambda j: (d[j], j))[:k]
            want = y[order].mean(axis=0)
            assert np.allclose(got[i], want, rtol=0, atol=1e-12)

    def test_tie_break_by_row_order(self):
        x = np.array([[0.0], [1.0], [1.0], [2.0]])
        y = np.array([[0.0], [10.0], [20.0], [30.0]])
        # query at 1.0: rows 1 and 2 tie at distance 0; k=1 takes row 1
        assert knn_predict(x, y, np.array([1.0]), k=1)[0] == 10.0

    def test_validation(self):
        x = np.zeros((5, 2))
        y = np.zeros((5, 1))
        with pytest.raises(InvalidInputError):
            knn_predict(x, y, np.zeros(2), k=6)
        with pytest.raises(InvalidInputError):
            knn_predict(np.zeros((0, 2)), np.zeros((0, 1)), np.zeros(2), k=1)


class TestLasso:
    def test_zero_penalty_matches_least_squares(self):
        rng = np.random.default_rng(4)
        x = rng.normal(size=(200, 6))
        x = (x - x.mean(axis=0)) / x.std(axis=0)
        w_true = rng.normal(size=(6, 2))
        y = x @ w_true + 0.5 + 0.01 * rng.normal(size=(200, 2))
        model = lasso_fit(x, y, lam=0.0)
        # normal-equations oracle with intercept column
        xa = np.hstack([x, np.ones((200, 1))])
        beta = np.linalg.lstsq(xa, y, rcond=None)[0]
        assert np.allclose(model.coef, beta[:-1], atol=1e-6)
        assert np.allclose(model.intercept, beta[-1], atol=1e-6)

    def test_huge_penalty_zeroes_coefficients(self):
        rng = np.random.default_rng(5)
        x = rng.normal(size=(100, 4))
        y = rng.normal(loc=-90.0, scale=8.0, size=(100, 1))
        model = lasso_fit(x, y, lam=1e6)
        assert np.all(model.coef == 0.0)
        assert model.intercept[0] == pytest.approx(y.mean(), rel=1e-9)

    def test_one_dim_soft_threshold_closed_form(self):
        rng = np.random.default_rng(6)
        x = rng.normal(size=(500, 1))
        x -= x.mean()  # centered regressor makes the textbook form exact
        y = (3.0 * x + rng.normal(scale=0.1, size=(500, 1)))
        for lam in (0.0, 0.5, 1.0, 5.0):
            model = lasso_fit(x, y, lam=lam)
            yc = y - y.mean()
            rho = float(x[:, 0] @ yc[:, 0]) / len(x)
            z = float(x[:, 0] @ x[:, 0]) / len(x)
            want = np.sign(rho) * max(abs(rho) - lam, 0.0) / z
            assert model.coef[0, 0] == pytest.approx(want, abs=1e-6)

    def test_convergence_error(self):
        rng = np.random.default_rng(7)
        x = rng.normal(size=(50, 3))
        y = rng.normal(size=(50, 1))
        with pytest.raises(ConvergenceError):
            lasso_fit(x, y, lam=0.0, max_sweeps=1, tol=1e-15)

    def test_predict_shapes(self):
        rng = np.random.default_rng(8)
        x = rng.normal(size=(60, 3))
        y = rng.normal(size=(60, 2))
        model = lasso_fit(x, y, lam=0.1)
        assert lasso_predict(model, x).shape == (60, 2)
        assert lasso_predict(model, x[0]).shape == (2,)
