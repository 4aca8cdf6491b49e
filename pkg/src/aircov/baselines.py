"""Classical regression baselines: k-nearest-neighbors and L1-penalized
least squares fit by cyclic coordinate descent.

Both operate in the standardized compressed-feature space and predict the
full (M+1)-dimensional target vector, one independent problem per output.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, InvalidInputError


def knn_predict(train_x: np.ndarray, train_y: np.ndarray, query, k: int) -> np.ndarray:
    """Mean target of the k nearest training rows (Euclidean distance).

    Ties in distance resolve in training-row order. ``query`` may be a
    single vector or an (n, d) batch.
    """
    train_x = np.asarray(train_x, float)
    train_y = np.asarray(train_y, float)
    if train_x.shape[0] == 0:
        raise InvalidInputError("empty training set")
    if not 1 <= k <= train_x.shape[0]:
        raise InvalidInputError(
            f"k must be in [1, {train_x.shape[0]}], got {k}")
    q = np.asarray(query, float)
    single = q.ndim == 1
    if single:
        q = q[None, :]
    preds = np.empty((q.shape[0],) + train_y.shape[1:])
    # chunk the distance matrix to bound memory on large query sets
    chunk = max(1, int(2_000_000 // max(1, train_x.shape[0])))
    for start in range(0, q.shape[0], chunk):
        block = q[start:start + chunk]
        d2 = ((block[:, None, :] - train_x[None, :, :]) ** 2).sum(axis=2)
        idx = np.argsort(d2, axis=1, kind="stable")[:, :k]
        preds[start:start + chunk] = train_y[idx].mean(axis=1)
    return preds[0] if single else preds


@dataclass
class LassoModel:
    coef: np.ndarray       # (d, outputs)
    intercept: np.ndarray  # (outputs,)
    n_sweeps: int


def _soft_threshold(rho, lam):
    return np.sign(rho) * np.maximum(np.abs(rho) - lam, 0.0)


def lasso_fit(x: np.ndarray, y: np.ndarray, lam: float, max_sweeps: int = 10000,
              tol: float = 1e-6) -> LassoModel:
    """Cyclic coordinate descent on (1/2n)||y - Xw - b||^2 + lam * ||w||_1.

    Expects standardized features. Converges when no coefficient moves by
    more than ``tol`` in a sweep; raises ConvergenceError at the sweep cap.
    """
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    if y.ndim == 1:
        y = y[:, None]
    n, d = x.shape
    if n == 0:
        raise InvalidInputError("empty training set")
    if lam < 0:
        raise InvalidInputError("lam must be >= 0")
    k = y.shape[1]
    w = np.zeros((d, k))
    b = y.mean(axis=0)
    resid = y - b  # y - Xw - b with w = 0
    col_sq = (x * x).mean(axis=0)
    for sweep in range(1, max_sweeps + 1):
        max_delta = 0.0
        for j in range(d):
            if col_sq[j] == 0.0:
                continue
            xj = x[:, j]
            rho = (xj @ (resid + xj[:, None] * w[j])) / n
            w_new = _soft_threshold(rho, lam) / col_sq[j]
            delta = w_new - w[j]
            not_zero = np.abs(delta) > 0
            if np.any(not_zero):
                resid -= xj[:, None] * delta
                w[j] = w_new
                max_delta = max(max_delta, float(np.abs(delta).max()))
        b_new = b + resid.mean(axis=0)
        db = b_new - b
        if np.any(db != 0.0):
            resid -= db
            b = b_new
            max_delta = max(max_delta, float(np.abs(db).max()))
        if max_delta < tol:
            return LassoModel(coef=w, intercept=b, n_sweeps=sweep)
    raise ConvergenceError(
        f"coordinate descent did not converge in {max_sweeps} sweeps")


def lasso_predict(model: LassoModel, x) -> np.ndarray:
    x = np.asarray(x, float)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    out = x @ model.coef + model.intercept
    return out[0] if single else out
