"""Coverage error metrics and error-distribution summaries."""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, ShapeError


def _masked_pair(y, yhat, mask):
    y = np.asarray(y, dtype=float)
    yhat = np.asarray(yhat, dtype=float)
    if y.shape != yhat.shape:
        raise ShapeError(f"shape mismatch: {y.shape} vs {yhat.shape}")
    if mask is None:
        mask = np.ones(y.shape, dtype=bool)
    else:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != y.shape:
            raise ShapeError(f"mask shape {mask.shape} does not match {y.shape}")
    if not mask.any():
        raise InvalidInputError("mask selects no entries")
    return y[mask], yhat[mask]


def mae(y, yhat, mask=None) -> float:
    """Mean absolute error over the masked-in entries, dB."""
    yv, yh = _masked_pair(y, yhat, mask)
    return float(np.mean(np.abs(yh - yv)))


def mape(y, yhat, mask=None) -> float:
    """Mean absolute percentage error over the masked-in entries."""
    yv, yh = _masked_pair(y, yhat, mask)
    if np.any(yv == 0.0):
        raise InvalidInputError("ground truth contains zeros; MAPE undefined")
    return float(np.mean(np.abs(yh - yv) / np.abs(yv)) * 100.0)


@dataclass
class ErrorDistribution:
    """Histogram of absolute errors in fixed 1 dB bins [0,1) .. [19,20), 20+."""

    counts: np.ndarray           # (21,) int
    fractions: np.ndarray        # (21,) float
    frac_below: dict             # threshold dB -> fraction strictly below
    quartiles: tuple             # (q25, q50, q75)
    n: int


BIN_EDGES = np.arange(0.0, 21.0)  # last bin is open-ended


def error_distribution(abs_errors, thresholds=(5.0, 8.0)) -> ErrorDistribution:
    errs = np.asarray(abs_errors, dtype=float).ravel()
    if errs.size == 0:
        raise InvalidInputError("no errors to summarize")
    if np.any(errs < 0):
        raise InvalidInputError("absolute errors must be nonnegative")
    counts = np.zeros(21, dtype=int)
    inner = np.histogram(errs[errs < 20.0], bins=BIN_EDGES)[0]
    counts[:20] = inner
    counts[20] = int((errs >= 20.0).sum())
    fractions = counts / errs.size
    frac_below = {float(t): float((errs < t).mean()) for t in thresholds}
    q25, q50, q75 = np.quantile(errs, [0.25, 0.5, 0.75])
    return ErrorDistribution(counts=counts, fractions=fractions,
                             frac_below=frac_below,
                             quartiles=(float(q25), float(q50), float(q75)),
                             n=int(errs.size))
