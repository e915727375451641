"""Selected models and fit quality metrics."""

from dataclasses import dataclass

import numpy as np

from .errors import DataError, NumericalError, TransformMismatchError
from .standardize import StandardizedMatrix


@dataclass
class SelectedModel:
    """One cross-validation winner: a sparse coefficient map over standardized
    columns, plus the intercept (training response mean) and bookkeeping."""

    intercept: float
    coef: dict  # column_id -> non-zero coefficient
    subset_size: int
    validation_sse: float
    transform_ref: str

    def __post_init__(self):
        if self.subset_size != len(self.coef):
            raise DataError("subset_size must equal the number of non-zero coefficients")
        if self.validation_sse < 0:
            raise DataError("validation SSE cannot be negative")


def predict(model, X):
    """Predict from a matrix standardized with the model's own transform.

    Parameters
    ----------
    model : SelectedModel
    X : StandardizedMatrix
        Must carry the model's transform_ref and contain every column the
        model has a coefficient for (extra columns are fine).

    Returns
    -------
    (n,) prediction array.
    """
    if not isinstance(X, StandardizedMatrix):
        raise DataError("predict needs a StandardizedMatrix")
    if X.transform_ref != model.transform_ref:
        raise TransformMismatchError(
            f"matrix was built with transform {X.transform_ref!r}, "
            f"model expects {model.transform_ref!r}"
        )
    out = np.full(X.n_rows, model.intercept, dtype=np.float64)
    if not model.coef:
        return out
    positions = {cid: j for j, cid in enumerate(X.column_ids)}
    missing = [cid for cid in model.coef if cid not in positions]
    if missing:
        raise DataError(f"matrix lacks model columns: {missing[:8]}")
    cols = np.array([positions[cid] for cid in model.coef], dtype=np.intp)
    weights = np.array(list(model.coef.values()), dtype=np.float64)
    out += X.values[:, cols] @ weights
    return out


@dataclass(frozen=True)
class FitMetrics:
    r2: float
    rmse: float
    n: int


def fit_metrics(observed, predicted):
    """R-squared and RMSE of predictions against observations.

    R-squared is 1 - SSE/SST with SST about the observed mean, so values
    below zero mean the predictions do worse than a constant.
    """
    obs = np.asarray(observed, dtype=np.float64)
    pred = np.asarray(predicted, dtype=np.float64)
    if obs.shape != pred.shape or obs.ndim != 1:
        raise DataError("observed/predicted must be 1-d arrays of equal length")
    if obs.size < 2:
        raise DataError("metrics need at least two observations")
    if not (np.isfinite(obs).all() and np.isfinite(pred).all()):
        raise DataError("non-finite values in metrics input")
    sst = float(((obs - obs.mean()) ** 2).sum())
    if sst == 0.0:
        raise NumericalError("undefined R2: observed values are constant")
    resid = obs - pred
    sse = float((resid**2).sum())
    return FitMetrics(
        r2=1.0 - sse / sst,
        rmse=float(np.sqrt((resid**2).mean())),
        n=obs.size,
    )
