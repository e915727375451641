"""Cross-validated knot selection and inverse-SSE model averaging."""

import csv
import logging
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DataError, NumericalError
from .lars import lar_lasso_path
from .models import SelectedModel, predict
from .pointdata import format_float
from .standardize import apply_transform, fit_transform

log = logging.getLogger(__name__)


def select_knot(path, X_valid, y_valid):
    """Pick the path knot with minimum validation SSE.

    Ties go to the smaller subset size, then to the earlier (larger lambda)
    knot. The empty knot predicts the training mean carried on the path.

    Returns
    -------
    (SelectedModel, validation_errors) where the errors are observed minus
    predicted at the winning knot.
    """
    y_valid = np.asarray(y_valid, dtype=np.float64)
    if y_valid.shape != (X_valid.n_rows,):
        raise DataError("validation response length does not match the matrix")
    if list(X_valid.column_ids) != list(path.column_ids):
        raise DataError("validation matrix columns do not match the fitted path")
    best = None
    for k, knot in enumerate(path.knots):
        pred = np.full(X_valid.n_rows, path.intercept)
        if knot.subset_size:
            pred += X_valid.values[:, knot.active] @ knot.coefs
        resid = y_valid - pred
        sse = float(resid @ resid)
        key = (sse, knot.subset_size, k)
        if best is None or key < best[0]:
            best = (key, k, resid)
    (sse, size, k), knot_index, resid = best
    knot = path.knots[knot_index]
    coef = {path.column_ids[j]: float(v) for j, v in zip(knot.active, knot.coefs)}
    model = SelectedModel(
        intercept=path.intercept,
        coef=coef,
        subset_size=size,
        validation_sse=sse,
        transform_ref=X_valid.transform_ref,
    )
    return model, resid


def ensemble_weights(validation_sses):
    """Inverse-SSE weights, normalized to sum to one.

    Any model with exactly zero validation SSE is a degenerate perfect fit;
    such models share the weight equally and everything else gets zero
    (logged), since inverse error is unbounded there.
    """
    sses = np.asarray(validation_sses, dtype=np.float64)
    if sses.ndim != 1 or sses.size == 0:
        raise DataError("need a non-empty 1-d array of validation SSEs")
    if np.any(sses < 0) or not np.isfinite(sses).all():
        raise DataError("validation SSEs must be finite and non-negative")
    zero = sses == 0.0
    if zero.any():
        log.warning(
            "%d of %d models have zero validation SSE; weight shared among them",
            int(zero.sum()),
            sses.size,
        )
        weights = np.zeros_like(sses)
        weights[zero] = 1.0 / zero.sum()
        return weights
    inv = 1.0 / sses
    return inv / inv.sum()


@dataclass
class Ensemble:
    """The cross-validation ensemble for one method and one design."""

    models: list
    transforms: list
    weights: np.ndarray
    terms: list  # fit-time term list of the shared raw design
    split_plan_ref: str
    validation_errors: list  # per-split residual arrays at the chosen knot
    validation_rows: list  # per-split dataset row ids of the validation set

    @property
    def n_models(self):
        return len(self.models)

    @property
    def column_ids(self):
        return [t.term_id for t in self.terms]

    def needed_covariates(self):
        """Covariates any member model actually reads."""
        lookup = {t.term_id: t for t in self.terms}
        names = set()
        for model in self.models:
            for cid in model.coef:
                names.update(lookup[cid].covariates)
        return sorted(names)

    def needs_site_information(self):
        lookup = {t.term_id: t for t in self.terms}
        return any(
            lookup[cid].scope is not None
            for model in self.models
            for cid in model.coef
        )


def member_predictions(ensemble, design):
    """Predictions of every member model on a shared raw design.

    Each model standardizes the raw columns with its own training transform
    (training means/norms only) before applying its coefficients.

    Returns
    -------
    (n_models, n_rows) array.
    """
    if design.column_ids != ensemble.column_ids:
        raise DataError("design columns do not match the ensemble's term list")
    n = design.n_rows
    out = np.empty((ensemble.n_models, n))
    site_masks = {}
    for i, (model, transform) in enumerate(zip(ensemble.models, ensemble.transforms)):
        position = {t.term_id: j for j, t in enumerate(transform.terms)}
        acc = np.full(n, model.intercept)
        try:
            for cid, coef in model.coef.items():
                j = position[cid]
                term = transform.terms[j]
                col = design.values[:, j]
                m = transform.means[j]
                s = transform.norms[j]
                if term.scope is None:
                    acc += coef * ((col - m) / s)
                else:
                    if term.scope not in site_masks:
                        site_masks[term.scope] = design.row_sites == term.scope
                    mask = site_masks[term.scope]
                    z = np.zeros(n)
                    z[mask] = (col[mask] - m) / s
                    acc += coef * z
        except (KeyError, ZeroDivisionError, FloatingPointError) as exc:
            raise NumericalError(f"transform replay failed for split {i}: {exc!r}")
        out[i] = acc
    return out


def model_average(ensemble, design):
    """Weighted-average prediction of the ensemble on raw data.

    ``design`` is a RawDesign over exactly the ensemble's term list; every
    member model applies its own training transform to it.
    """
    preds = member_predictions(ensemble, design)
    return ensemble.weights @ preds


def tally_selection(ensemble):
    """Count how often each term carries a non-zero coefficient, plus the
    subset-size histogram.

    Returns
    -------
    (dict term_id -> count, dict size -> count)
    """
    freq = Counter()
    sizes = Counter()
    for model in ensemble.models:
        sizes[model.subset_size] += 1
        for cid in model.coef:
            freq[cid] += 1
    total = sum(sizes.values())
    if total != ensemble.n_models:
        raise DataError("tally saw a different number of models than the ensemble")
    return dict(freq), dict(sizes)


def write_selection_csv(path, freq):
    rows = sorted(freq.items(), key=lambda kv: (-kv[1], kv[0]))
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["term", "count"])
        writer.writerows(rows)


def write_size_histogram_csv(path, sizes):
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["subset_size", "count"])
        for size in sorted(sizes):
            writer.writerow([size, sizes[size]])


# ---------------------------------------------------------------------------
# split-level fitting driver


def _positions(row_ids, wanted):
    pos = np.searchsorted(row_ids, wanted)
    if np.any(pos >= row_ids.size) or np.any(row_ids[pos] != wanted):
        raise DataError("split references rows outside the design")
    return pos


def _fit_one_split(design, y, row_ids, train_ids, valid_ids):
    tr = _positions(row_ids, train_ids)
    va = _positions(row_ids, valid_ids)
    train_design = design.subset_rows(tr)
    X_train, transform = fit_transform(train_design)
    y_train = y[tr]
    ybar = float(y_train.mean())
    path = lar_lasso_path(X_train, y_train - ybar, intercept=ybar, validate=False)
    X_valid = apply_transform(design.subset_rows(va), transform)
    model, resid = select_knot(path, X_valid, y[va])
    return model, transform, resid


def _fit_chunk(args):
    design, y, row_ids, split_pairs = args
    return [
        _fit_one_split(design, y, row_ids, tr, va) for tr, va in split_pairs
    ]


def fit_ensemble(design, response, splits, row_ids, split_plan_ref="", workers=1):
    """Fit one model per split and assemble the weighted ensemble.

    Parameters
    ----------
    design : RawDesign aligned to ``row_ids`` (dataset row ids, ascending).
    response : response values aligned to the design rows.
    splits : list of (train_row_ids, validation_row_ids) pairs.
    row_ids : ascending dataset row ids of the design rows.
    split_plan_ref : opaque tag recorded on the ensemble.
    workers : number of processes; results are identical for any value.
    """
    y = np.asarray(response, dtype=np.float64)
    row_ids = np.asarray(row_ids, dtype=np.intp)
    if y.shape != (design.n_rows,) or row_ids.shape != (design.n_rows,):
        raise DataError("response/row_ids must align with the design rows")
    if np.any(np.diff(row_ids) <= 0):
        raise DataError("row_ids must be strictly ascending")
    results = []
    if workers <= 1 or len(splits) < 2:
        results = _fit_chunk((design, y, row_ids, splits))
    else:
        workers = min(workers, len(splits))
        bounds = np.linspace(0, len(splits), workers + 1).astype(int)
        chunks = [
            (design, y, row_ids, splits[a:b])
            for a, b in zip(bounds, bounds[1:])
            if b > a
        ]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for part in pool.map(_fit_chunk, chunks):
                results.extend(part)
    models = [r[0] for r in results]
    transforms = [r[1] for r in results]
    residuals = [r[2] for r in results]
    weights = ensemble_weights(np.array([m.validation_sse for m in models]))
    return Ensemble(
        models=models,
        transforms=transforms,
        weights=weights,
        terms=list(design.terms),
        split_plan_ref=split_plan_ref,
        validation_errors=residuals,
        validation_rows=[np.asarray(va, dtype=np.intp) for _, va in splits],
    )
