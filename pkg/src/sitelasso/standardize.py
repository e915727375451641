"""Column standardization fitted on training rows and replayed elsewhere.

Each retained column is centred on its training mean and scaled so the
centred training values have unit L2 norm (a sum of squares, not a variance).
Site-scoped columns are special: their statistics come from matching-site
training rows only, the scaling touches only matching-site rows, and rows of
the other site remain exactly 0.0. Because the matching rows sum to zero and
the structural zeros contribute nothing, the full column still has mean 0 and
norm 1.

Columns whose centred norm is ~0 (relative tolerance 1e-12 against the
column's peak magnitude) are dropped and recorded; apply_transform drops the
same columns silently, with a log entry.
"""

import csv
import hashlib
import logging
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .pointdata import format_float
from .terms import RawDesign, parse_term_id

log = logging.getLogger(__name__)

ZERO_NORM_RTOL = 1e-12
MEAN_TOL = 1e-10
NORM_TOL = 1e-10


@dataclass
class StandardizedMatrix:
    """Design matrix after a transform has been applied.

    Carries the id of the transform that produced it so prediction can refuse
    matrices built with the wrong one.
    """

    values: np.ndarray
    terms: list
    transform_ref: str

    @property
    def n_rows(self):
        return self.values.shape[0]

    @property
    def n_cols(self):
        return self.values.shape[1]

    @property
    def column_ids(self):
        return [t.term_id for t in self.terms]


@dataclass
class StandardizationTransform:
    """Training means/norms for every fit-time column, plus drop flags."""

    terms: list
    means: np.ndarray
    norms: np.ndarray
    dropped: np.ndarray  # bool per fit-time column
    n_training_rows: int

    def __post_init__(self):
        self.means = np.asarray(self.means, dtype=np.float64)
        self.norms = np.asarray(self.norms, dtype=np.float64)
        self.dropped = np.asarray(self.dropped, dtype=bool)
        p = len(self.terms)
        if not (len(self.means) == len(self.norms) == len(self.dropped) == p):
            raise DataError("transform arrays do not match the term list")
        self._id = None

    @property
    def transform_id(self):
        """Deterministic content hash; equal content gives an equal id."""
        if self._id is None:
            digest = hashlib.sha1()
            for term, m, s, d in zip(self.terms, self.means, self.norms, self.dropped):
                digest.update(
                    f"{term.term_id}|{m!r}|{s!r}|{int(d)}\n".encode("utf-8")
                )
            self._id = "xf-" + digest.hexdigest()[:16]
        return self._id

    @property
    def retained_indices(self):
        return np.flatnonzero(~self.dropped)

    @property
    def retained_terms(self):
        return [self.terms[i] for i in self.retained_indices]

    @property
    def dropped_ids(self):
        return [self.terms[i].term_id for i in np.flatnonzero(self.dropped)]


def _scope_groups(terms, row_sites):
    """Yield (column indices, matching-row mask) per scope."""
    scopes = {}
    for j, term in enumerate(terms):
        scopes.setdefault(term.scope, []).append(j)
    n = len(row_sites)
    for scope, cols in scopes.items():
        mask = np.ones(n, dtype=bool) if scope is None else np.asarray(row_sites == scope)
        yield np.asarray(cols, dtype=np.intp), mask


def fit_transform(design):
    """Fit a transform on ``design`` and return the standardized training matrix.

    Parameters
    ----------
    design : RawDesign of training rows.

    Returns
    -------
    (StandardizedMatrix, StandardizationTransform)
    """
    if design.n_rows < 2:
        raise DataError("standardization needs at least two training rows")
    X = design.values
    if not np.isfinite(X).all():
        raise DataError("non-finite value in the training design")
    p = design.n_cols
    means = np.zeros(p)
    norms = np.zeros(p)
    dropped = np.zeros(p, dtype=bool)
    out_full = np.zeros_like(X)
    for cols, mask in _scope_groups(design.terms, design.row_sites):
        n_match = int(mask.sum())
        if n_match == 0:
            dropped[cols] = True
            continue
        sub = X[np.ix_(mask, cols)]
        m = sub.mean(axis=0)
        centred = sub - m
        nrm = np.sqrt((centred**2).sum(axis=0))
        peak = np.abs(sub).max(axis=0)
        drop = nrm <= ZERO_NORM_RTOL * peak
        means[cols] = m
        norms[cols] = nrm
        dropped[cols] = drop
        keep = ~drop
        safe = np.where(drop, 1.0, nrm)
        scaled = centred / safe
        block = np.zeros_like(scaled)
        block[:, keep] = scaled[:, keep]
        out_full[np.ix_(mask, cols)] = block
    transform = StandardizationTransform(
        list(design.terms), means, norms, dropped, design.n_rows
    )
    for cid in transform.dropped_ids:
        log.info("standardization dropped constant column %s", cid)
    retained = transform.retained_indices
    if retained.size == 0:
        raise DataError("standardization dropped every column")
    matrix = StandardizedMatrix(
        out_full[:, retained], transform.retained_terms, transform.transform_id
    )
    return matrix, transform


def apply_transform(design, transform):
    """Replay training means/norms onto new rows; never refits.

    ``design`` must carry exactly the transform's fit-time columns, in order.
    Columns dropped at fit time are dropped here too (logged). Site-scoped
    columns are transformed on matching-site rows only; other rows stay 0.0.
    """
    fit_ids = [t.term_id for t in transform.terms]
    new_ids = design.column_ids
    if new_ids != fit_ids:
        missing = sorted(set(fit_ids) - set(new_ids))
        extra = sorted(set(new_ids) - set(fit_ids))
        raise DataError(
            "column mismatch against the fitted transform: "
            f"missing={missing[:8]} extra={extra[:8]}"
            + ("" if new_ids == sorted(new_ids) else " (or column order differs)")
        )
    if not np.isfinite(design.values).all():
        raise DataError("non-finite value in the design passed to apply_transform")
    dropped_ids = transform.dropped_ids
    if dropped_ids:
        log.debug(
            "apply_transform dropping %d fit-time constant columns: %s",
            len(dropped_ids),
            dropped_ids[:8],
        )
    retained = transform.retained_indices
    out = np.zeros((design.n_rows, retained.size), dtype=np.float64)
    for k, j in enumerate(retained):
        term = transform.terms[j]
        col = design.values[:, j]
        if term.scope is None:
            out[:, k] = (col - transform.means[j]) / transform.norms[j]
        else:
            mask = design.row_sites == term.scope
            out[mask, k] = (col[mask] - transform.means[j]) / transform.norms[j]
    return StandardizedMatrix(out, transform.retained_terms, transform.transform_id)


def check_standardized(matrix):
    """Validate StandardizedMatrix invariants, naming the first offender.

    Every column must be finite, not all zero, with mean 0 (absolute
    tolerance 1e-10) and L2 norm 1 (tolerance 1e-10). Site-scoped columns
    pass the same check because their zeros contribute nothing.
    """
    X = matrix.values
    if X.ndim != 2:
        raise DataError("standardized values must be 2-d")
    for j in range(X.shape[1]):
        col = X[:, j]
        cid = matrix.terms[j].term_id if j < len(matrix.terms) else str(j)
        if not np.isfinite(col).all():
            raise DataError(f"column {cid} has non-finite entries")
        if not np.any(col != 0.0):
            raise DataError(f"column {cid} is entirely zero")
        if abs(float(col.mean())) > MEAN_TOL:
            raise DataError(f"column {cid} is not centred (mean {col.mean():.3e})")
        nrm = float(np.sqrt((col**2).sum()))
        if abs(nrm - 1.0) > NORM_TOL:
            raise DataError(f"column {cid} is not unit-norm (norm {nrm:.12f})")


TRANSFORM_CSV_HEADER = ["column_id", "mean", "norm", "dropped"]


def write_transform_csv(path, transform):
    """Serialize a transform; schema v1, one row per fit-time column."""
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(TRANSFORM_CSV_HEADER)
        for term, m, s, d in zip(
            transform.terms, transform.means, transform.norms, transform.dropped
        ):
            writer.writerow([term.term_id, format_float(m), format_float(s), int(d)])


def read_transform_csv(path, n_training_rows=0):
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header != TRANSFORM_CSV_HEADER:
            raise DataError(f"{path}: unexpected transform header {header}")
        terms, means, norms, dropped = [], [], [], []
        for row in reader:
            if not row:
                continue
            terms.append(parse_term_id(row[0]))
            means.append(float(row[1]))
            norms.append(float(row[2]))
            dropped.append(bool(int(row[3])))
    return StandardizationTransform(
        terms, np.array(means), np.array(norms), np.array(dropped), n_training_rows
    )
