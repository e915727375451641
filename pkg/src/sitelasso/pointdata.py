"""Point observations: site, position, response, covariates.

The on-disk form is a plain CSV with header ``site,x,y,response`` followed by
one column per covariate. Floats are written with 17 significant digits so a
round trip is bit-exact.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .terms import validate_identifier

RESERVED_COLUMNS = ("site", "x", "y", "response")


def format_float(value):
    """Shortest-exact decimal form used in every CSV this package writes."""
    return "%.17g" % value


@dataclass
class PointDataset:
    """Column-wise storage of point-referenced observations."""

    site_ids: np.ndarray
    x: np.ndarray
    y: np.ndarray
    response: np.ndarray
    covariate_names: list
    covariate_values: np.ndarray  # shape (n_rows, n_covariates)

    def __post_init__(self):
        self.site_ids = np.asarray(self.site_ids, dtype=object)
        self.x = np.asarray(self.x, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64)
        self.response = np.asarray(self.response, dtype=np.float64)
        self.covariate_values = np.asarray(self.covariate_values, dtype=np.float64)
        n = len(self.site_ids)
        if not (len(self.x) == len(self.y) == len(self.response) == n):
            raise DataError("point columns have mixed lengths")
        if self.covariate_values.shape != (n, len(self.covariate_names)):
            raise DataError("covariate block shape does not match names/rows")
        for name in self.covariate_names:
            validate_identifier(name, "covariate name")
            if name in RESERVED_COLUMNS:
                raise DataError(f"covariate name {name!r} is reserved")
        if len(set(self.covariate_names)) != len(self.covariate_names):
            raise DataError("duplicate covariate names")
        for sid in self.sites():
            validate_identifier(sid, "site id")
        if not (np.isfinite(self.x).all() and np.isfinite(self.y).all()):
            raise DataError("non-finite coordinates")
        if not np.isfinite(self.response).all():
            raise DataError("non-finite response values")

    @property
    def n_rows(self):
        return len(self.site_ids)

    def sites(self):
        """Distinct site ids in ascending order."""
        return sorted(set(self.site_ids.tolist()))

    def site_mask(self, site_id):
        return np.asarray(self.site_ids == site_id)

    def site_rows(self, site_id):
        return np.flatnonzero(self.site_mask(site_id))

    def covariate(self, name):
        try:
            j = self.covariate_names.index(name)
        except ValueError:
            raise DataError(f"no covariate named {name!r}") from None
        return self.covariate_values[:, j]

    def covariate_map(self, row_indices=None):
        """Covariate name -> 1-d array mapping, optionally row-subset."""
        if row_indices is None:
            block = self.covariate_values
        else:
            block = self.covariate_values[np.asarray(row_indices, dtype=np.intp)]
        return {name: block[:, j] for j, name in enumerate(self.covariate_names)}

    def subset(self, row_indices):
        idx = np.asarray(row_indices, dtype=np.intp)
        return PointDataset(
            self.site_ids[idx],
            self.x[idx],
            self.y[idx],
            self.response[idx],
            list(self.covariate_names),
            self.covariate_values[idx],
        )


def read_points_csv(path):
    """Load a PointDataset from ``path``.

    Raises DataError on a malformed header, short rows, or unparseable
    numbers, naming the offending row.
    """
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if tuple(header[:4]) != RESERVED_COLUMNS:
            raise DataError(
                f"{path}: header must start with site,x,y,response, got {header[:4]}"
            )
        cov_names = header[4:]
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(
                    f"{path}:{line_no}: expected {len(header)} fields, got {len(row)}"
                )
            try:
                numbers = [float(v) for v in row[1:]]
            except ValueError as exc:
                raise DataError(f"{path}:{line_no}: {exc}") from None
            rows.append((row[0].strip(), numbers))
    if not rows:
        raise DataError(f"{path}: no data rows")
    sites = np.array([r[0] for r in rows], dtype=object)
    numeric = np.array([r[1] for r in rows], dtype=np.float64)
    return PointDataset(
        sites,
        numeric[:, 0],
        numeric[:, 1],
        numeric[:, 2],
        cov_names,
        numeric[:, 3:],
    )


def write_points_csv(path, data):
    """Write ``data`` to ``path`` with 17-significant-digit floats."""
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(list(RESERVED_COLUMNS) + list(data.covariate_names))
        for i in range(data.n_rows):
            row = [
                data.site_ids[i],
                format_float(data.x[i]),
                format_float(data.y[i]),
                format_float(data.response[i]),
            ]
            row.extend(format_float(v) for v in data.covariate_values[i])
            writer.writerow(row)
