"""Regular-grid rasters: ESRI ASCII IO and area-weighted square averaging.

Grids are row-major with row 0 the northernmost row, matching the on-disk
layout of the ASCII format. All floating-point output is printed with 17
significant digits so files round-trip bit-exactly.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .pointdata import format_float

DEFAULT_NODATA = -9999.0

_HEADER_KEYS = ("ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value")


@dataclass
class RasterGrid:
    """A single-band regular raster.

    ``values`` has shape (nrows, ncols); row 0 is the top (largest y) row.
    """

    ncols: int
    nrows: int
    xll: float
    yll: float
    cellsize: float
    nodata: float
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.ncols <= 0 or self.nrows <= 0:
            raise DataError("raster dimensions must be positive")
        if not self.cellsize > 0:
            raise DataError("raster cellsize must be positive")
        if self.values.shape != (self.nrows, self.ncols):
            raise DataError(
                f"raster values shape {self.values.shape} does not match "
                f"(nrows, ncols) = ({self.nrows}, {self.ncols})"
            )

    @property
    def x_max(self):
        return self.xll + self.ncols * self.cellsize

    @property
    def y_max(self):
        return self.yll + self.nrows * self.cellsize

    def same_grid(self, other):
        """True when the two rasters are co-registered (identical geometry)."""
        return (
            self.ncols == other.ncols
            and self.nrows == other.nrows
            and self.xll == other.xll
            and self.yll == other.yll
            and self.cellsize == other.cellsize
        )

    def nodata_mask(self):
        """Boolean (nrows, ncols) array flagging missing cells."""
        return (self.values == self.nodata) | np.isnan(self.values)

    def x_centers(self):
        return self.xll + (np.arange(self.ncols) + 0.5) * self.cellsize

    def y_centers(self):
        """Cell-center y coordinates ordered like the rows (north to south)."""
        return self.yll + (self.nrows - np.arange(self.nrows) - 0.5) * self.cellsize

    def with_values(self, values):
        return RasterGrid(
            ncols=self.ncols,
            nrows=self.nrows,
            xll=self.xll,
            yll=self.yll,
            cellsize=self.cellsize,
            nodata=self.nodata,
            values=values,
        )


def write_ascii_grid(path, grid):
    """Write a grid in the plain-text header + row-major layout."""
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(f"ncols {grid.ncols}\n")
        handle.write(f"nrows {grid.nrows}\n")
        handle.write(f"xllcorner {format_float(grid.xll)}\n")
        handle.write(f"yllcorner {format_float(grid.yll)}\n")
        handle.write(f"cellsize {format_float(grid.cellsize)}\n")
        handle.write(f"NODATA_value {format_float(grid.nodata)}\n")
        for i in range(grid.nrows):
            handle.write(" ".join(format_float(v) for v in grid.values[i]))
            handle.write("\n")


def read_ascii_grid(path):
    """Parse a plain-text grid; header keys are case-insensitive."""
    header = {}
    data_tokens = []
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            parts = line.split()
            if not parts:
                continue
            key = parts[0].lower()
            if len(parts) == 2 and key in _HEADER_KEYS and key not in header:
                header[key] = parts[1]
            else:
                data_tokens.extend(parts)
    for key in ("ncols", "nrows", "xllcorner", "yllcorner", "cellsize"):
        if key not in header:
            raise DataError(f"raster {path} is missing header key {key}")
    try:
        ncols = int(header["ncols"])
        nrows = int(header["nrows"])
        xll = float(header["xllcorner"])
        yll = float(header["yllcorner"])
        cellsize = float(header["cellsize"])
        nodata = float(header.get("nodata_value", DEFAULT_NODATA))
        values = np.array([float(tok) for tok in data_tokens], dtype=np.float64)
    except ValueError as exc:
        raise DataError(f"raster {path} has a malformed value: {exc}")
    if values.size != ncols * nrows:
        raise DataError(
            f"raster {path} carries {values.size} values, expected {ncols * nrows}"
        )
    return RasterGrid(
        ncols=ncols,
        nrows=nrows,
        xll=xll,
        yll=yll,
        cellsize=cellsize,
        nodata=nodata,
        values=values.reshape(nrows, ncols),
    )


def _axis_overlaps(low_edge, cell, n_cells, lo, hi):
    """Per-cell overlap lengths of [lo, hi] with a partitioned axis.

    Returns (first_index, lengths) covering only cells with positive overlap.
    """
    first = max(0, int(math.floor((lo - low_edge) / cell)))
    last = min(n_cells - 1, int(math.ceil((hi - low_edge) / cell)) - 1)
    if last < first:
        return 0, np.empty(0)
    idx = np.arange(first, last + 1)
    left = low_edge + idx * cell
    right = left + cell
    lengths = np.minimum(right, hi) - np.maximum(left, lo)
    keep = lengths > 0.0
    if not keep.any():
        return 0, np.empty(0)
    nz = np.flatnonzero(keep)
    return first + nz[0], lengths[nz[0] : nz[-1] + 1]


def raster_to_square_mean(grid, center, side=25.0):
    """Area-weighted mean of the pixels intersecting an axis-aligned square.

    The weight of each pixel is its intersection area with the square
    centred at ``center`` with edge length ``side``. Raises DataError when
    the square misses the raster entirely or any intersecting pixel is
    nodata.
    """
    if not side > 0:
        raise DataError("square side must be positive")
    cx, cy = float(center[0]), float(center[1])
    half = side / 2.0
    x_lo, x_hi = cx - half, cx + half
    y_lo, y_hi = cy - half, cy + half
    col0, wx = _axis_overlaps(grid.xll, grid.cellsize, grid.ncols, x_lo, x_hi)
    row_bottom0, wy_bottom = _axis_overlaps(
        grid.yll, grid.cellsize, grid.nrows, y_lo, y_hi
    )
    if wx.size == 0 or wy_bottom.size == 0:
        raise DataError(
            f"square at ({format_float(cx)}, {format_float(cy)}) does not "
            "intersect the raster extent"
        )
    total = 0.0
    accum = 0.0
    mask = grid.nodata_mask()
    for b in range(wy_bottom.size):
        row = grid.nrows - 1 - (row_bottom0 + b)  # bottom-up index -> stored row
        wy = wy_bottom[b]
        for a in range(wx.size):
            col = col0 + a
            if mask[row, col]:
                raise DataError(
                    f"square at ({format_float(cx)}, {format_float(cy)}) "
                    f"overlaps nodata pixel (row {row}, col {col})"
                )
            area = wx[a] * wy
            total += area
            accum += grid.values[row, col] * area
    if total <= 0.0:
        raise DataError(
            f"square at ({format_float(cx)}, {format_float(cy)}) does not "
            "intersect the raster extent"
        )
    return accum / total
