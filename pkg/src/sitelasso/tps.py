"""Exact thin-plate spline surfaces for scattered 2-d interpolation.

The surface is f(x, y) = a0 + ax*x + ay*y + sum_k w_k * U(|p - p_k|) with the
radial kernel U(r) = r^2 log r (U(0) = 0). Weights solve the standard
augmented linear system; a non-negative smoothing parameter relaxes exact
interpolation by adding smoothing * I to the kernel block.

Coordinates are shifted to their centroid and scaled to unit RMS radius
before the system is assembled. Under the side conditions (kernel weights
orthogonal to the affine space) this changes nothing about the fitted
surface — the scale residue of r^2 log r collapses into the affine part —
but it keeps the linear system well conditioned at any coordinate scale.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError, NumericalError

_COLLINEAR_RTOL = 1e-9
_CONDITION_LIMIT = 1e12


@dataclass
class ThinPlateSpline:
    """A fitted surface: normalized knots, their weights, the affine drift."""

    knots_x: np.ndarray  # normalized coordinates
    knots_y: np.ndarray
    kernel_weights: np.ndarray
    affine: np.ndarray  # (a0, ax, ay) over normalized coordinates
    x_center: float
    y_center: float
    coord_scale: float
    smoothing: float

    @property
    def n_knots(self):
        return self.knots_x.size


def _kernel(r2):
    """U(r) = r^2 log r evaluated from squared distances, with U(0) = 0."""
    out = np.zeros_like(r2)
    pos = r2 > 0.0
    # r^2 log r = 0.5 * r^2 log r^2 avoids the square root
    out[pos] = 0.5 * r2[pos] * np.log(r2[pos])
    return out


def _collapse_duplicates(x, y, v):
    """Average values sharing exact coordinates; order of first appearance."""
    seen = {}
    order = []
    for xi, yi, vi in zip(x, y, v):
        key = (xi, yi)
        if key not in seen:
            seen[key] = []
            order.append(key)
        seen[key].append(vi)
    xs = np.array([k[0] for k in order])
    ys = np.array([k[1] for k in order])
    vs = np.array([float(np.mean(seen[k])) for k in order])
    return xs, ys, vs


def fit_tps(x, y, values, smoothing=0.0):
    """Fit a thin-plate spline through scattered points.

    Duplicate coordinates are collapsed by averaging their values first.
    Raises DataError for fewer than 3 distinct points or collinear layouts,
    NumericalError when the assembled system is too ill-conditioned to trust
    (jitter the coordinates in that case), ConfigError for smoothing < 0.
    """
    if smoothing < 0:
        raise ConfigError("tps smoothing must be >= 0")
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    v = np.asarray(values, dtype=np.float64).ravel()
    if not (x.size == y.size == v.size):
        raise DataError("x, y and values must have equal lengths")
    if not (np.isfinite(x).all() and np.isfinite(y).all() and np.isfinite(v).all()):
        raise DataError("tps inputs must be finite")
    x, y, v = _collapse_duplicates(x, y, v)
    m = x.size
    if m < 3:
        raise DataError(f"tps needs at least 3 distinct points, got {m}")
    x_center = float(x.mean())
    y_center = float(y.mean())
    dx0 = x - x_center
    dy0 = y - y_center
    coord_scale = float(np.sqrt(np.mean(dx0 * dx0 + dy0 * dy0)))
    if coord_scale <= 0.0:
        raise DataError("tps points are coincident; a surface is undetermined")
    xs = dx0 / coord_scale
    ys = dy0 / coord_scale
    coords = np.column_stack([xs, ys])
    sv = np.linalg.svd(coords, compute_uv=False)
    if sv[1] <= _COLLINEAR_RTOL * max(sv[0], 1e-300):
        raise DataError("tps points are collinear; a surface is undetermined")
    dx = xs[:, None] - xs[None, :]
    dy = ys[:, None] - ys[None, :]
    K = _kernel(dx * dx + dy * dy)
    if smoothing > 0:
        K = K + smoothing * np.eye(m)
    P = np.column_stack([np.ones(m), xs, ys])
    system = np.zeros((m + 3, m + 3))
    system[:m, :m] = K
    system[:m, m:] = P
    system[m:, :m] = P.T
    rhs = np.concatenate([v, np.zeros(3)])
    condition = np.linalg.cond(system)
    if not np.isfinite(condition) or condition > _CONDITION_LIMIT:
        raise NumericalError(
            f"tps system condition {condition:.3e} exceeds {_CONDITION_LIMIT:.0e}; "
            "jitter the point coordinates or increase smoothing"
        )
    try:
        solution = np.linalg.solve(system, rhs)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"tps system is singular: {exc}")
    return ThinPlateSpline(
        knots_x=xs,
        knots_y=ys,
        kernel_weights=solution[:m],
        affine=solution[m:],
        x_center=x_center,
        y_center=y_center,
        coord_scale=coord_scale,
        smoothing=float(smoothing),
    )


def eval_tps(surface, x, y):
    """Evaluate the surface at points; scalars in, scalar out."""
    xq = np.asarray(x, dtype=np.float64)
    yq = np.asarray(y, dtype=np.float64)
    scalar = xq.ndim == 0 and yq.ndim == 0
    xq = np.atleast_1d(xq).ravel()
    yq = np.atleast_1d(yq).ravel()
    if xq.size != yq.size:
        raise DataError("x and y query arrays must have equal lengths")
    xs = (xq - surface.x_center) / surface.coord_scale
    ys = (yq - surface.y_center) / surface.coord_scale
    dx = xs[:, None] - surface.knots_x[None, :]
    dy = ys[:, None] - surface.knots_y[None, :]
    base = _kernel(dx * dx + dy * dy) @ surface.kernel_weights
    a0, ax, ay = surface.affine
    out = base + a0 + ax * xs + ay * ys
    return float(out[0]) if scalar else out


def points_to_square_mean(surface, center, side=25.0, grid_n=10):
    """Mean surface value over a regular lattice inside a square.

    The lattice places one point at the center of each cell of a
    grid_n x grid_n subdivision of the square.
    """
    if grid_n < 1:
        raise ConfigError("grid_n must be >= 1")
    if not side > 0:
        raise DataError("square side must be positive")
    cx, cy = float(center[0]), float(center[1])
    offsets = (np.arange(grid_n) + 0.5) / grid_n * side - side / 2.0
    gx, gy = np.meshgrid(cx + offsets, cy + offsets)
    return float(np.mean(eval_tps(surface, gx.ravel(), gy.ravel())))
