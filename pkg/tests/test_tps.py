import numpy as np
import pytest

from sitelasso.errors import ConfigError, DataError
from sitelasso.tps import eval_tps, fit_tps, points_to_square_mean


def scattered(seed=0, n=50, span=100.0):
    rng = np.random.default_rng(seed)
    x = rng.uniform(0, span, size=n)
    y = rng.uniform(0, span, size=n)
    return x, y, rng


def test_interpolates_through_knots():
    x, y, rng = scattered(seed=1, n=40)
    v = np.sin(x / 20.0) + np.cos(y / 15.0) + rng.normal(scale=0.1, size=40)
    surface = fit_tps(x, y, v)
    at_knots = eval_tps(surface, x, y)
    assert np.max(np.abs(at_knots - v)) < 1e-8


def test_reproduces_affine_plane_everywhere():
    x, y, rng = scattered(seed=2, n=25)
    v = 3.5 - 0.02 * x + 0.07 * y
    surface = fit_tps(x, y, v)
    qx = rng.uniform(-50, 150, size=200)
    qy = rng.uniform(-50, 150, size=200)
    expected = 3.5 - 0.02 * qx + 0.07 * qy
    assert np.max(np.abs(eval_tps(surface, qx, qy) - expected)) < 1e-8


def test_matches_independent_dense_solve():
    x, y, rng = scattered(seed=3, n=50)
    v = np.sin(x / 30.0) * np.cos(y / 25.0)
    surface = fit_tps(x, y, v)

    # independent assembly of the same augmented system
    m = x.size
    def U(r2):
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(r2 > 0, 0.5 * r2 * np.log(r2), 0.0)
        return out

    dx = x[:, None] - x[None, :]
    dy = y[:, None] - y[None, :]
    K = U(dx**2 + dy**2)
    P = np.column_stack([np.ones(m), x, y])
    A = np.block([[K, P], [P.T, np.zeros((3, 3))]])
    sol = np.linalg.solve(A, np.concatenate([v, np.zeros(3)]))

    qx = rng.uniform(10, 90, size=80)
    qy = rng.uniform(10, 90, size=80)
    K_q = U((qx[:, None] - x) ** 2 + (qy[:, None] - y) ** 2)
    ref = K_q @ sol[:m] + sol[m] + sol[m + 1] * qx + sol[m + 2] * qy
    assert np.max(np.abs(eval_tps(surface, qx, qy) - ref)) < 1e-8


def test_duplicates_are_averaged():
    x = np.array([0.0, 10.0, 0.0, 5.0])
    y = np.array([0.0, 0.0, 0.0, 8.0])
    v = np.array([1.0, 2.0, 3.0, 4.0])
    surface = fit_tps(x, y, v)
    assert surface.n_knots == 3
    assert eval_tps(surface, 0.0, 0.0) == pytest.approx(2.0, abs=1e-8)


def test_collinear_and_tiny_inputs_error():
    with pytest.raises(DataError, match="at least 3"):
        fit_tps([0.0, 1.0], [0.0, 1.0], [1.0, 2.0])
    x = np.array([0.0, 1.0, 2.0, 3.0])
    with pytest.raises(DataError, match="collinear"):
        fit_tps(x, 2 * x + 1, np.ones(4))


def test_smoothing_validation_and_effect():
    with pytest.raises(ConfigError, match="smoothing"):
        fit_tps([0, 1, 0], [0, 0, 1], [1, 2, 3], smoothing=-0.5)
    x, y, rng = scattered(seed=4, n=30)
    v = np.sin(x / 10.0) + rng.normal(scale=0.2, size=30)
    exact = fit_tps(x, y, v)
    smooth = fit_tps(x, y, v, smoothing=50.0)
    err_exact = np.abs(eval_tps(exact, x, y) - v).max()
    err_smooth = np.abs(eval_tps(smooth, x, y) - v).max()
    assert err_exact < 1e-8
    assert err_smooth > 1e-4  # smoothing relaxes interpolation


def test_square_mean_constant_and_affine():
    x, y, _ = scattered(seed=5, n=20)
    const = fit_tps(x, y, np.full(20, 7.25))
    assert points_to_square_mean(const, (40.0, 40.0)) == pytest.approx(7.25, abs=1e-8)
    plane = fit_tps(x, y, 1.0 + 0.5 * x - 0.25 * y)
    # lattice symmetry: affine surface averages to the center value
    expected = 1.0 + 0.5 * 40.0 - 0.25 * 60.0
    assert points_to_square_mean(plane, (40.0, 60.0)) == pytest.approx(
        expected, abs=1e-8
    )


def test_square_mean_lattice_refinement_converges():
    x, y, _ = scattered(seed=6, n=60, span=200.0)
    v = np.sin(x / 40.0) + np.cos(y / 35.0)
    surface = fit_tps(x, y, v)
    coarse = points_to_square_mean(surface, (100.0, 100.0), grid_n=10)
    fine = points_to_square_mean(surface, (100.0, 100.0), grid_n=40)
    assert coarse == pytest.approx(fine, rel=1e-3)


def test_eval_accepts_scalars():
    x, y, _ = scattered(seed=7, n=10)
    surface = fit_tps(x, y, np.ones(10))
    out = eval_tps(surface, 5.0, 5.0)
    assert isinstance(out, float)


def test_grid_n_validation():
    x, y, _ = scattered(seed=8, n=10)
    surface = fit_tps(x, y, np.ones(10))
    with pytest.raises(ConfigError, match="grid_n"):
        points_to_square_mean(surface, (0.0, 0.0), grid_n=0)
