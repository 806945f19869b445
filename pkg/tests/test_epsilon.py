import numpy as np
import pytest
import scipy.sparse as sp

from hicontrast.epsilon import (
    build_epsilon_problem,
    epsilon_index,
    fit_slope,
    projection_distance,
    solve_near,
)
from hicontrast.errors import ConfigError
from hicontrast.geometry import Ball, BoundaryInclusionPolicy, CellGeometry, DefectBall, DefectSpec, Polygon

GEOM = CellGeometry(2, Ball((0.5, 0.5), 0.3))
POL = BoundaryInclusionPolicy("power_law", 1.0, 1.0)
DEFECT = DefectSpec(DefectBall(0.5), 1.0)
GAP_MID = 71.9  # middle of the first gap of the rho=0.3 disk cell


@pytest.fixture(scope="module")
def small():
    return build_epsilon_problem(GEOM, DEFECT, POL, 0.25, 1.0, cells_per_inclusion=4)


def test_phase_areas(small):
    areas = small.phase_areas()
    side = 2 * small.half_width
    assert sum(areas.values()) == pytest.approx(side**2, rel=1e-12)
    assert areas["defect"] == pytest.approx(np.pi * 0.25, rel=2e-2)
    assert areas["boundary_inclusion"] > 0


def test_operators_symmetric_psd(small):
    for A in (small.K, small.M):
        assert abs(A - A.T).max() == 0.0
    x = np.random.default_rng(0).standard_normal(small.n_dofs)
    assert x @ (small.K @ x) > 0
    assert x @ (small.M @ x) > 0


def test_coefficients_by_phase(small):
    eps = small.eps
    tags = small.labels
    assert np.allclose(small.coefficient[tags == 0], eps**2)  # inclusion
    assert np.allclose(small.coefficient[tags == 1], 1.0)  # matrix
    assert np.allclose(small.coefficient[tags == 2], 1.0)  # defect a2
    assert np.allclose(small.coefficient[tags == 3], eps)  # cut inclusions, theta = 1


@pytest.mark.filterwarnings("ignore:window around")
def test_eigenvalues_positive(small):
    sol = solve_near(small, 5.0, 10.0, 4)
    assert np.all(sol.eigenvalues > 0)


@pytest.mark.filterwarnings("ignore:window around")
def test_projection_distance_bounds(small):
    sol = solve_near(small, GAP_MID, 40.0, 4)
    u = sol.vectors[:, 0]
    assert projection_distance(small, u, sol.vectors) == pytest.approx(0.0, abs=1e-8)
    assert projection_distance(small, u, sol.vectors[:, :0]) == 1.0


def test_no_defect_window_empty():
    prob = build_epsilon_problem(GEOM, None, POL, 1 / 8, 1.5, cells_per_inclusion=6)
    assert len(solve_near(prob, GAP_MID, 5.0, 6).eigenvalues) == 0


def test_epsilon_snaps_to_reciprocal_integer():
    assert epsilon_index(1 / 16) == 16
    with pytest.raises(ConfigError):
        epsilon_index(0.3)


def test_polygon_defect_rejected():
    sq = Polygon(((-0.5, -0.5), (0.5, -0.5), (0.5, 0.5), (-0.5, 0.5)))
    with pytest.raises(ConfigError):
        build_epsilon_problem(GEOM, DefectSpec(sq, 1.0), POL, 0.25, 1.0)


def test_truncation_too_small():
    with pytest.raises(ConfigError):
        build_epsilon_problem(GEOM, DEFECT, POL, 0.25, 0.5)


def test_fit_slope_exact_power():
    eps = [1 / 8, 1 / 16, 1 / 32]
    ls, two = fit_slope(eps, [3 * e**0.5 for e in eps])
    assert ls == pytest.approx(0.5) and two == pytest.approx(0.5)
    assert np.isnan(fit_slope(eps, [float("nan"), float("nan"), 1.0])[0])
