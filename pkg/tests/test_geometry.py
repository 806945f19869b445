import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hicontrast.errors import ConfigError, GeometryError
from hicontrast.geometry import (
    Ball,
    BoundaryInclusionPolicy,
    CellGeometry,
    DefectBall,
    DefectSpec,
    PhaseLabel,
    Polygon,
    classify_point,
    classify_points,
    coefficient_at,
)

GEOM = CellGeometry(2, Ball((0.5, 0.5), 0.3))
DEFECT = DefectSpec(DefectBall(2.0), a2=1.0)
EPS = 0.25


def test_far_inclusion_center():
    assert classify_point(GEOM, DEFECT, EPS, (10.125, 10.125)) == PhaseLabel.INCLUSION


def test_origin_is_defect():
    assert classify_point(GEOM, DEFECT, EPS, (0.0, 0.0)) == PhaseLabel.DEFECT


def _straddling_cells(R, eps, rho, c=0.5, n=40):
    """Brute force: inclusion copies whose disk meets the circle |x| = R."""
    ij = np.array([(i, j) for i in range(-n, n) for j in range(-n, n)], float)
    centers = eps * (ij + c)
    d = np.linalg.norm(centers, axis=1)
    return ij[np.abs(d - R) < eps * rho]


def test_boundary_inclusion_point():
    cells = _straddling_cells(2.0, EPS, 0.3)
    assert len(cells) > 0
    hits = 0
    for ij in cells:
        center = EPS * (ij + 0.5)
        # step from the copy centre outward until outside the defect, staying in the copy
        u = center / np.linalg.norm(center)
        for t in np.linspace(-0.29, 0.29, 30) * EPS:
            x = center + t * u
            if np.linalg.norm(x) > 2.0:
                assert classify_point(GEOM, DEFECT, EPS, x) == PhaseLabel.BOUNDARY_INCLUSION
                hits += 1
                break
    assert hits > 0


def test_coefficients():
    pol = BoundaryInclusionPolicy("power_law", 1.0, 1.0)
    eps = 1 / 16
    x_inc = np.array([10.0, 10.0]) + eps * 0.5
    assert classify_point(GEOM, DEFECT, eps, x_inc) == PhaseLabel.INCLUSION
    assert coefficient_at(GEOM, DEFECT, pol, eps, x_inc) == pytest.approx(1 / 256)
    assert coefficient_at(GEOM, DEFECT, pol, eps, (10.0 + eps * 0.05, 10.0 + eps * 0.05)) == 1.0
    assert coefficient_at(GEOM, DefectSpec(DefectBall(2.0), 3.0), pol, eps, (0.1, 0.0)) == 3.0
    assert pol.value(eps) == pytest.approx(1 / 16)


def test_policy_values():
    assert BoundaryInclusionPolicy("double_porosity", 2.0).value(0.1) == pytest.approx(0.02)
    assert BoundaryInclusionPolicy("order_one", 0.7).value(0.1) == 0.7
    with pytest.raises(GeometryError):
        BoundaryInclusionPolicy("power_law", 1.0, 2.5)
    with pytest.raises(GeometryError):
        BoundaryInclusionPolicy("power_law", 1.0, 0.0)
    with pytest.raises(GeometryError):
        BoundaryInclusionPolicy("order_one", -1.0)


def test_invalid_geometry():
    with pytest.raises(ConfigError) as exc:
        CellGeometry(2, Ball((0.5, 0.5), 0.5))
    assert "geometry.inclusion.radius" in str(exc.value)
    with pytest.raises(GeometryError):
        CellGeometry(2, Ball((0.5, 0.5), 0.3), a0=0.0)
    with pytest.raises(GeometryError):
        DefectSpec(DefectBall(-1.0))
    with pytest.raises(GeometryError):
        CellGeometry(2, Polygon(((0.0, 0.2), (0.5, 0.2), (0.5, 0.6))))


def test_interface_tie_break():
    # points exactly on the defect circle resolve to the defect side
    assert classify_point(GEOM, DEFECT, EPS, (2.0, 0.0)) == PhaseLabel.DEFECT


coords = st.floats(-40.0, 40.0, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(coords, coords, st.integers(-20, 20), st.integers(-20, 20))
def test_partition_and_periodicity(x, y, i, j):
    label = classify_point(GEOM, DEFECT, EPS, (x, y))
    assert label in set(PhaseLabel)
    far = np.hypot(x, y) > DEFECT.diameter + EPS
    shifted = np.array([x + i * EPS, y + j * EPS])
    if far and np.linalg.norm(shifted) > DEFECT.diameter + EPS:
        assert classify_point(GEOM, DEFECT, EPS, shifted) == label


def test_vectorized_matches_scalar():
    rng = np.random.default_rng(0)
    x = rng.uniform(-3, 3, (500, 2))
    labels = classify_points(GEOM, DEFECT, EPS, x)
    assert all(labels[k] == classify_point(GEOM, DEFECT, EPS, x[k]) for k in range(0, 500, 25))


def test_boundary_inclusion_measure_linear_in_eps():
    rng = np.random.default_rng(1)
    x = rng.uniform(-3.0, 3.0, (400_000, 2))
    areas = []
    eps_list = [1 / 8, 1 / 16, 1 / 32]
    for eps in eps_list:
        frac = np.mean(classify_points(GEOM, DEFECT, eps, x) == PhaseLabel.BOUNDARY_INCLUSION)
        areas.append(36.0 * frac)
    # measure <= C eps: area / eps bounded and the area shrinks with eps
    ratios = np.array(areas) / np.array(eps_list)
    assert areas[0] > areas[1] > areas[2] > 0
    assert ratios.max() < 3.0 * ratios.min()
    slope = np.polyfit(np.log(eps_list), np.log(areas), 1)[0]
    assert 0.7 < slope < 1.3


def test_polygon_defect_classification():
    sq = Polygon(((-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)))
    d = DefectSpec(sq, 2.0)
    assert classify_point(GEOM, d, EPS, (0.2, 0.3)) == PhaseLabel.DEFECT
    assert classify_point(GEOM, d, EPS, (10.125, 10.125)) == PhaseLabel.INCLUSION
    assert d.diameter == pytest.approx(2 * np.sqrt(2))
