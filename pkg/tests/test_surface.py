import csv
import math

import numpy as np
import pytest

from csgeo import fixtures
from csgeo.errors import DegenerateMetric, GridMismatch
from csgeo.exprlang import Jet2, eval_jet2, surface_from_components
from csgeo.surface import (
    Grid,
    Metric2,
    ScalarField,
    directional_from_gradient,
    first_fundamental,
    frame_directional_derivatives,
    gaussian_curvature,
    grid_derivative,
    mean_curvature_vector,
    surface_laplacian,
)

from conftest import clifford_complex_jet, clifford_real_jet, great_sphere_jet, legendrian_jet


def test_legendrian_metric():
    m = first_fundamental(legendrian_jet(0.3, 1.2))
    assert m.E == pytest.approx(2 / 3) and m.G == pytest.approx(2 / 3) and m.F == pytest.approx(1 / 3)


def test_great_sphere_metric():
    v = 0.7
    m = first_fundamental(great_sphere_jet(0.1, v))
    assert m.E == pytest.approx(math.cos(v) ** 2) and m.F == pytest.approx(0, abs=1e-16) and m.G == pytest.approx(1)


def test_degenerate_metric():
    z = np.array([1, 0, 0], complex)
    t = np.array([0, 1, 0], complex)
    j = Jet2(z, t, t, z * 0, z * 0, z * 0)
    with pytest.raises(DegenerateMetric):
        first_fundamental(j)


def test_minimality(rng):
    u, v = rng.uniform(0, 2 * math.pi, (2, 100))
    assert np.max(np.linalg.norm(mean_curvature_vector(legendrian_jet(u, v)), axis=-1)) < 1e-10
    w = rng.uniform(0.1, 1.4, 100)
    assert np.max(np.linalg.norm(mean_curvature_vector(great_sphere_jet(u, w)), axis=-1)) < 1e-10


@pytest.mark.parametrize("jet", [clifford_complex_jet, clifford_real_jet])
def test_clifford_r_pi6_not_minimal(jet):
    # |H| = |cot r - tan r| for the product of circles of radii cos r, sin r
    H = np.linalg.norm(mean_curvature_vector(jet(0.4, 0.9)))
    assert H == pytest.approx(abs(1 / math.tan(math.pi / 6) - math.tan(math.pi / 6)), rel=1e-12)
    Hmin = np.linalg.norm(mean_curvature_vector(jet(0.4, 0.9, r=math.pi / 4)))
    assert Hmin < 1e-12


def _flat(n):
    g = Grid.box(n, n)
    ones = np.ones(g.shape)
    return g, Metric2(ones, 0 * ones, ones)


def test_laplacian_constant_and_sine():
    g, m = _flat(32)
    assert np.max(np.abs(surface_laplacian(ScalarField(np.full(g.shape, 3.0), g), m).values)) < 1e-12
    U, _ = g.mesh()
    lap = surface_laplacian(ScalarField(np.sin(U), g), m).values
    assert np.max(np.abs(lap + np.sin(U))) < 0.05


def test_laplacian_second_order_on_product_metric():
    """Round-sphere patch: Lap(cos v-dependent field) with the exact answer; Richardson ratio ~ 4."""
    errs = []
    for n in (24, 48, 96):
        g = Grid.box(n, n, (0, 2 * math.pi), (0.3, 1.2), periodic=(True, False))
        U, V = g.mesh()
        m = first_fundamental(great_sphere_jet(U, V))
        f = np.sin(V) * np.cos(U)
        # Lap f = (1/cos v) d_v(cos v f_v) + f_uu / cos^2 v
        exact = (-np.sin(V) * np.cos(U)) - np.tan(V) * np.cos(V) * np.cos(U) - np.sin(V) * np.cos(U) / np.cos(V) ** 2
        lap = surface_laplacian(ScalarField(f, g), m).values
        errs.append(np.max(np.abs(lap - exact)[:, 2:-2]))
    r1, r2 = errs[0] / errs[1], errs[1] / errs[2]
    assert 3.5 <= r2 <= 4.5 and r1 > 3.0


def test_grid_derivative_edges_second_order():
    for periodic in (True, False):
        errs = []
        for n in (20, 40, 80):
            x = np.linspace(0, 2 * math.pi, n, endpoint=not periodic)
            d = grid_derivative(np.sin(x), x[1] - x[0], 0, periodic)
            errs.append(np.max(np.abs(d - np.cos(x))))
        assert errs[1] / errs[2] > 3.5


def test_directional_derivatives_chain_rule():
    # tangent coords (du, dv) of e1 = d/dv, e2 = d/du / cos v on the great sphere
    g = Grid.box(40, 40, (0, 2 * math.pi), (0.2, 1.3), periodic=(True, False))
    U, V = g.mesh()
    tc = np.zeros(g.shape + (2, 2))
    tc[..., 0, 1] = 1.0
    tc[..., 1, 0] = 1 / np.cos(V)
    b1, b2 = frame_directional_derivatives(ScalarField(V.copy(), g), tc)
    assert np.max(np.abs(b1.values - 1)) < 1e-12 and np.max(np.abs(b2.values)) < 1e-12
    f1, f2 = directional_from_gradient(np.zeros(3), np.zeros(3), np.zeros((3, 2, 2)))
    assert not f1.any() and not f2.any()


def test_gaussian_curvature_sphere_and_flat():
    g = Grid.box(64, 64, (0, 2 * math.pi), (0.2, 1.3), periodic=(True, False))
    U, V = g.mesh()
    K = gaussian_curvature(first_fundamental(great_sphere_jet(U, V)), g)
    assert np.max(np.abs(K[:, 3:-3] - 1)) < 5e-3
    gf, mf = _flat(16)
    assert np.max(np.abs(gaussian_curvature(mf, gf))) < 1e-14


def test_grid_checks():
    with pytest.raises(GridMismatch):
        Grid.box(4, 10)
    g = Grid.box(8, 8)
    with pytest.raises(GridMismatch):
        ScalarField(np.zeros((8, 7)), g)
    with pytest.raises(GridMismatch):
        surface_laplacian(ScalarField(np.zeros((8, 8)), g), Metric2(np.ones((9, 8)), np.zeros((9, 8)), np.ones((9, 8))))


def test_periodic_grid_excludes_endpoint():
    g = Grid.box(10, 10)
    assert g.u[-1] < 2 * math.pi and g.spacing[0] == pytest.approx(2 * math.pi / 10)


def test_scalar_field_csv(tmp_path):
    g = Grid.box(5, 6)
    U, V = g.mesh()
    ScalarField(U + V, g).to_csv(tmp_path / "f.csv")
    rows = list(csv.reader(open(tmp_path / "f.csv")))
    assert rows[0] == ["u", "v", "value"]
    assert len(rows) == 31
    assert float(rows[2][1]) == pytest.approx(g.v[1]) and float(rows[2][0]) == 0.0
    assert float(rows[7][2]) == pytest.approx(g.u[1] + g.v[0])


def test_expression_surface_matches_fixture_metric():
    ast = fixtures.load_named("legendrian_torus.json")
    m = first_fundamental(eval_jet2(ast, 0.5, 0.5))
    assert m.det == pytest.approx(1 / 3)
    assert surface_from_components(["u", "v", "0"]).jet(0.0, 0.0).z_u[0] == 1
