import math

import numpy as np
import pytest

from csgeo.errors import ContactAngleZero, HolomorphicAngleDegenerate
from csgeo.exprlang import surface_from_components
from csgeo.frames import adapted_frame, flip_e1, frame_consistency, orthonormality_residual
from csgeo.ambient import real_inner

from conftest import clifford_real_jet, clifford_s3_jet, great_sphere_jet, legendrian_jet


def generic_surface():
    """A non-minimal surface with varying contact and holomorphic angles."""
    p = ["(exp(i*u) + 0.3*sin(v))", "(0.5*exp(i*v) + 0.2)", "(0.2*cos(u) + 0.4*i*sin(v))"]
    n = "sqrt(" + " + ".join(f"re({q}*conj({q}))" for q in p) + ")"
    return surface_from_components([f"{q}/{n}" for q in p])


def test_clifford_s3_contact_angle_zero():
    with pytest.raises(ContactAngleZero):
        adapted_frame(clifford_s3_jet(0.3, 0.4))


def test_great_sphere_holomorphic_degenerate():
    with pytest.raises(HolomorphicAngleDegenerate):
        adapted_frame(great_sphere_jet(0.3, 0.6))


def test_great_sphere_contact_angle_is_v():
    # cos(beta) = |xi^T| computed by hand: xi projects to cos v * (z_u / |z_u|)
    v = 0.6
    j = great_sphere_jet(0.3, v)
    xi = 1j * j.z
    cu = real_inner(xi, j.z_u) / np.linalg.norm(j.z_u)
    cv = real_inner(xi, j.z_v) / np.linalg.norm(j.z_v)
    assert math.hypot(cu, cv) == pytest.approx(math.cos(v))
    assert cv == pytest.approx(0, abs=1e-16)


def test_legendrian_frame(rng):
    u, v = rng.uniform(0, 2 * math.pi, (2, 50))
    f = adapted_frame(legendrian_jet(u, v))
    assert np.max(np.abs(f.beta - math.pi / 2)) < 1e-9
    assert f.legendrian_gauge.all()
    assert np.max(np.abs(f.alpha - math.pi / 2)) < 1e-9
    assert orthonormality_residual(f) < 1e-12
    # gauge: e1 along z_u
    zu = legendrian_jet(u, v).z_u
    np.testing.assert_allclose(np.abs(real_inner(f.e1, zu)), np.linalg.norm(zu, axis=-1), rtol=1e-12)


def test_real_clifford_angles():
    r = math.pi / 6
    f = adapted_frame(clifford_real_jet(0.4, 1.0, r))
    assert f.beta == pytest.approx(r)
    assert f.alpha == pytest.approx(math.pi / 2)


def test_generic_frame_relations(rng):
    s = generic_surface()
    u, v = rng.uniform(0, 2 * math.pi, (2, 200))
    f = adapted_frame(s.jet(u, v))
    assert orthonormality_residual(f) < 1e-12
    assert max(frame_consistency(f).values()) < 1e-12
    assert np.all(f.cos_alpha >= 0)
    assert np.all((f.beta > 0) & (f.beta <= math.pi / 2 + 1e-12))
    # e1 in the contact distribution, e2 carries the Reeb projection
    assert np.max(np.abs(real_inner(f.e1, f.xi))) < 1e-12
    np.testing.assert_allclose(real_inner(f.e2, f.xi), f.cos_beta, atol=1e-12)
    # tangent coordinates reproduce e1, e2
    j = s.jet(u, v)
    for i, e in enumerate((f.e1, f.e2)):
        rec = f.tangent_coords[..., i, 0, None] * j.z_u + f.tangent_coords[..., i, 1, None] * j.z_v
        np.testing.assert_allclose(rec, e, atol=1e-12)


def test_flip_e1():
    f = adapted_frame(clifford_real_jet(0.4, 1.0))
    g = flip_e1(f)
    np.testing.assert_allclose(g.e1, -f.e1)
    np.testing.assert_allclose(g.e3, -f.e3)
    assert g.alpha == pytest.approx(math.pi - f.alpha)
    assert max(frame_consistency(g).values()) < 1e-12
