import math

import numpy as np
import pytest

from csgeo import fixtures
from csgeo.analysis import analyze, grid_connection_table
from csgeo.errors import ContactAngleZero
from csgeo.surface import Grid


def test_torus_roundtrip_invariants(torus_analysis):
    fs = torus_analysis.fields
    assert np.max(np.abs(fs.beta - math.pi / 3)) < 1e-6
    assert np.max(np.abs(fs.alpha - math.pi / 2)) < 1e-6
    assert np.max(np.abs(np.abs(fs.a) - math.sqrt(2 / 7))) < 1e-5
    assert np.max(np.abs(fs.b)) < 1e-6
    assert np.max(fs.mean_curvature) < 1e-5
    assert np.max(np.abs(fs.K_intrinsic)) < 1e-10
    assert np.max(np.abs(fs.lap_alpha)) < 1e-8
    assert np.max(np.hypot(fs.alpha1, fs.alpha2)) < 1e-8


def test_torus_identity_suite(torus_analysis):
    rep = torus_analysis.identities
    assert rep.passed
    assert rep["corollary_alpha2"].informational
    assert rep["corollary_alpha2"].max == pytest.approx(3 * math.sqrt(2 / 7) * math.sin(math.pi / 3), rel=1e-6)


def test_recorded_errors():
    f = fixtures.get("clifford_s3")
    an = analyze(f.surface(), f.grid(8, 8))
    assert isinstance(an.error, ContactAngleZero) and not an.ok
    assert an.summary()["error"] == "ContactAngleZero"
    with pytest.raises(ContactAngleZero):
        analyze(f.surface(), f.grid(8, 8), raise_errors=True)


def test_thread_count_does_not_change_results(legendrian, monkeypatch):
    g = Grid.box(12, 10)
    one = grid_connection_table(legendrian, g, threads=1)
    monkeypatch.setenv("CSGEO_THREADS", "3")
    many = grid_connection_table(legendrian, g)
    assert np.array_equal(one.coef, many.coef) and np.array_equal(one.frame.e1, many.frame.e1)


def test_all_fixtures_load_and_behave():
    for name, f in fixtures.FIXTURES.items():
        an = analyze(f.surface(), f.grid(16, 16))
        if f.expect_error:
            assert type(an.error).__name__ == f.expect_error, name
        else:
            assert an.ok, name
            assert (np.max(an.fields.mean_curvature) < 1e-6) == f.expect_minimal
