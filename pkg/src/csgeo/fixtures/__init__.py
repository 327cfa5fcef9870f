"""Built-in surface specs and what the analyzer is expected to find on them."""

from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources

from ..exprlang import SurfaceAST, load_surface_spec
from ..surface import Grid

TWO_PI = 2 * math.pi


@dataclass(frozen=True)
class Fixture:
    name: str
    filename: str
    u_range: tuple[float, float] = (0.0, TWO_PI)
    v_range: tuple[float, float] = (0.0, TWO_PI)
    periodic: tuple[bool, bool] = (True, True)
    expect_error: str | None = None
    expect_minimal: bool = True
    description: str = ""

    def surface(self) -> SurfaceAST:
        return load_surface_spec(resources.files(__name__).joinpath(self.filename).read_text(encoding="utf-8"))

    def grid(self, n_u: int = 64, n_v: int = 64) -> Grid:
        return Grid.box(n_u, n_v, self.u_range, self.v_range, self.periodic)


FIXTURES: dict[str, Fixture] = {
    f.name: f
    for f in (
        Fixture("legendrian", "legendrian_torus.json",
                description="minimal Legendrian torus (e^{iu}, e^{iv}, e^{-i(u+v)})/sqrt(3), beta = pi/2"),
        Fixture("clifford_s3", "clifford_s3.json", expect_error="ContactAngleZero",
                description="Clifford torus in S^3; the Reeb field is tangent"),
        Fixture("great_sphere", "great_sphere.json", v_range=(0.2, 1.3), periodic=(True, False),
                expect_error="HolomorphicAngleDegenerate",
                description="totally geodesic sphere (cos v e^{iu}, sin v, 0); i e1 = v"),
        Fixture("clifford_r_pi6", "clifford_r_pi6.json", expect_minimal=False,
                description="non-minimal product torus (cos r e^{iu}, sin r e^{iv} in a real plane), r = pi/6"),
    )
}


def get(name: str) -> Fixture:
    try:
        return FIXTURES[name]
    except KeyError:
        raise KeyError(f"unknown fixture {name!r}; choose from {sorted(FIXTURES)}") from None


def load_named(filename: str) -> SurfaceAST:
    """Load any shipped spec file by file name."""
    return load_surface_spec(resources.files(__name__).joinpath(filename).read_text(encoding="utf-8"))
