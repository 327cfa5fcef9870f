"""Intrinsic geometry of an immersed surface from jets and from grid samples."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from .ambient import real_inner
from .errors import DegenerateMetric, GridMismatch
from .exprlang import Jet2

DEGENERATE_TOL = 1e-14


@dataclass(frozen=True)
class Metric2:
    """First fundamental form E du^2 + 2F du dv + G dv^2 (broadcast arrays)."""

    E: np.ndarray
    F: np.ndarray
    G: np.ndarray

    @property
    def det(self) -> np.ndarray:
        return self.E * self.G - self.F * self.F

    def inverse(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        d = self.det
        return self.G / d, -self.F / d, self.E / d


def first_fundamental(j: Jet2) -> Metric2:
    E = real_inner(j.z_u, j.z_u)
    F = real_inner(j.z_u, j.z_v)
    G = real_inner(j.z_v, j.z_v)
    m = Metric2(E, F, G)
    bad = m.det <= DEGENERATE_TOL
    if np.any(bad):
        raise DegenerateMetric(f"EG - F^2 <= {DEGENERATE_TOL:g} at {int(np.sum(bad))} point(s)")
    return m


def normal_part(j: Jet2, X, metric: Metric2 | None = None):
    """Component of X orthogonal to z, z_u and z_v."""
    metric = metric or first_fundamental(j)
    guu, guv, gvv = metric.inverse()
    X = X - real_inner(X, j.z)[..., None] * j.z
    pu, pv = real_inner(X, j.z_u), real_inner(X, j.z_v)
    cu = guu * pu + guv * pv
    cv = guv * pu + gvv * pv
    return X - cu[..., None] * j.z_u - cv[..., None] * j.z_v


def mean_curvature_vector(j: Jet2):
    """Trace of the second fundamental form of S in S^5 (zero iff minimal)."""
    metric = first_fundamental(j)
    guu, guv, gvv = metric.inverse()
    hess = guu[..., None] * j.z_uu + 2 * guv[..., None] * j.z_uv + gvv[..., None] * j.z_vv
    return normal_part(j, hess, metric)


# --------------------------------------------------------------------------
# Grids
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Grid:
    """Rectangular (u, v) sample grid; periodic axes exclude the right endpoint."""

    u: np.ndarray
    v: np.ndarray
    periodic: tuple[bool, bool] = (True, True)

    @classmethod
    def box(cls, n_u: int, n_v: int, u_range=(0.0, 2 * np.pi), v_range=(0.0, 2 * np.pi),
            periodic=(True, True)) -> "Grid":
        if n_u < 5 or n_v < 5:
            raise GridMismatch(f"grid must be at least 5x5, got {n_u}x{n_v}")
        u = np.linspace(*u_range, n_u, endpoint=not periodic[0])
        v = np.linspace(*v_range, n_v, endpoint=not periodic[1])
        return cls(u, v, (bool(periodic[0]), bool(periodic[1])))

    @property
    def shape(self) -> tuple[int, int]:
        return (len(self.u), len(self.v))

    @property
    def spacing(self) -> tuple[float, float]:
        return (float(self.u[1] - self.u[0]), float(self.v[1] - self.v[0]))

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.u, self.v, indexing="ij")


@dataclass(frozen=True)
class ScalarField:
    values: np.ndarray
    grid: Grid

    def __post_init__(self):
        if self.values.shape != self.grid.shape:
            raise GridMismatch(f"field shape {self.values.shape} != grid shape {self.grid.shape}")
        if min(self.values.shape) < 5:
            raise GridMismatch("second-order stencils need at least 5 samples per axis")

    def to_csv(self, path: str | Path) -> None:
        write_grid_csv(path, self.grid, {"value": self.values})


def grid_derivative(values: np.ndarray, h: float, axis: int, periodic: bool) -> np.ndarray:
    """Second-order first derivative; one-sided second-order stencils at open edges."""
    f = np.asarray(values, dtype=float)
    if periodic:
        return (np.roll(f, -1, axis) - np.roll(f, 1, axis)) / (2 * h)
    f = np.moveaxis(f, axis, 0)
    d = np.empty_like(f)
    d[1:-1] = (f[2:] - f[:-2]) / (2 * h)
    d[0] = (-3 * f[0] + 4 * f[1] - f[2]) / (2 * h)
    d[-1] = (3 * f[-1] - 4 * f[-2] + f[-3]) / (2 * h)
    return np.moveaxis(d, 0, axis)


def gradient(field: ScalarField) -> tuple[np.ndarray, np.ndarray]:
    hu, hv = field.grid.spacing
    pu, pv = field.grid.periodic
    return (grid_derivative(field.values, hu, 0, pu), grid_derivative(field.values, hv, 1, pv))


def _check_metric(field: ScalarField, metric: Metric2) -> None:
    for name in ("E", "F", "G"):
        if np.shape(getattr(metric, name)) != field.grid.shape:
            raise GridMismatch(f"metric component {name} does not match the field grid")


def surface_laplacian(field: ScalarField, metric: Metric2) -> ScalarField:
    """Laplace-Beltrami operator in divergence form, sign convention tr(Hess)."""
    _check_metric(field, metric)
    hu, hv = field.grid.spacing
    pu, pv = field.grid.periodic
    fu, fv = gradient(field)
    guu, guv, gvv = metric.inverse()
    sg = np.sqrt(metric.det)
    flux_u = sg * (guu * fu + guv * fv)
    flux_v = sg * (guv * fu + gvv * fv)
    div = grid_derivative(flux_u, hu, 0, pu) + grid_derivative(flux_v, hv, 1, pv)
    return ScalarField(div / sg, field.grid)


def directional_from_gradient(f_u, f_v, tangent_coords):
    """df(e_1), df(e_2) from coordinate partials.

    ``tangent_coords[..., i, :]`` holds (du(e_i), dv(e_i)).
    """
    tc = np.asarray(tangent_coords)
    f1 = tc[..., 0, 0] * f_u + tc[..., 0, 1] * f_v
    f2 = tc[..., 1, 0] * f_u + tc[..., 1, 1] * f_v
    return f1, f2


def frame_directional_derivatives(field: ScalarField, frames) -> tuple[ScalarField, ScalarField]:
    """Components of df along e1 and e2 of a frame grid (chain rule through u, v)."""
    tc = getattr(frames, "tangent_coords", frames)
    if np.shape(tc)[:2] != field.grid.shape:
        raise GridMismatch("frame grid does not match the field grid")
    f1, f2 = directional_from_gradient(*gradient(field), tc)
    return ScalarField(f1, field.grid), ScalarField(f2, field.grid)


def gaussian_curvature(metric: Metric2, grid: Grid) -> np.ndarray:
    """Gaussian curvature from the metric alone (Brioschi formula, grid stencils)."""
    E, F, G = (np.asarray(x, dtype=float) for x in (metric.E, metric.F, metric.G))
    for X in (E, F, G):
        if X.shape != grid.shape:
            raise GridMismatch("metric grid does not match the grid")
    hu, hv = grid.spacing
    pu, pv = grid.periodic
    du = lambda X: grid_derivative(X, hu, 0, pu)  # noqa: E731
    dv = lambda X: grid_derivative(X, hv, 1, pv)  # noqa: E731
    Eu, Ev, Fu, Fv, Gu, Gv = du(E), dv(E), du(F), dv(F), du(G), dv(G)
    Evv, Guu, Fuv = dv(Ev), du(Gu), du(Fv)
    m1 = np.empty(E.shape + (3, 3))
    m1[..., 0, :] = np.stack([-0.5 * Evv + Fuv - 0.5 * Guu, 0.5 * Eu, Fu - 0.5 * Ev], -1)
    m1[..., 1, :] = np.stack([Fv - 0.5 * Gu, E, F], -1)
    m1[..., 2, :] = np.stack([0.5 * Gv, F, G], -1)
    m2 = np.empty_like(m1)
    m2[..., 0, :] = np.stack([np.zeros_like(E), 0.5 * Ev, 0.5 * Gu], -1)
    m2[..., 1, :] = np.stack([0.5 * Ev, E, F], -1)
    m2[..., 2, :] = np.stack([0.5 * Gu, F, G], -1)
    return (np.linalg.det(m1) - np.linalg.det(m2)) / metric.det ** 2


def write_grid_csv(path: str | Path, grid: Grid, columns: Mapping[str, np.ndarray]) -> None:
    """Row-major CSV with columns u, v, then the named grid columns."""
    U, V = grid.mesh()
    names = list(columns)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["u", "v", *names])
        flat = [np.asarray(columns[n]).reshape(-1) for n in names]
        for k, (uu, vv) in enumerate(zip(U.reshape(-1), V.reshape(-1))):
            w.writerow([repr(float(uu)), repr(float(vv)), *(repr(float(c[k])) for c in flat)])
