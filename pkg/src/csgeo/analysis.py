"""Grid pipeline: jets -> adapted frames -> connection table -> invariant fields -> identities."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .connection import ConnectionTable, check_intrinsic_relations, connection_table
from .errors import CsgeoError
from .identities import FieldSet, IdentityReport, identity_report
from .surface import (
    Grid,
    Metric2,
    ScalarField,
    directional_from_gradient,
    first_fundamental,
    gaussian_curvature,
    gradient,
    surface_laplacian,
)


def worker_count() -> int:
    """Thread cap from ``CSGEO_THREADS`` (default 1)."""
    raw = os.environ.get("CSGEO_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _concat_tables(parts: list[ConnectionTable]) -> ConnectionTable:
    if len(parts) == 1:
        return parts[0]
    from .frames import AdaptedFrame

    f0 = parts[0].frame
    frame = AdaptedFrame(**{k: np.concatenate([getattr(p.frame, k) for p in parts]) for k in f0.__dataclass_fields__})
    cat = {k: np.concatenate([getattr(p, k) for p in parts])
           for k in ("coef", "a", "b", "alpha1", "alpha2", "beta1", "beta2", "mean_curvature")}
    return ConnectionTable(frame=frame, h=parts[0].h, **cat)


def grid_connection_table(source, grid: Grid, h: float = 1e-4, richardson: bool = True,
                          threads: int | None = None) -> ConnectionTable:
    """:func:`connection_table` over a grid, split into row chunks across threads.

    Each chunk is independent and results are concatenated in row order, so
    the output does not depend on the thread count.
    """
    U, V = grid.mesh()
    threads = threads or worker_count()
    n = grid.shape[0]
    if threads <= 1 or n < 2:
        return connection_table(source, U, V, h=h, richardson=richardson)
    bounds = np.linspace(0, n, min(threads, n) + 1).astype(int)
    chunks = [(U[lo:hi], V[lo:hi]) for lo, hi in zip(bounds[:-1], bounds[1:])]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(lambda c: connection_table(source, c[0], c[1], h=h, richardson=richardson), chunks))
    return _concat_tables(parts)


@dataclass
class Analysis:
    """Everything measured on one surface and grid."""

    grid: Grid
    metric: Metric2 | None = None
    table: ConnectionTable | None = None
    fields: FieldSet | None = None
    error: CsgeoError | None = None
    identities: IdentityReport | None = None
    intrinsic: dict[str, float] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.error is None

    def summary(self) -> dict:
        """Grid statistics of the invariants (max / min), or the recorded error."""
        if self.error is not None:
            return {"error": type(self.error).__name__, "message": str(self.error)}
        fs = self.fields
        out = {}
        for name in ("alpha", "beta", "a", "b", "mean_curvature"):
            x = getattr(fs, name)
            out[name] = {"min": float(np.min(x)), "max": float(np.max(x))}
        out["minimal"] = bool(np.max(fs.mean_curvature) <= 1e-6)
        out["legendrian_gauge_fraction"] = float(np.mean(self.table.frame.legendrian_gauge))
        return out


def invariant_fields(table: ConnectionTable, metric: Metric2, grid: Grid) -> FieldSet:
    """Assemble the FieldSet: stencil-level derivatives of alpha and beta, grid-level for a and Laplacians."""
    f = table.frame
    tc = f.tangent_coords
    a1, a2 = directional_from_gradient(*gradient(ScalarField(np.asarray(table.a, float), grid)), tc)
    lap_alpha = surface_laplacian(ScalarField(np.asarray(f.alpha, float), grid), metric).values
    lap_beta = surface_laplacian(ScalarField(np.asarray(f.beta, float), grid), metric).values
    K = gaussian_curvature(metric, grid)
    return FieldSet(
        alpha=f.alpha, beta=f.beta, a=table.a, b=table.b,
        alpha1=table.alpha1, alpha2=table.alpha2, beta1=table.beta1, beta2=table.beta2,
        a1=a1, a2=a2, lap_alpha=lap_alpha, lap_beta=lap_beta, K_intrinsic=K,
        mean_curvature=table.mean_curvature,
    )


def analyze(source, grid: Grid, h: float = 1e-4, richardson: bool = True, tolerances=None,
            codazzi3_variant: str = "additive", threads: int | None = None,
            raise_errors: bool = False) -> Analysis:
    """Run the whole pipeline on ``source`` (anything with ``jet(u, v)``).

    Degenerate geometry (for example :class:`~csgeo.errors.ContactAngleZero`)
    is recorded in ``Analysis.error`` unless ``raise_errors`` is set.
    """
    out = Analysis(grid)
    try:
        U, V = grid.mesh()
        out.metric = first_fundamental(source.jet(U, V))
        out.table = grid_connection_table(source, grid, h=h, richardson=richardson, threads=threads)
        out.fields = invariant_fields(out.table, out.metric, grid)
        out.intrinsic = check_intrinsic_relations(out.table).residuals
        out.identities = identity_report(out.fields, tolerances, codazzi3_variant)
    except CsgeoError as exc:
        if raise_errors:
            raise
        out.error = exc
    return out
