"""Scalar identities for minimal surfaces in S^5, evaluated as residuals on grids.

Every identity receives a :class:`FieldSet` (the measured invariants and
their derivatives on a grid) and returns a :class:`Residual`.  Trigonometric
singularities are handled by per-point guards: a guarded point is excluded
and counted, never silently set to zero.  Global preconditions (minimality,
constant contact angle, diagonal gauge, ...) raise the matching
:mod:`csgeo.errors` exception; :func:`identity_report` turns those into
"not applicable" entries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Callable

import numpy as np

from .errors import (
    AlphaOutOfRange,
    CsgeoError,
    DomainGuard,
    GaugeNotDiagonal,
    NonConstantA,
    NonConstantBeta,
    NotFlat,
    NotMinimal,
)

GUARD_EPS = 1e-6
MINIMAL_TOL = 1e-6
CONSTANT_TOL = 1e-6
FLAT_TOL = 1e-6
DISCRIMINANT_TOL = 1e-12

#: Default pass/fail tolerances on the raw max residual.
DEFAULT_TOLERANCES = {
    "K_gauss_vs_intrinsic": 1e-4,
    "K_conex_vs_intrinsic": 1e-4,
    "lapla_beta": 1e-5,
    "codazzi1": 1e-5,
    "codazzi2": 1e-5,
    "codazzi3": 1e-5,
    "codazzi4": 1e-5,
    "theorem1": 1e-5,
    "a_closure": 1e-6,
    "corollary_alpha1": 1e-5,
    "corollary_alpha2": 1e-5,
}

#: Reported but never counted as failures (see README, "Known inconsistencies").
INFORMATIONAL = frozenset({"corollary_alpha1", "corollary_alpha2"})

IDENTITY_NAMES = tuple(DEFAULT_TOLERANCES)

CODAZZI3_VARIANTS = ("additive", "multiplied", "a_factor")


@dataclass(frozen=True)
class FieldSet:
    """Invariants and derivatives sampled on a grid (all arrays share one shape).

    Subscripts 1, 2 denote derivatives along e1, e2; ``lap_*`` are
    Laplace-Beltrami values; ``K_intrinsic`` is the curvature read from the
    metric alone.
    """

    alpha: np.ndarray
    beta: np.ndarray
    a: np.ndarray
    b: np.ndarray
    alpha1: np.ndarray
    alpha2: np.ndarray
    beta1: np.ndarray
    beta2: np.ndarray
    a1: np.ndarray
    a2: np.ndarray
    lap_alpha: np.ndarray
    lap_beta: np.ndarray
    K_intrinsic: np.ndarray
    mean_curvature: np.ndarray

    def __post_init__(self):
        shape = np.broadcast_shapes(*(np.shape(getattr(self, f.name)) for f in fields(self)))
        for f in fields(self):
            object.__setattr__(self, f.name, np.broadcast_to(np.asarray(getattr(self, f.name), float), shape))

    @property
    def shape(self) -> tuple[int, ...]:
        return self.alpha.shape

    @classmethod
    def constant(cls, alpha, beta, a, b=0.0, K=0.0, shape=(1,)) -> "FieldSet":
        """Fields of a surface with constant invariants (all derivatives zero)."""
        z = np.zeros(shape)
        return cls(alpha + z, beta + z, a + z, b + z, z, z, z, z, z, z, z, z, K + z, z)

    def with_fields(self, **kw) -> "FieldSet":
        return replace(self, **kw)


@dataclass
class Residual:
    """Pointwise residual with its applicability mask and term scale."""

    name: str
    values: np.ndarray
    applicable: np.ndarray
    scale: np.ndarray
    guards: set[str] = field(default_factory=set)

    @property
    def guarded_fraction(self) -> float:
        return float(1.0 - np.count_nonzero(self.applicable) / self.applicable.size)

    def max(self) -> float | None:
        if not np.any(self.applicable):
            return None
        return float(np.max(np.abs(self.values[self.applicable])))

    def mean(self) -> float | None:
        if not np.any(self.applicable):
            return None
        vals = np.abs(self.values[self.applicable])
        return math.fsum(vals.tolist()) / vals.size

    def max_normalized(self) -> float | None:
        if not np.any(self.applicable):
            return None
        sc = self.scale[self.applicable]
        r = np.abs(self.values[self.applicable])
        return float(np.max(np.where(sc > 0, r / np.where(sc > 0, sc, 1.0), r)))


class _Trig:
    def __init__(self, fs: FieldSet):
        self.sa, self.ca = np.sin(fs.alpha), np.cos(fs.alpha)
        self.sb, self.cb = np.sin(fs.beta), np.cos(fs.beta)
        with np.errstate(divide="ignore", invalid="ignore"):
            self.csc = 1 / self.sb
            self.cot = self.cb / self.sb
            self.tan = self.sb / self.cb
            self.sec = 1 / self.cb
            self.cota = self.ca / self.sa

    def mask(self, *factors: str) -> tuple[np.ndarray, set[str]]:
        ok = np.ones(self.sa.shape, bool)
        reasons = set()
        for f in factors:
            small = np.abs(getattr(self, f)) <= GUARD_EPS
            if np.any(small):
                reasons.add(f"DomainGuard: {_FACTOR_NAMES[f]} ~ 0")
            ok &= ~small
        return ok, reasons


_FACTOR_NAMES = {"sa": "sin(alpha)", "ca": "cos(alpha)", "sb": "sin(beta)", "cb": "cos(beta)"}


def _residual(name: str, terms: list, ok: np.ndarray, reasons: set[str], lhs=None) -> Residual:
    """Residual = lhs - sum(terms) (or sum(terms) when lhs is None)."""
    with np.errstate(invalid="ignore", over="ignore"):
        parts = [np.asarray(t, float) for t in terms] + ([np.asarray(lhs, float)] if lhs is not None else [])
        shape = ok.shape
        parts = [np.broadcast_to(p, shape) for p in parts]
        total = sum(parts[: len(terms)])
        values = (parts[-1] - total) if lhs is not None else total
        scale = np.max(np.abs(np.stack(parts)), axis=0)
    values = np.where(ok, values, 0.0)
    scale = np.where(ok, scale, 0.0)
    bad = ok & ~np.isfinite(values)
    if np.any(bad):
        raise DomainGuard(f"{name}: non-finite residual at {int(np.sum(bad))} unguarded point(s)")
    return Residual(name, values, ok, scale, reasons)


def _require_minimal(fs: FieldSet, tol: float = MINIMAL_TOL) -> None:
    H = float(np.max(fs.mean_curvature))
    if H > tol:
        raise NotMinimal(f"mean curvature norm {H:.3g} exceeds {tol:g}")


def _require_constant_beta(fs: FieldSet) -> None:
    g = float(np.max(np.hypot(fs.beta1, fs.beta2)))
    if g >= CONSTANT_TOL:
        raise NonConstantBeta(f"|grad beta| = {g:.3g}")


def _require_diagonal(fs: FieldSet) -> None:
    b = float(np.max(np.abs(fs.b)))
    if b >= CONSTANT_TOL:
        raise GaugeNotDiagonal(f"|b| = {b:.3g}: II^3 is not diagonal in (e1, e2)")


# --------------------------------------------------------------------------
# Curvature and the Laplacian of beta
# --------------------------------------------------------------------------


def gauss_curvature_from_invariants(fs: FieldSet) -> np.ndarray:
    """Gauss-equation curvature in terms of (alpha, beta, a, b) and first derivatives."""
    t = _Trig(fs)
    with np.errstate(invalid="ignore", divide="ignore"):
        return sum(_gauss_terms(fs, t))


def _gauss_terms(fs: FieldSet, t: _Trig) -> list:
    grad_b2 = fs.beta1**2 + fs.beta2**2
    grad_a2 = fs.alpha1**2 + fs.alpha2**2
    ab2 = fs.a**2 + fs.b**2
    return [
        np.ones(fs.shape), -grad_b2, -2 * t.ca * fs.beta1, -t.ca**2, -(1 + t.csc**2) * ab2,
        2 * fs.b * t.sa * t.csc * t.cot, 2 * t.sa * t.cot * fs.alpha1, -grad_a2,
        2 * fs.a * t.csc * fs.alpha2, -2 * fs.b * t.csc * fs.alpha1, -(t.sa**2) * t.cot**2,
    ]


def gauss_curvature_compact(fs: FieldSet) -> np.ndarray:
    """Same curvature written with the two completed squares."""
    t = _Trig(fs)
    with np.errstate(invalid="ignore", divide="ignore"):
        sq1 = (fs.beta1 + t.ca) ** 2 + fs.beta2**2
        sq2 = (fs.alpha1 - t.sa * t.cot) ** 2 + fs.alpha2**2
        return (1 - (1 + t.csc**2) * (fs.a**2 + fs.b**2) - 2 * fs.b * t.csc * (fs.alpha1 - t.sa * t.cot)
                + 2 * fs.a * t.csc * fs.alpha2 - sq1 - sq2)


def _conex_terms(fs: FieldSet, t: _Trig) -> list:
    grad_b2 = fs.beta1**2 + fs.beta2**2
    return [
        -(1 + t.tan**2) * grad_b2, -t.tan * fs.lap_beta, -2 * t.ca * (1 + 2 * t.tan**2) * fs.beta1,
        2 * t.tan * t.sa * fs.alpha1, -4 * t.tan**2 * t.ca**2,
    ]


def curvature_report(fs: FieldSet) -> dict[str, Residual]:
    """Gauss-equation and connection-form curvature against the intrinsic curvature."""
    _require_minimal(fs)
    t = _Trig(fs)
    ok_g, why_g = t.mask("sb")
    ok_c, why_c = t.mask("cb")
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        kg = _residual("K_gauss_vs_intrinsic", _gauss_terms(fs, t), ok_g, why_g, lhs=fs.K_intrinsic)
        kc = _residual("K_conex_vs_intrinsic", _conex_terms(fs, t), ok_c, why_c, lhs=fs.K_intrinsic)
    return {kg.name: kg, kc.name: kc}


def laplacian_beta_residual(fs: FieldSet) -> Residual:
    """tan(beta) Lap(beta) minus its Gauss-Codazzi closed form."""
    _require_minimal(fs)
    t = _Trig(fs)
    ok, why = t.mask("sb", "cb")
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        sq1 = (fs.beta1 + 2 * t.ca) ** 2 + fs.beta2**2
        sq2 = (t.cot * fs.alpha1 + t.sa * (1 - t.cot**2)) ** 2 + (t.cot * fs.alpha2) ** 2
        terms = [
            (1 + t.csc**2) * (fs.a**2 + fs.b**2),
            2 * fs.b * t.csc * (fs.alpha1 - t.sa * t.cot),
            -2 * fs.a * t.csc * fs.alpha2,
            -(t.tan**2) * sq1,
            t.tan**2 * sq2,
            t.sa**2 * (1 - t.tan**2),
        ]
        return _residual("lapla_beta", terms, ok, why, lhs=t.tan * fs.lap_beta)


# --------------------------------------------------------------------------
# Constant contact angle: Codazzi-Ricci system and the Laplacian of alpha
# --------------------------------------------------------------------------


def codazzi_terms(fs: FieldSet, variant: str = "additive") -> dict[str, list]:
    """Additive terms of the four Codazzi-Ricci equations (constant beta, b = 0).

    ``variant`` selects the reading of the unbalanced parenthesis in the
    third equation: ``additive`` keeps 2cos(alpha)(cot(beta) - 3tan(beta))
    as a standalone term, ``multiplied`` multiplies it into the following
    alpha_1 term, ``a_factor`` multiplies it by a.
    """
    if variant not in CODAZZI3_VARIANTS:
        raise ValueError(f"unknown codazzi3 variant {variant!r}")
    t = _Trig(fs)
    a, a1, a2 = fs.a, fs.a1, fs.a2
    al1, al2 = fs.alpha1, fs.alpha2
    grad2 = al1**2 + al2**2
    sa, ca, sb, csc, cot, tan, sec, cota = t.sa, t.ca, t.sb, t.csc, t.cot, t.tan, t.sec, t.cota
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        c1 = [
            -a2, a**2 * cota * csc * cot**2, -a * cota * (csc**2 + cot**2) * al2,
            -ca * csc * 2 * (cot - tan) * al1, ca * csc * sa * (cot**2 - 3), cota * csc * grad2,
        ]
        c2 = [a1, a * cota * al1, 6 * a * tan * ca, -2 * sec * ca * al2]
        lone = 2 * ca * (cot - 3 * tan)
        nxt = 2 * ca * sb * (cot - tan) * al1
        if variant == "additive":
            mid = [lone, nxt]
        elif variant == "multiplied":
            mid = [lone * nxt]
        else:
            mid = [a * lone, nxt]
        c3 = [a2, -(a**2) * cota * sb * cot**2, a * cota * al2, *mid,
              sa * ca * sb * (5 - cot**2), sb * fs.lap_alpha]
        c4 = [
            a**2 * (1 + csc**2), -2 * a * csc * al2, grad2, 2 * sa * (tan - cot) * al1,
            -4 * tan**2 * ca**2, -(sa**2) * (1 - cot**2),
        ]
    return {"codazzi1": c1, "codazzi2": c2, "codazzi3": c3, "codazzi4": c4}


def codazzi_residuals(fs: FieldSet, variant: str = "additive") -> dict[str, Residual]:
    """The four Codazzi-Ricci equations for constant beta in the diagonal gauge."""
    _require_minimal(fs)
    _require_constant_beta(fs)
    _require_diagonal(fs)
    t = _Trig(fs)
    ok, why = t.mask("sb", "sa", "cb")
    return {name: _residual(name, terms, ok, why) for name, terms in codazzi_terms(fs, variant).items()}


def theorem1_rhs_terms(fs: FieldSet) -> list:
    t = _Trig(fs)
    grad2 = fs.alpha1**2 + fs.alpha2**2
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        return [
            t.cota * t.csc**3 * grad2,
            fs.a**2 * t.cota * t.cot**4,
            -2 * fs.a * t.cota * t.csc * t.cot**2 * fs.alpha2,
            -2 * t.ca * (t.cot - t.tan) * t.tan**2 * fs.alpha1,
            t.sa * t.ca * (5 - t.cot**4 - 3 * t.csc**2),
        ]


def theorem1_residual(fs: FieldSet) -> Residual:
    """Lap(alpha) minus the right-hand side of the holomorphic-angle PDE."""
    _require_minimal(fs)
    _require_constant_beta(fs)
    _require_diagonal(fs)
    lo, hi = float(np.min(fs.alpha)), float(np.max(fs.alpha))
    if lo <= 0 or hi > math.pi / 2 + GUARD_EPS:
        raise AlphaOutOfRange(f"alpha spans [{lo:.6g}, {hi:.6g}], outside (0, pi/2]")
    t = _Trig(fs)
    ok, why = t.mask("sa", "sb", "cb")
    return _residual("theorem1", theorem1_rhs_terms(fs), ok, why, lhs=fs.lap_alpha)


@dataclass(frozen=True)
class AFromAngles:
    a_plus: np.ndarray
    a_minus: np.ndarray
    discriminant: np.ndarray
    negative_discriminant: np.ndarray


def a_from_angles(alpha, beta, alpha1=0.0, alpha2=0.0) -> AFromAngles:
    """Solve the fourth Codazzi-Ricci equation for a, with the discriminant as printed.

    Returns both roots; where the discriminant is below ``-1e-12`` the roots
    are NaN and ``negative_discriminant`` is set.
    """
    alpha, beta, alpha1, alpha2 = np.broadcast_arrays(*(np.asarray(x, float) for x in (alpha, beta, alpha1, alpha2)))
    sb, cb = np.sin(beta), np.cos(beta)
    if np.any(np.abs(sb) <= GUARD_EPS) or np.any(np.abs(cb) <= GUARD_EPS):
        raise DomainGuard("a_from_angles needs sin(beta) and cos(beta) away from 0")
    sa, ca = np.sin(alpha), np.cos(alpha)
    csc, cot, tan = 1 / sb, cb / sb, sb / cb
    k = 1 + csc**2
    f = (4 * alpha2**2 * cot**2 - 4 * k * alpha1**2
         - 4 * k * (2 * sa * (tan - cot) * alpha1 - 4 * tan**2 * ca**2 - sa**2 * (1 - cot**2)))
    neg = f < -DISCRIMINANT_TOL
    root = np.sqrt(np.where(neg, np.nan, np.maximum(f, 0.0)))
    return AFromAngles((2 * csc * alpha2 + root) / (2 * k), (2 * csc * alpha2 - root) / (2 * k), f, neg)


def a_closure_residual(fs: FieldSet) -> Residual:
    """Distance from the measured a to the nearer root of :func:`a_from_angles`."""
    _require_minimal(fs)
    _require_constant_beta(fs)
    _require_diagonal(fs)
    t = _Trig(fs)
    ok, why = t.mask("sb", "cb")
    safe_beta = np.where(ok, fs.beta, 1.0)
    sol = a_from_angles(fs.alpha, safe_beta, fs.alpha1, fs.alpha2)
    neg = sol.negative_discriminant & ok
    if np.any(neg):
        why = why | {"NegativeDiscriminant"}
    ok = ok & ~sol.negative_discriminant
    with np.errstate(invalid="ignore"):
        d = np.minimum(np.abs(fs.a - sol.a_plus), np.abs(fs.a - sol.a_minus))
    d = np.where(ok, d, 0.0)
    scale = np.where(ok, np.maximum(np.abs(fs.a), np.nan_to_num(np.abs(sol.a_plus))), 0.0)
    return Residual("a_closure", d, ok, scale, why)


def corollary1_relations(fs: FieldSet) -> dict[str, Residual | float]:
    """Flat surfaces with constant beta and a: the two alpha-derivative relations.

    Also returns ``alpha_gradient_max`` (max |grad alpha|), the constancy
    diagnostic.
    """
    _require_minimal(fs)
    K = float(np.max(np.abs(fs.K_intrinsic)))
    if K >= FLAT_TOL:
        raise NotFlat(f"|K| = {K:.3g}")
    ga = float(np.max(np.hypot(fs.a1, fs.a2)))
    if ga >= CONSTANT_TOL:
        raise NonConstantA(f"|grad a| = {ga:.3g}")
    _require_constant_beta(fs)
    t = _Trig(fs)
    ok, why = t.mask("sa", "cb")
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        r1 = _residual("corollary_alpha1", [2 * t.tan * t.cota * t.ca], ok, why, lhs=fs.alpha1)
        r2 = _residual("corollary_alpha2", [fs.a * t.sb * (t.cota**2 + 3)], ok, why, lhs=fs.alpha2)
    return {r1.name: r1, r2.name: r2, "alpha_gradient_max": float(np.max(np.hypot(fs.alpha1, fs.alpha2)))}


# --------------------------------------------------------------------------
# Consolidated report
# --------------------------------------------------------------------------


@dataclass
class IdentityEntry:
    identity: str
    max: float | None
    mean: float | None
    guarded_fraction: float
    max_normalized: float | None = None
    guards: list[str] = field(default_factory=list)
    tolerance: float | None = None
    informational: bool = False

    @property
    def applicable(self) -> bool:
        return self.max is not None

    @property
    def passed(self) -> bool:
        if self.informational or not self.applicable or self.tolerance is None:
            return True
        return self.max <= self.tolerance

    def to_json(self) -> dict:
        return {
            "identity": self.identity,
            "max": self.max,
            "mean": self.mean,
            "guarded_fraction": self.guarded_fraction,
            "max_normalized": self.max_normalized,
            "guards": list(self.guards),
            "tolerance": self.tolerance,
            "informational": self.informational,
            "passed": self.passed,
        }


@dataclass
class IdentityReport:
    entries: dict[str, IdentityEntry]
    extras: dict[str, float] = field(default_factory=dict)

    def __getitem__(self, name: str) -> IdentityEntry:
        return self.entries[name]

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries.values())

    def failures(self) -> list[str]:
        return [n for n, e in self.entries.items() if not e.passed]

    def to_json(self) -> list[dict]:
        return [self.entries[n].to_json() for n in IDENTITY_NAMES]


def _entry(r: Residual, tol: float | None) -> IdentityEntry:
    return IdentityEntry(
        identity=r.name, max=r.max(), mean=r.mean(), guarded_fraction=r.guarded_fraction,
        max_normalized=r.max_normalized(), guards=sorted(r.guards), tolerance=tol,
        informational=r.name in INFORMATIONAL,
    )


def _guarded(name: str, exc: CsgeoError, tol: float | None) -> IdentityEntry:
    return IdentityEntry(identity=name, max=None, mean=None, guarded_fraction=1.0,
                         guards=[f"{type(exc).__name__}: {exc}"], tolerance=tol,
                         informational=name in INFORMATIONAL)


def identity_report(fs: FieldSet, tolerances: dict[str, float] | None = None,
                    codazzi3_variant: str = "additive") -> IdentityReport:
    """Evaluate every identity; failed preconditions become guarded entries."""
    tol = dict(DEFAULT_TOLERANCES)
    tol.update(tolerances or {})
    groups: list[tuple[tuple[str, ...], Callable[[], dict]]] = [
        (("K_gauss_vs_intrinsic", "K_conex_vs_intrinsic"), lambda: curvature_report(fs)),
        (("lapla_beta",), lambda: {"lapla_beta": laplacian_beta_residual(fs)}),
        (("codazzi1", "codazzi2", "codazzi3", "codazzi4"), lambda: codazzi_residuals(fs, codazzi3_variant)),
        (("theorem1",), lambda: {"theorem1": theorem1_residual(fs)}),
        (("a_closure",), lambda: {"a_closure": a_closure_residual(fs)}),
        (("corollary_alpha1", "corollary_alpha2"), lambda: corollary1_relations(fs)),
    ]
    entries: dict[str, IdentityEntry] = {}
    extras: dict[str, float] = {}
    for names, run in groups:
        try:
            out = run()
        except CsgeoError as exc:
            for n in names:
                entries[n] = _guarded(n, exc, tol[n])
            continue
        for n in names:
            entries[n] = _entry(out[n], tol[n])
        for k, val in out.items():
            if k not in names:
                extras[k] = val
    return IdentityReport(entries, extras)
