"""Connection forms of the adapted frame and the structural relations they obey.

Coefficients are stored as ``coef[..., j, k, i]`` = theta_j^k(e_{i+1}) with
frame index 0 standing for the position vector z and 1..5 for e1..e5.  The
complex structure of S acts by J e1 = e2, J e2 = -e1, so a 1-form
``(f1, f2)`` composed with J becomes ``(f2, -f1)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping

import numpy as np

from .ambient import norm, real_inner
from .errors import GaugeFlip, GaugeNotDiagonal, NonConstantBeta, NotMinimal
from .exprlang import Jet2
from .frames import AdaptedFrame, adapted_frame, flip_e1
from .surface import directional_from_gradient, mean_curvature_vector

GUARD_EPS = 1e-6
TIE_BREAK_TOL = 1e-12
MINIMAL_TOL = 1e-6
GAUGE_FLIP_TOL = 0.5

JetSource = Callable[[np.ndarray, np.ndarray], Jet2]


def _jet_fn(source) -> JetSource:
    return source.jet if hasattr(source, "jet") else source


@dataclass(frozen=True)
class SecondFundamental:
    """II^3, II^4, II^5 as symmetric 2x2 matrices in the (e1, e2) basis."""

    II3: np.ndarray
    II4: np.ndarray
    II5: np.ndarray

    def traces(self) -> np.ndarray:
        return np.stack([np.trace(m, axis1=-2, axis2=-1) for m in (self.II3, self.II4, self.II5)], -1)


@dataclass(frozen=True)
class ConnectionTable:
    """Measured connection coefficients plus the scalar data read off them."""

    coef: np.ndarray
    frame: AdaptedFrame
    a: np.ndarray
    b: np.ndarray
    alpha1: np.ndarray
    alpha2: np.ndarray
    beta1: np.ndarray
    beta2: np.ndarray
    mean_curvature: np.ndarray
    h: float

    def theta(self, j: int, k: int) -> np.ndarray:
        return self.coef[..., j, k, :]

    def with_ab(self, a=None, b=None) -> "ConnectionTable":
        """Copy with overridden a and/or b (inputs of the formula checks only)."""
        return replace(
            self,
            a=self.a if a is None else np.broadcast_to(np.asarray(a, float), np.shape(self.a)),
            b=self.b if b is None else np.broadcast_to(np.asarray(b, float), np.shape(self.b)),
        )

    def antisymmetry_residual(self) -> float:
        return float(np.max(np.abs(self.coef + np.swapaxes(self.coef, -3, -2))))

    def second_fundamental(self) -> SecondFundamental:
        mats = []
        for j in (3, 4, 5):
            m = np.empty(self.coef.shape[:-3] + (2, 2))
            m[..., 0, 0] = self.coef[..., 1, j, 0]
            m[..., 0, 1] = self.coef[..., 1, j, 1]
            m[..., 1, 0] = self.coef[..., 2, j, 0]
            m[..., 1, 1] = self.coef[..., 2, j, 1]
            mats.append(m)
        return SecondFundamental(*mats)

    def symmetry_residual(self) -> float:
        ii = self.second_fundamental()
        return float(max(np.max(np.abs(m[..., 0, 1] - m[..., 1, 0])) for m in (ii.II3, ii.II4, ii.II5)))


def _align(vec, ref):
    s = np.where(real_inner(vec, ref) < 0, -1.0, 1.0)
    out = s[..., None] * vec
    if np.any(norm(out - ref) > GAUGE_FLIP_TOL):
        raise GaugeFlip("stencil frame cannot be sign-aligned with the centre frame")
    return out


def connection_table(source, u, v, h: float = 1e-4, richardson: bool = True) -> ConnectionTable:
    """Measure theta_j^k at the points (u, v) by differencing the adapted frame.

    ``source`` is a surface (anything with a ``jet(u, v)`` method) or a
    callable returning :class:`~csgeo.exprlang.Jet2`.  Frames on the
    four-point cross stencil of spacing ``h`` (and ``h/2`` when
    ``richardson``) are sign-aligned with the centre frame and centrally
    differenced.
    """
    jet = _jet_fn(source)
    u = np.asarray(u, float)
    v = np.asarray(v, float)
    u, v = np.broadcast_arrays(u, v)
    steps = (h, h / 2) if richardson else (h,)
    du = [0.0]
    dv = [0.0]
    for s in steps:
        du += [s, -s, 0.0, 0.0]
        dv += [0.0, 0.0, s, -s]
    du = np.array(du).reshape((-1,) + (1,) * u.ndim)
    dv = np.array(dv).reshape((-1,) + (1,) * u.ndim)
    jets = jet(u[None] + du, v[None] + dv)
    frames = adapted_frame(jets)
    centre = frames.take(0)
    ref = centre.vectors()
    stacked = []
    for k, vec in enumerate(frames.vectors()):
        stacked.append(vec if k == 0 else _align(vec, ref[k][None]))
    e1 = stacked[1]
    v_all = frames.v
    ca = real_inner(1j * e1, v_all)
    sa = real_inner(1j * e1, stacked[3])
    alpha = np.arctan2(sa, ca)
    beta = frames.beta

    def diff(x):
        # x[0] centre, then (+u, -u, +v, -v) per step
        out_u, out_v = [], []
        for m, s in enumerate(steps):
            o = 1 + 4 * m
            out_u.append((x[o] - x[o + 1]) / (2 * s))
            out_v.append((x[o + 2] - x[o + 3]) / (2 * s))
        if richardson:
            return (4 * out_u[1] - out_u[0]) / 3, (4 * out_v[1] - out_v[0]) / 3
        return out_u[0], out_v[0]

    tc = centre.tangent_coords
    coef = np.zeros(u.shape + (6, 6, 2))
    for j, vec in enumerate(stacked):
        if j == 0:
            continue
        d_u, d_v = diff(vec)
        for i in range(2):
            D = tc[..., i, 0][..., None] * d_u + tc[..., i, 1][..., None] * d_v
            for k in range(6):
                coef[..., j, k, i] = real_inner(D, ref[k])
    for k in range(1, 6):
        for i in range(2):
            coef[..., 0, k, i] = real_inner(ref[i + 1], ref[k])
    alpha1, alpha2 = directional_from_gradient(*diff(alpha), tc)
    beta1, beta2 = directional_from_gradient(*diff(beta), tc)

    # e1 tie-break where cos(alpha) vanishes: require a >= 0
    flip = (np.abs(centre.cos_alpha) < TIE_BREAK_TOL) & (coef[..., 1, 3, 0] < 0)
    if np.any(flip):
        sgn = np.array([1.0, -1.0, 1.0, -1.0, 1.0, 1.0])
        s3 = sgn[:, None, None] * sgn[None, :, None] * np.array([-1.0, 1.0])[None, None, :]
        coef = np.where(flip[..., None, None, None], coef * s3, coef)
        alpha2 = np.where(flip, -alpha2, alpha2)
        beta1 = np.where(flip, -beta1, beta1)
        centre = flip_e1(centre, flip)

    H = norm(mean_curvature_vector(jets.take(0)))
    return ConnectionTable(
        coef=coef, frame=centre, a=coef[..., 1, 3, 0].copy(), b=coef[..., 1, 3, 1].copy(),
        alpha1=alpha1, alpha2=alpha2, beta1=beta1, beta2=beta2, mean_curvature=H, h=h,
    )


# --------------------------------------------------------------------------
# Predicted forms
# --------------------------------------------------------------------------


def _J(form):
    """Compose a 1-form (f1, f2) with J."""
    return np.stack([form[..., 1], -form[..., 0]], -1)


def _pair(c1, c2):
    c1, c2 = np.broadcast_arrays(np.asarray(c1, float), np.asarray(c2, float))
    return np.stack([c1, c2], -1)


def minimal_connection_forms(alpha, beta, a, b, alpha1, alpha2, beta1, beta2) -> dict[tuple[int, int], np.ndarray]:
    """Connection forms of a minimal surface expressed through (alpha, beta, a, b) and their differentials.

    Keys are (j, k) for theta_j^k; values are (coef of theta^1, coef of theta^2).
    Setting b = 0 and beta1 = beta2 = 0 gives the constant-contact-angle,
    diagonal-gauge forms.
    """
    sa, ca = np.sin(alpha), np.cos(alpha)
    sb, cb = np.sin(beta), np.cos(beta)
    with np.errstate(divide="ignore", invalid="ignore"):
        csc, cot, sec = 1 / sb, cb / sb, 1 / cb
        cota = ca / sa
        tan = sb / cb
        dal = _pair(alpha1, alpha2)
        dbe = _pair(beta1, beta2)
        t1, t2 = _pair(1.0, 0.0), _pair(0.0, 1.0)
        c4 = b * csc - sa * cot
        s = lambda x: np.asarray(x)[..., None]  # noqa: E731
        forms = {
            (2, 1): s(tan) * (_J(dbe) - s(2 * ca) * t2),
            (1, 3): s(a) * t1 + s(b) * t2,
            (2, 3): s(b) * t1 - s(a) * t2,
            (1, 4): dal + s(c4) * t1 - s(a * csc) * t2,
            (2, 4): _J(dal) - s(a * csc) * t1 - s(c4) * t2,
            (1, 5): _J(dbe) - s(ca) * t2,
            (2, 5): -dbe - s(ca) * t1,
            (3, 4): -s(sec) * _J(dbe) - s(cota * csc) * _J(dal) + s(a * cota * cot**2) * t1
            + s(b * cota * cot**2 - ca * cot * csc + 2 * sec * ca) * t2,
            (3, 5): s(b * cot - csc * sa) * t1 - s(a * cot) * t2,
            (4, 5): s(cot) * _J(dal) - s(a * cot * csc) * t1 + s(-b * csc * cot + sa * (cot**2 - 1)) * t2,
        }
    return forms


# which trigonometric factors each predicted form divides by
_FORM_FACTORS = {
    (2, 1): ("cos_beta",),
    (1, 3): (), (2, 3): (),
    (1, 4): ("sin_beta",), (2, 4): ("sin_beta",),
    (1, 5): (), (2, 5): (),
    (3, 4): ("sin_beta", "cos_beta", "sin_alpha"),
    (3, 5): ("sin_beta",), (4, 5): ("sin_beta",),
}


# --------------------------------------------------------------------------
# Residual reports
# --------------------------------------------------------------------------


@dataclass
class ResidualReport:
    """Named max-abs residuals; guarded relations are listed instead of valued."""

    residuals: dict[str, float] = field(default_factory=dict)
    guards: dict[str, str] = field(default_factory=dict)
    point: tuple[float, float] | None = None

    def add(self, name: str, diff: np.ndarray, applicable: np.ndarray, reason: str) -> None:
        diff = np.abs(np.asarray(diff, float))
        diff = diff.reshape(np.shape(applicable) + (-1,)).max(axis=-1)
        if np.any(applicable):
            self.residuals[name] = float(np.max(diff[applicable]))
        else:
            self.guards[name] = reason

    def max(self) -> float:
        return max(self.residuals.values(), default=0.0)

    def to_json(self) -> dict:
        return {
            "point": list(self.point) if self.point is not None else None,
            "residuals": dict(self.residuals),
            "guards": sorted(self.guards),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)


def _factor_ok(frame: AdaptedFrame, names) -> tuple[np.ndarray, str]:
    ok = np.ones(np.shape(frame.alpha), bool)
    bad = []
    for n in names:
        small = np.abs(getattr(frame, n)) <= GUARD_EPS
        if np.any(small):
            bad.append(n)
        ok &= ~small
    return ok, ("DomainGuard: " + ", ".join(n.replace("_", " ") + " ~ 0" for n in bad)) if bad else ""


def check_intrinsic_relations(t: ConnectionTable) -> ResidualReport:
    """Residuals of the frame-derivative relations for e3, e4, e5 and of theta_2^1 = tan(beta)(d beta o J - 2 cos(alpha) theta^2)."""
    f = t.frame
    sa, ca, sb, cb = f.sin_alpha, f.cos_alpha, f.sin_beta, f.cos_beta
    T = t.theta
    s = lambda x: np.asarray(x)[..., None]  # noqa: E731
    t1, t2 = _pair(1.0, 0.0), _pair(0.0, 1.0)
    dal = _pair(t.alpha1, t.alpha2)
    dbe = _pair(t.beta1, t.beta2)
    with np.errstate(divide="ignore", invalid="ignore"):
        csc, cot, tan, cota = 1 / sb, cb / sb, sb / cb, ca / sa
        X = T(1, 3) + s(csc) * T(2, 4)
        rel = {
            "theta_3^1": (T(3, 1), -T(1, 3), ()),
            "theta_3^2": (T(3, 2), s(sb) * (dal + T(4, 1)) - s(cb * sa) * t1, ()),
            "theta_3^4": (T(3, 4), s(csc) * T(1, 2) - s(cota) * X, ("sin_beta", "sin_alpha")),
            "theta_3^5": (T(3, 5), s(cot) * T(2, 3) - s(csc * sa) * t1, ("sin_beta",)),
            "theta_4^1": (T(4, 1), -dal - s(csc) * T(2, 3) + s(sa * cot) * t1, ("sin_beta",)),
            "theta_4^2": (T(4, 2), -T(2, 4), ()),
            "theta_4^3": (T(4, 3), s(csc) * T(2, 1) + s(cota) * X, ("sin_beta", "sin_alpha")),
            "theta_4^5": (T(4, 5), s(cot) * T(2, 4) - s(sa) * t2, ("sin_beta",)),
            "theta_5^1": (T(5, 1), -s(ca) * t2 - s(cot) * T(2, 1), ("sin_beta",)),
            "theta_5^2": (T(5, 2), dbe + s(ca) * t1, ()),
            "theta_5^3": (T(5, 3), -s(cot) * T(2, 3) + s(csc * sa) * t1, ("sin_beta",)),
            "theta_5^4": (T(5, 4), -s(cot) * T(2, 4) + s(sa) * t2, ("sin_beta",)),
            "conex": (T(2, 1), s(tan) * (_J(dbe) - s(2 * ca) * t2), ("cos_beta",)),
        }
        report = ResidualReport()
        for name, (measured, predicted, factors) in rel.items():
            ok, why = _factor_ok(f, factors)
            report.add(name, np.where(ok[..., None], measured - predicted, 0.0), ok, why)
    return report


def check_minimal_connection_forms(t: ConnectionTable, include_constant_beta: bool = True,
                                   minimal_tol: float = MINIMAL_TOL) -> ResidualReport:
    """Compare measured connection forms with their closed forms for minimal surfaces.

    The ``minimal.*`` entries use the general expressions; with
    ``include_constant_beta`` the ``constbeta.*`` entries repeat the check
    with d(beta) = 0 and b = 0, which first requires a constant contact angle
    and a diagonal II^3 (else :class:`NonConstantBeta` /
    :class:`GaugeNotDiagonal`).
    """
    H = float(np.max(t.mean_curvature))
    if H > minimal_tol:
        raise NotMinimal(f"mean curvature norm {H:.3g} exceeds {minimal_tol:g}")
    f = t.frame
    sections = [("minimal", minimal_connection_forms(f.alpha, f.beta, t.a, t.b, t.alpha1, t.alpha2, t.beta1, t.beta2))]
    if include_constant_beta:
        grad_beta = float(np.max(np.hypot(t.beta1, t.beta2)))
        if grad_beta >= GUARD_EPS:
            raise NonConstantBeta(f"|grad beta| = {grad_beta:.3g}")
        bmax = float(np.max(np.abs(t.b)))
        if bmax >= GUARD_EPS:
            raise GaugeNotDiagonal(f"|b| = {bmax:.3g}: II^3 is not diagonal in (e1, e2)")
        zero = np.zeros_like(t.a)
        sections.append(("constbeta", minimal_connection_forms(f.alpha, f.beta, t.a, zero, t.alpha1, t.alpha2, zero, zero)))
    report = ResidualReport()
    for prefix, forms in sections:
        for (j, k), pred in forms.items():
            if (j, k) in {(2, 1), (1, 3)}:
                continue
            ok, why = _factor_ok(f, _FORM_FACTORS[(j, k)])
            diff = np.where(ok[..., None], t.theta(j, k) - np.nan_to_num(pred), 0.0)
            report.add(f"{prefix}.theta_{j}^{k}", diff, ok, why)
    return report


def table_at(t: ConnectionTable, index) -> ConnectionTable:
    """Sub-table at ``index`` of the leading axes."""
    return ConnectionTable(
        coef=t.coef[index], frame=t.frame.take(index), a=t.a[index], b=t.b[index],
        alpha1=t.alpha1[index], alpha2=t.alpha2[index], beta1=t.beta1[index], beta2=t.beta2[index],
        mean_curvature=t.mean_curvature[index], h=t.h,
    )
