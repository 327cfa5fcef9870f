"""Adapted frames (z, e1, ..., e5) of surfaces in S^5 with contact and holomorphic angles."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .ambient import norm, real_inner, realify
from .errors import ContactAngleZero, HolomorphicAngleDegenerate
from .exprlang import Jet2
from .surface import first_fundamental

ANGLE_TOL = 1e-8


def _unit(x):
    return x / norm(x)[..., None]


def _scale(c, x):
    return np.asarray(c)[..., None] * x


@dataclass(frozen=True)
class AdaptedFrame:
    """Adapted frame at one or many points (leading axes broadcast).

    ``tangent_coords[..., i, :]`` are the (du, dv) coordinates of e_{i+1}.
    ``legendrian_gauge`` marks points where TS lies in the contact
    distribution and e1 was taken along the u-direction instead.
    """

    z: np.ndarray
    e1: np.ndarray
    e2: np.ndarray
    v: np.ndarray
    e3: np.ndarray
    e4: np.ndarray
    e5: np.ndarray
    beta: np.ndarray
    alpha: np.ndarray
    cos_beta: np.ndarray
    sin_beta: np.ndarray
    cos_alpha: np.ndarray
    sin_alpha: np.ndarray
    legendrian_gauge: np.ndarray
    tangent_coords: np.ndarray

    @property
    def xi(self):
        return 1j * self.z

    def vectors(self) -> tuple[np.ndarray, ...]:
        return (self.z, self.e1, self.e2, self.e3, self.e4, self.e5)

    def matrix(self) -> np.ndarray:
        """Real 6x6 frame matrix with rows z, e1, ..., e5."""
        return np.stack([realify(x) for x in self.vectors()], axis=-2)

    def take(self, index) -> "AdaptedFrame":
        return AdaptedFrame(**{k: getattr(self, k)[index] for k in self.__dataclass_fields__})


def _tangent_coords(j: Jet2, metric, e1, e2):
    guu, guv, gvv = metric.inverse()
    out = np.empty(e1.shape[:-1] + (2, 2))
    for i, e in enumerate((e1, e2)):
        pu, pv = real_inner(e, j.z_u), real_inner(e, j.z_v)
        out[..., i, 0] = guu * pu + guv * pv
        out[..., i, 1] = guv * pu + gvv * pv
    return out


def _finish(z, e1, e2, cb, sb, legendrian, tangent_coords) -> AdaptedFrame:
    xi = 1j * z
    v = _scale(1.0 / sb, e2 - _scale(cb, xi))
    ca = real_inner(1j * e1, v)
    flip = ca < 0
    e1 = np.where(flip[..., None], -e1, e1)
    tangent_coords = np.where(flip[..., None, None], tangent_coords * np.array([[-1.0], [1.0]]), tangent_coords)
    ca = np.abs(ca)
    sa = norm(1j * e1 - _scale(ca, v))
    bad = sa < ANGLE_TOL
    if np.any(bad):
        raise HolomorphicAngleDegenerate(
            f"|sin(alpha)| < {ANGLE_TOL:g} at {int(np.sum(bad))} point(s): <i e1, v> = +-1")
    e3 = _scale(1.0 / sa, 1j * e1 - _scale(ca, v))
    e4 = _scale(1.0 / sa, _scale(ca, e1) + 1j * v)
    e5 = _scale(1.0 / sb, xi - _scale(cb, e2))
    return AdaptedFrame(
        z=z, e1=e1, e2=e2, v=v, e3=e3, e4=e4, e5=e5,
        beta=np.arctan2(sb, cb), alpha=np.arctan2(sa, ca),
        cos_beta=cb, sin_beta=sb, cos_alpha=ca, sin_alpha=sa,
        legendrian_gauge=legendrian, tangent_coords=tangent_coords,
    )


def adapted_frame(j: Jet2) -> AdaptedFrame:
    """Build the adapted frame from a 2-jet (only z, z_u, z_v are used).

    e2 points along the tangential projection of the Reeb field, e1 spans
    the rest of TS (hence lies in the contact distribution) and its sign is
    chosen so that cos(alpha) >= 0.  Raises :class:`ContactAngleZero` when
    the Reeb field is tangent and :class:`HolomorphicAngleDegenerate` when
    ``<i e1, v> = +-1``.
    """
    metric = first_fundamental(j)
    z = j.z
    t1 = _unit(j.z_u)
    t2 = _unit(j.z_v - _scale(real_inner(j.z_v, t1), t1))
    xi = 1j * z
    c1, c2 = real_inner(xi, t1), real_inner(xi, t2)
    xi_t = _scale(c1, t1) + _scale(c2, t2)
    cb = norm(xi_t)
    sb = norm(xi - xi_t)
    bad = sb < ANGLE_TOL
    if np.any(bad):
        raise ContactAngleZero(
            f"|sin(beta)| < {ANGLE_TOL:g} at {int(np.sum(bad))} point(s): the Reeb field is tangent")
    legendrian = cb < ANGLE_TOL
    safe = np.where(legendrian, 1.0, cb)
    e2 = np.where(legendrian[..., None], t2, _scale(1.0 / safe, xi_t))
    e1 = np.where(legendrian[..., None], t1, _scale(1.0 / safe, _scale(c2, t1) - _scale(c1, t2)))
    cb = np.where(legendrian, cb, real_inner(xi, e2))
    return _finish(z, e1, e2, cb, sb, legendrian, _tangent_coords(j, metric, e1, e2))


def flip_e1(f: AdaptedFrame, mask=None) -> AdaptedFrame:
    """Reverse e1 (and hence e3, alpha -> pi - alpha) where ``mask`` is set."""
    mask = np.ones(np.shape(f.alpha), bool) if mask is None else np.asarray(mask, bool)
    m3 = mask[..., None]
    tc = np.where(mask[..., None, None], f.tangent_coords * np.array([[-1.0], [1.0]]), f.tangent_coords)
    ca = np.where(mask, -f.cos_alpha, f.cos_alpha)
    return replace(
        f, e1=np.where(m3, -f.e1, f.e1), e3=np.where(m3, -f.e3, f.e3),
        cos_alpha=ca, alpha=np.arctan2(f.sin_alpha, ca), tangent_coords=tc,
    )


def frame_consistency(f: AdaptedFrame) -> dict[str, float]:
    """Max-norm residuals of the frame relations linking v, xi, i e1, i e2 to the frame."""
    ca, sa, cb, sb = f.cos_alpha, f.sin_alpha, f.cos_beta, f.sin_beta
    xi = f.xi
    checks = {
        "v": f.v - (_scale(sb, f.e2) - _scale(cb, f.e5)),
        "iv": 1j * f.v - (_scale(sa, f.e4) - _scale(ca, f.e1)),
        "xi": xi - (_scale(cb, f.e2) + _scale(sb, f.e5)),
        "ie1": 1j * f.e1 - (_scale(ca * sb, f.e2) + _scale(sa, f.e3) - _scale(ca * cb, f.e5)),
        "ie2": 1j * f.e2 - (-_scale(cb, f.z) - _scale(ca * sb, f.e1) + _scale(sa * sb, f.e4)),
    }
    return {k: float(np.max(norm(r))) for k, r in checks.items()}


def orthonormality_residual(f: AdaptedFrame) -> float:
    M = f.matrix()
    return float(np.max(np.abs(M @ np.swapaxes(M, -1, -2) - np.eye(6))))
