"""Linear algebra of C^3 = R^6 and the contact structure of S^5.

Vectors are complex numpy arrays with a trailing axis of length 3; all
functions broadcast over leading axes.  The realification used whenever a
real 6-vector is needed is ``(x1, y1, x2, y2, x3, y3)``, on which
multiplication by ``i`` acts as the block rotation :data:`J0`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotOnSphere, NotTangent

#: Complex structure on R^6 (acts on column vectors): (x, y) -> (-y, x) per factor.
J0 = np.kron(np.eye(3), np.array([[0.0, -1.0], [1.0, 0.0]]))


def hermitian(z, w):
    """Hermitian product sum_j z^j conj(w^j)."""
    return np.sum(np.asarray(z) * np.conj(w), axis=-1)


def real_inner(z, w):
    """Real inner product Re (z, w) on C^3 seen as R^6."""
    return hermitian(z, w).real


def norm(z):
    return np.sqrt(real_inner(z, z))


def reeb(z, tol: float = 1e-9):
    """Reeb field xi(z) = i z; raises :class:`NotOnSphere` off the unit sphere."""
    z = np.asarray(z, dtype=complex)
    err = np.abs(norm(z) - 1.0)
    if np.any(err > tol):
        raise NotOnSphere(f"|z| deviates from 1 by {float(np.max(err)):.3g}")
    return 1j * z


@dataclass(frozen=True)
class ContactSplit:
    z: np.ndarray
    X: np.ndarray
    reeb_component: np.ndarray  # <xi, X>
    contact_component: np.ndarray  # X - <xi, X> xi


def contact_project(z, X, tol: float = 1e-9) -> ContactSplit:
    """Split a tangent vector of S^5 into its Reeb and contact parts."""
    z = np.asarray(z, dtype=complex)
    X = np.asarray(X, dtype=complex)
    xi = reeb(z, tol)
    radial = np.abs(real_inner(X, z))
    if np.any(radial > tol):
        raise NotTangent(f"<X, z> = {float(np.max(radial)):.3g} is not zero")
    r = real_inner(xi, X)
    return ContactSplit(z, X, r, X - r[..., None] * xi)


def realify(z) -> np.ndarray:
    """C^3 -> R^6 in the (x1, y1, x2, y2, x3, y3) convention."""
    z = np.asarray(z, dtype=complex)
    out = np.empty(z.shape[:-1] + (6,))
    out[..., 0::2] = z.real
    out[..., 1::2] = z.imag
    return out


def complexify(x) -> np.ndarray:
    """Inverse of :func:`realify`."""
    x = np.asarray(x, dtype=float)
    return x[..., 0::2] + 1j * x[..., 1::2]


def complex_matrix(M) -> np.ndarray:
    """3x3 complex matrix of a real 6x6 matrix commuting with :data:`J0`."""
    M = np.asarray(M, dtype=float)
    return M[..., 0::2, 0::2] + 1j * M[..., 1::2, 0::2]
