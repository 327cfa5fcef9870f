"""Reconstruction of minimal immersions with constant invariants.

Pipeline: solve the zero-derivative Codazzi-Ricci system for (alpha, a),
assemble the Maurer-Cartan matrices, integrate the frame, emit the
immersion in closed form and analyze it again (the round trip).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy.optimize import least_squares

from .ambient import J0, complex_matrix, realify
from .connection import minimal_connection_forms
from .errors import DomainGuard, GaugeNotDiagonal, IncompatibleConnection, NoBranch
from .exprlang import Jet2, SurfaceAST, surface_from_components
from .identities import FieldSet, codazzi_terms
from .surface import Grid, write_grid_csv

GUARD_EPS = 1e-8
TAN_GUARD = 1e-6
BRANCH_TOL = 1e-12
DEGENERATE_A = 1e-3
REORTH_TOL = 1e-12
RK4_MAX_STEP = 0.25  # spectral norm of one Taylor step's generator
RK4_MAX_SUBSTEPS = 20000


# --------------------------------------------------------------------------
# The circle family
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CircleFamilyPoint:
    beta: float
    a: float
    b: float

    @property
    def kenmotsu(self) -> bool:
        return abs(self.a) < 1e-12

    @property
    def new_family(self) -> bool:
        return abs(self.b) < 1e-12

    def membership_residual(self) -> float:
        return circle_membership(self.beta, self.a, self.b)


def circle_parameters(beta: float) -> tuple[float, float]:
    """Centre b0 and radius of the (a, b) circle at contact angle beta."""
    s2 = math.sin(beta) ** 2
    return math.cos(beta) / (1 + s2), math.sqrt(2) * s2 / (1 + s2)


def circle_membership(beta: float, a: float, b: float) -> float:
    """|a^2 + (b - b0)^2 - r^2|."""
    b0, r = circle_parameters(beta)
    return abs(a * a + (b - b0) ** 2 - r * r)


def _check_family_beta(beta: float) -> None:
    if not (0 < beta <= math.pi / 2 + 1e-12):
        raise DomainGuard(f"beta = {beta!r} outside (0, pi/2]")


def circle_family(beta: float, n: int) -> list[CircleFamilyPoint]:
    """n points (a, b) = (r cos t, b0 + r sin t), t = 2 pi k / n."""
    _check_family_beta(beta)
    if n < 1:
        raise ValueError("n must be positive")
    b0, r = circle_parameters(beta)
    pts = []
    for k in range(n):
        t = 2 * math.pi * k / n
        pts.append(CircleFamilyPoint(beta, r * math.cos(t), b0 + r * math.sin(t)))
    return pts


def circle_b_at_a0(beta: float) -> tuple[float, float]:
    """The two b values on the circle with a = 0."""
    _check_family_beta(beta)
    b0, r = circle_parameters(beta)
    return b0 + r, b0 - r


# --------------------------------------------------------------------------
# Constant invariants
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class InvariantConstants:
    beta: float
    alpha: float
    a: float
    b: float = 0.0
    note: str = ""
    residuals: tuple[float, ...] = ()

    def __post_init__(self):
        if abs(math.sin(self.beta)) <= GUARD_EPS or abs(math.sin(self.alpha)) <= GUARD_EPS:
            raise DomainGuard("sin(beta) and sin(alpha) must stay away from 0")

    @property
    def c(self) -> float:
        """Coefficient of theta^2 in theta_2^1."""
        return -2 * math.tan(self.beta) * math.cos(self.alpha)

    def to_json(self) -> dict:
        return {"beta": self.beta, "alpha": self.alpha, "a": self.a, "b": self.b, "c": self.c,
                "note": self.note, "residuals": list(self.residuals)}


def constant_codazzi(beta: float, alpha: float, a: float, variant: str = "additive") -> np.ndarray:
    """The four Codazzi-Ricci equations with every derivative set to zero."""
    fs = FieldSet.constant(alpha, beta, a)
    return np.array([float(sum(terms)[0]) for terms in codazzi_terms(fs, variant).values()])


def solve_constant_invariants(beta: float, starts: int = 12) -> list[InvariantConstants]:
    """All real (alpha, a) branches of the zero-derivative system, b = 0.

    Multi-start least squares in the box alpha in (0, pi), |a| <= 4; keeps
    solutions whose four residuals are below 1e-12.  A root at a = 0 is a
    double root (the system is quadratic in a there) and carries a note.
    """
    if not (0 < beta < math.pi / 2):
        raise DomainGuard(f"beta = {beta!r} outside (0, pi/2)")
    if abs(math.cos(beta)) <= TAN_GUARD:
        raise DomainGuard("tan(beta) guard: cos(beta) ~ 0")
    eq = lambda x: constant_codazzi(beta, x[0], x[1])  # noqa: E731
    found: list[tuple[float, float]] = []
    for al0 in np.linspace(0.15, math.pi - 0.15, starts):
        for a0 in (-2.0, -0.7, -0.2, 0.2, 0.7, 2.0):
            try:
                sol = least_squares(eq, [al0, a0], bounds=([1e-6, -4.0], [math.pi - 1e-6, 4.0]),
                                    xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=2000)
            except ValueError:
                continue
            al, a = _polish(beta, float(sol.x[0]), float(sol.x[1]))
            if np.max(np.abs(eq([al, a]))) >= BRANCH_TOL:
                continue
            if not any(abs(al - x) < 1e-7 and abs(a - y) < 1e-7 for x, y in found):
                found.append((al, a))
    if not found:
        raise NoBranch(f"no real (alpha, a) with b = 0 solves the constant system at beta = {beta:.10g}")
    out = []
    for al, a in sorted(found, key=lambda p: (p[1], p[0])):
        r = tuple(float(x) for x in np.abs(constant_codazzi(beta, al, a)))
        note = "degenerate a -> 0 limit (double root)" if a == 0.0 else ""
        out.append(InvariantConstants(beta, al, a, 0.0, note, r))
    return out


def _polish(beta: float, alpha: float, a: float) -> tuple[float, float]:
    """Snap alpha to pi/2 and/or a to 0 when that does not increase the residual.

    Near a double root in a the iteration converges only linearly, so
    |a| up to 1e-3 is tried against the exact value 0.
    """
    best = (alpha, a)
    err = np.max(np.abs(constant_codazzi(beta, alpha, a)))
    for cand in ((math.pi / 2, a), (alpha, 0.0), (math.pi / 2, 0.0)):
        if abs(cand[0] - alpha) < 1e-6 and abs(cand[1] - a) < DEGENERATE_A:
            e = np.max(np.abs(constant_codazzi(beta, *cand)))
            if e <= err:
                best, err = cand, e
    return best


# --------------------------------------------------------------------------
# Maurer-Cartan matrices
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class MaurerCartan:
    """dF = (A theta^1 + B theta^2) F for the frame matrix F with rows z, e1..e5."""

    A: np.ndarray
    B: np.ndarray
    c: float
    constants: InvariantConstants | None = None

    @property
    def commutator_norm(self) -> float:
        return float(np.linalg.norm(self.A @ self.B - self.B @ self.A))

    @property
    def compat_residual(self) -> float:
        """||[A, B] + c B||_F: zero iff the coframe theta^1 = du, theta^2 = e^{-cu} dv is integrable."""
        return float(np.linalg.norm(self.A @ self.B - self.B @ self.A + self.c * self.B))

    def complex_structure_residual(self) -> float:
        """Failure of A, B to preserve the complex-structure matrix of the frame."""
        if self.constants is None:
            return 0.0
        M = complex_structure_matrix(self.constants.alpha, self.constants.beta)
        return float(max(np.linalg.norm(X @ M - M @ X) for X in (self.A, self.B)))


def assemble_maurer_cartan(k: InvariantConstants) -> MaurerCartan:
    if abs(k.b) >= 1e-12:
        raise GaugeNotDiagonal(f"b = {k.b!r}: assembly needs the diagonal gauge")
    if abs(math.cos(k.beta)) <= TAN_GUARD:
        raise DomainGuard("tan(beta) guard: cos(beta) ~ 0")
    forms = minimal_connection_forms(k.alpha, k.beta, k.a, 0.0, 0.0, 0.0, 0.0, 0.0)
    A = np.zeros((6, 6))
    B = np.zeros((6, 6))
    entries = {(0, 1): (1.0, 0.0), (0, 2): (0.0, 1.0)}
    entries.update({jk: (float(p[0]), float(p[1])) for jk, p in forms.items()})
    for (j, kk), (p, q) in entries.items():
        A[j, kk], A[kk, j] = p, -p
        B[j, kk], B[kk, j] = q, -q
    return MaurerCartan(A, B, k.c, k)


def complex_structure_matrix(alpha: float, beta: float) -> np.ndarray:
    """M[j, k] = <i e_j, e_k> in the adapted frame."""
    sa, ca, sb, cb = math.sin(alpha), math.cos(alpha), math.sin(beta), math.cos(beta)
    z, e1, e2, e3, e4, e5 = np.eye(6)
    v = sb * e2 - cb * e5
    iv = sa * e4 - ca * e1
    ie1 = ca * sb * e2 + sa * e3 - ca * cb * e5
    ie2 = -cb * z - ca * sb * e1 + sa * sb * e4
    ie3 = -e1 / sa - (ca / sa) * iv
    ie4 = (ca / sa) * ie1 - v / sa
    ie5 = -z / sb - (cb / sb) * ie2
    return np.array([cb * e2 + sb * e5, ie1, ie2, ie3, ie4, ie5])


def initial_frame(alpha: float, beta: float) -> np.ndarray:
    """An adapted frame at z = (1, 0, 0) with the given angles (rows realified)."""
    sa, ca, sb, cb = math.sin(alpha), math.cos(alpha), math.sin(beta), math.cos(beta)
    z = np.array([1, 0, 0], complex)
    xi = 1j * z
    e1 = np.array([0, 1, 0], complex)
    w = np.array([0, 0, 1], complex)
    v = ca * 1j * e1 + sa * w
    e2 = sb * v + cb * xi
    e3 = (1j * e1 - ca * v) / sa
    e4 = (ca * e1 + 1j * v) / sa
    e5 = (xi - cb * e2) / sb
    return realify(np.array([z, e1, e2, e3, e4, e5]))


# --------------------------------------------------------------------------
# Frame integration
# --------------------------------------------------------------------------


def expm_antisymmetric(X: np.ndarray, t) -> np.ndarray:
    """exp(t X) for real antisymmetric X via the eigenbasis of the Hermitian i X."""
    w, U = np.linalg.eigh(1j * X)
    t = np.asarray(t, float)
    phase = np.exp(-1j * t[..., None] * w)
    return np.real(np.einsum("ij,...j,kj->...ik", U, phase, U.conj()))


def _taylor4(X: np.ndarray) -> np.ndarray:
    """One classical RK4 step for the constant-coefficient ODE F' = X F."""
    I = np.eye(X.shape[-1])
    X2 = X @ X
    return I + X + X2 / 2 + X2 @ X / 6 + X2 @ X2 / 24


def _reorth(F: np.ndarray) -> tuple[np.ndarray, int]:
    err = np.linalg.norm(F @ np.swapaxes(F, -1, -2) - np.eye(6), axis=(-2, -1))
    bad = err > REORTH_TOL
    if not np.any(bad):
        return F, 0
    U, _, Vt = np.linalg.svd(F[bad])
    F = F.copy()
    F[bad] = U @ Vt
    return F, int(np.count_nonzero(bad))


@dataclass
class Integration:
    grid: Grid
    frames: np.ndarray  # (n_u, n_v, 6, 6)
    method: str
    path_residual: float
    reorth_count: int = 0
    periods: dict = field(default_factory=dict)

    @property
    def z(self) -> np.ndarray:
        F = self.frames[..., 0, :]
        return F[..., 0::2] + 1j * F[..., 1::2]

    @property
    def orthogonality_residual(self) -> float:
        F = self.frames
        return float(np.max(np.linalg.norm(F @ np.swapaxes(F, -1, -2) - np.eye(6), axis=(-2, -1))))

    @property
    def sphere_residual(self) -> float:
        return float(np.max(np.abs(np.linalg.norm(self.z, axis=-1) - 1)))

    def to_csv(self, path: str | Path) -> None:
        z = self.z
        cols = {}
        for k in range(3):
            cols[f"re_z{k + 1}"] = z[..., k].real
            cols[f"im_z{k + 1}"] = z[..., k].imag
        write_grid_csv(path, self.grid, cols)

    def to_json(self, include_points: bool = False) -> dict:
        out = {
            "method": self.method,
            "shape": list(self.grid.shape),
            "path_residual": self.path_residual,
            "orthogonality_residual": self.orthogonality_residual,
            "sphere_residual": self.sphere_residual,
            "reorth_count": self.reorth_count,
            "periods": self.periods,
        }
        if include_points:
            z = self.z
            out["u"] = [float(x) for x in self.grid.u]
            out["v"] = [float(x) for x in self.grid.v]
            out["z"] = [[[float(c.real), float(c.imag)] for c in row] for row in z.reshape(-1, 3)]
        return out


def _frequencies(X: np.ndarray) -> list[float]:
    w = np.linalg.eigvalsh(1j * X)
    return sorted(float(x) for x in w if x > 1e-12)


def commensurability(freqs: list[float], max_den: int = 1000, tol: float = 1e-9) -> dict:
    """Rationality test of frequency ratios; period 2 pi q / f0 when all ratios are p/q."""
    if not freqs:
        return {"frequencies": [], "commensurable": True, "ratios": [], "period": None}
    f0 = freqs[0]
    ratios = [Fraction(f / f0).limit_denominator(max_den) for f in freqs]
    ok = all(abs(float(r) - f / f0) < tol for r, f in zip(ratios, freqs))
    period = None
    if ok:
        q = math.lcm(*(r.denominator for r in ratios))
        period = 2 * math.pi * q / f0
    return {"frequencies": freqs, "commensurable": ok, "ratios": [str(r) for r in ratios], "period": period}


def integrate_frame(mc: MaurerCartan, F0: np.ndarray, grid: Grid, method: str = "auto",
                    substeps: int = 16) -> Integration:
    """Integrate dF = (A theta^1 + B theta^2) F over the grid.

    ``expm``: F = exp(uA) exp(vB) F0, valid when c = 0 and [A, B] = 0.
    ``rk4``: theta^1 = du, theta^2 = e^{-cu} dv; u-line from F0 at v = v_0,
    then every v-line from its u-line value (batched), ``substeps`` RK4
    steps per grid interval.  The path residual compares against the
    opposite ordering (v-line first, then u-lines).
    """
    u = grid.u - grid.u[0]
    v = grid.v - grid.v[0]
    exp_ok = abs(mc.c) < 1e-12 and mc.compat_residual < 1e-8
    if method == "auto":
        method = "expm" if exp_ok else "rk4"
    if method == "expm":
        if not exp_ok:
            raise IncompatibleConnection(
                f"exponential path needs c = 0 and [A, B] = 0 (c = {mc.c:.3g}, residual {mc.compat_residual:.3g})")
        EA = expm_antisymmetric(mc.A, u)
        EB = expm_antisymmetric(mc.B, v)
        F = np.einsum("aij,bjk,kl->abil", EA, EB, F0)
        G = np.einsum("bij,ajk,kl->abil", EB, EA, F0)
        path = float(np.max(np.abs(F - G)))
        reorth = 0
    elif method == "rk4":
        F, reorth = _rk4_grid(mc, F0, u, v, substeps, u_first=True)
        G, r2 = _rk4_grid(mc, F0, u, v, substeps, u_first=False)
        reorth += r2
        path = float(np.max(np.abs(F - G)))
    else:
        raise ValueError(f"unknown integration method {method!r}")
    if path > 1e-6:
        raise IncompatibleConnection(f"path-independence residual {path:.3g} exceeds 1e-6")
    periods = {"u": commensurability(_frequencies(mc.A)), "v": commensurability(_frequencies(mc.B))}
    return Integration(grid, F, method, path, reorth, periods)


def _substeps(X: np.ndarray, span: float, minimum: int) -> int:
    """Substeps per interval keeping each step's generator below RK4_MAX_STEP."""
    need = math.ceil(np.linalg.norm(X, 2) * abs(span) / RK4_MAX_STEP)
    if need > RK4_MAX_SUBSTEPS:
        raise IncompatibleConnection(f"RK4 path needs {need} substeps per interval; gauge factor too large")
    return max(minimum, need)


def _rk4_grid(mc: MaurerCartan, F0, u, v, substeps, u_first):
    du = np.diff(u)
    dv = np.diff(v)
    g = np.exp(-mc.c * u)
    substeps_u = _substeps(mc.A, float(np.max(np.abs(du), initial=0.0)), substeps)
    substeps_v = _substeps(mc.B, float(np.max(g) * np.max(np.abs(dv), initial=0.0)), substeps)
    reorth = 0
    n_u, n_v = len(u), len(v)
    F = np.empty((n_u, n_v, 6, 6))
    if u_first:
        line = [F0]
        for d in du:
            line.append(_steps(mc.A * (d / substeps_u), line[-1], substeps_u))
        cur = np.array(line)
        cur, r = _reorth(cur)
        reorth += r
        F[:, 0] = cur
        for j, d in enumerate(dv):
            step = np.stack([_taylor4(mc.B * (gi * d / substeps_v)) for gi in g])
            nxt = cur
            for _ in range(substeps_v):
                nxt = step @ nxt
            nxt, r = _reorth(nxt)
            reorth += r
            F[:, j + 1] = cur = nxt
    else:
        line = [F0]
        for d in dv:
            line.append(_steps(mc.B * (g[0] * d / substeps_v), line[-1], substeps_v))
        cur = np.array(line)
        cur, r = _reorth(cur)
        reorth += r
        F[0] = cur
        for i, d in enumerate(du):
            step = _taylor4(mc.A * (d / substeps_u))
            nxt = cur
            for _ in range(substeps_u):
                nxt = step @ nxt
            nxt, r = _reorth(nxt)
            reorth += r
            F[i + 1] = cur = nxt
    return F, reorth


def _steps(X, F, n):
    P = _taylor4(X)
    for _ in range(n):
        F = P @ F
    return F


# --------------------------------------------------------------------------
# Closed-form immersions
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ModeImmersion:
    """z(u, v) = sum_m w_m exp(i (lam_m u + mu_m v)) with w_m in C^3.

    Exact for the exponential path: exp(u A) exp(v B) F0 acts on the
    position row through commuting anti-Hermitian 3x3 matrices.
    """

    lam: np.ndarray
    mu: np.ndarray
    w: np.ndarray  # (3 modes, 3 components)
    u0: float = 0.0
    v0: float = 0.0

    def jet(self, u, v) -> Jet2:
        u = np.asarray(u, float) - self.u0
        v = np.asarray(v, float) - self.v0
        u, v = np.broadcast_arrays(u, v)
        e = np.exp(1j * (u[..., None] * self.lam + v[..., None] * self.mu))  # (..., m)
        comb = lambda c: np.einsum("...m,mk->...k", e * c, self.w)  # noqa: E731
        il, im = 1j * self.lam, 1j * self.mu
        return Jet2(comb(1.0), comb(il), comb(im), comb(il * il), comb(il * im), comb(im * im))

    def to_surface(self) -> SurfaceAST:
        """Equivalent expression-language surface (numbers as parameters)."""
        params = {}
        comps = []
        for m in range(3):
            params[f"lam{m + 1}"] = float(self.lam[m])
            params[f"mu{m + 1}"] = float(self.mu[m])
        for k in range(3):
            terms = []
            for m in range(3):
                params[f"wr{k + 1}{m + 1}"] = float(self.w[m, k].real)
                params[f"wi{k + 1}{m + 1}"] = float(self.w[m, k].imag)
                phase = f"lam{m + 1}*(u - {self.u0!r}) + mu{m + 1}*(v - {self.v0!r})"
                terms.append(f"(wr{k + 1}{m + 1} + wi{k + 1}{m + 1}*i)*exp(i*({phase}))")
            comps.append(" + ".join(terms))
        return surface_from_components(comps, params)


def mode_immersion(mc: MaurerCartan, F0: np.ndarray, u0: float = 0.0, v0: float = 0.0) -> ModeImmersion:
    """Closed-form position map of the exponential path (requires c = 0, [A, B] = 0)."""
    if abs(mc.c) >= 1e-12 or mc.compat_residual >= 1e-8:
        raise IncompatibleConnection("closed-form modes need commuting generators with c = 0")
    # frame rows transform by right multiplication; columns of C^3 by -F0^T X F0
    HA = complex_matrix(-F0.T @ mc.A @ F0)
    HB = complex_matrix(-F0.T @ mc.B @ F0)
    for H, X in ((HA, mc.A), (HB, mc.B)):
        if np.linalg.norm((-F0.T @ X @ F0) @ J0 - J0 @ (-F0.T @ X @ F0)) > 1e-10:
            raise IncompatibleConnection("generator does not preserve the complex structure")
    _, U = np.linalg.eigh(1j * (HA + math.sqrt(2) * HB))
    DA = U.conj().T @ HA @ U
    DB = U.conj().T @ HB @ U
    off = max(np.max(np.abs(D - np.diag(np.diag(D)))) for D in (DA, DB))
    if off > 1e-9:
        raise IncompatibleConnection(f"generators are not simultaneously diagonalizable ({off:.3g})")
    lam = np.real(np.diag(DA) / 1j)
    mu = np.real(np.diag(DB) / 1j)
    z0 = F0[0, 0::2] + 1j * F0[0, 1::2]
    coeff = U.conj().T @ z0
    w = (U * coeff[None, :]).T  # w[m] = coeff_m * U[:, m]
    return ModeImmersion(lam, mu, w, u0, v0)


# --------------------------------------------------------------------------
# Round trip
# --------------------------------------------------------------------------


@dataclass
class Reconstruction:
    constants: InvariantConstants
    mc: MaurerCartan
    integration: Integration
    immersion: ModeImmersion | None
    analysis: object = None  # csgeo.analysis.Analysis

    @property
    def report(self):
        return None if self.analysis is None else self.analysis.identities


def default_grid(n_u: int = 64, n_v: int = 64) -> Grid:
    return Grid.box(n_u, n_v)


def reconstruct(k: InvariantConstants, grid: Grid | None = None, method: str = "auto", substeps: int = 16,
                analyze_grid: Grid | None = None, h: float = 1e-4, richardson: bool = True,
                tolerances=None, threads: int | None = None) -> Reconstruction:
    """assemble -> integrate -> closed form -> analyze."""
    from .analysis import analyze

    grid = grid or default_grid()
    mc = assemble_maurer_cartan(k)
    F0 = initial_frame(k.alpha, k.beta)
    integ = integrate_frame(mc, F0, grid, method=method, substeps=substeps)
    imm = mode_immersion(mc, F0, float(grid.u[0]), float(grid.v[0]))
    an = analyze(imm, analyze_grid or grid, h=h, richardson=richardson, tolerances=tolerances, threads=threads)
    return Reconstruction(k, mc, integ, imm, an)


def roundtrip_verify(k: InvariantConstants, grid: Grid | None = None, **kw):
    """Identity report of the reconstructed surface (raises if analysis failed)."""
    rec = reconstruct(k, grid, **kw)
    if rec.analysis.error is not None:
        raise rec.analysis.error
    return rec.report
