"""Heisenberg group arithmetic in exponential coordinates.

A point of H^n is stored as a float array whose last axis has length 2n+1:
the first 2n entries are the horizontal coordinate z, the last one is the
height t.  Every function accepts a single point or a stack of points and
broadcasts over the leading axes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, DegenerateRatio, InfiniteAngle

FRAME_TOL = 1e-10


def _dim_n(p: np.ndarray) -> int:
    d = p.shape[-1]
    if d < 3 or d % 2 == 0:
        raise ContractViolation(f"point dimension {d} is not 2n+1 with n >= 1")
    return (d - 1) // 2


def as_points(p, n: int | None = None) -> np.ndarray:
    arr = np.asarray(p, dtype=float)
    if arr.ndim == 0:
        raise ContractViolation("a point needs 2n+1 coordinates")
    m = _dim_n(arr)
    if n is not None and m != n:
        raise ContractViolation(f"expected points of H^{n}, got H^{m}")
    if not np.all(np.isfinite(arr)):
        raise ContractViolation("point coordinates must be finite")
    return arr


def hpoint(z, t: float) -> np.ndarray:
    """Build a single point from its horizontal part and height."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    return as_points(np.concatenate([z, [float(t)]]))


def identity(n: int) -> np.ndarray:
    return np.zeros(2 * n + 1)


@dataclass(frozen=True)
class AmbientGroup:
    """Dimension data (n, k) with the standing restriction 1 <= k <= n."""

    n: int
    k: int = 1

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ContractViolation(f"n must be a positive integer, got {self.n}")
        if int(self.k) != self.k or not 1 <= self.k <= self.n:
            raise ContractViolation(f"need 1 ≤ k ≤ n, got k={self.k}, n={self.n}")

    @property
    def dim(self) -> int:
        return 2 * self.n + 1


def symplectic_matrix(n: int) -> np.ndarray:
    """J with omega(z, w) = z^T J w / 2."""
    J = np.zeros((2 * n, 2 * n))
    J[:n, n:] = np.eye(n)
    J[n:, :n] = -np.eye(n)
    return J


def omega(z, w) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    w = np.asarray(w, dtype=float)
    if z.shape[-1] != w.shape[-1] or z.shape[-1] % 2:
        raise ContractViolation("omega needs two vectors of the same even length")
    n = z.shape[-1] // 2
    return 0.5 * np.sum(z[..., :n] * w[..., n:] - z[..., n:] * w[..., :n], axis=-1)


def mul(p, q) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape[-1] != q.shape[-1]:
        raise ContractViolation("group product of points from different groups")
    _dim_n(p)
    z = p[..., :-1] + q[..., :-1]
    t = p[..., -1] + q[..., -1] + omega(p[..., :-1], q[..., :-1])
    return np.concatenate([z, t[..., None]], axis=-1)


def inverse(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    _dim_n(p)
    return -p


def koranyi_norm(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    z2 = np.sum(p[..., :-1] ** 2, axis=-1)
    return (z2 * z2 + 16.0 * p[..., -1] ** 2) ** 0.25


def dist(p, q) -> np.ndarray:
    """d(p, q) = ||q^{-1} p||, computed without forming the product."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape[-1] != q.shape[-1]:
        raise ContractViolation("distance between points from different groups")
    dz = p[..., :-1] - q[..., :-1]
    dt = p[..., -1] - q[..., -1] - omega(q[..., :-1], p[..., :-1])
    z2 = np.sum(dz * dz, axis=-1)
    return (z2 * z2 + 16.0 * dt * dt) ** 0.25


def pairwise_dist(P, Q=None, chunk: int = 2048) -> np.ndarray:
    """Matrix of Korányi distances d(P[i], Q[j])."""
    P = np.asarray(P, dtype=float)
    Q = P if Q is None else np.asarray(Q, dtype=float)
    out = np.empty((len(P), len(Q)))
    for s in range(0, len(P), chunk):
        out[s:s + chunk] = dist(P[s:s + chunk, None, :], Q[None, :, :])
    return out


def dilate(p, r: float) -> np.ndarray:
    if not r > 0:
        raise ContractViolation(f"dilation factor must be positive, got {r}")
    p = np.asarray(p, dtype=float)
    out = p * r
    out[..., -1] = p[..., -1] * r * r
    return out


def pi(p) -> np.ndarray:
    return np.asarray(p, dtype=float)[..., :-1]


def pi_t(p) -> np.ndarray:
    return np.asarray(p, dtype=float)[..., -1]


# --- isotropic frames and planes -------------------------------------------

def _check_frame(basis: np.ndarray, tol: float = FRAME_TOL) -> None:
    k, d = basis.shape
    if d % 2 or d < 2:
        raise ContractViolation("frame vectors must live in R^{2n}")
    n = d // 2
    if not 1 <= k <= n:
        raise ContractViolation(f"need 1 ≤ k ≤ n, got k={k}, n={n}")
    if not np.allclose(basis @ basis.T, np.eye(k), atol=tol, rtol=0):
        raise ContractViolation("frame is not orthonormal")
    J = symplectic_matrix(n)
    if not np.allclose(basis @ J @ basis.T, 0.0, atol=tol, rtol=0):
        raise ContractViolation("frame is not isotropic")


@dataclass(frozen=True, eq=False)
class IsotropicFrame:
    """k orthonormal rows spanning an isotropic subspace of R^{2n}."""

    basis: np.ndarray

    def __post_init__(self):
        b = np.array(self.basis, dtype=float, copy=True)
        if b.ndim == 1:
            b = b[None, :]
        _check_frame(b)
        b.setflags(write=False)
        object.__setattr__(self, "basis", b)

    @property
    def k(self) -> int:
        return self.basis.shape[0]

    @property
    def n(self) -> int:
        return self.basis.shape[1] // 2

    def project(self, z) -> np.ndarray:
        """Orthogonal projection of horizontal vectors onto the span."""
        z = np.asarray(z, dtype=float)
        return (z @ self.basis.T) @ self.basis

    def coords(self, z) -> np.ndarray:
        return np.asarray(z, dtype=float) @ self.basis.T


def frame_from_complex(Z) -> IsotropicFrame:
    """Isotropic frame from an n x k complex matrix (columns need not be orthonormal).

    Complex-orthonormal columns u_j give real vectors (Re u_j, Im u_j) that are
    orthonormal and isotropic, because Im<u, v> = 2 omega(u, v).
    """
    Z = np.asarray(Z, dtype=complex)
    if Z.ndim == 1:
        Z = Z[:, None]
    Q, R = np.linalg.qr(Z)
    if np.min(np.abs(np.diag(R))) < 1e-12:
        raise ContractViolation("complex frame parameters are rank deficient")
    return IsotropicFrame(np.hstack([Q.real.T, Q.imag.T]))


def line_frame(angle: float) -> IsotropicFrame:
    """Horizontal direction (cos a, sin a) in H^1."""
    return IsotropicFrame(np.array([[np.cos(angle), np.sin(angle)]]))


def random_isotropic_frame(n: int, k: int, rng) -> IsotropicFrame:
    Z = rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k))
    return frame_from_complex(Z)


@dataclass(frozen=True, eq=False)
class HorizontalPlane:
    """The affine horizontal plane base . (span(frame) x {0})."""

    base: np.ndarray
    frame: IsotropicFrame

    def __post_init__(self):
        b = np.array(as_points(self.base), dtype=float, copy=True)
        if b.ndim != 1:
            raise ContractViolation("plane base must be a single point")
        if not isinstance(self.frame, IsotropicFrame):
            object.__setattr__(self, "frame", IsotropicFrame(self.frame))
        if _dim_n(b) != self.frame.n:
            raise ContractViolation("plane base and frame live in different groups")
        b.setflags(write=False)
        object.__setattr__(self, "base", b)

    @classmethod
    def subgroup(cls, frame) -> "HorizontalPlane":
        frame = frame if isinstance(frame, IsotropicFrame) else IsotropicFrame(frame)
        return cls(identity(frame.n), frame)

    @property
    def n(self) -> int:
        return self.frame.n

    @property
    def k(self) -> int:
        return self.frame.k

    def point(self, s) -> np.ndarray:
        """base . (sum s_i v_i, 0); s may be a stack of coefficient vectors."""
        s = np.asarray(s, dtype=float)
        if s.ndim == 0 or s.shape[-1] != self.k:
            s = s[..., None]
        z = s @ self.frame.basis
        v = np.concatenate([z, np.zeros(z.shape[:-1] + (1,))], axis=-1)
        return mul(self.base, v)

    def rebased(self, s) -> "HorizontalPlane":
        return HorizontalPlane(self.point(s), self.frame)

    def params(self) -> list[float]:
        return [*self.base.tolist(), *self.frame.basis.ravel().tolist()]


@dataclass(frozen=True, eq=False)
class Rotation:
    """z -> A z with A orthogonal and omega-preserving; t is unchanged."""

    A: np.ndarray

    def __post_init__(self):
        A = np.array(self.A, dtype=float, copy=True)
        d = A.shape[0]
        if A.shape != (d, d) or d % 2:
            raise ContractViolation("rotation matrix must be 2n x 2n")
        if not np.allclose(A.T @ A, np.eye(d), atol=FRAME_TOL, rtol=0):
            raise ContractViolation("rotation matrix is not orthogonal")
        J = symplectic_matrix(d // 2)
        if not np.allclose(A.T @ J @ A, J, atol=FRAME_TOL, rtol=0):
            raise ContractViolation("rotation matrix does not preserve omega")
        A.setflags(write=False)
        object.__setattr__(self, "A", A)

    @classmethod
    def from_unitary(cls, U) -> "Rotation":
        U = np.asarray(U, dtype=complex)
        return cls(np.block([[U.real, -U.imag], [U.imag, U.real]]))

    @classmethod
    def planar(cls, angle: float) -> "Rotation":
        return cls.from_unitary(np.array([[np.exp(1j * angle)]]))

    @classmethod
    def random(cls, n: int, rng) -> "Rotation":
        Z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        Q, R = np.linalg.qr(Z)
        Q = Q * (np.diag(R) / np.abs(np.diag(R)))
        return cls.from_unitary(Q)

    def apply_vectors(self, z) -> np.ndarray:
        return np.asarray(z, dtype=float) @ self.A.T

    def apply_frame(self, frame: IsotropicFrame) -> IsotropicFrame:
        return IsotropicFrame(frame.basis @ self.A.T)


def rotate(R: Rotation, p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    out = p.copy()
    out[..., :-1] = R.apply_vectors(p[..., :-1])
    return out


# --- projections ----------------------------------------------------------

def _plane(target) -> HorizontalPlane:
    if isinstance(target, HorizontalPlane):
        return target
    if isinstance(target, IsotropicFrame):
        return HorizontalPlane.subgroup(target)
    raise ContractViolation("projection target must be a plane or a frame")


def project_plane(p, target) -> np.ndarray:
    """Horizontal projection P_V(y) = x . P_{V0}(x^{-1} y)."""
    V = _plane(target)
    p = as_points(p, V.n)
    u = mul(inverse(V.base), p)
    w = V.frame.project(u[..., :-1])
    v = np.concatenate([w, np.zeros(w.shape[:-1] + (1,))], axis=-1)
    return mul(V.base, v)


def project_complement(p, target) -> np.ndarray:
    """P_W(y) = P_V(y)^{-1} . y; for a subgroup this is
    (pi_perp z, t - omega(pi_V z, pi_perp z))."""
    V = _plane(target)
    p = as_points(p, V.n)
    return mul(inverse(project_plane(p, V)), p)


def project(p, target):
    """Dispatch: "z" for pi, "t" for pi_t, a plane/frame for P_V."""
    if isinstance(target, str):
        if target == "z":
            return pi(p)
        if target == "t":
            return pi_t(p)
        if target == "W":
            raise ContractViolation("complement projection needs a plane")
        raise ContractViolation(f"unknown projection {target!r}")
    return project_plane(p, target)


# --- distance to a plane --------------------------------------------------

def _depressed_cubic_root(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Unique real root of x^3 + p x + q with p >= 0.

    With u^3 = |q|/2 + sqrt(q^2/4 + p^3/27) and v = p/(3u) one has
    u^3 - v^3 = |q|, so the root -sign(q)(u - v) equals
    -q / (u^2 + uv + v^2), which is free of cancellation.
    """
    disc = np.sqrt(0.25 * q * q + p ** 3 / 27.0)
    u = np.cbrt(0.5 * np.abs(q) + disc)
    with np.errstate(divide="ignore", invalid="ignore"):
        v = p / (3.0 * u)
        x = -q / (u * u + u * v + v * v)
    return np.where(u > 0, x, 0.0)


def _plane_residuals(y: np.ndarray, base: np.ndarray, basis: np.ndarray):
    """Squared horizontal offset alpha, in-plane coords, and the reduced
    one-dimensional problem data (gamma, tau') for every point."""
    n = basis.shape[1] // 2
    bz = base[:-1]
    w = y[..., :-1] - bz
    tau = y[..., -1] - base[-1] - omega(bz, y[..., :-1])
    wv = w @ basis.T
    wp = w - wv @ basis
    alpha = np.sum(wp * wp, axis=-1)
    J = symplectic_matrix(n)
    c = 0.5 * (w @ J.T) @ basis.T
    gamma = np.sqrt(np.sum(c * c, axis=-1))
    tau_r = tau - np.sum(c * wv, axis=-1)
    return alpha, gamma, tau_r


def dist_to_plane_raw(y, base, basis) -> np.ndarray:
    """Array version of dist_to_plane without validation."""
    alpha, gamma, tau_r = _plane_residuals(np.asarray(y, dtype=float), base, basis)
    lam = _depressed_cubic_root(alpha + 8.0 * gamma * gamma, -8.0 * gamma * tau_r)
    f = (alpha + lam * lam) ** 2 + 16.0 * (tau_r - gamma * lam) ** 2
    return f ** 0.25


def horizontal_offset_raw(y, base, basis) -> np.ndarray:
    """Euclidean distance from pi(y) to the affine subspace pi(V)."""
    y = np.asarray(y, dtype=float)
    w = y[..., :-1] - base[:-1]
    wp = w - (w @ basis.T) @ basis
    return np.sqrt(np.sum(wp * wp, axis=-1))


def dist_to_plane(y, V: HorizontalPlane, tol: float = 1e-10) -> np.ndarray:
    """inf_s d(y, base . (sum s_i v_i, 0)).

    Writing u = base^{-1} y = (w, tau), the objective in s is
    (|w_perp|^2 + |s - w_V|^2)^2 + 16 (tau - c.s)^2 with c = J-twisted
    in-plane coefficients.  Only the component of s - w_V along c matters,
    which leaves a convex quartic in one variable whose critical point is
    the unique real root of a depressed cubic.
    """
    if not tol > 0:
        raise ContractViolation("tolerance must be positive")
    y = as_points(y, V.n)
    return dist_to_plane_raw(y, V.base, V.frame.basis)


def euclid_dist_to_plane(y, V: HorizontalPlane) -> np.ndarray:
    y = as_points(y, V.n)
    return horizontal_offset_raw(y, V.base, V.frame.basis)


# --- angles and graphs ----------------------------------------------------

def angle(V1, V2) -> float:
    """Smallest C >= 1 with |x - y| <= C |proj(x) - proj(y)| on pi(V1),
    the projection being onto the direction space of pi(V2)."""
    F1 = _plane(V1).frame.basis
    F2 = _plane(V2).frame.basis
    if F1.shape != F2.shape:
        raise ContractViolation("angle between planes of different dimension")
    smin = np.linalg.svd(F2 @ F1.T, compute_uv=False).min()
    if smin < 1e-12:
        raise InfiniteAngle("direction spaces meet orthogonally")
    if smin >= 1.0 - 4 * np.finfo(float).eps:
        return 1.0
    return 1.0 / smin


def graph_point(v, phi) -> np.ndarray:
    return mul(v, phi)


def intrinsic_lip_constant(graph_points, V, domain_points=None,
                           tol: float = 1e-10) -> float:
    """Largest ||P_W(q)|| / ||P_V(q)|| over q = Phi(v')^{-1} Phi(v).

    graph_points may be an array of Phi(v) values or a sequence of
    (v, Phi(v)) pairs.  When the domain points are known they are checked to
    lie in V and to be the P_V-projection of the graph values.
    """
    plane = _plane(V)
    if not isinstance(graph_points, np.ndarray) and len(graph_points) and \
            isinstance(graph_points[0], (tuple, list)) and len(graph_points[0]) == 2:
        domain_points = np.array([a for a, _ in graph_points], dtype=float)
        graph_points = np.array([b for _, b in graph_points], dtype=float)
    G = as_points(graph_points, plane.n)
    if G.ndim != 2 or len(G) < 2:
        raise ContractViolation("need at least two graph samples")
    sub = HorizontalPlane.subgroup(plane.frame)
    G0 = mul(inverse(plane.base), G)
    if domain_points is not None:
        D0 = mul(inverse(plane.base), as_points(domain_points, plane.n))
        if np.max(np.abs(project_plane(G0, sub) - D0)) > tol * (1 + np.max(np.abs(G0))):
            raise ContractViolation("graph values are not of the form v . phi(v)")
    basis = plane.frame.basis
    best = 0.0
    scale = max(1.0, float(np.max(koranyi_norm(G0))))
    # components below the rounding level of the inputs are treated as zero,
    # otherwise a square root turns 1e-16 height noise into 1e-8 norms
    zfloor = 64 * np.finfo(float).eps * scale
    tfloor = zfloor * scale
    for i in range(1, len(G0)):
        q = mul(inverse(G0[:i]), G0[i])
        z = q[:, :-1]
        a = z @ basis.T @ basis
        b = z - a
        b = np.where(np.abs(b) <= zfloor, 0.0, b)
        hv = np.sqrt(np.sum(a * a, axis=-1))
        tw = q[:, -1] - omega(a, b)
        tw = np.where(np.abs(tw) <= tfloor, 0.0, tw)
        b2 = np.sum(b * b, axis=-1)
        hw = (b2 * b2 + 16.0 * tw * tw) ** 0.25
        small = hv <= 1e-14 * scale
        if np.any(small & (hw > 1e-14 * scale)):
            raise DegenerateRatio("graph samples with equal V-part but different values")
        ok = ~small
        if np.any(ok):
            best = max(best, float(np.max(hw[ok] / hv[ok])))
    return best


def complement_norm(q, plane) -> np.ndarray:
    """||P_W(q)|| for the subgroup with the plane's frame."""
    basis = _plane(plane).frame.basis
    q = np.asarray(q, dtype=float)
    z = q[..., :-1]
    a = z @ basis.T @ basis
    b = z - a
    tw = q[..., -1] - omega(a, b)
    b2 = np.sum(b * b, axis=-1)
    return (b2 * b2 + 16.0 * tw * tw) ** 0.25
