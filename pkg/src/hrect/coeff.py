"""Flatness coefficients of a weighted cloud on cubes and balls.

Every coefficient is an infimum over planes.  A region is first moved to
normalized coordinates: left-translated by a metric medoid and dilated by
1/scale, so all fits happen at unit size and are exactly invariant under
left translations and dilations of the input.  Within one evaluation all
families draw from a shared pool of candidate planes, and each reported
value is the minimum over the whole pool.  The reported numbers are upper
bounds for the true infima; inequalities between families that hold plane
by plane survive this discipline.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import csv
import math

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from . import hgroup as hg
from .cloud import CubeTree, KoranyiIndex, PointCloud, approx_diameter, enlarge, exact_diameter
from .errors import ContractViolation, RegionTooLarge

FAMILIES = ("beta", "stratified", "proj_horizontal", "proj_affine", "iota")
INF = math.inf
IOTA_CAP = 2000
CHORD_CAP = 48
MAX_POINTS = 2000
DIAM_EXACT_CAP = 4000


@dataclass(frozen=True)
class CoeffKind:
    family: str
    p: float = 1

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ContractViolation(f"unknown coefficient family {self.family!r}")
        if self.p not in (1, INF):
            raise ContractViolation("p must be 1 or infinity")


@dataclass
class Region:
    """Points of a cube enlargement or a ball with their averaging weights."""

    indices: np.ndarray
    points: np.ndarray
    weights: np.ndarray
    scale: float
    kind: str
    k: int = 1
    label: str = ""

    @property
    def n(self) -> int:
        return (self.points.shape[1] - 1) // 2

    def __len__(self):
        return len(self.indices)


def cube_region(tree: CubeTree, Q, lam: float = 2.0, k: int = 1) -> Region:
    Q = tree.cubes[Q] if isinstance(Q, (int, np.integer)) else Q
    idx = enlarge(tree, Q, lam)
    P = tree.cloud.points[idx]
    w = tree.cloud.weights[idx]
    scale = exact_diameter(P) if len(P) <= DIAM_EXACT_CAP else approx_diameter(P)
    return Region(idx, P, w / w.sum(), scale, "cube", k, f"cube {Q.id} x{lam}")


def cloud_region(cloud: PointCloud, k: int = 1) -> Region:
    idx = np.arange(len(cloud))
    P = cloud.points
    scale = exact_diameter(P) if len(P) <= DIAM_EXACT_CAP else approx_diameter(P)
    return Region(idx, P, cloud.weights / cloud.weights.sum(), scale, "cube", k, "cloud")


def ball_region(cloud: PointCloud, x, r: float, k: int = 1,
                index: KoranyiIndex | None = None) -> Region:
    if not r > 0:
        raise ContractViolation("ball radius must be positive")
    index = KoranyiIndex(cloud.points) if index is None else index
    idx = index.query_ball(x, r)
    return Region(idx, cloud.points[idx], cloud.weights[idx] / r ** k, r, "ball", k,
                  f"ball r={r:.4g}")


@dataclass
class CoeffResult:
    value: float
    plane: object = None
    converged: bool = True
    kind: CoeffKind | None = None

    def plane_params(self) -> list[float]:
        if self.plane is None:
            return []
        if isinstance(self.plane, hg.HorizontalPlane):
            return self.plane.params()
        if isinstance(self.plane, hg.IsotropicFrame):
            return self.plane.basis.ravel().tolist()
        offset, basis = self.plane
        return [*np.asarray(offset).tolist(), *np.asarray(basis).ravel().tolist()]


# --- small fitting helpers ---------------------------------------------------

def _pmean(vals: np.ndarray, w: np.ndarray, p) -> float:
    if p == INF:
        return float(vals.max()) if len(vals) else 0.0
    return float(np.dot(w, vals))


def weighted_median(x: np.ndarray, w: np.ndarray) -> float:
    order = np.argsort(x, kind="stable")
    cw = np.cumsum(w[order])
    i = int(np.searchsorted(cw, 0.5 * cw[-1]))
    return float(x[order][min(i, len(x) - 1)])


def geometric_median(X: np.ndarray, w: np.ndarray, iters: int = 200) -> np.ndarray:
    if X.shape[1] == 1:
        return np.array([weighted_median(X[:, 0], w)])
    c = (w @ X) / w.sum()
    for _ in range(iters):
        d = np.maximum(np.linalg.norm(X - c, axis=1), 1e-12)
        a = w / d
        new = (a @ X) / a.sum()
        if np.linalg.norm(new - c) < 1e-13:
            break
        c = new
    return c


def enclosing_center(X: np.ndarray) -> np.ndarray:
    """Center of a small enclosing ball (exact in one dimension)."""
    if X.shape[1] == 1:
        return np.array([0.5 * (X[:, 0].min() + X[:, 0].max())])
    c = 0.5 * (X.min(axis=0) + X.max(axis=0))
    res = minimize(lambda y: np.max(np.linalg.norm(X - y, axis=1)), c, method="Nelder-Mead",
                   options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 400})
    return res.x


def _complete_basis(basis: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the complement of the row span."""
    k, d = basis.shape
    q, _ = np.linalg.qr(np.vstack([basis, np.eye(d)]).T)
    perp = q[:, k:d].T
    perp -= (perp @ basis.T) @ basis
    q2, _ = np.linalg.qr(perp.T)
    return q2.T[: d - k]


# --- plane parameterization ------------------------------------------------

class PlaneCoder:
    """Maps a parameter vector to (base, basis) in normalized coordinates.

    For n = k = 1 the parameters are (angle, normal offset, height).  In
    general they are a complex n x k matrix (isotropic frame through QR),
    a horizontal offset projected onto the frame's complement, and a height.
    """

    def __init__(self, n: int, k: int):
        self.n, self.k = n, k
        self.simple = n == 1 and k == 1

    def frame(self, x) -> np.ndarray:
        if self.simple:
            return np.array([[math.cos(x[0]), math.sin(x[0])]])
        m = self.n * self.k
        Z = (np.asarray(x[:m]) + 1j * np.asarray(x[m:2 * m])).reshape(self.n, self.k)
        Q, R = np.linalg.qr(Z)
        return np.hstack([Q.real.T, Q.imag.T])

    def decode(self, x):
        x = np.asarray(x, dtype=float)
        B = self.frame(x)
        if self.simple:
            nrm = np.array([-B[0, 1], B[0, 0]])
            z = x[1] * nrm
            t = x[2]
        else:
            m = 2 * self.n * self.k
            u = x[m:m + 2 * self.n]
            z = u - (u @ B.T) @ B
            t = x[-1]
        return np.concatenate([z, [t]]), B

    def encode(self, base: np.ndarray, B: np.ndarray) -> np.ndarray:
        bz = base[:-1]
        s = B @ bz
        # move the base inside the plane so that its z-part is orthogonal to it
        step = np.concatenate([-(s @ B), [0.0]])
        base = hg.mul(base, step)
        if self.simple:
            phi = math.atan2(B[0, 1], B[0, 0])
            nrm = np.array([-B[0, 1], B[0, 0]])
            return np.array([phi, float(base[:-1] @ nrm), base[-1]])
        Z = (B[:, :self.n] + 1j * B[:, self.n:]).T
        return np.concatenate([Z.real.ravel(), Z.imag.ravel(), base[:-1], [base[-1]]])

    def simplex_steps(self) -> np.ndarray:
        if self.simple:
            return np.array([0.15, 0.05, 0.02])
        m = 2 * self.n * self.k
        return np.concatenate([np.full(m, 0.15), np.full(2 * self.n, 0.05), [0.02]])


def coarsen(Y: np.ndarray, w: np.ndarray, max_points: int):
    """Merge weights onto a greedy net of at most max_points centers.

    Each point hands its weight to the first center covering it, so every
    mass moves by at most the returned radius.  Distances to planes are
    1-Lipschitz, which bounds the change of any p = 1 coefficient by it.
    """
    index = KoranyiIndex(Y)
    r = 1.0 / max_points
    while True:
        owner = np.full(len(Y), -1)
        centers = []
        for i in range(len(Y)):
            if owner[i] < 0:
                hit = index.query_ball(Y[i], r)
                hit = hit[owner[hit] < 0]
                owner[hit] = len(centers)
                centers.append(i)
                if len(centers) > max_points:
                    break
        if len(centers) <= max_points:
            break
        r *= 1.5
    w2 = np.bincount(owner, weights=w, minlength=len(centers))
    return np.asarray(centers), w2, r


def _initial_simplex(x0: np.ndarray, steps: np.ndarray) -> np.ndarray:
    S = np.tile(x0, (len(x0) + 1, 1))
    for i, h in enumerate(steps):
        S[i + 1, i] += h
    return S


# --- the evaluator -----------------------------------------------------------

HORIZONTAL = ("beta", "stratified", "proj_horizontal")


class RegionFit:
    """Joint evaluation of several coefficient families on one region."""

    def __init__(self, region: Region, seed: int = 0, restarts: int = 10,
                 grid: int = 24, maxiter: int = 600, max_points: int | None = MAX_POINTS):
        if region.kind not in ("cube", "ball"):
            raise ContractViolation("region kind must be cube or ball")
        self.region = region
        self.n, self.k = region.n, region.k
        if not 1 <= self.k <= self.n:
            raise ContractViolation(f"need 1 ≤ k ≤ n, got k={self.k}, n={self.n}")
        self.seed = seed
        self.restarts = restarts
        self.grid = grid
        self.maxiter = maxiter
        self.trivial = len(region) <= 1 or region.scale <= 0
        if self.trivial:
            return
        P = region.points
        self.ref = self._medoid(P, region.weights)
        Y = hg.mul(hg.inverse(P[self.ref]), P)
        self.Y = hg.dilate(Y, 1.0 / region.scale)
        self.w = region.weights
        self.coarsening = 0.0
        if max_points and len(self.Y) > max_points:
            keep, self.w, self.coarsening = coarsen(self.Y, self.w, max_points)
            self.Y = self.Y[keep]
        self.Z = self.Y[:, :-1]
        self.coder = PlaneCoder(self.n, self.k)
        self.pool: list[tuple[np.ndarray, np.ndarray]] = []
        self.converged = True

    @staticmethod
    def _medoid(P: np.ndarray, w: np.ndarray, cap: int = 256) -> int:
        sub = np.unique(np.linspace(0, len(P) - 1, min(cap, len(P))).astype(int))
        D = hg.pairwise_dist(P[sub])
        score = (D * D) @ w[sub]
        return int(sub[int(np.argmin(score))])

    # plane objectives in normalized coordinates
    def metric(self, base, B) -> np.ndarray:
        return hg.dist_to_plane_raw(self.Y, base, B)

    def offset(self, base, B) -> np.ndarray:
        return hg.horizontal_offset_raw(self.Y, base, B)

    def family_value(self, family: str, p, base, B) -> float:
        if family == "beta":
            return _pmean(self.metric(base, B), self.w, p)
        if family == "proj_horizontal":
            return _pmean(self.offset(base, B), self.w, p)
        if family == "stratified":
            a = _pmean(self.offset(base, B), self.w, p)
            b = _pmean(self.metric(base, B), self.w, p)
            return (a * a + b ** 4) ** 0.25
        raise ContractViolation(family)

    def _objective(self, family, p):
        def f(x):
            base, B = self.coder.decode(x)
            if family == "stratified":
                a = _pmean(self.offset(base, B), self.w, p)
                b = _pmean(self.metric(base, B), self.w, p)
                return a * a + b ** 4
            return self.family_value(family, p, base, B)
        return f

    # seeds
    def _seed_frames(self) -> list[np.ndarray]:
        frames = []
        Zc = self.Z - self.w @ self.Z / self.w.sum()
        C = (Zc * self.w[:, None]).T @ Zc
        vals, vecs = np.linalg.eigh(C)
        top = vecs[:, ::-1][:, :self.k].T
        if self.coder.simple:
            phis = np.arange(self.grid) * math.pi / self.grid
            frames += [np.array([[math.cos(a), math.sin(a)]]) for a in phis]
            frames.append(top)
        else:
            Zc_ = (top[:, :self.n] + 1j * top[:, self.n:]).T
            try:
                frames.append(hg.frame_from_complex(Zc_).basis)
            except ContractViolation:
                pass
            rng = np.random.default_rng(self.seed)
            for _ in range(max(self.grid // 2, 4)):
                frames.append(hg.random_isotropic_frame(self.n, self.k, rng).basis)
        return frames

    def _offsets_for(self, B: np.ndarray, p) -> list[np.ndarray]:
        """Bases for a frame: one through the medoid and fitted ones."""
        d = 2 * self.n
        perp = _complete_basis(B)
        X = self.Z @ perp.T
        c = geometric_median(X, self.w) if p == 1 else enclosing_center(X)
        bases = [np.zeros(d + 1)]
        bz = c @ perp
        zi = self.Z - bz
        a = (zi @ B.T) @ B
        taus = self.Y[:, -1] - hg.omega(bz, self.Z) - hg.omega(a, zi - a)
        tau = weighted_median(taus, self.w) if p == 1 else 0.5 * (taus.min() + taus.max())
        bases.append(np.concatenate([bz, [tau]]))
        return bases

    def _seed_planes(self, p) -> list[tuple[np.ndarray, np.ndarray]]:
        out = []
        for B in self._seed_frames():
            for base in self._offsets_for(B, p):
                out.append((base, B))
        return out

    def _polish(self, family, p, starts) -> None:
        f = self._objective(family, p)
        steps = self.coder.simplex_steps()
        for base, B in starts:
            x0 = self.coder.encode(base, B)
            res = minimize(f, x0, method="Nelder-Mead",
                           options={"initial_simplex": _initial_simplex(x0, steps),
                                    "xatol": 1e-9, "fatol": 1e-13,
                                    "maxiter": self.maxiter, "maxfev": 2 * self.maxiter})
            self.converged &= bool(res.success) or res.nit >= self.maxiter
            self.pool.append(self.coder.decode(res.x))

    def _fit_horizontal(self, requests) -> None:
        ps = {p for _, p in requests} or {1}
        seeds = {p: self._seed_planes(p) for p in ps}
        for p, planes in seeds.items():
            self.pool.extend(planes)
        for family, p in requests:
            planes = seeds[p]
            scores = [self.family_value(family, p, b, B) for b, B in planes]
            best = np.argsort(scores, kind="stable")[: self.restarts]
            self._polish(family, p, [planes[i] for i in best])

    # affine projection family
    def _affine_value(self, B: np.ndarray, p, offset=None):
        """Value of the affine plane offset + span(B); the offset defaults
        to the optimal one for this direction."""
        if offset is None:
            perp = _complete_basis(B)
            X = self.Z @ perp.T
            c = geometric_median(X, self.w) if p == 1 else enclosing_center(X)
            offset = c @ perp
        r = hg.horizontal_offset_raw(self.Y, np.append(offset, 0.0), B)
        return _pmean(r, self.w, p), offset

    def _affine_directions(self, p) -> list[np.ndarray]:
        cands = []
        d = 2 * self.n
        if self.coder.simple:
            def g(phi):
                B = np.array([[math.cos(phi), math.sin(phi)]])
                return self._affine_value(B, p)[0]
            cands = [np.array([[math.cos(a), math.sin(a)]]) for a in self._scan_circle(g)]
            if p == 1 and len(self.Z) <= CHORD_CAP:
                # an optimal L1 line contains two points, so chords are exact candidates
                i, j = np.triu_indices(len(self.Z), 1)
                D = self.Z[j] - self.Z[i]
                L = np.hypot(D[:, 0], D[:, 1])
                cands += [(D[q] / L[q])[None, :] for q in np.flatnonzero(L > 1e-15)]
        else:
            for start in self._irls_starts():
                cands.append(self._irls(start) if p == 1 else start)

            def g(x):
                Q, _ = np.linalg.qr(np.asarray(x).reshape(d, self.k))
                return self._affine_value(Q.T, p)[0]
            for B in list(cands)[: self.restarts]:
                res = minimize(g, B.T.ravel(), method="Nelder-Mead",
                               options={"xatol": 1e-9, "fatol": 1e-13, "maxiter": self.maxiter})
                Q, _ = np.linalg.qr(res.x.reshape(d, self.k))
                cands.append(Q.T)
        return cands

    def _scan_circle(self, g) -> list[float]:
        """Dense angle scan on [0, pi) refined by bounded Brent steps."""
        phis = np.arange(4 * self.grid) * math.pi / (4 * self.grid)
        vals = [g(a) for a in phis]
        h = math.pi / (4 * self.grid)
        out = []
        for i in np.argsort(vals, kind="stable")[: self.restarts]:
            res = minimize_scalar(g, bounds=(phis[i] - h, phis[i] + h), method="bounded",
                                  options={"xatol": 1e-11})
            out.append(float(res.x) if res.fun <= vals[i] else float(phis[i]))
        return out

    def _irls_starts(self):
        Zc = self.Z - self.w @ self.Z / self.w.sum()
        C = (Zc * self.w[:, None]).T @ Zc
        _, vecs = np.linalg.eigh(C)
        starts = [vecs[:, ::-1][:, :self.k].T]
        rng = np.random.default_rng(self.seed + 2)
        for _ in range(self.restarts):
            Q, _ = np.linalg.qr(rng.standard_normal((2 * self.n, self.k)))
            starts.append(Q.T)
        return starts

    def _irls(self, B: np.ndarray, iters: int = 60) -> np.ndarray:
        """Iteratively reweighted principal subspace for the L1 fit."""
        a = self.w.copy()
        for _ in range(iters):
            c = a @ self.Z / a.sum()
            Zc = self.Z - c
            C = (Zc * a[:, None]).T @ Zc
            _, vecs = np.linalg.eigh(C)
            B = vecs[:, ::-1][:, :self.k].T
            r = np.linalg.norm(Zc - (Zc @ B.T) @ B, axis=1)
            a = self.w / np.maximum(r, 1e-9)
        return B

    # iota
    def _iota_setup(self):
        m = len(self.Y)
        if m > IOTA_CAP:
            raise RegionTooLarge(f"iota region has {m} points, cap is {IOTA_CAP}")
        self._Dm = hg.pairwise_dist(self.Y)
        self._W2 = np.outer(self.w, self.w)

    def _iota_value(self, B, p):
        c = self.Z @ B.T
        sq = np.sum(c * c, 1)
        G = np.sqrt(np.maximum(sq[:, None] + sq[None, :] - 2 * c @ c.T, 0.0))
        F = np.abs(self._Dm - G)
        return (float(np.sum(self._W2 * F)) if p == 1 else float(F.max())), F

    def _iota_frames(self, p) -> list[np.ndarray]:
        if self.coder.simple:
            def g(phi):
                return self._iota_value(np.array([[math.cos(phi), math.sin(phi)]]), p)[0]
            return [np.array([[math.cos(a), math.sin(a)]]) for a in self._scan_circle(g)]
        frames = self._seed_frames()
        scores = [self._iota_value(B, p)[0] for B in frames]
        m2 = self.n * self.k

        def to_frame(x):
            Q, _ = np.linalg.qr((x[:m2] + 1j * x[m2:]).reshape(self.n, self.k))
            return np.hstack([Q.real.T, Q.imag.T])
        for i in np.argsort(scores, kind="stable")[: self.restarts]:
            Zc = (frames[i][:, :self.n] + 1j * frames[i][:, self.n:]).T
            x0 = np.concatenate([Zc.real.ravel(), Zc.imag.ravel()])
            res = minimize(lambda x: self._iota_value(to_frame(x), p)[0], x0,
                           method="Nelder-Mead",
                           options={"xatol": 1e-9, "fatol": 1e-13, "maxiter": self.maxiter})
            frames.append(to_frame(res.x))
        return frames

    # public entry
    def evaluate(self, kinds) -> dict[CoeffKind, CoeffResult]:
        kinds = [k if isinstance(k, CoeffKind) else CoeffKind(*k) for k in kinds]
        if self.trivial:
            return {k: CoeffResult(0.0, None, True, k) for k in kinds}
        out = {}
        iota_ps = sorted({k.p for k in kinds if k.family == "iota"})
        if iota_ps:
            self._iota_setup()
            frames = [B for p in iota_ps for B in self._iota_frames(p)]
            for p in iota_ps:
                vals = [self._iota_value(B, p) for B in frames]
                i = min(range(len(frames)), key=lambda j: vals[j][0])
                out[CoeffKind("iota", p)] = CoeffResult(vals[i][0], hg.IsotropicFrame(frames[i]),
                                                        True, CoeffKind("iota", p))
                # the plane through the best-behaved point with this direction
                F = vals[i][1]
                rows = F @ self.w if p == 1 else F.max(axis=1)
                self.pool.append((self.Y[int(np.argmin(rows))].copy(), frames[i]))
        req = {(k.family, k.p) for k in kinds if k.family in HORIZONTAL}
        aff_ps = sorted({k.p for k in kinds if k.family == "proj_affine"})
        if req or aff_ps:
            self._fit_horizontal(sorted(req, key=lambda r: (FAMILIES.index(r[0]), r[1])))
        for kind in kinds:
            if kind.family in HORIZONTAL:
                vals = [self.family_value(kind.family, kind.p, b, B) for b, B in self.pool]
                i = int(np.argmin(vals))
                out[kind] = CoeffResult(vals[i], self._to_plane(*self.pool[i]),
                                        self.converged, kind)
        if aff_ps:
            planes = [(b[:-1], B) for b, B in self.pool]
            for q in aff_ps:
                for B in self._affine_directions(q) + [B for _, B in self.pool]:
                    for p in aff_ps:
                        planes.append((self._affine_value(B, p)[1], B))
            for p in aff_ps:
                vals = [self._affine_value(B, p, offset=off)[0] for off, B in planes]
                i = int(np.argmin(vals))
                off, B = planes[i]
                z = self.region.points[self.ref][:-1] + self.region.scale * off
                kind = CoeffKind("proj_affine", p)
                out[kind] = CoeffResult(vals[i], (z, B), self.converged, kind)
        return {k: out[k] for k in kinds}

    def _to_plane(self, base, B) -> hg.HorizontalPlane:
        b = hg.mul(self.region.points[self.ref], hg.dilate(base, self.region.scale))
        return hg.HorizontalPlane(b, hg.IsotropicFrame(B))


def evaluate(region: Region, kinds, **opts) -> dict[CoeffKind, CoeffResult]:
    return RegionFit(region, **opts).evaluate(kinds)


def beta_horizontal(region: Region, p=1, **opts) -> CoeffResult:
    k = CoeffKind("beta", p)
    return evaluate(region, [k], **opts)[k]


def beta_stratified(region: Region, p=1, **opts) -> CoeffResult:
    k = CoeffKind("stratified", p)
    return evaluate(region, [k], **opts)[k]


def beta_projection(region: Region, p=1, family: str = "affine", **opts) -> CoeffResult:
    if family not in ("affine", "horizontal"):
        raise ContractViolation("projection family must be 'affine' or 'horizontal'")
    k = CoeffKind("proj_" + family, p)
    return evaluate(region, [k], **opts)[k]


def iota(region: Region, p=1, **opts) -> CoeffResult:
    k = CoeffKind("iota", p)
    return evaluate(region, [k], **opts)[k]


def oracle_fit(points2d, weights=None) -> tuple[float, np.ndarray, np.ndarray]:
    """Exhaustive weighted L1 line fit in the plane for at most 12 points.

    An optimal line for the sum of weighted orthogonal distances passes
    through two of the points, so enumerating point pairs (and the two
    coordinate directions through each point for coincident data) is exact.
    Returns (value, point on line, unit direction).
    """
    X = np.asarray(points2d, dtype=float)
    if X.ndim != 2 or X.shape[1] != 2 or len(X) > 12:
        raise ContractViolation("oracle_fit takes at most 12 planar points")
    w = np.ones(len(X)) if weights is None else np.asarray(weights, dtype=float)
    best = (INF, X[0], np.array([1.0, 0.0]))
    cands = []
    for i in range(len(X)):
        for j in range(i + 1, len(X)):
            d = X[j] - X[i]
            L = np.hypot(*d)
            if L > 1e-15:
                cands.append((X[i], d / L))
        cands.append((X[i], np.array([1.0, 0.0])))
        cands.append((X[i], np.array([0.0, 1.0])))
    for a, u in cands:
        r = np.abs((X[:, 0] - a[0]) * u[1] - (X[:, 1] - a[1]) * u[0])
        v = float(np.dot(w, r))
        if v < best[0] - 1e-15:
            best = (v, a, u)
    return best


# --- fields over cube trees -------------------------------------------------

@dataclass
class CoeffField:
    kind: CoeffKind
    lam: float
    values: dict[int, CoeffResult] = field(default_factory=dict)

    def __getitem__(self, cid: int) -> float:
        return self.values[cid].value

    def __contains__(self, cid) -> bool:
        return cid in self.values

    def write_csv(self, path, tree: CubeTree) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["cube_id", "generation", "coeff", "value", "plane_params"])
            name = f"{self.kind.family}_p{'inf' if self.kind.p == INF else 1}"
            for cid in sorted(self.values):
                r = self.values[cid]
                wr.writerow([cid, tree.cubes[cid].generation, name, repr(r.value),
                             *[repr(float(x)) for x in r.plane_params()]])


def coeff_fields(tree: CubeTree, kinds, lam: float = 2.0, cubes=None, k: int = 1,
                 threads: int = 1, **opts) -> dict[CoeffKind, CoeffField]:
    """Evaluate several kinds jointly on every requested cube."""
    kinds = [kk if isinstance(kk, CoeffKind) else CoeffKind(*kk) for kk in kinds]
    cubes = [Q.id for Q in tree.cubes] if cubes is None else list(cubes)
    fields = {kk: CoeffField(kk, lam) for kk in kinds}

    def job(cid):
        reg = cube_region(tree, cid, lam, k)
        return cid, evaluate(reg, kinds, seed=cid, **opts)

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(threads) as ex:
            results = list(ex.map(job, cubes))
    else:
        results = [job(c) for c in cubes]
    for cid, res in results:
        for kk, r in res.items():
            fields[kk].values[cid] = r
    return fields
