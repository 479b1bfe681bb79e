"""Juillet's horizontal curve: planar generations, lifts and rescaled pieces."""
from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

from . import hgroup as hg
from .errors import ContractViolation


@dataclass(frozen=True)
class CurveConfig:
    C0: float = 0.2
    max_generation: int = 8

    def __post_init__(self):
        if not 0 < self.C0 <= 0.2:
            raise ContractViolation(f"curve.C0 must lie in (0, 0.2], got {self.C0}")
        if int(self.max_generation) != self.max_generation or self.max_generation < 0:
            raise ContractViolation("curve.max_generation must be a nonnegative integer")

    def theta(self, n: int) -> float:
        if n < 1:
            raise ContractViolation("angles are indexed from n = 1")
        return self.C0 / n


def segment_lengths(cfg: CurveConfig, n: int, offset: int = 0) -> np.ndarray:
    """l_0, ..., l_n with l_0 = 2 and l_{m+1} = l_m / (4 cos theta_{offset+m+1})."""
    out = np.empty(n + 1)
    out[0] = 2.0
    for m in range(n):
        out[m + 1] = out[m] / (4.0 * math.cos(cfg.theta(offset + m + 1)))
    return out


@dataclass(frozen=True, eq=False)
class PlanarPolyline:
    vertices: np.ndarray
    constant_speed: bool = True

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float, copy=True)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 2:
            raise ContractViolation("planar polyline needs >= 2 points of R^2")
        if np.any(np.all(np.diff(v, axis=0) == 0, axis=1)):
            raise ContractViolation("consecutive vertices must be distinct")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    def segment_lengths(self) -> np.ndarray:
        return np.linalg.norm(np.diff(self.vertices, axis=0), axis=1)

    @property
    def length(self) -> float:
        return float(np.sum(self.segment_lengths()))


def _refine(v: np.ndarray, theta: float) -> np.ndarray:
    """Replace every segment a->b by four segments bent by theta.

    In the parent frame mapped to [-1, 1] the new vertices are
    (-1/2, -tan/2), (0, 0), (1/2, tan/2): the first bump goes to the right
    of the direction of travel, the second to the left.
    """
    a, b = v[:-1], v[1:]
    d = b - a
    m = np.stack([-d[:, 1], d[:, 0]], axis=1)
    h = 0.25 * math.tan(theta)
    out = np.empty((4 * len(d) + 1, 2))
    out[0:-1:4] = a
    out[1::4] = a + 0.25 * d - h * m
    out[2::4] = a + 0.5 * d
    out[3::4] = a + 0.75 * d + h * m
    out[-1] = v[-1]
    return out


def build_planar_generation(cfg: CurveConfig, n: int) -> PlanarPolyline:
    if int(n) != n or not 0 <= n <= cfg.max_generation:
        raise ContractViolation(f"generation {n} outside [0, {cfg.max_generation}]")
    v = np.array([[-1.0, 0.0], [1.0, 0.0]])
    for m in range(1, n + 1):
        v = _refine(v, cfg.theta(m))
    return PlanarPolyline(v)


@dataclass(frozen=True, eq=False)
class HorizontalPolyline:
    """Vertices in H^1 joined by horizontal straight segments.

    increments[i] is the height gained along segment i, equal to
    omega(z_i, z_{i+1}); along the segment the height is affine in arclength.
    """

    vertices: np.ndarray
    increments: np.ndarray = field(default=None)

    def __post_init__(self):
        v = np.array(hg.as_points(self.vertices, 1), dtype=float, copy=True)
        if v.ndim != 2 or len(v) < 2:
            raise ContractViolation("horizontal polyline needs >= 2 vertices")
        inc = hg.omega(v[:-1, :2], v[1:, :2]) if self.increments is None \
            else np.array(self.increments, dtype=float, copy=True)
        v.setflags(write=False)
        inc.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "increments", inc)

    def segment_lengths(self) -> np.ndarray:
        return hg.dist(self.vertices[1:], self.vertices[:-1])

    @property
    def length(self) -> float:
        return float(np.sum(self.segment_lengths()))

    def horizontality_defect(self) -> float:
        """max |t_{i+1} - t_i - omega(z_i, z_{i+1})| over segments."""
        v = self.vertices
        return float(np.max(np.abs(np.diff(v[:, 2]) - hg.omega(v[:-1, :2], v[1:, :2]))))

    def point_at(self, i: int, s: float) -> np.ndarray:
        """Point at fraction s in [0, 1] of segment i."""
        a, b = self.vertices[i], self.vertices[i + 1]
        z = a[:2] + s * (b[:2] - a[:2])
        return np.array([z[0], z[1], a[2] + s * self.increments[i]])


def lift_horizontal(pl: PlanarPolyline | np.ndarray, start=None) -> HorizontalPolyline:
    v = pl.vertices if isinstance(pl, PlanarPolyline) else np.asarray(pl, dtype=float)
    if start is None:
        start = np.array([v[0, 0], v[0, 1], 0.0])
    start = hg.as_points(start, 1)
    if np.max(np.abs(start[:2] - v[0])) > 1e-12:
        raise ContractViolation("lift start does not project onto the first vertex")
    inc = hg.omega(v[:-1], v[1:])
    t = start[2] + np.concatenate([[0.0], np.cumsum(inc)])
    return HorizontalPolyline(np.column_stack([v, t]), inc)


def juillet(cfg: CurveConfig, n: int) -> HorizontalPolyline:
    """omega_n: the lift of generation n started at (-1, 0, 0)."""
    return lift_horizontal(build_planar_generation(cfg, n), [-1.0, 0.0, 0.0])


def lambda_theta(theta: float) -> np.ndarray:
    s = math.tan(theta)
    return np.array([
        [-1.0, 0.0, 0.0],
        [-0.5, -s / 2, s / 4],
        [0.0, 0.0, s / 4],
        [0.5, s / 2, s / 4],
        [1.0, 0.0, 0.0],
    ])


def normalize_piece(points: np.ndarray, p0: np.ndarray, p1: np.ndarray) -> np.ndarray:
    """Similitude of H^1 sending p0 to (-1,0,0) and p1 to (1,0,0).

    p1 must lie on the horizontal line through p0 in the direction of
    pi(p1) - pi(p0).
    """
    d = p1[:2] - p0[:2]
    r = float(np.hypot(*d))
    rot = hg.Rotation.planar(-math.atan2(d[1], d[0]))
    q = hg.mul(hg.inverse(p0), points)
    q = hg.dilate(hg.rotate(rot, q), 2.0 / r)
    return hg.mul(np.array([-1.0, 0.0, 0.0]), q)


def gamma_piece(cfg: CurveConfig, n: int, sigma: int, depth: int = 2) -> HorizontalPolyline:
    """The rescaled piece Gamma_n of omega_{n+depth} over [sigma/4^n, (sigma+1)/4^n]."""
    if int(n) != n or n < 0:
        raise ContractViolation("generation must be a nonnegative integer")
    if int(sigma) != sigma or not 0 <= sigma < 4 ** n:
        raise ContractViolation(f"sigma={sigma} outside [0, 4^{n})")
    if depth < 1:
        raise ContractViolation("depth must be >= 1")
    # refine only the parent segment; the construction is local per segment
    big = CurveConfig(cfg.C0, max(cfg.max_generation, n))
    base = build_planar_generation(big, n).vertices
    v = base[sigma:sigma + 2]
    for m in range(n + 1, n + depth + 1):
        v = _refine(v, cfg.theta(m))
    # heights along omega_n at the parent vertex
    full_t = np.concatenate([[0.0], np.cumsum(hg.omega(base[:-1], base[1:]))])
    start = np.array([v[0, 0], v[0, 1], full_t[sigma]])
    piece = lift_horizontal(v, start)
    end = np.array([base[sigma + 1, 0], base[sigma + 1, 1], full_t[sigma + 1]])
    return HorizontalPolyline(normalize_piece(piece.vertices, start, end))


def area_distance_bound(gamma: HorizontalPolyline) -> tuple[float, float]:
    """(d(p1, p2), |pi(p1) - pi(p2)| + 2 sqrt|A|) for the endpoints of gamma."""
    v = gamma.vertices
    z = v[:, :2]
    closed = np.vstack([z, z[:1]])
    area = 0.5 * float(np.sum(closed[:-1, 0] * closed[1:, 1] - closed[1:, 0] * closed[:-1, 1]))
    lhs = float(hg.dist(v[-1], v[0]))
    rhs = float(np.linalg.norm(z[-1] - z[0])) + 2.0 * math.sqrt(abs(area))
    return lhs, rhs


def injectivity_witness(cfg: CurveConfig, n: int, sample_generation: int | None = None) -> float:
    """Smallest Euclidean distance from a vertex of generation n to curve
    samples outside its two neighbouring parameter intervals, in units of l_n.

    The curve is sampled by the vertices of a finer generation; values above
    0.6 confirm the injectivity claim at that resolution.
    """
    from scipy.spatial import cKDTree

    m = sample_generation if sample_generation is not None else min(n + 2, 10)
    big = CurveConfig(cfg.C0, max(cfg.max_generation, m))
    pts = build_planar_generation(big, m).vertices
    ln = segment_lengths(cfg, n)[-1]
    step = 4 ** (m - n)
    centers = np.arange(0, 4 ** n + 1)
    tree = cKDTree(pts)
    worst = np.inf
    for sigma, nb in zip(centers, tree.query_ball_point(pts[centers * step], 0.6 * ln)):
        lo, hi = (sigma - 1) * step, (sigma + 1) * step
        far = [j for j in nb if j < lo or j > hi]
        if far:
            d = np.min(np.linalg.norm(pts[far] - pts[sigma * step], axis=1))
            worst = min(worst, d / ln)
    return float(worst)


def write_curve(gamma: HorizontalPolyline, path) -> None:
    with open(path, "w") as fh:
        for x, y, t in gamma.vertices:
            fh.write(f"{x:.17g} {y:.17g} {t:.17g}\n")


def read_curve(path) -> HorizontalPolyline:
    data = np.loadtxt(path, ndmin=2)
    if data.shape[1] != 3:
        raise ContractViolation(f"{path}: expected three columns x y t")
    return HorizontalPolyline(data)
