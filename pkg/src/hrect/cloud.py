"""Weighted point clouds in H^n, dyadic nets and Christ-type cube systems."""
from __future__ import annotations

from dataclasses import dataclass, field
import json
import math

import numpy as np
from scipy.spatial import cKDTree

from . import hgroup as hg
from .curve import HorizontalPolyline
from .errors import ContractViolation

EXACT_DIAM_CAP = 2000


@dataclass(frozen=True, eq=False)
class PointCloud:
    points: np.ndarray
    weights: np.ndarray
    resolution: float = 0.0

    def __post_init__(self):
        p = np.array(hg.as_points(self.points), dtype=float, copy=True)
        if p.ndim == 1:
            p = p[None, :]
        w = np.array(self.weights, dtype=float, copy=True).reshape(-1)
        if len(p) != len(w):
            raise ContractViolation("points and weights differ in length")
        if len(p) == 0:
            raise ContractViolation("empty cloud")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise ContractViolation("weights must be finite and positive")
        if not self.resolution >= 0:
            raise ContractViolation("resolution must be nonnegative")
        p.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", p)
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return len(self.points)

    @property
    def n(self) -> int:
        return (self.points.shape[1] - 1) // 2

    @property
    def mass(self) -> float:
        return math.fsum(self.weights)

    def translated(self, g) -> "PointCloud":
        return PointCloud(hg.mul(g, self.points), self.weights, self.resolution)

    def rotated(self, R: hg.Rotation) -> "PointCloud":
        return PointCloud(hg.rotate(R, self.points), self.weights, self.resolution)

    def dilated(self, r: float, k: int = 1) -> "PointCloud":
        """Dilated copy; weights scale like H^k."""
        return PointCloud(hg.dilate(self.points, r), self.weights * r ** k,
                          self.resolution * r)


def cloud_from_polyline(gamma: HorizontalPolyline, step: float) -> PointCloud:
    """Sample a horizontal polyline at arclength spacing <= step.

    Each segment is cut into equal pieces; a sample carries half the length
    of each piece it bounds, so the total mass equals the curve length.
    """
    lengths = gamma.segment_lengths()
    if not step > 0:
        raise ContractViolation("step must be positive")
    if np.any(lengths <= 0):
        raise ContractViolation("degenerate polyline segment")
    if step > lengths.min() * (1 + 1e-9):
        raise ContractViolation("step exceeds the shortest segment")
    v = gamma.vertices
    pts, pieces = [], []
    for i, L in enumerate(lengths):
        m = max(1, math.ceil(L / step - 1e-9))
        s = np.arange(m) / m
        z = v[i, :2] + s[:, None] * (v[i + 1, :2] - v[i, :2])
        pts.append(np.column_stack([z, v[i, 2] + s * gamma.increments[i]]))
        pieces.append(np.full(m, L / m))
    P = np.vstack(pts + [v[-1:]])
    h = np.concatenate(pieces)
    W = np.zeros(len(h) + 1)
    W[:-1] += h / 2
    W[1:] += h / 2
    res = float(h.max())
    return PointCloud(P, W, res)


def segment_cloud(npts: int, length: float = 1.0, angle: float = 0.0) -> PointCloud:
    """Uniform samples on a horizontal segment through the origin in H^1."""
    s = np.linspace(0.0, length, npts)
    P = np.column_stack([s * math.cos(angle), s * math.sin(angle), np.zeros(npts)])
    h = length / (npts - 1)
    w = np.full(npts, h)
    w[[0, -1]] = h / 2
    return PointCloud(P, w, h)


def sine_graph_cloud(npts: int, amplitude: float, freq: float, length: float = 1.0) -> PointCloud:
    """Samples of the horizontal lift of y = a sin(kx), 0 <= x <= length.

    The height is the exact lift from the origin,
    t(x) = (a/2) x sin(kx) + (a/k)(cos(kx) - 1); the sup-slope is a*k.
    """
    if npts < 2 or not length > 0 or not freq > 0:
        raise ContractViolation("need npts >= 2, length > 0 and freq > 0")
    x = np.linspace(0.0, length, npts)
    kx = freq * x
    y = amplitude * np.sin(kx)
    t = 0.5 * amplitude * x * np.sin(kx) + amplitude / freq * (np.cos(kx) - 1.0)
    h = length / (npts - 1)
    w = np.full(npts, h)
    w[[0, -1]] = h / 2
    return PointCloud(np.column_stack([x, y, t]), w, h)


def cantor_vertical(levels: int) -> PointCloud:
    """Midpoints of the level-L middle-half Cantor intervals on the t-axis.

    Each of the 2^L points gets weight 2^-L; an interval of length 4^-L has
    Korányi diameter 2 * 2^-L, so the cloud is 1-regular with mass 1.
    """
    if int(levels) != levels or levels < 1:
        raise ContractViolation("levels must be an integer >= 1")
    left = np.array([0.0])
    for m in range(levels):
        width = 4.0 ** -m
        left = np.concatenate([left, left + 0.75 * width])
    size = 4.0 ** -levels
    t = np.sort(left) + size / 2
    P = np.zeros((len(t), 3))
    P[:, 2] = t
    w = np.full(len(t), 2.0 ** -levels)
    return PointCloud(P, w, 2.0 * math.sqrt(3 * size))


# --- spatial index ----------------------------------------------------------

class KoranyiIndex:
    """Exact Korányi ball queries through a Euclidean box prefilter.

    After a left translation putting the first point at the origin,
    d(p, q) <= r forces |z_p - z_q| <= r and
    |t_p - t_q| <= r^2/4 + |z_q| r / 2, so a Chebyshev box with the height
    axis rescaled contains every Korányi ball.
    """

    def __init__(self, points: np.ndarray):
        self.points = np.asarray(points, dtype=float)
        self.origin = self.points[0].copy()
        self.local = hg.mul(hg.inverse(self.origin), self.points)
        z = self.local[:, :-1]
        self.rz = float(np.sqrt(np.max(np.sum(z * z, axis=1))))
        tmax = float(np.max(np.abs(self.local[:, -1])))
        self.sigma = 1.0 / max(self.rz, math.sqrt(tmax), 1e-300)
        coords = np.column_stack([z, self.sigma * self.local[:, -1]])
        self.tree = cKDTree(coords)

    def _localize(self, x):
        q = hg.mul(hg.inverse(self.origin), np.asarray(x, dtype=float))
        return q

    def _box(self, q, r):
        zq = math.sqrt(float(np.sum(q[:-1] ** 2)))
        return max(r, self.sigma * (r * r / 4 + zq * r / 2)) * (1 + 1e-12) + 1e-300

    def query_ball(self, x, r: float, return_dist: bool = False):
        q = self._localize(x)
        c = np.concatenate([q[:-1], [self.sigma * q[-1]]])
        cand = np.array(sorted(self.tree.query_ball_point(c, self._box(q, r), p=np.inf)),
                        dtype=int)
        if len(cand) == 0:
            return (cand, np.empty(0)) if return_dist else cand
        d = hg.dist(self.points[cand], np.asarray(x, dtype=float))
        keep = d <= r
        if return_dist:
            return cand[keep], d[keep]
        return cand[keep]

    def nearest(self, x, r: float):
        """Nearest point within r (lowest index on ties), or -1."""
        idx, d = self.query_ball(x, r, return_dist=True)
        if len(idx) == 0:
            return -1, math.inf
        j = int(np.argmin(d))
        return int(idx[j]), float(d[j])


def approx_diameter(points: np.ndarray, start: int = 0, sweeps: int = 4) -> float:
    """Farthest-point sweeps; a lower bound within a factor 2 of the diameter."""
    if len(points) < 2:
        return 0.0
    i, best = start, 0.0
    for _ in range(sweeps):
        d = hg.dist(points, points[i])
        j = int(np.argmax(d))
        best = max(best, float(d[j]))
        i = j
    return best


def exact_diameter(points: np.ndarray, chunk: int = 512) -> float:
    best = 0.0
    for s in range(0, len(points), chunk):
        d = hg.dist(points[s:s + chunk, None, :], points[None, :, :])
        best = max(best, float(d.max()))
    return best


def diameter(points: np.ndarray, cap: int = 4000) -> float:
    return exact_diameter(points) if len(points) <= cap else approx_diameter(points)


# --- regularity -------------------------------------------------------------

@dataclass
class RegularityProfile:
    radii: np.ndarray
    ratios: np.ndarray
    k: int
    min_ratio: float
    max_ratio: float
    median_ratio: float
    C_E: float
    slope: float
    empty_balls: int
    centers: np.ndarray | None = None

    @property
    def regular(self) -> bool:
        return self.empty_balls == 0 and abs(self.slope) < 0.25 and math.isfinite(self.C_E)


def regularity_profile(cloud: PointCloud, trials: int = 500, k: int = 1,
                       rng=None, index: KoranyiIndex | None = None) -> RegularityProfile:
    """Sample mu(B(x, r)) / r^k with x in the cloud and log-uniform r."""
    rng = np.random.default_rng(0) if rng is None else rng
    index = KoranyiIndex(cloud.points) if index is None else index
    diam = approx_diameter(cloud.points)
    lo = 10.0 * cloud.resolution
    if not 0 < lo < diam:
        raise ContractViolation("cloud too small for a regularity profile")
    xs = rng.integers(0, len(cloud), size=trials)
    rs = np.exp(rng.uniform(math.log(lo), math.log(diam), size=trials))
    ratios = np.empty(trials)
    empty = 0
    for i, (x, r) in enumerate(zip(xs, rs)):
        idx = index.query_ball(cloud.points[x], r)
        if len(idx) <= 1:
            empty += 1
        ratios[i] = cloud.weights[idx].sum() / r ** k
    lr = np.log(rs)
    slope = float(np.polyfit(lr, np.log(np.maximum(ratios, 1e-300)), 1)[0])
    mn, mx = float(ratios.min()), float(ratios.max())
    ce = max(mx, 1.0 / mn) if mn > 0 else math.inf
    return RegularityProfile(rs, ratios, k, mn, mx, float(np.median(ratios)), ce, slope, empty,
                             xs)


# --- nets -------------------------------------------------------------------

def greedy_net(index: KoranyiIndex, r: float, initial=(), order=None) -> np.ndarray:
    """Maximal r-separated subset (distinct points at distance > r) grown
    greedily in index order from the given initial centers."""
    N = len(index.points)
    covered = np.zeros(N, dtype=bool)
    centers = [int(c) for c in initial]
    for c in centers:
        covered[index.query_ball(index.points[c], r)] = True
    order = range(N) if order is None else order
    for i in order:
        if not covered[i]:
            centers.append(int(i))
            covered[index.query_ball(index.points[i], r)] = True
    return np.array(centers, dtype=int)


@dataclass
class DyadicNet:
    """Nested nets: levels[j] holds indices of Delta_j, with scale 2^-j."""

    levels: dict[int, np.ndarray]

    @property
    def js(self) -> list[int]:
        return sorted(self.levels)

    def verify(self, cloud: PointCloud) -> dict[str, bool]:
        nested = separated = covering = True
        js = self.js
        for a, b in zip(js, js[1:]):
            nested &= set(self.levels[a].tolist()) <= set(self.levels[b].tolist())
        for j in js:
            r = 2.0 ** -j
            C = cloud.points[self.levels[j]]
            if len(C) > 1:
                D = hg.pairwise_dist(C)
                np.fill_diagonal(D, np.inf)
                separated &= bool(D.min() > r)
            cov = np.full(len(cloud), np.inf)
            for s in range(0, len(C), 256):
                cov = np.minimum(cov, hg.pairwise_dist(cloud.points, C[s:s + 256]).min(axis=1))
            covering &= bool(cov.max() <= r)
        return {"nested": bool(nested), "separated": bool(separated), "covering": bool(covering)}


def farthest_first(cloud: PointCloud, r_min: float, index: KoranyiIndex | None = None):
    """Farthest-point insertion order from point 0, stopped once every point
    lies within r_min of the chosen ones.  Returns (order, insertion radii);
    ties go to the lowest index."""
    index = KoranyiIndex(cloud.points) if index is None else index
    P = cloud.points
    md = hg.dist(P, P[0])
    order, radii = [0], [math.inf]
    while True:
        i = int(np.argmax(md))
        R = float(md[i])
        if R <= r_min:
            break
        order.append(i)
        radii.append(R)
        near, d = index.query_ball(P[i], R, return_dist=True)
        md[near] = np.minimum(md[near], d)
    return np.array(order, dtype=int), np.array(radii)


def dyadic_net(cloud: PointCloud, j_max: int | None = None,
               index: KoranyiIndex | None = None) -> DyadicNet:
    """Nested nets from one farthest-first ordering: level j keeps the prefix
    whose insertion radius exceeds 2^-j.  Separation holds since each point
    was inserted farther than that from all earlier ones, covering since the
    next insertion radius is at most 2^-j, and nesting by construction.
    """
    far = float(np.max(hg.dist(cloud.points, cloud.points[0])))
    j = 0 if far == 0 else math.floor(-math.log2(far))
    while 2.0 ** -j < far:
        j -= 1
    if j_max is None:
        res = cloud.resolution if cloud.resolution > 0 else far
        j_max = max(j, math.ceil(-math.log2(res)) if res > 0 else j)
    order, radii = farthest_first(cloud, 2.0 ** -j_max, index)
    return DyadicNet({jj: order[radii > 2.0 ** -jj] for jj in range(j, j_max + 1)})


def multires_family(net: DyadicNet, A: float = 5.0) -> list[tuple[int, int, float]]:
    """(level, center index, radius A 2^-j), coarse to fine."""
    if not A > 1:
        raise ContractViolation("A must exceed 1")
    return [(j, int(c), A * 2.0 ** -j) for j in net.js for c in net.levels[j]]


# --- dyadic cubes -----------------------------------------------------------

@dataclass
class Cube:
    id: int
    generation: int
    center: int
    members: np.ndarray
    parent: int | None
    children: list[int] = field(default_factory=list)
    mass: float = 0.0
    diam: float = 0.0
    diam_upper: float = 0.0
    inner_radius: float = math.inf
    x_Q: int = -1


@dataclass
class CubeTree:
    cloud: PointCloud
    rho: float
    J0: int
    cubes: list[Cube]
    by_generation: dict[int, list[int]]
    D: float
    D_two_sided: float
    boundary_constant: float | None = None
    index: KoranyiIndex | None = field(default=None, repr=False)

    @property
    def generations(self) -> list[int]:
        return sorted(self.by_generation)

    def __getitem__(self, cid: int) -> Cube:
        return self.cubes[cid]

    def descendants(self, cid: int) -> list[int]:
        out, stack = [], [cid]
        while stack:
            c = stack.pop()
            out.append(c)
            stack.extend(reversed(self.cubes[c].children))
        return sorted(out)

    def verify(self) -> dict[str, bool]:
        """Recheck properties (1)-(4) and per-generation mass conservation."""
        N = len(self.cloud)
        w = self.cloud.weights
        total = math.fsum(w)
        part = nest = diam_ok = inner_ok = mass_ok = True
        for j in self.generations:
            ids = self.by_generation[j]
            allm = np.concatenate([self.cubes[c].members for c in ids])
            part &= len(allm) == N and np.array_equal(np.sort(allm), np.arange(N))
            mass_ok &= math.fsum(w[allm]) == total
            for c in ids:
                Q = self.cubes[c]
                if Q.parent is not None:
                    nest &= bool(np.all(np.isin(Q.members, self.cubes[Q.parent].members)))
                scale = self.rho ** j
                diam_ok &= Q.diam_upper <= self.D * scale * (1 + 1e-12)
                r = scale / self.D
                idx = self.index.query_ball(self.cloud.points[Q.x_Q], r)
                inner_ok &= bool(np.all(np.isin(idx, Q.members)))
        return {"partition": bool(part), "nested": bool(nest), "diameter": bool(diam_ok),
                "inner_ball": bool(inner_ok), "mass": bool(mass_ok)}

    def to_json(self) -> dict:
        return {
            "rho": self.rho, "J0": self.J0, "D": self.D, "D_two_sided": self.D_two_sided,
            "boundary_constant": self.boundary_constant,
            "generations": [
                {"j": j, "cubes": [
                    {"id": c, "center": self.cubes[c].center, "x_Q": self.cubes[c].x_Q,
                     "parent": self.cubes[c].parent, "children": self.cubes[c].children,
                     "mass": self.cubes[c].mass, "diam": self.cubes[c].diam,
                     "members": self.cubes[c].members.tolist()}
                    for c in self.by_generation[j]]}
                for j in self.generations],
        }


def _top_generation(diam: float, rho: float) -> int:
    j = math.ceil(math.log(diam) / math.log(rho)) - 1
    while rho ** (j + 1) > diam:
        j += 1
    while rho ** j <= diam:
        j -= 1
    return j


def _assign_level(points: np.ndarray, centers: np.ndarray, coarse: np.ndarray):
    """Each center hangs below the coarse cube containing it; each point goes
    to the nearest center hanging below its own coarse cube (lowest index on
    ties, centers being sorted)."""
    par = coarse[centers]
    out = np.empty(len(points), dtype=int)
    order = np.argsort(coarse, kind="stable")
    keys, starts = np.unique(coarse[order], return_index=True)
    for e, grp in zip(keys.tolist(), np.split(order, starts[1:])):
        cands = centers[par == e]
        best = np.full(len(grp), np.inf)
        lab = np.empty(len(grp), dtype=int)
        for s in range(0, len(cands), 256):
            d = hg.pairwise_dist(points[grp], points[cands[s:s + 256]])
            a = np.argmin(d, axis=1)
            v = d[np.arange(len(grp)), a]
            upd = v < best
            best[upd] = v[upd]
            lab[upd] = cands[s:s + 256][a[upd]]
        out[grp] = lab
    return out, dict(zip(centers.tolist(), par.tolist()))


def christ_cubes(cloud: PointCloud, rho: float = 0.5, j_max: int | None = None,
                 index: KoranyiIndex | None = None) -> CubeTree:
    """Top-down cubes over nested greedy nets of radius rho^j.

    A generation-j center hangs below the generation-(j-1) cube that
    contains it, and every point joins the nearest center hanging below its
    own generation-(j-1) cube, so generations nest by construction.
    """
    if not 0 < rho < 1:
        raise ContractViolation("rho must lie in (0, 1)")
    index = KoranyiIndex(cloud.points) if index is None else index
    N = len(cloud)
    far = float(np.max(hg.dist(cloud.points, cloud.points[0])))
    diam = approx_diameter(cloud.points) if N > 1 else 0.0
    if diam == 0:
        J0 = 0
    else:
        J0 = _top_generation(diam, rho)
        while rho ** J0 < far:
            J0 -= 1
    if j_max is None:
        if cloud.resolution > 0:
            j_max = math.floor(math.log(2 * cloud.resolution) / math.log(rho))
        else:
            j_max = J0 + 1
        j_max = max(j_max, J0)
    nets, prev = {}, ()
    for j in range(J0, j_max + 1):
        prev = greedy_net(index, rho ** j, prev)
        nets[j] = np.sort(prev)
    labels = {J0: np.full(N, nets[J0][0])}
    parent_of = {}
    for j in range(J0 + 1, j_max + 1):
        labels[j], parent_of[j] = _assign_level(cloud.points, nets[j], labels[j - 1])
    cubes: list[Cube] = []
    by_gen: dict[int, list[int]] = {}
    cid_of: dict[tuple[int, int], int] = {}
    w = cloud.weights
    for j in range(J0, j_max + 1):
        lab = labels[j]
        order = np.argsort(lab, kind="stable")
        uniq, starts = np.unique(lab[order], return_index=True)
        groups = np.split(order, starts[1:])
        by_gen[j] = []
        for c, mem in zip(uniq.tolist(), groups):
            par = None if j == J0 else cid_of[(j - 1, parent_of[j][c])]
            cube = Cube(len(cubes), j, c, np.sort(mem), par, mass=math.fsum(w[mem]))
            cid_of[(j, c)] = cube.id
            if par is not None:
                cubes[par].children.append(cube.id)
            by_gen[j].append(cube.id)
            cubes.append(cube)

    D3, D14, inner_needed = 1.0, 1.0, 1.0
    for Q in cubes:
        P = cloud.points[Q.members]
        scale = rho ** Q.generation
        rad = float(np.max(hg.dist(P, cloud.points[Q.center])))
        if len(P) <= EXACT_DIAM_CAP:
            Q.diam = exact_diameter(P)
            Q.diam_upper = Q.diam
        else:
            Q.diam = approx_diameter(P)
            Q.diam_upper = min(2 * rad, 2 * Q.diam)
        Q.x_Q, Q.inner_radius = _deepest_point(cloud.points, Q.members, Q.center,
                                               rad, scale, index)
        D3 = max(D3, Q.diam_upper / scale)
        inner_needed = max(inner_needed, scale / Q.inner_radius if Q.inner_radius > 0 else math.inf)
        if Q.diam > 0:
            D14 = max(D14, Q.diam_upper / scale, scale / Q.diam)
    D = max(D3, inner_needed) * (1 + 1e-9)
    tree = CubeTree(cloud, rho, J0, cubes, by_gen, D, max(D, D14), index=index)
    tree.boundary_constant = _boundary_constant(tree)
    return tree


def _deepest_point(points, members, center, rad, scale, index, tries: int = 48):
    """Among the net center and evenly spaced members, the point farthest
    from the complement; the distance is capped at scale."""
    near = index.query_ball(points[center], rad + scale)
    outside = near[~np.isin(near, members)]
    cands = np.unique(np.concatenate([[center], members[np.linspace(0, len(members) - 1,
                                                                  min(tries, len(members))).astype(int)]]))
    if len(outside) == 0:
        return int(center), scale
    best = np.full(len(cands), np.inf)
    for s in range(0, len(outside), 1024):
        best = np.minimum(best, hg.pairwise_dist(points[cands], points[outside[s:s + 1024]]).min(axis=1))
    best = np.minimum(best, scale)
    i = int(np.argmax(best))
    return int(cands[i]), float(best[i])


def _boundary_constant(tree: CubeTree, taus=(0.05, 0.1, 0.2)) -> float | None:
    """max over cubes and tau of mu(boundary layer of width tau rho^j) /
    (tau mu(Q)): the empirical constant in the small boundary property,
    with the layer measured against the sibling points of the parent."""
    cloud = tree.cloud
    worst = 0.0
    for Q in tree.cubes:
        if Q.parent is None or len(Q.members) < 2:
            continue
        others = np.setdiff1d(tree.cubes[Q.parent].members, Q.members)
        if len(others) == 0:
            continue
        d = np.full(len(Q.members), np.inf)
        for s in range(0, len(others), 512):
            d = np.minimum(d, hg.pairwise_dist(cloud.points[Q.members],
                                               cloud.points[others[s:s + 512]]).min(axis=1))
        scale = tree.rho ** Q.generation
        for tau in taus:
            layer = cloud.weights[Q.members][d <= tau * scale].sum()
            worst = max(worst, layer / (tau * Q.mass))
        if len(Q.members) * len(others) > 4e6:
            break
    return worst


def enlarge(tree: CubeTree, Q: Cube | int, lam: float) -> np.ndarray:
    """Indices of lam Q = {x : d(x, Q) <= (lam - 1) diam(Q)}."""
    if not lam >= 1:
        raise ContractViolation("enlargement factor must be >= 1")
    Q = tree.cubes[Q] if isinstance(Q, (int, np.integer)) else Q
    if lam == 1 or Q.diam == 0:
        return Q.members.copy()
    delta = (lam - 1) * Q.diam
    cloud = tree.cloud
    c = cloud.points[Q.center]
    rad = float(np.max(hg.dist(cloud.points[Q.members], c)))
    index = tree.index or KoranyiIndex(cloud.points)
    cand = index.query_ball(c, delta + rad)
    cand = cand[~np.isin(cand, Q.members)]
    if len(cand):
        dmin = np.full(len(cand), np.inf)
        M = cloud.points[Q.members]
        for s in range(0, len(M), 1024):
            dmin = np.minimum(dmin, hg.pairwise_dist(cloud.points[cand], M[s:s + 1024]).min(axis=1))
        cand = cand[dmin <= delta]
    return np.union1d(Q.members, cand)


# --- file formats -----------------------------------------------------------

def write_cloud(cloud: PointCloud, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"# resolution {cloud.resolution:.17g}\n")
        for p, w in zip(cloud.points, cloud.weights):
            fh.write(" ".join(f"{x:.17g}" for x in (*p, w)) + "\n")


def read_cloud(path) -> PointCloud:
    res = 0.0
    with open(path) as fh:
        first = fh.readline()
    if first.startswith("# resolution"):
        res = float(first.split()[-1])
    data = np.loadtxt(path, ndmin=2, comments="#")
    if data.shape[1] < 4 or data.shape[1] % 2:
        raise ContractViolation(f"{path}: expected columns z1 .. z2n t w")
    return PointCloud(data[:, :-1], data[:, -1], res)


def write_tree(tree: CubeTree, path) -> None:
    with open(path, "w") as fh:
        json.dump(tree.to_json(), fh, indent=1, sort_keys=True)
