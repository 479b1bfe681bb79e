"""Shared generators and brute-force oracles for the test suite."""
from __future__ import annotations

import math

import numpy as np

from hrect import cloud, curve
from hrect import hgroup as hg


def random_points(rng, m: int, n: int = 1, scale: float = 1.0) -> np.ndarray:
    return rng.uniform(-scale, scale, (m, 2 * n + 1))


def random_cloud(rng, max_points: int = 120) -> cloud.PointCloud:
    """One of four shapes in H^1: a blob, a noisy horizontal line, a lifted
    random polyline, or three clusters."""
    kind = int(rng.integers(4))
    m = int(rng.integers(8, max_points))
    if kind == 0:
        P = rng.uniform(-1, 1, (m, 3))
    elif kind == 1:
        s = rng.uniform(-1, 1, m)
        a = rng.uniform(0, math.pi)
        P = np.column_stack([s * math.cos(a), s * math.sin(a), np.zeros(m)])
        P = P + rng.normal(0, rng.uniform(0, 0.2), (m, 3)) * np.array([1, 1, 0.3])
    elif kind == 2:
        v = np.cumsum(rng.normal(0, 1, (5, 2)), axis=0)
        g = curve.lift_horizontal(v)
        # a random walk can take a short step, and sampling must resolve every segment
        c = cloud.cloud_from_polyline(g, min(g.length / m, g.segment_lengths().min()))
        return cloud.PointCloud(c.points, c.weights * rng.uniform(0.5, 1.5, len(c)),
                                c.resolution)
    else:
        C = rng.uniform(-1, 1, (3, 3))
        P = C[rng.integers(3, size=m)] + rng.normal(0, 0.05, (m, 3))
    w = rng.uniform(0.5, 1.5, m)
    return cloud.PointCloud(P, w / w.sum(), 0.0)


def grid_dist_to_line(y, base, direction, half_width: float = 10.0, m: int = 200001) -> float:
    """Dense scan of s -> d(y, base . (s v, 0))."""
    s = np.linspace(-half_width, half_width, m)
    pts = hg.mul(base, np.column_stack([s[:, None] * direction, np.zeros(m)]))
    d = hg.dist(pts, y)
    i = int(np.argmin(d))
    lo, hi = s[max(i - 1, 0)], s[min(i + 1, m - 1)]
    s2 = np.linspace(lo, hi, 2001)
    pts2 = hg.mul(base, np.column_stack([s2[:, None] * direction, np.zeros(len(s2))]))
    return float(hg.dist(pts2, y).min())


def sampled_angle(V1: hg.HorizontalPlane, V2: hg.HorizontalPlane, rng, m: int = 20000) -> float:
    """Sup over sampled pairs of pi(V1) of |x - y| / |proj_{V2}(x - y)|."""
    B1, B2 = V1.frame.basis, V2.frame.basis
    d = rng.standard_normal((m, B1.shape[0])) @ B1
    pr = (d @ B2.T) @ B2
    return float(np.max(np.linalg.norm(d, axis=1) / np.linalg.norm(pr, axis=1)))


def graph_map(rng, n: int, m: int):
    """Random smooth graph over a horizontal line through a random base.

    Returns the plane, the domain points v and a function amp -> Phi(v)
    with Phi(v) = v . phi_amp(v), phi_amp in the complementary subgroup.
    """
    base = rng.standard_normal(2 * n + 1) * 0.3
    V = hg.HorizontalPlane(base, hg.random_isotropic_frame(n, 1, rng))
    B = V.frame.basis
    perp = np.linalg.svd(B, full_matrices=True)[2][1:]
    s = np.sort(rng.uniform(-1, 1, m))
    nf = 3
    fr = np.arange(1, nf + 1) * rng.uniform(0.5, 3)
    cy = rng.standard_normal((2 * n - 1, nf)) / np.arange(1, nf + 1)
    py = rng.uniform(0, 2 * math.pi, (2 * n - 1, nf))
    ct = rng.standard_normal(nf)
    pt = rng.uniform(0, 2 * math.pi, nf)
    tscale = rng.uniform(0, 2)
    dom0 = np.column_stack([s[:, None] * B[0], np.zeros(m)])
    dom = hg.mul(V.base, dom0)

    def phi(amp: float) -> np.ndarray:
        y = (cy[:, :, None] * np.sin(fr[None, :, None] * s[None, None, :]
                                     + py[:, :, None])).sum(1).T * amp
        t = (ct[:, None] * np.sin(fr[:, None] * s[None, :] + pt[:, None])).sum(0) \
            * amp ** 2 * tscale
        return np.column_stack([y @ perp, t])

    def graph(amp: float) -> np.ndarray:
        return hg.mul(V.base, hg.mul(dom0, phi(amp)))

    return V, dom, graph


def metric_excess(dom: np.ndarray, G: np.ndarray) -> float:
    """max over pairs of d(Phi(v), Phi(v')) / d(v, v') minus one."""
    iu = np.triu_indices(len(G), 1)
    return float(np.max(hg.pairwise_dist(G)[iu] / hg.pairwise_dist(dom)[iu])) - 1.0


def graph_with_excess(rng, n: int, m: int, target: float):
    """A random graph map whose measured excess is within 1% of target."""
    V, dom, graph = graph_map(rng, n, m)
    lo, hi = 0.0, 1.0
    while metric_excess(dom, graph(hi)) < target:
        hi *= 2
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if metric_excess(dom, graph(mid)) < target:
            lo = mid
        else:
            hi = mid
    G = graph(hi)
    return V, dom, G, metric_excess(dom, G)
