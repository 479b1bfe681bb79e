"""Stopping-time coronization of a cube tree by horizontal planes.

Good cubes are those whose K-enlargement lies in a thin neighbourhood of a
horizontal plane.  Good cubes are grouped top-down into coherent trees that
stop at bad children or at children whose plane turns too far from the top
plane.  The module also checks the co-Lipschitz property of the projection
onto each top plane and extracts intrinsic graphs from separated nets.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import csv
import json
import logging
import math

import numpy as np

from . import coeff
from . import hgroup as hg
from .cloud import CubeTree, KoranyiIndex, approx_diameter, enlarge, exact_diameter
from .errors import ContractViolation, ProjectionCollision

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CoronaParams:
    eta: float = 0.1
    eps: float | None = None
    K: float | None = None
    K0: float = 4.0

    def __post_init__(self):
        if not 0 < self.eta < 1:
            raise ContractViolation(f"corona.eta must lie in (0, 1), got {self.eta}")
        if not self.K0 >= 2:
            raise ContractViolation(f"corona.K0 must be >= 2, got {self.K0}")
        if self.eps is None:
            object.__setattr__(self, "eps", min(0.05, self.eta / 4))
        if not 0 < self.eps < 1:
            raise ContractViolation(f"corona.epsilon must lie in (0, 1), got {self.eps}")
        need = 2 * self.K0 * (1 + 1 / self.eta) + 1
        if self.K is None:
            object.__setattr__(self, "K", need)
        if self.K < need * (1 - 1e-12):
            raise ContractViolation(
                f"corona.K must satisfy K >= 2*K0*(1 + 1/eta) + 1 = {need:.6g}, got {self.K}")


# --- good cubes -------------------------------------------------------------

@dataclass
class GoodCubes:
    planes: dict[int, hg.HorizontalPlane]
    bad: list[int]
    sup_ratio: dict[int, float]
    flagged: list[int] = field(default_factory=list)

    def __contains__(self, cid) -> bool:
        return cid in self.planes


def _sup_dist(P: np.ndarray, plane: hg.HorizontalPlane) -> float:
    return float(np.max(hg.dist_to_plane_raw(P, plane.base, plane.frame.basis)))


def good_cubes(tree: CubeTree, params: CoronaParams, k: int = 1,
               fit_opts: dict | None = None) -> GoodCubes:
    """Classify every cube; V_Q is the first candidate that fits.

    The candidates for Q are the sup-norm best-fit planes of KR for R
    ranging over Q and its ancestors, tried from the top down.  Fits are
    computed lazily and memoized, and the candidate set does not depend on
    eps, so shrinking eps can only shrink the good family.
    """
    fit_opts = {"restarts": 2, "grid": 16, "maxiter": 400, "max_points": 800,
                **(fit_opts or {})}
    fits: dict[int, tuple[hg.HorizontalPlane | None, bool]] = {}
    regions: dict[int, coeff.Region] = {}

    def region(cid) -> coeff.Region:
        if cid not in regions:
            idx = enlarge(tree, cid, params.K)
            P = tree.cloud.points[idx]
            w = tree.cloud.weights[idx]
            scale = exact_diameter(P) if len(P) <= 4000 else approx_diameter(P)
            regions[cid] = coeff.Region(idx, P, w / w.sum(), scale, "cube", k)
        return regions[cid]

    def fit(cid):
        if cid not in fits:
            reg = region(cid)
            kind = coeff.CoeffKind("beta", math.inf)
            res = coeff.evaluate(reg, [kind], seed=cid, **fit_opts)[kind]
            plane = res.plane
            if plane is None:  # a single point: any plane through it
                basis = np.eye(2 * tree.cloud.n)[:k]
                plane = hg.HorizontalPlane(reg.points[0], hg.IsotropicFrame(basis))
            fits[cid] = (plane, res.converged)
        return fits[cid]

    planes, bad, ratio, flagged = {}, [], {}, []
    for j in tree.generations:
        for cid in tree.by_generation[j]:
            Q = tree.cubes[cid]
            P = tree.cloud.points[enlarge(tree, cid, params.K)] if cid not in regions \
                else regions[cid].points
            thr = params.eps ** 2 * Q.diam
            chain = [cid]
            while tree.cubes[chain[-1]].parent is not None:
                chain.append(tree.cubes[chain[-1]].parent)
            chain.reverse()
            best, best_plane, ok_conv = math.inf, None, True
            # computed fits first, then the rest; stop at the first success
            order = [c for c in chain if c in fits] + [c for c in chain if c not in fits]
            for c in order:
                plane, conv = fit(c)
                s = _sup_dist(P, plane)
                if s < best:
                    best, best_plane, ok_conv = s, plane, conv
                if s <= thr:
                    break
            ratio[cid] = best / Q.diam if Q.diam > 0 else 0.0
            if best <= thr:
                planes[cid] = best_plane
            else:
                bad.append(cid)
                if not ok_conv:
                    flagged.append(cid)
    return GoodCubes(planes, bad, ratio, flagged)


# --- forest -----------------------------------------------------------------

@dataclass
class StoppingTree:
    top: int
    plane: hg.HorizontalPlane
    members: list[int]
    m1: list[int] = field(default_factory=list)
    m2: list[int] = field(default_factory=list)
    labels: list[str] = field(default_factory=list)
    masses: dict[str, float] = field(default_factory=dict)

    @property
    def minimal(self) -> list[int]:
        return sorted(self.m1 + self.m2)


@dataclass
class CoronaForest:
    cubes: CubeTree
    params: CoronaParams
    good: GoodCubes
    trees: list[StoppingTree]
    tree_of: dict[int, int]

    @property
    def bad(self) -> list[int]:
        return self.good.bad


def build_forest(tree: CubeTree, good: GoodCubes, params: CoronaParams) -> CoronaForest:
    """Greedy top-down trees in (generation, id) order.

    A cube with no children (finest generation) ends its tree without being
    counted as minimal: it is a truncation of the sample, not a stop.
    """
    trees, tree_of = [], {}
    for j in tree.generations:
        for cid in tree.by_generation[j]:
            if cid not in good or cid in tree_of:
                continue
            V_top = good.planes[cid]
            S = StoppingTree(cid, V_top, [])
            queue = [cid]
            while queue:
                q = queue.pop(0)
                S.members.append(q)
                tree_of[q] = len(trees)
                kids = tree.cubes[q].children
                if not kids:
                    continue
                if any(c not in good for c in kids):
                    S.m1.append(q)
                    continue
                if any(_angle(good.planes[c], V_top) > 1 + params.eta for c in kids):
                    S.m2.append(q)
                    continue
                queue.extend(sorted(kids))
            trees.append(S)
    forest = CoronaForest(tree, params, good, trees, tree_of)
    classify_trees(forest)
    return forest


def _angle(V1: hg.HorizontalPlane, V2: hg.HorizontalPlane) -> float:
    try:
        return hg.angle(V1, V2)
    except ArithmeticError:
        return math.inf


def _mass(tree: CubeTree, cids) -> float:
    idx = np.concatenate([tree.cubes[c].members for c in cids]) if cids else np.empty(0, int)
    return math.fsum(tree.cloud.weights[idx])


def classify_trees(forest: CoronaForest) -> None:
    T = forest.cubes
    for S in forest.trees:
        top = T.cubes[S.top].mass
        m1 = _mass(T, S.m1)
        m2 = _mass(T, S.m2)
        stopped = set(np.concatenate([T.cubes[c].members for c in S.minimal]).tolist()) \
            if S.minimal else set()
        free = math.fsum(w for i, w in zip(T.cubes[S.top].members,
                                           T.cloud.weights[T.cubes[S.top].members])
                         if int(i) not in stopped)
        S.masses = {"top": top, "m1": m1, "m2": m2, "unstopped": free}
        S.labels = [name for name, ok in (("F1", m1 >= top / 4), ("F2", free >= top / 4),
                                          ("F3", m2 >= top / 2)) if ok]
        if not S.labels:
            raise ContractViolation(f"tree with top {S.top} received no label")


def verify_forest(forest: CoronaForest) -> dict[str, bool]:
    """Structural re-check: unique top, sandwich closure, all-or-nothing
    children, angle rule, partition of the good cubes, stopping rule."""
    T, P = forest.cubes, forest.params
    good = forest.good
    ok = {"unique_top": True, "sandwich": True, "children": True, "angle": True,
          "partition": True, "stopping": True}
    seen = []
    for S in forest.trees:
        members = set(S.members)
        seen.extend(S.members)
        tops = [c for c in members if T.cubes[c].parent not in members]
        ok["unique_top"] &= tops == [S.top]
        for c in members:
            # every cube between a member and the top belongs to the tree
            a = c
            while a != S.top:
                a = T.cubes[a].parent
                ok["sandwich"] &= a in members
            kids = T.cubes[c].children
            inside = [x in members for x in kids]
            ok["children"] &= all(inside) or not any(inside)
            ok["angle"] &= _angle(good.planes[c], S.plane) <= 1 + P.eta
            stops = bool(kids) and (any(x not in good for x in kids) or
                                    any(_angle(good.planes[x], S.plane) > 1 + P.eta for x in kids))
            ok["stopping"] &= stops == (c in S.m1 or c in S.m2)
    ok["partition"] = sorted(seen) == sorted(good.planes) and len(seen) == len(set(seen))
    return ok


# --- the projection property -------------------------------------------------

class TreeGeometry:
    """Per-tree data: points of K0 Q(S), the function h_S and cube membership."""

    def __init__(self, forest: CoronaForest, t: int, index: KoranyiIndex | None = None):
        T = forest.cubes
        self.forest, self.S = forest, forest.trees[t]
        self.index = index or T.index or KoranyiIndex(T.cloud.points)
        self.points_idx = enlarge(T, self.S.top, forest.params.K0)
        # deepest tree cube containing each point of the top cube
        N = len(T.cloud)
        self.g = np.full(N, np.inf)
        for c in sorted(self.S.members, key=lambda c: T.cubes[c].generation):
            self.g[T.cubes[c].members] = T.cubes[c].diam
        self.top_members = T.cubes[self.S.top].members

    def h(self, x: int) -> float:
        """inf over cubes Q of the tree of d(x, Q) + diam(Q)."""
        T = self.forest.cubes
        P = T.cloud.points
        if np.isfinite(self.g[x]):
            r = self.g[x]
            idx, d = self.index.query_ball(P[x], r, return_dist=True)
            return float(min(r, np.min(d + self.g[idx])))
        d = hg.dist(P[self.top_members], P[x])
        return float(np.min(d + self.g[self.top_members]))


@dataclass
class PCReport:
    tree: int
    sampled: int
    tested: int
    worst_ratio: float
    violations: list[tuple[int, int, float]]
    rows: list[tuple] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations


def verify_pc(forest: CoronaForest, samples: int = 10_000, seed: int = 0,
              trees=None, threads: int = 1, max_draws: int = 50) -> list[PCReport]:
    """Check the co-Lipschitz bound of P_{V_S} on `samples` random pairs of
    K0 Q(S) separated relative to h_S.

    Pairs failing the separation gate are redrawn, up to max_draws * samples
    draws per tree.
    """
    T, eta = forest.cubes, forest.params.eta
    P = T.cloud.points

    def one(t: int) -> PCReport:
        geo = TreeGeometry(forest, t)
        V = forest.trees[t].plane
        rng = np.random.default_rng([seed, t])
        pts = geo.points_idx
        hcache: dict[int, float] = {}

        def h(i):
            if i not in hcache:
                hcache[i] = geo.h(i)
            return hcache[i]
        rep = PCReport(t, 0, 0, 1.0, [])
        if len(pts) < 2:
            return rep
        while rep.tested < samples and rep.sampled < max_draws * samples:
            pairs = rng.integers(0, len(pts), size=(samples - rep.tested, 2))
            X, Y = pts[pairs[:, 0]], pts[pairs[:, 1]]
            d = hg.dist(P[X], P[Y])
            dp = hg.dist(hg.project_plane(P[X], V), hg.project_plane(P[Y], V))
            for a, b, dd, ddp in zip(X, Y, d, dp):
                rep.sampled += 1
                if a == b or not dd > eta * min(h(int(a)), h(int(b))):
                    continue
                rep.tested += 1
                r = dd / ddp if ddp > 0 else math.inf
                rep.rows.append((t, int(a), int(b), float(dd), float(ddp), float(r)))
                rep.worst_ratio = max(rep.worst_ratio, r)
                if r > 1 + 2 * eta:
                    rep.violations.append((int(a), int(b), float(r)))
                    log.warning("co-Lipschitz violation in tree %d: pair (%d, %d) "
                                "d=%.6g projected=%.6g ratio %.6g", t, a, b, dd, ddp, r)
        return rep

    ids = list(range(len(forest.trees)) if trees is None else trees)
    if threads > 1 and len(ids) > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(threads) as ex:
            return list(ex.map(one, ids))
    return [one(t) for t in ids]


def write_pc_csv(reports: list[PCReport], path) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["tree", "x", "y", "dist", "proj_dist", "ratio"])
        for rep in reports:
            for row in rep.rows:
                wr.writerow([row[0], row[1], row[2], *(repr(v) for v in row[3:])])


# --- intrinsic graph extraction ------------------------------------------------

@dataclass
class GraphExtraction:
    tree: int
    theta: float
    net: np.ndarray
    graph: list[tuple[np.ndarray, np.ndarray]]
    lip: float
    bound: float
    approx_ok: bool

    @property
    def ok(self) -> bool:
        return self.lip <= self.bound and self.approx_ok


def extract_graph(forest: CoronaForest, t: int = 0) -> GraphExtraction:
    T, prm = forest.cubes, forest.params
    S = forest.trees[t]
    geo = TreeGeometry(forest, t)
    P = T.cloud.points
    D = T.D_two_sided
    theta = T.rho / (D * D * (1 / (prm.K0 - 1) + 1 / prm.eta))
    pts = geo.points_idx
    pos = {int(p): i for i, p in enumerate(pts)}
    # membership of the K0-enlargements, cubes sorted by diameter then id
    cubes = sorted(S.members, key=lambda c: (T.cubes[c].diam, c))
    diams = np.array([T.cubes[c].diam for c in cubes])
    M = np.zeros((len(cubes), len(pts)), dtype=bool)
    for r, c in enumerate(cubes):
        for i in enlarge(T, c, prm.K0):
            j = pos.get(int(i))
            if j is not None:
                M[r, j] = True
    has = M.any(axis=0)

    def q_diam(a: int, b_arr: np.ndarray) -> np.ndarray:
        both = M[:, a][:, None] & M[:, b_arr]
        first = np.argmax(both, axis=0)
        return np.where(both.any(axis=0), diams[first], diams[-1])

    index = KoranyiIndex(P[pts])
    net: list[int] = []
    in_net = np.zeros(len(pts), dtype=bool)
    reach = theta * diams[-1]
    for a in range(len(pts)):
        near = index.query_ball(P[pts[a]], reach)
        near = near[in_net[near]]
        if len(near):
            d = hg.dist(P[pts[near]], P[pts[a]])
            if np.any(d < theta * q_diam(a, near)):
                continue
        net.append(a)
        in_net[a] = True
    net_idx = pts[np.array(net, dtype=int)]
    NP = P[net_idx]
    proj = hg.project_plane(NP, S.plane)
    # injectivity of the projection on the net
    key = np.round(proj[:, :-1], 15)
    _, first, counts = np.unique(np.column_stack([key, np.round(proj[:, -1], 15)]), axis=0,
                                 return_index=True, return_counts=True)
    if np.any(counts > 1):
        dup = int(first[np.argmax(counts > 1)])
        others = np.where(np.all(np.isclose(proj, proj[dup], rtol=0, atol=1e-15), axis=1))[0]
        raise ProjectionCollision("projection onto the tree plane is not injective on the net",
                                  (int(net_idx[others[0]]), int(net_idx[others[1]])))
    # approximation property: within eta diam(Q) of the net for every Q with x in K0 Q
    nearest = np.full(len(pts), np.inf)
    for s in range(0, len(net_idx), 512):
        nearest = np.minimum(nearest, hg.pairwise_dist(P[pts], NP[s:s + 512]).min(axis=1))
    smallest = np.where(has, diams[np.argmax(M, axis=0)], np.inf)
    approx_ok = bool(np.all(nearest <= prm.eta * smallest + 1e-15))
    lip = hg.intrinsic_lip_constant(NP, S.plane) if len(NP) > 1 else 0.0
    graph = list(zip(proj, NP))
    return GraphExtraction(t, theta, net_idx, graph, float(lip), 6 * (2 * prm.eta) ** 0.25,
                           approx_ok)


# --- packing ----------------------------------------------------------------

@dataclass
class PackingReport:
    bad: dict[int, float]
    tops12: dict[int, float]
    tops3: dict[int, float]
    f3_rhs: dict[int, float] | None = None

    def maxima(self) -> dict[str, float]:
        out = {"bad": max(self.bad.values(), default=0.0),
               "tops_F1_F2": max(self.tops12.values(), default=0.0),
               "tops_F3": max(self.tops3.values(), default=0.0)}
        return out

    def f3_bound_holds(self) -> bool | None:
        if self.f3_rhs is None:
            return None
        return all(self.tops3[r] <= self.f3_rhs[r] for r in self.tops3)


def _subtree_sums(T: CubeTree, value: dict[int, float]) -> dict[int, float]:
    acc = {c.id: value.get(c.id, 0.0) for c in T.cubes}
    for j in reversed(T.generations):
        for cid in T.by_generation[j]:
            p = T.cubes[cid].parent
            if p is not None:
                acc[p] += acc[cid]
    return acc


def packing_report(forest: CoronaForest, proj_field=None, k: int = 1) -> PackingReport:
    """Per-root sums over cubes below each root, normalized by its mass.

    proj_field, a field of beta_{1,pi,affine} on K0-enlarged cubes, adds the
    right side eps^(-6k-1) sum beta^2 mu(Q) / mu(R) of the F3 estimate.
    """
    T = forest.cubes
    bad = _subtree_sums(T, {c: T.cubes[c].mass for c in forest.bad})
    t12 = {S.top: T.cubes[S.top].mass for S in forest.trees if {"F1", "F2"} & set(S.labels)}
    t3 = {S.top: T.cubes[S.top].mass for S in forest.trees if "F3" in S.labels}
    s12, s3 = _subtree_sums(T, t12), _subtree_sums(T, t3)
    norm = {c.id: c.mass for c in T.cubes}
    rep = PackingReport({c: bad[c] / norm[c] for c in norm}, {c: s12[c] / norm[c] for c in norm},
                        {c: s3[c] / norm[c] for c in norm})
    if proj_field is not None:
        eps = forest.params.eps
        terms = {c.id: proj_field[c.id] ** 2 * c.mass for c in T.cubes}
        s = _subtree_sums(T, terms)
        rep.f3_rhs = {c: eps ** (-6 * k - 1) * s[c] / norm[c] for c in norm}
    return rep


def forest_to_json(forest: CoronaForest, packing: PackingReport | None = None) -> dict:
    T = forest.cubes
    out = {
        "params": {"eta": forest.params.eta, "epsilon": forest.params.eps,
                   "K": forest.params.K, "K0": forest.params.K0},
        "bad": sorted(forest.bad),
        "flagged": sorted(forest.good.flagged),
        "trees": [{
            "top": S.top, "generation": T.cubes[S.top].generation,
            "plane": S.plane.params(), "members": S.members,
            "m1": S.m1, "m2": S.m2, "labels": S.labels, "masses": S.masses,
        } for S in forest.trees],
    }
    if packing is not None:
        out["packing"] = {"maxima": packing.maxima(),
                          "per_root": {str(c): [packing.bad[c], packing.tops12[c], packing.tops3[c]]
                                       for c in sorted(packing.bad)}}
        if packing.f3_rhs is not None:
            out["packing"]["f3_bound_holds"] = packing.f3_bound_holds()
    return out


def write_forest(forest: CoronaForest, path, packing: PackingReport | None = None) -> None:
    with open(path, "w") as fh:
        json.dump(forest_to_json(forest, packing), fh, indent=1, sort_keys=True)
        fh.write("\n")


def tree_mass_fraction(forest: CoronaForest) -> list[float]:
    """Share of the total cube mass (summed over all generations) per tree."""
    T = forest.cubes
    total = math.fsum(c.mass for c in T.cubes)
    return [math.fsum(T.cubes[c].mass for c in S.members) / total for S in forest.trees]
