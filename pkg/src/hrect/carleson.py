"""Packing sums of coefficient fields over cube trees and dyadic nets."""
from __future__ import annotations

from dataclasses import dataclass, field, asdict
import csv
import json
import logging
import math

import numpy as np

from . import coeff
from .cloud import (CubeTree, DyadicNet, KoranyiIndex, PointCloud, christ_cubes,
                    cloud_from_polyline, dyadic_net)
from .coeff import CoeffField, CoeffKind
from .curve import CurveConfig, juillet, segment_lengths
from .errors import ContractViolation, CoverageError

log = logging.getLogger(__name__)


@dataclass
class CarlesonReport:
    coeff: str
    q: float
    lam: float
    levels: list[int] = field(default_factory=list)
    increments: list[float] = field(default_factory=list)
    root_sums: dict[int, float] = field(default_factory=dict)

    @property
    def partial_sums(self) -> list[float]:
        return np.cumsum(self.increments).tolist()

    def rows(self):
        return list(zip(self.levels, self.increments, self.partial_sums))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["level", "increment", "partial_sum"])
            for j, inc, s in self.rows():
                wr.writerow([j, repr(inc), repr(s)])


def _root(tree: CubeTree, root):
    if root is None:
        return tree.by_generation[tree.J0][0]
    return int(root)


def _subtree(tree: CubeTree, root: int) -> list[int]:
    return tree.descendants(root)


def _value(fld: CoeffField, cid: int) -> float:
    if cid not in fld:
        raise CoverageError(f"coefficient field has no value for cube {cid}")
    return fld[cid]


def glem_terms(tree: CubeTree, fld: CoeffField, q: float, root=None,
               generations=None) -> dict[int, float]:
    """Per-generation sums of h(lam Q)^q mu(Q) / mu(root) below root."""
    root = _root(tree, root)
    total = tree.cubes[root].mass
    out: dict[int, list[float]] = {}
    for cid in _subtree(tree, root):
        Q = tree.cubes[cid]
        if generations is not None and Q.generation not in generations:
            continue
        h = _value(fld, cid)
        term = (1.0 if q == 0 else h ** q) * Q.mass
        out.setdefault(Q.generation, []).append(term)
    return {j: math.fsum(v) / total for j, v in sorted(out.items())}


def glem_sum(tree: CubeTree, fld: CoeffField, q: float, root=None, generations=None) -> float:
    return math.fsum(glem_terms(tree, fld, q, root, generations).values())


def wgl_count(tree: CubeTree, fld: CoeffField, eps: float, root=None,
              generations=None) -> float:
    """Normalized mass of the cubes below root whose coefficient exceeds eps."""
    root = _root(tree, root)
    total = tree.cubes[root].mass
    terms = []
    for cid in _subtree(tree, root):
        Q = tree.cubes[cid]
        if generations is not None and Q.generation not in generations:
            continue
        if _value(fld, cid) > eps:
            terms.append(Q.mass)
    return math.fsum(terms) / total


def cube_report(tree: CubeTree, fld: CoeffField, q: float, root=None,
                generations=None) -> CarlesonReport:
    terms = glem_terms(tree, fld, q, root, generations)
    rep = CarlesonReport(f"{fld.kind.family}_p{_pname(fld.kind.p)}", q, fld.lam,
                         list(terms), list(terms.values()))
    rep.root_sums[_root(tree, root)] = math.fsum(terms.values())
    return rep


def _pname(p) -> str:
    return "inf" if p == math.inf else str(int(p))


def ball_coefficients(cloud: PointCloud, centers, radii, kind: CoeffKind, k: int = 1,
                      index: KoranyiIndex | None = None, threads: int = 1, **opts):
    """Coefficient of kind on the balls B(cloud[c], r) for paired centers and radii."""
    index = KoranyiIndex(cloud.points) if index is None else index

    def job(args):
        c, r = args
        reg = coeff.ball_region(cloud, cloud.points[c], r, k, index)
        return coeff.evaluate(reg, [kind], seed=int(c), **opts)[kind].value

    pairs = list(zip(centers, radii))
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(threads) as ex:
            return list(ex.map(job, pairs))
    return [job(a) for a in pairs]


def multires_sum(cloud: PointCloud, net: DyadicNet, p=1, A: float = 5.0, levels=None,
                 q: float = 2, index=None, threads: int = 1, **opts) -> CarlesonReport:
    """Level terms 2^-j sum over the net at level j of beta_p(x, A 2^-j)^q."""
    if A < 5:
        raise ContractViolation("multiresolution sums need A >= 5")
    kind = CoeffKind("beta", p)
    levels = net.js if levels is None else list(levels)
    rep = CarlesonReport(f"beta_p{_pname(p)}_multires", q, A)
    index = KoranyiIndex(cloud.points) if index is None else index
    for j in levels:
        centers = net.levels.get(j, np.empty(0, dtype=int))
        if len(centers) == 0:
            log.warning("net level %d is empty; skipped", j)
            continue
        r = A * 2.0 ** -j
        vals = ball_coefficients(cloud, centers, [r] * len(centers), kind, index=index,
                                 threads=threads, **opts)
        rep.levels.append(j)
        rep.increments.append(2.0 ** -j * math.fsum(v ** q for v in vals))
    return rep


def ball_integral_sum(cloud: PointCloud, kind: CoeffKind, q: float, j_min: int, j_max: int,
                      centers=None, index=None, **opts) -> float:
    """Riemann sum of the integral of h(B(x, r))^q over x in the cloud and
    dr/r, with radii 2^-j for j_min <= j <= j_max and weight log 2 each."""
    centers = np.arange(len(cloud)) if centers is None else np.asarray(centers)
    w = cloud.weights[centers]
    w = w * (cloud.mass / w.sum())
    total = []
    index = KoranyiIndex(cloud.points) if index is None else index
    for j in range(j_min, j_max + 1):
        r = 2.0 ** -j
        vals = ball_coefficients(cloud, centers, [r] * len(centers), kind, index=index, **opts)
        total.append(math.log(2) * float(np.dot(w, np.asarray(vals) ** q)))
    return math.fsum(total) / cloud.mass


@dataclass
class DichotomyReport:
    generation: int
    A: float
    lam: float
    levels: list[int]
    multires: CarlesonReport
    cubes: CarlesonReport
    harmonic_slope: float = 0.0
    harmonic_residual: float = 0.0

    def summary(self) -> dict:
        return {
            "generation": self.generation, "A": self.A, "lambda": self.lam,
            "levels": self.levels,
            "beta1_sq_multires": {"increments": self.multires.increments,
                                  "partial_sums": self.multires.partial_sums},
            "stratified1_4th_cubes": {"increments": self.cubes.increments,
                                      "partial_sums": self.cubes.partial_sums},
            "harmonic_fit": {"slope": self.harmonic_slope,
                             "relative_residual": self.harmonic_residual},
        }

    def write(self, outdir) -> list:
        from pathlib import Path
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        paths = [outdir / "dichotomy_beta1_multires.csv", outdir / "dichotomy_stratified_cubes.csv",
                 outdir / "dichotomy_summary.json"]
        self.multires.write_csv(paths[0])
        self.cubes.write_csv(paths[1])
        paths[2].write_text(json.dumps(self.summary(), indent=2, sort_keys=True) + "\n")
        return paths


def harmonic_fit(levels, increments) -> tuple[float, float]:
    """Least-squares slope of increments against 1/(ceil(j/2)+1) through the
    origin, with the relative residual norm."""
    x = np.array([1.0 / (math.ceil(j / 2) + 1) for j in levels])
    y = np.asarray(increments, dtype=float)
    if not len(x) or not np.any(y):
        return 0.0, 0.0
    a = float(x @ y / (x @ x))
    return a, float(np.linalg.norm(y - a * x) / np.linalg.norm(y))


def juillet_cloud(cfg: CurveConfig, J: int) -> PointCloud:
    """Vertices of generation J with arclength weights."""
    gamma = juillet(CurveConfig(cfg.C0, max(cfg.max_generation, J)), J)
    return cloud_from_polyline(gamma, segment_lengths(cfg, J)[-1])


def dichotomy_experiment(cfg: CurveConfig, J: int = 7, levels=None, A: float = 5.0,
                         lam: float = 2.0, threads: int = 1, **opts) -> DichotomyReport:
    if int(J) != J or not 1 <= J <= 8:
        raise ContractViolation("the experiment runs at generations 1 <= J <= 8")
    levels = list(range(3, J + 1)) if levels is None else list(levels)
    cl = juillet_cloud(cfg, J)
    index = KoranyiIndex(cl.points)
    net = dyadic_net(cl, max(levels), index)
    multi = multires_sum(cl, net, 1, A, levels, 2, index, threads, **opts)
    tree = christ_cubes(cl, 0.5, max(levels), index)
    cubes = [cid for j in levels if j in tree.by_generation for cid in tree.by_generation[j]]
    kind = CoeffKind("stratified", 1)
    fld = coeff.coeff_fields(tree, [kind], lam, cubes, threads=threads, **opts)[kind]
    cube_rep = cube_report(tree, fld, 4, None, set(levels))
    slope, resid = harmonic_fit(multi.levels, multi.increments)
    return DichotomyReport(J, A, lam, levels, multi, cube_rep, slope, resid)


def report_dict(rep: CarlesonReport) -> dict:
    d = asdict(rep)
    d["partial_sums"] = rep.partial_sums
    return d
