"""Command-line driver: validated configuration, pipelines and manifests."""
from __future__ import annotations

import argparse
import copy
import hashlib
import json
import logging
import math
import os
import platform
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import scipy
import yaml

from . import __version__, carleson, coeff, corona
from .cloud import (KoranyiIndex, christ_cubes, dyadic_net, read_cloud, regularity_profile,
                    write_cloud, write_tree)
from .curve import CurveConfig, juillet, segment_lengths, write_curve
from .errors import ContractViolation

log = logging.getLogger("hrect")

SUBCOMMANDS = ("curve", "cloud", "cubes", "coeff", "carleson", "corona", "verify")

DEFAULTS: dict = {
    "n": 1,
    "k": 1,
    "seed": 0,
    "curve": {"C0": 0.2, "generations": 8},
    "cloud": {"generation": 6},
    "cubes": {"rho": 0.5, "lambda": 2.0, "j_max": None},
    "coeff": {"families": ["beta", "stratified", "proj_affine", "proj_horizontal", "iota"],
              "p": [1, "inf"], "seeds": 24, "restarts": 10},
    "carleson": {"A": 5.0, "q": 2.0},
    "corona": {"eta": 0.1, "epsilon": None, "K": None, "K0": 4.0, "samples": 10000},
    "io": {"input": None, "out": "out"},
}


class ConfigError(ContractViolation):
    def __init__(self, path: str, msg: str):
        super().__init__(f"{path}: {msg}")
        self.path = path


def _merge(base: dict, over: dict, prefix: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in over.items():
        path = f"{prefix}{key}"
        if key not in base:
            raise ConfigError(path, "unknown key")
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise ConfigError(path, "expected a mapping")
            out[key] = _merge(base[key], val, path + ".")
        else:
            out[key] = val
    return out


def _num(raw: dict, path: str, kind=float, allow_none: bool = False):
    val = raw
    for part in path.split("."):
        val = val[part]
    if val is None and allow_none:
        return None
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(path, f"expected a number, got {val!r}")
    if kind is int and int(val) != val:
        raise ConfigError(path, f"expected an integer, got {val!r}")
    return kind(val)


def _p(val, path: str) -> float:
    if val in ("inf", "infinity", math.inf):
        return math.inf
    if val == 1:
        return 1.0
    raise ConfigError(path, f"p must be 1 or inf, got {val!r}")


@dataclass
class RunConfig:
    n: int = 1
    k: int = 1
    seed: int = 0
    curve: CurveConfig = field(default_factory=CurveConfig)
    generations: int = 8
    cloud_generation: int = 6
    rho: float = 0.5
    lam: float = 2.0
    j_max: int | None = None
    kinds: list = field(default_factory=list)
    seeds: int = 24
    restarts: int = 10
    A: float = 5.0
    q: float = 2.0
    corona: corona.CoronaParams = field(default_factory=corona.CoronaParams)
    samples: int = 10000
    input: str | None = None
    out: str = "out"
    raw: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: dict | None) -> "RunConfig":
        raw = _merge(DEFAULTS, data or {})
        n, k = _num(raw, "n", int), _num(raw, "k", int)
        if n < 1:
            raise ConfigError("n", "must be >= 1")
        if not 1 <= k <= n:
            raise ConfigError("k", f"must satisfy 1 ≤ k ≤ n (got k={k}, n={n})")
        seed = _num(raw, "seed", int)
        if not 0 <= seed < 2 ** 64:
            raise ConfigError("seed", "must be an unsigned 64-bit integer")
        gens = _num(raw, "curve.generations", int)
        try:
            cv = CurveConfig(_num(raw, "curve.C0"), max(gens, 0))
        except ContractViolation as exc:
            raise ConfigError("curve.C0", str(exc)) from None
        if not 0 <= gens <= 12:
            raise ConfigError("curve.generations", "must lie in [0, 12]")
        cgen = _num(raw, "cloud.generation", int)
        if not 0 <= cgen <= 8:
            raise ConfigError("cloud.generation", "must lie in [0, 8]")
        rho = _num(raw, "cubes.rho")
        if not 0 < rho < 1:
            raise ConfigError("cubes.rho", "must lie in (0, 1)")
        lam = _num(raw, "cubes.lambda")
        if not lam >= 1:
            raise ConfigError("cubes.lambda", "must be >= 1")
        j_max = _num(raw, "cubes.j_max", int, allow_none=True)
        fams = raw["coeff"]["families"]
        if not isinstance(fams, list) or not fams:
            raise ConfigError("coeff.families", "expected a non-empty list")
        for f in fams:
            if f not in coeff.FAMILIES:
                raise ConfigError("coeff.families", f"unknown family {f!r}; choose from "
                                  + ", ".join(coeff.FAMILIES))
        ps = raw["coeff"]["p"]
        ps = ps if isinstance(ps, list) else [ps]
        ps = [_p(v, "coeff.p") for v in ps]
        kinds = [coeff.CoeffKind(f, p) for f in fams for p in ps]
        seeds = _num(raw, "coeff.seeds", int)
        restarts = _num(raw, "coeff.restarts", int)
        if seeds < 1:
            raise ConfigError("coeff.seeds", "must be >= 1")
        if restarts < 1:
            raise ConfigError("coeff.restarts", "must be >= 1")
        A = _num(raw, "carleson.A")
        if A < 5:
            raise ConfigError("carleson.A", "must be >= 5")
        q = _num(raw, "carleson.q")
        if q < 0:
            raise ConfigError("carleson.q", "must be >= 0")
        eta = _num(raw, "corona.eta")
        K0 = _num(raw, "corona.K0")
        eps = _num(raw, "corona.epsilon", allow_none=True)
        K = _num(raw, "corona.K", allow_none=True)
        kw = {"eta": eta, "K0": K0}
        if eps is not None:
            kw["eps"] = eps
        if K is not None:
            kw["K"] = K
        params = corona.CoronaParams(**kw)
        samples = _num(raw, "corona.samples", int)
        if samples < 1:
            raise ConfigError("corona.samples", "must be >= 1")
        inp = raw["io"]["input"]
        if inp is not None and not isinstance(inp, str):
            raise ConfigError("io.input", "expected a path")
        out = raw["io"]["out"]
        if not isinstance(out, str):
            raise ConfigError("io.out", "expected a path")
        return cls(n, k, seed, cv, gens, cgen, rho, lam, j_max, kinds, seeds, restarts, A, q,
                   params, samples, inp, out, raw)

    def digest(self) -> str:
        blob = json.dumps(self.raw, sort_keys=True, separators=(",", ":"), default=str)
        return hashlib.sha256(blob.encode()).hexdigest()

    def fit_opts(self) -> dict:
        return {"grid": self.seeds, "restarts": self.restarts}


def load_config(path) -> dict:
    with open(path) as fh:
        data = yaml.safe_load(fh)
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError("<root>", "expected a mapping")
    return data


def fixture_path(name: str) -> Path:
    return Path(str(resources.files("hrect") / "fixtures" / f"{name}.txt"))


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(outdir: Path, sub: str, cfg: RunConfig, outputs: list[Path],
                   options: dict | None = None) -> Path:
    man = {
        "subcommand": sub,
        "options": options or {},
        "config_sha256": cfg.digest(),
        "config": cfg.raw,
        "versions": {"hrect": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__},
        "outputs": {p.name: _sha256(p) for p in sorted(outputs)},
    }
    path = outdir / f"manifest_{sub}.json"
    path.write_text(json.dumps(man, indent=2, sort_keys=True, default=str) + "\n")
    return path


# --- pipelines --------------------------------------------------------------

def _load_cloud(cfg: RunConfig):
    if cfg.input is None:
        return carleson.juillet_cloud(cfg.curve, cfg.cloud_generation)
    path = cfg.input
    if path.startswith("@"):
        path = fixture_path(path[1:])
    if not Path(path).is_file():
        raise FileNotFoundError(f"input file not found: {path}")
    cl = read_cloud(path)
    if cl.n != cfg.n:
        raise ConfigError("n", f"input cloud lives in H^{cl.n}, config says n={cfg.n}")
    return cl


def _tree(cfg: RunConfig, cl):
    return christ_cubes(cl, cfg.rho, cfg.j_max, KoranyiIndex(cl.points))


def run_curve(cfg, outdir: Path, threads: int) -> tuple[int, list[Path]]:
    gamma = juillet(cfg.curve, cfg.generations)
    p1 = outdir / f"juillet_gen{cfg.generations}.txt"
    write_curve(gamma, p1)
    p2 = outdir / "segment_lengths.csv"
    ls = segment_lengths(cfg.curve, cfg.generations)
    p2.write_text("n,l_n\n" + "".join(f"{i},{v!r}\n" for i, v in enumerate(ls)))
    return 0, [p1, p2]


def run_cloud(cfg, outdir: Path, threads: int) -> tuple[int, list[Path]]:
    cl = _load_cloud(cfg)
    p1 = outdir / "cloud.txt"
    write_cloud(cl, p1)
    prof = regularity_profile(cl, rng=np.random.default_rng(cfg.seed), k=cfg.k)
    p2 = outdir / "regularity.json"
    p2.write_text(json.dumps({
        "points": len(cl), "mass": cl.mass, "resolution": cl.resolution,
        "C_E": prof.C_E, "min_ratio": prof.min_ratio, "max_ratio": prof.max_ratio,
        "median_ratio": prof.median_ratio, "slope": prof.slope,
        "empty_balls": prof.empty_balls}, indent=2, sort_keys=True) + "\n")
    return 0, [p1, p2]


def run_cubes(cfg, outdir: Path, threads: int) -> tuple[int, list[Path]]:
    cl = _load_cloud(cfg)
    tree = _tree(cfg, cl)
    p1 = outdir / "cubes.json"
    write_tree(tree, p1)
    checks = tree.verify()
    p2 = outdir / "cubes_verify.json"
    p2.write_text(json.dumps({k: bool(v) for k, v in checks.items()}, indent=2,
                             sort_keys=True) + "\n")
    return (0 if all(checks.values()) else 1), [p1, p2]


def _field_name(kind) -> str:
    return f"{kind.family}_p{'inf' if kind.p == math.inf else 1}"


def _fields(cfg, tree, threads):
    return coeff.coeff_fields(tree, cfg.kinds, cfg.lam, k=cfg.k, threads=threads,
                              **cfg.fit_opts())


def run_coeff(cfg, outdir: Path, threads: int) -> tuple[int, list[Path]]:
    cl = _load_cloud(cfg)
    tree = _tree(cfg, cl)
    outs = []
    for kind, fld in _fields(cfg, tree, threads).items():
        p = outdir / f"coeff_{_field_name(kind)}.csv"
        fld.write_csv(p, tree)
        outs.append(p)
    return 0, outs


def run_carleson(cfg, outdir: Path, threads: int, experiment: str | None = None,
                 generations: int | None = None) -> tuple[int, list[Path]]:
    if experiment == "dichotomy":
        J = cfg.cloud_generation if generations is None else generations
        rep = carleson.dichotomy_experiment(cfg.curve, J, A=cfg.A, lam=cfg.lam,
                                            threads=threads, **cfg.fit_opts())
        return 0, rep.write(outdir)
    cl = _load_cloud(cfg)
    tree = _tree(cfg, cl)
    index = tree.index
    net = dyadic_net(cl, max(tree.generations), index)
    outs = []
    for kind, fld in _fields(cfg, tree, threads).items():
        rep = carleson.cube_report(tree, fld, cfg.q)
        p = outdir / f"carleson_cubes_{_field_name(kind)}.csv"
        rep.write_csv(p)
        outs.append(p)
    levels = [j for j in net.js if j >= 0]
    rep = carleson.multires_sum(cl, net, 1, cfg.A, levels, cfg.q, index, threads)
    p = outdir / "carleson_multires_beta_p1.csv"
    rep.write_csv(p)
    outs.append(p)
    return 0, outs


def _forest(cfg, tree):
    good = corona.good_cubes(tree, cfg.corona, cfg.k)
    return corona.build_forest(tree, good, cfg.corona)


def run_corona(cfg, outdir: Path, threads: int) -> tuple[int, list[Path]]:
    cl = _load_cloud(cfg)
    tree = _tree(cfg, cl)
    forest = _forest(cfg, tree)
    pack = corona.packing_report(forest)
    p1 = outdir / "forest.json"
    corona.write_forest(forest, p1, pack)
    reps = corona.verify_pc(forest, cfg.samples, cfg.seed, threads=threads)
    p2 = outdir / "pc_pairs.csv"
    corona.write_pc_csv(reps, p2)
    ok = all(r.passed for r in reps) and all(corona.verify_forest(forest).values())
    return (0 if ok else 1), [p1, p2]


def run_verify(cfg, outdir: Path, threads: int) -> tuple[int, list[Path]]:
    """Structural and inequality checks on one cloud."""
    cl = _load_cloud(cfg)
    tree = _tree(cfg, cl)
    checks: dict[str, bool] = {}
    for key, val in tree.verify().items():
        checks[f"cubes.{key}"] = bool(val)
    net = dyadic_net(cl, max(tree.generations), tree.index)
    for key, val in net.verify(cl).items():
        checks[f"net.{key}"] = bool(val)
    root = tree.by_generation[tree.J0][0]
    reg = coeff.cube_region(tree, root, cfg.lam, cfg.k)
    kinds = [coeff.CoeffKind(f, p) for f in ("beta", "stratified", "proj_affine",
                                             "proj_horizontal") for p in (1.0, math.inf)]
    if len(reg) <= coeff.IOTA_CAP:
        kinds += [coeff.CoeffKind("iota", 1.0), coeff.CoeffKind("iota", math.inf)]
    res = coeff.evaluate(reg, kinds, seed=cfg.seed % 2 ** 32, **cfg.fit_opts())
    v = {kk: r.value for kk, r in res.items()}
    b1, bi = v[kinds[0]], v[kinds[1]]
    s1 = v[coeff.CoeffKind("stratified", 1.0)]
    pa1 = v[coeff.CoeffKind("proj_affine", 1.0)]
    ph1 = v[coeff.CoeffKind("proj_horizontal", 1.0)]
    checks["coeff.affine_le_horizontal"] = pa1 <= ph1
    checks["coeff.p1_le_pinf"] = b1 <= bi
    checks["coeff.proj_sq_plus_beta4_le_stratified4"] = pa1 ** 2 + b1 ** 4 <= s1 ** 4 * (1 + 1e-12)
    checks["coeff.stratified4_le_2beta_sq"] = s1 ** 4 <= 2 * b1 ** 2 * (1 + 1e-12) + 1e-300
    forest = _forest(cfg, tree)
    for key, val in corona.verify_forest(forest).items():
        checks[f"corona.{key}"] = bool(val)
    reps = corona.verify_pc(forest, cfg.samples, cfg.seed, threads=threads)
    checks["corona.projection_property"] = all(r.passed for r in reps)
    for t in range(len(forest.trees)):
        ex = corona.extract_graph(forest, t)
        checks[f"corona.graph_{t}"] = bool(ex.ok)
    p = outdir / "verify.json"
    p.write_text(json.dumps({"checks": checks, "coefficients":
                             {_field_name(kk): val for kk, val in v.items()}},
                            indent=2, sort_keys=True) + "\n")
    failed = [k for k, ok in checks.items() if not ok]
    for k in failed:
        log.error("check failed: %s", k)
    return (0 if not failed else 1), [p]


PIPELINES = {"curve": run_curve, "cloud": run_cloud, "cubes": run_cubes, "coeff": run_coeff,
             "carleson": run_carleson, "corona": run_corona, "verify": run_verify}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hrect", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=Path, help="YAML configuration file")
        sp.add_argument("--seed", type=int, help="U64 seed (overrides HRECT_SEED and config)")
        sp.add_argument("--threads", type=int, help="worker threads (overrides HRECT_THREADS)")
        sp.add_argument("--out", type=Path, help="output directory (overrides io.out)")
        sp.add_argument("--input", help="cloud file; '@name' selects a bundled fixture")
        if name == "carleson":
            sp.add_argument("--experiment", choices=["dichotomy"])
            sp.add_argument("--generations", type=int)
    return ap


def _env_int(name: str):
    val = os.environ.get(name)
    if val is None:
        return None
    try:
        return int(val)
    except ValueError:
        raise ConfigError(name, f"expected an integer, got {val!r}") from None


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        data = load_config(args.config) if args.config else {}
        data = copy.deepcopy(data)
        seed = args.seed if args.seed is not None else _env_int("HRECT_SEED")
        if seed is not None:
            data["seed"] = seed
        if args.input is not None:
            data.setdefault("io", {})["input"] = args.input
        if args.out is not None:
            data.setdefault("io", {})["out"] = str(args.out)
        cfg = RunConfig.from_dict(data)
        threads = args.threads if args.threads is not None else _env_int("HRECT_THREADS")
        if threads is None:
            threads = os.cpu_count() or 1
        if threads < 1:
            raise ConfigError("threads", "must be >= 1")
        if args.command == "carleson" and args.generations is not None \
                and not 1 <= args.generations <= 8:
            raise ConfigError("generations", "must lie in [1, 8]")
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ContractViolation, yaml.YAMLError) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return 2
    outdir = Path(cfg.out)
    outdir.mkdir(parents=True, exist_ok=True)
    extra = {}
    if args.command == "carleson":
        extra = {"experiment": args.experiment, "generations": args.generations}
    try:
        status, outputs = PIPELINES[args.command](cfg, outdir, threads, **extra)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return 2
    except ContractViolation as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    write_manifest(outdir, args.command, cfg, outputs, extra)
    return status


if __name__ == "__main__":
    sys.exit(main())
