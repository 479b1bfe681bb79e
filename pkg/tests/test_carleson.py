import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hrect import carleson, cloud, coeff, curve
from hrect.coeff import CoeffField, CoeffKind, CoeffResult
from hrect.errors import ContractViolation, CoverageError

KIND = CoeffKind("beta", 1)


def field_of(tree, fn) -> CoeffField:
    f = CoeffField(KIND, 2.0)
    for Q in tree.cubes:
        f.values[Q.id] = CoeffResult(float(fn(Q)), None, True, KIND)
    return f


def random_tree(seed, m=None):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(2, 80)) if m is None else m
    c = cloud.PointCloud(rng.normal(size=(m, 3)), rng.uniform(0.1, 1.0, m), 0.02)
    return cloud.christ_cubes(c, 0.5), rng


def test_zero_field_gives_zero():
    t, _ = random_tree(0, 50)
    assert carleson.glem_sum(t, field_of(t, lambda Q: 0.0), 2) == 0.0


@settings(max_examples=20)
@given(st.integers(0, 2 ** 32 - 1), st.sampled_from([1.0, 2.0, 4.0]))
def test_unit_field_counts_generations(seed, q):
    # each generation partitions the mass, so h = 1 scores one per generation
    t, _ = random_tree(seed)
    s = carleson.glem_sum(t, field_of(t, lambda Q: 1.0), q)
    assert s == pytest.approx(len(t.generations), rel=1e-12)


@settings(max_examples=20)
@given(st.integers(0, 2 ** 32 - 1))
def test_additivity_over_children(seed):
    t, rng = random_tree(seed)
    vals = rng.uniform(0, 1, len(t.cubes))
    f = field_of(t, lambda Q: vals[Q.id])
    for Q in t.cubes:
        if not Q.children:
            continue
        lhs = carleson.glem_sum(t, f, 2, Q.id) * Q.mass
        rhs = vals[Q.id] ** 2 * Q.mass + math.fsum(
            carleson.glem_sum(t, f, 2, c) * t.cubes[c].mass for c in Q.children)
        assert lhs == pytest.approx(rhs, rel=1e-10)


@settings(max_examples=20)
@given(st.integers(0, 2 ** 32 - 1), st.floats(0.05, 0.9))
def test_weak_count_chebyshev(seed, eps):
    t, rng = random_tree(seed)
    vals = rng.uniform(0, 1, len(t.cubes))
    f = field_of(t, lambda Q: vals[Q.id])
    cnt = carleson.wgl_count(t, f, eps)
    assert cnt <= carleson.glem_sum(t, f, 2) / eps ** 2 * (1 + 1e-12)
    assert carleson.wgl_count(t, f, 1.0) == 0.0
    assert carleson.wgl_count(t, f, -1.0) == pytest.approx(len(t.generations))


def test_missing_cube_raises_coverage_error():
    t, _ = random_tree(1, 40)
    f = field_of(t, lambda Q: 0.5)
    del f.values[t.cubes[-1].id]
    with pytest.raises(CoverageError):
        carleson.glem_sum(t, f, 2)


def test_generation_filter_and_report():
    t, _ = random_tree(2, 60)
    f = field_of(t, lambda Q: 0.5)
    gens = set(t.generations[1:3])
    rep = carleson.cube_report(t, f, 2, None, gens)
    assert rep.levels == sorted(gens)
    assert rep.increments == pytest.approx([0.25, 0.25])
    assert rep.partial_sums == pytest.approx([0.25, 0.5])
    d = carleson.report_dict(rep)
    assert d["partial_sums"] == rep.partial_sums
    assert rep.coeff == "beta_p1"


def test_single_point_cloud():
    c = cloud.PointCloud(np.zeros((1, 3)), np.ones(1), 0.0)
    t = cloud.christ_cubes(c, 0.5, 3)
    f = coeff.coeff_fields(t, [KIND], 2.0)[KIND]
    assert carleson.glem_sum(t, f, 2) == 0.0
    net = cloud.dyadic_net(c, 3)
    rep = carleson.multires_sum(c, net, levels=[1, 2])
    assert all(v == 0.0 for v in rep.increments)


def test_multires_requires_large_A():
    c = cloud.segment_cloud(17)
    with pytest.raises(ContractViolation):
        carleson.multires_sum(c, cloud.dyadic_net(c, 3), A=4.0)


def test_segment_multires_is_flat():
    c = cloud.segment_cloud(129)
    rep = carleson.multires_sum(c, cloud.dyadic_net(c, 5), levels=[2, 3, 4, 5], threads=4)
    assert rep.levels == [2, 3, 4, 5]
    assert max(rep.increments) <= 1e-12


def test_multires_level_term_by_hand():
    c = cloud.sine_graph_cloud(65, 0.1, 8.0)
    net = cloud.dyadic_net(c, 3)
    rep = carleson.multires_sum(c, net, levels=[3])
    r = 5.0 * 2.0 ** -3
    vals = [coeff.evaluate(coeff.ball_region(c, c.points[x], r), [KIND], seed=int(x))[KIND].value
            for x in net.levels[3]]
    assert rep.increments[0] == pytest.approx(2.0 ** -3 * sum(v * v for v in vals), rel=1e-12)


def test_ball_integral_by_hand():
    c = cloud.sine_graph_cloud(33, 0.1, 8.0)
    centers = [0, 10, 20]
    got = carleson.ball_integral_sum(c, KIND, 2, 1, 2, centers=centers)
    w = c.weights[centers] * c.mass / c.weights[centers].sum()
    ref = 0.0
    for j in (1, 2):
        for x, wx in zip(centers, w):
            reg = coeff.ball_region(c, c.points[x], 2.0 ** -j)
            ref += math.log(2) * wx * coeff.evaluate(reg, [KIND], seed=x)[KIND].value ** 2
    assert got == pytest.approx(ref / c.mass, rel=1e-12)
    seg = cloud.segment_cloud(33)
    assert carleson.ball_integral_sum(seg, KIND, 2, 1, 2, centers=centers) <= 1e-20


def test_harmonic_fit():
    levels = [3, 4, 5, 6, 7]
    x = [1 / (math.ceil(j / 2) + 1) for j in levels]
    a, res = carleson.harmonic_fit(levels, [0.7 * v for v in x])
    assert a == pytest.approx(0.7) and res == pytest.approx(0.0, abs=1e-14)
    assert carleson.harmonic_fit(levels, [0.0] * 5) == (0.0, 0.0)


def test_small_dichotomy_run(tmp_path):
    cfg = curve.CurveConfig(0.2, 8)
    r1 = carleson.dichotomy_experiment(cfg, 3)
    r2 = carleson.dichotomy_experiment(cfg, 3, threads=4)
    assert r1.levels == [3]
    assert r1.multires.increments[0] > 0
    assert r1.cubes.increments[0] > 0
    assert r1.summary() == r2.summary()
    paths = r1.write(tmp_path)
    summary = json.loads(paths[-1].read_text())
    assert summary["levels"] == [3]
    with pytest.raises(ContractViolation):
        carleson.dichotomy_experiment(cfg, 9)


def test_csv_output(tmp_path):
    rep = carleson.CarlesonReport("beta_p1", 2, 2.0, [1, 2], [0.5, 0.25])
    rep.write_csv(tmp_path / "r.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "level,increment,partial_sum"
    assert lines[2] == "2,0.25,0.75"
