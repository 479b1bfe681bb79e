import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import minimize

from hrect import cloud, coeff, curve
from hrect import hgroup as hg
from hrect.coeff import CoeffKind
from hrect.errors import ContractViolation, RegionTooLarge

from helpers import random_cloud

INF = math.inf
ALL = [CoeffKind(f, p) for f in coeff.FAMILIES for p in (1, INF)]


def region_of(points, weights=None):
    P = np.asarray(points, dtype=float)
    w = np.ones(len(P)) if weights is None else np.asarray(weights, dtype=float)
    return coeff.cloud_region(cloud.PointCloud(P, w, 0.0))


def grid_beta_inf_h1(P: np.ndarray, na: int = 90, no: int = 41, nt: int = 41,
                     span: float = 1.0) -> float:
    """Sup distance to the best horizontal line of H^1: a dense grid over
    (angle, normal offset, height) followed by Nelder-Mead polishing of the
    ten best grid nodes."""
    c = P.mean(axis=0)

    def cost(x):
        phi, off, tau = x
        v = np.array([math.cos(phi), math.sin(phi)])
        z0 = c[:2] + off * np.array([-v[1], v[0]])
        return float(hg.dist_to_plane_raw(P, np.array([*z0, tau]), v[None, :]).max())

    nodes = [(cost((a, o, t)), (a, o, t))
             for a in np.linspace(0, math.pi, na, endpoint=False)
             for o in np.linspace(-span, span, no)
             for t in np.linspace(c[2] - span, c[2] + span, nt)]
    nodes.sort(key=lambda e: e[0])
    best = nodes[0][0]
    for _, x0 in nodes[:10]:
        r = minimize(cost, x0, method="Nelder-Mead",
                     options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 4000})
        best = min(best, float(r.fun))
    return best


# --- trivial regions and basic values ---------------------------------------

def test_trivial_regions_are_zero():
    for P in ([[0.3, 0.1, 2.0]], [[0.0, 0, 0], [0.0, 0, 0]]):
        res = coeff.evaluate(region_of(P), ALL)
        assert all(r.value == 0.0 for r in res.values())


def test_kind_validation():
    with pytest.raises(ContractViolation):
        CoeffKind("beta", 2)
    with pytest.raises(ContractViolation):
        CoeffKind("gamma", 1)
    with pytest.raises(ContractViolation):
        coeff.beta_projection(region_of([[0, 0, 0], [1, 0, 0]]), 1, family="vertical")


@pytest.mark.parametrize("angle", [0.0, 0.7, 2.0])
def test_horizontal_line_is_flat(angle):
    c = cloud.segment_cloud(200, 1.0, angle).translated([0.3, -0.2, 1.5])
    res = coeff.evaluate(coeff.cloud_region(c), ALL)
    for kind, r in res.items():
        # the metric distance is a square root of the height error
        tol = 1e-7 if kind.family in ("beta", "stratified") else 1e-12
        assert r.value <= tol, (kind, r.value)


def test_horizontal_plane_subset_n2():
    rng = np.random.default_rng(1)
    F = hg.random_isotropic_frame(2, 2, rng)
    V = hg.HorizontalPlane(rng.normal(size=5), F)
    P = V.point(rng.normal(size=(60, 2)))
    reg = coeff.cloud_region(cloud.PointCloud(P, np.ones(60), 0.0), k=2)
    res = coeff.evaluate(reg, [CoeffKind("beta", 1), CoeffKind("stratified", INF),
                               CoeffKind("proj_horizontal", 1), CoeffKind("proj_affine", INF)])
    assert max(r.value for r in res.values()) <= 1e-6


def test_subgroup_subset_has_zero_iota():
    F = hg.random_isotropic_frame(2, 1, np.random.default_rng(2))
    P = hg.HorizontalPlane.subgroup(F).point(np.linspace(-1, 1, 40))
    assert coeff.iota(region_of(P), 1).value <= 1e-10
    assert coeff.iota(region_of(P), INF).value <= 1e-10


# --- oracle comparisons ----------------------------------------------------

def test_cantor_beta_inf_against_grid():
    c = cloud.cantor_vertical(3)
    reg = coeff.cloud_region(c)
    got = coeff.beta_horizontal(reg, INF).value
    ref = grid_beta_inf_h1(c.points, span=0.6) / reg.scale
    assert got >= 0.05
    assert got <= ref * (1 + 1e-6)
    assert got >= 0.9 * ref


def test_lambda_theta_beta_inf_sqrt_theta():
    th = 0.05
    P = curve.lambda_theta(th)
    reg = region_of(P)
    got = coeff.beta_horizontal(reg, INF).value
    ref = grid_beta_inf_h1(P, span=0.2) / reg.scale
    assert got <= ref * (1 + 1e-6)
    assert got >= 0.9 * ref
    c = ref / math.sqrt(th)
    assert c > 0.1
    assert got >= 0.9 * c * math.sqrt(th)


def test_square_l1_line_through_two_points():
    sq = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
    val, a, u = coeff.oracle_fit(sq)
    # a side costs 2, a diagonal costs 2 * (1/sqrt 2)
    assert val == pytest.approx(math.sqrt(2))
    r = np.abs((sq[:, 0] - a[0]) * u[1] - (sq[:, 1] - a[1]) * u[0])
    assert np.sum(r < 1e-12) >= 2
    P = np.column_stack([sq, np.zeros(4)])
    reg = region_of(P)
    got = coeff.beta_projection(reg, 1, "affine").value
    assert got == pytest.approx(val / 4 / reg.scale, rel=1e-6)


def test_oracle_examples():
    val, _, _ = coeff.oracle_fit([[0, 0], [1, 1], [2, 2]])
    assert val == pytest.approx(0.0, abs=1e-15)
    tri = np.array([[0, 0], [1, 0], [0.5, 1]])
    val, _, _ = coeff.oracle_fit(tri)
    cands = []
    for i, j in itertools.combinations(range(3), 2):
        d = tri[j] - tri[i]
        d = d / np.linalg.norm(d)
        k = 3 - i - j
        cands.append(abs((tri[k] - tri[i]) @ np.array([-d[1], d[0]])))
    assert val == pytest.approx(min(cands))
    val, _, _ = coeff.oracle_fit([[1, 1], [1, 1], [1, 1]])
    assert val == 0.0
    with pytest.raises(ContractViolation):
        coeff.oracle_fit(np.zeros((13, 2)))


@settings(max_examples=25)
@given(st.integers(0, 2 ** 32 - 1), st.integers(3, 12))
def test_affine_projection_matches_exhaustive_oracle(seed, m):
    rng = np.random.default_rng(seed)
    Z = rng.normal(size=(m, 2))
    w = rng.uniform(0.2, 1.0, m)
    P = np.column_stack([Z, rng.normal(size=m) * 0.1])
    reg = region_of(P, w)
    got = coeff.beta_projection(reg, 1, "affine").value
    ref = coeff.oracle_fit(Z, w / w.sum())[0] / reg.scale
    assert got == pytest.approx(ref, rel=1e-6, abs=1e-12)


def test_two_point_iota_matches_angle_scan():
    rng = np.random.default_rng(9)
    for _ in range(5):
        P = rng.normal(size=(2, 3))
        got = coeff.iota(region_of(P), 1).value
        d = float(hg.dist(P[0], P[1]))
        dz = P[1, :2] - P[0, :2]
        phis = np.linspace(0, math.pi, 200001)
        proj = np.abs(dz[0] * np.cos(phis) + dz[1] * np.sin(phis))
        ref = 0.5 * np.min(np.abs(d - proj)) / d
        assert got == pytest.approx(ref, rel=1e-6, abs=1e-12)


# --- inequalities on random clouds ------------------------------------------

@settings(max_examples=15)
@given(st.integers(0, 2 ** 32 - 1))
def test_chain_of_inequalities(seed):
    c = random_cloud(np.random.default_rng(seed), 80)
    res = coeff.evaluate(coeff.cloud_region(c), ALL)
    v = {(k.family, k.p): r.value for k, r in res.items()}
    assert all(x >= 0 for x in v.values())
    for f in coeff.FAMILIES:
        assert v[(f, 1)] <= v[(f, INF)]
    assert v[("proj_affine", 1)] <= v[("proj_horizontal", 1)]
    assert v[("proj_horizontal", 1)] ** 2 + v[("beta", 1)] ** 4 <= v[("stratified", 1)] ** 4 * (1 + 1e-12)
    assert v[("stratified", 1)] ** 4 <= 2 * v[("beta", 1)] ** 2 * (1 + 1e-12)


@settings(max_examples=10)
@given(st.integers(0, 2 ** 32 - 1), st.floats(0.01, 100.0))
def test_dilation_invariance(seed, r):
    rng = np.random.default_rng(seed)
    c = random_cloud(rng, 60)
    kinds = [CoeffKind("beta", 1), CoeffKind("stratified", INF), CoeffKind("proj_affine", 1),
             CoeffKind("iota", 1)]
    a = coeff.evaluate(coeff.cloud_region(c), kinds)
    b = coeff.evaluate(coeff.cloud_region(c.dilated(r)), kinds)
    for k in kinds:
        assert b[k].value == pytest.approx(a[k].value, rel=1e-6, abs=1e-12)


def test_returned_plane_achieves_value():
    c = random_cloud(np.random.default_rng(3), 60)
    reg = coeff.cloud_region(c)
    r = coeff.beta_horizontal(reg, 1)
    d = hg.dist_to_plane(reg.points, r.plane)
    assert float(np.dot(reg.weights, d)) / reg.scale == pytest.approx(r.value, rel=1e-9)
    r = coeff.beta_horizontal(reg, INF)
    assert float(hg.dist_to_plane(reg.points, r.plane).max()) / reg.scale == pytest.approx(r.value, rel=1e-9)


# --- regions ------------------------------------------------------------------

def test_ball_region_normalization():
    c = cloud.segment_cloud(101)
    reg = coeff.ball_region(c, c.points[50], 0.2)
    assert reg.scale == 0.2
    np.testing.assert_allclose(reg.weights, c.weights[reg.indices] / 0.2)
    with pytest.raises(ContractViolation):
        coeff.ball_region(c, c.points[0], 0.0)


def test_iota_cap():
    c = cloud.segment_cloud(coeff.IOTA_CAP + 1)
    with pytest.raises(RegionTooLarge):
        coeff.iota(coeff.cloud_region(c), 1, max_points=None)


def test_coarsening_moves_mass_by_at_most_radius():
    rng = np.random.default_rng(4)
    Y = rng.normal(size=(3000, 3)) * 0.3
    w = rng.uniform(0.5, 1.0, 3000)
    keep, wc, r = coeff.coarsen(Y, w, 500)
    Yc = Y[keep]
    assert len(Yc) <= 500
    assert wc.sum() == pytest.approx(w.sum())
    nearest = hg.pairwise_dist(Y, Yc).min(axis=1)
    assert nearest.max() <= r * (1 + 1e-12)


def test_large_region_coarsened_value_close():
    c = cloud.sine_graph_cloud(5000, 0.02, 6.0)
    full = coeff.beta_horizontal(coeff.cloud_region(c), 1).value
    sub = cloud.PointCloud(c.points[::5], c.weights[::5], 0.0)
    thin = coeff.beta_horizontal(coeff.cloud_region(sub), 1).value
    assert full == pytest.approx(thin, rel=0.05)


def test_cube_fields_and_csv(tmp_path):
    c = cloud.segment_cloud(64)
    t = cloud.christ_cubes(c, 0.5)
    kinds = [CoeffKind("beta", 1), CoeffKind("proj_affine", INF)]
    f1 = coeff.coeff_fields(t, kinds, 2.0, threads=1)
    f2 = coeff.coeff_fields(t, kinds, 2.0, threads=4)
    for k in kinds:
        assert len(f1[k].values) == len(t.cubes)
        assert all(f1[k][cid] == f2[k][cid] for cid in f1[k].values)
    f1[kinds[0]].write_csv(tmp_path / "f.csv", t)
    lines = (tmp_path / "f.csv").read_text().splitlines()
    assert lines[0] == "cube_id,generation,coeff,value,plane_params"
    assert len(lines) == len(t.cubes) + 1
    assert lines[1].split(",")[2] == "beta_p1"
