import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from hrect import hgroup as hg
from hrect.errors import ContractViolation, DegenerateRatio, InfiniteAngle

from helpers import grid_dist_to_line, sampled_angle

coord = st.floats(-50, 50, allow_nan=False, allow_infinity=False)


def points(n):
    return arrays(np.float64, (2 * n + 1,), elements=coord)


# --- group law ----------------------------------------------------------------

def test_identity_element():
    p = np.array([0.3, -1.2, 2.5])
    np.testing.assert_array_equal(hg.mul(hg.identity(1), p), p)


def test_product_hand_value():
    np.testing.assert_allclose(hg.mul([1.0, 0, 0], [0, 1.0, 0]), [1.0, 1.0, 0.5], atol=0)


def test_inverse_gives_identity():
    p = np.array([0.3, -1.2, 0.7, 2.0, 2.5])
    np.testing.assert_allclose(hg.mul(p, hg.inverse(p)), np.zeros(5), atol=1e-15)


def test_dimension_mismatch_rejected():
    with pytest.raises(ContractViolation):
        hg.mul(np.zeros(3), np.zeros(5))
    with pytest.raises(ContractViolation):
        hg.dist(np.zeros(3), np.zeros(5))
    with pytest.raises(ContractViolation):
        hg.as_points(np.zeros(4))


def test_nonfinite_rejected():
    with pytest.raises(ContractViolation):
        hg.as_points([np.nan, 0, 0])


def test_ambient_group_rejects_k_above_n():
    hg.AmbientGroup(2, 2)
    with pytest.raises(ContractViolation, match="1 ≤ k ≤ n"):
        hg.AmbientGroup(1, 2)


@given(st.integers(1, 3).flatmap(lambda n: st.tuples(points(n), points(n), points(n))))
def test_associativity(pqr):
    p, q, r = pqr
    a = hg.mul(hg.mul(p, q), r)
    b = hg.mul(p, hg.mul(q, r))
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12 * (1 + np.abs(a).max()))


@given(st.integers(1, 3).flatmap(points))
def test_inverse_property(p):
    np.testing.assert_allclose(hg.mul(hg.inverse(p), p), 0.0, atol=1e-12 * (1 + np.abs(p).max() ** 2))


# --- norm and metric ----------------------------------------------------------

def test_norm_examples():
    assert hg.koranyi_norm(np.zeros(3)) == 0
    assert hg.koranyi_norm([0, 0, 0, 0, 1.0]) == pytest.approx(2.0, abs=1e-15)
    z = np.array([3.0, -4.0])
    assert hg.koranyi_norm([*z, 0.0]) == pytest.approx(5.0, abs=1e-15)


@given(st.integers(1, 3).flatmap(lambda n: st.tuples(points(n), points(n), points(n))))
def test_metric_axioms(pqg):
    p, q, g = pqg
    d = hg.dist(p, q)
    assert d == hg.dist(q, p)
    assert hg.dist(p, p) == 0
    # heights of the translated points carry an absolute error of a few ulp of M^2,
    # and the distance feels a height error through its square root
    pts = np.stack([p, q, g])
    M = max(1.0, np.abs(pts[:, :-1]).max(), np.sqrt(np.abs(pts[:, -1])).max())
    floor = 8 * math.sqrt(np.finfo(float).eps) * M
    assert hg.dist(hg.mul(g, p), hg.mul(g, q)) == pytest.approx(d, rel=1e-10, abs=floor)
    assert d <= hg.dist(p, g) + hg.dist(g, q) + 1e-9 * (1 + d)


@given(st.integers(1, 3).flatmap(lambda n: st.tuples(points(n), points(n))),
       st.floats(1e-3, 1e3))
def test_homogeneity(pq, r):
    p, q = pq
    a = hg.dist(hg.dilate(p, r), hg.dilate(q, r))
    assert a == pytest.approx(r * hg.dist(p, q), rel=1e-10, abs=1e-10)


def test_dilate_examples():
    p = np.array([0.5, 2.0, -1.0])
    np.testing.assert_array_equal(hg.dilate(p, 1), p)
    assert hg.koranyi_norm(hg.dilate([0, 0, 1.0], 2)) == pytest.approx(4.0, abs=1e-14)
    with pytest.raises(ContractViolation):
        hg.dilate(p, 0)


def test_pairwise_matches_dist():
    rng = np.random.default_rng(3)
    P = rng.normal(size=(40, 5))
    D = hg.pairwise_dist(P)
    for i in (0, 7, 39):
        np.testing.assert_allclose(D[i], hg.dist(P, P[i]), rtol=1e-12)


# --- rotations ----------------------------------------------------------------

@pytest.mark.parametrize("n", [1, 2, 3])
def test_rotation_is_isometry(n):
    rng = np.random.default_rng(n)
    R = hg.Rotation.random(n, rng)
    A = R.A
    np.testing.assert_allclose(A.T @ A, np.eye(2 * n), atol=1e-10)
    z, w = rng.normal(size=(2, 1000, 2 * n))
    np.testing.assert_allclose(hg.omega(R.apply_vectors(z), R.apply_vectors(w)),
                               hg.omega(z, w), atol=1e-10)
    p, q = rng.normal(size=(2, 1000, 2 * n + 1))
    np.testing.assert_allclose(hg.dist(hg.rotate(R, p), hg.rotate(R, q)), hg.dist(p, q),
                               atol=1e-10)
    np.testing.assert_array_equal(hg.rotate(R, p)[:, -1], p[:, -1])


def test_rotation_rejects_non_symplectic():
    with pytest.raises(ContractViolation):
        hg.Rotation(np.diag([1.0, -1.0]))


# --- frames, planes, projections --------------------------------------------

def test_frame_checks():
    hg.IsotropicFrame(np.array([[1.0, 0, 0, 0], [0, 1.0, 0, 0]]))
    with pytest.raises(ContractViolation, match="isotropic"):
        hg.IsotropicFrame(np.array([[1.0, 0, 0, 0], [0, 0, 1.0, 0]]))
    with pytest.raises(ContractViolation, match="orthonormal"):
        hg.IsotropicFrame(np.array([[1.0, 1.0]]))
    with pytest.raises(ContractViolation):
        hg.IsotropicFrame(np.eye(2))


@pytest.mark.parametrize("n,k", [(1, 1), (2, 1), (2, 2), (3, 2)])
def test_random_frames_are_isotropic(n, k):
    F = hg.random_isotropic_frame(n, k, np.random.default_rng(n * 10 + k))
    B = F.basis
    np.testing.assert_allclose(B @ B.T, np.eye(k), atol=1e-10)
    np.testing.assert_allclose(B @ hg.symplectic_matrix(n) @ B.T, 0, atol=1e-10)


def test_projection_hand_value():
    V0 = hg.HorizontalPlane.subgroup(hg.line_frame(0.0))
    np.testing.assert_allclose(hg.project([3.0, 4.0, 5.0], V0), [3.0, 0.0, 0.0], atol=1e-15)
    assert hg.project([3.0, 4.0, 5.0], "z").tolist() == [3.0, 4.0]
    assert hg.project([3.0, 4.0, 5.0], "t") == 5.0


@pytest.mark.parametrize("n,k", [(1, 1), (2, 1), (2, 2)])
def test_projection_properties(n, k):
    rng = np.random.default_rng(7 + n + k)
    V = hg.HorizontalPlane(rng.normal(size=2 * n + 1), hg.random_isotropic_frame(n, k, rng))
    v = V.point(rng.normal(size=(50, k)))
    np.testing.assert_allclose(hg.project_plane(v, V), v, atol=1e-12)
    p, q = rng.normal(size=(2, 1000, 2 * n + 1)) * 2
    assert np.all(hg.dist(hg.project_plane(p, V), hg.project_plane(q, V))
                  <= hg.dist(p, q) * (1 + 1e-12))
    # P_V(p) . P_W-part reconstructs p
    np.testing.assert_allclose(hg.mul(hg.project_plane(p, V), hg.project_complement(p, V)), p,
                               atol=1e-12)


def test_complement_formula_for_subgroups():
    rng = np.random.default_rng(11)
    F = hg.random_isotropic_frame(2, 1, rng)
    p = rng.normal(size=(100, 5))
    a = F.project(p[:, :-1])
    b = p[:, :-1] - a
    expect = np.column_stack([b, p[:, -1] - hg.omega(a, b)])
    np.testing.assert_allclose(hg.project_complement(p, F), expect, atol=1e-12)


def test_rebasing_leaves_plane_unchanged():
    rng = np.random.default_rng(5)
    V = hg.HorizontalPlane(rng.normal(size=5), hg.random_isotropic_frame(2, 2, rng))
    W = V.rebased([0.7, -1.3])
    y = rng.normal(size=(200, 5))
    np.testing.assert_allclose(hg.dist_to_plane(y, V), hg.dist_to_plane(y, W), atol=1e-10)


# --- distance to a plane ------------------------------------------------------

def test_dist_to_plane_examples():
    V = hg.HorizontalPlane.subgroup(hg.line_frame(0.0))
    assert hg.dist_to_plane([0.0, 0.0, 1.0], V) == pytest.approx(2.0, abs=1e-14)
    assert hg.dist_to_plane([0.0, 1.0, 0.0], V) == pytest.approx(1.0, abs=1e-14)
    assert hg.dist_to_plane([3.0, 0.0, 0.0], V) == 0.0
    with pytest.raises(ContractViolation):
        hg.dist_to_plane([0.0, 0.0, 1.0], V, tol=0)


def test_dist_to_plane_matches_grid_oracle():
    rng = np.random.default_rng(2024)
    for i in range(100):
        n = 1 + i % 2
        V = hg.HorizontalPlane(rng.normal(size=2 * n + 1), hg.random_isotropic_frame(n, 1, rng))
        y = rng.normal(size=2 * n + 1) * 1.5
        got = float(hg.dist_to_plane(y, V))
        ref = grid_dist_to_line(y, V.base, V.frame.basis[0])
        assert got == pytest.approx(ref, rel=1e-6, abs=1e-9)
        assert got <= hg.dist(y, V.base) + 1e-12


@given(st.integers(1, 3).flatmap(lambda n: st.tuples(points(n), points(n))), st.integers(0, 2 ** 32 - 1))
def test_dist_to_plane_is_a_lower_bound_on_plane_samples(ybase, seed):
    y, base = ybase
    n = (len(y) - 1) // 2
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, n + 1))
    V = hg.HorizontalPlane(base, hg.random_isotropic_frame(n, k, rng))
    d = float(hg.dist_to_plane(y, V))
    samples = V.point(rng.normal(size=(200, k)) * 10)
    scale = 1 + np.abs(y).max() + np.abs(base).max()
    assert d <= hg.dist(samples, y).min() + 1e-9 * scale
    assert d <= hg.dist(y, V.base) + 1e-9 * scale


# --- angles -------------------------------------------------------------------

def test_angle_examples():
    V = hg.HorizontalPlane.subgroup(hg.line_frame(0.3))
    assert hg.angle(V, V) == 1.0
    delta = 0.1
    W = hg.HorizontalPlane.subgroup(hg.line_frame(0.3 + delta))
    a = hg.angle(V, W)
    assert a == pytest.approx(1 / math.cos(delta), rel=1e-12)
    assert a == pytest.approx(1 + delta ** 2 / 2, abs=delta ** 4)
    assert a == pytest.approx(sampled_angle(V, W, np.random.default_rng(0)), rel=1e-9)
    with pytest.raises(InfiniteAngle):
        hg.angle(V, hg.HorizontalPlane.subgroup(hg.line_frame(0.3 + math.pi / 2)))


@pytest.mark.parametrize("n,k", [(1, 1), (2, 1), (3, 1), (2, 2)])
def test_angle_symmetric_and_matches_sampled_sup(n, k):
    rng = np.random.default_rng(n + 5 * k)
    for _ in range(20):
        V1 = hg.HorizontalPlane.subgroup(hg.random_isotropic_frame(n, k, rng))
        V2 = hg.HorizontalPlane.subgroup(hg.random_isotropic_frame(n, k, rng))
        try:
            a = hg.angle(V1, V2)
        except InfiniteAngle:
            continue
        assert a >= 1
        if k == 1:
            assert hg.angle(V2, V1) == pytest.approx(a, rel=1e-9)
            assert sampled_angle(V1, V2, rng) == pytest.approx(a, rel=1e-9)
        else:
            assert sampled_angle(V1, V2, rng) <= a * (1 + 1e-9)


# --- intrinsic Lipschitz constants -------------------------------------------

def test_intrinsic_constant_of_the_plane_itself_is_zero():
    V = hg.HorizontalPlane([0.2, 0.1, 0.4], hg.line_frame(0.7))
    v = V.point(np.linspace(-1, 1, 30))
    assert hg.intrinsic_lip_constant(list(zip(v, v)), V) == 0.0


def test_intrinsic_constant_single_pair_hand_value():
    V = hg.HorizontalPlane.subgroup(hg.line_frame(0.0))
    c = 0.25
    phi = np.array([0.0, c, 0.0])
    dom = np.array([[1.0, 0, 0], [0.0, 0, 0]])
    G = hg.mul(dom, phi)
    # ||P_W|| = 2 sqrt(|a - b| c), ||P_V|| = |a - b| with a - b = 1
    assert hg.intrinsic_lip_constant(list(zip(dom, G)), V) == pytest.approx(2 * math.sqrt(c), rel=1e-14)


def test_intrinsic_constant_rejects_degenerate_pairs():
    V = hg.HorizontalPlane.subgroup(hg.line_frame(0.0))
    G = np.array([[0.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    with pytest.raises(DegenerateRatio):
        hg.intrinsic_lip_constant(G, V)
    with pytest.raises(ContractViolation):
        hg.intrinsic_lip_constant(G[:1], V)
