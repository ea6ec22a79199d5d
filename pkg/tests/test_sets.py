import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

import viakit as vk
from viakit.common import INF
from viakit.sets import PointCloud


unit_ball = vk.ball([0.0, 0.0], 1.0)
unit_box = vk.box([0.0, 0.0], [1.0, 1.0])
circle = vk.sphere([0.0, 0.0], 1.0)


def test_distance_box_face():
    assert unit_box.distance([2.0, 0.5]) == pytest.approx(1.0)


def test_distance_ball_interior():
    assert unit_ball.distance([0.0, 0.0]) == 0.0


def test_distance_ball_radial():
    assert unit_ball.distance([2.0, 0.0]) == pytest.approx(1.0)


def test_project_ball():
    assert_allclose(unit_ball.project([2.0, 0.0]), [1.0, 0.0])


def test_project_box_clamp():
    assert_allclose(unit_box.project([-1.0, 2.0]), [0.0, 1.0])


def test_project_point_cloud_lowest_index_tie():
    pc = vk.point_cloud_set([[0.0, 0.0], [1.0, 0.0]])
    assert_allclose(pc.project([0.5, 0.0]), [0.0, 0.0])


def test_distance_zero_iff_contains():
    for K in (unit_ball, unit_box, circle, vk.halfspace([1.0, 0.0], 0.5)):
        for x in ([0.3, 0.2], [1.5, 0.0], [1.0, 0.0], [0.5, 0.5]):
            x = np.asarray(x, dtype=float)
            assert (K.distance(x) == 0.0) == K.contains(x)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=2, max_size=2))
def test_projection_is_best_approximation(vals):
    y = np.array(vals)
    for K in (unit_ball, unit_box, vk.halfspace([1.0, -2.0], 0.3), circle):
        p = K.project(y)
        assert K.distance(p) <= 1e-9
        assert abs(np.linalg.norm(p - y) - K.distance(y)) <= 1e-9


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=4, max_size=4))
def test_distance_one_lipschitz(vals):
    x = np.array(vals[:2])
    y = np.array(vals[2:])
    for K in (unit_ball, unit_box, vk.halfspace([1.0, 2.0], 1.0)):
        assert abs(K.distance(x) - K.distance(y)) <= np.linalg.norm(x - y) + 1e-12


def test_tangent_residual_circle_tangent_direction():
    r = vk.tangent_residual(circle, [1.0, 0.0], [0.0, 1.0], h_min=1e-6, h_max=1e-2)
    assert r <= 1e-6  # d((1, h), circle) ~ h^2 / 2


def test_tangent_residual_circle_normal_direction():
    r = vk.tangent_residual(circle, [1.0, 0.0], [1.0, 0.0], h_min=1e-6, h_max=1e-2)
    assert r == pytest.approx(1.0, abs=1e-6)


def test_tangent_residual_whole_space():
    K = vk.whole_space(2)
    assert vk.tangent_residual(K, [3.0, -4.0], [1.0, 7.0]) == 0.0


def test_tangent_residual_requires_membership():
    with pytest.raises(ValueError):
        vk.tangent_residual(unit_ball, [2.0, 0.0], [1.0, 0.0])


def test_projection_normality():
    # y - project(y) is a normal direction: it makes a nonnegative-obtuse
    # angle with every certified tangent direction at the foot point.
    for K, y in ((unit_ball, np.array([2.0, 1.0])),
                 (unit_box, np.array([1.5, 0.5]))):
        x = K.project(y)
        normal = y - x
        # the normal direction itself is far from tangent
        assert vk.tangent_residual(K, x, normal / np.linalg.norm(normal)) > 0.3
        # certified tangents: for the ball the orthogonal, for the box the face
        tangents = [np.array([-normal[1], normal[0]])] if K is unit_ball \
            else [np.array([0.0, 1.0]), np.array([0.0, -1.0])]
        for w in tangents:
            assert vk.tangent_residual(K, x, w) <= 1e-6
            assert normal @ w <= 1e-9 * np.linalg.norm(normal) * np.linalg.norm(w)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(0.05, 0.95), st.floats(0.1, 3.0))
def test_convex_cone_directions_vanish(kx, ky, lam):
    # for convex sets every direction lambda (k - x), k in K, is contingent
    x = np.array([1.0, 0.0])
    k = np.array([kx, ky])
    for K in (unit_box, unit_ball):
        if not K.contains(x):
            continue
        v = lam * (k - x)
        assert vk.tangent_residual(K, x, v, h_min=1e-6, h_max=1e-2) <= 1e-9


def test_sphere_composite_exact():
    assert circle.distance([0.5, 0.0]) == pytest.approx(0.5)
    assert circle.distance([0.0, 2.0]) == pytest.approx(1.0)
    p = circle.project([0.3, 0.4])   # radius 0.5 -> radial out
    assert_allclose(p, [0.6, 0.8], atol=1e-12)
    assert circle.contains([1.0, 0.0])
    assert not circle.contains([0.99, 0.0])


def test_intersection_bounds_and_projection():
    K = vk.intersection(vk.ball([0.0, 0.0], 1.0), vk.halfspace([-1.0, 0.0], -0.5))
    y = np.array([2.0, 0.0])  # true projection (1, 0)
    lo, hi = K.distance_interval(y)
    assert lo <= hi + 1e-12
    z = K.project(y)
    assert K.contains(z) or K.distance(z) <= 1e-9
    assert hi == pytest.approx(1.0, abs=1e-9)


def test_union_min_rule():
    U = vk.union(vk.box([0.0], [1.0]), vk.box([3.0], [4.0]))
    assert U.distance([2.0]) == pytest.approx(1.0)
    assert U.distance([2.9]) == pytest.approx(0.1)
    assert_allclose(U.project([1.4]), [1.0])
    assert U.contains([3.5]) and not U.contains([2.0])


def test_complement_projection_and_unsupported():
    C = vk.complement(vk.ball([0.0, 0.0], 1.0))
    assert C.contains([2.0, 0.0]) and not C.contains([0.2, 0.0])
    assert C.distance([0.6, 0.0]) == pytest.approx(0.4)
    assert_allclose(C.project([0.6, 0.0]), [1.0, 0.0])
    # complements of oracles without an analytic interior rule refuse
    S = vk.complement(vk.sublevel(lambda z: np.atleast_2d(z)[:, 0] - 1.0, 1))
    with pytest.raises(vk.Unsupported):
        S.project([0.0])


def test_product_rules():
    P = vk.product(vk.box([0.0], [1.0]), vk.ball([0.0], 1.0))
    assert P.contains([0.5, -0.5])
    assert P.distance([2.0, 2.0]) == pytest.approx(math.sqrt(2.0))
    assert_allclose(P.project([2.0, 2.0]), [1.0, 1.0])
    assert P.boundary_distance([0.5, 0.0]) == pytest.approx(0.5)


def test_sublevel_membership():
    S = vk.sublevel(lambda z: np.atleast_2d(z)[:, 0] ** 2 - 1.0, 1, lipschitz=2.0)
    assert S.contains([0.5]) and not S.contains([1.5])
    assert S.distance([1.5]) == pytest.approx((1.5 ** 2 - 1.0) / 2.0)


def test_point_cloud_merge_invariant():
    pc = PointCloud(np.array([[0.0], [0.04], [1.0]]), tol=0.1)
    d = np.abs(pc.points - pc.points.T)
    np.fill_diagonal(d, 1.0)
    assert d.min() >= 0.05


def test_set_limit_singletons():
    # K_n = {1/n}: the limit {0} is recovered within eps (plus the tail offset)
    clouds = [PointCloud(np.array([[1.0 / n]])) for n in range(1, 101)]
    out = vk.set_limit(clouds, "upper", 0.05)
    assert len(out) >= 1
    assert out.as_oracle().distance([0.0]) <= 0.05
    assert np.all(np.abs(out.points) <= 2 * 0.05)


def test_set_limit_decreasing_boxes():
    # samples of [0, 1 + 1/n]: the limit is [0, 1]; the finite proxy
    # overshoots by at most eps plus the widest tail box
    clouds = [PointCloud(np.linspace(0.0, 1.0 + 1.0 / n, 30)[:, None])
              for n in range(1, 60)]
    up = vk.set_limit(clouds, "upper", 0.05)
    low = vk.set_limit(clouds, "lower", 0.05)
    slack = 0.05 + 1.0 / 30
    assert np.all(up.points <= 1.0 + slack + 1e-9)
    assert np.all(low.points <= 1.0 + slack + 1e-9)
    assert len(low) >= 1
    # samples well inside [0, 1] survive in the lower limit
    for probe in (0.0, 0.5, 0.95):
        assert low.as_oracle().distance([probe]) <= 0.05


def test_set_limit_alternating():
    clouds = [PointCloud(np.array([[float(n % 2)]])) for n in range(100)]
    up = vk.set_limit(clouds, "upper", 0.01)
    low = vk.set_limit(clouds, "lower", 0.01)
    vals = sorted(float(p[0]) for p in up.points)
    assert vals == [0.0, 1.0]
    assert len(low) == 0


def test_set_limit_lower_subset_of_upper():
    rng = np.random.default_rng(3)
    clouds = [PointCloud(rng.uniform(-1, 1, size=(8, 1))) for _ in range(20)]
    up = vk.set_limit(clouds, "upper", 0.3)
    low = vk.set_limit(clouds, "lower", 0.3)
    if len(low) and len(up):
        oracle = up.as_oracle()
        for pnt in low.points:
            assert oracle.distance(pnt) <= 0.3 + 1e-9


def test_empty_set():
    E = vk.empty_set(2)
    assert not E.contains([0.0, 0.0])
    assert E.distance([0.0, 0.0]) >= INF
