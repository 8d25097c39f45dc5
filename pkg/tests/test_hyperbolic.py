import math

from hypothesis import given, settings, strategies as st
import numpy as np
import pytest
import torch

from hykge import hyperbolic as H
from hykge.errors import PointOutsideBall

import oracles

T = lambda *x: torch.tensor(x, dtype=torch.float64)  # noqa: E731


def ball_points(n, k, xi, seed, max_radius=0.95):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=(n, k))
    r = max_radius * rng.uniform(size=(n, 1)) ** (1 / k)
    return torch.from_numpy(v / np.linalg.norm(v, axis=1, keepdims=True) * r / math.sqrt(xi))


def test_exp_examples():
    assert torch.equal(H.exp_map_zero(torch.zeros(3, dtype=torch.float64), 1.0),
                       torch.zeros(3, dtype=torch.float64))
    out = H.exp_map_zero(T(0.3, 0.0), 1.0)
    assert abs(float(out[0]) - 0.291313) < 1e-6 and float(out[1]) == 0


def test_log_examples():
    assert torch.equal(H.log_map_zero(torch.zeros(2, dtype=torch.float64), 1.0),
                       torch.zeros(2, dtype=torch.float64))
    out = H.log_map_zero(T(math.tanh(0.3), 0.0), 1.0)
    assert abs(float(out[0]) - 0.3) < 1e-9
    out = H.log_map_zero(T(0.291313, 0.0), 1.0)
    assert abs(float(out[0]) - 0.3) < 1e-6


def test_log_outside_ball():
    with pytest.raises(PointOutsideBall):
        H.log_map_zero(T(1.0, 0.0), 1.0)
    with pytest.raises(PointOutsideBall):
        H.log_map_zero(T(0.6, 0.0), 4.0)


def test_mobius_examples():
    x, y = T(0.3, 0.0), T(0.4, 0.0)
    zero = torch.zeros(2, dtype=torch.float64)
    assert torch.allclose(H.mobius_add(x, y, 1.0), T(0.625, 0.0), rtol=0, atol=1e-15)
    assert torch.equal(H.mobius_add(zero, y, 1.0), y)
    assert torch.equal(H.mobius_add(x, zero, 1.0), x)
    assert H.mobius_add(x, -x, 1.0).abs().max() < 1e-12
    with pytest.raises(PointOutsideBall):
        H.mobius_add(T(1.2, 0.0), y, 1.0)


def test_distance_examples():
    x = torch.zeros(2, dtype=torch.float64)
    assert abs(float(H.hyp_distance(x, T(0.5, 0.0), 1.0)) - 1.098612) < 1e-6
    y = T(0.1, -0.2)
    assert float(H.hyp_distance(y, y, 1.0)) == 0.0
    with pytest.raises(PointOutsideBall):
        H.hyp_distance(x, T(2.0, 0.0), 1.0)


@pytest.mark.parametrize("xi", [0.3, 1.0, 2.5])
def test_against_scalar_oracle(xi):
    x, y = ball_points(20, 6, xi, 1), ball_points(20, 6, xi, 2)
    v = torch.from_numpy(np.random.default_rng(3).normal(size=(20, 6))) * 0.3
    for i in range(20):
        xs, ys, vs = x[i].tolist(), y[i].tolist(), v[i].tolist()
        np.testing.assert_allclose(H.exp_map_zero(v[i], xi).numpy(), oracles.expmap0(vs, xi),
                                   atol=1e-14)
        np.testing.assert_allclose(H.log_map_zero(y[i], xi).numpy(), oracles.logmap0(ys, xi),
                                   atol=1e-12)
        np.testing.assert_allclose(H.mobius_add(x[i], y[i], xi).numpy(),
                                   oracles.mobius(xs, ys, xi), atol=1e-13)
        assert abs(float(H.hyp_distance(x[i], y[i], xi)) - oracles.hdist(xs, ys, xi)) < 1e-10


def test_identities_batched():
    xi = 1.3
    x, y = ball_points(200, 8, xi, 10), ball_points(200, 8, xi, 11)
    assert (H.mobius_add(-x, H.mobius_add(x, y, xi), xi) - y).abs().max() < 1e-10
    assert (H.hyp_distance(x, y, xi) - H.hyp_distance(y, x, xi)).abs().max() < 1e-12
    v = torch.from_numpy(np.random.default_rng(12).normal(size=(200, 8)))
    v = v / v.norm(dim=-1, keepdim=True) * 3 * torch.rand(200, 1, dtype=torch.float64)
    assert (H.log_map_zero(H.exp_map_zero(v, xi), xi) - v).abs().max() < 1e-10
    assert (H.exp_map_zero(H.log_map_zero(x, xi), xi) - x).abs().max() < 1e-10


def test_triangle_inequality():
    xi = 0.7
    a, b, c = (ball_points(200, 5, xi, s) for s in (20, 21, 22))
    d = lambda p, q: H.hyp_distance(p, q, xi)  # noqa: E731
    assert bool((d(a, c) <= d(a, b) + d(b, c) + 1e-10).all())


def test_flat_limit():
    x = torch.from_numpy(np.random.default_rng(0).normal(size=(50, 6))) * 0.5
    y = torch.from_numpy(np.random.default_rng(1).normal(size=(50, 6))) * 0.5
    xi = 1e-8
    d = H.hyp_distance(H.exp_map_zero(x, xi), H.exp_map_zero(y, xi), xi)
    euclid = 2 * (x - y).norm(dim=-1)
    assert bool(((d - euclid).abs() / euclid < 1e-3).all())
    assert (H.mobius_add(x * 1e-2, y * 1e-2, xi) - (x + y) * 1e-2).abs().max() < 1e-6


def test_outputs_inside_ball_near_boundary():
    for xi in (0.5, 1.0, 4.0):
        v = torch.from_numpy(np.random.default_rng(5).normal(size=(500, 4))) * 40
        b = H.exp_map_zero(v, xi)
        assert bool((xi * (b * b).sum(-1) < 1).all())
        edge = b / b.norm(dim=-1, keepdim=True) * (1 - 1e-12) / math.sqrt(xi)
        m = H.mobius_add(edge, edge.flip(0), xi)
        assert bool((xi * (m * m).sum(-1) < 1).all())
        assert bool(torch.isfinite(H.hyp_distance(edge, -edge, xi)).all())


def test_clamp_radius():
    xi = 2.0
    out = H.exp_map_zero(T(100.0, 0.0), xi)
    assert abs(float(out.norm()) - (1 - H.BALL_EPS) / math.sqrt(xi)) < 1e-15


def test_general_point_maps():
    xi = 0.8
    x, y = ball_points(200, 6, xi, 30), ball_points(200, 6, xi, 31)
    zero = torch.zeros_like(x)
    v = H.log_map_at(x, y, xi)
    assert (H.exp_map_at(x, v, xi) - y).abs().max() < 1e-9
    assert H.log_map_at(x, x, xi).abs().max() < 1e-12
    w = torch.from_numpy(np.random.default_rng(32).normal(size=(200, 6)))
    assert (H.exp_map_at(zero, w, xi) - H.exp_map_zero(w, xi)).abs().max() < 1e-14
    assert (H.log_map_at(zero, y, xi) - H.log_map_zero(y, xi)).abs().max() < 1e-14


def test_conformal_factor():
    assert float(H.conformal_factor(torch.zeros(3, dtype=torch.float64), 1.0)) == 2.0
    assert abs(float(H.conformal_factor(T(0.5, 0.0), 1.0)) - 8 / 3) < 1e-15


def test_curvature_parametrization():
    assert abs(float(H.curvature_from_raw(T(0.541325))) - 1.0) < 1e-6
    assert abs(float(H.curvature_from_raw(T(math.log(math.e - 1)))) - 1.0) < 1e-15
    tiny = float(H.curvature_from_raw(T(-20.0)))
    assert tiny > 0 and abs(tiny - 2.06e-9) < 1e-11
    c = torch.linspace(-30, 30, 601, dtype=torch.float64)
    xi = H.curvature_from_raw(c)
    assert bool((xi > 0).all()) and bool((xi[1:] > xi[:-1]).all())
    assert torch.allclose(H.raw_from_curvature(H.curvature_from_raw(c[c > -20])), c[c > -20],
                          atol=1e-9)


def test_zero_gradients_are_finite():
    v = torch.zeros(4, dtype=torch.float64, requires_grad=True)
    H.exp_map_zero(v, 1.0).sum().backward()
    assert torch.equal(v.grad, torch.ones(4, dtype=torch.float64))
    y = torch.zeros(4, dtype=torch.float64, requires_grad=True)
    H.hyp_distance(y, torch.zeros(4, dtype=torch.float64), 1.0).backward()
    assert bool(torch.isfinite(y.grad).all())


def test_distance_matrix_matches_pairwise():
    xi = torch.tensor([[0.5], [1.0], [2.0]], dtype=torch.float64)
    x = torch.cat([ball_points(1, 6, float(c), i) for i, c in enumerate(xi.flatten())])
    y = ball_points(40, 6, 2.0, 9)
    mat = H.hyp_distance_matrix(x, y, xi)
    for i in range(3):
        ref = H.hyp_distance(x[i].expand(40, 6), y, float(xi[i]))
        assert (mat[i] - ref).abs().max() < 1e-10


coords = st.floats(-0.6, 0.6, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(st.lists(coords, min_size=4, max_size=4), st.lists(coords, min_size=4, max_size=4),
       st.floats(0.1, 2.0))
def test_left_cancellation_property(x, y, xi):
    x = torch.tensor(x, dtype=torch.float64) / math.sqrt(2 * xi)
    y = torch.tensor(y, dtype=torch.float64) / math.sqrt(2 * xi)
    assert (H.mobius_add(-x, H.mobius_add(x, y, xi), xi) - y).abs().max() < 1e-10
