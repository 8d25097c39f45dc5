"""Poincaré-ball geometry with curvature ``-xi`` (``xi > 0``).

Points live in ``{x : xi * |x|^2 < 1}``.  ``xi`` may be a Python float or a
tensor broadcastable against ``(..., 1)``, so one call can use a different
curvature per row.  Public functions validate ball membership unless
``check=False`` is passed (the model code does that on the hot path, where
the clamps below already guarantee it).
"""

import math

import torch

from .errors import PointOutsideBall

NORM_FLOOR = 1e-15
BALL_EPS = 1e-5
ATANH_MAX = 1.0 - 1e-15


def _t(x):
    if isinstance(x, torch.Tensor):
        return x
    return torch.as_tensor(x, dtype=torch.float64)


def _sqrt_xi(xi):
    if isinstance(xi, torch.Tensor):
        return xi.sqrt()
    return math.sqrt(xi)


def _norm(x):
    return x.norm(dim=-1, keepdim=True).clamp_min(NORM_FLOOR)


def artanh(x):
    return torch.atanh(x.clamp(max=ATANH_MAX))


def project(x, xi):
    """Rescale points with ``sqrt(xi)|x| >= 1 - 1e-5`` onto that radius."""
    max_norm = _max_radius(xi)
    norm = _norm(x)
    return torch.where(norm > max_norm, x * (max_norm / norm), x)


def check_in_ball(x, xi, name="point"):
    x = _t(x)
    sq = (x * x).sum(dim=-1, keepdim=True)
    if not bool((xi * sq < 1.0).all()):
        raise PointOutsideBall(f"{name} lies outside the Poincaré ball")


def exp_map_zero(v, xi):
    """Map a tangent vector at the origin into the ball."""
    v = _t(v)
    s = _sqrt_xi(xi)
    norm = _norm(v)
    return project(torch.tanh(s * norm) * v / (s * norm), xi)


def log_map_zero(y, xi, check=True):
    """Inverse of :func:`exp_map_zero`."""
    y = _t(y)
    if check:
        check_in_ball(y, xi)
    s = _sqrt_xi(xi)
    norm = _norm(y)
    return artanh(s * norm) * y / (s * norm)


def mobius_add(x, y, xi, check=True):
    """Möbius addition ``x ⊕ y``, clamped back into the ball."""
    x, y = _t(x), _t(y)
    if check:
        check_in_ball(x, xi, "x")
        check_in_ball(y, xi, "y")
    x2 = (x * x).sum(dim=-1, keepdim=True)
    y2 = (y * y).sum(dim=-1, keepdim=True)
    xy = (x * y).sum(dim=-1, keepdim=True)
    num = (1 + 2 * xi * xy + xi * y2) * x + (1 - xi * x2) * y
    den = 1 + 2 * xi * xy + xi**2 * x2 * y2
    return project(num / den, xi)


def _max_radius(xi):
    return (1.0 - BALL_EPS) / _sqrt_xi(xi)


def hyp_distance(x, y, xi, check=True):
    """Geodesic distance ``(2/sqrt(xi)) artanh(sqrt(xi) |-x ⊕ y|)``.

    ``|-x ⊕ y|`` is evaluated in the equivalent closed form
    ``|x - y| / sqrt(1 - 2 xi <x,y> + xi^2 |x|^2 |y|^2)``, which is exactly 0
    at ``x = y``; it is clamped to the same radius as :func:`mobius_add`.
    """
    x, y = _t(x), _t(y)
    if check:
        check_in_ball(x, xi, "x")
        check_in_ball(y, xi, "y")
    x2 = (x * x).sum(dim=-1, keepdim=True)
    y2 = (y * y).sum(dim=-1, keepdim=True)
    xy = (x * y).sum(dim=-1, keepdim=True)
    den = (1 - 2 * xi * xy + xi**2 * x2 * y2).sqrt()
    norm = torch.minimum((x - y).norm(dim=-1, keepdim=True) / den, _t(_max_radius(xi)))
    return (2.0 / _sqrt_xi(xi) * artanh(_sqrt_xi(xi) * norm)).squeeze(-1)


def hyp_distance_matrix(x, y, xi):
    """Pairwise distances between rows of ``x`` (B, k) and ``y`` (N, k).

    ``xi`` is a float or a (B, 1) tensor.  Same closed form as
    :func:`hyp_distance`, with ``2<x,y> = |x|^2 + |y|^2 - |x - y|^2`` and
    ``|x - y|`` from the per-pair ``torch.cdist`` kernel.  Unlike a matrix
    product, that kernel rounds every pair identically, so equal candidates
    get bitwise equal distances wherever they sit in ``y``.
    """
    x2 = (x * x).sum(dim=-1, keepdim=True)  # (B, 1)
    y2 = (y * y).sum(dim=-1).unsqueeze(0)  # (1, N)
    diff = torch.cdist(x, y, compute_mode="donot_use_mm_for_euclid_dist")
    den = (1 - xi * (x2 + y2 - diff**2) + xi**2 * x2 * y2).sqrt()
    norm = torch.minimum(diff / den, _t(_max_radius(xi)))
    return 2.0 / _sqrt_xi(xi) * artanh(_sqrt_xi(xi) * norm)


def conformal_factor(x, xi):
    """``lambda_x = 2 / (1 - xi |x|^2)``."""
    x2 = (x * x).sum(dim=-1, keepdim=True)
    return 2.0 / (1.0 - xi * x2)


def exp_map_at(x, v, xi, check=True):
    """Exponential map at base point ``x``."""
    x, v = _t(x), _t(v)
    if check:
        check_in_ball(x, xi, "x")
    s = _sqrt_xi(xi)
    norm = _norm(v)
    step = torch.tanh(s * conformal_factor(x, xi) * norm / 2) * v / (s * norm)
    return mobius_add(x, project(step, xi), xi, check=False)


def log_map_at(x, y, xi, check=True):
    """Logarithmic map at base point ``x``; inverse of :func:`exp_map_at`."""
    x, y = _t(x), _t(y)
    if check:
        check_in_ball(x, xi, "x")
        check_in_ball(y, xi, "y")
    s = _sqrt_xi(xi)
    diff = mobius_add(-x, y, xi, check=False)
    norm = _norm(diff)
    return 2.0 / (s * conformal_factor(x, xi)) * artanh(s * norm) * diff / norm


def curvature_from_raw(c):
    """Softplus ``ln(1 + exp(c))``: smooth, monotone and strictly positive."""
    c = _t(c)
    return torch.logaddexp(c, torch.zeros_like(c))


def raw_from_curvature(xi):
    """Inverse softplus, ``ln(exp(xi) - 1)``."""
    xi = _t(xi)
    return xi + torch.log(-torch.expm1(-xi))
