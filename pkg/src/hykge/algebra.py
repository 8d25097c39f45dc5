"""Blockwise quaternion and complex algebra over embedding vectors.

A quaternion vector of length ``k`` holds ``k // 4`` consecutive blocks
``(a, b, c, d)``; a complex vector of length ``k`` holds ``k // 2``
consecutive ``(re, im)`` pairs.  All functions broadcast over leading
dimensions and operate on the last one.
"""

import torch

from .errors import LengthMismatch, NotDivisibleBy2, NotDivisibleBy4, ZeroNormBlock, ZeroNormPair

NORM_FLOOR = 1e-15


def _as_tensor(x):
    if isinstance(x, torch.Tensor):
        return x
    return torch.as_tensor(x, dtype=torch.float64)


def _blocks(x, width):
    if x.shape[-1] % width:
        err = NotDivisibleBy4 if width == 4 else NotDivisibleBy2
        raise err(f"last dimension {x.shape[-1]} is not divisible by {width}")
    return x.reshape(*x.shape[:-1], x.shape[-1] // width, width)


def _check_same_length(x, y):
    if x.shape[-1] != y.shape[-1]:
        raise LengthMismatch(f"lengths differ: {x.shape[-1]} vs {y.shape[-1]}")


def quat_hamilton_product(q1, q2):
    """Blockwise Hamilton product ``q1 ⊗ q2`` (non-commutative)."""
    q1, q2 = _as_tensor(q1), _as_tensor(q2)
    _check_same_length(q1, q2)
    x, y = _blocks(q1, 4), _blocks(q2, 4)
    a1, b1, c1, d1 = x.unbind(-1)
    a2, b2, c2, d2 = y.unbind(-1)
    out = torch.stack(
        (
            a1 * a2 - b1 * b2 - c1 * c2 - d1 * d2,
            a1 * b2 + b1 * a2 + c1 * d2 - d1 * c2,
            a1 * c2 - b1 * d2 + c1 * a2 + d1 * b2,
            a1 * d2 + b1 * c2 - c1 * b2 + d1 * a2,
        ),
        dim=-1,
    )
    return out.reshape(torch.broadcast_shapes(q1.shape, q2.shape))


def quat_normalize(q, check=True):
    """Divide every quaternion block by its Euclidean 4-norm.

    With ``check`` set, a block whose norm is at most ``1e-15`` raises
    :class:`ZeroNormBlock`; the training path disables the check to avoid
    a host sync per forward pass.
    """
    q = _as_tensor(q)
    x = _blocks(q, 4)
    norm = x.norm(dim=-1, keepdim=True)
    if check and bool((norm <= NORM_FLOOR).any()):
        raise ZeroNormBlock("quaternion block with norm <= 1e-15")
    return (x / norm.clamp_min(NORM_FLOOR)).reshape(q.shape)


def quat_dot(q1, q2):
    """Sum of elementwise products over the last dimension."""
    q1, q2 = _as_tensor(q1), _as_tensor(q2)
    _check_same_length(q1, q2)
    return (q1 * q2).sum(dim=-1)


def complex_normalize(c, check=True):
    """Project every ``(re, im)`` pair onto the unit circle."""
    c = _as_tensor(c)
    x = _blocks(c, 2)
    norm = x.norm(dim=-1, keepdim=True)
    if check and bool((norm <= NORM_FLOOR).any()):
        raise ZeroNormPair("complex pair with modulus <= 1e-15")
    return (x / norm.clamp_min(NORM_FLOOR)).reshape(c.shape)


def complex_rotate(e, c):
    """Pairwise complex product ``e ∘ c``; ``c`` is expected to be normalized."""
    e, c = _as_tensor(e), _as_tensor(c)
    _check_same_length(e, c)
    x, y = _blocks(e, 2), _blocks(c, 2)
    re1, im1 = x.unbind(-1)
    re2, im2 = y.unbind(-1)
    out = torch.stack((re1 * re2 - im1 * im2, re1 * im2 + im1 * re2), dim=-1)
    return out.reshape(torch.broadcast_shapes(e.shape, c.shape))


def quat_identity(k, dtype=torch.float64):
    """Quaternion vector of ``k // 4`` identity blocks ``(1, 0, 0, 0)``."""
    if k % 4:
        raise NotDivisibleBy4(f"{k} is not divisible by 4")
    q = torch.zeros(k, dtype=dtype)
    q[0::4] = 1.0
    return q


def complex_identity(k, dtype=torch.float64):
    if k % 2:
        raise NotDivisibleBy2(f"{k} is not divisible by 2")
    c = torch.zeros(k, dtype=dtype)
    c[0::2] = 1.0
    return c
