"""Parameter storage and scoring for the translation/rotation model family.

Every model is a pipeline over the head embedding:

* an optional Euclidean stage of 2D rotations (``rot2``), 3D rotations
  (``rot3``) and translations (``trans``) applied to tangent vectors;
* for hyperbolic kinds, an exponential map at the relation curvature
  followed by a hyperbolic stage where rotations act blockwise on ball
  points and translations are Möbius additions of mapped vectors.

The transformed head is compared with the tail by negative Euclidean
distance, dot product, negative squared hyperbolic distance, or a dot
product after mapping back to the tangent space, and the two entity biases
are added.  All parameters are stored unconstrained (rotations
unnormalized, curvature as a softplus pre-image) so plain gradient
optimizers can be used.
"""

from dataclasses import dataclass, field, replace
from fractions import Fraction
import math

import torch

from . import algebra, hyperbolic
from .errors import BadDimension, IllegalVariant, InputError, UnknownId

DTYPE = torch.float64

EUCLIDEAN_DISTANCE = "EuclideanDistance"
INNER_PRODUCT = "InnerProduct"
HYPERBOLIC_DISTANCE = "HyperbolicDistance"
PROJECT_INNER_PRODUCT = "ProjectInnerProduct"
VARIANTS = (EUCLIDEAN_DISTANCE, INNER_PRODUCT, HYPERBOLIC_DISTANCE, PROJECT_INNER_PRODUCT)

ENTITY_STD = 1e-3
ROTATION_STD = 1.0


@dataclass(frozen=True)
class KindSpec:
    name: str
    euclidean_ops: tuple = ()
    hyperbolic_ops: tuple = ()
    hyperbolic: bool = False
    variants: tuple = ()
    aliases: tuple = ()

    @property
    def default_variant(self):
        return self.variants[0]

    @property
    def ops(self):
        return self.euclidean_ops + self.hyperbolic_ops

    @property
    def relation_params(self):
        return tuple(name for _, name in self.ops)

    @property
    def parameter_names(self):
        names = ("entity", "bias") + self.relation_params
        return names + ("curvature",) if self.hyperbolic else names

    @property
    def block(self):
        """Smallest dimension granule required by the rotations used."""
        kinds = {op for op, _ in self.ops}
        return 4 if "rot3" in kinds else 2 if "rot2" in kinds else 1


_E = (EUCLIDEAN_DISTANCE,)
_H = (HYPERBOLIC_DISTANCE,)

KINDS = {
    spec.name: spec
    for spec in (
        KindSpec("TE", (("trans", "translation"),), variants=_E, aliases=("TransE",)),
        KindSpec("2E", (("rot2", "rotation"),), variants=_E, aliases=("RotatE",)),
        KindSpec("3E", (("rot3", "rotation"),), variants=(INNER_PRODUCT, EUCLIDEAN_DISTANCE),
                 aliases=("QuatE",)),
        KindSpec("TH", (), (("trans", "translation"),), True, _H, ("MuRP",)),
        KindSpec("2H", (), (("rot2", "rotation"),), True, _H, ("RotH",)),
        KindSpec("3H", (), (("rot3", "rotation"),), True, _H),
        KindSpec("2E-TE", (("rot2", "rotation"), ("trans", "translation")), variants=_E),
        KindSpec("3E-TE", (("rot3", "rotation"), ("trans", "translation")), variants=_E),
        KindSpec("3H-TH", (), (("rot3", "rotation"), ("trans", "translation")), True,
                 (HYPERBOLIC_DISTANCE, PROJECT_INNER_PRODUCT)),
        KindSpec("2E-TE-2H-TH", (("rot2", "rotation_e"), ("trans", "translation_e")),
                 (("rot2", "rotation_h"), ("trans", "translation_h")), True, _H),
        KindSpec("3E-TE-3H-TH", (("rot3", "rotation_e"), ("trans", "translation_e")),
                 (("rot3", "rotation_h"), ("trans", "translation_h")), True, _H),
    )
}

# (kind, variant) pairs: every kind with its default plus the alternative scorers.
ALL_CONFIGURATIONS = tuple((name, v) for name, spec in KINDS.items() for v in spec.variants)

_DOF = {"trans": Fraction(1), "rot2": Fraction(1, 2), "rot3": Fraction(3, 4)}


def get_kind(name):
    """Look up a kind by canonical name or alias, case-insensitively."""
    if isinstance(name, KindSpec):
        return name
    key = str(name).strip().upper()
    for spec in KINDS.values():
        if key == spec.name.upper() or key in (a.upper() for a in spec.aliases):
            return spec
    raise InputError(f"unknown model kind {name!r}; expected one of {', '.join(KINDS)}")


def resolve_variant(kind, variant=None):
    spec = get_kind(kind)
    if variant is None:
        return spec.default_variant
    for v in spec.variants:
        if v.lower() == str(variant).lower():
            return v
    raise IllegalVariant(
        f"variant {variant!r} is not defined for {spec.name}; legal: {', '.join(spec.variants)}"
    )


def check_dimension(kind, k):
    spec = get_kind(kind)
    if k < 0 or k % spec.block:
        raise BadDimension(f"{spec.name} needs a dimension divisible by {spec.block}, got {k}")


@dataclass
class ModelState:
    """All trainable tensors of one model, keyed by parameter name."""

    kind: str
    variant: str
    n_entities: int
    n_relations: int
    dim: int
    params: dict
    seed: int = 0
    vocab_hash: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def spec(self):
        return KINDS[self.kind]

    def with_params(self, params):
        return replace(self, params=params)

    def clone(self):
        return replace(self, params={k: v.detach().clone() for k, v in self.params.items()})

    def shapes(self):
        return {k: tuple(v.shape) for k, v in self.params.items()}


def parameter_shapes(kind, n_entities, n_relations, k):
    spec = get_kind(kind)
    shapes = {"entity": (n_entities, k), "bias": (n_entities,)}
    for _, name in spec.ops:
        shapes[name] = (n_relations, k)
    if spec.hyperbolic:
        shapes["curvature"] = (n_relations,)
    return shapes


def init_model(kind, n_entities, n_relations, k, seed=0, variant=None):
    """Fresh model: small Gaussian entities/translations, N(0, 1) raw rotations,
    zero biases and unit curvature for every relation."""
    spec = get_kind(kind)
    variant = resolve_variant(spec, variant)
    check_dimension(spec, k)
    gen = torch.Generator().manual_seed(int(seed))
    op_of = {name: op for op, name in spec.ops}
    params = {}
    for name, shape in parameter_shapes(spec, n_entities, n_relations, k).items():
        if name == "bias":
            params[name] = torch.zeros(shape, dtype=DTYPE)
        elif name == "curvature":
            params[name] = torch.full(shape, math.log(math.e - 1.0), dtype=DTYPE)
        elif op_of.get(name, "trans").startswith("rot"):
            params[name] = torch.randn(shape, generator=gen, dtype=DTYPE) * ROTATION_STD
        else:
            params[name] = torch.randn(shape, generator=gen, dtype=DTYPE) * ENTITY_STD
    return ModelState(spec.name, variant, n_entities, n_relations, k, params, int(seed))


def param_count_per_dim(kind, n_entities, n_relations):
    """Exact parameter count divided by ``k`` (entity biases excluded)."""
    spec = get_kind(kind)
    return n_entities + n_relations * sum(_DOF[op] for op, _ in spec.ops)


def param_count(kind, n_entities, n_relations, k):
    """Degrees of freedom at dimension ``k``; each rotation block loses one to
    its unit-norm constraint.  Entity biases and curvatures are not counted."""
    check_dimension(kind, k)
    total = param_count_per_dim(kind, n_entities, n_relations) * k
    assert total.denominator == 1
    return int(total)


def round_half_up(x):
    return int(math.floor(Fraction(x) + Fraction(1, 2)))


# ---------------------------------------------------------------------------
# forward pass


def _rotate(op, x, raw):
    if op == "rot2":
        return algebra.complex_rotate(x, algebra.complex_normalize(raw, check=False))
    return algebra.quat_hamilton_product(x, algebra.quat_normalize(raw, check=False))


def _as_ids(x):
    if isinstance(x, torch.Tensor):
        return x.long()
    return torch.as_tensor(x, dtype=torch.long)


def _check_ids(ids, limit, what):
    if ids.numel() and (int(ids.min()) < 0 or int(ids.max()) >= limit):
        raise UnknownId(f"{what} id out of range [0, {limit})")


def relation_curvature(state, r):
    return hyperbolic.curvature_from_raw(state.params["curvature"][r])


def transform_head(state, h, r):
    """Return the transformed head (B, k) and the curvature (B, 1) or None."""
    spec, p = state.spec, state.params
    x = p["entity"][h]
    for op, name in spec.euclidean_ops:
        x = x + p[name][r] if op == "trans" else _rotate(op, x, p[name][r])
    if not spec.hyperbolic:
        return x, None
    xi = relation_curvature(state, r).unsqueeze(-1)
    x = hyperbolic.exp_map_zero(x, xi)
    for op, name in spec.hyperbolic_ops:
        if op == "trans":
            x = hyperbolic.mobius_add(x, hyperbolic.exp_map_zero(p[name][r], xi), xi, check=False)
        else:
            x = _rotate(op, x, p[name][r])
    return x, xi


def _compare(variant, query, xi, tails):
    """Score (B, k) queries against (B, m, k) tail tangent vectors."""
    q = query.unsqueeze(1)
    if variant == EUCLIDEAN_DISTANCE:
        return -(q - tails).norm(dim=-1)
    if variant == INNER_PRODUCT:
        return (q * tails).sum(-1)
    xi = xi.unsqueeze(1)
    if variant == PROJECT_INNER_PRODUCT:
        return (hyperbolic.log_map_zero(q, xi, check=False) * tails).sum(-1)
    bt = hyperbolic.exp_map_zero(tails, xi)
    return -hyperbolic.hyp_distance(q, bt, xi, check=False) ** 2


def score_batch(state, h, r, t, variant=None):
    """Scores for (B,) heads/relations against (B, m) tails, differentiable."""
    variant = state.variant if variant is None else variant
    query, xi = transform_head(state, h, r)
    p = state.params
    s = _compare(variant, query, xi, p["entity"][t])
    return s + p["bias"][h].unsqueeze(-1) + p["bias"][t]


def _cdist(x, y):
    return torch.cdist(x, y, compute_mode="donot_use_mm_for_euclid_dist")


def _pairwise_dot(x, y):
    """``x @ y.T`` through the per-pair distance kernel.

    A matrix product may round identical columns differently depending on
    their position, which would break exact score ties between equal
    candidates during ranking.
    """
    x2 = (x * x).sum(-1, keepdim=True)
    y2 = (y * y).sum(-1).unsqueeze(0)
    return 0.5 * (x2 + y2 - _cdist(x, y) ** 2)


def score_all(state, h, r, variant=None):
    """Scores of (B,) queries against every entity, shape (B, n_entities).

    Uses matrix products instead of (B, n, k) intermediates; hyperbolic
    kinds map the entity table once per distinct relation in the batch.
    """
    variant = state.variant if variant is None else variant
    p = state.params
    ent, bias = p["entity"], p["bias"]
    query, xi = transform_head(state, h, r)
    if variant == EUCLIDEAN_DISTANCE:
        s = -_cdist(query, ent)
    elif variant == INNER_PRODUCT:
        s = _pairwise_dot(query, ent)
    elif variant == PROJECT_INNER_PRODUCT:
        s = _pairwise_dot(hyperbolic.log_map_zero(query, xi, check=False), ent)
    else:
        s = torch.empty(len(h), state.n_entities, dtype=DTYPE)
        for rel in torch.unique(r).tolist():
            rows = (r == rel).nonzero().squeeze(-1)
            c = float(relation_curvature(state, rel))
            tails = hyperbolic.exp_map_zero(ent, c)
            s[rows] = -hyperbolic.hyp_distance_matrix(query[rows], tails, c) ** 2
    return s + bias[h].unsqueeze(-1) + bias.unsqueeze(0)


def score(state, h, r, tails, variant=None):
    """Score ``(h, r, t)`` for every ``t`` in ``tails``.

    ``h`` and ``r`` are ids (int or 1-D tensor); ``tails`` is a 1-D id list
    for scalar queries or a (B, m) tensor for batched ones.
    """
    if variant is not None:
        variant = resolve_variant(state.kind, variant)
    h, r, t = _as_ids(h), _as_ids(r), _as_ids(tails)
    scalar = h.dim() == 0
    if scalar:
        h, r, t = h.reshape(1), r.reshape(1), t.reshape(1, -1)
    _check_ids(h, state.n_entities, "entity")
    _check_ids(t, state.n_entities, "entity")
    _check_ids(r, state.n_relations, "relation")
    with torch.no_grad():
        out = score_batch(state, h, r, t, variant)
    return out[0] if scalar else out


def score_variant(state, h, r, tails, variant):
    """Score with one of the alternative comparison functions for this kind."""
    return score(state, h, r, tails, resolve_variant(state.kind, variant))
