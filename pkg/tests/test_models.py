import math

import pytest
import torch

from hykge import models as M
from hykge.errors import BadDimension, IllegalVariant, InputError, UnknownId

import oracles

FB237 = (14541, 237)
FB15K = (14951, 1345)

# kind -> (FB15K-237 count / k, FB15K count / k), rounded half up
REPORTED_PARAM_COUNTS = {
    "TE": (14778, 16296),
    "TH": (14778, 16296),
    "2E": (14660, 15624),
    "2H": (14660, 15624),
    "3E": (14719, 15960),
    "3H": (14719, 15960),
    "2E-TE": (14897, 16969),
    "3E-TE": (14956, 17305),
    "3H-TH": (14956, 17305),
    "2E-TE-2H-TH": (15252, 18986),
    "3E-TE-3H-TH": (15371, 19659),
}


def random_state(kind, k=8, seed=0, variant=None, n_entities=5, n_relations=3):
    state = M.init_model(kind, n_entities, n_relations, k, seed, variant)
    gen = torch.Generator().manual_seed(seed + 100)
    for name, p in state.params.items():
        std = 0.3 if name in ("entity", "bias", "curvature") or "trans" in name else 1.0
        p.copy_(torch.randn(p.shape, generator=gen, dtype=torch.float64) * std)
    return state


def as_lists(state):
    return {k: v.tolist() for k, v in state.params.items()}


def all_scores(state, h, r, variant=None):
    return M.score(state, h, r, list(range(state.n_entities)), variant)


# ---------------------------------------------------------------------------
# construction


def test_init_deterministic():
    a = M.init_model("3H-TH", 7, 3, 8, seed=5)
    b = M.init_model("3H-TH", 7, 3, 8, seed=5)
    assert all(torch.equal(a.params[k], b.params[k]) for k in a.params)


def test_init_values():
    s = M.init_model("3H-TH", 2000, 50, 16, seed=1)
    assert torch.equal(s.params["bias"], torch.zeros(2000, dtype=torch.float64))
    xi = torch.nn.functional.softplus(s.params["curvature"])
    assert torch.allclose(xi, torch.ones(50, dtype=torch.float64), atol=1e-15)
    assert abs(float(s.params["entity"].std()) - 1e-3) < 5e-5
    assert abs(float(s.params["rotation"].std()) - 1.0) < 0.05


def test_allocated_tensors():
    assert set(M.init_model("TE", 3, 2, 4).params) == {"entity", "bias", "translation"}
    full = M.init_model("3E-TE-3H-TH", 3, 2, 4).params
    relation = set(full) - {"entity", "bias", "curvature"}
    assert relation == {"rotation_e", "translation_e", "rotation_h", "translation_h"}
    assert "curvature" not in M.init_model("3E-TE", 3, 2, 4).params


@pytest.mark.parametrize("kind,k", [("3E", 6), ("3H-TH", 10), ("2E", 3), ("2H", 5)])
def test_bad_dimension(kind, k):
    with pytest.raises(BadDimension):
        M.init_model(kind, 3, 2, k)


def test_kind_aliases_and_unknown():
    assert M.get_kind("quate").name == "3E"
    assert M.get_kind("MuRP").name == "TH"
    with pytest.raises(InputError):
        M.get_kind("AttH")


def test_illegal_variant():
    with pytest.raises(IllegalVariant):
        M.init_model("TE", 3, 2, 4, variant=M.INNER_PRODUCT)
    s = M.init_model("3H", 3, 2, 4)
    with pytest.raises(IllegalVariant):
        M.score_variant(s, 0, 0, [1], M.PROJECT_INNER_PRODUCT)


def test_unknown_id():
    s = M.init_model("TE", 3, 2, 4)
    with pytest.raises(UnknownId):
        M.score(s, 3, 0, [0])
    with pytest.raises(UnknownId):
        M.score(s, 0, 2, [0])
    with pytest.raises(UnknownId):
        M.score(s, 0, 0, [-1])


# ---------------------------------------------------------------------------
# scoring examples


def identity_3hth():
    s = M.init_model("3H-TH", 3, 1, 8)
    s.params["rotation"].zero_()
    s.params["rotation"][:, 0::4] = 1.0
    s.params["translation"].zero_()
    s.params["entity"][1] = s.params["entity"][0]
    return s


def test_3hth_identity_score_zero():
    s = identity_3hth()
    assert float(M.score(s, 0, 0, [1])[0]) == 0.0


def test_te_exact_translation():
    s = M.init_model("TE", 2, 1, 4)
    s.params["entity"][0] = torch.tensor([1.0, 0, 0, 0])
    s.params["entity"][1] = torch.tensor([1.0, 1, 0, 0])
    s.params["translation"][0] = torch.tensor([0.0, 1, 0, 0])
    assert float(M.score(s, 0, 0, [1])[0]) == 0.0


def test_bias_added_for_every_kind():
    for kind in M.KINDS:
        s = random_state(kind, k=4)
        base = all_scores(s, 1, 0)
        s.params["bias"][1] += 0.5
        s.params["bias"][3] += 2.0
        shifted = all_scores(s, 1, 0)
        expected = base + 0.5
        expected[3] += 2.0
        expected[1] += 0.5
        assert torch.allclose(shifted, expected, atol=1e-12, rtol=0), kind


def test_inner_product_examples():
    s = M.init_model("3E", 2, 1, 4, variant=M.INNER_PRODUCT)
    s.params["rotation"][0] = torch.tensor([1.0, 0, 0, 0])
    s.params["entity"][1].zero_()
    s.params["bias"][:] = torch.tensor([0.25, 0.5])
    assert float(M.score(s, 0, 0, [1])[0]) == 0.75
    e = torch.tensor([0.5, 0.5, 0.5, 0.5], dtype=torch.float64)
    s.params["entity"][:] = e
    got = float(M.score(s, 0, 0, [1])[0])
    assert abs(got - (float(e @ e) + 0.75)) < 1e-15


# ---------------------------------------------------------------------------
# straight-line oracle


@pytest.mark.parametrize("kind,variant", M.ALL_CONFIGURATIONS)
def test_matches_scalar_oracle(kind, variant):
    for seed in range(3):
        s = random_state(kind, k=8, seed=seed, variant=variant)
        p = as_lists(s)
        for h in range(s.n_entities):
            for r in range(s.n_relations):
                got = all_scores(s, h, r).tolist()
                for t, value in enumerate(got):
                    want = oracles.score(kind, variant, p, h, r, t)
                    assert abs(value - want) <= 1e-12 * max(1.0, abs(want)), (h, r, t)


@pytest.mark.parametrize("kind,variant", M.ALL_CONFIGURATIONS)
def test_score_all_matches_score(kind, variant):
    s = random_state(kind, k=8, seed=3, variant=variant, n_entities=9, n_relations=4)
    h = torch.tensor([0, 3, 5, 8, 2, 2])
    r = torch.tensor([1, 0, 3, 1, 2, 1])
    full = M.score_all(s, h, r)
    tails = torch.arange(s.n_entities).expand(len(h), -1)
    ref = M.score(s, h, r, tails)
    assert torch.allclose(full, ref, atol=1e-12, rtol=1e-12)


@pytest.mark.parametrize("kind,variant", M.ALL_CONFIGURATIONS)
def test_score_all_exact_ties(kind, variant):
    s = random_state(kind, k=16, seed=5, variant=variant, n_entities=120, n_relations=2)
    s.params["entity"][::7] = s.params["entity"][3]
    s.params["bias"][::7] = s.params["bias"][3]
    full = M.score_all(s, torch.arange(0, 120, 2), torch.arange(60) % 2)
    group = full[:, ::7]
    assert torch.equal(group, group[:, :1].expand_as(group))


def test_variant_selection_matches_oracle():
    s = random_state("3H-TH", k=8, seed=4)
    ip = M.score_variant(s, 1, 2, [0, 1, 2, 3, 4], M.PROJECT_INNER_PRODUCT)
    p = as_lists(s)
    for t in range(5):
        want = oracles.score("3H-TH", M.PROJECT_INNER_PRODUCT, p, 1, 2, t)
        assert abs(float(ip[t]) - want) < 1e-12


# ---------------------------------------------------------------------------
# structural properties


def _copy_shared(src, dst):
    for name in ("entity", "bias", "curvature"):
        if name in dst.params:
            dst.params[name].copy_(src.params[name])


@pytest.mark.parametrize("seed", range(5))
def test_reduction_lattice(seed):
    full = random_state("3H-TH", seed=seed)
    full.params["translation"].zero_()
    rot = M.init_model("3H", 5, 3, 8)
    _copy_shared(full, rot)
    rot.params["rotation"].copy_(full.params["rotation"])
    for h in range(5):
        assert torch.allclose(all_scores(full, h, 1), all_scores(rot, h, 1), atol=1e-12, rtol=0)

    full = random_state("3H-TH", seed=seed)
    full.params["rotation"].zero_()
    full.params["rotation"][:, 0::4] = 2.0
    tr = M.init_model("TH", 5, 3, 8)
    _copy_shared(full, tr)
    tr.params["translation"].copy_(full.params["translation"])
    for h in range(5):
        assert torch.allclose(all_scores(full, h, 0), all_scores(tr, h, 0), atol=1e-12, rtol=0)

    c = random_state("2E-TE", seed=seed)
    c.params["rotation"].zero_()
    c.params["rotation"][:, 0::2] = 0.7
    te = M.init_model("TE", 5, 3, 8)
    _copy_shared(c, te)
    te.params["translation"].copy_(c.params["translation"])
    for h in range(5):
        assert torch.allclose(all_scores(c, h, 2), all_scores(te, h, 2), atol=1e-12, rtol=0)


def test_rotate_symmetric_relation_witness():
    s = random_state("2E", k=8, seed=2)
    s.params["rotation"][0] = torch.tensor([math.cos(math.pi), 0.0] * 4)
    s.params["bias"].fill_(0.25)
    for h in range(5):
        for t in range(5):
            assert float(M.score(s, h, 0, [t])[0]) == float(M.score(s, t, 0, [h])[0])


def _compose(kind, first, second, x):
    s = M.init_model(kind, 1, 2, 4)
    s.params["entity"][0] = x
    s.params["rotation"][0] = first
    s.params["rotation"][1] = second
    y, _ = M.transform_head(s, torch.tensor([0]), torch.tensor([0]))
    s.params["entity"][0] = y[0]
    y, _ = M.transform_head(s, torch.tensor([0]), torch.tensor([1]))
    return y[0]


def test_non_commutative_composition():
    x = torch.tensor([1.0, 0.2, -0.3, 0.4], dtype=torch.float64)
    i = torch.tensor([0.0, 1, 0, 0], dtype=torch.float64)
    j = torch.tensor([0.0, 0, 1, 0], dtype=torch.float64)
    gap = _compose("3E", i, j, x) - _compose("3E", j, i, x)
    assert float(gap.abs().max()) > 0.1
    c1 = torch.tensor([0.6, 0.8, -0.28, 0.96], dtype=torch.float64)
    c2 = torch.tensor([0.0, 1.0, 0.8, 0.6], dtype=torch.float64)
    gap = _compose("2E", c1, c2, x) - _compose("2E", c2, c1, x)
    assert float(gap.abs().max()) < 1e-12


@pytest.mark.parametrize("kind,variant", M.ALL_CONFIGURATIONS)
def test_scores_finite_near_boundary(kind, variant):
    s = random_state(kind, k=8, seed=1, variant=variant)
    s.params["entity"].mul_(1e4)
    for name in s.params:
        if name.startswith("translation"):
            s.params[name].mul_(1e4)
    assert torch.isfinite(M.score_all(s, torch.arange(5), torch.tensor([0, 1, 2, 0, 1]))).all()


def test_flat_limit_3hth():
    s = random_state("3H-TH", k=8, seed=6)
    s.params["curvature"].fill_(math.log(math.expm1(1e-8)))
    e = M.init_model("3E-TE", 5, 3, 8)
    for name in ("entity", "bias", "rotation", "translation"):
        e.params[name].copy_(s.params[name])
    for h in range(5):
        hyp = all_scores(s, h, 1) - s.params["bias"][h] - s.params["bias"]
        dist = -(all_scores(e, h, 1) - e.params["bias"][h] - e.params["bias"])
        ref = -4 * dist**2
        assert torch.all((hyp - ref).abs() <= 1e-3 * ref.abs())


# ---------------------------------------------------------------------------
# parameter counts


@pytest.mark.parametrize("kind", REPORTED_PARAM_COUNTS)
def test_reported_param_counts(kind):
    for (n_e, n_r), want in zip((FB237, FB15K), REPORTED_PARAM_COUNTS[kind]):
        assert M.round_half_up(M.param_count_per_dim(kind, n_e, n_r)) == want


def test_param_count_exact():
    assert M.param_count("TE", *FB237, 1) == 14778
    assert M.param_count("3H-TH", *FB15K, 4) == 14951 * 4 + 1345 * 7
    assert M.param_count("3E-TE-3H-TH", *FB237, 0) == 0
    with pytest.raises(BadDimension):
        M.param_count("3H", *FB237, 2)


def test_param_count_matches_allocation():
    # allocated tensors minus biases, curvatures and one unit-norm dof per rotation block
    for kind, spec in M.KINDS.items():
        s = M.init_model(kind, 7, 3, 8)
        total = sum(p.numel() for n, p in s.params.items() if n not in ("bias", "curvature"))
        blocks = sum(8 // 4 if op == "rot3" else 8 // 2 for op, _ in spec.ops
                     if op.startswith("rot"))
        assert M.param_count(kind, 7, 3, 8) == total - 3 * blocks, kind
