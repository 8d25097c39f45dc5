"""Negative sampling, cross-entropy loss, optimizers and the training loop.

All parameters live in Euclidean (tangent) coordinates, so training is
plain first-order optimization; the exponential maps inside the scorer
carry the geometry.  Gradients come from torch autograd over the scoring
code in :mod:`hykge.models`.
"""

from dataclasses import asdict, dataclass, field
import json
import logging
import math
import time

import torch
import torch.nn.functional as F

from .errors import InputError, ShapeMismatch
from .evaluation import FILTERED, evaluate
from .models import ALL_CONFIGURATIONS, DTYPE, get_kind, init_model, resolve_variant, score_batch

log = logging.getLogger(__name__)

ADAM, ADAGRAD = "Adam", "Adagrad"
ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8
ADAGRAD_EPS = 1e-10


@dataclass
class TrainConfig:
    kind: str = "3H-TH"
    variant: str = None
    dim: int = 32
    learning_rate: float = 1e-3
    optimizer: str = ADAM
    batch_size: int = 500
    negatives: int = 100
    max_epochs: int = 500
    valid_every: int = 5
    patience: int = 10
    seed: int = 0
    eval_mode: str = FILTERED
    eval_batch_size: int = 256

    def __post_init__(self):
        self.optimizer = normalize_optimizer(self.optimizer)
        self.variant = resolve_variant(self.kind, self.variant)
        for name in ("dim", "batch_size", "negatives", "valid_every", "patience"):
            if getattr(self, name) <= 0:
                raise InputError(f"{name} must be positive")
        if self.learning_rate < 0 or self.max_epochs < 0:
            raise InputError("learning_rate and max_epochs must be non-negative")


def normalize_optimizer(name):
    for known in (ADAM, ADAGRAD):
        if str(name).lower() == known.lower():
            return known
    raise InputError(f"optimizer must be Adam or Adagrad, got {name!r}")


# ---------------------------------------------------------------------------
# sampling and loss


def sample_negatives(tails, n, generator, n_entities):
    """Draw ``n`` corrupted tails per positive, uniform over all other entities.

    ``tails`` is an int or a (B,) tensor; the result has shape (n,) or (B, n).
    """
    if n < 1:
        raise InputError("need at least one negative sample")
    if n_entities < 2:
        raise InputError("negative sampling needs at least two entities")
    t = torch.as_tensor(tails, dtype=torch.long)
    draw = torch.randint(0, n_entities - 1, (*t.shape, n), generator=generator)
    # skip over the true tail: values >= t shift up by one
    return draw + (draw >= t.unsqueeze(-1)).long()


def batch_loss(state, triples, negatives, variant=None):
    """Mean over the batch of softplus(-s_pos) + sum_neg softplus(s_neg)."""
    h, r, t = triples[:, 0], triples[:, 1], triples[:, 2]
    candidates = torch.cat([t.unsqueeze(1), negatives], dim=1)
    s = score_batch(state, h, r, candidates, variant)
    sign = torch.ones_like(s)
    sign[:, 0] = -1.0
    return F.softplus(sign * s).sum(1).mean()


def loss(state, triple, negatives):
    """Cross-entropy of one triple against its negatives (a float)."""
    triples = torch.as_tensor(triple, dtype=torch.long).reshape(-1, 3)
    negs = torch.as_tensor(negatives, dtype=torch.long).reshape(len(triples), -1)
    with torch.no_grad():
        return float(batch_loss(state, triples, negs))


def gradients(state, triples, negatives):
    """Loss value and exact gradients of the mean batch loss for every tensor."""
    triples = torch.as_tensor(triples, dtype=torch.long).reshape(-1, 3)
    if len(triples) == 0:
        raise InputError("gradient of an empty batch")
    negatives = torch.as_tensor(negatives, dtype=torch.long).reshape(len(triples), -1)
    leaves = {k: v.detach().requires_grad_(True) for k, v in state.params.items()}
    with torch.enable_grad():
        value = batch_loss(state.with_params(leaves), triples, negatives)
        grads = torch.autograd.grad(value, list(leaves.values()))
    return float(value.detach()), dict(zip(leaves, grads))


# ---------------------------------------------------------------------------
# optimizers


@dataclass
class OptimizerState:
    name: str
    step: int = 0
    slots: dict = field(default_factory=dict)


def init_optimizer(name, state):
    name = normalize_optimizer(name)
    slots = {}
    for k, p in state.params.items():
        if name == ADAM:
            slots[k] = (torch.zeros_like(p), torch.zeros_like(p))
        else:
            slots[k] = (torch.zeros_like(p),)
    return OptimizerState(name, 0, slots)


def optimizer_step(state, opt, grads, lr):
    """Apply one bias-corrected Adam or Adagrad update in place; returns state."""
    if set(grads) != set(state.params) or any(
        grads[k].shape != p.shape for k, p in state.params.items()
    ):
        raise ShapeMismatch("gradient structure does not match the model parameters")
    opt.step += 1
    with torch.no_grad():
        for k, p in state.params.items():
            g = grads[k]
            if opt.name == ADAM:
                m, v = opt.slots[k]
                b1, b2 = ADAM_BETAS
                m.mul_(b1).add_(g, alpha=1 - b1)
                v.mul_(b2).addcmul_(g, g, value=1 - b2)
                m_hat = m / (1 - b1**opt.step)
                v_hat = v / (1 - b2**opt.step)
                p.sub_(lr * m_hat / (v_hat.sqrt() + ADAM_EPS))
            else:
                (acc,) = opt.slots[k]
                acc.addcmul_(g, g)
                p.sub_(lr * g / (acc + ADAGRAD_EPS).sqrt())
    return state


# ---------------------------------------------------------------------------
# loop


def _write_record(fh, record):
    if fh is not None:
        fh.write(json.dumps(record) + "\n")
        fh.flush()


def train(config, dataset, log_path=None, callback=None):
    """Train on ``dataset.train``, validating every ``valid_every`` epochs.

    Returns the snapshot with the best validation MRR (the initial state if
    ``max_epochs == 0``) and the list of per-epoch log records.
    """
    state = init_model(config.kind, dataset.n_entities, dataset.n_relations, config.dim,
                       config.seed, config.variant)
    state.vocab_hash = dataset.vocab.hash()
    records = []
    if config.max_epochs == 0:
        if log_path:
            open(log_path, "w", encoding="utf-8").close()
        return state, records
    if not len(dataset.train) or not len(dataset.valid):
        raise InputError("training needs non-empty train and valid splits")

    gen = torch.Generator().manual_seed(int(config.seed))
    opt = init_optimizer(config.optimizer, state)
    train_triples = torch.as_tensor(dataset.train.copy(), dtype=torch.long)
    best_state, best_mrr, stale = state.clone(), -math.inf, 0
    fh = open(log_path, "w", encoding="utf-8") if log_path else None
    try:
        for epoch in range(1, config.max_epochs + 1):
            started = time.perf_counter()
            order = torch.randperm(len(train_triples), generator=gen)
            total = 0.0
            for start in range(0, len(order), config.batch_size):
                batch = train_triples[order[start:start + config.batch_size]]
                negs = sample_negatives(batch[:, 2], config.negatives, gen, dataset.n_entities)
                value, grads = gradients(state, batch, negs)
                optimizer_step(state, opt, grads, config.learning_rate)
                total += value * len(batch)
            record = {"epoch": epoch, "loss": total / len(order), "valid_mrr": None}
            if epoch % config.valid_every == 0 or epoch == config.max_epochs:
                metrics = evaluate(state, dataset.valid, dataset, config.eval_mode,
                                   batch_size=config.eval_batch_size)
                record["valid_mrr"] = metrics.mrr
                if metrics.mrr > best_mrr:
                    best_mrr, best_state, stale = metrics.mrr, state.clone(), 0
                else:
                    stale += 1
            record["seconds"] = round(time.perf_counter() - started, 3)
            records.append(record)
            _write_record(fh, record)
            log.info("epoch %d loss %.6f valid_mrr %s", epoch, record["loss"], record["valid_mrr"])
            if callback is not None:
                callback(record, state)
            if record["valid_mrr"] is not None and stale >= config.patience:
                break
    finally:
        if fh is not None:
            fh.close()
    best_state.extra["best_valid_mrr"] = best_mrr
    return best_state, records


def config_dict(config):
    return asdict(config)


# ---------------------------------------------------------------------------
# finite-difference gate

FD_STEP = 1e-6
FD_TOLERANCE = 1e-5
# Derivatives smaller than this are compared in absolute terms: at h = 1e-6
# the difference quotient carries ~1e-9 of float64 rounding noise.
FD_FLOOR = 1e-2


def random_instance(kind, k, generator, variant=None, n_entities=6, n_relations=3,
                    n_triples=4, n_negatives=3):
    """A small model with every parameter drawn at a non-degenerate scale,
    plus a batch of triples and negatives over it."""
    state = init_model(kind, n_entities, n_relations, k, 0, variant)
    op_of = {name: op for op, name in state.spec.ops}
    scale = 1.0 / max(k, 1) ** 0.5
    for name, p in state.params.items():
        z = torch.randn(p.shape, generator=generator, dtype=DTYPE)
        if name == "bias":
            std = 0.1
        elif name == "curvature":
            std = 0.5
        elif op_of.get(name, "trans").startswith("rot"):
            std = 1.0
        else:
            std = 0.5 * scale
        p.copy_(z * std)
    triples = torch.stack([
        torch.randint(0, n_entities, (n_triples,), generator=generator),
        torch.randint(0, n_relations, (n_triples,), generator=generator),
        torch.randint(0, n_entities, (n_triples,), generator=generator),
    ], dim=1)
    negatives = sample_negatives(triples[:, 2], n_negatives, generator, n_entities)
    return state, triples, negatives


def _relative_error(a, n):
    return abs(a - n) / max(abs(a), abs(n), FD_FLOOR)


def gradcheck_instance(state, triples, negatives, generator, h=FD_STEP):
    """Max relative error between analytic and central-difference directional
    derivatives, along one random unit direction in the whole parameter
    space and one inside each parameter tensor."""
    _, grads = gradients(state, triples, negatives)
    names = list(state.params)
    dirs = {n: torch.randn(state.params[n].shape, generator=generator, dtype=DTYPE)
            for n in names}
    directions = [{n: dirs[n] if n == m else torch.zeros_like(dirs[n]) for n in names}
                  for m in names] + [dirs]
    for d in directions:
        norm = float(sum((v * v).sum() for v in d.values())) ** 0.5
        for n in names:
            d[n] = d[n] / norm
    worst = 0.0
    for d in directions:
        analytic = float(sum((grads[n] * d[n]).sum() for n in names))
        plus = state.with_params({n: state.params[n] + h * d[n] for n in names})
        minus = state.with_params({n: state.params[n] - h * d[n] for n in names})
        numeric = (loss(plus, triples, negatives) - loss(minus, triples, negatives)) / (2 * h)
        worst = max(worst, _relative_error(analytic, numeric))
    return worst


def gradcheck(kind, k, variant=None, draws=100, seed=0):
    """Worst relative error over ``draws`` random instances of one model."""
    gen = torch.Generator().manual_seed(int(seed))
    worst = 0.0
    for _ in range(draws):
        state, triples, negatives = random_instance(kind, k, gen, variant)
        worst = max(worst, gradcheck_instance(state, triples, negatives, gen))
    return worst


def gradcheck_all(dims=(8,), draws=100, seed=0, configurations=ALL_CONFIGURATIONS):
    """``{(kind, variant, k): max relative error}`` for every configuration."""
    results = {}
    for kind, variant in configurations:
        for k in dims:
            if k % get_kind(kind).block:
                continue
            results[(kind, variant, k)] = gradcheck(kind, k, variant, draws, seed)
    return results
