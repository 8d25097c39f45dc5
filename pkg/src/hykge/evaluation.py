"""Link-prediction ranking, MRR / Hits@K and the paired t-test."""

import csv
from dataclasses import dataclass, field
import math

import numpy as np
from scipy import stats
import torch

from .data import reverse_triples
from .errors import InputError, LengthMismatch, ZeroVariance
from .models import score_all

HITS_AT = (1, 3, 10)
FILTERED, RAW = "filtered", "raw"


@dataclass
class Metrics:
    mrr: float
    hits: dict
    n: int
    ranks: np.ndarray = field(default=None, repr=False, compare=False)

    @classmethod
    def from_ranks(cls, ranks):
        ranks = np.asarray(ranks, dtype=np.float64)
        if ranks.size == 0:
            raise InputError("cannot compute metrics of an empty query set")
        hits = {k: float(np.mean(ranks <= k)) for k in HITS_AT}
        return cls(float(np.mean(1.0 / ranks)), hits, int(ranks.size), ranks)

    @property
    def hits1(self):
        return self.hits[1]

    @property
    def hits3(self):
        return self.hits[3]

    @property
    def hits10(self):
        return self.hits[10]

    def as_row(self):
        return [self.mrr, self.hits1, self.hits3, self.hits10, self.n]


def _check_mode(mode):
    if mode not in (FILTERED, RAW):
        raise InputError(f"ranking mode must be 'filtered' or 'raw', got {mode!r}")


def queries_for(triples, dataset, direction="tail"):
    """Expand test triples into tail queries, plus reciprocal head queries
    ``(t, r^-1, h)`` when ``direction == 'both'``."""
    triples = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
    if direction == "tail":
        return triples
    if direction != "both":
        raise InputError(f"direction must be 'tail' or 'both', got {direction!r}")
    if not dataset.reciprocal:
        raise InputError("two-direction evaluation needs a dataset with reciprocal relations")
    return np.concatenate([triples, reverse_triples(triples, dataset.n_base_relations)])


def rank_queries(state, queries, dataset=None, mode=FILTERED, batch_size=256):
    """Fractional rank of the true tail of every query.

    rank = 1 + #{candidates scoring higher} + #{candidates tied} / 2, where
    filtered mode drops every other tail known for ``(h, r)``.
    """
    _check_mode(mode)
    if mode == FILTERED and dataset is None:
        raise InputError("filtered ranking needs the dataset's true-tail index")
    queries = torch.from_numpy(np.ascontiguousarray(queries, dtype=np.int64).reshape(-1, 3))
    ranks = np.empty(len(queries), dtype=np.float64)
    with torch.no_grad():
        for start in range(0, len(queries), batch_size):
            q = queries[start:start + batch_size]
            h, r, t = q[:, 0], q[:, 1], q[:, 2]
            scores = score_all(state, h, r)
            rows = torch.arange(len(q))
            target = scores[rows, t].unsqueeze(1)
            exclude = torch.zeros_like(scores, dtype=torch.bool)
            if mode == FILTERED:
                for i, (hi, ri) in enumerate(zip(h.tolist(), r.tolist())):
                    known = dataset.tails_for(hi, ri)
                    if len(known):
                        exclude[i, torch.from_numpy(known)] = True
            exclude[rows, t] = True
            higher = ((scores > target) & ~exclude).sum(1)
            tied = ((scores == target) & ~exclude).sum(1)
            ranks[start:start + len(q)] = (1 + higher + 0.5 * tied).double().numpy()
    return ranks


def rank_tail(state, triple, mode=FILTERED, dataset=None):
    return float(rank_queries(state, [triple], dataset, mode)[0])


def evaluate(state, triples, dataset=None, mode=FILTERED, direction="tail", batch_size=256):
    if len(triples) == 0:
        raise InputError("evaluation split is empty")
    queries = queries_for(triples, dataset, direction)
    return Metrics.from_ranks(rank_queries(state, queries, dataset, mode, batch_size))


def slice_metrics(ranks, groups):
    """Metrics per group; ``groups`` maps a slice name to query indices."""
    return {name: Metrics.from_ranks(ranks[np.asarray(idx)]) for name, idx in groups.items()
            if len(idx)}


def relation_groups(queries, n_base_relations=None):
    """Query indices per relation id (reciprocal ids fold onto their base)."""
    rel = np.asarray(queries)[:, 1]
    if n_base_relations:
        rel = rel % n_base_relations
    return {int(r): np.flatnonzero(rel == r) for r in np.unique(rel)}


def per_relation_metrics(state, triples, dataset=None, mode=FILTERED, direction="tail"):
    queries = queries_for(triples, dataset, direction)
    ranks = rank_queries(state, queries, dataset, mode)
    base = dataset.n_base_relations if dataset is not None else None
    return slice_metrics(ranks, relation_groups(queries, base))


# ---------------------------------------------------------------------------
# output


def format_table(rows, title="slice"):
    """Aligned plain-text table of ``(name, Metrics)`` rows."""
    rows = list(rows)
    width = max([len(title)] + [len(str(name)) for name, _ in rows])
    lines = [f"{title:<{width}}  {'MRR':>6}  {'H@1':>6}  {'H@3':>6}  {'H@10':>6}  {'n':>7}"]
    for name, m in rows:
        lines.append(
            f"{str(name):<{width}}  {m.mrr:6.3f}  {m.hits1:6.3f}  {m.hits3:6.3f}  "
            f"{m.hits10:6.3f}  {m.n:7d}"
        )
    return "\n".join(lines)


def write_csv(path, rows):
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["slice", "MRR", "H@1", "H@3", "H@10", "n"])
        for name, m in rows:
            writer.writerow([name, f"{m.mrr:.6f}", f"{m.hits1:.6f}", f"{m.hits3:.6f}",
                             f"{m.hits10:.6f}", m.n])


# ---------------------------------------------------------------------------
# significance


@dataclass(frozen=True)
class TTestResult:
    mean_diff: float
    std: float
    var: float
    se: float
    t: float
    df: int
    p_value: float


def paired_t_test(rr_x, rr_y):
    """Two-sided paired Student t-test on per-query reciprocal ranks."""
    x = np.asarray(rr_x, dtype=np.float64)
    y = np.asarray(rr_y, dtype=np.float64)
    if x.shape != y.shape:
        raise LengthMismatch(f"paired samples differ in length: {x.shape} vs {y.shape}")
    if x.ndim != 1 or x.size < 2:
        raise InputError("paired t-test needs two 1-D samples with at least 2 entries")
    d = x - y
    if np.all(d == d[0]):
        raise ZeroVariance("all paired differences are identical")
    var = float(np.var(d, ddof=1))
    n = d.size
    std = math.sqrt(var)
    se = std / math.sqrt(n)
    mean = float(np.mean(d))
    t = mean / se
    p = float(2.0 * stats.t.sf(abs(t), df=n - 1))
    return TTestResult(mean, std, var, se, t, n - 1, min(p, 1.0))
