"""Relation-pattern statistics of a triple dataset.

Everything here works on integer-coded ``(N, 3)`` triple arrays and is
independent of any model.  The statistics are:

* Krackhardt hierarchy score (Khs) of each relation's digraph;
* multiplicity: triples whose entity pair also carries another relation;
* 1-1 / 1-n / n-1 / n-n categories from tails-per-head and heads-per-tail;
* symmetry, antisymmetry, inversion and composition classifiers;
* relation frequencies.
"""

from dataclasses import dataclass, field
import csv

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from .errors import EmptyGraph, EmptySplit, InputError

DIRECTED, UNDIRECTED = "directed", "undirected"


def display_name(relation):
    """``_member_meronym`` -> ``member meronym``."""
    return relation.strip("_").replace("_", " ")


def _triples(split):
    arr = np.asarray(split, dtype=np.int64).reshape(-1, 3)
    return arr


def _distinct_pairs(edges):
    """Unique (u, v) rows of an (E, 2) array."""
    if len(edges) == 0:
        return edges.reshape(0, 2)
    return np.unique(edges, axis=0)


# ---------------------------------------------------------------------------
# Krackhardt hierarchy score


@dataclass(frozen=True)
class KhsResult:
    khs: float
    reachable_pairs: int
    asymmetric_pairs: int
    nodes: int
    edges: int


def khs_details(edges):
    """Khs of the digraph with (E, 2) edge array ``edges``.

    Among ordered pairs ``(u, v)``, ``u != v``, with a path ``u -> v``, the
    fraction that have no path back.  Computed on the condensation: pairs
    inside a strongly connected component are always mutual, pairs across
    components never are, and cross-component reachability is a bitset
    union over the DAG in reverse topological order.
    """
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    edges = _distinct_pairs(edges[edges[:, 0] != edges[:, 1]])
    if len(edges) == 0:
        raise EmptyGraph("relation graph has no edges between distinct nodes")
    nodes, local = np.unique(edges, return_inverse=True)
    local = local.reshape(-1, 2)
    m = len(nodes)
    graph = sparse.csr_matrix((np.ones(len(local)), (local[:, 0], local[:, 1])), shape=(m, m))
    n_comp, label = connected_components(graph, directed=True, connection="strong")
    size = np.bincount(label, minlength=n_comp)

    cu, cv = label[local[:, 0]], label[local[:, 1]]
    cross = cu != cv
    dag = _distinct_pairs(np.stack([cu[cross], cv[cross]], axis=1))
    order = _topological_order(n_comp, dag)

    # bit position of a component = its index in reverse topological order
    position = np.empty(n_comp, dtype=np.int64)
    position[order[::-1]] = np.arange(n_comp)
    succ = [[] for _ in range(n_comp)]
    for a, b in dag.tolist():
        succ[a].append(b)
    big = [(int(position[c]), int(size[c]) - 1) for c in np.flatnonzero(size > 1)]
    reach = [0] * n_comp
    asymmetric = 0
    for c in order[::-1].tolist():
        bits = 0
        for d in succ[c]:
            bits |= reach[d] | (1 << int(position[d]))
        reach[c] = bits
        if bits:
            weight = bits.bit_count() + sum(extra for pos, extra in big if (bits >> pos) & 1)
            asymmetric += int(size[c]) * weight
    symmetric = int((size * (size - 1)).sum())
    total = asymmetric + symmetric
    return KhsResult(asymmetric / total, total, asymmetric, m, len(edges))


def khs(edges):
    return khs_details(edges).khs


def _topological_order(n, dag):
    indegree = np.bincount(dag[:, 1], minlength=n) if len(dag) else np.zeros(n, dtype=np.int64)
    succ = [[] for _ in range(n)]
    for a, b in dag.tolist():
        succ[a].append(b)
    indegree = indegree.tolist()
    stack = [i for i in range(n) if indegree[i] == 0]
    order = []
    while stack:
        c = stack.pop()
        order.append(c)
        for d in succ[c]:
            indegree[d] -= 1
            if indegree[d] == 0:
                stack.append(d)
    if len(order) != n:
        raise AssertionError("condensation is not acyclic")
    return np.asarray(order, dtype=np.int64)


def khs_by_relation(triples, n_relations=None):
    """``{relation id: KhsResult}`` for every relation with at least one
    non-loop edge."""
    triples = _triples(triples)
    if len(triples) == 0:
        raise EmptyGraph("no triples")
    out = {}
    rels = np.unique(triples[:, 1]) if n_relations is None else range(n_relations)
    for r in rels:
        sel = triples[triples[:, 1] == r]
        try:
            out[int(r)] = khs_details(sel[:, [0, 2]])
        except EmptyGraph:
            continue
    return out


def khs_bruteforce(edges):
    """Reference implementation: BFS from every node."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    adj = {}
    for u, v in edges.tolist():
        if u != v:
            adj.setdefault(u, set()).add(v)
            adj.setdefault(v, set())
    if not any(adj.values()):
        raise EmptyGraph("relation graph has no edges between distinct nodes")
    reach = {}
    for s in adj:
        seen, frontier = set(), [s]
        while frontier:
            u = frontier.pop()
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    frontier.append(v)
        seen.discard(s)
        reach[s] = seen
    pairs = [(u, v) for u in reach for v in reach[u]]
    return sum(u not in reach[v] for u, v in pairs) / len(pairs)


# ---------------------------------------------------------------------------
# multiplicity


@dataclass(frozen=True)
class MultiplicityResult:
    indices: np.ndarray
    count: int
    fraction: float
    definition: str


def classify_multiplicity(split, definition=DIRECTED):
    """Triples whose entity pair carries at least one other relation.

    ``directed`` pairs ``(h, t)`` with ``(h, r', t)``; ``undirected`` also
    accepts ``(t, r', h)``.
    """
    if definition not in (DIRECTED, UNDIRECTED):
        raise InputError("multiplicity definition must be directed or undirected")
    triples = _triples(split)
    if len(triples) == 0:
        raise EmptySplit("multiplicity of an empty split")
    h, r, t = triples.T
    if definition == UNDIRECTED:
        a, b = np.minimum(h, t), np.maximum(h, t)
    else:
        a, b = h, t
    n = int(triples[:, [0, 2]].max()) + 1
    key = a * n + b
    distinct = np.unique(np.stack([key, r], axis=1), axis=0)
    pair_keys, rel_count = np.unique(distinct[:, 0], return_counts=True)
    per_triple = rel_count[np.searchsorted(pair_keys, key)]
    idx = np.flatnonzero(per_triple > 1)
    return MultiplicityResult(idx, len(idx), len(idx) / len(triples), definition)


# ---------------------------------------------------------------------------
# complex relation categories


@dataclass(frozen=True)
class ComplexCategory:
    category: str
    tails_per_head: float
    heads_per_tail: float


def classify_complex(train, threshold=1.5):
    """``{relation: ComplexCategory}`` from averages over distinct triples.

    A side is "n" when its average strictly exceeds ``threshold``.
    """
    triples = np.unique(_triples(train), axis=0)
    if len(triples) == 0:
        raise EmptySplit("training split is empty")
    out = {}
    for r in np.unique(triples[:, 1]).tolist():
        sel = triples[triples[:, 1] == r]
        tph = len(sel) / len(np.unique(sel[:, 0]))
        hpt = len(sel) / len(np.unique(sel[:, 2]))
        label = f"{'n' if hpt > threshold else '1'}-{'n' if tph > threshold else '1'}"
        out[r] = ComplexCategory(label, tph, hpt)
    return out


def complex_slices(triples, categories):
    """Indices of ``triples`` per category, for sliced evaluation."""
    triples = _triples(triples)
    labels = np.array([categories[r].category if r in categories else "" for r in
                       triples[:, 1].tolist()], dtype=object)
    return {c: np.flatnonzero(labels == c) for c in ("1-1", "1-n", "n-1", "n-n")}


# ---------------------------------------------------------------------------
# relation patterns


@dataclass(frozen=True)
class PatternThresholds:
    symmetric: float = 0.8
    antisymmetric: float = 0.05
    inversion: float = 0.8
    composition: float = 0.5
    support: int = 10
    composition_paths: int = 50


@dataclass
class PatternReport:
    support: dict
    symmetry_fraction: dict
    symmetric: list
    antisymmetric: list
    inversion_pairs: list
    composition: list
    thresholds: PatternThresholds
    slices: dict = field(default_factory=dict)


class _PairIndex:
    """Sorted ``(h, t)`` keys with the relations on each pair."""

    def __init__(self, triples, n):
        self.n = n
        keys = triples[:, 0] * n + triples[:, 2]
        order = np.lexsort((triples[:, 1], keys))
        keys, rels = keys[order], triples[order, 1]
        self.keys, start = np.unique(keys, return_index=True)
        self.ptr = np.append(start, len(keys))
        self.rels = rels

    def lookup(self, keys):
        """For each query key: (query index, relation) rows of every match."""
        pos = np.searchsorted(self.keys, keys)
        pos = np.minimum(pos, len(self.keys) - 1)
        hit = self.keys[pos] == keys
        q = np.flatnonzero(hit)
        lo, hi = self.ptr[pos[q]], self.ptr[pos[q] + 1]
        counts = hi - lo
        rows = np.repeat(q, counts)
        offsets = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
        return rows, self.rels[np.repeat(lo, counts) + offsets]


def _reverse_counts(triples, index, n_relations):
    """``C[a, b]`` = number of distinct, non-loop (h, a, t) with (t, b, h) present."""
    rows, rels = index.lookup(triples[:, 2] * index.n + triples[:, 0])
    flat = triples[rows, 1] * n_relations + rels
    return np.bincount(flat, minlength=n_relations * n_relations).reshape(n_relations, n_relations)


def _composition_witnesses(triples, index, n_entities, n_relations, th, chunk=1 << 22):
    """``(r1, r2, r3, fraction, paths)`` for every qualifying rule."""
    mats = [sparse.csr_matrix(
        (np.ones(int((triples[:, 1] == r).sum())), (triples[triples[:, 1] == r, 0],
                                                    triples[triples[:, 1] == r, 2])),
        shape=(n_entities, n_entities)) for r in range(n_relations)]
    stacked = sparse.hstack(mats, format="csr")
    found = []
    for r1 in range(n_relations):
        if mats[r1].nnz == 0:
            continue
        paths = (mats[r1] @ stacked).tocoo()
        if paths.nnz == 0:
            continue
        r2 = paths.col // n_entities
        tail = paths.col % n_entities
        weight = paths.data.astype(np.int64)
        total = np.bincount(r2, weights=weight, minlength=n_relations)
        hit = np.zeros(n_relations * n_relations)
        for s in range(0, paths.nnz, chunk):
            sl = slice(s, s + chunk)
            rows, r3 = index.lookup(paths.row[sl].astype(np.int64) * n_entities + tail[sl])
            hit += np.bincount(r2[sl][rows] * n_relations + r3, weights=weight[sl][rows],
                               minlength=n_relations * n_relations)
        hit = hit.reshape(n_relations, n_relations)
        for b in np.flatnonzero(total >= th.composition_paths).tolist():
            frac = hit[b] / total[b]
            for c in np.flatnonzero(frac >= th.composition).tolist():
                found.append((r1, b, c, float(frac[c]), int(total[b])))
    return found


def classify_patterns(reference, n_entities, n_relations, thresholds=None, test=None,
                      composition=True):
    """Classify relations of ``reference`` triples and slice ``test`` by pattern.

    Slices hold indices into ``test`` of triples whose relation is symmetric,
    antisymmetric, has an inversion partner, or is the conclusion of a
    composition rule; ``multiplicity`` uses the directed definition within
    the test split itself.
    """
    th = thresholds or PatternThresholds()
    triples = np.unique(_triples(reference), axis=0)
    triples = triples[triples[:, 0] != triples[:, 2]]
    index = _PairIndex(triples, n_entities)
    support = np.bincount(triples[:, 1], minlength=n_relations)
    rev = _reverse_counts(triples, index, n_relations)
    with np.errstate(invalid="ignore", divide="ignore"):
        frac = np.where(support[:, None] > 0, rev / support[:, None], 0.0)
    sym_fraction = {r: float(frac[r, r]) for r in range(n_relations) if support[r]}
    ok = support >= th.support
    symmetric = [r for r in range(n_relations) if ok[r] and frac[r, r] >= th.symmetric]
    antisymmetric = [r for r in range(n_relations) if ok[r] and frac[r, r] <= th.antisymmetric]
    inversion = [(a, b) for a in range(n_relations) for b in range(a + 1, n_relations)
                 if ok[a] and ok[b] and frac[a, b] >= th.inversion and frac[b, a] >= th.inversion]
    witnesses = _composition_witnesses(triples, index, n_entities, n_relations, th) \
        if composition else []
    report = PatternReport({r: int(support[r]) for r in range(n_relations)}, sym_fraction,
                           symmetric, antisymmetric, inversion, witnesses, th)
    if test is not None and len(test):
        test = _triples(test)
        rel = test[:, 1]
        inv_rels = {x for pair in inversion for x in pair}
        comp_rels = {w[2] for w in witnesses}
        report.slices = {
            "symmetry": np.flatnonzero(np.isin(rel, symmetric)),
            "antisymmetry": np.flatnonzero(np.isin(rel, antisymmetric)),
            "inversion": np.flatnonzero(np.isin(rel, list(inv_rels))),
            "composition": np.flatnonzero(np.isin(rel, list(comp_rels))),
            "multiplicity": classify_multiplicity(test).indices,
        }
    return report


# ---------------------------------------------------------------------------
# frequencies and reports


def relation_frequency(split, n_relations=None):
    """``{relation: (count, fraction)}`` for relations occurring in the split."""
    triples = _triples(split)
    if len(triples) == 0:
        raise EmptySplit("frequency of an empty split")
    counts = np.bincount(triples[:, 1], minlength=n_relations or 0)
    return {r: (int(c), c / len(triples)) for r, c in enumerate(counts.tolist()) if c}


def format_rows(header, rows):
    """Aligned plain-text table; ``rows`` are sequences of strings/numbers."""
    cells = [[str(h) for h in header]] + [[_cell(x) for x in row] for row in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    lines = []
    for j, row in enumerate(cells):
        lines.append("  ".join(c.ljust(w) if i == 0 else c.rjust(w)
                               for i, (c, w) in enumerate(zip(row, widths))))
        if j == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines)


def _cell(x):
    if isinstance(x, float):
        return f"{x:.4f}"
    return str(x)


def write_rows(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        writer.writerows(rows)
