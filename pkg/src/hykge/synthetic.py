"""A small generated knowledge graph over a complete binary tree.

Nodes ``0..2^depth - 2`` form a heap-ordered binary tree (children of ``i``
are ``2i+1`` and ``2i+2``).  Relations:

* ``child_of`` (child -> parent) and ``parent_of`` (parent -> child), an
  inversion pair;
* ``sibling`` in both directions, a symmetric relation;
* ``grandparent_of``, the composition ``parent_of`` then ``parent_of``.
"""

import numpy as np

from .data import build_dataset

RELATIONS = ("child_of", "parent_of", "sibling", "grandparent_of")


def node_name(i, width=3):
    return f"n{i:0{width}d}"


def tree_triples(n_nodes=127):
    width = len(str(n_nodes - 1))
    name = lambda i: node_name(i, width)  # noqa: E731
    triples = []
    for c in range(1, n_nodes):
        p = (c - 1) // 2
        triples.append((name(c), "child_of", name(p)))
        triples.append((name(p), "parent_of", name(c)))
        sib = c + 1 if c % 2 else c - 1
        if sib < n_nodes:
            triples.append((name(c), "sibling", name(sib)))
        if p > 0:
            triples.append((name((p - 1) // 2), "grandparent_of", name(c)))
    return triples


def tree_dataset(n_nodes=127, test_fraction=0.1, valid_fraction=0.1, seed=0):
    """Disjoint train/valid/test split, stratified by relation: each
    relation contributes ``test_fraction`` of its triples to test and
    ``valid_fraction`` to valid."""
    triples = tree_triples(n_nodes)
    rng = np.random.default_rng(seed)
    splits = {"train": [], "valid": [], "test": []}
    for rel in RELATIONS:
        group = [x for x in triples if x[1] == rel]
        order = rng.permutation(len(group))
        n_test = int(round(test_fraction * len(group)))
        n_valid = int(round(valid_fraction * len(group)))
        splits["test"] += [group[i] for i in order[:n_test]]
        splits["valid"] += [group[i] for i in order[n_test:n_test + n_valid]]
        splits["train"] += [group[i] for i in order[n_test + n_valid:]]
    return build_dataset(splits["train"], splits["valid"], splits["test"], name=f"tree{n_nodes}")
