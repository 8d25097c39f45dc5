"""Triple files, vocabularies, filtered-candidate index and checkpoints.

Split files hold one ``head<TAB>relation<TAB>tail`` triple per line (UTF-8).
Entity and relation ids are dense and assigned in lexicographic order of
the raw strings over the union of all splits, so the same files always give
the same ids regardless of the order they are read in.

Checkpoint layout (a directory)::

    manifest.txt   key = value lines: format, kind, variant, k, n_entities,
                   n_relations, seed, vocab_hash, arrays
    arrays.bin     raw little-endian float64 arrays, concatenated in the
                   order listed by the ``arrays`` key (name:shape,...)
"""

from dataclasses import dataclass, field
from functools import cached_property
import hashlib
import os
from pathlib import Path

import numpy as np
import torch

from .errors import CorruptCheckpoint, DatasetIOError, EmptySplit, MalformedLine, VocabMismatch
from .models import DTYPE, ModelState, get_kind, parameter_shapes

SPLITS = ("train", "valid", "test")
CHECKPOINT_FORMAT = "hykge-checkpoint-1"
DATA_DIR_ENV = "HYKGE_DATA_DIR"

# Alternative directory names seen in the wild for the standard benchmarks.
DATASET_ALIASES = {
    "WN18RR": ("WN18RR", "wn18rr"),
    "FB15K-237": ("FB15K-237", "FB15k-237", "fb15k-237", "FB15K237", "fb15k237"),
    "FB15K": ("FB15K", "FB15k", "fb15k"),
    "YAGO3-10": ("YAGO3-10", "yago3-10", "YAGO3_10"),
}


def load_split(path):
    """Read raw ``(head, relation, tail)`` string triples from a split file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise DatasetIOError(f"cannot read {path}: {exc}") from exc
    triples = []
    for number, line in enumerate(text.splitlines(), start=1):
        fields = line.split("\t")
        if not line.strip():
            raise MalformedLine(path, number, "blank line")
        if len(fields) != 3 or not all(fields):
            raise MalformedLine(path, number)
        triples.append(tuple(fields))
    return triples


@dataclass(frozen=True)
class Vocab:
    entities: tuple
    relations: tuple

    @classmethod
    def from_triples(cls, *splits):
        ents, rels = set(), set()
        for split in splits:
            for h, r, t in split:
                ents.update((h, t))
                rels.add(r)
        return cls(tuple(sorted(ents)), tuple(sorted(rels)))

    @cached_property
    def entity_ids(self):
        return {e: i for i, e in enumerate(self.entities)}

    @cached_property
    def relation_ids(self):
        return {r: i for i, r in enumerate(self.relations)}

    def encode(self, triples):
        e, r = self.entity_ids, self.relation_ids
        out = np.fromiter(
            (x for h, rel, t in triples for x in (e[h], r[rel], e[t])),
            dtype=np.int64,
            count=3 * len(triples),
        )
        return out.reshape(-1, 3)

    def hash(self):
        digest = hashlib.sha256()
        for group in (self.entities, self.relations):
            for name in group:
                digest.update(name.encode("utf-8") + b"\n")
            digest.update(b"\0")
        return digest.hexdigest()[:32]


@dataclass
class Dataset:
    """Integer-coded splits plus the vocabulary they were coded with.

    ``n_base_relations`` differs from ``n_relations`` only for datasets
    produced by :func:`with_reciprocals`, whose extra relations are the
    inverses ``r + n_base_relations``.
    """

    vocab: Vocab
    splits: dict
    name: str = ""
    n_base_relations: int = 0
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.n_base_relations:
            self.n_base_relations = len(self.vocab.relations)

    @property
    def n_entities(self):
        return len(self.vocab.entities)

    @property
    def n_relations(self):
        return len(self.vocab.relations)

    @property
    def reciprocal(self):
        return self.n_relations != self.n_base_relations

    @property
    def train(self):
        return self.splits["train"]

    @property
    def valid(self):
        return self.splits["valid"]

    @property
    def test(self):
        return self.splits["test"]

    def all_triples(self):
        return np.concatenate([self.splits[s] for s in SPLITS if s in self.splits])

    @cached_property
    def true_tails(self):
        """Known tails per ``(h, r)`` over the union of all splits.

        Reciprocal datasets also index the reversed copy of every triple so
        head queries ``(t, r^-1, ?)`` get filtered too.
        """
        triples = self.all_triples()
        if self.reciprocal:
            base = triples[triples[:, 1] < self.n_base_relations]
            triples = np.concatenate([triples, reverse_triples(base, self.n_base_relations)])
        triples = np.unique(triples, axis=0)
        keys = triples[:, 0] * self.n_relations + triples[:, 1]
        cuts = np.flatnonzero(np.diff(keys)) + 1
        index = {}
        for group in np.split(triples, cuts):
            if len(group):
                index[(int(group[0, 0]), int(group[0, 1]))] = group[:, 2].copy()
        return index

    def tails_for(self, h, r):
        return self.true_tails.get((int(h), int(r)), np.empty(0, dtype=np.int64))

    def summary(self):
        return {
            "entities": self.n_entities,
            "relations": self.n_base_relations,
            **{s: len(self.splits.get(s, ())) for s in SPLITS},
        }


def build_dataset(train, valid=(), test=(), name=""):
    """Build vocabulary and integer splits from raw string triples."""
    if not len(train):
        raise EmptySplit("training split is empty")
    vocab = Vocab.from_triples(train, valid, test)
    splits = {s: vocab.encode(list(raw)) for s, raw in zip(SPLITS, (train, valid, test))}
    return Dataset(vocab, splits, name)


def resolve_dataset_dir(name_or_path):
    """Return an existing dataset directory for a path or a benchmark name.

    Names are looked up under ``$HYKGE_DATA_DIR`` including the usual
    spelling variants (``FB15k-237``, ``fb15k237``...).
    """
    path = Path(name_or_path)
    if path.is_dir():
        return path
    root = os.environ.get(DATA_DIR_ENV)
    if root:
        candidates = [str(name_or_path)]
        for canonical, aliases in DATASET_ALIASES.items():
            if str(name_or_path).upper() in (a.upper() for a in aliases):
                candidates = list(aliases)
        for candidate in candidates:
            if (Path(root) / candidate).is_dir():
                return Path(root) / candidate
    raise DatasetIOError(f"dataset directory not found: {name_or_path}")


def load_dataset(name_or_path):
    directory = resolve_dataset_dir(name_or_path)
    raw = [load_split(directory / f"{split}.txt") for split in SPLITS]
    return build_dataset(*raw, name=directory.name)


def reverse_triples(triples, n_base_relations):
    return np.stack([triples[:, 2], triples[:, 1] + n_base_relations, triples[:, 0]], axis=1)


def with_reciprocals(dataset):
    """Add an inverse relation per relation and the reversed training triples."""
    if dataset.reciprocal:
        return dataset
    n = dataset.n_relations
    vocab = Vocab(dataset.vocab.entities, dataset.vocab.relations + tuple(
        f"{r}_reverse" for r in dataset.vocab.relations))
    splits = dict(dataset.splits)
    splits["train"] = np.concatenate([dataset.train, reverse_triples(dataset.train, n)])
    out = Dataset(vocab, splits, dataset.name, n_base_relations=n)
    out.extra["base_vocab_hash"] = dataset.vocab.hash()
    return out


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(state, path):
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    names = list(state.params)
    arrays = ",".join(
        f"{n}:{'x'.join(str(d) for d in state.params[n].shape)}" for n in names
    )
    manifest = {
        "format": CHECKPOINT_FORMAT,
        "kind": state.kind,
        "variant": state.variant,
        "k": state.dim,
        "n_entities": state.n_entities,
        "n_relations": state.n_relations,
        "seed": state.seed,
        "vocab_hash": state.vocab_hash,
        "arrays": arrays,
    }
    with open(path / "arrays.bin", "wb") as f:
        for n in names:
            f.write(state.params[n].detach().cpu().numpy().astype("<f8", copy=False).tobytes())
    (path / "manifest.txt").write_text(
        "".join(f"{k} = {v}\n" for k, v in manifest.items()), encoding="utf-8"
    )


def read_manifest(path):
    try:
        text = (Path(path) / "manifest.txt").read_text(encoding="utf-8")
    except OSError as exc:
        raise CorruptCheckpoint(f"cannot read manifest in {path}: {exc}") from exc
    manifest = {}
    for line in text.splitlines():
        if line.strip() and not line.lstrip().startswith("#"):
            key, sep, value = line.partition("=")
            if not sep:
                raise CorruptCheckpoint(f"bad manifest line: {line!r}")
            manifest[key.strip()] = value.strip()
    return manifest


def load_checkpoint(path, kind=None, vocab_hash=None):
    """Load a checkpoint written by :func:`save_checkpoint`.

    ``kind`` and ``vocab_hash``, when given, must match the manifest.
    """
    path = Path(path)
    m = read_manifest(path)
    try:
        if m["format"] != CHECKPOINT_FORMAT:
            raise CorruptCheckpoint(f"unknown checkpoint format {m['format']!r}")
        spec = get_kind(m["kind"])
        k, n_e, n_r = int(m["k"]), int(m["n_entities"]), int(m["n_relations"])
        layout = []
        for item in m["arrays"].split(","):
            name, _, dims = item.partition(":")
            layout.append((name, tuple(int(d) for d in dims.split("x"))))
    except (KeyError, ValueError) as exc:
        raise CorruptCheckpoint(f"malformed manifest in {path}: {exc}") from exc
    if kind is not None and get_kind(kind).name != spec.name:
        raise CorruptCheckpoint(f"checkpoint holds {spec.name}, expected {get_kind(kind).name}")
    if vocab_hash is not None and m.get("vocab_hash", "") != vocab_hash:
        raise VocabMismatch("checkpoint vocabulary does not match the dataset")
    expected = parameter_shapes(spec, n_e, n_r, k)
    if dict(layout) != expected or len(layout) != len(expected):
        raise CorruptCheckpoint("array layout does not match the model kind")
    try:
        raw = (path / "arrays.bin").read_bytes()
    except OSError as exc:
        raise CorruptCheckpoint(f"cannot read arrays in {path}: {exc}") from exc
    sizes = [int(np.prod(shape)) for _, shape in layout]
    if len(raw) != 8 * sum(sizes):
        raise CorruptCheckpoint(f"arrays.bin holds {len(raw)} bytes, expected {8 * sum(sizes)}")
    flat = np.frombuffer(raw, dtype="<f8")
    params, offset = {}, 0
    for (name, shape), size in zip(layout, sizes):
        chunk = flat[offset:offset + size].reshape(shape).astype(np.float64)
        params[name] = torch.from_numpy(chunk.copy()).to(DTYPE)
        offset += size
    return ModelState(
        kind=spec.name,
        variant=m.get("variant") or spec.default_variant,
        n_entities=n_e,
        n_relations=n_r,
        dim=k,
        params=params,
        seed=int(m.get("seed", 0)),
        vocab_hash=m.get("vocab_hash", ""),
    )
