"""Command-line interface: ``hykge {train,evaluate,analyze,gradcheck,paramcount}``.

Option precedence is preset < config file < command-line flag.  Config
files hold flat ``key = value`` lines whose keys are flag names with or
without the leading dashes (``batch-size`` and ``batch_size`` both work).

Exit codes: 0 success, 2 usage or input error, 3 consistency error
(checkpoint and dataset disagree), 4 gradient check failure.
"""

import argparse
import logging
from pathlib import Path
import sys

import numpy as np
import torch

from . import analysis, data, evaluation, models, training
from .errors import ConsistencyError, HykgeError, InputError, VocabMismatch
from .presets import PRESETS, get_preset

EXIT_OK, EXIT_USAGE, EXIT_CONSISTENCY, EXIT_GRADCHECK = 0, 2, 3, 4

# Sizes of the standard benchmarks, for paramcount without the files.
KNOWN_SIZES = {
    "WN18RR": (40943, 11),
    "FB15K-237": (14541, 237),
    "FB15K": (14951, 1345),
    "YAGO3-10": (123182, 37),
}

SLICES = ("none", "per-relation", "pattern", "complex", "all")

# TrainConfig field -> (flag, type)
_TRAIN_OPTIONS = {
    "kind": ("--kind", str),
    "variant": ("--variant", str),
    "dim": ("--dim", int),
    "learning_rate": ("--lr", float),
    "optimizer": ("--optimizer", str),
    "batch_size": ("--batch-size", int),
    "negatives": ("--negatives", int),
    "max_epochs": ("--max-epochs", int),
    "valid_every": ("--valid-every", int),
    "patience": ("--patience", int),
    "seed": ("--seed", int),
    "eval_mode": ("--eval-mode", str),
}
_CONFIG_ALIASES = {"lr": "learning_rate", "learning-rate": "learning_rate"}

log = logging.getLogger("hykge")


class UsageError(InputError):
    pass


def read_config(path):
    """Flat ``key = value`` file -> dict with underscore keys."""
    out = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise data.DatasetIOError(f"cannot read config {path}: {exc}") from exc
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{number}: expected 'key = value'")
        key = key.strip().lstrip("-")
        key = _CONFIG_ALIASES.get(key, key).replace("-", "_")
        out[key] = value.strip()
    return out


def _known_size(name):
    for canonical, aliases in data.DATASET_ALIASES.items():
        if name.upper() in (a.upper() for a in aliases) and canonical in KNOWN_SIZES:
            return KNOWN_SIZES[canonical]
    return None


# ---------------------------------------------------------------------------
# parser


def _preset_epilog():
    names = sorted(PRESETS)
    lines, line = [], " "
    for n in names:
        if len(line) + len(n) + 1 > 78:
            lines.append(line)
            line = " "
        line += " " + n
    lines.append(line)
    return ("hyperparameter presets (use with --preset):\n" + "\n".join(lines)
            + f"\n\nenvironment: {data.DATA_DIR_ENV} is the default root for dataset names."
            + "\nexit codes: 0 ok, 2 usage/input error, 3 consistency error, 4 gradcheck failure")


def build_parser():
    fmt = argparse.RawDescriptionHelpFormatter
    parser = argparse.ArgumentParser(
        prog="hykge", description="Knowledge-graph embeddings with rotations and translations "
        "in Euclidean and hyperbolic space.", epilog=_preset_epilog(), formatter_class=fmt)
    parser.add_argument("--threads", type=int, default=None, help="cap torch worker threads")
    parser.add_argument("--log-level", default="WARNING",
                        choices=("DEBUG", "INFO", "WARNING", "ERROR"))
    sub = parser.add_subparsers(dest="command", required=True)

    def dataset_args(p):
        p.add_argument("--data", help="dataset directory or benchmark name resolved under "
                       f"${data.DATA_DIR_ENV} (train.txt, valid.txt, test.txt)")

    p = sub.add_parser("train", help="train a model", epilog=_preset_epilog(), formatter_class=fmt)
    dataset_args(p)
    p.add_argument("--preset", help="named hyperparameter preset (also sets the dataset)")
    p.add_argument("--config", help="key = value file; flags override it")
    for field, (flag, typ) in _TRAIN_OPTIONS.items():
        default = getattr(training.TrainConfig, field, None)
        p.add_argument(flag, dest=field, type=typ, default=None,
                       help=f"default {default}" if default is not None else None)
    p.add_argument("--reciprocal", action="store_true",
                   help="add inverse relations and train/validate on both directions")
    p.add_argument("--out", default="run", help="output directory (default: run)")

    p = sub.add_parser("evaluate", help="evaluate a checkpoint")
    dataset_args(p)
    p.add_argument("--checkpoint", required=True, help="checkpoint directory")
    p.add_argument("--split", default="test", choices=("train", "valid", "test"))
    p.add_argument("--eval-mode", default=evaluation.FILTERED,
                   choices=(evaluation.FILTERED, evaluation.RAW))
    p.add_argument("--direction", default="tail", choices=("tail", "both"),
                   help="'both' needs a checkpoint trained with --reciprocal")
    p.add_argument("--slice", action="append", default=None, choices=SLICES,
                   help="extra sliced tables; repeatable")
    p.add_argument("--out", help="directory for CSV copies (default: the checkpoint directory)")

    p = sub.add_parser("analyze", help="dataset statistics and relation patterns")
    dataset_args(p)
    p.add_argument("--khs-split", default="union", choices=("union", "train", "valid", "test"))
    p.add_argument("--multiplicity", default="both",
                   choices=(analysis.DIRECTED, analysis.UNDIRECTED, "both"))
    p.add_argument("--complex-threshold", type=float, default=1.5)
    p.add_argument("--no-composition", action="store_true",
                   help="skip the composition search (slow on large graphs)")
    p.add_argument("--out", help="directory for CSV reports")

    p = sub.add_parser("gradcheck", help="finite-difference check of analytic gradients")
    p.add_argument("--kinds", nargs="*", default=None, help="default: every kind")
    p.add_argument("--dims", nargs="*", type=int, default=[8])
    p.add_argument("--draws", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("paramcount", help="number of embedding parameters")
    p.add_argument("--kind", required=True)
    p.add_argument("--dataset", help=f"one of {', '.join(KNOWN_SIZES)} or a dataset directory")
    p.add_argument("--entities", type=int)
    p.add_argument("--relations", type=int)
    p.add_argument("--dim", type=int, default=None,
                   help="embedding dimension; omitted, the count is printed in units of k")
    return parser


# ---------------------------------------------------------------------------
# commands


def _load(args_data, fallback=None):
    target = args_data or fallback
    if not target:
        raise UsageError("no dataset given (--data)")
    return data.load_dataset(target)


def _train_config(args):
    merged = {}
    dataset = None
    if args.preset:
        preset = get_preset(args.preset)
        dataset = preset.pop("dataset")
        merged.update(preset)
    if args.config:
        cfg = read_config(args.config)
        dataset = cfg.pop("data", dataset)
        unknown = set(cfg) - set(_TRAIN_OPTIONS) - {"reciprocal", "out"}
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
        for key, value in cfg.items():
            if key in _TRAIN_OPTIONS:
                merged[key] = _TRAIN_OPTIONS[key][1](value)
            elif key == "reciprocal":
                args.reciprocal = args.reciprocal or value.lower() in ("1", "true", "yes")
    for key in _TRAIN_OPTIONS:
        value = getattr(args, key)
        if value is not None:
            merged[key] = value
    return training.TrainConfig(**merged), args.data or dataset


def cmd_train(args):
    config, target = _train_config(args)
    dataset = _load(target)
    if args.reciprocal:
        dataset = data.with_reciprocals(dataset)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    last = {}
    best, records = training.train(config, dataset, log_path=out / "train_log.jsonl",
                                   callback=lambda rec, state: last.update(state=state))
    final = last.get("state", best)
    data.save_checkpoint(best, out / "best")
    data.save_checkpoint(final, out / "final")
    (out / "config.txt").write_text(
        "".join(f"{k} = {v}\n" for k, v in training.config_dict(config).items())
        + f"data = {target}\nreciprocal = {args.reciprocal}\n", encoding="utf-8")
    direction = "both" if args.reciprocal else "tail"
    if len(dataset.valid):
        metrics = evaluation.evaluate(best, dataset.valid, dataset, config.eval_mode, direction)
        print(evaluation.format_table([("valid", metrics)]))
    print(f"epochs run: {len(records)}; checkpoints in {out}")
    return EXIT_OK


def _relation_label(dataset, r):
    return analysis.display_name(dataset.vocab.relations[r])


def _evaluation_dataset(state, dataset):
    if state.n_relations == 2 * dataset.n_relations:
        dataset = data.with_reciprocals(dataset)
    if state.vocab_hash != dataset.vocab.hash():
        raise VocabMismatch("checkpoint vocabulary does not match the dataset")
    return dataset


def cmd_evaluate(args):
    dataset = _load(args.data)
    state = data.load_checkpoint(args.checkpoint)
    dataset = _evaluation_dataset(state, dataset)
    split = dataset.splits[args.split]
    queries = evaluation.queries_for(split, dataset, args.direction)
    ranks = evaluation.rank_queries(state, queries, dataset, args.eval_mode)
    out = Path(args.out or args.checkpoint)
    out.mkdir(parents=True, exist_ok=True)
    overall = [(args.split, evaluation.Metrics.from_ranks(ranks))]
    print(evaluation.format_table(overall))
    evaluation.write_csv(out / f"metrics_{args.split}.csv", overall)

    slices = set(args.slice or ())
    if "all" in slices:
        slices = {"per-relation", "pattern", "complex"}
    base = dataset.n_base_relations
    # pattern and category membership is defined on base triples; reciprocal
    # queries inherit the slice of the triple they come from
    n_split = len(split)
    expand = (lambda idx: np.concatenate([idx, idx + n_split])) if args.direction == "both" \
        else (lambda idx: idx)
    train_base = dataset.train[dataset.train[:, 1] < base]

    if "per-relation" in slices:
        groups = evaluation.relation_groups(queries, base)
        per = evaluation.slice_metrics(ranks, groups)
        all_triples = dataset.all_triples()
        all_triples = all_triples[all_triples[:, 1] < base]
        khs = analysis.khs_by_relation(all_triples)
        order = sorted(per, key=lambda r: (-(khs[r].khs if r in khs else -1), r))
        header = ["relation", "Khs", "MRR", "H@1", "H@3", "H@10", "n"]
        rows = [[_relation_label(dataset, r), round(khs[r].khs, 4) if r in khs else "",
                 *[round(x, 4) for x in per[r].as_row()[:4]], per[r].n] for r in order]
        print()
        print(analysis.format_rows(header, rows))
        evaluation.write_csv(out / f"per_relation_{args.split}.csv",
                             [(_relation_label(dataset, r), per[r]) for r in order])
    if "complex" in slices:
        cats = analysis.classify_complex(train_base)
        groups = {c: expand(i) for c, i in analysis.complex_slices(split, cats).items()}
        rows = list(evaluation.slice_metrics(ranks, groups).items())
        print()
        print(evaluation.format_table(rows, "category"))
        evaluation.write_csv(out / f"complex_{args.split}.csv", rows)
    if "pattern" in slices:
        report = analysis.classify_patterns(train_base, dataset.n_entities, base, test=split)
        groups = {name: expand(i) for name, i in report.slices.items()}
        rows = list(evaluation.slice_metrics(ranks, groups).items())
        print()
        print(evaluation.format_table(rows, "pattern"))
        evaluation.write_csv(out / f"pattern_{args.split}.csv", rows)
    return EXIT_OK


def cmd_analyze(args):
    dataset = _load(args.data)
    out = Path(args.out) if args.out else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
    name = lambda r: _relation_label(dataset, r)  # noqa: E731

    print("dataset")
    summary = dataset.summary()
    print(analysis.format_rows(list(summary), [list(summary.values())]))

    khs_source = dataset.all_triples() if args.khs_split == "union" \
        else dataset.splits[args.khs_split]
    khs = analysis.khs_by_relation(khs_source)
    order = sorted(khs, key=lambda r: (-khs[r].khs, r))
    header = ["relation", "Khs", "reachable pairs", "nodes", "edges"]
    rows = [[name(r), khs[r].khs, khs[r].reachable_pairs, khs[r].nodes, khs[r].edges]
            for r in order]
    print(f"\nKrackhardt hierarchy score ({args.khs_split})")
    print(analysis.format_rows(header, rows))
    if out:
        analysis.write_rows(out / "khs.csv", header, rows)

    definitions = (analysis.DIRECTED, analysis.UNDIRECTED) if args.multiplicity == "both" \
        else (args.multiplicity,)
    header = ["split", "triples"] + [f"multiplicity ({d})" for d in definitions]
    rows = []
    for s in data.SPLITS:
        split = dataset.splits[s]
        if not len(split):
            continue
        res = [analysis.classify_multiplicity(split, d) for d in definitions]
        rows.append([s, len(split)] + [f"{m.count} ({100 * m.fraction:.2f}%)" for m in res])
    print("\nmultiplicity")
    print(analysis.format_rows(header, rows))
    if out:
        analysis.write_rows(out / "multiplicity.csv", header, rows)

    header = ["relation"] + [f"{s} count" for s in data.SPLITS] + [f"{s} %" for s in data.SPLITS]
    freqs = {s: analysis.relation_frequency(dataset.splits[s], dataset.n_relations)
             for s in data.SPLITS if len(dataset.splits[s])}
    rows = []
    for r in range(dataset.n_relations):
        counts = [freqs[s].get(r, (0, 0.0))[0] if s in freqs else 0 for s in data.SPLITS]
        pct = [f"{100 * freqs[s].get(r, (0, 0.0))[1]:.2f}" if s in freqs else "" for s in
               data.SPLITS]
        rows.append([name(r)] + counts + pct)
    print("\nrelation frequency")
    print(analysis.format_rows(header, rows))
    if out:
        analysis.write_rows(out / "relation_frequency.csv", header, rows)

    cats = analysis.classify_complex(dataset.train, args.complex_threshold)
    header = ["relation", "category", "tails/head", "heads/tail"]
    rows = [[name(r), c.category, c.tails_per_head, c.heads_per_tail] for r, c in cats.items()]
    print(f"\nrelation categories (threshold {args.complex_threshold})")
    print(analysis.format_rows(header, rows))
    if out:
        analysis.write_rows(out / "categories.csv", header, rows)

    report = analysis.classify_patterns(dataset.train, dataset.n_entities, dataset.n_relations,
                                        test=dataset.test, composition=not args.no_composition)
    print("\nrelation patterns (train)")
    rows = [[name(r), report.support[r], report.symmetry_fraction.get(r, 0.0),
             "symmetric" if r in report.symmetric else
             "antisymmetric" if r in report.antisymmetric else ""]
            for r in range(dataset.n_relations)]
    header = ["relation", "support", "reverse fraction", "class"]
    print(analysis.format_rows(header, rows))
    if out:
        analysis.write_rows(out / "patterns.csv", header, rows)
    if report.inversion_pairs:
        print("\ninversion pairs")
        print(analysis.format_rows(["r1", "r2"], [[name(a), name(b)]
                                                  for a, b in report.inversion_pairs]))
    if report.composition:
        print("\ncomposition rules r1 . r2 => r3")
        rows = [[name(a), name(b), name(c), f, n] for a, b, c, f, n in report.composition]
        print(analysis.format_rows(["r1", "r2", "r3", "fraction", "paths"], rows))
    if report.slices:
        print("\ntest pattern slices")
        n = len(dataset.test)
        rows = [[k, len(v), f"{100 * len(v) / n:.2f}%"] for k, v in report.slices.items()]
        print(analysis.format_rows(["slice", "triples", "share"], rows))
        if out:
            for k, v in report.slices.items():
                np.savetxt(out / f"slice_{k}.txt", v, fmt="%d")
    return EXIT_OK


def cmd_gradcheck(args):
    if args.kinds:
        kinds = [models.get_kind(k).name for k in args.kinds]
        configs = [c for c in models.ALL_CONFIGURATIONS if c[0] in kinds]
    else:
        configs = models.ALL_CONFIGURATIONS
    for k in args.dims:
        if k <= 0:
            raise UsageError("dimensions must be positive")
    results = training.gradcheck_all(args.dims, args.draws, args.seed, configs)
    worst = 0.0
    print(f"{'kind':<12} {'variant':<20} {'k':>4}  max rel. error")
    for (kind, variant, k), err in results.items():
        flag = "" if err < training.FD_TOLERANCE else "  FAIL"
        print(f"{kind:<12} {variant:<20} {k:>4}  {err:.3e}{flag}")
        worst = max(worst, err)
    ok = worst < training.FD_TOLERANCE
    print(f"{'PASS' if ok else 'FAIL'}: worst {worst:.3e} (tolerance {training.FD_TOLERANCE:g})")
    return EXIT_OK if ok else EXIT_GRADCHECK


def cmd_paramcount(args):
    if args.entities is not None and args.relations is not None:
        n_e, n_r = args.entities, args.relations
    elif args.dataset:
        size = _known_size(args.dataset)
        if size is None:
            ds = data.load_dataset(args.dataset)
            size = (ds.n_entities, ds.n_relations)
        n_e, n_r = size
    else:
        raise UsageError("give --dataset or both --entities and --relations")
    spec = models.get_kind(args.kind)
    per_dim = models.param_count_per_dim(spec, n_e, n_r)
    if args.dim is None:
        exact = float(per_dim)
        print(f"{spec.name}: {models.round_half_up(per_dim)}k (exact {exact:g}k; "
              f"n_e={n_e}, n_r={n_r})")
    else:
        print(models.param_count(spec, n_e, n_r, args.dim))
    return EXIT_OK


COMMANDS = {
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "analyze": cmd_analyze,
    "gradcheck": cmd_gradcheck,
    "paramcount": cmd_paramcount,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s")
    if args.threads is not None:
        if args.threads < 1:
            parser.error("--threads must be positive")
        torch.set_num_threads(args.threads)
    try:
        return COMMANDS[args.command](args)
    except ConsistencyError as exc:
        print(f"hykge: error: {exc}", file=sys.stderr)
        return EXIT_CONSISTENCY
    except (HykgeError, ValueError) as exc:
        print(f"hykge: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
