"""Named hyperparameter presets for the benchmark datasets.

A preset name is ``<dataset>-<dim>-<kind>`` with the kind lower-cased and
its dashes removed, e.g. ``wn18rr-32-3hth`` or ``fb15k237-32-2ete2hth``.
"""

from .errors import InputError

ORDER = ("TE", "2E", "3E", "TH", "2H", "3H", "2E-TE", "3E-TE", "2E-TE-2H-TH", "3H-TH",
         "3E-TE-3H-TH")

# (learning rate, optimizer, batch size, negatives) per kind, in ORDER.
_A, _G = "Adam", "Adagrad"
_TABLE = {
    ("WN18RR", (32,)): [
        (0.001, _A, 500, 50), (0.1, _G, 500, 50), (0.2, _G, 500, 50), (0.0005, _A, 500, 100),
        (0.0005, _A, 500, 50), (0.001, _A, 500, 100), (0.1, _G, 500, 50), (0.2, _G, 500, 100),
        (0.001, _A, 500, 100), (0.001, _A, 500, 100), (0.001, _A, 500, 100)],
    ("WN18RR", (200, 300, 500)): [
        (0.001, _A, 500, 100), (0.1, _G, 500, 100), (0.2, _G, 500, 100), (0.001, _A, 500, 100),
        (0.001, _A, 500, 50), (0.001, _A, 500, 100), (0.1, _G, 500, 50), (0.2, _G, 500, 100),
        (0.001, _A, 500, 100), (0.001, _A, 500, 100), (0.001, _A, 500, 100)],
    ("FB15K-237", (32,)): [
        (0.05, _A, 1000, 50), (0.05, _G, 1000, 50), (0.05, _G, 1000, 50), (0.05, _G, 1000, 50),
        (0.1, _G, 1000, 50), (0.05, _G, 1000, 50), (0.05, _G, 1000, 50), (0.05, _G, 1000, 50),
        (0.05, _G, 1000, 50), (0.05, _G, 1000, 50), (0.05, _G, 1000, 50)],
    ("FB15K", (32,)): [
        (0.05, _G, 1000, 200), (0.4, _G, 1000, 200), (0.2, _G, 1000, 200), (0.1, _G, 1000, 200),
        (0.1, _G, 1000, 200), (0.2, _G, 1000, 200), (0.4, _G, 1000, 200), (0.2, _G, 1000, 200),
        (0.2, _G, 1000, 200), (0.2, _G, 1000, 200), (0.2, _G, 1000, 200)],
}


def preset_name(dataset, dim, kind):
    return f"{dataset.lower().replace('-', '')}-{dim}-{kind.lower().replace('-', '')}"


def _build():
    presets = {}
    for (dataset, dims), rows in _TABLE.items():
        for dim in dims:
            for kind, (lr, opt, batch, neg) in zip(ORDER, rows):
                presets[preset_name(dataset, dim, kind)] = {
                    "dataset": dataset, "dim": dim, "kind": kind, "learning_rate": lr,
                    "optimizer": opt, "batch_size": batch, "negatives": neg,
                }
    return presets


PRESETS = _build()


def get_preset(name):
    try:
        return dict(PRESETS[name.lower()])
    except KeyError:
        raise InputError(f"unknown preset {name!r}") from None
