"""Datasets: synthetic moons, CSV ingestion, balancing, standardisation, splits."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, replace
from itertools import product
from pathlib import Path

import numpy as np

from fairminmax.nn import make_rng

log = logging.getLogger(__name__)

# P(Z=1 | Y=y) for the moon data; with P(Y=1)=0.5 this gives
# P(Y=1 | Z=1) = 0.35 and P(Y=1 | Z=0) = 0.65.
MOON_Z1_GIVEN_Y1 = 0.35
MOON_Z1_GIVEN_Y0 = 0.65
MOON_NOISE_SD = 0.2


class DataError(ValueError):
    pass


class IngestionError(DataError):
    pass


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    groups: np.ndarray
    split_tag: str = "train"
    feature_names: tuple[str, ...] = ()
    group_names: tuple[str, ...] = ()
    n_groups: int = 0

    def __post_init__(self):
        x = np.array(self.features, dtype=np.float64, copy=True)
        if x.ndim == 1:
            x = x[:, None]
        y = np.array(self.labels, dtype=np.int64, copy=True).reshape(-1)
        z = np.array(self.groups, dtype=np.int64, copy=True).reshape(-1)
        if not (x.shape[0] == y.size == z.size):
            raise DataError(f"row counts differ: features {x.shape[0]}, labels {y.size}, groups {z.size}")
        if not np.all(np.isfinite(x)):
            raise DataError("features must be finite")
        if y.size and not np.isin(y, (0, 1)).all():
            raise DataError("labels must be binary")
        if z.size and z.min() < 0:
            raise DataError("group ids must be non-negative")
        n_groups = max(self.n_groups, int(z.max()) + 1 if z.size else 1)
        for arr in (x, y, z):
            arr.setflags(write=False)
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "groups", z)
        object.__setattr__(self, "n_groups", n_groups)
        if not self.feature_names:
            object.__setattr__(self, "feature_names", tuple(f"x{k}" for k in range(x.shape[1])))
        if not self.group_names:
            object.__setattr__(self, "group_names", tuple(str(g) for g in range(n_groups)))

    def __len__(self):
        return self.labels.size

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def take(self, idx, split_tag: str | None = None) -> "Dataset":
        idx = np.asarray(idx)
        return replace(
            self,
            features=self.features[idx],
            labels=self.labels[idx],
            groups=self.groups[idx],
            split_tag=split_tag or self.split_tag,
        )

    def group_counts(self) -> dict[int, int]:
        return {g: int((self.groups == g).sum()) for g in range(self.n_groups)}


# -- moons -----------------------------------------------------------------


def generate_moons(n: int, noise_sd: float = MOON_NOISE_SD, seed=0, rng_algorithm: str = "pcg64") -> Dataset:
    """Two interleaving half circles with a label-correlated binary group.

    Class 0 sits on (cos t, sin t), class 1 on (1 - cos t, 0.5 - sin t),
    t ~ U[0, pi]. The group is drawn from the label alone, so features are
    independent of the group given the label.
    """
    if n < 2:
        raise DataError(f"need n >= 2 moon points, got {n}")
    rng = make_rng(seed, rng_algorithm)
    n1 = n // 2
    n0 = n - n1
    y = np.r_[np.zeros(n0, dtype=np.int64), np.ones(n1, dtype=np.int64)]
    t = rng.uniform(0.0, np.pi, size=n)
    x = np.where(
        (y == 0)[:, None],
        np.c_[np.cos(t), np.sin(t)],
        np.c_[1.0 - np.cos(t), 0.5 - np.sin(t)],
    )
    if noise_sd > 0:
        x = x + rng.normal(0.0, noise_sd, size=x.shape)
    p_z1 = np.where(y == 1, MOON_Z1_GIVEN_Y1, MOON_Z1_GIVEN_Y0)
    z = (rng.uniform(size=n) < p_z1).astype(np.int64)
    order = rng.permutation(n)
    return Dataset(x[order], y[order], z[order], feature_names=("x0", "x1"), n_groups=2)


# -- CSV ingestion ---------------------------------------------------------


@dataclass
class ColumnSchema:
    """How to read a CSV into a :class:`Dataset`.

    ``label_positive`` is the raw label string mapped to 1. Each sensitive
    column may carry a value -> code map, where the key ``"*"`` catches every
    value not listed; with several sensitive columns the group id enumerates
    the Cartesian product of their codes.
    """

    label: str
    sensitive: list[str]
    numeric: list[str] = field(default_factory=list)
    categorical: dict[str, list[str]] = field(default_factory=dict)
    label_positive: str = "1"
    group_values: dict[str, dict[str, int]] = field(default_factory=dict)

    def __post_init__(self):
        if isinstance(self.sensitive, str):
            self.sensitive = [self.sensitive]
        if not self.sensitive:
            raise IngestionError("schema needs at least one sensitive column")
        roles = [self.label, *self.sensitive, *self.numeric, *self.categorical]
        dup = {c for c in roles if roles.count(c) > 1}
        if dup:
            raise IngestionError(f"columns assigned more than one role: {sorted(dup)}")


def _group_codes(schema: ColumnSchema, rows, header_index):
    per_col = []
    for col in schema.sensitive:
        mapping = schema.group_values.get(col)
        if mapping is None:
            values = sorted({r[header_index[col]] for r in rows})
            mapping = {v: k for k, v in enumerate(values)}
        per_col.append((col, mapping))
    sizes = [max(m.values()) + 1 for _, m in per_col]
    names = tuple("/".join(str(c) for c in combo) for combo in product(*(range(s) for s in sizes)))
    return per_col, sizes, names


def load_csv(path, schema: ColumnSchema) -> Dataset:
    """Read a header-first UTF-8 CSV; sensitive columns never become features."""
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestionError(f"{path}: empty file") from None
        rows = [r for r in reader if r]
    dup = sorted({h for h in header if header.count(h) > 1})
    if dup:
        raise IngestionError(f"{path}: duplicate header column(s) {dup}")
    index = {h: k for k, h in enumerate(header)}
    needed = [schema.label, *schema.sensitive, *schema.numeric, *schema.categorical]
    missing = [c for c in needed if c not in index]
    if missing:
        raise IngestionError(f"{path}: missing column(s) {missing}")
    for line, r in enumerate(rows, start=2):
        if len(r) != len(header):
            raise IngestionError(f"{path}: line {line} has {len(r)} cells, header has {len(header)}")

    columns, names = [], []
    for col in schema.numeric:
        vals = np.empty(len(rows))
        for line, r in enumerate(rows, start=2):
            try:
                vals[line - 2] = float(r[index[col]])
            except ValueError:
                raise IngestionError(f"{path}: line {line}, column {col!r}: cannot parse {r[index[col]]!r}") from None
        columns.append(vals[:, None])
        names.append(col)
    for col, levels in schema.categorical.items():
        levels = list(levels) if levels else sorted({r[index[col]] for r in rows})
        pos = {v: k for k, v in enumerate(levels)}
        onehot = np.zeros((len(rows), len(levels)))
        for line, r in enumerate(rows, start=2):
            v = r[index[col]]
            if v not in pos:
                raise IngestionError(f"{path}: line {line}, column {col!r}: unknown category {v!r}")
            onehot[line - 2, pos[v]] = 1.0
        columns.append(onehot)
        names += [f"{col}={v}" for v in levels]

    y = np.array([1 if r[index[schema.label]] == schema.label_positive else 0 for r in rows], dtype=np.int64)
    per_col, sizes, group_names = _group_codes(schema, rows, index)
    z = np.zeros(len(rows), dtype=np.int64)
    for (col, mapping), size in zip(per_col, sizes):
        codes = np.empty(len(rows), dtype=np.int64)
        for line, r in enumerate(rows, start=2):
            v = r[index[col]]
            if v not in mapping:
                if "*" not in mapping:
                    raise IngestionError(f"{path}: line {line}, column {col!r}: unknown group value {v!r}")
                v = "*"
            codes[line - 2] = mapping[v]
        z = z * size + codes
    x = np.hstack(columns) if columns else np.zeros((len(rows), 0))
    ds = Dataset(x, y, z, feature_names=tuple(names), group_names=group_names, n_groups=int(np.prod(sizes)))
    log.info("loaded %s: %d rows, %d features, group counts %s", path, len(ds), ds.n_features, ds.group_counts())
    return ds


def write_csv(ds: Dataset, path) -> None:
    """Export as feature columns, then ``label`` and ``group``; floats via repr (exact round trip)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([*ds.feature_names, "label", "group"])
        for xr, yv, zv in zip(ds.features, ds.labels, ds.groups):
            w.writerow([*(repr(float(v)) for v in xr), int(yv), int(zv)])


def read_exported_csv(path) -> Dataset:
    """Inverse of :func:`write_csv`."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [r for r in reader if r]
    if header[-2:] != ["label", "group"]:
        raise IngestionError(f"{path}: expected trailing 'label,group' columns")
    n_feat = len(header) - 2
    x = np.array([[float(v) for v in r[:n_feat]] for r in rows]).reshape(len(rows), n_feat)
    y = np.array([int(r[-2]) for r in rows], dtype=np.int64)
    z = np.array([int(r[-1]) for r in rows], dtype=np.int64)
    return Dataset(x, y, z, feature_names=tuple(header[:n_feat]))


# -- preprocessing ---------------------------------------------------------


def balance_undersample(ds: Dataset, seed=0, rng_algorithm: str = "pcg64") -> Dataset:
    """Randomly drop majority-label rows until both labels are equally frequent."""
    pos = np.flatnonzero(ds.labels == 1)
    neg = np.flatnonzero(ds.labels == 0)
    if pos.size == 0 or neg.size == 0:
        raise DataError("cannot balance a dataset with a single label class")
    major, minor = (pos, neg) if pos.size > neg.size else (neg, pos)
    rng = make_rng(seed, rng_algorithm)
    keep = rng.choice(major, size=minor.size, replace=False)
    return ds.take(np.sort(np.concatenate([minor, keep])))


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    sd: np.ndarray

    def apply(self, ds: Dataset) -> Dataset:
        safe = np.where(self.sd > 0, self.sd, 1.0)
        x = np.where(self.sd > 0, (ds.features - self.mean) / safe, 0.0)
        return replace(ds, features=x)


def standardize(train: Dataset, test: Dataset):
    """Z-score both splits with train statistics (population sd)."""
    if len(train) == 0:
        raise DataError("cannot standardise with an empty training split")
    st = Standardizer(train.features.mean(axis=0), train.features.std(axis=0))
    return st.apply(train), st.apply(test), st


def split(ds: Dataset, train_fraction: float | None = 0.7, seed=0, n_train: int | None = None,
          n_test: int | None = None, rng_algorithm: str = "pcg64"):
    """Seeded shuffle then partition, by fraction or by fixed counts."""
    rng = make_rng(seed, rng_algorithm)
    order = rng.permutation(len(ds))
    if n_train is not None:
        n_test = len(ds) - n_train if n_test is None else n_test
        if n_train < 1 or n_test < 1 or n_train + n_test > len(ds):
            raise DataError(f"cannot take {n_train} + {n_test} rows from {len(ds)}")
    else:
        if train_fraction is None or not 0.0 < train_fraction < 1.0:
            raise DataError(f"train fraction must lie in (0, 1), got {train_fraction}")
        n_train = int(round(train_fraction * len(ds)))
        n_test = len(ds) - n_train
    return (
        ds.take(order[:n_train], "train"),
        ds.take(order[n_train:n_train + n_test], "test"),
    )
