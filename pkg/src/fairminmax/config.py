"""Run configuration: dataclasses plus an INI reader.

A run file has ``[data]``, ``[train]``, and optionally ``[sweep]`` and
``[output]`` sections of ``key = value`` lines; see ``configs/`` for
examples. Every bad key is reported, not just the first.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from fairminmax.divergence import DivergenceKind
from fairminmax.estimators import ESTIMATORS
from fairminmax.nn import RNG_ALGORITHMS


class ConfigError(ValueError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass(frozen=True)
class TrainConfig:
    lam: float = 0.0
    notion: str = "dp"
    divergence: DivergenceKind = DivergenceKind.PearsonChiSquared
    estimator: str = "nn"
    epochs: int = 200
    critic_steps: int = 100
    batch_size: int = 2048
    classifier_lr: float = 2e-3
    critic_lr: float | None = None
    seed: int = 0
    threshold: float = 0.5
    eo_include_y0: bool = False
    hidden: tuple[int, ...] = (200, 200)
    critic_hidden: tuple[int, ...] = (5, 5)
    dre_bins: int = 10
    rng: str = "pcg64"
    record_critic_trace: bool = False

    def __post_init__(self):
        object.__setattr__(self, "divergence", DivergenceKind.parse(self.divergence))
        object.__setattr__(self, "notion", str(self.notion).lower())
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        object.__setattr__(self, "critic_hidden", tuple(int(h) for h in self.critic_hidden))
        problems = validate_train(self)
        if problems:
            raise ConfigError(problems)

    @property
    def critic_learning_rate(self) -> float:
        return self.classifier_lr if self.critic_lr is None else self.critic_lr

    def with_(self, **changes) -> "TrainConfig":
        return replace(self, **changes)


def validate_train(cfg: TrainConfig, n_groups: int | None = None) -> list[str]:
    p = []
    if not cfg.lam >= 0:
        p.append(f"lambda must be >= 0 (got {cfg.lam})")
    if cfg.notion not in ("dp", "eo"):
        p.append(f"notion must be 'dp' or 'eo' (got {cfg.notion!r})")
    if cfg.estimator not in ESTIMATORS:
        p.append(f"estimator must be one of {ESTIMATORS} (got {cfg.estimator!r})")
    if cfg.epochs < 1:
        p.append("epochs must be >= 1")
    if cfg.critic_steps < 1:
        p.append("critic_steps must be >= 1")
    if n_groups is not None and cfg.batch_size < 2 * n_groups:
        p.append(f"batch_size must be >= 2 * number of groups ({2 * n_groups})")
    elif cfg.batch_size < 2:
        p.append("batch_size must be >= 2")
    if not cfg.classifier_lr > 0:
        p.append("classifier_lr must be > 0")
    if cfg.critic_lr is not None and not cfg.critic_lr > 0:
        p.append("critic_lr must be > 0")
    if not 0 < cfg.threshold < 1:
        p.append("threshold must lie in (0, 1)")
    if cfg.dre_bins < 2:
        p.append("dre_bins must be >= 2")
    if cfg.rng not in RNG_ALGORITHMS:
        p.append(f"rng must be one of {sorted(RNG_ALGORITHMS)}")
    return p


@dataclass(frozen=True)
class DataConfig:
    source: str = "moon"
    path: str | None = None
    n: int = 15000
    noise: float = 0.2
    seed: int = 0
    n_train: int | None = 10000
    n_test: int | None = 5000
    train_fraction: float | None = None
    split_seed: int = 0
    balance: bool = False
    label: str | None = None
    label_positive: str = "1"
    sensitive: tuple[str, ...] = ()
    numeric: tuple[str, ...] = ()
    categorical: tuple[str, ...] = ()
    name: str | None = None
    # per sensitive column: ((raw value, group code), ...); "*" catches the rest
    group_map: tuple[tuple[str, tuple[tuple[str, int], ...]], ...] = ()

    @property
    def dataset_id(self) -> str:
        if self.name:
            return self.name
        return "moon" if self.source == "moon" else Path(self.path or "data").stem


@dataclass(frozen=True)
class RunConfig:
    data: DataConfig
    train: TrainConfig
    lambdas: tuple[float, ...] = (0.0,)
    seeds: tuple[int, ...] = (0,)
    zeta: float | None = None
    out_dir: str = "runs"
    base_dir: Path = field(default=Path("."), compare=False)

    def resolve(self, p: str) -> Path:
        path = Path(p)
        return path if path.is_absolute() else self.base_dir / path


_TRAIN_KEYS = {
    "lambda": ("lam", float),
    "notion": ("notion", str),
    "divergence": ("divergence", str),
    "estimator": ("estimator", str),
    "epochs": ("epochs", int),
    "critic_steps": ("critic_steps", int),
    "batch_size": ("batch_size", int),
    "classifier_lr": ("classifier_lr", float),
    "critic_lr": ("critic_lr", float),
    "seed": ("seed", int),
    "threshold": ("threshold", float),
    "eo_include_y0": ("eo_include_y0", "bool"),
    "hidden": ("hidden", "ints"),
    "critic_hidden": ("critic_hidden", "ints"),
    "dre_bins": ("dre_bins", int),
    "rng": ("rng", str),
    "record_critic_trace": ("record_critic_trace", "bool"),
}

_DATA_KEYS = {
    "source": str, "path": str, "n": int, "noise": float, "seed": int,
    "n_train": int, "n_test": int, "train_fraction": float, "split_seed": int,
    "balance": "bool", "label": str, "label_positive": str, "sensitive": "strs",
    "numeric": "strs", "categorical": "strs", "name": str,
}


def _convert(section, key, raw, kind, problems):
    raw = raw.strip()
    try:
        if kind == "bool":
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind == "ints":
            return tuple(int(v) for v in raw.split(",") if v.strip())
        if kind == "strs":
            return tuple(v.strip() for v in raw.split(",") if v.strip())
        if raw.lower() in ("", "none") and kind in (int, float):
            return None
        return kind(raw)
    except ValueError:
        problems.append(f"[{section}] {key}: cannot parse {raw!r}")
        return None


def _parse_group_map(key, raw, problems) -> tuple[tuple[str, int], ...]:
    """``value=code, value=code, *=code`` (case-sensitive values)."""
    out = []
    for item in raw.split(","):
        if not item.strip():
            continue
        value, sep, code = item.rpartition("=")
        try:
            if not sep or not value.strip():
                raise ValueError
            out.append((value.strip(), int(code)))
        except ValueError:
            problems.append(f"[data] {key}: cannot parse {item.strip()!r} (expected value=code)")
    return tuple(out)


def parse_floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


def parse_ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(",") if v.strip())


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError([f"config file {path} does not exist"])
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError([f"{path}: {exc}"]) from None
    return config_from_parser(cp, base_dir=path.parent)


def config_from_text(text: str, base_dir=".") -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None)
    cp.read_string(text)
    return config_from_parser(cp, base_dir=Path(base_dir))


def config_from_parser(cp: configparser.ConfigParser, base_dir=Path(".")) -> RunConfig:
    problems: list[str] = []
    known = {"data", "train", "sweep", "output"}
    for sec in cp.sections():
        if sec not in known:
            problems.append(f"unknown section [{sec}]")

    data_kw = {}
    if cp.has_section("data"):
        group_map = []
        for key, raw in cp.items("data"):
            if key.startswith("group_map."):
                group_map.append((key[len("group_map."):], _parse_group_map(key, raw, problems)))
                continue
            if key not in _DATA_KEYS:
                problems.append(f"[data] {key}: unknown key")
                continue
            val = _convert("data", key, raw, _DATA_KEYS[key], problems)
            data_kw[key] = val
        data_kw["group_map"] = tuple(group_map)
    data = DataConfig(**{k: v for k, v in data_kw.items()})
    unknown = [c for c, _ in data.group_map if c not in data.sensitive]
    if unknown:
        problems.append(f"[data] group_map for non-sensitive column(s) {unknown}")
    if data.source not in ("moon", "csv", "exported"):
        problems.append(f"[data] source: must be moon, csv or exported (got {data.source!r})")
    if data.source in ("csv", "exported") and not data.path:
        problems.append("[data] path: required for csv/exported sources")
    if data.source == "csv":
        if not data.label:
            problems.append("[data] label: required for csv source")
        if not data.sensitive:
            problems.append("[data] sensitive: required for csv source")

    train_kw = {}
    if cp.has_section("train"):
        for key, raw in cp.items("train"):
            if key not in _TRAIN_KEYS:
                problems.append(f"[train] {key}: unknown key")
                continue
            attr, kind = _TRAIN_KEYS[key]
            val = _convert("train", key, raw, kind, problems)
            if val is not None or attr == "critic_lr":
                train_kw[attr] = val
    if "divergence" in train_kw:
        try:
            DivergenceKind.parse(train_kw["divergence"])
        except ValueError as exc:
            problems.append(f"[train] divergence: {exc}")
            train_kw.pop("divergence")
    defaults = {f.name: f.default for f in fields(TrainConfig)}
    probe = replace_defaults(defaults, train_kw)
    problems += [f"[train] {p}" for p in validate_train(probe)]

    lambdas, seeds, zeta = (train_kw.get("lam", 0.0),), (train_kw.get("seed", 0),), None
    if cp.has_section("sweep"):
        for key, raw in cp.items("sweep"):
            try:
                if key == "lambdas":
                    lambdas = parse_floats(raw)
                elif key == "seeds":
                    seeds = parse_ints(raw)
                elif key == "zeta":
                    zeta = float(raw) if raw.strip() else None
                else:
                    problems.append(f"[sweep] {key}: unknown key")
            except ValueError:
                problems.append(f"[sweep] {key}: cannot parse {raw!r}")
        if not lambdas:
            problems.append("[sweep] lambdas: empty grid")
        if not seeds:
            problems.append("[sweep] seeds: empty seed list")
    out_dir = "runs"
    if cp.has_section("output"):
        for key, raw in cp.items("output"):
            if key == "dir":
                out_dir = raw.strip()
            else:
                problems.append(f"[output] {key}: unknown key")
    if problems:
        raise ConfigError(problems)
    return RunConfig(data, TrainConfig(**train_kw), tuple(lambdas), tuple(seeds), zeta, out_dir, Path(base_dir))


class _Probe:
    pass


def replace_defaults(defaults: dict, overrides: dict):
    """Attribute bag with TrainConfig defaults, for validating without raising."""
    probe = _Probe()
    for k, v in {**defaults, **overrides}.items():
        setattr(probe, k, v)
    probe.notion = str(probe.notion).lower()
    return probe
