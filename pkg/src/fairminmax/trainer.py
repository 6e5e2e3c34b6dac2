"""Alternating min-max training of a classifier against divergence critics.

Each mini-batch does two things. First, with the classifier frozen, every
critic takes ``critic_steps`` Adam ascent steps on its variational
objective. Second, with the critics frozen, the classifier takes one Adam
step on mean BCE plus ``lam`` times the sum of pairwise divergence
estimates, differentiating through its soft outputs.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from fairminmax.config import TrainConfig, validate_train, ConfigError
from fairminmax.data import Dataset
from fairminmax.estimators import (
    conventional_estimate,
    dre_estimate_with_grad,
    make_critic,
    train_critic,
    variational_regularizer_gradient,
)
from fairminmax.metrics import PredictionSet, summarize
from fairminmax.nn import AdamState, DenseNet, adam_step, make_rng

log = logging.getLogger(__name__)


class NumericError(RuntimeError):
    pass


@dataclass(frozen=True)
class Pair:
    """Groups i < j compared within label slice ``y`` (None for DP)."""

    i: int
    j: int
    y: int | None = None

    @property
    def key(self) -> str:
        return f"d{self.i}{self.j}" if self.y is None else f"d{self.i}{self.j}_y{self.y}"


def condition_slices(notion: str, eo_include_y0: bool = False) -> list[int | None]:
    if notion == "dp":
        return [None]
    return [1, 0] if eo_include_y0 else [1]


def group_pairs(n_groups: int, notion: str, eo_include_y0: bool = False) -> list[Pair]:
    return [Pair(i, j, y) for y in condition_slices(notion, eo_include_y0)
            for i, j in combinations(range(n_groups), 2)]


def partition_groups(batch_idx, labels, groups, n_groups: int, notion: str,
                     eo_include_y0: bool = False) -> dict[tuple[int | None, int], np.ndarray]:
    """Positions (into ``batch_idx``) of each (label slice, group) condition."""
    batch_idx = np.asarray(batch_idx)
    if batch_idx.size == 0:
        raise ValueError("empty batch")
    z = np.asarray(groups)[batch_idx]
    y = np.asarray(labels)[batch_idx]
    out = {}
    for s in condition_slices(notion, eo_include_y0):
        for g in range(n_groups):
            mask = z == g if s is None else (z == g) & (y == s)
            out[(s, g)] = np.flatnonzero(mask)
    return out


def bce_with_logits(logits, y) -> float:
    return float(np.mean(np.logaddexp(0.0, logits) - y * logits))


def regularized_loss(soft_outputs, labels, estimates, lam: float) -> float:
    """Mean BCE of ``soft_outputs`` plus ``lam`` times the summed estimates."""
    s = np.clip(np.asarray(soft_outputs, dtype=np.float64), 1e-12, 1 - 1e-12)
    y = np.asarray(labels, dtype=np.float64)
    est = np.asarray(list(estimates), dtype=np.float64)
    if not np.all(np.isfinite(est)):
        raise NumericError(f"non-finite divergence estimate in {est}")
    bce = -np.mean(y * np.log(s) + (1 - y) * np.log1p(-s))
    loss = float(bce + lam * est.sum())
    if not np.isfinite(loss):
        raise NumericError(f"non-finite loss (bce={bce}, estimates={est})")
    return loss


@dataclass
class TrainResult:
    classifier: DenseNet
    critics: dict[Pair, DenseNet]
    history: list[dict]
    config: TrainConfig
    skipped_pairs: int = 0
    critic_traces: list[list[float]] = field(default_factory=list)
    seconds: float = 0.0


class FairTrainer:
    """Holds the classifier, critics and optimiser state for one run."""

    def __init__(self, config: TrainConfig, n_features: int, n_groups: int):
        problems = validate_train(config, n_groups)
        if problems:
            raise ConfigError(problems)
        self.config = config
        self.n_groups = n_groups
        root = np.random.SeedSequence(config.seed)
        init_seq, batch_seq, critic_seq = root.spawn(3)
        self.batch_rng = make_rng(batch_seq, config.rng)
        self.classifier = DenseNet.init([n_features, *config.hidden, 1], make_rng(init_seq, config.rng),
                                        hidden_activation="selu", output_activation="sigmoid")
        self.clf_state = AdamState.for_params(self.classifier.params, config.classifier_lr)
        self.pairs = group_pairs(n_groups, config.notion, config.eo_include_y0)
        critic_rng = make_rng(critic_seq, config.rng)
        self.critics: dict[Pair, DenseNet] = {}
        self.critic_states: dict[Pair, AdamState] = {}
        if config.estimator == "nn":
            for pair in self.pairs:
                critic = make_critic(config.divergence, critic_rng, config.critic_hidden)
                self.critics[pair] = critic
                self.critic_states[pair] = AdamState.for_params(critic.params, config.critic_learning_rate)
        self.skipped = 0
        self.critic_traces: list[list[float]] = []

    # -- pieces of one mini-batch step ----------------------------------

    def update_critics(self, soft, cells) -> None:
        """Divergence estimation for a fixed classifier (no-op unless ``nn``)."""
        if self.config.estimator != "nn":
            return
        cfg = self.config
        for pair in self.pairs:
            a, b = cells[(pair.y, pair.i)], cells[(pair.y, pair.j)]
            if a.size == 0 or b.size == 0:
                continue
            trace = [] if cfg.record_critic_trace else None
            train_critic(cfg.divergence, self.critics[pair], soft[a], soft[b], cfg.critic_steps,
                         self.critic_states[pair], trace)
            if trace is not None:
                self.critic_traces.append(trace)

    def regularizer(self, soft, cells):
        """Sum of pair estimates and its gradient w.r.t. each soft output."""
        cfg = self.config
        grad = np.zeros_like(soft)
        estimates = {}
        for pair in self.pairs:
            a, b = cells[(pair.y, pair.i)], cells[(pair.y, pair.j)]
            if a.size == 0 or b.size == 0:
                self.skipped += 1
                continue
            if cfg.estimator == "nn":
                value, ga, gb = variational_regularizer_gradient(cfg.divergence, self.critics[pair], soft[a], soft[b])
            elif cfg.estimator == "con":
                value, ga, gb = conventional_estimate(cfg.divergence, soft[a], soft[b], with_grad=True)
            else:
                value, ga, gb = dre_estimate_with_grad(cfg.divergence, soft[a], soft[b], cfg.dre_bins)
            np.add.at(grad, a, ga)
            np.add.at(grad, b, gb)
            estimates[pair] = value
        return estimates, grad

    def loss_and_grads(self, x, y, z, soft=None):
        """Regularised loss and classifier parameter gradients, critics frozen.

        Pass ``soft`` only if it comes from the classifier's latest forward
        pass on ``x``; the cached activations are reused for backward.
        """
        cfg = self.config
        if soft is None:
            soft = self.classifier.forward(x)[:, 0]
        logits = self.classifier.logits()[:, 0]
        cells = partition_groups(np.arange(y.size), y, z, self.n_groups, cfg.notion, cfg.eo_include_y0)
        estimates, reg_grad = self.regularizer(soft, cells)
        bce = bce_with_logits(logits, y)
        loss = bce + cfg.lam * sum(estimates.values())
        grad_logits = (soft - y) / y.size + cfg.lam * reg_grad * soft * (1.0 - soft)
        grads, _ = self.classifier.backward(grad_logits[:, None], at_logits=True)
        return loss, bce, estimates, grads

    def step(self, x, y, z):
        cfg = self.config
        soft = self.classifier.forward(x)[:, 0]
        cells = partition_groups(np.arange(y.size), y, z, self.n_groups, cfg.notion, cfg.eo_include_y0)
        self.update_critics(soft, cells)
        loss, bce, estimates, grads = self.loss_and_grads(x, y, z, soft)
        if not np.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads):
            raise NumericError(f"non-finite loss or gradient (loss={loss}, bce={bce}, estimates={estimates})")
        adam_step(self.clf_state, self.classifier.params, grads)
        return loss, bce, estimates

    def predict(self, x) -> np.ndarray:
        return self.classifier.forward(x, cache=False)[:, 0]

    def evaluate(self, ds: Dataset) -> dict:
        preds = PredictionSet(self.predict(ds.features), ds.labels, ds.groups, self.config.threshold, ds.n_groups)
        return summarize(preds)

    # -- driver -----------------------------------------------------------

    def fit(self, train: Dataset, test: Dataset | None = None, epoch_callback=None) -> TrainResult:
        cfg = self.config
        t0 = time.perf_counter()
        history = []
        n = len(train)
        for epoch in range(1, cfg.epochs + 1):
            order = self.batch_rng.permutation(n)
            sums = {"loss": 0.0, "bce": 0.0}
            est_sums: dict[str, list[float]] = {}
            n_batches = 0
            for b, start in enumerate(range(0, n, cfg.batch_size)):
                idx = order[start:start + cfg.batch_size]
                try:
                    loss, bce, estimates = self.step(train.features[idx], train.labels[idx], train.groups[idx])
                except NumericError as exc:
                    raise NumericError(f"epoch {epoch}, batch {b}: {exc}") from None
                sums["loss"] += loss
                sums["bce"] += bce
                for pair, v in estimates.items():
                    est_sums.setdefault(pair.key, []).append(v)
                n_batches += 1
            if not self.classifier.is_finite():
                raise NumericError(f"epoch {epoch}: classifier parameters became non-finite")
            rec = {"epoch": epoch, "loss": sums["loss"] / n_batches, "bce": sums["bce"] / n_batches}
            for key in (p.key for p in self.pairs):
                vals = est_sums.get(key)
                rec[key] = float(np.mean(vals)) if vals else float("nan")
            tr = self.evaluate(train)
            rec["train_accuracy"] = tr["accuracy"]
            if test is not None:
                te = self.evaluate(test)
                rec.update(test_accuracy=te["accuracy"], delta_dp=te["delta_dp"], delta_eo=te["delta_eo"])
            else:
                rec.update(test_accuracy=float("nan"), delta_dp=tr["delta_dp"], delta_eo=tr["delta_eo"])
            rec["skipped_pairs"] = self.skipped
            history.append(rec)
            if epoch_callback is not None:
                epoch_callback(rec)
            log.debug("epoch %d: %s", epoch, rec)
        return TrainResult(self.classifier, dict(self.critics), history, cfg, self.skipped,
                           self.critic_traces, time.perf_counter() - t0)


def train_fair(config: TrainConfig, train: Dataset, test: Dataset | None = None, epoch_callback=None) -> TrainResult:
    """Run the full alternating loop; deterministic given ``config.seed``."""
    n_groups = max(train.n_groups, test.n_groups if test is not None else 0)
    trainer = FairTrainer(config, train.n_features, n_groups)
    return trainer.fit(train, test, epoch_callback)
