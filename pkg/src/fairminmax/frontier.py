"""Fairness-accuracy frontiers (FA-ROC), their areas, and mixture classifiers.

The frontier is the upper concave envelope of observed (bias, accuracy)
pairs, truncated where accuracy stops increasing: any point on it can be
realised by randomising between at most two trained classifiers.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np


class FrontierError(ValueError):
    pass


class RangeError(ValueError):
    pass


@dataclass(frozen=True)
class FAPoint:
    epsilon: float
    acc: float
    provenance: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.epsilon >= 0:
            raise FrontierError(f"bias must be >= 0, got {self.epsilon}")
        if not 0.0 <= self.acc <= 1.0:
            raise FrontierError(f"accuracy must lie in [0, 1], got {self.acc}")


@dataclass(frozen=True)
class Frontier:
    vertices: tuple[FAPoint, ...]
    zeta: float = 0.0

    @property
    def eps(self) -> np.ndarray:
        return np.array([v.epsilon for v in self.vertices])

    @property
    def accs(self) -> np.ndarray:
        return np.array([v.acc for v in self.vertices])

    def value(self, epsilon, left: str = "zero"):
        """Envelope accuracy at ``epsilon``.

        Above the last vertex the envelope stays flat. Below the first one
        nothing is certified: ``left="zero"`` reports 0, ``left="constant"``
        repeats the first vertex's accuracy.
        """
        out = np.interp(epsilon, self.eps, self.accs)
        if left == "zero":
            out = np.where(np.asarray(epsilon) < self.eps[0], 0.0, out)
        elif left != "constant":
            raise ValueError(f"left must be 'zero' or 'constant', got {left!r}")
        return out


COLLINEAR_TOL = 1e-12


def _cross(o, a, b) -> float:
    return (a.epsilon - o.epsilon) * (b.acc - o.acc) - (a.acc - o.acc) * (b.epsilon - o.epsilon)


def build_frontier(points, zeta: float = 0.0) -> Frontier:
    points = list(points)
    if not points:
        raise FrontierError("cannot build a frontier from no points")
    # by bias, ties resolved toward higher accuracy first
    pts = sorted(points, key=lambda p: (p.epsilon, -p.acc))
    best = max(p.acc for p in pts)
    # nothing to the right of the first most-accurate point is on the envelope
    stop = next(k for k, p in enumerate(pts) if p.acc == best)
    hull: list[FAPoint] = []
    for p in pts[: stop + 1]:
        if hull and p.epsilon == hull[-1].epsilon:
            continue
        # collinear up to rounding counts as not a vertex
        while len(hull) >= 2 and _cross(hull[-2], hull[-1], p) >= -COLLINEAR_TOL:
            hull.pop()
        hull.append(p)
    # a vertex that does not improve on its left neighbour is dominated
    vertices = [hull[0]]
    for p in hull[1:]:
        if p.acc > vertices[-1].acc:
            vertices.append(p)
    return Frontier(tuple(vertices), float(zeta))


LEFT_EXTENSIONS = ("zero", "constant")


def fa_auc(frontier: Frontier, eps_lo: float, eps_hi: float, left: str = "zero") -> float:
    """Mean envelope accuracy over [eps_lo, eps_hi] (area divided by width).

    ``left`` picks the extension below the smallest vertex bias, see
    :meth:`Frontier.value`. Only ``"zero"`` makes the result monotone in
    the point set.
    """
    if not eps_hi > eps_lo:
        raise RangeError(f"need eps_lo < eps_hi, got [{eps_lo}, {eps_hi}]")
    if left not in LEFT_EXTENSIONS:
        raise ValueError(f"left must be one of {LEFT_EXTENSIONS}, got {left!r}")
    eps = frontier.eps
    start = eps_lo
    area = 0.0
    if left == "zero":
        start = max(eps_lo, float(eps[0]))
        if start >= eps_hi:
            return 0.0
    inner = eps[(eps > start) & (eps < eps_hi)]
    knots = np.concatenate([[start], inner, [eps_hi]])
    vals = frontier.value(knots, left="constant")
    area += np.sum(np.diff(knots) * (vals[1:] + vals[:-1]) * 0.5)
    return float(area / (eps_hi - eps_lo))


def low_bias_auc(frontier: Frontier, zeta: float | None = None, left: str = "zero") -> float:
    """FA-AUC restricted to biases in [0, zeta]."""
    zeta = frontier.zeta if zeta is None else zeta
    if not zeta > 0:
        raise RangeError(f"low-bias threshold must be positive, got {zeta}")
    return fa_auc(frontier, 0.0, zeta, left)


def default_auc_range(frontier: Frontier) -> tuple[float, float]:
    """The frontier's own bias span, first to last vertex (may be a single point)."""
    return float(frontier.eps[0]), float(frontier.eps[-1])


# -- mixture classifiers --------------------------------------------------


@dataclass(frozen=True)
class MixtureClassifier:
    components: tuple
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 1 or w.size != len(self.components):
            raise ValueError("one weight per component required")
        if np.any(w < 0) or np.any(w > 1) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError(f"weights {w} are not a point of the probability simplex")
        object.__setattr__(self, "weights", w)

    def predict(self, x, rng: np.random.Generator):
        """Pick one component per call with probability beta_i and use it."""
        k = rng.choice(len(self.components), p=self.weights)
        return self.components[k](x)


def pairwise_gap(rates) -> float:
    rates = np.asarray(rates, dtype=np.float64)
    return float(sum(abs(a - b) for a, b in combinations(rates, 2)))


def mixture_expected_metrics(mix: MixtureClassifier, component_metrics):
    """Exact expected accuracy and bias of a randomised mixture.

    ``component_metrics`` holds ``(accuracy, group_rates)`` per component.
    Returns ``(expected_acc, mixture_bias, weighted_component_bias)``; the
    second never exceeds the third by convexity of the pairwise gap.
    """
    if len(component_metrics) != len(mix.weights):
        raise ValueError("one metrics entry per component required")
    accs = np.array([m[0] for m in component_metrics], dtype=np.float64)
    rates = np.array([m[1] for m in component_metrics], dtype=np.float64)
    beta = mix.weights
    expected_acc = float(beta @ accs)
    mixed_rates = beta @ rates
    bound = float(beta @ np.array([pairwise_gap(r) for r in rates]))
    return expected_acc, pairwise_gap(mixed_rates), bound


# -- export ---------------------------------------------------------------


def write_frontier_csv(frontier: Frontier, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epsilon", "acc", "lambda", "seed"])
        for v in frontier.vertices:
            w.writerow([repr(v.epsilon), repr(v.acc), v.provenance.get("lambda", ""), v.provenance.get("seed", "")])


def summary_record(frontier: Frontier, eps_range=None, left: str = "zero", **extra) -> dict:
    """fa_auc, low_bias_auc and zeta as one JSON-able dict.

    Without ``eps_range`` the frontier's bias span is used; for a single
    vertex that span is a point and fa_auc is the vertex accuracy.
    """
    lo, hi = eps_range if eps_range is not None else default_auc_range(frontier)
    value = fa_auc(frontier, lo, hi, left) if hi > lo else float(frontier.value(lo, left))
    rec = {"fa_auc": value, "eps_lo": lo, "eps_hi": hi, "zeta": frontier.zeta, "left_extension": left}
    rec["low_bias_auc"] = low_bias_auc(frontier, left=left) if frontier.zeta > 0 else None
    rec.update(extra)
    return rec


def append_jsonl(record: dict, path) -> None:
    with open(path, "a") as fh:
        fh.write(json.dumps(record, sort_keys=True) + "\n")
