"""Estimators of D_f(pi_i || pi_j) from group-conditional classifier outputs.

Three routes are provided:

* ``nn``  - variational lower bound maximised over a small critic network,
* ``con`` - plug-in on the mean soft output of each group,
* ``dre`` - histogram density ratio evaluated on the second group's samples.

Each estimate can also return its gradient with respect to every soft output
so the classifier can be trained through it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from fairminmax.divergence import (
    DivergenceKind,
    bernoulli_divergence,
    bernoulli_divergence_grad,
    f_derivative,
    f_value,
)
from fairminmax.nn import AdamState, DenseNet, adam_step

ESTIMATORS = ("nn", "con", "dre")
CRITIC_HIDDEN = (5, 5)


class EstimationError(ValueError):
    pass


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class GroupSamples:
    soft_outputs: np.ndarray
    group_id: int = 0

    def __post_init__(self):
        arr = np.asarray(self.soft_outputs, dtype=np.float64).reshape(-1)
        if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
            raise EstimationError(f"group {self.group_id}: soft outputs must lie in [0, 1]")
        object.__setattr__(self, "soft_outputs", arr)

    def __len__(self):
        return self.soft_outputs.size


def _values(samples) -> np.ndarray:
    if isinstance(samples, GroupSamples):
        arr = samples.soft_outputs
    else:
        arr = np.asarray(samples, dtype=np.float64).reshape(-1)
    if arr.size == 0:
        gid = getattr(samples, "group_id", "?")
        raise EstimationError(f"group {gid} has no samples")
    return arr


def critic_output_activation(kind: DivergenceKind) -> str:
    # squared Hellinger's conjugate only exists for t < 1
    return "one_minus_exp_neg" if kind is DivergenceKind.SquaredHellinger else "identity"


def make_critic(kind: DivergenceKind, rng: np.random.Generator, hidden=CRITIC_HIDDEN) -> DenseNet:
    """Critic T_theta: scalar soft output -> scalar, sigmoid hidden layers."""
    return DenseNet.init([1, *hidden, 1], rng, hidden_activation="sigmoid",
                         output_activation=critic_output_activation(kind))


def _check_critic(kind, critic: DenseNet):
    if critic.layer_dims[0] != 1 or critic.layer_dims[-1] != 1:
        raise ConfigurationError("critic must map a scalar to a scalar")
    if kind is DivergenceKind.SquaredHellinger and critic.output_activation != "one_minus_exp_neg":
        raise ConfigurationError("squared-Hellinger critic needs the 1 - exp(-v) output so that T < 1")


def _weighted(x):
    """Distinct values and their empirical weights (weights sum to 1)."""
    vals, counts = np.unique(x, return_counts=True)
    if vals.size * 2 > x.size:
        return x, np.full(x.size, 1.0 / x.size)
    return vals, counts / x.size


def variational_objective(kind, critic: DenseNet, x_i, x_j) -> float:
    """(1/M_i) sum T(x_i) - (1/M_j) sum f*(T(x_j)) for the given critic."""
    x_i, x_j = _values(x_i), _values(x_j)
    t = critic.forward(np.concatenate([x_i, x_j]), cache=False)[:, 0]
    return float(t[: x_i.size].mean() - kind.conjugate(t[x_i.size:]).mean())


def _objective_and_param_grads(kind, critic, u_i, w_i, u_j, w_j):
    m_i = u_i.size
    t = critic.forward(np.concatenate([u_i, u_j]))[:, 0]
    t_i, t_j = t[:m_i], t[m_i:]
    value = w_i @ t_i - w_j @ kind.conjugate(t_j)
    upstream = np.empty_like(t)
    upstream[:m_i] = w_i
    upstream[m_i:] = -kind.conjugate_grad(t_j) * w_j
    grads, _ = critic.backward(upstream)
    return float(value), grads


def train_critic(kind, critic: DenseNet, x_i, x_j, steps: int, state: AdamState,
                 trace: list | None = None) -> float:
    """Adam ascent on the variational objective; returns the final value.

    ``trace``, if given, receives the objective before each step and the
    final value, so it holds ``steps + 1`` numbers.
    """
    x_i, x_j = _values(x_i), _values(x_j)
    _check_critic(kind, critic)
    # repeated inputs (e.g. hard 0/1 samples) collapse to weighted atoms
    u_i, w_i = _weighted(x_i)
    u_j, w_j = _weighted(x_j)
    for _ in range(steps):
        value, grads = _objective_and_param_grads(kind, critic, u_i, w_i, u_j, w_j)
        if trace is not None:
            trace.append(value)
        adam_step(state, critic.params, grads, maximize=True)
    value = variational_objective(kind, critic, x_i, x_j)
    if trace is not None:
        trace.append(value)
    return value


def variational_estimate(kind, samples_i, samples_j, critic: DenseNet, steps: int = 100,
                         lr: float = 1e-3, state: AdamState | None = None):
    """Train ``critic`` for ``steps`` Adam ascent steps; returns ``(estimate, critic)``.

    Group sizes may differ; each sum is averaged over its own group.
    """
    kind = DivergenceKind.parse(kind)
    if state is None:
        state = AdamState.for_params(critic.params, lr)
    value = train_critic(kind, critic, samples_i, samples_j, steps, state)
    return value, critic


def variational_regularizer_gradient(kind, critic: DenseNet, samples_i, samples_j):
    """Gradient of the variational objective w.r.t. each soft output.

    Returns ``(value, grad_i, grad_j)`` with the critic held fixed.
    """
    kind = DivergenceKind.parse(kind)
    x_i, x_j = _values(samples_i), _values(samples_j)
    m_i = x_i.size
    t = critic.forward(np.concatenate([x_i, x_j]))[:, 0]
    dt_dx = critic.backward(np.ones((t.size, 1)))[1][:, 0]
    t_j = t[m_i:]
    value = float(t[:m_i].mean() - kind.conjugate(t_j).mean())
    grad_i = dt_dx[:m_i] / m_i
    grad_j = -kind.conjugate_grad(t_j) * dt_dx[m_i:] / x_j.size
    return value, grad_i, grad_j


def conventional_estimate(kind, samples_i, samples_j, with_grad: bool = False):
    """Plug-in divergence between Bernoulli laws with the groups' mean soft outputs."""
    kind = DivergenceKind.parse(kind)
    x_i, x_j = _values(samples_i), _values(samples_j)
    p, q = float(x_i.mean()), float(x_j.mean())
    value = bernoulli_divergence(kind, p, q)
    if not with_grad:
        return value
    dp, dq = bernoulli_divergence_grad(kind, p, q)
    return value, np.full(x_i.size, dp / x_i.size), np.full(x_j.size, dq / x_j.size)


@dataclass(frozen=True)
class HistogramRatio:
    bin_edges: np.ndarray
    ratio: np.ndarray

    @property
    def bin_count(self) -> int:
        return self.ratio.size

    @classmethod
    def fit(cls, x_i, x_j, bins: int = 10, smoothing: float = 1.0) -> "HistogramRatio":
        if bins < 2:
            raise EstimationError("need at least two bins")
        edges = np.linspace(0.0, 1.0, bins + 1)
        c_i = np.bincount(bin_index(x_i, bins), minlength=bins) + smoothing
        c_j = np.bincount(bin_index(x_j, bins), minlength=bins) + smoothing
        ratio = (c_i / c_i.sum()) / (c_j / c_j.sum())
        return cls(edges, ratio)

    def __call__(self, x) -> np.ndarray:
        return self.ratio[bin_index(x, self.bin_count)]


def bin_index(x, bins: int) -> np.ndarray:
    # right-closed last bin so that 1.0 lands in bin B-1
    idx = np.floor(np.asarray(x, dtype=np.float64) * bins).astype(np.int64)
    return np.clip(idx, 0, bins - 1)


def dre_estimate(kind, samples_i, samples_j, bins: int = 10, smoothing: float = 1.0) -> float:
    """(1/M_j) sum f(r(x_j)) with r a Laplace-smoothed histogram ratio."""
    kind = DivergenceKind.parse(kind)
    x_i, x_j = _values(samples_i), _values(samples_j)
    hist = HistogramRatio.fit(x_i, x_j, bins, smoothing)
    return float(f_value(kind, hist(x_j)).mean())


def _soft_bins(x, bins):
    """Linear-interpolation bin weights between bin centres, with d/dx."""
    u = np.asarray(x, dtype=np.float64) * bins - 0.5
    lo = np.clip(np.floor(u), 0, bins - 2).astype(np.int64)
    frac = u - lo
    inside = (frac >= 0.0) & (frac <= 1.0)
    frac = np.clip(frac, 0.0, 1.0)
    dfrac = np.where(inside, float(bins), 0.0)
    return lo, frac, dfrac


def _soft_counts(x, bins):
    lo, frac, _ = _soft_bins(x, bins)
    counts = np.bincount(lo, weights=1.0 - frac, minlength=bins)
    counts += np.bincount(lo + 1, weights=frac, minlength=bins)
    return counts


def dre_soft_value(kind, samples_i, samples_j, bins: int = 10, smoothing: float = 1.0) -> float:
    """DRE with linearly interpolated bin membership (the differentiable surrogate)."""
    kind = DivergenceKind.parse(kind)
    x_i, x_j = _values(samples_i), _values(samples_j)
    n_i, n_j = _soft_counts(x_i, bins), _soft_counts(x_j, bins)
    r = ((n_i + smoothing) / (x_i.size + bins * smoothing)) / ((n_j + smoothing) / (x_j.size + bins * smoothing))
    return float(np.sum(n_j / x_j.size * f_value(kind, r)))


def dre_estimate_with_grad(kind, samples_i, samples_j, bins: int = 10, smoothing: float = 1.0):
    """Hard-histogram DRE value plus the gradient of :func:`dre_soft_value`.

    The hard estimate is piecewise constant in every soft output, so training
    differentiates the interpolated-membership version instead.
    """
    kind = DivergenceKind.parse(kind)
    x_i, x_j = _values(samples_i), _values(samples_j)
    value = dre_estimate(kind, x_i, x_j, bins, smoothing)
    m_i, m_j = x_i.size, x_j.size
    n_i, n_j = _soft_counts(x_i, bins), _soft_counts(x_j, bins)
    a_i, a_j = n_i + smoothing, n_j + smoothing
    r = (a_i / (m_i + bins * smoothing)) / (a_j / (m_j + bins * smoothing))
    fp = f_derivative(kind, r)
    dv_dni = (n_j / m_j) * fp * r / a_i
    dv_dnj = f_value(kind, r) / m_j - (n_j / m_j) * fp * r / a_j

    def chain(x, dv_dn):
        lo, _, dfrac = _soft_bins(x, bins)
        return (dv_dn[lo + 1] - dv_dn[lo]) * dfrac

    return value, chain(x_i, dv_dni), chain(x_j, dv_dnj)
