"""f-divergence generators, convex conjugates and two-point closed forms.

All quantities are in nats.
"""

from __future__ import annotations

import enum

import numpy as np

# q and 1 - q are clipped away from zero before forming likelihood ratios.
RATIO_CLIP = 1e-12


class DomainError(ValueError):
    """Argument outside the domain of f or f*."""


class DivergenceKind(enum.Enum):
    KL = "kl"
    PearsonChiSquared = "chi2"
    SquaredHellinger = "sh"

    @classmethod
    def parse(cls, name: "str | DivergenceKind") -> "DivergenceKind":
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).strip().lower())
        except ValueError:
            valid = ", ".join(k.value for k in cls)
            raise ValueError(f"unknown divergence {name!r}; expected one of {valid}") from None

    def f(self, x):
        return f_value(self, x)

    def conjugate(self, t):
        return conjugate_value(self, t)

    def conjugate_grad(self, t):
        return conjugate_derivative(self, t)


def f_value(kind: DivergenceKind, x):
    """Generator f(x); accepts scalars or arrays, x >= 0."""
    x = np.asarray(x, dtype=np.float64)
    if np.any(x < 0) or np.any(np.isnan(x)):
        raise DomainError(f"f is defined for x >= 0, got min {np.nanmin(x) if x.size else x}")
    if kind is DivergenceKind.KL:
        # x log x -> 0 as x -> 0
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(x > 0, x * np.log(np.where(x > 0, x, 1.0)), 0.0)
    elif kind is DivergenceKind.PearsonChiSquared:
        out = (x - 1.0) ** 2
    elif kind is DivergenceKind.SquaredHellinger:
        out = (1.0 - np.sqrt(x)) ** 2
    else:  # pragma: no cover
        raise TypeError(kind)
    return out[()] if out.ndim == 0 else out


def conjugate_value(kind: DivergenceKind, t):
    """Fenchel conjugate f*(t) = sup_x {x t - f(x)}."""
    t = np.asarray(t, dtype=np.float64)
    if kind is DivergenceKind.KL:
        out = np.exp(t - 1.0)
    elif kind is DivergenceKind.PearsonChiSquared:
        # maximiser x = 1 + t/2 leaves the domain for t < -2; sup is then f at x=0
        out = np.where(t >= -2.0, 0.25 * t * t + t, -1.0)
    elif kind is DivergenceKind.SquaredHellinger:
        if np.any(t >= 1.0):
            raise DomainError("squared-Hellinger conjugate requires t < 1")
        out = t / (1.0 - t)
    else:  # pragma: no cover
        raise TypeError(kind)
    return out[()] if out.ndim == 0 else out


def conjugate_derivative(kind: DivergenceKind, t):
    """d f*(t) / dt, used to differentiate the variational objective."""
    t = np.asarray(t, dtype=np.float64)
    if kind is DivergenceKind.KL:
        out = np.exp(t - 1.0)
    elif kind is DivergenceKind.PearsonChiSquared:
        out = np.where(t >= -2.0, 0.5 * t + 1.0, 0.0)
    elif kind is DivergenceKind.SquaredHellinger:
        if np.any(t >= 1.0):
            raise DomainError("squared-Hellinger conjugate requires t < 1")
        out = 1.0 / (1.0 - t) ** 2
    else:  # pragma: no cover
        raise TypeError(kind)
    return out[()] if out.ndim == 0 else out


def f_derivative(kind: DivergenceKind, x):
    """f'(x) for x > 0."""
    x = np.asarray(x, dtype=np.float64)
    if kind is DivergenceKind.KL:
        out = np.log(x) + 1.0
    elif kind is DivergenceKind.PearsonChiSquared:
        out = 2.0 * (x - 1.0)
    elif kind is DivergenceKind.SquaredHellinger:
        out = 1.0 - 1.0 / np.sqrt(x)
    else:  # pragma: no cover
        raise TypeError(kind)
    return out[()] if out.ndim == 0 else out


def _check_prob(name, v):
    v = float(v)
    if not 0.0 <= v <= 1.0:
        raise DomainError(f"{name}={v} is not a probability")
    return v


def bernoulli_divergence(kind: DivergenceKind, p: float, q: float) -> float:
    """D_f(Bern(p) || Bern(q)) = q f(p/q) + (1-q) f((1-p)/(1-q))."""
    p = _check_prob("p", p)
    q = _check_prob("q", q)
    q = min(max(q, RATIO_CLIP), 1.0 - RATIO_CLIP)
    qc = 1.0 - q
    return float(q * f_value(kind, p / q) + qc * f_value(kind, (1.0 - p) / qc))


def bernoulli_divergence_grad(kind: DivergenceKind, p: float, q: float) -> tuple[float, float]:
    """Partial derivatives of :func:`bernoulli_divergence` in (p, q).

    Uses d/dp [q f(p/q)] = f'(p/q) and d/dq [q f(p/q)] = f(p/q) - (p/q) f'(p/q).
    KL is evaluated at the clipped interior when p hits 0 or 1.
    """
    p = _check_prob("p", p)
    q = _check_prob("q", q)
    q = min(max(q, RATIO_CLIP), 1.0 - RATIO_CLIP)
    pc = 1.0 - p
    qc = 1.0 - q
    r1 = max(p / q, RATIO_CLIP)
    r0 = max(pc / qc, RATIO_CLIP)
    d1 = f_derivative(kind, r1)
    d0 = f_derivative(kind, r0)
    dp = float(d1 - d0)
    dq = float((f_value(kind, r1) - r1 * d1) - (f_value(kind, r0) - r0 * d0))
    return dp, dq
