"""Fair binary classification with min-max f-divergence regularization."""

from fairminmax.divergence import DivergenceKind

__all__ = ["DivergenceKind"]
__version__ = "0.1.0"
