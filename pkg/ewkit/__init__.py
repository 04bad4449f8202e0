"""Online-learning algorithms as exponential weights over exponential families."""

__version__ = "0.1.0"
