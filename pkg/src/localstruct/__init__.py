"""Semi-supervised structured output prediction with local linear predictors."""

__version__ = "0.1.0"
