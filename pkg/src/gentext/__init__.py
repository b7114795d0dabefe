"""Machine-generated text detection with out-of-fold stacking."""

__version__ = "0.1.0"
