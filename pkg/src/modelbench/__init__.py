"""Model-based estimators versus from-scratch networks on synthetic data."""
__version__ = "0.1.0"
