"""Tuning preprocessor and learner configurations for TCP flow anomaly classification."""

__version__ = "0.1.0"
