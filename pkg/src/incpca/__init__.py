"""Incremental PCA (Krasulina / Oja) with finite-sample diagnostics."""

from . import distributions, estimators, harness, linalg, theory, verify

__all__ = ["distributions", "estimators", "harness", "linalg", "theory", "verify"]
__version__ = "0.1.0"
