"""Imbalance-aware multi-class frame classification pipeline."""

from .catalog import DEFAULT_CATALOG, ClassCatalog
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "ClassCatalog", "DEFAULT_CATALOG", "__version__"]
