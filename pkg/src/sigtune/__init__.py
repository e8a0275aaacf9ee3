"""Significance-aware configuration tuning for repeatedly executed workloads."""

from .errors import SigtuneError
from .space import ConfigSpace, ParameterSpec, example_space, load_space

__version__ = "0.1.0"

__all__ = ["ConfigSpace", "ParameterSpec", "SigtuneError", "example_space", "load_space", "__version__"]
