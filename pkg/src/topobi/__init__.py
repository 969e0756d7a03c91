"""Bipartite circuit-topology toolkit: tokens, graphs, serialization, constrained sampling and SPICE export."""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

from .errors import TopoBiError  # noqa: E402
from .graph import CircuitGraph, canonical_key, erc_check, is_isomorphic  # noqa: E402
from .vocab import Vocabulary, build_vocabulary, default_vocabulary  # noqa: E402

__all__ = [
    "CircuitGraph",
    "TopoBiError",
    "Vocabulary",
    "__version__",
    "build_vocabulary",
    "canonical_key",
    "default_vocabulary",
    "erc_check",
    "is_isomorphic",
]
