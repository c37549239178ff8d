"""Multi-order hyperbolic graph convolution with curvature attention.

Library layout: ``tensor`` (reverse-mode differentiation substrate),
``manifolds`` (Poincaré/Lorentz kernels), ``data`` (datasets and
multi-order adjacency), ``ricci`` (edge curvature), ``layers`` (the
encoder), ``training`` (both task heads), ``metrics`` (partition
agreement), ``runners`` (run orchestration), ``service`` (HTTP API) and
``cli`` (thin client).
"""

__version__ = "0.1.0"

__all__ = ["__version__"]
