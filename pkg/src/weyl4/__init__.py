"""weyl4: curvature and integrability-identity checks for almost Hermitian 4-manifolds."""

__version__ = "0.1.0"

from .catalog import (  # noqa: F401
    ManifoldSpec,
    builtin_manifolds,
    conformally_rescaled,
    get_manifold,
    load_manifold_config,
)
from .exprjet import Jet, eval_jet, eval_values, parse_expression  # noqa: F401

__all__ = [
    "ManifoldSpec",
    "builtin_manifolds",
    "conformally_rescaled",
    "get_manifold",
    "load_manifold_config",
    "Jet",
    "eval_jet",
    "eval_values",
    "parse_expression",
]
