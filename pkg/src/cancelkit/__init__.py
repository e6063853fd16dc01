"""Constant-coefficient differential operators: classification of ellipticity
and cancellation, compatibility operators, and numerical checks of the
endpoint estimates on a periodic grid."""

from importlib.metadata import PackageNotFoundError, version

from .catalog import catalog_get, catalog_names, load_operator
from .classifier import (
    SphereSampler,
    Verdict,
    check_cancelling,
    check_cocancelling,
    check_elliptic,
    check_weakly_cancelling,
    weak_cancellation_residual,
)
from .compatibility import CompatibilityError, build_compatibility, verify_compatibility
from .operators import Operator, OperatorError, eval_symbol, read_operator, symbol_batch, write_operator
from .subspace import DEFAULT_POLICY, Subspace, TolerancePolicy, image, intersect, kernel, moore_penrose

try:
    __version__ = version("cancelkit")
except PackageNotFoundError:  # pragma: no cover - running from a bare checkout
    __version__ = "0.0.0"

__all__ = [
    "Operator", "OperatorError", "eval_symbol", "symbol_batch", "read_operator", "write_operator",
    "catalog_get", "catalog_names", "load_operator",
    "Subspace", "TolerancePolicy", "DEFAULT_POLICY", "image", "kernel", "intersect", "moore_penrose",
    "SphereSampler", "Verdict", "check_elliptic", "check_cancelling", "check_cocancelling",
    "check_weakly_cancelling", "weak_cancellation_residual",
    "build_compatibility", "verify_compatibility", "CompatibilityError",
]
