"""Input validation helpers shared by the estimators and the CLI."""
import math
import numbers

import numpy as np

from .exceptions import ContractViolation, DomainError


def check_omega(omega, *, allow_zero=False):
    if not isinstance(omega, numbers.Real) or not math.isfinite(omega):
        raise DomainError(f"omega must be a finite real number, got {omega!r}")
    if omega < 0 or (omega == 0 and not allow_zero):
        raise DomainError(f"omega must be positive, got {omega!r}")
    return float(omega)


def check_lambda(lam):
    """Reject strengths for which the admissible class is empty (lam < 1/pi)."""
    if not isinstance(lam, numbers.Real) or not math.isfinite(lam):
        raise DomainError(f"lambda must be a finite real number, got {lam!r}")
    if lam * math.pi < 1.0:
        raise DomainError(
            f"lambda={lam!r} is below 1/pi: class K_λ(D) empty "
            "(no 0 <= w <= lambda with unit mass on the unit disk)"
        )
    return float(lam)


def check_points(points):
    """Return ``points`` as a float array of shape (n, 2)."""
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ContractViolation(f"points must have shape (n, 2), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ContractViolation("points contain non-finite values")
    return arr


def check_values(values, shape):
    arr = np.asarray(values, dtype=float)
    if arr.shape != tuple(shape):
        raise ContractViolation(
            f"field values have shape {arr.shape}, grid expects {tuple(shape)}"
        )
    if not np.all(np.isfinite(arr)):
        raise ContractViolation("field values contain non-finite entries")
    return arr


def check_positive_int(value, name, minimum=1):
    if not isinstance(value, numbers.Integral) or value < minimum:
        raise ContractViolation(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)
