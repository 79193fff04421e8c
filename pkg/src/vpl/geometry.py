"""Closed-form potential theory of the unit disk.

Green's function of ``-Laplace`` with zero Dirichlet data, its regular part,
the Robin function and the rotating Kirchhoff-Routh landscape
``H(x) - omega/2 |x|^2`` whose minimizers locate concentrated vortex cores.

All functions accept either a single point ``(x1, x2)`` or an array of
points with trailing dimension 2 and broadcast like numpy ufuncs.
"""
import math
from dataclasses import dataclass

import numpy as np

from ._validation import check_lambda, check_omega
from .exceptions import DomainError

INV_2PI = 1.0 / (2.0 * math.pi)
INV_4PI = 1.0 / (4.0 * math.pi)

#: Angular velocity above which the landscape minimum leaves the origin.
CRITICAL_OMEGA = 1.0 / (2.0 * math.pi)


@dataclass(frozen=True)
class RotationParams:
    """Angular velocity and vorticity strength of a rotating patch problem.

    ``omega = 0`` is accepted: it is the non-rotating (steady) problem.
    """

    omega: float
    lam: float

    def __post_init__(self):
        object.__setattr__(self, "omega", check_omega(self.omega, allow_zero=True))
        object.__setattr__(self, "lam", check_lambda(self.lam))

    @property
    def epsilon(self):
        """Core radius ``(pi lam)^(-1/2)`` of a unit-mass disk patch."""
        return 1.0 / math.sqrt(math.pi * self.lam)


def _as_points(p):
    arr = np.asarray(p, dtype=float)
    if arr.shape[-1:] != (2,):
        raise DomainError(f"points need a trailing dimension of size 2, got {arr.shape}")
    return arr


def _sq_norm(p):
    return p[..., 0] ** 2 + p[..., 1] ** 2


def _unwrap(value):
    return float(value) if np.ndim(value) == 0 else value


def regular_part(x, y):
    """Regular part ``h(x, y)`` of the Green's function.

    Uses ``h = -(1/4pi) ln(|x|^2 |y|^2 - 2 x.y + 1)``, which equals the
    image-charge form ``-(1/2pi)(ln|y| + ln|x - y/|y|^2|)`` but stays finite
    and cancellation-free as ``y -> 0`` (where ``h(x, 0) = 0``).
    """
    x = _as_points(x)
    y = _as_points(y)
    arg = _sq_norm(x) * _sq_norm(y) - 2.0 * (x[..., 0] * y[..., 0] + x[..., 1] * y[..., 1]) + 1.0
    # arg = |y|^2 |x - y*|^2 vanishes only when both points sit on the circle
    with np.errstate(divide="ignore"):
        return _unwrap(-INV_4PI * np.log(arg))


def greens(x, y):
    """Dirichlet Green's function ``G(x, y)`` of the unit disk.

    Raises
    ------
    DomainError
        If a point lies outside the closed disk or the two points coincide.
    """
    x = _as_points(x)
    y = _as_points(y)
    if np.any(_sq_norm(x) > 1.0 + 1e-14) or np.any(_sq_norm(y) > 1.0 + 1e-14):
        raise DomainError("greens: points must lie in the closed unit disk")
    d2 = _sq_norm(x - y)
    if np.any(d2 == 0.0):
        raise DomainError("greens: coincident points (logarithmic singularity)")
    arg = _sq_norm(x) * _sq_norm(y) - 2.0 * (x[..., 0] * y[..., 0] + x[..., 1] * y[..., 1]) + 1.0
    # G = -(1/4pi) ln(|x-y|^2 / arg); the ratio is exactly 1 on the boundary
    return _unwrap(-INV_4PI * np.log(d2 / arg))


def robin(x):
    """Robin function ``H(x) = h(x, x) / 2 = -(1/4pi) ln(1 - |x|^2)``."""
    x = _as_points(x)
    s = _sq_norm(x)
    if np.any(s >= 1.0):
        raise DomainError("robin: |x| must be < 1")
    return _unwrap(-INV_4PI * np.log1p(-s))


def kr_landscape(x, omega):
    """Rotating Kirchhoff-Routh landscape ``H(x) - (omega/2)|x|^2``."""
    x = _as_points(x)
    s = _sq_norm(x)
    if np.any(s >= 1.0):
        raise DomainError("kr_landscape: |x| must be < 1")
    return _unwrap(-INV_4PI * np.log1p(-s) - 0.5 * omega * s)


def kr_landscape_radial(r, omega):
    """Landscape as a function of the radius only (it is radially symmetric)."""
    r = np.asarray(r, dtype=float)
    if np.any(np.abs(r) >= 1.0):
        raise DomainError("kr_landscape_radial: |r| must be < 1")
    s = r * r
    return _unwrap(-INV_4PI * np.log1p(-s) - 0.5 * omega * s)


def kr_minimizer_radius(omega):
    """Radius of the circle of global minimizers of :func:`kr_landscape`.

    In ``s = |x|^2`` the landscape is ``-(1/4pi) ln(1-s) - omega s / 2``,
    strictly convex with derivative ``1/(4pi(1-s)) - omega/2``.  The minimum
    is at ``s = 0`` for ``omega <= 1/(2pi)`` and at ``1 - s = 1/(2 pi omega)``
    otherwise.
    """
    omega = check_omega(omega)
    if omega <= CRITICAL_OMEGA:
        return 0.0
    return math.sqrt(1.0 - 1.0 / (2.0 * math.pi * omega))


def kr_minimizer_radius_scan(omega, step=1e-6):
    """Brute-force minimizer radius by scanning ``r`` over ``[0, 1)``."""
    omega = check_omega(omega)
    r = np.arange(0.0, 1.0, step)
    return float(r[np.argmin(kr_landscape_radial(r, omega))])


def point_vortex_angular_velocity(r_star):
    """Angular velocity ``1/(2pi(1 - r^2))`` of a point vortex at radius ``r_star``.

    A unit point vortex in the disk moves by ``dX/dt = -grad^perp H(X)``,
    i.e. on a circle at this rate.
    """
    if not 0.0 <= r_star < 1.0:
        raise DomainError(f"r_star must lie in [0, 1), got {r_star!r}")
    return 1.0 / (2.0 * math.pi * (1.0 - r_star * r_star))
