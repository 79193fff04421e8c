"""Dirichlet Poisson problem ``-Laplace psi = w`` on the unit disk.

``solve_fast`` diagonalizes the five-point polar finite-volume Laplacian with
an FFT in angle and solves one symmetric tridiagonal system per angular mode.
``solve_direct`` evaluates the Green's representation ``psi = G w`` by
quadrature and serves as an independent check of the fast route.
"""
import math
from dataclasses import dataclass

import numpy as np

from .geometry import INV_2PI, INV_4PI
from .grid import ScalarField, _check_field
from .exceptions import ContractViolation


@dataclass(frozen=True)
class StreamFunction:
    psi: ScalarField
    source_mass: float


@dataclass(frozen=True)
class VelocityField:
    u_r: ScalarField
    u_theta: ScalarField

    def speed(self):
        return np.hypot(self.u_r.values, self.u_theta.values)


class _ModeFactorization:
    """LDL^T factors of the per-mode radial operators of a grid.

    Radial fluxes are difference quotients in ``s = r^2`` (the polar area
    variable), which is exact for profiles quadratic in ``r`` and coincides
    with the usual centred flux on uniform grids.  The Dirichlet face at
    ``r = 1`` uses the same quotient against the boundary value 0; the
    face at the origin carries no flux.  The resulting matrices are
    symmetric M-matrices, so ``G`` is symmetric positive definite in the
    area-weighted inner product and satisfies a discrete maximum principle.
    """

    def __init__(self, grid):
        r, edges = grid.r, grid.r_edges
        s = r * r
        s_face = edges[1:-1] ** 2
        coupling = 2.0 * s_face / np.diff(s)  # between ring i and i+1
        boundary = 2.0 / (1.0 - s[-1])
        n_modes = grid.n_theta // 2 + 1
        m = np.arange(n_modes)
        k2 = (2.0 * np.sin(0.5 * m * grid.dtheta) / grid.dtheta) ** 2

        diag = np.zeros((grid.n_r, n_modes))
        diag += (grid.dr / r)[:, None] * k2[None, :]
        diag[:-1] += coupling[:, None]
        diag[1:] += coupling[:, None]
        diag[-1] += boundary

        self.coupling = coupling
        self.boundary = boundary
        self.off = -coupling
        self.dd = np.empty_like(diag)
        self.lower = np.zeros_like(diag)
        self.dd[0] = diag[0]
        for i in range(1, grid.n_r):
            self.lower[i] = self.off[i - 1] / self.dd[i - 1]
            self.dd[i] = diag[i] - self.lower[i] * self.off[i - 1]
        self.rhs_scale = (0.5 * (edges[1:] ** 2 - edges[:-1] ** 2))[:, None]

    def solve(self, rhs_hat):
        n = rhs_hat.shape[0]
        z = np.empty_like(rhs_hat)
        z[0] = rhs_hat[0]
        for i in range(1, n):
            z[i] = rhs_hat[i] - self.lower[i] * z[i - 1]
        x = np.empty_like(rhs_hat)
        x[-1] = z[-1] / self.dd[-1]
        for i in range(n - 2, -1, -1):
            x[i] = (z[i] - self.off[i] * x[i + 1]) / self.dd[i]
        return x


def _factorization(grid):
    fac = grid._cache.get("poisson")
    if fac is None:
        fac = grid._cache["poisson"] = _ModeFactorization(grid)
    return fac


def solve_fast_values(grid, w_values):
    """Stream function values for raw vorticity values (no validation)."""
    fac = _factorization(grid)
    w_hat = np.fft.rfft(w_values, axis=1)
    psi_hat = fac.solve(fac.rhs_scale * w_hat)
    return np.fft.irfft(psi_hat, n=grid.n_theta, axis=1)


def solve_fast(w):
    """Stream function ``psi = G w`` by FFT in angle and tridiagonal solves in radius.

    Raises
    ------
    ContractViolation
        If ``w`` is not a finite :class:`ScalarField`.
    """
    w = _check_field(w)
    if not np.all(np.isfinite(w.values)):
        raise ContractViolation("solve_fast: non-finite vorticity")
    psi = solve_fast_values(w.grid, w.values)
    mass = float(np.sum(w.values * w.grid.weights))
    return StreamFunction(ScalarField(w.grid, psi), mass)


def _positive_fraction(a, b):
    """Fraction of the segment from ``a`` to ``b`` (linear) where it is positive."""
    hi = np.maximum(a, b)
    lo = np.minimum(a, b)
    span = hi - lo
    with np.errstate(invalid="ignore", divide="ignore"):
        frac = np.where(lo > 0, 1.0, np.where(hi <= 0, 0.0, hi / np.where(span > 0, span, 1.0)))
    return frac


def dirichlet_form(grid, values, positive_part=False):
    """Discrete ``int |grad f|^2`` for ``f`` vanishing on the circle.

    Uses the face differences of the solver's own operator, so that
    ``dirichlet_form(G w) = int (G w) w`` holds to rounding.  With
    ``positive_part`` the result approximates ``int |grad f_+|^2``: each
    face difference counts only over the part of the face segment where
    the linear interpolant of ``f`` is positive, which keeps the edge
    cells of ``{f > 0}`` instead of clipping them.
    """
    fac = _factorization(grid)
    up = np.roll(values, -1, axis=1)
    outer = values[-1]
    d_r = np.diff(values, axis=0) ** 2
    d_t = (up - values) ** 2
    d_b = outer**2
    if positive_part:
        d_r = d_r * _positive_fraction(values[:-1], values[1:])
        d_t = d_t * _positive_fraction(values, up)
        d_b = d_b * _positive_fraction(outer, np.zeros_like(outer))
    total = np.sum(fac.coupling[:, None] * d_r) + fac.boundary * np.sum(d_b)
    total += np.sum((grid.dr / grid.r)[:, None] * d_t) / grid.dtheta**2
    return float(total * grid.dtheta)


def _self_cell_coefficient(area, r):
    """Integral of G over the self cell divided by its area.

    The free-space log is integrated exactly over the disk of equal area
    centred at the node; the smooth regular part uses the midpoint value
    ``h(x, x) = -(1/2pi) ln(1 - |x|^2)``.
    """
    rho = np.sqrt(area / math.pi)
    log_part = rho**2 * (0.25 - 0.5 * np.log(rho))  # = int_{|z|<rho} -(1/2pi) ln|z| dz
    h_self = -INV_2PI * np.log1p(-r * r)
    return log_part / area - h_self


def solve_direct(w):
    """Stream function by direct Green's quadrature ``sum_j G(x_i, y_j) w_j a_j``.

    Since ``G(x, y)`` on the polar lattice depends on the angles only
    through their difference, the sum over source angles is a circular
    convolution and is evaluated exactly with FFTs, ring pair by ring pair.
    Cost is ``O(n_r^2 n_theta log n_theta)``.
    """
    w = _check_field(w)
    g = w.grid
    r = g.r
    n_t = g.n_theta
    delta = np.arange(n_t) * g.dtheta
    cos_d = np.cos(delta)
    w_hat = np.fft.rfft(w.values * g.weights, axis=1)
    self_coef = _self_cell_coefficient(g.ring_area, r)
    psi = np.empty(g.shape)
    for i in range(g.n_r):
        ri = r[i]
        rr = r[:, None]
        # G = -(1/4pi) ln(|x-y|^2 / (|x|^2|y|^2 - 2x.y + 1))
        rc = ri * rr * cos_d[None, :]
        dist2 = ri * ri + rr * rr - 2.0 * rc
        image = (ri * rr) ** 2 - 2.0 * rc + 1.0
        dist2[i, 0] = 1.0  # placeholder for the singular self cell
        kernel = -INV_4PI * np.log(dist2 / image)
        kernel[i, 0] = self_coef[i]
        k_hat = np.fft.rfft(kernel, axis=1)
        psi[i] = np.fft.irfft(np.sum(k_hat * w_hat, axis=0), n=n_t)
    mass = float(np.sum(w.values * g.weights))
    return StreamFunction(ScalarField(g, psi), mass)


def _lagrange_slope(x0, x1, x2, f0, f1, f2):
    """Derivative at ``x0`` of the parabola through three points."""
    return (
        f0 * (2 * x0 - x1 - x2) / ((x0 - x1) * (x0 - x2))
        + f1 * (x0 - x2) / ((x1 - x0) * (x1 - x2))
        + f2 * (x0 - x1) / ((x2 - x0) * (x2 - x1))
    )


def _radial_derivative(grid, values, outer_value=None):
    """Second-order derivative in ``r`` at ring centres.

    The innermost ring differences across the origin (the point at radius
    ``-r_0`` is the antipodal node of the same ring).  The outermost ring
    uses the boundary value ``outer_value`` at ``r = 1`` when it is known
    and a one-sided difference otherwise.
    """
    r = grid.r
    n_t = grid.n_theta
    inner = np.roll(values[0], n_t // 2)[None, :]
    if outer_value is None:
        rings = np.concatenate([inner, values])
        radii = np.concatenate([[-r[0]], r])
    else:
        rings = np.concatenate([inner, values, np.full((1, n_t), float(outer_value))])
        radii = np.concatenate([[-r[0]], r, [1.0]])
    out = np.empty_like(values)
    x0, xm, xp = radii[1:-1], radii[:-2], radii[2:]
    m = min(grid.n_r, len(radii) - 2)
    out[:m] = _lagrange_slope(
        x0[:m, None], xm[:m, None], xp[:m, None], rings[1 : m + 1], rings[:m], rings[2 : m + 2]
    )
    if outer_value is None:
        out[-1] = _lagrange_slope(r[-1], r[-2], r[-3], values[-1], values[-2], values[-3])
    return out


def _angular_derivative(grid, values):
    return (np.roll(values, -1, axis=1) - np.roll(values, 1, axis=1)) / (2.0 * grid.dtheta)


def velocity_values(grid, psi_values, outer_value=0.0):
    """``(u_r, u_theta) = ((1/r) d_theta psi, -d_r psi)`` as raw arrays."""
    u_r = _angular_derivative(grid, psi_values) / grid.r[:, None]
    u_t = -_radial_derivative(grid, psi_values, outer_value)
    return u_r, u_t


def gradient_values(grid, values, outer_value=None):
    """Polar gradient components ``(d_r f, (1/r) d_theta f)``."""
    return (
        _radial_derivative(grid, values, outer_value),
        _angular_derivative(grid, values) / grid.r[:, None],
    )


def velocity(psi):
    """Velocity ``v = grad^perp psi`` in polar components by centred differences.

    A :class:`StreamFunction` is known to vanish on the circle and that value
    closes the radial stencil; a bare field gets a one-sided difference.
    """
    outer = None
    if isinstance(psi, StreamFunction):
        psi, outer = psi.psi, 0.0
    psi = _check_field(psi)
    u_r, u_t = velocity_values(psi.grid, psi.values, outer)
    return VelocityField(ScalarField(psi.grid, u_r), ScalarField(psi.grid, u_t))
