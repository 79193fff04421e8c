"""Maximization of the augmented kinetic energy over ``K_lambda(D)``.

The functional is ``E(w) = 1/2 int psi w + omega/2 int |x|^2 w`` with
``psi = G w``, maximized over vorticities ``0 <= w <= lam`` of unit mass.
Each ascent step fills the highest superlevel set of the augmented
potential ``Phi = psi + omega/2 |x|^2`` up to the mass budget (a bathtub
step), which maximizes the linear part exactly; the quadratic remainder is
a nonnegative discrete energy, so the energy never decreases.
"""
import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_lambda, check_positive_int
from .exceptions import ContractViolation, ConvergenceWarning, DomainError, MonotonicityError
from .geometry import RotationParams, kr_minimizer_radius
from .grid import ScalarField, _check_field, integrate, moment_center, sample_values
from .poisson import dirichlet_form, gradient_values, solve_fast_values

logger = logging.getLogger(__name__)

MONOTONICITY_TOL = 1e-12
MASS_TOL = 1e-12


@dataclass(frozen=True)
class PatchState:
    """A converged (or best-effort) maximizer and its diagnostics.

    ``history`` rows are ``(iteration, energy, mu, patch_mass,
    symmetric_difference)`` where ``patch_mass`` is the mass carried by
    cells at the full value ``lam``.
    """

    w: ScalarField
    lam: float
    omega: float
    mu: float
    energy: float
    iterations: int
    fractional_mass: float
    converged: bool
    phi: ScalarField = field(repr=False)
    history: tuple = field(default=(), repr=False)

    @property
    def grid(self):
        return self.w.grid

    @property
    def epsilon(self):
        return 1.0 / math.sqrt(math.pi * self.lam)

    @property
    def degenerate(self):
        """True when ``lam == 2 omega``, where a plateau of intermediate
        vorticity is not excluded and patchness checks do not apply."""
        return math.isclose(self.lam, 2.0 * self.omega, rel_tol=1e-12)


def check_admissible(w, lam, tol=1e-10):
    """Raise unless ``0 <= w <= lam`` and ``int w = 1`` (within ``tol``)."""
    _check_field(w)
    v = w.values
    if v.min() < -1e-12 * lam or v.max() > lam * (1 + 1e-12):
        raise ContractViolation("vorticity leaves the bounds 0 <= w <= lambda")
    mass = integrate(w)
    if abs(mass - 1.0) > tol:
        raise ContractViolation(f"vorticity mass is {mass!r}, expected 1")
    return w


def _flat_area(grid):
    area = grid._cache.get("flat_area")
    if area is None:
        area = grid._cache["flat_area"] = np.broadcast_to(grid.weights, grid.shape).ravel().copy()
    return area


def energy_parts(grid, w_values, psi_values, omega):
    wa = w_values * grid.weights
    kinetic = 0.5 * float(np.sum(psi_values * wa))
    rotation = 0.5 * omega * float(np.sum(grid.r2_mean[:, None] * wa))
    return kinetic, rotation


def energy(w, omega):
    """Augmented energy ``1/2 int (G w) w + omega/2 int |x|^2 w``."""
    w = _check_field(w)
    psi = solve_fast_values(w.grid, w.values)
    return sum(energy_parts(w.grid, w.values, psi, omega))


def augmented_potential(w, omega):
    """``Phi = G w + omega/2 |x|^2`` (``|x|^2`` as the cell average)."""
    w = _check_field(w)
    psi = solve_fast_values(w.grid, w.values)
    return ScalarField(w.grid, psi + 0.5 * omega * w.grid.r2_mean[:, None])


def _threshold_values(grid, phi_values, lam, tie_tol=1e-13, max_bisect=200):
    """Bathtub step on raw arrays; returns ``(mu, w_values)``."""
    vals = phi_values.ravel()
    area = _flat_area(grid)
    n = vals.size
    if lam * area.sum() < 1.0 - MASS_TOL:
        raise ContractViolation("threshold: lambda * |D| < 1, cannot reach unit mass")
    v_min, v_max = float(vals.min()), float(vals.max())
    spread = v_max - v_min
    band = tie_tol * spread

    # restrict the search to the top cells; they hold all of the mass
    k = min(n, max(4 * grid.n_theta, int(4.0 / (lam * np.median(area))) + 1))
    while True:
        if k >= n:
            cand = np.arange(n)
            break
        kth = np.partition(vals, n - k)[n - k]
        cand = np.flatnonzero(vals >= kth - band)
        if lam * area[cand].sum() > 1.0 + 1e-9:
            break
        k *= 4
    cv = vals[cand]
    ca = area[cand]

    lo, hi = float(cv.min()), float(cv.max())
    if cand.size == n:
        lo = v_min
    for _ in range(max_bisect):
        if hi - lo <= 1e-15 * spread:
            break
        mid = 0.5 * (lo + hi)
        m = lam * ca[cv > mid].sum()
        if abs(m - 1.0) < MASS_TOL:
            lo = hi = mid
            break
        if m > 1.0:
            lo = mid
        else:
            hi = mid

    full = cv > hi + band
    marginal = (cv >= lo - band) & ~full
    w_flat = np.zeros(n)
    w_flat[cand[full]] = lam
    full_mass = lam * ca[full].sum()
    capacity = lam * ca[marginal].sum()
    if capacity > 0.0:
        frac = min(1.0, max(0.0, (1.0 - full_mass) / capacity))
        w_flat[cand[marginal]] = lam * frac
    mu = 0.5 * (lo + hi)
    return mu, w_flat.reshape(grid.shape)


def threshold(phi, lam):
    """Maximize ``int Phi w`` over ``K_lambda``: fill ``{Phi > mu}`` with ``lam``.

    ``mu`` is found by bisection on the mass ``lam |{Phi > mu}|``.  Cells
    on the marginal level (within a relative ``1e-13`` of the final
    bracket) share the leftover mass uniformly, so the unit-mass
    constraint holds to rounding even on plateaus.

    Returns
    -------
    mu : float
        The Lagrange multiplier (threshold level).
    w_next : ScalarField
        The admissible maximizer of the linear functional.
    """
    phi = _check_field(phi)
    lam = check_lambda(lam)
    mu, w = _threshold_values(phi.grid, phi.values, lam)
    return mu, ScalarField(phi.grid, w)


def fractional_mass(w_values, grid, lam):
    """Mass carried by cells with ``0 < w < lam``."""
    tol = 1e-12 * lam
    frac = (w_values > tol) & (w_values < lam - tol)
    return float(np.sum(np.where(frac, w_values, 0.0) * grid.weights))


def perimeter_cell_estimate(state):
    """``(number of patch-edge cells) * lam * (largest such cell area)``.

    Edge cells are cells with ``w > 0`` that have a 4-neighbour below ``lam``;
    this bounds the mass a one-cell-thick band around the patch can carry.
    """
    w = state.w.values
    lam = state.lam
    inside = w > 1e-12 * lam
    below = w < lam * (1 - 1e-12)
    nb_below = (
        np.roll(below, 1, axis=1)
        | np.roll(below, -1, axis=1)
        | np.vstack([below[1:], np.ones((1, below.shape[1]), bool)])
        | np.vstack([np.ones((1, below.shape[1]), bool), below[:-1]])
    )
    edge = inside & (nb_below | below)
    if not edge.any():
        return 0.0
    areas = np.broadcast_to(state.grid.weights, w.shape)[edge]
    return float(edge.sum() * lam * areas.max())


def disk_initial_guess(grid, lam, center):
    """Unit-mass ``lam``-patch made of the cells nearest to ``center``.

    This is ``lam`` times the indicator of the disk of radius
    ``(pi lam)^(-1/2)`` around ``center`` at the resolution of the grid.
    """
    lam = check_lambda(lam)
    c = np.asarray(center, dtype=float)
    if c.shape != (2,) or np.hypot(*c) >= 1.0:
        raise DomainError(f"center must be a point inside the disk, got {center!r}")
    dist2 = (grid.x_centroid - c[0]) ** 2 + (grid.y_centroid - c[1]) ** 2
    _, w = _threshold_values(grid, -dist2, lam)
    return ScalarField(grid, w)


def elliptical_patch(grid, lam, center, aspect=2.0, angle=0.0):
    """Unit-mass ``lam``-patch on the cells of an ellipse of axis ratio ``aspect``.

    An elliptical patch spins under its own flow, so it is far from any
    rotating solution; handy as an off-equilibrium reference.
    """
    lam = check_lambda(lam)
    if not aspect >= 1.0:
        raise DomainError(f"aspect must be >= 1, got {aspect!r}")
    c = np.asarray(center, dtype=float)
    if c.shape != (2,) or np.hypot(*c) >= 1.0:
        raise DomainError(f"center must be a point inside the disk, got {center!r}")
    dx, dy = grid.x_centroid - c[0], grid.y_centroid - c[1]
    ca, sa = math.cos(angle), math.sin(angle)
    u, v = ca * dx + sa * dy, -sa * dx + ca * dy
    _, w = _threshold_values(grid, -(u * u / aspect + v * v * aspect), lam)
    return ScalarField(grid, w)


def random_initial_guess(grid, lam, random_state=None, max_radius=0.9):
    """Disk patch at a uniformly random centre with ``|center| < max_radius``."""
    rng = np.random.default_rng(random_state)
    rad = max_radius * math.sqrt(rng.uniform())
    ang = rng.uniform(0.0, 2.0 * math.pi)
    return disk_initial_guess(grid, lam, (rad * math.cos(ang), rad * math.sin(ang)))


def default_initial_guess(grid, params):
    """Disk patch centred at the landscape minimizer on the positive x-axis."""
    r_star = kr_minimizer_radius(params.omega) if params.omega > 0 else 0.0
    return disk_initial_guess(grid, params.lam, (r_star, 0.0))


def _shifted_patch(grid, w, lam, center, shift):
    """Bathtub fill of ``w`` translated by ``shift`` (keeps the patch shape)."""
    moved = sample_values(grid, w, grid.x - shift[0], grid.y - shift[1])
    # prefer cells near the moved centre among equal sampled values
    cx, cy = center[0] + shift[0], center[1] + shift[1]
    moved = moved - 1e-9 * lam * ((grid.x - cx) ** 2 + (grid.y - cy) ** 2)
    return _threshold_values(grid, moved, lam)[1]


def _translation_move(grid, w, phi, lam, omega, e_cur):
    """Energy-increasing rigid translation of the patch, or ``None``.

    Threshold steps only move the free boundary by whole cells, so a patch
    whose driving force is weaker than one cell's potential oscillation is
    pinned by the grid.  This move translates the patch along the force
    ``int w grad(Phi)`` (the derivative of the energy under translation)
    with a doubling/halving line search and keeps the best energy found.
    """
    gx, gy = cartesian_gradient(grid, phi)
    wa = w * grid.weights
    force = np.array([np.sum(wa * gx), np.sum(wa * gy)])
    norm = float(np.hypot(*force))
    if not norm > 0.0:
        return None
    direction = force / norm
    mass = wa.sum()
    center = np.array([np.sum(wa * grid.x), np.sum(wa * grid.y)]) / mass
    rc = float(np.hypot(*center))
    i = min(int(np.searchsorted(grid.r_edges, rc)) - 1, grid.n_r - 1)
    i = max(i, 0)
    cell = max(float(grid.dr[i]), float(grid.r[i] * grid.dtheta))

    best = None
    step = cell
    while step >= cell / 8.0:
        cand = _shifted_patch(grid, w, lam, center, step * direction)
        psi = solve_fast_values(grid, cand)
        e = sum(energy_parts(grid, cand, psi, omega))
        if e > e_cur + MONOTONICITY_TOL:
            best = (cand, psi, e)
            # keep doubling while it pays off
            while step < 0.5:
                step *= 2.0
                cand = _shifted_patch(grid, w, lam, center, step * direction)
                psi = solve_fast_values(grid, cand)
                e = sum(energy_parts(grid, cand, psi, omega))
                if e <= best[2]:
                    break
                best = (cand, psi, e)
            return best
        step *= 0.5
    return None


def solve_patch(params, init=None, tol=1e-10, max_iter=500, callback=None, translate=False):
    """Ascend the energy by repeated bathtub steps until it stalls.

    Parameters
    ----------
    params : RotationParams
    init : ScalarField, optional
        Admissible starting vorticity on the working grid. Required, because
        the grid is taken from it; see :func:`default_initial_guess`.
    tol : float
        Stop when the relative energy increment and the symmetric-difference
        mass of consecutive iterates both drop below ``tol``.
    max_iter : int
    callback : callable, optional
        Called with each history row.
    translate : bool
        When the threshold iteration stalls, try an energy-increasing
        translation of the patch and resume (see :func:`_translation_move`).
        Every accepted step still raises the energy.

    Raises
    ------
    MonotonicityError
        If an iterate lowers the energy by more than ``1e-12``.
    """
    if not isinstance(params, RotationParams):
        raise ContractViolation("params must be a RotationParams")
    if init is None:
        raise ContractViolation("solve_patch needs an initial vorticity (it fixes the grid)")
    if not tol > 0:
        raise ContractViolation(f"tol must be positive, got {tol!r}")
    max_iter = check_positive_int(max_iter, "max_iter")
    lam, omega = params.lam, params.omega
    w = check_admissible(init, lam).values
    grid = init.grid
    rot = 0.5 * omega * grid.r2_mean[:, None]

    psi = solve_fast_values(grid, w)
    e_cur = sum(energy_parts(grid, w, psi, omega))
    phi = psi + rot
    history = []
    converged = False
    mu = float("nan")
    it = 0
    for it in range(1, max_iter + 1):
        mu_new, w_new = _threshold_values(grid, phi, lam)
        psi_new = solve_fast_values(grid, w_new)
        e_new = sum(energy_parts(grid, w_new, psi_new, omega))
        gain = e_new - e_cur
        stalled = gain < tol * abs(e_cur) and float(np.sum(np.abs(w_new - w) * grid.weights)) < tol
        if stalled and translate:
            moved = _translation_move(grid, w_new, psi_new + rot, lam, omega, e_new)
            if moved is not None:
                w_new, psi_new, e_new = moved
                mu_new = _threshold_values(grid, psi_new + rot, lam)[0]
                gain = e_new - e_cur
                stalled = False
        if gain < -MONOTONICITY_TOL:
            raise MonotonicityError(
                f"energy decreased by {-gain:.3e} at iteration {it} "
                f"({e_cur!r} -> {e_new!r})"
            )
        sym_diff = float(np.sum(np.abs(w_new - w) * grid.weights))
        full_mass = float(np.sum(np.where(w_new >= lam * (1 - 1e-12), w_new, 0.0) * grid.weights))
        row = (it, e_new, mu_new, full_mass, sym_diff)
        history.append(row)
        if callback is not None:
            callback(row)
        w, psi, phi, e_cur, mu = w_new, psi_new, psi_new + rot, e_new, mu_new
        if stalled:
            converged = True
            break
    if not converged:
        warnings.warn(
            f"solve_patch stopped after {max_iter} iterations without converging",
            ConvergenceWarning,
            stacklevel=2,
        )
    logger.info("solve_patch: lam=%g omega=%g iterations=%d energy=%.15g", lam, omega, it, e_cur)
    return PatchState(
        w=ScalarField(grid, w),
        lam=lam,
        omega=omega,
        mu=mu,
        energy=e_cur,
        iterations=it,
        fractional_mass=fractional_mass(w, grid, lam),
        converged=converged,
        phi=ScalarField(grid, phi),
        history=tuple(history),
    )


def _bump(t):
    out = np.zeros_like(t)
    inside = np.abs(t) < 1.0
    ti = t[inside]
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - ti * ti))
    return out


def _bump_slope(t):
    out = np.zeros_like(t)
    inside = np.abs(t) < 1.0
    ti = t[inside]
    q = 1.0 - ti * ti
    out[inside] = np.exp(1.0 - 1.0 / q) * (-2.0 * ti / (q * q))
    return out


def cartesian_gradient(grid, values):
    """Cartesian gradient ``(d_x f, d_y f)`` at cell centres."""
    g_r, g_t = gradient_values(grid, values)
    c, s = np.cos(grid.theta)[None, :], np.sin(grid.theta)[None, :]
    return c * g_r - s * g_t, s * g_r + c * g_t


def residual_weak_form(state, test_count=4, center=None, scale=None):
    """Largest ``|int w grad(Phi) . grad^perp(phi)|`` over a family of bumps.

    The test functions are tensor products of the smooth bump
    ``exp(1 - 1/(1 - t^2))`` with half-width ``2 scale`` centred on a
    ``test_count x test_count`` lattice spanning ``center +- 1.5 scale``.
    By default ``center`` is the centre of vorticity and ``scale`` the core
    radius ``(pi lam)^(-1/2)``, so the family follows the patch.
    """
    test_count = check_positive_int(test_count, "test_count")
    grid = state.grid
    w = state.w.values
    if center is None:
        center = moment_center(state.w)
    if scale is None:
        scale = state.epsilon
    support = w > 0
    gx, gy = cartesian_gradient(grid, state.phi.values)
    wa = (w * grid.weights)[support]
    gx, gy = gx[support], gy[support]
    px, py = grid.x[support], grid.y[support]
    offsets = np.linspace(-1.5, 1.5, test_count) * scale if test_count > 1 else np.zeros(1)
    half = 2.0 * scale
    worst = 0.0
    for ox in offsets:
        tx = (px - center[0] - ox) / half
        bx, dbx = _bump(tx), _bump_slope(tx) / half
        for oy in offsets:
            ty = (py - center[1] - oy) / half
            by, dby = _bump(ty), _bump_slope(ty) / half
            # grad^perp phi = (d_y phi, -d_x phi)
            perp_x = bx * dby
            perp_y = -dbx * by
            worst = max(worst, abs(float(np.sum(wa * (gx * perp_x + gy * perp_y)))))
    return worst


def kinetic_core_energy(state):
    """Core energy ``T = 1/2 int |grad (Phi - mu)_+|^2``.

    The gradient is taken on cell faces (the difference quotients of the
    Poisson operator), each face weighted by the part of it on which
    ``Phi - mu`` is positive.  Centred differences of the clipped field
    lose accuracy at the kink on the patch edge when the core spans only
    a few cells.  The level is :func:`subcell_multiplier`, since ``T``
    moves by about half the mass times any error in ``mu``.
    """
    mu = subcell_multiplier(state)
    return 0.5 * dirichlet_form(state.grid, state.phi.values - mu, positive_part=True)


def kinetic_core_energy_identity(state):
    """Core energy from ``-Laplace psi_lam = w - 2 omega`` tested against
    ``psi_+ - gamma``; needs no derivatives and serves as a cross-check."""
    grid = state.grid
    psi = state.phi.values - state.mu
    psi_plus = np.maximum(psi, 0.0)
    gamma = max(0.5 * state.omega - state.mu, 0.0)
    src = state.w.values - 2.0 * state.omega
    wts = grid.weights
    return 0.5 * float(np.sum(src * psi_plus * wts) - gamma * np.sum(src * wts))


def _uniform_sum_cdf(s, a, b):
    """``P(X + Y <= s)`` for independent ``X ~ U[-a, a]``, ``Y ~ U[-b, b]``."""
    def ramp2(x):
        return 0.5 * np.maximum(x, 0.0) ** 2

    return (ramp2(s + a + b) - ramp2(s + a - b) - ramp2(s - a + b) + ramp2(s - a - b)) / (4.0 * a * b)


def subcell_multiplier(state, max_bisect=100):
    """Multiplier of the sub-cell interface ``{Phi = mu}``.

    The discrete ``mu`` sits at the potential of whichever cell happens to
    be marginal, an uncertainty of one cell's potential oscillation.  Here
    ``Phi`` is taken linear inside each cell (centred gradient), the area
    of ``{Phi > t}`` is summed exactly per cell, and ``t`` is chosen by
    bisection so that ``lam * area = 1``.
    """
    grid = state.grid
    lam = state.lam
    phi = state.phi.values
    g_r, g_t = gradient_values(grid, phi)
    half_r = np.abs(g_r) * (0.5 * grid.dr)[:, None]
    half_t = np.abs(g_t) * (0.5 * grid.r * grid.dtheta)[:, None]
    reach = half_r + half_t
    mu0 = state.mu
    band = 2.0 * float(np.max(reach[np.abs(phi - mu0) <= 2.0 * reach.max()]))
    near = np.abs(phi - mu0) <= 2.0 * band
    above = phi > mu0 + 2.0 * band
    area = np.broadcast_to(grid.weights, grid.shape)
    base = lam * float(np.sum(area[above]))
    p, a, b, da = phi[near], half_r[near], half_t[near], area[near]
    # keep both half-ranges away from zero (cells on a ring see no angular slope)
    floor = 1e-4 * (a + b) + 1e-300
    a, b = np.maximum(a, floor), np.maximum(b, floor)

    def mass(t):
        return base + lam * float(np.sum(da * (1.0 - _uniform_sum_cdf(t - p, a, b))))

    lo, hi = mu0 - 2.0 * band, mu0 + 2.0 * band
    if not mass(lo) >= 1.0 >= mass(hi):
        return mu0
    for _ in range(max_bisect):
        mid = 0.5 * (lo + hi)
        if mass(mid) > 1.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(1.0, abs(mid)):
            break
    return 0.5 * (lo + hi)
