"""Asymptotic checks of concentrated maximizers as ``lam -> infinity``.

For each ``lam`` of a sweep the maximizer is computed on a grid refined
around the expected core and compared with the small-scale limit: the
Rankine profile after rescaling by ``epsilon = (pi lam)^(-1/2)``, the
logarithmic growth of energy and multiplier, and the core position.
"""
import concurrent.futures
import math
import os
from dataclasses import asdict, dataclass

import numpy as np
import scipy.fft
from scipy.spatial import ConvexHull

from ._validation import check_lambda
from .exceptions import ContractViolation, DomainError
from .geometry import RotationParams, kr_minimizer_radius
from .grid import PolarGrid, _check_field, moment_center, sample_values
from .maximizer import default_initial_guess, kinetic_core_energy, solve_patch, subcell_multiplier

SWEEP_LAMBDAS = (1e2, 1e3, 1e4, 1e5)
SWEEP_OMEGAS = (0.1, 1.0 / (2.0 * math.pi), 1.0 / math.pi)

SWEEP_COLUMNS = (
    "lambda",
    "epsilon",
    "energy",
    "mu",
    "core_energy",
    "center_radius",
    "diameter",
    "diam_over_eps",
    "v_sup_error",
    "zeta_error",
)


@dataclass(frozen=True)
class SweepRecord:
    """Measured quantities of one maximizer of a ``lam`` sweep."""

    lam: float
    epsilon: float
    energy: float
    mu: float
    core_energy: float
    center_radius: float
    diameter: float
    diam_over_eps: float
    v_sup_error: float
    zeta_error: float
    cell_width: float = float("nan")
    iterations: int = 0
    converged: bool = True
    probe_outside: bool = False

    def __post_init__(self):
        if abs(self.epsilon - 1.0 / math.sqrt(math.pi * self.lam)) > 1e-12:
            raise ContractViolation("SweepRecord: epsilon must equal (pi lam)^(-1/2)")

    @property
    def mass_in_unit_ball(self):
        return 1.0 - self.zeta_error

    def row(self):
        """Values in :data:`SWEEP_COLUMNS` order."""
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return tuple(d[c] for c in SWEEP_COLUMNS)


def rankine(y_radius):
    """Rankine stream function ``V*``: ``(1 - rho^2)/4`` inside the unit
    disk, ``ln(1/rho)/2`` outside.  ``C^1`` across ``rho = 1``."""
    rho = np.asarray(y_radius, dtype=float)
    if np.any(rho < 0):
        raise DomainError("rankine: radius must be >= 0")
    with np.errstate(divide="ignore"):
        out = np.where(rho <= 1.0, 0.25 * (1.0 - rho * rho), -0.5 * np.log(np.maximum(rho, 1.0)))
    return float(out) if out.ndim == 0 else out


def patch_diameter(w, cutoff):
    """Largest distance between centres of cells where ``w > cutoff``.

    Raises
    ------
    DomainError
        If no cell exceeds ``cutoff``.
    """
    w = _check_field(w)
    if not cutoff > 0:
        raise DomainError(f"cutoff must be positive, got {cutoff!r}")
    g = w.grid
    mask = w.values > cutoff
    if not mask.any():
        raise DomainError("patch_diameter: empty support above the cutoff")
    pts = np.column_stack([g.x[mask], g.y[mask]])
    if len(pts) > 8:
        try:
            pts = pts[ConvexHull(pts).vertices]
        except Exception:  # degenerate (collinear) sets
            pass
    diff = pts[:, None, :] - pts[None, :, :]
    return float(np.sqrt(np.max(np.sum(diff * diff, axis=-1))))


PROBE_STEP = 0.05
PROBE_EXTENT = 2.0


def probe_lattice(step=PROBE_STEP, extent=PROBE_EXTENT):
    """Square lattice of rescaled points ``y`` covering ``[-extent, extent]^2``."""
    n = int(round(extent / step))
    axis = np.arange(-n, n + 1) * step
    return np.meshgrid(axis, axis, indexing="ij")


def rescaled_profiles(state, center=None):
    """Distance of the rescaled core from the Rankine limit.

    ``V(y) = pi (Phi - mu)(X + eps y)`` (with ``mu`` from
    :func:`subcell_multiplier`) and ``zeta(y) = w(X + eps y)/lam``
    are sampled on a square lattice of step 0.05 over ``|y_i| <= 2``.

    Returns
    -------
    zeta_error : float
        ``1 - (lattice quadrature of zeta over |y| <= 1.1) / pi``.
    v_sup_error : float
        ``max |V(y) - V*(|y|)|`` over lattice points with ``|y| <= 2``.
    probe_outside : bool
        Whether some probe point fell outside the disk (errors are then
        computed from the clamped samples and should not be trusted).
    """
    grid = state.grid
    eps = state.epsilon
    if center is None:
        center = moment_center(state.w)
    y1, y2 = probe_lattice()
    rho = np.hypot(y1, y2)
    px = center[0] + eps * y1
    py = center[1] + eps * y2
    outside = bool(np.any(np.hypot(px, py) >= 1.0))

    psi = state.phi.values - subcell_multiplier(state)
    disk = rho <= PROBE_EXTENT
    v = math.pi * sample_values(grid, psi, px[disk], py[disk])
    v_sup = float(np.max(np.abs(v - rankine(rho[disk]))))

    core = rho <= 1.1
    zeta = sample_values(grid, state.w.values, px[core], py[core]) / state.lam
    zeta_mass = float(np.sum(zeta)) * PROBE_STEP**2
    return 1.0 - zeta_mass / math.pi, v_sup, outside


def scaling_fit(records):
    """Least-squares slopes of energy and ``mu`` against ``ln(1/epsilon)``.

    Raises
    ------
    DomainError
        With fewer than three records or repeated ``lam``.
    """
    records = list(records)
    lams = {r.lam for r in records}
    if len(records) < 3 or len(lams) != len(records):
        raise DomainError("scaling_fit needs at least 3 records with distinct lambda")
    t = np.array([math.log(1.0 / r.epsilon) for r in records])
    slope_e = np.polyfit(t, [r.energy for r in records], 1)[0]
    slope_mu = np.polyfit(t, [r.mu for r in records], 1)[0]
    return float(slope_e), float(slope_mu)


def _fast_even(n):
    n = scipy.fft.next_fast_len(max(int(n), 16))
    while n % 2:
        n = scipy.fft.next_fast_len(n + 1)
    return n


def cells_per_core(lam):
    """Default radial cells per core radius: 8 at ``lam = 100``, growing as
    ``lam^0.1`` so that discretization error shrinks along a sweep."""
    return 8.0 * max(1.0, lam / 100.0) ** 0.1


def sweep_grid(params, cells_per_eps=None, half_width=4.0, min_theta=256):
    """Polar grid resolving the core of a ``lam``-patch near its expected site.

    Radial cells of size ``epsilon / cells_per_eps`` cover
    ``r* +- half_width * epsilon`` (default count :func:`cells_per_core`) around the landscape minimizer radius
    ``r*`` and stretch geometrically elsewhere; the angular count makes
    ``r* dtheta`` match the fine radial size.
    """
    if cells_per_eps is None:
        cells_per_eps = cells_per_core(params.lam)
    eps = params.epsilon
    r_star = kr_minimizer_radius(params.omega) if params.omega > 0 else 0.0
    h = eps / cells_per_eps
    n_theta = _fast_even(max(min_theta, 2.0 * math.pi * r_star / h))
    return PolarGrid.clustered(n_theta, r_star, half_width * eps, h, h_max=max(0.02, h))


def local_cell_width(grid, point):
    """``max(dr, r dtheta)`` of the cell containing ``point``."""
    r = float(np.hypot(*point))
    i = int(np.clip(np.searchsorted(grid.r_edges, r) - 1, 0, grid.n_r - 1))
    return max(float(grid.dr[i]), float(grid.r_edges[i + 1] * grid.dtheta))


def measure(state):
    """Build the :class:`SweepRecord` of a solved state."""
    center = moment_center(state.w)
    diam = patch_diameter(state.w, 0.5 * state.lam)
    zeta_err, v_err, outside = rescaled_profiles(state, center)
    return SweepRecord(
        lam=state.lam,
        epsilon=state.epsilon,
        energy=state.energy,
        mu=state.mu,
        core_energy=kinetic_core_energy(state),
        center_radius=float(np.hypot(*center)),
        diameter=diam,
        diam_over_eps=diam / state.epsilon,
        v_sup_error=v_err,
        zeta_error=zeta_err,
        cell_width=local_cell_width(state.grid, center),
        iterations=state.iterations,
        converged=state.converged,
        probe_outside=outside,
    )


def solve_and_measure(omega, lam, grid=None, tol=1e-10, max_iter=500, cells_per_eps=None):
    """Solve one sweep entry from the default initial guess and measure it."""
    params = RotationParams(omega, lam)
    if grid is None:
        grid = sweep_grid(params, cells_per_eps)
    state = solve_patch(params, default_initial_guess(grid, params), tol=tol, max_iter=max_iter)
    return measure(state), state


def _sweep_entry(args):
    return solve_and_measure(*args)[0]


def worker_count(default=1):
    """Worker cap from ``VPL_THREADS`` (a positive integer), else ``default``."""
    raw = os.environ.get("VPL_THREADS")
    if raw is None or raw.strip() == "":
        return default
    try:
        n = int(raw)
    except ValueError:
        raise ContractViolation(f"VPL_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ContractViolation(f"VPL_THREADS must be a positive integer, got {raw!r}")
    return n


def run_sweep(omega, lambdas=SWEEP_LAMBDAS, grid=None, tol=1e-10, max_iter=500, cells_per_eps=None, workers=None):
    """Solve and measure every ``lam``; records come back in increasing ``lam``.

    ``grid=None`` picks :func:`sweep_grid` per ``lam``; a fixed grid is used
    as is for all entries.  Entries are independent and run on up to
    ``workers`` processes (default from ``VPL_THREADS``, else 1).
    """
    lambdas = sorted(check_lambda(lam) for lam in lambdas)
    if len(set(lambdas)) != len(lambdas):
        raise DomainError("run_sweep: repeated lambda values")
    jobs = [(omega, lam, grid, tol, max_iter, cells_per_eps) for lam in lambdas]
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(jobs) == 1:
        return [_sweep_entry(j) for j in jobs]
    with concurrent.futures.ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(_sweep_entry, jobs))
