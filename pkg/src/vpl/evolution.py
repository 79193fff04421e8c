"""Time evolution of the vorticity equation in the unit disk.

The transport ``w_t + v . grad w = 0`` with ``v = grad^perp G w`` is
integrated by a semi-Lagrangian scheme: characteristics are traced back
over one step with the implicit midpoint rule, using the velocity
extrapolated to the half step, and the old field is interpolated
bilinearly at the foot points.  Conserved quantities are logged in a
ledger so that their drift can be read off directly.
"""
import logging
import math
import os
import tempfile
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from ._validation import check_positive_int
from .exceptions import CFLError, ContractViolation, DomainError, NonFiniteFieldError
from .grid import ScalarField, _check_field, dump_field, lp_norm, rotate_field, sample_values
from .poisson import solve_fast_values, velocity_values

logger = logging.getLogger(__name__)

#: Largest Courant number accepted by :func:`step`.
MAX_COURANT = 0.5

LEDGER_COLUMNS = ("time", "mass", "J", "E", "lp15", "lp2", "lp4", "dist_p")

PERTURBATION_KINDS = ("patch-shift", "amplitude-noise", "smooth-bump")


class LedgerRow(NamedTuple):
    time: float
    mass: float
    J: float
    E: float
    lp15: float
    lp2: float
    lp4: float
    dist_p: float = float("nan")


@dataclass(frozen=True)
class EvolutionState:
    """Vorticity at ``time`` plus the ledger of sampled invariants.

    ``velocity`` caches the Cartesian velocity of ``w`` and ``previous``
    the one of the preceding step (with its step size), used to
    extrapolate the velocity to the half step.
    """

    w: ScalarField
    time: float = 0.0
    ledger: tuple = ()
    velocity: tuple = field(default=None, repr=False, compare=False)
    previous: tuple = field(default=None, repr=False, compare=False)

    @property
    def grid(self):
        return self.w.grid


def _cartesian_velocity(grid, w_values):
    psi = solve_fast_values(grid, w_values)
    u_r, u_t = velocity_values(grid, psi, 0.0)
    c, s = np.cos(grid.theta)[None, :], np.sin(grid.theta)[None, :]
    return c * u_r - s * u_t, s * u_r + c * u_t, psi


def cell_widths(grid):
    """Per-cell size ``max(dr, r dtheta)`` (outer radius of the cell)."""
    return np.maximum(grid.dr, grid.r_edges[1:] * grid.dtheta)[:, None]


def courant_number(grid, u_x, u_y, dt):
    """``dt * max(|v| / cell width)`` over the grid."""
    return dt * float(np.max(np.hypot(u_x, u_y) / cell_widths(grid)))


def stable_dt(grid, u_x, u_y, cfl):
    """Largest step with Courant number ``cfl`` (``inf`` for a fluid at rest)."""
    rate = float(np.max(np.hypot(u_x, u_y) / cell_widths(grid)))
    return math.inf if rate == 0.0 else cfl / rate


def invariants(grid, w_values, psi=None):
    """Mass, angular impulse ``J``, kinetic energy ``E`` and ``L^p`` norms."""
    if psi is None:
        psi = solve_fast_values(grid, w_values)
    wts = grid.weights
    a = np.abs(w_values)
    return (
        float(np.sum(w_values * wts)),
        float(np.sum(grid.r2_mean[:, None] * w_values * wts)),
        0.5 * float(np.sum(psi * w_values * wts)),
        float(np.sum(a**1.5 * wts) ** (1.0 / 1.5)),
        float(np.sum(a**2 * wts) ** 0.5),
        float(np.sum(a**4 * wts) ** 0.25),
    )


def initial_state(w0):
    """Evolution state at time 0 with one ledger row."""
    w0 = _check_field(w0)
    grid = w0.grid
    u_x, u_y, psi = _cartesian_velocity(grid, w0.values)
    row = LedgerRow(0.0, *invariants(grid, w0.values, psi))
    return EvolutionState(w0, 0.0, (row,), (u_x, u_y), None)


def _active_cells(grid, w_values, reach):
    """Cells whose value can be nonzero after a step moving points by <= ``reach``."""
    support = w_values != 0.0
    if not support.any():
        return support
    margin = reach + float(cell_widths(grid).max())
    xs, ys = grid.x[support], grid.y[support]
    return (
        (grid.x >= xs.min() - margin)
        & (grid.x <= xs.max() + margin)
        & (grid.y >= ys.min() - margin)
        & (grid.y <= ys.max() + margin)
    )


def _advect(grid, w_values, u_now, u_half, dt, iterations=3):
    """Values of ``w`` at the backward characteristic feet of every cell."""
    speed = float(np.max(np.hypot(*u_half)))
    active = _active_cells(grid, w_values, 1.5 * speed * dt)
    out = np.zeros_like(w_values)
    if not active.any():
        return out
    x, y = grid.x[active], grid.y[active]
    fx = x - dt * u_now[0][active]
    fy = y - dt * u_now[1][active]
    for _ in range(iterations):
        mx, my = 0.5 * (x + fx), 0.5 * (y + fy)
        fx = x - dt * sample_values(grid, u_half[0], mx, my)
        fy = y - dt * sample_values(grid, u_half[1], mx, my)
    # the flow is tangent to the circle; clamp overshoot back onto it
    r = np.hypot(fx, fy)
    over = r > 1.0
    fx[over] /= r[over]
    fy[over] /= r[over]
    out[active] = sample_values(grid, w_values, fx, fy)
    return out


def step(state, dt, record=True):
    """Advance ``state`` by ``dt``.

    Raises
    ------
    CFLError
        If ``dt`` is not positive or its Courant number exceeds 0.5.
    """
    if not isinstance(state, EvolutionState):
        raise ContractViolation("step needs an EvolutionState (see initial_state)")
    if not (dt > 0 and math.isfinite(dt)):
        raise CFLError(f"time step must be positive and finite, got {dt!r}")
    grid = state.grid
    u_now = state.velocity
    if u_now is None:
        u_now = _cartesian_velocity(grid, state.w.values)[:2]
    courant = courant_number(grid, u_now[0], u_now[1], dt)
    if courant > MAX_COURANT * (1.0 + 1e-12):
        raise CFLError(f"Courant number {courant:.4g} exceeds {MAX_COURANT} (dt={dt!r})")
    if state.previous is None:
        u_half = u_now
    else:
        u_prev, dt_prev = state.previous
        k = 0.5 * dt / dt_prev
        u_half = tuple((1.0 + k) * a - k * b for a, b in zip(u_now, u_prev))

    w_new = _advect(grid, state.w.values, u_now, u_half, dt)
    time = state.time + dt
    if not np.all(np.isfinite(w_new)):
        raise NonFiniteFieldError(f"non-finite vorticity at t={time!r}")
    u_x, u_y, psi = _cartesian_velocity(grid, w_new)
    ledger = state.ledger
    if record:
        ledger = ledger + (LedgerRow(time, *invariants(grid, w_new, psi)),)
    return EvolutionState(ScalarField(grid, w_new), time, ledger, (u_x, u_y), (u_now, dt))


def _dump_on_failure(state, dump_dir):
    directory = dump_dir or tempfile.gettempdir()
    path = os.path.join(directory, f"vpl-nonfinite-t{state.time:.6g}.field")
    try:
        dump_field(state.w, path)
    except OSError:
        return None
    return path


def evolve(w0, t_final, cfl=0.5, n_samples=100, observer=None, dump_dir=None):
    """Integrate from ``w0`` (or an :class:`EvolutionState`) to ``t_final``.

    Each step uses ``dt = cfl * min(cell width / speed)`` from the current
    velocity, shortened to land on the sampling times ``k t_final /
    n_samples`` where a ledger row is appended.  ``observer(state)``, if
    given, returns a value stored in the ``dist_p`` column.

    Raises
    ------
    NonFiniteFieldError
        If the field stops being finite; the last finite field is dumped
        (to ``dump_dir`` or the temp directory) and named in the error.
    """
    if not (t_final > 0 and math.isfinite(t_final)):
        raise ContractViolation(f"t_final must be positive, got {t_final!r}")
    if not 0 < cfl <= MAX_COURANT:
        raise ContractViolation(f"cfl must lie in (0, {MAX_COURANT}], got {cfl!r}")
    n_samples = check_positive_int(n_samples, "n_samples")
    state = w0 if isinstance(w0, EvolutionState) else initial_state(w0)
    t0 = state.time
    if observer is not None:
        state = _observe(state, observer)
    grid = state.grid
    n_steps = 0
    for k in range(1, n_samples + 1):
        target = t0 + t_final * k / n_samples
        while state.time < target:
            u_x, u_y = state.velocity
            dt = min(stable_dt(grid, u_x, u_y, cfl), target - state.time)
            if target - (state.time + dt) < 1e-12 * t_final:
                dt = target - state.time
            last = target - (state.time + dt) <= 0.0
            try:
                state = step(state, dt, record=last)
            except NonFiniteFieldError as exc:
                path = _dump_on_failure(state, dump_dir)
                raise NonFiniteFieldError(f"{exc} (last finite field: {path})", path) from None
            n_steps += 1
            if last:
                state = replace(state, time=target)
        if observer is not None:
            state = _observe(state, observer)
    logger.info("evolve: %d steps to t=%.6g", n_steps, state.time)
    return state


def _observe(state, observer):
    row = state.ledger[-1]._replace(dist_p=float(observer(state)))
    return replace(state, ledger=state.ledger[:-1] + (row,))


def dist_to_orbit(w, reference, p=2.0, n_angles=256):
    """``min_k || w - R_k w_ref ||_p`` over rotations by ``2 pi k / n_angles``.

    ``reference`` is a :class:`PatchState` or a field.  Rotations by whole
    angular cells are exact index shifts; others interpolate linearly.
    """
    w = _check_field(w)
    ref = reference.w if hasattr(reference, "w") else _check_field(reference)
    if ref.grid != w.grid:
        raise ContractViolation("dist_to_orbit: fields live on different grids")
    if not p >= 1:
        raise DomainError(f"p must be >= 1, got {p!r}")
    n_angles = check_positive_int(n_angles, "n_angles", minimum=8)
    grid = w.grid
    rows = np.flatnonzero(np.any(w.values != 0, axis=1) | np.any(ref.values != 0, axis=1))
    if rows.size == 0:
        return 0.0
    sub_w = w.values[rows]
    wts = grid.ring_area[rows][:, None]
    best = math.inf
    for k in range(n_angles):
        rotated = rotate_field(ref, 2.0 * math.pi * k / n_angles).values[rows]
        d = float(np.sum(np.abs(sub_w - rotated) ** p * wts))
        best = min(best, d)
    return best ** (1.0 / p)


@dataclass(frozen=True)
class PerturbationSpec:
    """Perturbation of a maximizer, with relative ``L^p`` size ``magnitude``.

    ``kind`` is one of ``patch-shift`` (translate the patch),
    ``amplitude-noise`` (random cellwise noise on and around the patch) or
    ``smooth-bump`` (add a Gaussian blob of vorticity next to the patch).
    """

    kind: str = "amplitude-noise"
    magnitude: float = 0.05
    p: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in PERTURBATION_KINDS:
            raise ContractViolation(f"kind must be one of {PERTURBATION_KINDS}, got {self.kind!r}")
        if not (self.magnitude >= 0 and math.isfinite(self.magnitude)):
            raise ContractViolation(f"magnitude must be >= 0, got {self.magnitude!r}")
        if not self.p >= 1.5:
            raise ContractViolation(f"p must be >= 3/2, got {self.p!r}")


def project_admissible(values, grid, lam, max_bisect=200):
    """Nearest-in-spirit member of ``K_lam``: clip to ``[0, lam]``, then
    rescale by the factor ``c`` with ``int min(lam, c w) = 1``."""
    v = np.clip(values, 0.0, lam)
    wts = grid.weights
    mass = float(np.sum(v * wts))
    if mass <= 0.0:
        raise DomainError("project_admissible: perturbed field has no positive part")

    def mass_at(c):
        return float(np.sum(np.minimum(lam, c * v) * wts))

    lo, hi = 0.0, 1.0 / mass
    while mass_at(hi) < 1.0:
        lo, hi = hi, 2.0 * hi
        if hi > 1e12:
            raise DomainError("project_admissible: cannot reach unit mass under the bound")
    for _ in range(max_bisect):
        mid = 0.5 * (lo + hi)
        if mass_at(mid) < 1.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-16 * hi:
            break
    out = np.minimum(lam, hi * v)
    # remove the last rounding-level mass error on the unsaturated cells
    free = (out > 0) & (out < lam)
    excess = float(np.sum(out * wts)) - 1.0
    free_mass = float(np.sum(out[free] * np.broadcast_to(wts, out.shape)[free]))
    if free_mass > 0:
        out[free] *= 1.0 - excess / free_mass
    return out


def _raw_perturbation(reference, spec, rng, scale):
    grid = reference.grid
    w = reference.w.values
    lam = reference.lam
    wa = w * grid.weights
    cx, cy = float(np.sum(wa * grid.x_centroid)), float(np.sum(wa * grid.y_centroid))
    eps = reference.epsilon
    if spec.kind == "patch-shift":
        ang = rng.uniform(0.0, 2.0 * math.pi)
        # bilinear shift keeps the distance continuous in ``scale``
        sx, sy = scale * eps * math.cos(ang), scale * eps * math.sin(ang)
        return sample_values(grid, w, grid.x - sx, grid.y - sy)
    if spec.kind == "amplitude-noise":
        near = np.hypot(grid.x - cx, grid.y - cy) <= 1.5 * eps
        noise = rng.standard_normal(grid.shape) * near
        return w + scale * lam * noise
    ang = rng.uniform(0.0, 2.0 * math.pi)
    bx, by = cx + 1.5 * eps * math.cos(ang), cy + 1.5 * eps * math.sin(ang)
    bump = np.exp(-((grid.x - bx) ** 2 + (grid.y - by) ** 2) / (0.5 * eps) ** 2)
    return w + scale * lam * bump


def perturb(reference, spec):
    """Perturbed maximizer, projected back into ``K_lam``.

    The perturbation amplitude is tuned by bisection so that the
    projected field sits at relative ``L^p`` distance ``spec.magnitude``
    from ``reference.w``.
    """
    if not isinstance(spec, PerturbationSpec):
        raise ContractViolation("perturb needs a PerturbationSpec")
    grid = reference.grid
    base = reference.w.values
    if spec.magnitude == 0.0:
        return reference.w
    norm = lp_norm(reference.w, spec.p)
    seed_seq = np.random.SeedSequence(spec.seed)

    def field_at(scale):
        rng = np.random.default_rng(seed_seq)
        return project_admissible(_raw_perturbation(reference, spec, rng, scale), grid, reference.lam)

    def rel_dist(values):
        return float(np.sum(np.abs(values - base) ** spec.p * grid.weights) ** (1.0 / spec.p)) / norm

    lo, hi = 0.0, 1e-3
    while rel_dist(field_at(hi)) < spec.magnitude:
        lo, hi = hi, 2.0 * hi
        if hi > 1e3:
            raise DomainError(f"perturb: cannot reach magnitude {spec.magnitude!r} with {spec.kind}")
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if rel_dist(field_at(mid)) < spec.magnitude:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-6 * hi:
            break
    return ScalarField(grid, field_at(hi))


def rotation_period(omega):
    if not omega > 0:
        raise DomainError("rotation period needs omega > 0")
    return 2.0 * math.pi / omega


def stability_experiment(reference, spec, n_periods=3.0, cfl=0.5, samples_per_period=20, n_angles=256):
    """Evolve a perturbed maximizer and follow its distance to the orbit.

    Returns the final :class:`EvolutionState`; its ledger carries
    ``dist_to_orbit`` in the ``dist_p`` column at every sample time.
    """
    if not n_periods > 0:
        raise ContractViolation(f"n_periods must be positive, got {n_periods!r}")
    w0 = perturb(reference, spec)
    t_final = n_periods * rotation_period(reference.omega)
    n_samples = max(1, int(round(samples_per_period * n_periods)))

    def observer(state):
        return dist_to_orbit(state.w, reference, spec.p, n_angles)

    return evolve(w0, t_final, cfl=cfl, n_samples=n_samples, observer=observer)
