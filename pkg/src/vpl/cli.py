"""Command-line entry point ``vpl``.

Exit codes
----------
0  success
2  usage error: bad flag, malformed or unknown config key, invalid value
3  domain error raised during the run
4  an iteration stopped at ``max-iter`` without converging
5  I/O failure (unreadable config, unwritable output directory)
6  numerical failure: energy decrease, CFL violation or non-finite field
7  ``greens-check`` found a residual above its tolerance

On failure one line ``vpl: error[<reason>]: <message>`` goes to stderr,
with ``<reason>`` one of ``usage``, ``domain``, ``no-convergence``,
``io``, ``numerical``, ``check-failed``.
"""
import argparse
import math
import os
import sys
import warnings

import numpy as np
from threadpoolctl import threadpool_limits

from . import io
from .diagnostics import SWEEP_COLUMNS, measure, probe_lattice, run_sweep, scaling_fit, worker_count
from .evolution import LEDGER_COLUMNS, dist_to_orbit, evolve, rotation_period, stability_experiment
from .exceptions import (
    CFLError,
    ContractViolation,
    ConvergenceWarning,
    DomainError,
    MonotonicityError,
    NonFiniteFieldError,
)
from .geometry import RotationParams, greens, regular_part, robin
from .grid import PolarGrid, dump_field, moment_center, sample_values
from .maximizer import default_initial_guess, solve_patch, subcell_multiplier

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DOMAIN = 3
EXIT_NO_CONVERGENCE = 4
EXIT_IO = 5
EXIT_NUMERICAL = 6
EXIT_CHECK_FAILED = 7

CONVERGENCE_COLUMNS = ("iteration", "energy", "mu", "patch_mass", "symmetric_difference")
GREENS_COLUMNS = ("identity", "samples", "max_residual", "tolerance", "passed")
GREENS_TOL = 1e-10
GREENS_SAMPLES = 1000

# flag -> config key; all values travel as strings and are parsed in io
FLAGS = (
    ("--omega", "omega"),
    ("--lambda", "lambda"),
    ("--grid", "grid"),
    ("--tol", "tol"),
    ("--max-iter", "max-iter"),
    ("--sweep-lambdas", "sweep-lambdas"),
    ("--periods", "periods"),
    ("--magnitude", "magnitude"),
    ("--p", "p"),
    ("--kind", "kind"),
    ("--seed", "seed"),
    ("--cfl", "cfl"),
    ("--snapshot-every", "snapshot-every"),
    ("--out", "out"),
)


class _Failure(Exception):
    def __init__(self, code, reason, message):
        super().__init__(message)
        self.code = code
        self.reason = reason


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _Failure(EXIT_USAGE, "usage", f"{self.prog}: {message}")


def build_parser():
    parser = _Parser(prog="vpl", allow_abbrev=False, description="Rotating vortex patches in the unit disk.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in io.COMMANDS:
        p = sub.add_parser(name, allow_abbrev=False)
        p.add_argument("--config", metavar="FILE", help="flat 'key = value' file")
        for flag, key in FLAGS:
            p.add_argument(flag, dest=key, metavar=key.upper().replace("-", "_"))
        p.add_argument("--svg", action="store_const", const="true", dest="svg")
        p.add_argument("--translate", action="store_const", const="true", dest="translate")
    return parser


def parse_config(argv):
    """Resolve a :class:`RunConfig` from ``argv`` (plus ``--config`` file)."""
    args = vars(build_parser().parse_args(argv))
    command = args.pop("command")
    config_path = args.pop("config")
    overrides = {k: v for k, v in args.items() if v is not None}
    try:
        entries = io.read_config_file(config_path) if config_path else {}
    except io.ConfigError as exc:
        code, reason = (EXIT_IO, "io") if exc.key == "config" else (EXIT_USAGE, "usage")
        raise _Failure(code, reason, str(exc)) from None
    try:
        return io.build_config(command, entries, overrides)
    except io.ConfigError as exc:
        raise _Failure(EXIT_USAGE, "usage", str(exc)) from None


def _out(cfg, name):
    return os.path.join(cfg.output_dir, name)


def _grid(cfg):
    return PolarGrid(*cfg.grid)


def _solve(cfg):
    params = RotationParams(cfg.omega, cfg.lam)
    grid = _grid(cfg)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        return solve_patch(params, default_initial_guess(grid, params), cfg.tol, cfg.max_iter, translate=cfg.translate)


def greens_residuals(seed=0, n=GREENS_SAMPLES):
    """Residuals of the disk Green's function identities on random points."""
    rng = np.random.default_rng(seed)

    def interior(k):
        r = np.sqrt(rng.uniform(0.0, 0.95**2, k))
        a = rng.uniform(0.0, 2.0 * math.pi, k)
        return np.column_stack([r * np.cos(a), r * np.sin(a)])

    x, y = interior(n), interior(n)
    a = rng.uniform(0.0, 2.0 * math.pi, n)
    edge = np.column_stack([np.cos(a), np.sin(a)])
    dist = np.hypot(*(x - y).T)
    free = -np.log(dist) / (2.0 * math.pi)
    return [
        ("symmetry", n, float(np.max(np.abs(greens(x, y) - greens(y, x))))),
        ("boundary", n, float(np.max(np.abs(greens(edge, y))))),
        ("regular_part", n, float(np.max(np.abs(greens(x, y) - free + regular_part(x, y))))),
        ("robin", n, float(np.max(np.abs(regular_part(x, x) - 2.0 * robin(x))))),
    ]


def _greens_check(cfg):
    rows = [(name, n, res, GREENS_TOL, res < GREENS_TOL) for name, n, res in greens_residuals(cfg.seed)]
    io.write_csv(_out(cfg, "greens_check.csv"), GREENS_COLUMNS, rows, cfg)
    print(f"{'identity':<14}{'samples':>8}  {'max_residual':<24}{'tolerance':<10}status")
    for name, n, res, tol, ok in rows:
        print(f"{name:<14}{n:>8}  {res!r:<24}{tol!r:<10}{'PASS' if ok else 'FAIL'}")
    if not all(r[-1] for r in rows):
        raise _Failure(EXIT_CHECK_FAILED, "check-failed", "a Green's identity residual exceeds 1e-10")


def radial_profile(state):
    """Rescaled distances and ``V`` values on the probe lattice around the core."""
    center = moment_center(state.w)
    y1, y2 = probe_lattice()
    rho = np.hypot(y1, y2).ravel()
    keep = rho <= 2.0
    eps = state.epsilon
    px = center[0] + eps * y1.ravel()[keep]
    py = center[1] + eps * y2.ravel()[keep]
    psi = state.phi.values - subcell_multiplier(state)
    return rho[keep], math.pi * sample_values(state.grid, psi, px, py)


def _write_svgs(cfg, state, prefix):
    io.write_text(_out(cfg, f"{prefix}_boundary.svg"), io.svg_with_config(io.contour_svg(state), cfg))
    io.write_text(_out(cfg, f"{prefix}_profile.svg"), io.svg_with_config(io.profile_svg(*radial_profile(state)), cfg))


def _run_solve(cfg):
    state = _solve(cfg)
    io.write_csv(_out(cfg, "solve_convergence.csv"), CONVERGENCE_COLUMNS, state.history, cfg)
    dump_field(state.w, _out(cfg, "solve_field.txt"))
    record = measure(state)
    io.write_csv(_out(cfg, "solve_summary.csv"), SWEEP_COLUMNS, [record.row()], cfg)
    if cfg.emit_svg:
        _write_svgs(cfg, state, "solve")
    print(
        f"energy={state.energy!r} mu={state.mu!r} iterations={state.iterations} "
        f"center_radius={record.center_radius!r} v_sup_error={record.v_sup_error!r}"
    )
    if not state.converged:
        raise _Failure(EXIT_NO_CONVERGENCE, "no-convergence", f"no convergence within {cfg.max_iter} iterations")


def _run_sweep(cfg):
    grid = None if cfg.grid is None else _grid(cfg)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        records = run_sweep(cfg.omega, cfg.sweep_lambdas, grid, cfg.tol, cfg.max_iter)
    io.write_csv(_out(cfg, "sweep.csv"), SWEEP_COLUMNS, [r.row() for r in records], cfg)
    for r in records:
        print(" ".join(f"{c}={v!r}" for c, v in zip(SWEEP_COLUMNS, r.row())))
    if len(records) >= 3:
        slope_e, slope_mu = scaling_fit(records)
        print(f"slope_energy={slope_e!r} slope_mu={slope_mu!r}")
    if not all(r.converged for r in records):
        raise _Failure(EXIT_NO_CONVERGENCE, "no-convergence", "some sweep entries did not converge")


def _ledger_rows(state):
    return [tuple(row) for row in state.ledger]


def _run_evolve(cfg):
    reference = _solve(cfg)
    t_final = cfg.n_periods * rotation_period(cfg.omega)
    n_samples = max(1, int(round(20 * cfg.n_periods)))

    count = [0]

    def observer(st):
        if cfg.snapshot_every and count[0] % cfg.snapshot_every == 0:
            dump_field(st.w, _out(cfg, f"evolve_snapshot_{count[0]:05d}.txt"))
        count[0] += 1
        return dist_to_orbit(st.w, reference, cfg.p)

    state = evolve(reference.w, t_final, cfg.cfl, n_samples, observer=observer, dump_dir=cfg.output_dir)
    io.write_csv(_out(cfg, "evolve_ledger.csv"), LEDGER_COLUMNS, _ledger_rows(state), cfg)
    dump_field(state.w, _out(cfg, "evolve_final.txt"))
    last = state.ledger[-1]
    print(f"time={last.time!r} mass={last.mass!r} dist_p={last.dist_p!r}")


def _run_stability(cfg):
    reference = _solve(cfg)
    state = stability_experiment(reference, cfg.perturbation, cfg.n_periods, cfg.cfl)
    io.write_csv(_out(cfg, "stability_ledger.csv"), LEDGER_COLUMNS, _ledger_rows(state), cfg)
    dump_field(state.w, _out(cfg, "stability_final.txt"))
    first, last = state.ledger[0], state.ledger[-1]
    print(f"dist_p_initial={first.dist_p!r} dist_p_final={last.dist_p!r} dist_p_max={max(r.dist_p for r in state.ledger)!r}")


RUNNERS = {
    "greens-check": _greens_check,
    "solve": _run_solve,
    "sweep": _run_sweep,
    "evolve": _run_evolve,
    "stability": _run_stability,
}


def run(cfg):
    """Execute a resolved config; returns the exit code."""
    try:
        threads = worker_count()
    except ContractViolation as exc:
        raise _Failure(EXIT_USAGE, "usage", str(exc)) from None
    try:
        io.ensure_dir(cfg.output_dir)
    except OSError as exc:
        raise _Failure(EXIT_IO, "io", f"cannot create {cfg.output_dir}: {exc.strerror}") from None
    try:
        with threadpool_limits(limits=threads):
            RUNNERS[cfg.command](cfg)
    except OSError as exc:
        raise _Failure(EXIT_IO, "io", str(exc)) from None
    except (MonotonicityError, CFLError, NonFiniteFieldError) as exc:
        raise _Failure(EXIT_NUMERICAL, "numerical", str(exc)) from None
    except (DomainError, ContractViolation) as exc:
        raise _Failure(EXIT_DOMAIN, "domain", str(exc)) from None
    return EXIT_OK


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        return run(parse_config(argv))
    except _Failure as exc:
        print(f"vpl: error[{exc.reason}]: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
