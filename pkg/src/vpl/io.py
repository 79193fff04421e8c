"""Run configuration, CSV writers and SVG plots."""
import math
import os
from dataclasses import dataclass, fields, replace

import numpy as np
from skimage.measure import find_contours

from ._validation import check_lambda, check_omega
from .diagnostics import SWEEP_LAMBDAS, rankine
from .evolution import PERTURBATION_KINDS, PerturbationSpec
from .exceptions import ContractViolation, DomainError

COMMANDS = ("greens-check", "solve", "sweep", "evolve", "stability")


class ConfigError(ValueError):
    """Malformed or unknown configuration entry; ``key`` names the culprit."""

    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class RunConfig:
    """Resolved settings of one CLI run.

    Defaults: ``omega = 1/pi``, ``lam = 1e3``, grid ``256x512`` (``None``
    means per-entry refined grids, the sweep default), ``tol = 1e-10``,
    ``max_iter = 500``, ``periods = None`` (1 for ``evolve``, 3 for
    ``stability``), perturbation ``amplitude-noise`` of relative size 0.05
    in ``L^2``, ``seed = 0``, ``cfl = 0.5``, output in the current
    directory, no SVG.  ``snapshot_every = k > 0`` dumps the evolving field
at every ``k``-th ledger sample (the final field is always dumped).
    """

    command: str = "solve"
    omega: float = 1.0 / math.pi
    lam: float = 1e3
    grid: tuple = (256, 512)
    tol: float = 1e-10
    max_iter: int = 500
    sweep_lambdas: tuple = SWEEP_LAMBDAS
    periods: float = None
    magnitude: float = 0.05
    p: float = 2.0
    kind: str = "amplitude-noise"
    seed: int = 0
    cfl: float = 0.5
    snapshot_every: int = 0
    translate: bool = False
    output_dir: str = "."
    emit_svg: bool = False

    @property
    def perturbation(self):
        return PerturbationSpec(self.kind, self.magnitude, self.p, self.seed)

    @property
    def n_periods(self):
        if self.periods is not None:
            return self.periods
        return 3.0 if self.command == "stability" else 1.0

    def describe(self):
        """One-line ``key=value`` rendering of every field."""
        parts = []
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "grid":
                value = "auto" if value is None else f"{value[0]}x{value[1]}"
            elif f.name == "sweep_lambdas":
                value = ",".join(repr(float(v)) for v in value)
            elif isinstance(value, float):
                value = repr(value)
            parts.append(f"{f.name}={value}")
        return " ".join(parts)


def _parse_grid(text):
    if text.strip().lower() == "auto":
        return None
    try:
        n_r, n_theta = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise ValueError(f"expected NRxNT (e.g. 256x512), got {text!r}") from None
    if n_r < 8 or n_theta < 16 or n_theta % 2:
        raise ValueError(f"need NR >= 8 and an even NT >= 16, got {text!r}")
    return (n_r, n_theta)


def _parse_bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _parse_lambdas(text):
    vals = tuple(float(v) for v in text.replace(";", ",").split(",") if v.strip())
    if len(vals) < 1:
        raise ValueError("empty list")
    for v in vals:
        check_lambda(v)
    return vals


def _parse_kind(text):
    if text not in PERTURBATION_KINDS:
        raise ValueError(f"expected one of {', '.join(PERTURBATION_KINDS)}, got {text!r}")
    return text


def _positive(cast):
    def parse(text):
        v = cast(text)
        if not v > 0:
            raise ValueError(f"must be positive, got {text!r}")
        return v

    return parse


def _non_negative_int(text):
    v = int(text)
    if v < 0:
        raise ValueError(f"must be >= 0, got {text!r}")
    return v


def _parse_omega(text):
    return check_omega(float(text), allow_zero=True)


def _parse_lambda(text):
    return check_lambda(float(text))


# config key -> (RunConfig field, parser)
KEYS = {
    "omega": ("omega", _parse_omega),
    "lambda": ("lam", _parse_lambda),
    "grid": ("grid", _parse_grid),
    "tol": ("tol", _positive(float)),
    "max-iter": ("max_iter", _positive(int)),
    "sweep-lambdas": ("sweep_lambdas", _parse_lambdas),
    "periods": ("periods", _positive(float)),
    "magnitude": ("magnitude", float),
    "p": ("p", float),
    "kind": ("kind", _parse_kind),
    "seed": ("seed", int),
    "cfl": ("cfl", _positive(float)),
    "snapshot-every": ("snapshot_every", _non_negative_int),
    "translate": ("translate", _parse_bool),
    "out": ("output_dir", str),
    "svg": ("emit_svg", _parse_bool),
}


def canonical_key(key):
    return key.strip().lower().replace("_", "-")


def read_config_file(path):
    """Parse a flat ``key = value`` file (``#`` starts a comment)."""
    entries = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
    for number, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {number}", f"expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        key = canonical_key(key)
        if key not in KEYS:
            raise ConfigError(key, "unknown configuration key")
        entries[key] = value
    return entries


def build_config(command, file_entries=None, overrides=None):
    """Defaults, then config-file entries, then CLI ``overrides``.

    Values are strings from either source; each is parsed and validated
    before anything runs.
    """
    if command not in COMMANDS:
        raise ConfigError("command", f"unknown command {command!r}")
    merged = dict(file_entries or {})
    for key, value in (overrides or {}).items():
        key = canonical_key(key)
        if key not in KEYS:
            raise ConfigError(key, "unknown configuration key")
        merged[key] = value
    updates = {"command": command}
    if command == "sweep" and "grid" not in merged:
        updates["grid"] = None
    for key, value in merged.items():
        name, parse = KEYS[key]
        try:
            updates[name] = parse(value) if isinstance(value, str) else value
        except (ValueError, DomainError, ContractViolation) as exc:
            raise ConfigError(key, str(exc)) from None
    cfg = replace(RunConfig(), **updates)
    try:
        cfg.perturbation
    except ContractViolation as exc:
        raise ConfigError("magnitude/p/kind", str(exc)) from None
    if not 0 < cfg.cfl <= 0.5:
        raise ConfigError("cfl", f"must lie in (0, 0.5], got {cfg.cfl!r}")
    return cfg


def format_number(value):
    """Shortest round-trip decimal (``repr``), integers without a point;
    strings pass through."""
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def write_csv(path, header, rows, config):
    """CSV whose first line is ``# config: ...`` with the resolved config."""
    lines = [f"# config: {config.describe()}", ",".join(header)]
    for row in rows:
        lines.append(",".join(format_number(v) for v in row))
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def _svg_number(v):
    return f"{round(float(v), 6):.6f}"


def _svg_document(width, height, body):
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">\n' + "\n".join(body) + "\n</svg>\n"
    )


def patch_contours(state):
    """Polylines (arrays of Cartesian points) of ``{Phi = mu}``."""
    grid = state.grid
    psi = state.phi.values - state.mu
    # close the angular direction by repeating the first column
    wrapped = np.concatenate([psi, psi[:, :1]], axis=1)
    theta = np.concatenate([grid.theta, [grid.theta[0] + 2 * math.pi]])
    out = []
    for c in find_contours(wrapped, 0.0):
        r = np.interp(c[:, 0], np.arange(grid.n_r), grid.r)
        th = np.interp(c[:, 1], np.arange(theta.size), theta)
        out.append(np.column_stack([r * np.cos(th), r * np.sin(th)]))
    return out


def contour_svg(state, size=400):
    """SVG of the unit circle and the patch boundary, zoomed on the patch."""
    lines = patch_contours(state)
    pts = np.concatenate(lines) if lines else np.zeros((1, 2))
    cx, cy = pts.mean(axis=0)
    half = max(3.0 * state.epsilon, 0.6 * float(np.ptp(pts, axis=0).max()))
    scale = size / (2 * half)

    def to_px(p):
        return (p[:, 0] - cx + half) * scale, (half - (p[:, 1] - cy)) * scale

    body = [f'<rect width="{size}" height="{size}" fill="white"/>']
    circle = np.column_stack([np.cos(np.linspace(0, 2 * math.pi, 721)), np.sin(np.linspace(0, 2 * math.pi, 721))])
    for poly, style in [(circle, 'stroke="gray"')] + [(ln, 'stroke="black"') for ln in lines]:
        x, y = to_px(poly)
        d = "M" + " L".join(f"{_svg_number(a)},{_svg_number(b)}" for a, b in zip(x, y))
        body.append(f'<path d="{d}" fill="none" {style} stroke-width="1"/>')
    return _svg_document(size, size, body)


def profile_svg(rho, v_measured, size=(480, 320)):
    """SVG comparing a measured radial profile with the Rankine profile."""
    w, h = size
    rho = np.asarray(rho, dtype=float)
    order = np.argsort(rho)
    rho, v_measured = rho[order], np.asarray(v_measured, dtype=float)[order]
    grid_rho = np.linspace(0.0, float(rho.max()), 201)
    v_ref = rankine(grid_rho)
    lo = min(float(v_ref.min()), float(v_measured.min()))
    hi = max(float(v_ref.max()), float(v_measured.max()))

    def px(x, y):
        return x / grid_rho[-1] * (w - 40) + 20, h - 20 - (y - lo) / (hi - lo) * (h - 40)

    body = [f'<rect width="{w}" height="{h}" fill="white"/>']
    x, y = px(grid_rho, v_ref)
    d = "M" + " L".join(f"{_svg_number(a)},{_svg_number(b)}" for a, b in zip(x, y))
    body.append(f'<path d="{d}" fill="none" stroke="black" stroke-width="1"/>')
    x, y = px(rho, v_measured)
    for a, b in zip(x, y):
        body.append(f'<circle cx="{_svg_number(a)}" cy="{_svg_number(b)}" r="1.5" fill="red"/>')
    return _svg_document(w, h, body)


def svg_with_config(svg, config):
    """Prefix an SVG document with an XML comment holding the resolved config."""
    note = config.describe().replace("--", "- -")
    return f"<!-- config: {note} -->\n{svg}"


def write_text(path, text):
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(text)
    return path


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path
