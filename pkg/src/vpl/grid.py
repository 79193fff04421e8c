"""Cell-centred polar discretization of the unit disk and fields on it.

The grid stores ``n_r`` radial cells bounded by ``r_edges`` (``0 = r_0 <
... < r_n = 1``, not necessarily uniform) and ``n_theta`` uniform angular
cells.  Cell centres sit at radial midpoints and at angles
``(j + 1/2) * dtheta``; there is no node at the origin.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_positive_int, check_values
from .exceptions import ContractViolation, DomainError

FIELD_HEADER = "polar-field v1"


class PolarGrid:
    """Polar cell-centred grid on the unit disk.

    Parameters
    ----------
    n_r : int
        Number of radial cells (>= 8). Ignored when ``r_edges`` is given.
    n_theta : int
        Number of angular cells (even, >= 16).
    r_edges : array-like, optional
        Radial cell boundaries from 0 to 1. Uniform spacing when omitted.
    """

    def __init__(self, n_r=256, n_theta=512, r_edges=None):
        if r_edges is None:
            n_r = check_positive_int(n_r, "n_r", minimum=8)
            r_edges = np.linspace(0.0, 1.0, n_r + 1)
        else:
            r_edges = np.array(r_edges, dtype=float)
            if r_edges.ndim != 1 or r_edges.size < 9:
                raise ContractViolation("r_edges must be 1-D with at least 9 entries")
            if r_edges[0] != 0.0 or r_edges[-1] != 1.0 or np.any(np.diff(r_edges) <= 0):
                raise ContractViolation("r_edges must increase strictly from 0 to 1")
        n_theta = check_positive_int(n_theta, "n_theta", minimum=16)
        if n_theta % 2:
            raise ContractViolation(f"n_theta must be even, got {n_theta}")

        self.r_edges = r_edges
        self.r_edges.setflags(write=False)
        self.n_r = r_edges.size - 1
        self.n_theta = n_theta
        self.dr = np.diff(r_edges)
        self.r = 0.5 * (r_edges[1:] + r_edges[:-1])
        self.dtheta = 2.0 * math.pi / n_theta
        self.theta = (np.arange(n_theta) + 0.5) * self.dtheta

        lo, hi = r_edges[:-1], r_edges[1:]
        self.ring_area = 0.5 * (hi**2 - lo**2) * self.dtheta
        # cell averages of |x|^2 and of the radius (centroid); make moments
        # exact for piecewise-constant fields
        self.r2_mean = 0.5 * (hi**2 + lo**2)
        r_centroid = (2.0 / 3.0) * (hi**3 - lo**3) / (hi**2 - lo**2)
        half = 0.5 * self.dtheta
        sinc = math.sin(half) / half
        self.x_centroid = np.outer(r_centroid * sinc, np.cos(self.theta))
        self.y_centroid = np.outer(r_centroid * sinc, np.sin(self.theta))
        self.x = np.outer(self.r, np.cos(self.theta))
        self.y = np.outer(self.r, np.sin(self.theta))
        self._cache = {}

    @classmethod
    def clustered(cls, n_theta, center, half_width, h_fine, h_max=0.02, growth=1.08):
        """Grid with uniform fine radial cells of size ``h_fine`` on
        ``[center - half_width, center + half_width]`` and geometrically
        stretched cells (ratio ``growth``, capped at ``h_max``) elsewhere."""
        if not (h_fine > 0 and half_width > 0 and growth >= 1.0 and h_max >= h_fine):
            raise ContractViolation("clustered: need h_fine > 0, half_width > 0, growth >= 1")
        a = max(0.0, center - half_width)
        b = min(1.0, center + half_width)
        n_fine = max(1, int(round((b - a) / h_fine)))
        fine = np.linspace(a, b, n_fine + 1)

        def outward(start, stop):
            # edges from start towards stop (exclusive of start)
            out = []
            pos, h = start, h_fine
            direction = 1.0 if stop > start else -1.0
            while abs(stop - pos) > 1e-15:
                h = min(h * growth, h_max)
                remaining = abs(stop - pos)
                if remaining < 1.5 * h:
                    out.append(stop)
                    break
                pos = pos + direction * h
                out.append(pos)
            return out

        inner = outward(a, 0.0)[::-1] if a > 0 else []
        outer = outward(b, 1.0) if b < 1.0 else []
        edges = np.concatenate([inner, fine, outer])
        edges[0], edges[-1] = 0.0, 1.0
        return cls(n_theta=n_theta, r_edges=edges)

    @property
    def shape(self):
        return (self.n_r, self.n_theta)

    @property
    def size(self):
        return self.n_r * self.n_theta

    @property
    def weights(self):
        """Per-cell quadrature weights, broadcastable to :attr:`shape`."""
        return self.ring_area[:, None]

    @property
    def cell_width(self):
        """Smallest radial cell width."""
        return float(self.dr.min())

    def key(self):
        return (self.n_theta, self.r_edges.tobytes())

    def __eq__(self, other):
        return isinstance(other, PolarGrid) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        kind = "uniform" if np.allclose(self.dr, self.dr[0]) else "clustered"
        return f"PolarGrid(n_r={self.n_r}, n_theta={self.n_theta}, {kind})"

    def refine(self):
        """Grid with every radial cell halved and twice as many angles."""
        mid = 0.5 * (self.r_edges[1:] + self.r_edges[:-1])
        edges = np.empty(2 * self.n_r + 1)
        edges[0::2] = self.r_edges
        edges[1::2] = mid
        return PolarGrid(n_theta=2 * self.n_theta, r_edges=edges)

    def field(self, values):
        return ScalarField(self, values)

    def from_function(self, func):
        """Sample ``func(r, theta)`` at cell centres."""
        return ScalarField(self, func(self.r[:, None], self.theta[None, :]) * np.ones(self.shape))

    def zeros(self):
        return ScalarField(self, np.zeros(self.shape))


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Real values on a :class:`PolarGrid`, indexed ``[radial, angular]``.

    Values are copied and frozen on construction; operations return new fields.
    """

    grid: PolarGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = check_values(self.values, self.grid.shape).copy()
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    def with_values(self, values):
        return ScalarField(self.grid, values)

    def _coerce(self, other):
        if isinstance(other, ScalarField):
            if other.grid != self.grid:
                raise ContractViolation("fields live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return self.with_values(self.values + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self.with_values(self.values - self._coerce(other))

    def __mul__(self, other):
        return self.with_values(self.values * self._coerce(other))

    __rmul__ = __mul__

    def __neg__(self):
        return self.with_values(-self.values)


def _check_field(f):
    if not isinstance(f, ScalarField):
        raise ContractViolation(f"expected a ScalarField, got {type(f).__name__}")
    return f


def integrate(f):
    """Midpoint quadrature ``sum f * cell_area``; exact for constants."""
    f = _check_field(f)
    return float(np.sum(f.values * f.grid.weights))


def moment_center(w):
    """Centre of vorticity ``int x w / int w`` (cell centroids as nodes).

    Raises
    ------
    DomainError
        If ``w`` carries no mass.
    """
    w = _check_field(w)
    g = w.grid
    mass = integrate(w)
    if mass <= 0.0:
        raise DomainError("moment_center: field has zero (or negative) mass")
    wa = w.values * g.weights
    return np.array([np.sum(g.x_centroid * wa), np.sum(g.y_centroid * wa)]) / mass


def second_moment(w):
    """Angular impulse ``int |x|^2 w``, using exact cell averages of ``|x|^2``."""
    w = _check_field(w)
    g = w.grid
    return float(np.sum(g.r2_mean[:, None] * w.values * g.weights))


def lp_norm(f, p):
    """Discrete ``L^p(D)`` norm."""
    f = _check_field(f)
    if p < 1:
        raise DomainError(f"lp_norm needs p >= 1, got {p}")
    return float(np.sum(np.abs(f.values) ** p * f.grid.weights) ** (1.0 / p))


def _radial_locate(grid, r):
    """Bracketing ring index and weight for radii ``r_c[0] <= r <= r_c[-1]``."""
    rc = grid.r
    i = np.clip(np.searchsorted(rc, r, side="right") - 1, 0, grid.n_r - 2)
    t = np.clip((r - rc[i]) / (rc[i + 1] - rc[i]), 0.0, 1.0)
    return i, t


def sample_values(grid, values, px, py):
    """Bilinear ``(r, theta)`` interpolation of raw ``values`` at ``(px, py)``.

    Points beyond the outermost ring (including ``|p| > 1``) take the value
    interpolated on that ring.  Inside the innermost ring the value goes
    linearly from the ring's angular mean at the origin to the ring value,
    which reproduces fields of the form ``a + b x + c y`` exactly.
    """
    px = np.asarray(px, dtype=float)
    py = np.asarray(py, dtype=float)
    r = np.hypot(px, py)
    theta = np.arctan2(py, px)
    n = grid.n_theta
    u = np.mod(theta, 2.0 * math.pi) / grid.dtheta - 0.5
    j0 = np.floor(u)
    s = u - j0
    j0 = j0.astype(np.intp) % n
    j1 = (j0 + 1) % n

    rc = grid.r
    r_eff = np.clip(r, rc[0], rc[-1])
    i, t = _radial_locate(grid, r_eff)
    v00 = values[i, j0]
    v01 = values[i, j1]
    v10 = values[i + 1, j0]
    v11 = values[i + 1, j1]
    out = (1 - t) * ((1 - s) * v00 + s * v01) + t * ((1 - s) * v10 + s * v11)

    inner = r < rc[0]
    if np.any(inner):
        ring = values[0]
        mean = ring.mean()
        ring_val = (1 - s[inner]) * ring[j0[inner]] + s[inner] * ring[j1[inner]]
        frac = r[inner] / rc[0]
        out = np.array(out, copy=True)
        out[inner] = mean + frac * (ring_val - mean)
    return out


def sample(f, p):
    """Interpolate field ``f`` at point(s) ``p`` (shape ``(2,)`` or ``(n, 2)``)."""
    f = _check_field(f)
    p = np.asarray(p, dtype=float)
    vals = sample_values(f.grid, f.values, p[..., 0], p[..., 1])
    return float(vals) if np.ndim(vals) == 0 else vals


def rotate_field(f, angle):
    """Field ``g(r, theta) = f(r, theta - angle)``.

    Whole multiples of ``dtheta`` are applied as an exact index shift;
    other angles blend the two neighbouring shifts linearly, which keeps
    ring sums (hence integrals and moments) unchanged.
    """
    f = _check_field(f)
    k = angle / f.grid.dtheta
    k_round = round(k)
    if abs(k - k_round) < 1e-9:
        return f.with_values(np.roll(f.values, int(k_round) % f.grid.n_theta, axis=1))
    k0 = math.floor(k)
    frac = k - k0
    a = np.roll(f.values, k0 % f.grid.n_theta, axis=1)
    b = np.roll(f.values, (k0 + 1) % f.grid.n_theta, axis=1)
    return f.with_values((1.0 - frac) * a + frac * b)


def dump_field(f, path):
    """Write ``f`` as ``polar-field v1 n_r n_theta`` plus one CSV line per ring."""
    f = _check_field(f)
    lines = [f"{FIELD_HEADER} {f.grid.n_r} {f.grid.n_theta}"]
    for ring in f.values:
        lines.append(",".join(format(v, ".17g") for v in ring))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def load_field(path, grid=None):
    """Read a field dump; a uniform grid is assumed unless ``grid`` is given."""
    with open(path, encoding="ascii") as fh:
        header = fh.readline().split()
        if header[:2] != FIELD_HEADER.split() or len(header) != 4:
            raise ContractViolation(f"{path}: not a '{FIELD_HEADER}' file")
        n_r, n_theta = int(header[2]), int(header[3])
        rows = [line for line in fh if line.strip()]
    values = np.array([[float(v) for v in row.split(",")] for row in rows])
    if grid is None:
        grid = PolarGrid(n_r, n_theta)
    elif grid.shape != (n_r, n_theta):
        raise ContractViolation(f"{path}: dump is {n_r}x{n_theta}, grid is {grid.shape}")
    return ScalarField(grid, values)
