"""scikit-learn style front end to the patch maximizer."""
import math

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_points
from .exceptions import ContractViolation, DomainError
from .geometry import RotationParams
from .grid import PolarGrid, ScalarField, moment_center, sample_values
from .maximizer import (
    check_admissible,
    default_initial_guess,
    random_initial_guess,
    residual_weak_form,
    solve_patch,
)


def _disk_points(X):
    pts = check_points(X)
    if np.any(np.hypot(pts[:, 0], pts[:, 1]) > 1.0):
        raise DomainError("points must lie in the closed unit disk")
    return pts


class RotatingPatchMaximizer(BaseEstimator):
    """Energy maximizer over ``K_lam(D)`` for a disk rotating at ``omega``.

    Parameters
    ----------
    omega : float
        Angular velocity of the rotating frame (>= 0).
    lam : float
        Vorticity bound; at least ``1/pi``.
    n_r, n_theta : int
        Resolution of the uniform polar grid (ignored if ``grid`` is set).
    grid : PolarGrid, optional
        Explicit (e.g. clustered) grid.
    tol, max_iter : float, int
        Stopping rule of the ascent.
    init : {'default', 'random'}
        Starting patch: centred on the landscape minimizer circle, or at a
        random centre drawn from ``random_state``.
    translate : bool
        Allow energy-increasing rigid translations when the threshold
        iteration is pinned by the grid.
    random_state : int or None

    Attributes
    ----------
    state_ : PatchState
    vorticity_ : ndarray of shape (n_r, n_theta)
    mu_, energy_ : float
    n_iter_ : int
    converged_ : bool
    center_ : ndarray of shape (2,)
    """

    def __init__(
        self,
        omega=1.0 / math.pi,
        lam=1e3,
        n_r=256,
        n_theta=512,
        grid=None,
        tol=1e-10,
        max_iter=500,
        init="default",
        translate=False,
        random_state=None,
    ):
        self.omega = omega
        self.lam = lam
        self.n_r = n_r
        self.n_theta = n_theta
        self.grid = grid
        self.tol = tol
        self.max_iter = max_iter
        self.init = init
        self.translate = translate
        self.random_state = random_state

    def _grid(self):
        return self.grid if self.grid is not None else PolarGrid(self.n_r, self.n_theta)

    def fit(self, X=None, y=None):
        """Run the ascent.

        ``X`` may be an initial vorticity: a :class:`ScalarField` or an array
        of grid shape.  When omitted, ``init`` decides.
        """
        params = RotationParams(self.omega, self.lam)
        grid = X.grid if isinstance(X, ScalarField) else self._grid()
        if X is None:
            if self.init == "default":
                w0 = default_initial_guess(grid, params)
            elif self.init == "random":
                w0 = random_initial_guess(grid, params.lam, self.random_state)
            else:
                raise ContractViolation(f"init must be 'default' or 'random', got {self.init!r}")
        elif isinstance(X, ScalarField):
            w0 = X
        else:
            w0 = ScalarField(grid, np.asarray(X, dtype=float))
        check_admissible(w0, params.lam)
        state = solve_patch(params, w0, tol=self.tol, max_iter=self.max_iter, translate=self.translate)
        self.state_ = state
        self.grid_ = grid
        self.vorticity_ = state.w.values
        self.mu_ = state.mu
        self.energy_ = state.energy
        self.n_iter_ = state.iterations
        self.converged_ = state.converged
        self.center_ = moment_center(state.w)
        return self

    def predict(self, X):
        """Vorticity of the fitted patch at points ``X`` of shape (n, 2)."""
        check_is_fitted(self, "state_")
        pts = _disk_points(X)
        return sample_values(self.grid_, self.vorticity_, pts[:, 0], pts[:, 1])

    def decision_function(self, X):
        """``Phi - mu`` at ``X``: positive inside the patch, negative outside."""
        check_is_fitted(self, "state_")
        pts = _disk_points(X)
        phi = self.state_.phi.values - self.mu_
        return sample_values(self.grid_, phi, pts[:, 0], pts[:, 1])

    def transform(self, X):
        """Points expressed in core units ``(x - X_center) / epsilon``."""
        check_is_fitted(self, "state_")
        pts = _disk_points(X)
        return (pts - self.center_) / self.state_.epsilon

    def score(self, X=None, y=None):
        """Negative weak-form residual (larger is better)."""
        check_is_fitted(self, "state_")
        return -residual_weak_form(self.state_)
