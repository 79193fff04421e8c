import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from vpl import RotatingPatchMaximizer
from vpl.exceptions import ContractViolation, DomainError
from vpl.grid import PolarGrid
from vpl.maximizer import disk_initial_guess


def _est(**kw):
    return RotatingPatchMaximizer(lam=50.0, n_r=48, n_theta=96, **kw)


def test_params_and_clone():
    est = _est(tol=1e-9)
    params = est.get_params()
    assert params["lam"] == 50.0 and params["tol"] == 1e-9
    twin = clone(est)
    assert twin.get_params() == params and twin is not est
    est.set_params(omega=0.2)
    assert est.omega == 0.2


def test_fit_attributes_and_methods():
    est = _est().fit()
    assert est.converged_ and est.n_iter_ >= 1
    assert est.vorticity_.shape == (48, 96)
    assert np.hypot(*est.center_) == pytest.approx(np.sqrt(0.5), abs=0.05)
    pts = np.array([est.center_, [-0.5, -0.5]])
    assert est.predict(pts)[0] > 0 and est.predict(pts)[1] == 0.0
    d = est.decision_function(pts)
    assert d[0] > 0 > d[1]
    assert np.allclose(est.transform(est.center_[None, :]), 0.0)
    assert est.score() <= 0.0


def test_fit_from_field_and_array():
    g = PolarGrid(48, 96)
    w0 = disk_initial_guess(g, 50.0, (0.6, 0.1))
    a = _est().fit(w0)
    b = _est().fit(w0.values)
    assert a.energy_ == b.energy_


def test_random_init_reproducible():
    a = _est(init="random", random_state=4).fit()
    b = _est(init="random", random_state=4).fit()
    assert np.array_equal(a.vorticity_, b.vorticity_)


def test_errors():
    with pytest.raises(NotFittedError):
        _est().predict(np.zeros((1, 2)))
    with pytest.raises(ContractViolation):
        _est(init="nope").fit()
    with pytest.raises(DomainError):
        RotatingPatchMaximizer(lam=0.1, n_r=16, n_theta=32).fit()
    est = _est().fit()
    with pytest.raises(DomainError):
        est.predict(np.array([[2.0, 0.0]]))
