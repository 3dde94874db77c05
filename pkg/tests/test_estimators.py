import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from bilapeig.estimators import EmbeddedEigenvalueSolver, PersistenceTransformer
from bilapeig.model import Perturbation, PolynomialBump


@pytest.fixture(scope="module")
def transformer(spec):
    return PersistenceTransformer(kmax=3, n_samples=10).fit(spec)


def test_params_and_clone():
    est = EmbeddedEigenvalueSolver(kmax=5, tol=1e-8)
    assert est.get_params()["kmax"] == 5
    twin = clone(est)
    assert twin.get_params() == est.get_params() and twin is not est
    assert PersistenceTransformer().set_params(kmax=7).kmax == 7


def test_unfitted_raises():
    with pytest.raises(NotFittedError):
        EmbeddedEigenvalueSolver().eigenfunction([1.0])
    with pytest.raises(NotFittedError):
        PersistenceTransformer().transform([])


def test_solver_fit(potential):
    est = EmbeddedEigenvalueSolver(kmax=3).fit(potential)
    assert abs(est.lambda0_ - 1.0) <= 1e-6
    assert est.scan_.ok and set(est.margins_) == {1, 2, 3}
    r = np.array([0.5, 2.5, 20.0])
    vals = est.eigenfunction(r)
    assert vals[0] == pytest.approx(1.0, abs=1e-6)
    assert 0 < vals[2] < vals[1]


def test_transform_shape_and_values(transformer, grid):
    bump = PolynomialBump(1.2, 0.6, 1.0, 6)(grid.core)
    rhos = [Perturbation.from_core(grid, {1: bump}, 3), Perturbation.from_core(grid, {-2: bump, 0: bump}, 3)]
    out = transformer.transform(rhos)
    assert out.shape == (2, 7)
    assert out[0, 4] != 0 and np.count_nonzero(out[0]) == 1
    assert out[1, 1] != 0 and out[1, 3] != 0


def test_fit_accepts_fitted_solver(spec):
    solver = EmbeddedEigenvalueSolver()
    solver.result_ = spec
    model = PersistenceTransformer(kmax=1, n_samples=5).fit(solver)
    assert model.fitted_["c_prime"] > 0


def test_fit_rejects_other_inputs():
    with pytest.raises(TypeError):
        PersistenceTransformer().fit(np.zeros(3))


def test_decompose_and_leakage(transformer, grid, rng):
    rho = Perturbation.from_core(grid, {2: rng.standard_normal(grid.i1 + 1)}, 3)
    kern, span = transformer.decompose(rho)
    assert np.allclose((kern + span).core_samples(2), rho.core_samples(2))
    assert transformer.kernel_leakage(rho) <= 1e-10
