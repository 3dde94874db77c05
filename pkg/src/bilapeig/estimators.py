"""Estimator-style wrappers around the eigenvalue search and the persistence kernels.

``fit`` takes a potential (or a fitted solver's result) instead of a data
matrix; hyperparameters live in ``__init__`` so ``get_params``/``set_params``
and cloning behave as usual.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .mode_ode import ATOL, RTOL
from .model import Perturbation, Potential, default_potential, r_norm
from .persistence import (decompose, fit_homeomorphism, fit_mass_bounds, gprime,
                          persistence_report)
from .spectral import DEFECT_THRESHOLD, SpectralResult, find_eigenvalue, restore_simplicity


class EmbeddedEigenvalueSolver(BaseEstimator):
    """Find the radial embedded eigenvalue and, with ``kmax > 0``, confirm simplicity.

    With ``restore=True`` a failed simplicity scan retries on core-bumped
    potentials; the potential actually used is ``potential_``.
    """

    def __init__(self, bracket=(0.5, 2.0), tol=1e-9, kmax=0, margin_threshold=DEFECT_THRESHOLD,
                 restore=True, rtol=RTOL, atol=ATOL, n_jobs=1):
        self.bracket = bracket
        self.tol = tol
        self.kmax = kmax
        self.margin_threshold = margin_threshold
        self.restore = restore
        self.rtol = rtol
        self.atol = atol
        self.n_jobs = n_jobs

    def fit(self, potential: Potential | None = None, y=None):
        pot = default_potential() if potential is None else potential
        if self.kmax > 0:
            eps_list = (0.05, 0.1, 0.2) if self.restore else ()
            pot, result, scan = restore_simplicity(pot, self.kmax, eps_list, self.margin_threshold,
                                                   self.bracket, self.n_jobs, self.rtol, self.atol)
            self.scan_ = scan
        else:
            result = find_eigenvalue(pot, self.bracket, self.tol, rtol=self.rtol, atol=self.atol)
            self.scan_ = None
        self.potential_ = pot
        self.result_ = result
        self.lambda0_ = result.lambda0
        self.margins_ = dict(result.margins)
        return self

    def _check(self):
        if not hasattr(self, "result_"):
            raise NotFittedError("call fit() first")

    def eigenfunction(self, r) -> np.ndarray:
        """Sup-normalised ``u_*`` at radii ``r`` (spline inside the grid, exact K₀ tail beyond)."""
        self._check()
        r = np.asarray(r, dtype=float)
        grid = self.result_.grid
        return np.where(r <= grid.r_max, self.result_.u_star(np.minimum(r, grid.r_max)),
                        self.result_.u_tail(r))


class PersistenceTransformer(TransformerMixin, BaseEstimator):
    """Map perturbations to the first-order matching functional ``G'(0) rho``.

    ``fit`` takes a :class:`SpectralResult` or a fitted
    :class:`EmbeddedEigenvalueSolver`; ``transform`` returns one row of
    ``g_k``, ``k = -kmax..kmax``, per perturbation.
    """

    def __init__(self, kmax=40, n_jobs=1, n_samples=100, seed=0):
        self.kmax = kmax
        self.n_jobs = n_jobs
        self.n_samples = n_samples
        self.seed = seed

    def fit(self, spec, y=None):
        if isinstance(spec, EmbeddedEigenvalueSolver):
            spec._check()
            spec = spec.result_
        if not isinstance(spec, SpectralResult):
            raise TypeError("fit expects a SpectralResult or a fitted EmbeddedEigenvalueSolver")
        report = persistence_report(spec, self.kmax, self.n_jobs)
        fits = {**fit_mass_bounds(report), **fit_homeomorphism(report, self.n_samples, self.seed)}
        self.report_ = report.with_fits(fits)
        self.masses_ = report.masses
        self.fitted_ = fits
        return self

    def _check(self):
        if not hasattr(self, "report_"):
            raise NotFittedError("call fit() first")

    def transform(self, perturbations) -> np.ndarray:
        self._check()
        if isinstance(perturbations, Perturbation):
            perturbations = [perturbations]
        return np.array([gprime(self.report_, rho).as_array(self.report_.kmax) for rho in perturbations])

    def decompose(self, rho: Perturbation) -> tuple[Perturbation, Perturbation]:
        """``(kernel part, span of η_k part)`` of ``rho``."""
        self._check()
        return decompose(self.report_, rho)

    def kernel_leakage(self, rho: Perturbation) -> float:
        """``‖G'(0) kernel_part‖_{l²₁} / ‖rho‖_R``; zero up to rounding by construction."""
        kernel, _ = self.decompose(rho)
        return gprime(self.report_, kernel).l2_1 / r_norm(rho)
