"""The acceptance suite: ten numerical criteria with fixed tolerances and time budgets.

Each criterion returns a :class:`CriterionResult`. Expensive shared objects
(eigenfunction, persistence report) are built lazily by the first criterion
that needs them, and that criterion's clock includes the build.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .config import RunConfig
from .dichotomy import (DEFAULT_K_LIST, fit_core_rate, fit_far_rates, verify_bessel_inequalities)
from .mode_ode import ModeSystem, core_series_init, duality_drift, integrate_core
from .model import Perturbation, PolynomialBump, default_potential, r_norm
from .persistence import (bruteforce_radial_check, decompose, fit_homeomorphism, fit_mass_bounds,
                          gprime, gprime_oracle, persistence_report)
from .specfun import bessel, bessel_pair
from .spectral import find_eigenvalue, restore_simplicity


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    seconds: float
    budget: float
    details: dict = field(default_factory=dict)

    @property
    def within_budget(self) -> bool:
        return self.seconds <= self.budget

    @property
    def ok(self) -> bool:
        return self.passed and self.within_budget

    def line(self) -> str:
        status = "PASS" if self.ok else "FAIL"
        timing = f"{self.seconds:.1f}s/{self.budget:.0f}s"
        if not self.within_budget:
            timing += " over budget"
        summary = ", ".join(f"{k}={_fmt(v)}" for k, v in self.details.items() if not isinstance(v, (dict, list)))
        return f"[{status}] {self.number:2d} {self.title} ({timing}) {summary}"

    def to_json(self) -> dict:
        return {"number": self.number, "title": self.title, "passed": self.passed,
                "within_budget": self.within_budget, "seconds": self.seconds,
                "budget": self.budget, "details": self.details}


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.3g}"
    return str(v)


class Context:
    """Lazily built objects shared between criteria."""

    def __init__(self, config: RunConfig | None = None):
        self.config = config or RunConfig()
        self.grid = self.config.grid()
        self.potential = default_potential(self.grid)
        self.bump_eps = 0.0
        self._spec = None
        self._report = None

    @property
    def tolerances(self) -> dict:
        return {"rtol": self.config.ode_rel_tol, "atol": self.config.ode_abs_tol}

    @property
    def spec(self):
        if self._spec is None:
            self._spec = find_eigenvalue(self.potential, self.config.lambda_bracket, **self.tolerances)
        return self._spec

    @property
    def report(self):
        if self._report is None:
            self._report = persistence_report(self.spec, self.config.kmax, self.config.n_jobs)
        return self._report

    def adopt(self, potential, spec, bump_eps: float) -> None:
        """Switch to a modified potential (after a simplicity repair)."""
        self.potential, self._spec, self._report, self.bump_eps = potential, spec, None, bump_eps


def k0_quadrature(x: float) -> float:
    """``K_0(x) = ∫_0^∞ exp(-x cosh τ) dτ`` by adaptive quadrature, independent of scipy.special."""
    # the integrand is below 1e-300 once x cosh τ > 700
    upper = np.arccosh(max(700.0 / x, 1.0)) + 1.0
    val, _ = integrate.quad(lambda tau: np.exp(-x * np.cosh(tau)), 0.0, upper,
                            epsabs=0.0, epsrel=1e-13, limit=200)
    return float(val)


# ---------------------------------------------------------------------------
# the criteria
# ---------------------------------------------------------------------------

def criterion_eigenvalue(ctx: Context) -> CriterionResult:
    spec = ctx.spec
    u0 = ctx.potential.generator_u0.samples
    u0 = u0 / np.max(np.abs(u0))
    u = spec.u_star.samples
    rel = float(np.max(np.abs(u - u0)))
    err = abs(spec.lambda0 - 1.0)
    return CriterionResult(1, "embedded eigenvalue", err <= 1e-6 and rel <= 1e-6, 0.0, 10.0,
                           {"lambda0": spec.lambda0, "abs_error": err, "u_rel_sup_error": rel,
                            "sigma_min": spec.sigma_min, "weak_residual": spec.residual.get("weak")})


def criterion_simplicity(ctx: Context) -> CriterionResult:
    kmax = ctx.config.kmax
    pot, spec, scan = restore_simplicity(ctx.potential, kmax, required=1e-4,
                                         bracket=ctx.config.lambda_bracket,
                                         n_jobs=ctx.config.n_jobs, **ctx.tolerances)
    if scan.bump_eps:
        ctx.adopt(pot, spec, scan.bump_eps)
    margins = scan.margins
    kmin = min(margins, key=margins.get)
    return CriterionResult(2, "simplicity scan", scan.ok, 0.0, 60.0,
                           {"kmax": kmax, "min_margin": margins[kmin], "argmin_k": kmin,
                            "bump_eps": scan.bump_eps, "margins": {str(k): v for k, v in margins.items()}})


def criterion_special_functions(ctx: Context) -> CriterionResult:
    t = np.geomspace(0.5, 50.0, 400)
    worst = 0.0
    for k in range(0, 61):
        j, dj = bessel_pair("J", k, t)
        y, dy = bessel_pair("Y", k, t)
        w = j * dy - dj * y
        worst = max(worst, float(np.max(np.abs(w * np.pi * t / 2.0 - 1.0))))
    xs = (0.05, 0.25, 0.5, 1.0, 2.0, 5.0, 10.0, 30.0)
    k0_err = max(abs(bessel("K", 0, x).value / k0_quadrature(x) - 1.0) for x in xs)
    return CriterionResult(3, "special-function identities", worst <= 1e-10 and k0_err <= 1e-10, 0.0, 5.0,
                           {"wronskian_rel_error": worst, "k0_quadrature_rel_error": float(k0_err)})


def criterion_closed_form(ctx: Context, k_list=(1, 2, 3, 5, 10, 20, 40), r_start: float = 0.05) -> CriterionResult:
    pot = ctx.potential
    worst = 0.0
    for k in k_list:
        # theta is flat on [0, 1]; at λ equal to that value the regular solutions are r^k, r^{k+2}
        system = ModeSystem(k, pot.flat_value, pot)
        start = core_series_init(system, r_start)
        traj = integrate_core(system, start, r_start, 1.0, nodes=[], **ctx.tolerances)
        cols = traj.frames[-1]
        exact = np.array([[1.0, k, 0.0, 0.0],
                          [1.0 / (4 * (k + 1)), (k + 2) / (4 * (k + 1)), 1.0, float(k)]]).T
        for j in range(2):
            a = cols[:, j] / np.linalg.norm(cols[:, j])
            b = exact[:, j] / np.linalg.norm(exact[:, j])
            worst = max(worst, float(np.linalg.norm(a - np.sign(a @ b) * b)))
    return CriterionResult(4, "closed-form core solutions", worst <= 1e-9, 0.0, 5.0,
                           {"max_rel_error": worst, "k_list": list(k_list)})


RADIAL_BUMP = PolynomialBump(1.5, 0.5, 1.0, 6)


def criterion_eigenvalue_shift(ctx: Context) -> CriterionResult:
    table = bruteforce_radial_check(ctx.spec, RADIAL_BUMP, eps_list=(0.0, 2e-3, 1e-3, 5e-4))
    lam = {r.eps: r.lam for r in table.rows}
    lam0, lp = table.lambda0, table.lambda_prime
    rel = abs((lam[1e-3] - lam0) / 1e-3 - lp) / abs(lp)
    rem = {e: abs(lam[e] - lam0 - e * lp) for e in (2e-3, 1e-3, 5e-4)}
    ratios = [rem[2e-3] / rem[1e-3], rem[1e-3] / rem[5e-4]]
    passed = rel <= 5e-3 and all(abs(q - 4.0) <= 0.5 for q in ratios)
    return CriterionResult(5, "first-order eigenvalue shift", passed, 0.0, 60.0,
                           {"lambda_prime": lp, "rel_error_at_1e-3": rel,
                            "ratio_2e-3_1e-3": ratios[0], "ratio_1e-3_5e-4": ratios[1]})


def criterion_gprime_oracle(ctx: Context, k_list=(1, 2, 5)) -> CriterionResult:
    report = ctx.report
    bump = PolynomialBump(1.2, 0.6, 1.0, 6)
    worst, values = 0.0, {}
    for k in k_list:
        rho = Perturbation.from_core(ctx.grid, {k: bump(ctx.grid.core)}, report.kmax)
        g = gprime(report, rho).values[k]
        ref = gprime_oracle(report, k, bump)
        values[str(k)] = [g, ref]
        worst = max(worst, abs(g - ref) / abs(ref))
    return CriterionResult(6, "first-order matching functional", worst <= 1e-2, 0.0, 60.0,
                           {"max_rel_error": worst, "values": values})


def criterion_duality(ctx: Context, n_pairs: int = 20) -> CriterionResult:
    rng = np.random.default_rng(ctx.config.seed)
    lam = ctx.spec.lambda0
    drifts, modes = [], []
    while len(drifts) < n_pairs:
        k = int(rng.integers(0, ctx.config.kmax + 1))
        batch = min(4, n_pairs - len(drifts))
        drifts.extend(duality_drift(ModeSystem(k, lam, ctx.potential), rng, batch, **ctx.tolerances))
        modes.extend([k] * batch)
    worst = float(np.max(drifts))
    return CriterionResult(7, "duality constancy", worst <= 1e-9, 0.0, 10.0,
                           {"max_relative_drift": worst, "pairs": n_pairs, "modes": modes})


def criterion_mass_bounds(ctx: Context) -> CriterionResult:
    report = ctx.report
    bounds = fit_mass_bounds(report)
    homeo = fit_homeomorphism(report, 100, ctx.config.seed)
    c, C = bounds["c"], bounds["C"]
    masses = report.masses
    holds = all(c / np.sqrt(1 + k * k) <= m * (1 + 1e-12) and m <= C / (2 * k + 2) * (1 + 1e-12)
                for k, m in masses.items() if 1 <= k <= report.kmax)
    finite = all(np.isfinite(v) and v > 0 for v in (c, C, homeo["c_prime"], homeo["C_prime"]))
    return CriterionResult(8, "eta-mass bounds and G' two-sided", holds and finite, 0.0, 120.0,
                           {"c": c, "C": C, "c_prime": homeo["c_prime"], "C_prime": homeo["C_prime"]})


def random_perturbation(rng: np.random.Generator, grid, kmax: int, n_modes: int = 5,
                        n_bumps: int = 3) -> Perturbation:
    """Random modes in ``[-kmax, kmax]``, each a sum of random smooth bumps inside ``(0, r1)``."""
    core = grid.core
    ks = rng.choice(np.arange(-kmax, kmax + 1), size=n_modes, replace=False)
    modes = {}
    for k in ks:
        vals = np.zeros(core.size)
        for _ in range(n_bumps):
            half = rng.uniform(0.1, 0.6)
            center = rng.uniform(half, grid.r1 - half)
            vals += rng.standard_normal() * PolynomialBump(center, half, 1.0, 6)(core)
        modes[int(k)] = vals
    return Perturbation.from_core(grid, modes, kmax)


def criterion_kernel_projection(ctx: Context, n_samples: int = 20) -> CriterionResult:
    report = ctx.report
    rng = np.random.default_rng(ctx.config.seed + 1)
    worst = 0.0
    for _ in range(n_samples):
        rho = random_perturbation(rng, ctx.grid, report.kmax)
        kernel, _ = decompose(report, rho)
        worst = max(worst, gprime(report, kernel).l2_1 / r_norm(rho))
    return CriterionResult(9, "kernel projection", worst <= 1e-8, 0.0, 30.0,
                           {"max_leakage_ratio": worst, "samples": n_samples})


def criterion_dichotomy(ctx: Context, core_k=(1, 2, 5, 10, 20), lams=(0.5, 1.0, 2.0)) -> CriterionResult:
    eps = ctx.config.eps_dichotomy
    lam0 = ctx.spec.lambda0
    core = {k: fit_core_rate(k, ctx.potential, lam0) for k in core_k}
    core_ok = all(abs(f.fitted_rate + k) <= 0.05 * k for k, f in core.items())
    ks = [f.fitted_K for f in core.values()]
    core_K_ok = max(ks) <= 3.0 * min(ks)
    sweep = verify_bessel_inequalities(eps, DEFAULT_K_LIST, ctx.grid.r1)
    bessel_ok = sweep.finite and sweep.diagonal_fourth <= 1e-10 and sweep.diagonal_second <= 1e-10
    far_worst = -np.inf
    for lam in lams:
        fits = fit_far_rates((0,) + DEFAULT_K_LIST, lam, eps, ctx.grid.r1)
        bound = -(lam ** 0.25 - eps)
        far_worst = max(far_worst, max(f["stable"].fitted_rate - bound for f in fits.values()))
    passed = core_ok and core_K_ok and bessel_ok and far_worst <= 0.0
    return CriterionResult(10, "dichotomy sweeps", passed, 0.0, 120.0,
                           {"core_rates": {str(k): f.fitted_rate for k, f in core.items()},
                            "core_K_ratio": max(ks) / min(ks),
                            "bessel_suprema": sweep.suprema.tolist(),
                            "bessel_diag_fourth_error": sweep.diagonal_fourth,
                            "bessel_diag_second": sweep.diagonal_second,
                            "far_stable_rate_minus_bound_max": float(far_worst)})


CRITERIA = (criterion_eigenvalue, criterion_simplicity, criterion_special_functions,
            criterion_closed_form, criterion_eigenvalue_shift, criterion_gprime_oracle,
            criterion_duality, criterion_mass_bounds, criterion_kernel_projection,
            criterion_dichotomy)


def run_criterion(func, ctx: Context) -> CriterionResult:
    start = time.perf_counter()
    result = func(ctx)
    result.seconds = time.perf_counter() - start
    return result


def run_all(ctx: Context | None = None, numbers=None, echo=None) -> list[CriterionResult]:
    ctx = ctx or Context()
    out = []
    for i, func in enumerate(CRITERIA, start=1):
        if numbers and i not in numbers:
            continue
        res = run_criterion(func, ctx)
        if echo:
            echo(res.line())
        out.append(res)
    return out
