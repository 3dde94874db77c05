"""Embedded-eigenvalue detection by matching core-regular and far-decaying solutions at ``r1``."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed
from scipy import optimize, special

from .errors import EigenvalueNotFound, SimplicityError
from .mode_ode import (ATOL, RTOL, ModeSystem, Trajectory, far_decaying_state, log_scaling,
                       regular_frame)
from .model import (PolynomialBump, Potential, RadialProfile, add_core_bump, bilaplacian,
                    core_bump_profile)

DEFECT_THRESHOLD = 1e-7


@dataclass(frozen=True)
class MatchMatrix:
    """Unit columns at ``r1`` in log coordinates: orthonormal core-regular pair, then the far-decaying state."""

    k: int
    lam: float
    radius: float
    columns: np.ndarray
    sigma_min: float
    null_vector: np.ndarray = field(repr=False)
    # maps orthonormal core coefficients to coefficients on the trajectory columns
    core_change: np.ndarray = field(repr=False)
    core: Trajectory | None = field(default=None, repr=False)


def _far_column(k: int, lam: float, r1: float) -> np.ndarray:
    state = far_decaying_state(k, lam, r1).components * log_scaling(r1)
    return state / np.linalg.norm(state)


def match_defect(k: int, lam: float, pot: Potential, rtol: float = RTOL, atol: float = ATOL,
                 sample: bool = False) -> MatchMatrix:
    """Smallest singular value of ``[core span | far-decaying]`` at ``r1`` for mode ``k``.

    ``sample=True`` keeps the core trajectory on every grid node (needed to
    assemble an eigenfunction).
    """
    system = ModeSystem(int(k), float(lam), pot)
    r1 = pot.grid.r1
    traj = regular_frame(system, r1, rtol=rtol, atol=atol, sample=sample)
    core = traj.frames[-1]
    q, rmat = np.linalg.qr(core)
    far = _far_column(k, lam, r1)
    cols = np.column_stack([q, far])
    _, sv, vt = np.linalg.svd(cols)
    return MatchMatrix(int(k), float(lam), r1, cols, float(sv[-1]), vt[-1],
                       np.linalg.inv(rmat), traj if sample else None)


@dataclass(frozen=True, eq=False)
class SpectralResult:
    """Eigenvalue ``lambda0`` with sup-normalised eigenfunction (``u_star(r1) > 0``).

    ``four_vector`` holds ``(u, u', Δu, (Δu)')`` at every grid node, in log
    coordinates for ``r ≤ r2`` and physical ones beyond (the trajectory
    convention of the mode systems).
    """

    lambda0: float
    potential: Potential
    u_star: RadialProfile
    four_vector: Trajectory
    sigma_min: float
    margins: dict = field(default_factory=dict)
    far_amplitude: float = 0.0
    residual: dict = field(default_factory=dict)

    @property
    def grid(self):
        return self.potential.grid

    def states(self, coordinate: str = "log") -> np.ndarray:
        """``(n, 4)`` array of the four-vector in one coordinate system."""
        return self.four_vector.combine([1.0], reference=0, coordinate=coordinate)

    def u_tail(self, r):
        """Exact ``u_*`` for ``r ≥ r1`` from the K₀ branch."""
        mu = self.lambda0 ** 0.25
        return self.far_amplitude * special.k0(mu * np.asarray(r, dtype=float))

    def with_margins(self, margins: dict) -> "SpectralResult":
        return SpectralResult(self.lambda0, self.potential, self.u_star, self.four_vector,
                              self.sigma_min, dict(margins), self.far_amplitude, self.residual)

    def to_json(self) -> dict:
        return {"lambda0": self.lambda0, "sigma_min": self.sigma_min,
                "u_star_r1": float(self.u_star.samples[self.grid.i1]),
                "margins": {str(k): v for k, v in sorted(self.margins.items())},
                "residual": self.residual}

    def save_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2, sort_keys=True)

    def to_csv(self, path) -> None:
        """Columns: r, u_star, U1..U4 (log-coordinate derivatives for r ≤ r2, physical beyond)."""
        states = self.four_vector.frames[:, :, 0]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["r", "u_star", "U1", "U2", "U3", "U4", "coordinate"])
            for r, u, st, c in zip(self.grid.nodes, self.u_star.samples, states,
                                   self.four_vector.coordinates):
                writer.writerow([f"{r:.17g}", f"{u:.17g}"] + [f"{x:.17g}" for x in st] + [c])


def _golden(func, a: float, b: float, c: float, tol: float) -> float:
    res = optimize.minimize_scalar(func, bracket=(a, b, c), method="golden",
                                   options={"xtol": tol / max(abs(b), 1.0)})
    return float(res.x)


def find_eigenvalue(pot: Potential, bracket=(0.5, 2.0), tol: float = 1e-9, scan_points: int = 41,
                    threshold: float = DEFECT_THRESHOLD, rtol: float = RTOL,
                    atol: float = ATOL) -> SpectralResult:
    """Locate the radial embedded eigenvalue in ``bracket`` and assemble ``u_*``.

    A coarse scan of the mode-0 defect picks the deepest dip, golden-section
    refines it, and the eigenfunction is rebuilt from the null vector of the
    match matrix: integrated frame inside ``r1``, closed-form K₀ outside.
    """
    lo, hi = map(float, bracket)
    if not 0.0 < lo < hi:
        raise ValueError(f"bracket must satisfy 0 < lo < hi, got {bracket}")
    defect = lambda lam: match_defect(0, lam, pot, rtol, atol).sigma_min
    lams = np.linspace(lo, hi, scan_points)
    vals = np.array([defect(x) for x in lams])
    i = int(np.argmin(vals))
    a, c = lams[max(i - 1, 0)], lams[min(i + 1, scan_points - 1)]
    if i in (0, scan_points - 1):
        # the minimum sits on the bracket edge: nothing to refine towards
        lam0 = lams[i]
    else:
        lam0 = _golden(defect, a, lams[i], c, tol)
    best = match_defect(0, lam0, pot, rtol, atol, sample=True)
    if best.sigma_min > threshold:
        raise EigenvalueNotFound(
            f"no embedded eigenvalue found in {bracket}: smallest defect {best.sigma_min:.3e}"
            f" at λ={lam0:.12g} exceeds {threshold:g}")
    return assemble_eigenfunction(pot, best)


def assemble_eigenfunction(pot: Potential, match: MatchMatrix) -> SpectralResult:
    grid = pot.grid
    lam = match.lam
    null = match.null_vector
    coef = match.core_change @ null[:2]
    traj = match.core
    # scale at r1 so the far column carries amplitude -null[2]
    core_states = traj.combine(coef, reference=-1, coordinate=None)
    r1 = grid.r1
    far_state = far_decaying_state(0, lam, r1).components * log_scaling(r1)
    far_norm = np.linalg.norm(far_state)
    amp = -null[2] / far_norm            # u = amp·K₀(μr) beyond r1
    far_nodes = grid.nodes[grid.i1 + 1:]
    far = np.stack([amp * far_decaying_state(0, lam, r).components for r in far_nodes])
    far_coords = np.array([("log" if r <= grid.r2 else "phys") for r in far_nodes], dtype=object)
    far = np.where((far_coords == "log")[:, None], far * log_scaling(far_nodes).T, far)
    states = np.concatenate([core_states, far])
    # match at r1 from both sides; the core value is used there
    u = states[:, 0]
    scale = float(np.max(np.abs(u)))
    sign = 1.0 if u[grid.i1] > 0 else -1.0
    states = states * (sign / scale)
    amp = amp * sign / scale
    coords = np.concatenate([traj.coordinates, far_coords])
    four = Trajectory(ModeSystem(0, lam, pot), grid.nodes.copy(), states[:, :, None],
                      np.zeros(grid.nodes.size), coords, "eigenfunction")
    u_star = RadialProfile(grid, states[:, 0])
    result = SpectralResult(lam, pot, u_star, four, match.sigma_min, far_amplitude=float(amp))
    res = eigen_residual(result)
    return SpectralResult(lam, pot, u_star, four, match.sigma_min, far_amplitude=float(amp),
                          residual=res)


def eigen_residual(result: SpectralResult, n_tests: int = 6) -> dict:
    """Residual diagnostics for ``Δ²u + theta·u - λu = 0`` that do not reuse the matching route.

    * ``weak``: ``max |∫ u (Δ²φ + (theta - λ)φ) r dr| / ∫ |u|(|Δ²φ| + |theta - λ||φ|) r dr``
      over smooth test bumps ``φ`` inside the core;
    * ``consistency``: the four-vector against finite differences of its own
      components (``u2 = r u_r``, ``Δu = v``), relative to the local size.
    """
    grid = result.grid
    pot = result.potential
    lam = result.lambda0
    core = grid.core
    u = result.u_star.samples[: grid.i1 + 1]
    theta = pot.theta_at(core)
    centers = np.linspace(0.35, grid.r1 - 0.35, n_tests)
    weak = 0.0
    for c in centers:
        bump = PolynomialBump(float(c), 0.3, 1.0, 12)
        d = bump.derivs(core)
        lhs = bilaplacian(d, core) + (theta - lam) * d[0]
        num = abs(grid.integrate_core(u * lhs))
        den = grid.integrate_core(np.abs(u) * (np.abs(bilaplacian(d, core)) + np.abs(theta - lam) * np.abs(d[0])))
        weak = max(weak, float(num / den))
    states = result.states("log")[: grid.i1 + 1]
    inner = core[2:-2]
    cons = 0.0
    for j in (0, 2):
        deriv = _central_diff4(states[:, j], grid.h)
        cons = max(cons, float(np.max(np.abs(inner * deriv - states[2:-2, j + 1]))
                               / np.max(np.abs(states[:, j + 1]))))
    return {"weak": weak, "consistency": cons}


def _central_diff4(f: np.ndarray, h: float) -> np.ndarray:
    # fourth-order central first derivative at the interior nodes f[2:-2]
    return (f[:-4] - 8.0 * f[1:-3] + 8.0 * f[3:-1] - f[4:]) / (12.0 * h)


@dataclass(frozen=True)
class SimplicityScan:
    margins: dict
    flagged: list
    trend: float  # min margin over the top quarter of k divided by the overall median
    bump_eps: float = 0.0

    @property
    def ok(self) -> bool:
        return not self.flagged

    def to_json(self) -> dict:
        return {"margins": {str(k): v for k, v in sorted(self.margins.items())},
                "flagged": self.flagged, "trend": self.trend, "bump_eps": self.bump_eps}


def simplicity_scan(pot: Potential, lambda0: float, kmax: int, threshold: float = DEFECT_THRESHOLD,
                    n_jobs: int = 1, rtol: float = RTOL, atol: float = ATOL) -> SimplicityScan:
    """Mode defects at ``lambda0`` for ``k = 1..kmax``; margins under ``threshold`` are flagged."""
    ks = list(range(1, int(kmax) + 1))
    vals = Parallel(n_jobs=n_jobs)(
        delayed(_margin)(k, lambda0, pot, rtol, atol) for k in ks)
    margins = dict(zip(ks, vals))
    flagged = [k for k, v in margins.items() if v < threshold]
    top = [margins[k] for k in ks[-max(1, len(ks) // 4):]]
    trend = float(min(top) / np.median(vals))
    return SimplicityScan(margins, flagged, trend)


def _margin(k, lam, pot, rtol, atol):
    return match_defect(k, lam, pot, rtol, atol).sigma_min


def restore_simplicity(pot: Potential, kmax: int, eps_list=(0.05, 0.1, 0.2),
                       required: float = DEFECT_THRESHOLD, bracket=(0.5, 2.0), n_jobs: int = 1,
                       rtol: float = RTOL, atol: float = ATOL):
    """Scan ``pot``; if some margin is below ``required``, retry with core bumps of size ``eps``.

    Returns ``(potential, spectral result with margins, scan)`` for the first
    potential that passes.
    """
    tried = []
    for eps in (0.0,) + tuple(eps_list):
        cand = pot if eps == 0.0 else add_core_bump(pot, eps, core_bump_profile(pot.grid))
        spec = find_eigenvalue(cand, bracket, rtol=rtol, atol=atol)
        scan = simplicity_scan(cand, spec.lambda0, kmax, required, n_jobs, rtol, atol)
        scan = SimplicityScan(scan.margins, scan.flagged, scan.trend, eps)
        if scan.ok:
            return cand, spec.with_margins(scan.margins), scan
        tried.append((eps, scan.flagged))
    raise SimplicityError(
        f"possible extra bound state; margins below {required:g} persist after core bumps: {tried}")
