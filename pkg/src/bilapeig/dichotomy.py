"""Empirical exponential-dichotomy checks for the per-mode systems.

Operator norms are exact 4×4 (or 2×2) singular values after conjugating with
the diagonal weights of the relevant state norm. Rates and constants are
fitted from sampled ``(s, t, norm)`` triples; they are empirical stand-ins
for the constants of the theory, not bounds.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import IntegrationError
from .mode_ode import ModeFrame, ModeSystem, J, integrate_frame, regular_frame
from .model import Potential
from .specfun import bessel_pair, cross_products

DEFAULT_K_LIST = (1, 2, 3, 5, 8, 13, 21, 34, 55)


@dataclass(frozen=True)
class DichotomyFit:
    """``norm(s, t) ≤ fitted_K · exp(fitted_rate · |s - t|)`` over all samples, ``fitted_K`` minimal."""

    k: int
    interval: str
    fitted_K: float
    fitted_rate: float
    epsilon: float
    samples: np.ndarray = field(repr=False)  # rows (s, t, norm)
    residual: float = 0.0  # rms of the log-linear regression
    kind: str = "stable"

    def holds(self) -> bool:
        s, t, n = self.samples.T
        bound = self.fitted_K * np.exp(self.fitted_rate * np.abs(s - t))
        return bool(np.all(n <= bound * (1 + 1e-12)))

    def to_json(self) -> dict:
        return {"k": self.k, "interval": self.interval, "kind": self.kind, "K": self.fitted_K,
                "rate": self.fitted_rate, "epsilon": self.epsilon, "residual": self.residual,
                "samples": int(len(self.samples))}


def _fit(k, interval, samples, epsilon, kind, fixed_rate=None) -> DichotomyFit:
    samples = np.asarray(samples, dtype=float)
    gap = np.abs(samples[:, 0] - samples[:, 1])
    logn = np.log(samples[:, 2])
    if fixed_rate is None:
        slope, icpt = np.polyfit(gap, logn, 1)
        resid = float(np.sqrt(np.mean((logn - (icpt + slope * gap)) ** 2)))
    else:
        slope, resid = fixed_rate, 0.0
    K = float(np.max(np.exp(logn - slope * gap)))
    return DichotomyFit(int(k), interval, K, float(slope), float(epsilon), samples, resid, kind)


def samples_to_csv(fits: Iterable[DichotomyFit], path) -> None:
    """Columns: k, interval, kind, s, t, norm."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "interval", "kind", "s", "t", "norm"])
        for fit in fits:
            for s, t, n in fit.samples:
                writer.writerow([fit.k, fit.interval, fit.kind, f"{s:.17g}", f"{t:.17g}", f"{n:.17g}"])


def _weighted_norm(mat: np.ndarray, w_out: np.ndarray, w_in: np.ndarray) -> float:
    return float(np.linalg.norm((w_out[:, None] * mat) / w_in[None, :], 2))


# ---------------------------------------------------------------------------
# core
# ---------------------------------------------------------------------------

def default_core_radii(grid, r_lo: float = 0.01, r_hi: float = 1.0, n: int = 25) -> np.ndarray:
    """Log-spaced grid nodes in ``[r_lo, r_hi]``, where the potential is flat."""
    targets = np.geomspace(max(r_lo, grid.h), r_hi, n)
    idx = np.unique(np.clip(np.searchsorted(grid.nodes, targets), 0, grid.nodes.size - 1))
    return grid.nodes[idx]


def fit_core_rate(k: int, pot: Potential, lam: float, radii: Sequence[float] | None = None,
                  tolerance: float = 0.05, max_residual: float = 0.10) -> DichotomyFit:
    """Stable core evolution ``Φ^s(s, t)``, ``t ≤ s``, in the X_k norm; the rate should be ``-|k|``.

    The stable subspace at ``r1`` is the Euclidean complement ``J R`` of the
    regular span ``R``; it is integrated backward (where it dominates) and
    ``Φ^s(s, t) = Y(s) [I 0] [Y(t) R(t)]^{-1}``.
    """
    k = abs(int(k))
    if k == 0:
        raise ValueError("the core dichotomy rate is defined for k != 0")
    system = ModeSystem(k, lam, pot)
    grid = pot.grid
    radii = default_core_radii(grid) if radii is None else np.asarray(radii, dtype=float)
    if np.any(radii > grid.r1):
        raise ValueError("core radii must not exceed r1")
    reg = regular_frame(system, grid.r1, sample=True)
    node_index = {float(r): i for i, r in enumerate(reg.radii)}
    idx = [node_index[float(r)] for r in radii]
    start = J @ np.linalg.qr(reg.frames[-1])[0]
    back_nodes = reg.radii[::-1][1:]
    stable = integrate_frame(system, ModeFrame(k, grid.r1, start, "stable", "log"), back_nodes)
    # stable.radii runs backward from r1
    sidx = {float(r): i for i, r in enumerate(stable.radii)}
    weight = np.array([1.0 + k * k, np.sqrt(1.0 + k * k), np.sqrt(1.0 + k * k), 1.0])
    samples = []
    for a, ia in enumerate(idx):
        for ib in idx[a:]:
            t, s = reg.radii[ia], reg.radii[ib]
            y_t = stable.frames[sidx[float(t)]]
            y_s = stable.frames[sidx[float(s)]]
            led = stable.ledger[sidx[float(s)]] - stable.ledger[sidx[float(t)]]
            basis = np.column_stack([y_t, reg.frames[ia]])
            proj = np.linalg.solve(basis, np.eye(4))[:2]
            phi = np.exp(led) * y_s @ proj
            samples.append((np.log(s), np.log(t), _weighted_norm(phi, weight, weight)))
    fit = _fit(k, "core", samples, 0.0, "stable")
    if fit.residual > max_residual:
        raise IntegrationError(
            f"k={k}: no clean exponential regime (regression rms {fit.residual:.3f} > {max_residual})")
    return fit


# ---------------------------------------------------------------------------
# far field, closed form
# ---------------------------------------------------------------------------

def _curly_weight(k: int, r: float) -> np.ndarray:
    a = np.sqrt(1.0 + k * k / (r * r))
    return np.array([a, 1.0, a, 1.0])


def modified_blocks(k: int, lam: float, s: float, t: float):
    """``(φ^s, φ^u)``: the K- and I-parts of the ``(u, u')`` propagator of ``Δ_k u = √λ u`` from t to s."""
    mu = lam ** 0.25
    ks, dks = bessel_pair("K", k, mu * s, scaled=True)
    is_, dis = bessel_pair("I", k, mu * s, scaled=True)
    kt, dkt = bessel_pair("K", k, mu * t, scaled=True)
    it, dit = bessel_pair("I", k, mu * t, scaled=True)
    # undo the scalings: K(s) I(t) carries e^{-μ(s-t)}, I(s) K(t) carries e^{μ(s-t)}
    e_st = np.exp(-mu * (s - t))
    phi_s = t * e_st * np.outer([ks, mu * dks], [mu * dit, -it])
    phi_u = t / e_st * np.outer([is_, mu * dis], [-mu * dkt, kt])
    return phi_s, phi_u


def oscillatory_block(k: int, lam: float, s: float, t: float) -> np.ndarray:
    """``ψ``: the ``(u, u')`` propagator of ``Δ_k u = -√λ u`` from t to s."""
    mu = lam ** 0.25
    a, b, c, d = cross_products(k, mu * s, mu * t)
    return (np.pi * t / 2.0) * np.array([[mu * a, b], [mu * mu * c, mu * d]])


def far_propagators(k: int, lam: float, s: float, t: float):
    """``(Φ^s, Φ^{cu})`` on ``(u, u', v, v')`` in physical coordinates."""
    root = np.sqrt(lam)
    phi_s, phi_u = modified_blocks(k, lam, s, t)
    psi = oscillatory_block(k, lam, s, t)

    def assemble(phi, psi_):
        return 0.5 * np.block([[phi + psi_, (phi - psi_) / root], [root * (phi - psi_), phi + psi_]])

    return assemble(phi_s, np.zeros((2, 2))), assemble(phi_u, psi)


def far_pairs(r1: float, span: float = 30.0, n_start: int = 7, n_gap: int = 60):
    """``(s, t)`` pairs with ``r1 ≤ t ≤ s ≤ r1 + span``: gap 0 plus log-spaced gaps."""
    starts = np.linspace(r1, r1 + span, n_start)
    gaps = np.concatenate([[0.0], np.geomspace(1e-2, span, n_gap)])
    return [(t + g, t) for t in starts for g in gaps if t + g <= r1 + span + 1e-12]


def fit_far_rates(k_list: Sequence[int], lam: float, eps: float = 0.1, r1: float = 2.5,
                  span: float = 30.0, n_gap: int = 60) -> dict:
    """Fits of ``Φ^s`` (forward) and ``Φ^{cu}`` (backward) in the curly-X norms, per k.

    Per k: ``stable`` keeps its regression slope; ``stable_at_bound`` holds
    the rate at ``-(λ^{1/4} - eps)`` so its K is the constant of that bound;
    ``centre_unstable`` is measured against growth ``exp(eps (t - s))``.
    """
    mu = lam ** 0.25
    out = {}
    for k in k_list:
        k = abs(int(k))
        stable, centre = [], []
        for s, t in far_pairs(r1, span, n_gap=n_gap):
            ps, pcu_fwd = far_propagators(k, lam, s, t)
            stable.append((s, t, _weighted_norm(ps, _curly_weight(k, s), _curly_weight(k, t))))
            # centre-unstable runs from s back to t ≤ s
            _, pcu = far_propagators(k, lam, t, s)
            centre.append((t, s, _weighted_norm(pcu, _curly_weight(k, t), _curly_weight(k, s))))
        out[k] = {"stable": _fit(k, "far", stable, eps, "stable"),
                  "stable_at_bound": _fit(k, "far", stable, eps, "stable", fixed_rate=-(mu - eps)),
                  "centre_unstable": _fit(k, "far", centre, eps, "centre-unstable", fixed_rate=eps),
                  "stable_bound_rate": -(mu - eps)}
    return out


# ---------------------------------------------------------------------------
# Bessel cross-product inequalities
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InequalitySweep:
    eps: float
    k_list: tuple
    suprema: np.ndarray           # (4,) over everything
    per_k: dict                   # k -> (4,) suprema
    argmax_gap: np.ndarray        # (4,) t - s at the supremum
    max_gap: float
    diagonal_fourth: float        # max |Q4(s, s) - 2/π|
    diagonal_second: float        # max |Q2(s, s)|
    rows: np.ndarray = field(repr=False)  # (k, s, t, Q1, Q2, Q3, Q4)

    @property
    def finite(self) -> bool:
        return bool(np.all(np.isfinite(self.suprema)))

    def to_csv(self, path) -> None:
        """Columns: k, s, t, q1, q2, q3, q4 (normalised left-hand sides)."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["k", "s", "t", "q1", "q2", "q3", "q4"])
            for row in self.rows:
                writer.writerow([int(row[0])] + [f"{x:.17g}" for x in row[1:]])

    def to_json(self) -> dict:
        return {"eps": self.eps, "k_list": list(self.k_list), "suprema": self.suprema.tolist(),
                "per_k": {str(k): v.tolist() for k, v in self.per_k.items()},
                "argmax_gap": self.argmax_gap.tolist(), "max_gap": self.max_gap,
                "diagonal_fourth": self.diagonal_fourth, "diagonal_second": self.diagonal_second}


def bessel_quantities(k: int, s, t, eps: float) -> np.ndarray:
    """The four normalised cross-product quantities at ``t ≥ s``, shape ``(4,) + s.shape``."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    js, djs = bessel_pair("J", k, s)
    ys, dys = bessel_pair("Y", k, s)
    jt, djt = bessel_pair("J", k, t)
    yt, dyt = bessel_pair("Y", k, t)
    a = js * dyt - ys * djt
    b = -js * yt + ys * jt
    c = djs * dyt - dys * djt
    d = -djs * yt + dys * jt
    ws = np.sqrt(1.0 + k * k / s**2)
    wt = np.sqrt(1.0 + k * k / t**2)
    damp = np.exp(-eps * (t - s))
    return np.stack([ws * np.abs(a) * t / wt, ws * np.abs(b) * t, np.abs(c) * t / wt,
                     np.abs(d) * t]) * damp


def verify_bessel_inequalities(eps: float = 0.1, k_list: Sequence[int] = DEFAULT_K_LIST,
                               r1: float = 2.5, span: float = 30.0, n_start: int = 31,
                               n_gap: int = 60) -> InequalitySweep:
    if not eps > 0:
        raise ValueError("eps must be positive")
    starts = np.linspace(r1, r1 + span, n_start)
    gaps = np.concatenate([[0.0], np.geomspace(1e-2, span, n_gap)])
    S, G = np.meshgrid(starts, gaps, indexing="ij")
    keep = S + G <= r1 + span + 1e-12
    s, g = S[keep], G[keep]
    t = s + g
    rows, per_k = [], {}
    diag4 = diag2 = 0.0
    sup = np.zeros(4)
    arg = np.zeros(4)
    for k in k_list:
        k = abs(int(k))
        with np.errstate(over="raise", invalid="raise"):
            q = bessel_quantities(k, s, t, eps)
        per_k[k] = q.max(axis=1)
        on_diag = g == 0.0
        diag4 = max(diag4, float(np.max(np.abs(q[3, on_diag] - 2.0 / np.pi))))
        diag2 = max(diag2, float(np.max(np.abs(q[1, on_diag]))))
        for j in range(4):
            i = int(np.argmax(q[j]))
            if q[j, i] > sup[j]:
                sup[j], arg[j] = q[j, i], g[i]
        rows.append(np.column_stack([np.full(s.size, k), s, t, q.T]))
    return InequalitySweep(float(eps), tuple(int(k) for k in k_list), sup, per_k, arg, float(span),
                           diag4, diag2, np.concatenate(rows))


# ---------------------------------------------------------------------------
# adjoint bounds
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AdjointBoundReport:
    k_list: tuple
    common_K: float
    per_k_K: dict
    decay_rate: dict        # fitted exponent of |w4| on the flat core
    alignment: dict         # residual of W(s1) off span{(-k,1,0,0), (0,0,-k,1)}
    relation: dict          # |α + β√λ| / |β| for the coefficients in that span

    def to_json(self) -> dict:
        keys = lambda d: {str(k): v for k, v in d.items()}
        return {"k_list": list(self.k_list), "common_K": self.common_K, "per_k_K": keys(self.per_k_K),
                "decay_rate": keys(self.decay_rate), "alignment": keys(self.alignment),
                "relation": keys(self.relation)}


def adjoint_bound_check(k_list: Sequence[int], spec, adjoints: dict | None = None,
                        fit_radii: tuple[float, float] = (0.05, 1.0)) -> AdjointBoundReport:
    """``‖W(s)‖ ≤ K e^{|k|(s - s1)} ‖W(s1)‖`` on the core, and the large-k shape of ``W(s1)``.

    ``adjoints`` may carry precomputed ``W_{k,4}`` solutions keyed by k.
    """
    from .persistence import AdjointState, adjoint_w

    grid = spec.grid
    lam = spec.lambda0
    s1 = np.log(grid.r1)
    core = grid.core
    per_k, rate, align, rel = {}, {}, {}, {}
    for k in k_list:
        k = abs(int(k))
        w = (adjoints or {}).get(k) or adjoint_w(k, spec)
        cov = w.covectors("log")[: grid.i1 + 1]
        norms = np.array([AdjointState(k, r, c).norm_Xdual() for r, c in zip(core, cov)])
        s = np.log(core)
        bound = norms / (norms[-1] * np.exp(k * (s - s1)))
        per_k[k] = float(np.max(bound))
        sel = (core >= fit_radii[0]) & (core <= fit_radii[1]) & (np.abs(w.w4) > 0)
        rate[k] = float(np.polyfit(s[sel], np.log(np.abs(w.w4[sel])), 1)[0])
        basis = np.array([[-k, 1.0, 0.0, 0.0], [0.0, 0.0, -k, 1.0]]).T
        coef, *_ = np.linalg.lstsq(basis, cov[-1], rcond=None)
        align[k] = float(np.linalg.norm(cov[-1] - basis @ coef) / np.linalg.norm(cov[-1]))
        rel[k] = float(abs(coef[0] + coef[1] * np.sqrt(lam)) / abs(coef[1]))
    return AdjointBoundReport(tuple(int(abs(k)) for k in k_list), max(per_k.values()), per_k,
                              rate, align, rel)


def save_json(obj: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
