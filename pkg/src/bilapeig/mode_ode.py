"""Per-Fourier-mode 4×4 radial systems for ``(Δ² + theta - λ) u = 0``.

State ``U = (u, u', v, v')`` with ``v = Δ_k u``. In the core the independent
variable is ``s = log r`` and derivatives are ``d/ds`` (so ``u2 = r u_r``);
beyond ``r2`` it is ``r`` itself. The two are related by
``U_log = diag(1, r, 1, r) U_phys``.

Growth is handled by integrating QR-orthonormalised frames panel by panel and
keeping a log-scale ledger, so a frame column times ``exp(ledger)`` is always
the same exact solution.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .errors import ConstructionError, DomainError, IntegrationError
from .model import Potential, RadialFunction, RadialProfile
from .specfun import bessel_pair

RTOL = 1e-12
ATOL = 1e-15
MAX_GROWTH = 1e6

#: U^⊥ = J U = (-u4, u3, -u2, u1); J A + A^T J = 0 in log coordinates.
J = np.array([[0.0, 0.0, 0.0, -1.0],
              [0.0, 0.0, 1.0, 0.0],
              [0.0, -1.0, 0.0, 0.0],
              [1.0, 0.0, 0.0, 0.0]])


def perp(u: np.ndarray) -> np.ndarray:
    """``U^⊥ = (-u4, u3, -u2, u1)`` along the first axis."""
    return np.tensordot(J, u, axes=(1, 0))


def log_scaling(r) -> np.ndarray:
    """Diagonal of the physical → log conversion, ``(1, r, 1, r)``."""
    r = np.asarray(r, dtype=float)
    one = np.ones_like(r)
    return np.stack([one, r, one, r])


@dataclass(frozen=True, eq=False)
class ModeSystem:
    """Mode-``k`` system at spectral parameter ``lam`` for ``theta + rho_k``.

    ``rho_k`` adds to the potential in this mode's own equation (a radial
    perturbation when ``k = 0``).
    """

    k: int
    lam: float
    potential: Potential
    rho_k: RadialFunction | RadialProfile | None = None

    def __post_init__(self):
        if self.rho_k is not None:
            hi = getattr(self.rho_k, "support", (0.0, self.potential.grid.r1))[1]
            if hi > self.potential.grid.r1:
                raise ConstructionError("rho_k must be supported in [0, r1]")

    @property
    def grid(self):
        return self.potential.grid

    def q(self, r: float) -> float:
        """``λ - theta(r) - rho_k(r)``."""
        val = self.lam - self.potential.theta_scalar(r)
        if self.rho_k is not None:
            val -= float(self.rho_k(np.asarray(r)))
        return val

    def coordinate_at(self, r: float) -> str:
        return "log" if r <= self.grid.r2 else "phys"

    def matrix_log(self, s: float) -> np.ndarray:
        r = np.exp(s)
        k2, e2 = float(self.k * self.k), r * r
        return np.array([[0.0, 1.0, 0.0, 0.0],
                         [k2, 0.0, e2, 0.0],
                         [0.0, 0.0, 0.0, 1.0],
                         [self.q(r) * e2, 0.0, k2, 0.0]])

    def matrix_phys(self, r: float) -> np.ndarray:
        c = self.k * self.k / (r * r)
        return np.array([[0.0, 1.0, 0.0, 0.0],
                         [c, -1.0 / r, 1.0, 0.0],
                         [0.0, 0.0, 0.0, 1.0],
                         [self.q(r), 0.0, c, -1.0 / r]])

    def matrix(self, t: float, coordinate: str) -> np.ndarray:
        return self.matrix_log(t) if coordinate == "log" else self.matrix_phys(t)


@dataclass(frozen=True)
class ModeState:
    k: int
    radius: float
    components: np.ndarray
    coordinate: str = "phys"

    def __post_init__(self):
        object.__setattr__(self, "components", np.asarray(self.components))

    def to(self, coordinate: str) -> "ModeState":
        if coordinate == self.coordinate:
            return self
        d = log_scaling(self.radius)
        comp = self.components * d if coordinate == "log" else self.components / d
        return ModeState(self.k, self.radius, comp, coordinate)

    def norm_Xk(self) -> float:
        w = 1.0 + self.k**2
        u = np.abs(self.components) ** 2
        return float(np.sqrt(w * w * u[0] + w * u[1] + w * u[2] + u[3]))

    def norm_curlyX(self, s: float | None = None) -> float:
        s = self.radius if s is None else s
        w = 1.0 + self.k**2 / s**2
        u = np.abs(self.components) ** 2
        return float(np.sqrt(w * (u[0] + u[2]) + u[1] + u[3]))


@dataclass(frozen=True)
class ModeFrame:
    """Columns spanning a solution subspace at one radius; true columns are ``columns·exp(log_scale)``."""

    k: int
    radius: float
    columns: np.ndarray
    kind: str
    coordinate: str = "log"
    log_scale: float = 0.0

    def __post_init__(self):
        cols = np.asarray(self.columns)
        if cols.ndim == 1:
            cols = cols[:, None]
        object.__setattr__(self, "columns", cols)

    @property
    def states(self) -> list[ModeState]:
        return [ModeState(self.k, self.radius, c, self.coordinate) for c in self.columns.T]

    def to(self, coordinate: str) -> "ModeFrame":
        if coordinate == self.coordinate:
            return self
        d = log_scaling(self.radius)[:, None]
        cols = self.columns * d if coordinate == "log" else self.columns / d
        return ModeFrame(self.k, self.radius, cols, self.kind, coordinate, self.log_scale)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Frame solutions sampled at ``radii``.

    ``frames[i] * exp(ledger[i])`` is the same set of exact solutions at every
    node (the columns never get remixed), in the coordinate ``coordinates[i]``.
    """

    system: ModeSystem
    radii: np.ndarray
    frames: np.ndarray
    ledger: np.ndarray
    coordinates: np.ndarray
    kind: str = "core-regular"
    rtol: float = RTOL
    atol: float = ATOL
    panels: tuple = field(default=(), repr=False)
    adjoint: bool = False

    @property
    def ncols(self) -> int:
        return self.frames.shape[2]

    def frame(self, i: int) -> ModeFrame:
        return ModeFrame(self.system.k, float(self.radii[i]), self.frames[i], self.kind,
                         str(self.coordinates[i]), float(self.ledger[i]))

    def combine(self, coef, reference: int = -1, coordinate: str | None = None) -> np.ndarray:
        """Solution ``Σ_j coef_j col_j`` at every node, scaled by ``exp(-ledger[reference])``.

        With ``coordinate`` given, every node is converted to it.
        """
        coef = np.asarray(coef)
        vals = np.einsum("nij,j->ni", self.frames, coef) * np.exp(self.ledger - self.ledger[reference])[:, None]
        if coordinate is not None:
            d = log_scaling(self.radii).T
            if self.adjoint:  # covectors: W_phys = D W_log
                d = 1.0 / d
            to_log = (self.coordinates == "phys") & (coordinate == "log")
            to_phys = (self.coordinates == "log") & (coordinate == "phys")
            vals = np.where(to_log[:, None], vals * d, vals)
            vals = np.where(to_phys[:, None], vals / d, vals)
        return vals

    def local_defect(self, stride: int = 25, substeps: int = 64) -> float:
        """Max relative mismatch between stored nodes and an independent RK4 step between them.

        The RK4 substep count grows with the local exponential rate so the
        reference itself stays well below the integrator tolerance.
        """
        worst = 0.0
        n = len(self.radii)
        for i in range(0, n - 1, stride):
            if self.coordinates[i] != self.coordinates[i + 1]:
                continue
            coord = str(self.coordinates[i])
            t0, t1 = _t_of(self.radii[i], coord), _t_of(self.radii[i + 1], coord)
            y = self.frames[i].astype(complex if np.iscomplexobj(self.frames) else float)
            y = y * np.exp(self.ledger[i] - self.ledger[i + 1])
            rate = _growth_rate(self.system, t0, coord)
            steps = max(substeps, int(np.ceil(abs(t1 - t0) * rate / 0.005)))
            h = (t1 - t0) / steps
            t = t0
            sign = -1.0 if self.adjoint else 1.0
            for _ in range(steps):
                a1, am, a2 = (self.system.matrix(x, coord) for x in (t, t + h / 2, t + h))
                if self.adjoint:
                    a1, am, a2 = sign * a1.T, sign * am.T, sign * a2.T
                k1 = a1 @ y
                k2 = am @ (y + h / 2 * k1)
                k3 = am @ (y + h / 2 * k2)
                k4 = a2 @ (y + h * k3)
                y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
                t += h
            ref = self.frames[i + 1]
            scale = max(np.max(np.abs(ref)), 1e-300)
            worst = max(worst, float(np.max(np.abs(y - ref)) / scale))
        return worst

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            head = ["r", "coordinate"]
            for j in range(self.ncols):
                head += [f"u1_{j}", f"u2_{j}", f"u3_{j}", f"u4_{j}"]
            writer.writerow(head + ["ledger"])
            for i, r in enumerate(self.radii):
                vals = self.frames[i].T.reshape(-1)
                writer.writerow([f"{r:.17g}", self.coordinates[i]]
                                + [f"{v:.17g}" for v in vals] + [f"{self.ledger[i]:.17g}"])


def _t_of(r: float, coordinate: str) -> float:
    return float(np.log(r)) if coordinate == "log" else float(r)


# ---------------------------------------------------------------------------
# propagation
# ---------------------------------------------------------------------------

def _growth_rate(system: ModeSystem, t: float, coordinate: str) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(system.matrix(t, coordinate)).real)))


def _propagate(system: ModeSystem, coordinate: str, t0: float, Y0: np.ndarray,
               t_nodes: np.ndarray, rtol: float, atol: float, adjoint: bool = False):
    """Integrate a frame from ``t0`` through the monotone ``t_nodes``.

    Returns ``frames (n, 4, m)``, ``ledger (n,)`` and panel boundaries; column
    ``j`` of ``frames[i]·exp(ledger[i])`` is the exact solution started from
    ``Y0[:, j]``.
    """
    Y0 = np.asarray(Y0)
    m = Y0.shape[1]
    dtype = complex if np.iscomplexobj(Y0) else float
    n = len(t_nodes)
    frames = np.zeros((n, 4, m), dtype=dtype)
    ledger = np.zeros(n)
    scale0 = float(np.max(np.abs(Y0))) if Y0.size else 0.0
    if scale0 == 0.0:
        return frames, ledger, ()
    Q, C = np.linalg.qr(Y0 / scale0)
    L = np.log(scale0)
    direction = 1.0 if (n == 0 or t_nodes[-1] >= t0) else -1.0

    def matrix(t):
        a = system.matrix(t, coordinate)
        return -a.T if adjoint else a

    def rhs(t, y):
        return (matrix(t) @ y.reshape(4, m)).reshape(-1)

    t_end = t_nodes[-1] if n else t0
    t = t0
    i = 0
    panels = [t0]
    while i < n:
        rate = max(_growth_rate(system, t, coordinate), 1.0)
        length = np.log(MAX_GROWTH) / rate
        t_next = t + direction * length
        if direction * (t_end - t_next) <= 0.25 * length:
            t_next = t_end
        j = i
        while j < n and direction * (t_nodes[j] - t_next) <= 0:
            j += 1
        if j == i:  # panel holds no node; still advance
            evals = None
        else:
            t_next = t_nodes[j - 1] if j == n else t_next
            evals = t_nodes[i:j]
        sol = solve_ivp(rhs, (t, t_next), Q.reshape(-1), method="DOP853", rtol=rtol, atol=atol,
                        t_eval=None if evals is None else np.append(evals, t_next) if evals[-1] != t_next else evals)
        if sol.status != 0 or not np.all(np.isfinite(sol.y)):
            raise IntegrationError(
                f"mode {system.k}, λ={system.lam}: integrator failed at t={sol.t[-1] if sol.t.size else t}"
                f" ({sol.message})")
        for col in range(j - i):
            Z = sol.y[:, col].reshape(4, m) @ C
            big = float(np.max(np.abs(Z)))
            if big > 0.0:
                frames[i + col] = Z / big
                ledger[i + col] = L + np.log(big)
            else:
                ledger[i + col] = L
        Zend = sol.y[:, -1].reshape(4, m)
        Q, R = np.linalg.qr(Zend)
        C = R @ C
        big = float(np.max(np.abs(C)))
        if big == 0.0:
            break
        C = C / big
        L += np.log(big)
        t = t_next
        i = j
        panels.append(t)
    return frames, ledger, tuple(panels)


def _segments(system: ModeSystem, r_from: float, r_nodes: np.ndarray):
    """Split a monotone radius sweep at ``r2`` into (coordinate, nodes) pieces."""
    r2 = system.grid.r2
    forward = r_nodes.size == 0 or r_nodes[-1] >= r_from
    coords = np.where(r_nodes <= r2, "log", "phys")
    first = system.coordinate_at(r_from)
    pieces = []
    if forward and first == "log" and np.any(coords == "phys"):
        pieces = [("log", r_nodes[coords == "log"], r2), ("phys", r_nodes[coords == "phys"], None)]
    elif (not forward) and first == "phys" and np.any(coords == "log"):
        pieces = [("phys", r_nodes[coords == "phys"], r2), ("log", r_nodes[coords == "log"], None)]
    else:
        pieces = [(first, r_nodes, None)]
    return pieces


def integrate_frame(system: ModeSystem, frame: ModeFrame, r_nodes: Sequence[float],
                    rtol: float = RTOL, atol: float = ATOL, adjoint: bool = False,
                    kind: str | None = None) -> Trajectory:
    """Propagate ``frame`` (at ``frame.radius``) through the monotone radii ``r_nodes``.

    Forward systems switch from log to physical coordinates at ``r2``; with
    ``adjoint=True`` the adjoint system ``W' = -A^T W`` is integrated instead
    (covectors convert with the inverse scaling).
    """
    r_nodes = np.asarray(r_nodes, dtype=float)
    r_from = float(frame.radius)
    coord0 = system.coordinate_at(r_from)
    cols = _convert(frame.columns, r_from, frame.coordinate, coord0, adjoint)
    L0 = frame.log_scale
    all_frames, all_ledger, all_coords, panels = [], [], [], []
    t_start_r = r_from
    for coord, nodes, r_switch in _segments(system, r_from, r_nodes):
        at_switch = r_switch is None or (nodes.size and nodes[-1] == r_switch)
        targets = nodes if at_switch else np.append(nodes, r_switch)
        t_nodes = np.array([_t_of(r, coord) for r in targets])
        fr, led, pan = _propagate(system, coord, _t_of(t_start_r, coord), cols, t_nodes, rtol, atol, adjoint)
        led = led + L0
        panels.extend(pan)
        keep = len(nodes)
        all_frames.append(fr[:keep])
        all_ledger.append(led[:keep])
        all_coords += [coord] * keep
        if r_switch is not None:
            nxt = "phys" if coord == "log" else "log"
            cols = _convert(fr[-1], r_switch, coord, nxt, adjoint)
            L0 = led[-1]
            t_start_r = r_switch
    frames = np.concatenate(all_frames) if all_frames else np.zeros((0, 4, cols.shape[1]))
    ledger = np.concatenate(all_ledger) if all_ledger else np.zeros(0)
    return Trajectory(system, r_nodes, frames, ledger, np.array(all_coords, dtype=object),
                      kind or frame.kind, rtol, atol, tuple(panels), adjoint)


def _convert(cols: np.ndarray, r: float, src: str, dst: str, adjoint: bool) -> np.ndarray:
    if src == dst:
        return np.array(cols)
    d = log_scaling(r)[:, None]
    # states: U_log = D U_phys; covectors: W_phys = D W_log
    to_log = dst == "log"
    if adjoint:
        to_log = not to_log
    return cols * d if to_log else cols / d


def integrate_core(system: ModeSystem, frame: ModeFrame, r_from: float, r_to: float,
                   nodes: Sequence[float] | None = None, rtol: float = RTOL,
                   atol: float = ATOL) -> Trajectory:
    """Propagate ``frame`` from ``r_from`` to ``r_to``, sampling the grid nodes in between.

    ``nodes`` overrides the sample radii (they must lie between the endpoints).
    The returned trajectory always ends at ``r_to``.
    """
    if abs(frame.radius - r_from) > 1e-14 * max(1.0, r_from):
        raise ConstructionError("frame radius does not match r_from")
    if r_to > system.grid.r_max * (1 + 1e-14):
        raise ConstructionError("r_to exceeds r_max")
    if nodes is None:
        grid = system.grid.nodes
        lo, hi = min(r_from, r_to), max(r_from, r_to)
        inner = grid[(grid > lo) & (grid < hi)]
        nodes = inner if r_to > r_from else inner[::-1]
    nodes = np.append(np.asarray(nodes, dtype=float), r_to)
    return integrate_frame(system, frame, nodes, rtol, atol)


def integrate_adjoint(system: ModeSystem, covectors, r_from: float, r_nodes: Sequence[float],
                      coordinate: str | None = None, rtol: float = RTOL,
                      atol: float = ATOL) -> Trajectory:
    """Propagate covectors of ``W' = -A^T W`` from ``r_from`` through ``r_nodes``.

    ``⟨W, U⟩`` is then constant along any forward solution ``U`` of the same
    system, in either coordinate.
    """
    coordinate = coordinate or system.coordinate_at(r_from)
    frame = ModeFrame(system.k, float(r_from), np.asarray(covectors), "adjoint", coordinate)
    return integrate_frame(system, frame, r_nodes, rtol, atol, adjoint=True, kind="adjoint")


# ---------------------------------------------------------------------------
# core start and far field
# ---------------------------------------------------------------------------

def _series_coefficients(k: int, c: float, r_max: float, tol: float = 1e-18):
    """Coefficients of the two regular solutions ``Σ a_n r^{k+2n}``, ``v = Σ b_n r^{k+2n}``.

    Valid while ``λ - theta = c`` is constant. Basis A: ``a0 = 1, b0 = 0``;
    basis B: ``a0 = 0, b0 = 1``.
    """
    a = [np.array([1.0, 0.0])]
    b = [np.array([0.0, 1.0])]
    n = 0
    while True:
        den = 4.0 * (n + 1) * (n + 1 + k)
        a.append(b[n] / den)
        b.append(c * a[n] / den)
        n += 1
        term = max(np.max(np.abs(a[n])), np.max(np.abs(b[n]))) * r_max ** (2 * n)
        if (term < tol and n > 2) or n > 400:
            break
    return np.array(a), np.array(b)


def series_values(k: int, c: float, r) -> np.ndarray:
    """Regular solutions divided by ``r^k`` in log coordinates, shape ``r.shape + (4, 2)``."""
    k = abs(int(k))
    r = np.asarray(r, dtype=float)
    a, b = _series_coefficients(k, c, float(np.max(r)) if r.size else 1.0)
    n = np.arange(a.shape[0])
    pw = r[..., None] ** (2 * n)              # (..., N)
    kn = (k + 2 * n).astype(float)
    out = np.empty(r.shape + (4, 2))
    out[..., 0, :] = pw @ a
    out[..., 1, :] = pw @ (kn[:, None] * a)
    out[..., 2, :] = pw @ b
    out[..., 3, :] = pw @ (kn[:, None] * b)
    return out


def core_series_init(system: ModeSystem, r_start: float) -> ModeFrame:
    """Unit-column regular frame at ``r_start`` (log coordinates), ledger ``k·log r_start``."""
    pot = system.potential
    limit = min(1.0, pot.series_radius)
    if system.rho_k is not None:
        limit = min(limit, getattr(system.rho_k, "support", (0.0, 0.0))[0])
    if not (0.0 < r_start <= limit):
        raise DomainError(
            f"r_start={r_start} outside (0, {limit}] where λ - theta is constant")
    c = system.lam - pot.flat_value
    cols = series_values(system.k, c, r_start)
    cols = cols / np.linalg.norm(cols, axis=0)
    return ModeFrame(system.k, r_start, cols, "core-regular", "log", abs(system.k) * np.log(r_start))


def _check_lam(lam: float):
    if not lam > 0.0:
        raise DomainError(f"far field needs λ > 0, got {lam}")


def far_block(kind: str, k: int, lam: float, r) -> np.ndarray:
    """Far-field solution built on ``kind`` ∈ {I, K, J, Y}, physical coordinates, shape ``(4,) + r.shape``."""
    _check_lam(lam)
    mu = lam**0.25
    val, der = bessel_pair(kind, k, mu * np.asarray(r, dtype=float))
    sign = 1.0 if kind in ("I", "K") else -1.0
    root = sign * np.sqrt(lam)
    return np.stack([val, mu * der, root * val, root * mu * der])


def far_decaying_state(k: int, lam: float, r: float) -> ModeState:
    """``(K_k(μr), μK_k'(μr), √λK_k, μ√λK_k')`` with ``μ = λ^{1/4}``."""
    _check_lam(lam)
    mu = lam**0.25
    # scaled evaluation then restore: finite for any r where the product is representable
    val, der = bessel_pair("K", k, mu * r, scaled=True)
    fac = np.exp(-mu * r)
    val, der = float(val) * fac, float(der) * fac
    root = np.sqrt(lam)
    return ModeState(k, float(r), np.array([val, mu * der, root * val, root * mu * der]), "phys")


def far_full_basis(k: int, lam: float, r: float) -> ModeFrame:
    """Columns built on ``I, K, J, Y`` (in that order), physical coordinates."""
    cols = np.stack([far_block(kind, k, lam, r) for kind in ("I", "K", "J", "Y")], axis=1)
    return ModeFrame(k, float(r), cols, "far-full", "phys")


# ---------------------------------------------------------------------------
# the regular frame on the grid
# ---------------------------------------------------------------------------

def regular_frame(system: ModeSystem, r_end: float | None = None, r_start: float | None = None,
                  rtol: float = RTOL, atol: float = ATOL, sample: bool = True) -> Trajectory:
    """Core-regular 2-frame from the series start to ``r_end`` (default ``r1``).

    With ``sample`` the trajectory holds every grid node up to ``r_end``
    (nodes below ``r_start`` come straight from the series); otherwise only
    ``r_end``. Columns are the solutions whose unit-normalised start values are
    the series bases A and B at ``r_start``.
    """
    grid = system.grid
    r_end = grid.r1 if r_end is None else r_end
    if r_start is None:
        limit = min(0.5, system.potential.series_radius)
        if system.rho_k is not None:
            limit = min(limit, getattr(system.rho_k, "support", (0.0, 0.0))[0])
        r_start = limit
    start = core_series_init(system, r_start)
    if not sample:
        return integrate_core(system, start, r_start, r_end, nodes=[], rtol=rtol, atol=atol)
    nodes = grid.nodes[grid.nodes <= r_end * (1 + 1e-14)]
    head = nodes[nodes <= r_start]
    tail = nodes[nodes > r_start]
    traj = integrate_core(system, start, r_start, r_end, nodes=tail[tail < r_end], rtol=rtol, atol=atol)
    if head.size == 0:
        return traj
    # start columns were divided by the series column norms
    c = system.lam - system.potential.flat_value
    norms = np.linalg.norm(series_values(system.k, c, r_start), axis=0)
    vals = series_values(system.k, c, head) / norms
    big = np.max(np.abs(vals), axis=(1, 2))
    frames = np.concatenate([vals / big[:, None, None], traj.frames])
    ledger = np.concatenate([abs(system.k) * np.log(head) + np.log(big), traj.ledger])
    coords = np.concatenate([np.array(["log"] * head.size, dtype=object), traj.coordinates])
    radii = np.concatenate([head, traj.radii])
    return Trajectory(system, radii, frames, ledger, coords, "core-regular", rtol, atol, traj.panels)


def random_unit(rng: np.random.Generator, shape) -> np.ndarray:
    x = rng.standard_normal(shape)
    return x / np.linalg.norm(x, axis=0)


def duality_drift(system: ModeSystem, rng: np.random.Generator, n_pairs: int = 1,
                  r_from: float | None = None, r_to: float | None = None, rtol: float = RTOL,
                  atol: float = ATOL) -> np.ndarray:
    """Per pair, max of ``|⟨W(r), U(r)⟩ - ⟨W, U⟩(r_from)| / (|W(r)| |U(r)|)`` over the grid.

    ``U_j`` solve the forward system and ``W_j`` the adjoint one, from random
    unit data at ``r_from``; up to four pairs share one integration as frame
    columns (columns are never remixed). The drift is relative because both
    factors can grow by hundreds of orders of magnitude over the range.
    """
    if not 1 <= n_pairs <= 4:
        raise ValueError("n_pairs must be between 1 and 4")
    grid = system.grid
    r_from = grid.r_min if r_from is None else float(r_from)
    r_to = grid.r_max if r_to is None else float(r_to)
    nodes = grid.nodes[(grid.nodes > r_from) & (grid.nodes <= r_to)]
    coord = system.coordinate_at(r_from)
    u0 = random_unit(rng, (4, n_pairs))
    w0 = random_unit(rng, (4, n_pairs))
    fwd = integrate_frame(system, ModeFrame(system.k, r_from, u0, "random", coord), nodes, rtol, atol)
    adj = integrate_adjoint(system, w0, r_from, nodes, coord, rtol, atol)
    c0 = np.einsum("ij,ij->j", w0, u0)
    pair = np.einsum("nij,nij->nj", adj.frames, fwd.frames)
    scale = np.exp(-(fwd.ledger + adj.ledger))[:, None]
    size = np.linalg.norm(adj.frames, axis=1) * np.linalg.norm(fwd.frames, axis=1)
    return np.max(np.abs(pair - c0[None, :] * scale) / size, axis=0)
