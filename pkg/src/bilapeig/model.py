"""Radial grid, the explicit potential with embedded eigenvalue 1, and perturbations.

The potential is generated from a positive radial function ``u0`` that equals
1 on ``[0, 1]`` and ``K_0(r)`` for ``r >= 2``; ``theta = (u0 - Δ²u0) / u0`` so
``(Δ² + theta) u0 = u0`` holds by construction. Radial derivatives up to order
four are carried analytically so theta can be evaluated anywhere.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from bisect import bisect_left
from functools import cached_property
from math import comb
from pathlib import Path
from typing import Callable, Mapping

import numpy as np
from numpy.polynomial import Chebyshev, Polynomial
from scipy import interpolate, optimize, special

from .errors import ConstructionError

_DERIVS = 4  # Δ² needs four radial derivatives


# ---------------------------------------------------------------------------
# smooth steps and radial generator functions
# ---------------------------------------------------------------------------

def _poly_step() -> list[Polynomial]:
    # regularised incomplete beta I_x(6, 6): C^5 step from 0 to 1 on [0, 1]
    slope = Polynomial([0.0, 1.0]) ** 5 * Polynomial([1.0, -1.0]) ** 5 / special.beta(6, 6)
    step = slope.integ()
    return [step.deriv(n) if n else step for n in range(_DERIVS + 1)]


_POLY_STEP = _poly_step()


def _jet_mul(a, b):
    n = a.shape[0]
    out = np.zeros_like(a)
    for i in range(n):
        out[i] = sum(a[j] * b[i - j] for j in range(i + 1))
    return out


def _jet_recip(a):
    n = a.shape[0]
    out = np.zeros_like(a)
    out[0] = 1.0 / a[0]
    for i in range(1, n):
        out[i] = -sum(a[j] * out[i - j] for j in range(1, i + 1)) / a[0]
    return out


def _jet_exp(a):
    # Taylor coefficients of exp(a) via a' exp(a) recursion
    n = a.shape[0]
    out = np.zeros_like(a)
    out[0] = np.exp(a[0])
    for i in range(1, n):
        out[i] = sum(j * a[j] * out[i - j] for j in range(1, i + 1)) / i
    return out


def _exp_step_derivs(x):
    """Derivatives 0..4 of the C^inf step f(x)/(f(x)+f(1-x)), f = exp(-1/x)."""
    x = np.asarray(x, dtype=float)
    out = np.zeros((_DERIVS + 1,) + x.shape)
    out[0] = np.where(x >= 1.0, 1.0, 0.0)
    inner = (x > 0.0) & (x < 1.0)
    if not inner.any():
        return out
    xi = x[inner]
    n = _DERIVS + 1
    # Taylor jets in the increment h around xi
    t = np.zeros((n,) + xi.shape)
    t[0], t[1] = xi, 1.0
    tm = np.zeros_like(t)
    tm[0], tm[1] = 1.0 - xi, -1.0
    f = _jet_exp(-_jet_recip(t))
    g = _jet_exp(-_jet_recip(tm))
    step = _jet_mul(f, _jet_recip(f + g))
    fact = np.array([float(np.prod(np.arange(1, i + 1))) for i in range(n)])
    out[:, inner] = step * fact.reshape((-1,) + (1,) * xi.ndim)
    return out


def step_derivs(x, kind: str = "poly5"):
    """Derivatives 0..4 of a smooth 0→1 step on ``[0, 1]``, shape ``(5,) + x.shape``."""
    x = np.asarray(x, dtype=float)
    if kind == "exp":
        return _exp_step_derivs(x)
    if kind != "poly5":
        raise ValueError(f"unknown step kind {kind!r}")
    xc = np.clip(x, 0.0, 1.0)
    out = np.stack([p(xc) for p in _POLY_STEP])
    outside = (x <= 0.0) | (x >= 1.0)
    out[1:, outside] = 0.0
    return out


def k0_derivs(r):
    """Derivatives 0..4 of K_0 at ``r`` from K_n^{(m)} = (-1/2)^m Σ C(m,j) K_{2j-m}."""
    r = np.asarray(r, dtype=float)
    kn = {n: special.kv(n, r) for n in range(_DERIVS + 1)}
    out = np.empty((_DERIVS + 1,) + r.shape)
    for m in range(_DERIVS + 1):
        acc = sum(comb(m, j) * kn[abs(2 * j - m)] for j in range(m + 1))
        out[m] = (-0.5) ** m * acc
    return out


class RadialFunction:
    """A radial function with analytic derivatives up to fourth order."""

    support: tuple[float, float] = (0.0, np.inf)

    def derivs(self, r) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, r):
        return self.derivs(r)[0]

    def __add__(self, other: "RadialFunction") -> "RadialFunction":
        return Combination(((1.0, self), (1.0, other)))

    def scaled(self, factor: float) -> "RadialFunction":
        return Combination(((float(factor), self),))


@dataclass(frozen=True)
class Combination(RadialFunction):
    terms: tuple[tuple[float, RadialFunction], ...]

    @property
    def support(self):
        live = [f.support for c, f in self.terms if c != 0.0]
        if not live:
            return (0.0, 0.0)
        return (min(s[0] for s in live), max(s[1] for s in live))

    def derivs(self, r):
        return sum(c * f.derivs(r) for c, f in self.terms)


@dataclass(frozen=True)
class BlendSpec:
    """How ``u0`` passes from 1 to ``K_0`` on ``[start, end]``."""

    kind: str = "poly5"
    start: float = 1.0
    end: float = 2.0


@dataclass(frozen=True)
class BlendGenerator(RadialFunction):
    """``u0 = 1 + χ·(K_0 - 1)``: 1 before ``blend.start``, ``K_0`` after ``blend.end``."""

    blend: BlendSpec = BlendSpec()

    def derivs(self, r):
        r = np.asarray(r, dtype=float)
        a, b = self.blend.start, self.blend.end
        out = np.zeros((_DERIVS + 1,) + r.shape)
        out[0] = 1.0
        outer = r >= b
        if outer.any():
            out[:, outer] = k0_derivs(r[outer])
        mid = (r > a) & (r < b)
        if mid.any():
            rm = r[mid]
            width = b - a
            chi = step_derivs((rm - a) / width, self.blend.kind)
            chi *= (1.0 / width) ** np.arange(_DERIVS + 1).reshape(-1, 1)
            g = k0_derivs(rm)
            g[0] -= 1.0
            for n in range(_DERIVS + 1):
                out[n, mid] = (n == 0) + sum(comb(n, j) * chi[j] * g[n - j] for j in range(n + 1))
        return out


@dataclass(frozen=True)
class PolynomialBump(RadialFunction):
    """``height·(1 - ((r - center)/half_width)²)^power`` on its support, 0 elsewhere.

    ``power = 6`` vanishes to order six at both ends, so the bump is C^5.
    """

    center: float = 0.75
    half_width: float = 0.25
    height: float = 1.0
    power: int = 6

    @property
    def support(self):
        return (self.center - self.half_width, self.center + self.half_width)

    def derivs(self, r):
        r = np.asarray(r, dtype=float)
        x = (r - self.center) / self.half_width
        poly = self.height * Polynomial([1.0, 0.0, -1.0]) ** self.power
        out = np.zeros((_DERIVS + 1,) + r.shape)
        inside = np.abs(x) < 1.0
        xi = x[inside]
        for n in range(_DERIVS + 1):
            p = poly.deriv(n) if n else poly
            out[n, inside] = p(xi) / self.half_width**n
        return out


@dataclass(frozen=True)
class Indicator(RadialFunction):
    """Indicator of ``[a, b]``, valued 1/2 at the endpoints.

    The half value makes Simpson's rule exact across a jump that sits on a
    panel boundary. Only usable as a sampled profile or perturbation.
    """

    a: float = 0.0
    b: float = 1.0

    @property
    def support(self):
        return (self.a, self.b)

    def derivs(self, r):
        r = np.asarray(r, dtype=float)
        out = np.zeros((_DERIVS + 1,) + r.shape)
        out[0] = ((r > self.a) & (r < self.b)) + 0.5 * ((r == self.a) | (r == self.b))
        return out


def bilaplacian(d: np.ndarray, r) -> np.ndarray:
    """Radial Δ² from derivatives ``d[0..4]`` at ``r > 0``."""
    r = np.asarray(r, dtype=float)
    return d[4] + 2.0 * d[3] / r - d[2] / r**2 + d[1] / r**3


# ---------------------------------------------------------------------------
# grid and profiles
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Uniform radial nodes ``h, 2h, ..., r_max`` with ``r1`` a node.

    Integrals over ``[0, r1]`` use composite Simpson on the nodes plus the
    virtual node ``r = 0`` (where every ``r dr`` integrand vanishes).
    """

    nodes: np.ndarray
    r1: float
    r2: float
    r3: float

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        object.__setattr__(self, "nodes", nodes)
        nodes.setflags(write=False)
        if nodes.ndim != 1 or nodes.size < 3 or np.any(np.diff(nodes) <= 0) or nodes[0] <= 0:
            raise ConstructionError("grid nodes must be strictly increasing positive reals")
        if not (nodes[0] < 1.0 < 2.0 < self.r1 <= nodes[-1]):
            raise ConstructionError("grid needs 0 < r_min < 1 < 2 < r1 <= r_max")
        if not (self.r2 > max(1.0, self.r1) and self.r3 > self.r2):
            raise ConstructionError("grid needs r2 > max(1, r1) and r3 > r2")
        idx = int(np.argmin(np.abs(nodes - self.r1)))
        if abs(nodes[idx] - self.r1) > 1e-12 * self.r1:
            raise ConstructionError("r1 must be a grid node")
        h = np.diff(nodes[: idx + 1])
        if idx % 2 == 0 or not np.allclose(h, nodes[0], rtol=1e-9, atol=0.0):
            raise ConstructionError("core nodes must be uniform (h, 2h, ..., r1) with an even panel count")

    @classmethod
    def uniform(cls, r1=2.5, r2=3.0, r3=4.0, r_max=14.0, core_points=1000) -> "RadialGrid":
        if core_points < 2 or core_points % 2:
            raise ConstructionError("core_points must be a positive even integer")
        h = r1 / core_points
        n = int(round(r_max / h))
        nodes = h * np.arange(1, n + 1)
        nodes[core_points - 1] = r1
        return cls(nodes, float(r1), float(r2), float(r3))

    @property
    def h(self) -> float:
        return float(self.nodes[0])

    @property
    def r_min(self) -> float:
        return float(self.nodes[0])

    @property
    def r_max(self) -> float:
        return float(self.nodes[-1])

    @property
    def i1(self) -> int:
        """Index of ``r1`` in ``nodes``."""
        return int(round(self.r1 / self.h)) - 1

    @property
    def core(self) -> np.ndarray:
        return self.nodes[: self.i1 + 1]

    @property
    def far(self) -> np.ndarray:
        return self.nodes[self.i1 + 1:]

    @property
    def s1(self) -> float:
        return float(self.s_of_r(self.r1))

    @property
    def core_weights(self) -> np.ndarray:
        """Simpson weights for ``∫_0^{r1} f r dr`` at the core nodes (r factor folded in)."""
        n = self.i1 + 1
        w = np.where(np.arange(1, n + 1) % 2 == 1, 4.0, 2.0)
        w[-1] = 1.0
        return w * self.h / 3.0 * self.core

    def integrate_core(self, values) -> complex | float:
        """``∫_0^{r1} f(r) r dr`` from samples on the core nodes (or the full grid)."""
        values = np.asarray(values)
        return np.sum(self.core_weights * values[..., : self.i1 + 1], axis=-1)

    def refined(self, factor: int = 2) -> "RadialGrid":
        return RadialGrid.uniform(self.r1, self.r2, self.r3, self.r_max, (self.i1 + 1) * factor)

    # -- change of variable -------------------------------------------------
    def _blend(self, r):
        width = self.r3 - self.r2
        d = step_derivs((np.asarray(r, dtype=float) - self.r2) / width)
        return d[0], d[1] / width

    def s_of_r(self, r):
        """``log r`` for ``r <= r2``, ``r`` for ``r >= r3``, a smooth increasing blend between."""
        r = np.asarray(r, dtype=float)
        chi = self._blend(r)[0]
        return (1.0 - chi) * np.log(r) + chi * r

    def ds_dr(self, r):
        r = np.asarray(r, dtype=float)
        chi, dchi = self._blend(r)
        return (1.0 - chi) / r + chi + dchi * (r - np.log(r))

    def r_of_s(self, s):
        s = np.asarray(s, dtype=float)
        out = np.where(s <= np.log(self.r2), np.exp(np.minimum(s, 700.0)), s)
        mid = (s > np.log(self.r2)) & (s < self.r3)
        for idx in zip(*np.nonzero(mid)):
            target = float(s[idx])
            out[idx] = optimize.brentq(lambda r: float(self.s_of_r(r)) - target,
                                       self.r2, self.r3, xtol=1e-15)
        return out if out.ndim else float(out)


@dataclass(frozen=True, eq=False)
class RadialProfile:
    """Samples of a radial function on ``grid.nodes``, optionally with an exact evaluator."""

    grid: RadialGrid
    samples: np.ndarray
    mode: int | str = "radial"
    func: Callable | None = field(default=None, repr=False)

    def __post_init__(self):
        samples = np.asarray(self.samples)
        if samples.shape != self.grid.nodes.shape:
            raise ConstructionError(
                f"profile has {samples.shape} samples for {self.grid.nodes.size} nodes"
            )
        object.__setattr__(self, "samples", samples)

    @classmethod
    def from_function(cls, grid: RadialGrid, func: Callable, mode: int | str = "radial"):
        return cls(grid, np.asarray(func(grid.nodes)), mode, func)

    def __call__(self, r):
        if self.func is not None:
            return self.func(r)
        return self._spline(r)

    @cached_property
    def _spline(self):
        return interpolate.CubicSpline(self.grid.nodes, self.samples)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            cplx = np.iscomplexobj(self.samples)
            writer.writerow(["r", "value_real", "value_imag"] if cplx else ["r", "value"])
            for r, v in zip(self.grid.nodes, self.samples):
                row = [r, v.real, v.imag] if cplx else [r, v]
                writer.writerow([f"{x:.17g}" for x in row])

    @classmethod
    def from_csv(cls, path, grid: RadialGrid, mode: int | str = "radial") -> "RadialProfile":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        if not np.allclose(data[:, 0], grid.nodes, rtol=1e-14, atol=0.0):
            raise ConstructionError("CSV radii do not match the grid")
        vals = data[:, 1] + 1j * data[:, 2] if data.shape[1] == 3 else data[:, 1]
        return cls(grid, vals, mode)

    def to_json(self) -> dict:
        return {"mode": self.mode, "r": self.grid.nodes.tolist(), "value": _encode(self.samples)}

    @classmethod
    def from_json(cls, obj: Mapping, grid: RadialGrid) -> "RadialProfile":
        if not np.allclose(obj["r"], grid.nodes, rtol=1e-14, atol=0.0):
            raise ConstructionError("JSON radii do not match the grid")
        return cls(grid, _decode(obj["value"]), obj.get("mode", "radial"))


def _encode(values: np.ndarray) -> list:
    if np.iscomplexobj(values):
        return [[float(v.real), float(v.imag)] for v in values]
    return [float(v) for v in values]


def _decode(values) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    return arr[:, 0] + 1j * arr[:, 1] if arr.ndim == 2 else arr


# ---------------------------------------------------------------------------
# potential
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Potential:
    """Radial potential ``theta`` generated from ``u0`` (or given directly).

    ``flat_radius``/``flat_value``: theta is exactly ``flat_value`` on
    ``[0, flat_radius]``. ``support_radius``: theta vanishes beyond it.
    ``radial_extra`` holds added radial perturbations ``(eps, function)``;
    they do not change ``u0`` (so ``u0`` is no longer an eigenfunction).
    """

    grid: RadialGrid
    generator: RadialFunction | None
    generator_u0: RadialProfile | None
    theta: RadialProfile
    support_radius: float = 2.0
    flat_radius: float = 1.0
    flat_value: float = 1.0
    bump_amplitude: float = 0.0
    bump: RadialFunction | None = None
    radial_extra: tuple[tuple[float, RadialFunction], ...] = ()

    def theta_at(self, r):
        r = np.asarray(r, dtype=float)
        if self.generator is None:
            out = np.full(r.shape, self.flat_value) * (r <= self.flat_radius)
        else:
            out = _theta_from(self.generator, r, self.flat_radius, self.flat_value,
                              self.support_radius)
        for eps, fn in self.radial_extra:
            out = out + eps * fn(r)
        return out

    @cached_property
    def _pieces(self):
        edges = {0.0, self.flat_radius, self.support_radius}
        edges |= set(_breakpoints(self.generator))
        for eps, fn in self.radial_extra:
            if eps != 0.0:
                edges |= set(_breakpoints(fn))
        outer = max(e for e in edges if np.isfinite(e))
        edges = sorted(e for e in edges if 0.0 <= e <= outer and np.isfinite(e))
        pieces = []
        for a, b in zip(edges[:-1], edges[1:]):
            if b <= self.series_radius:
                pieces.append((a, b, None, self.flat_value))
            else:
                pieces.append((a, b, _PiecewiseCheb(_chebfit(self.theta_at, a, b)), 0.0))
        return edges, pieces

    def theta_scalar(self, r: float) -> float:
        """Fast scalar theta for ODE right-hand sides (piecewise Chebyshev, ~1e-11 of max |theta|)."""
        edges, pieces = self._pieces
        if r >= edges[-1]:
            return 0.0 if np.isfinite(self.support_radius) or self.generator else self.flat_value
        for a, b, cheb, const in pieces:
            if r <= b:
                return const if cheb is None else cheb(r)
        return 0.0

    @property
    def series_radius(self) -> float:
        """Radius up to which theta (with extras) is exactly ``flat_value``."""
        rad = self.flat_radius
        for eps, fn in self.radial_extra:
            if eps != 0.0:
                rad = min(rad, fn.support[0])
        return rad

    @classmethod
    def constant(cls, grid: RadialGrid, value: float = 0.0, radius: float = np.inf) -> "Potential":
        """``theta = value`` on ``[0, radius]`` and 0 beyond (no generator)."""
        theta = np.where(grid.nodes <= radius, value, 0.0).astype(float)
        return cls(grid, None, None, RadialProfile(grid, theta), support_radius=radius,
                   flat_radius=radius, flat_value=float(value))

    def with_radial_perturbation(self, rho: RadialFunction, eps: float) -> "Potential":
        """``theta + eps·rho`` for a radial ``rho`` supported in ``[0, r1]``."""
        if rho.support[1] > self.grid.r1:
            raise ConstructionError("radial perturbation must be supported in [0, r1]")
        extra = self.radial_extra + ((float(eps), rho),)
        theta = RadialProfile(self.grid, self.theta.samples + eps * rho(self.grid.nodes))
        return Potential(self.grid, self.generator, self.generator_u0, theta,
                         max(self.support_radius, rho.support[1]) if eps else self.support_radius,
                         self.flat_radius, self.flat_value, self.bump_amplitude, self.bump, extra)


def _breakpoints(fn) -> list[float]:
    if fn is None:
        return []
    if isinstance(fn, BlendGenerator):
        return [fn.blend.start, fn.blend.end]
    if isinstance(fn, Combination):
        return [b for c, f in fn.terms if c != 0.0 for b in _breakpoints(f)]
    return [b for b in fn.support if np.isfinite(b)]


class _PiecewiseCheb:
    """Scalar evaluator from Chebyshev pieces of degree <= 32 (Clenshaw in plain floats)."""

    def __init__(self, pieces):
        self.edges = [b for _, b, _ in pieces]
        self.pieces = [(a, b, [float(c) for c in coef]) for a, b, coef in pieces]

    def __call__(self, r: float) -> float:
        i = bisect_left(self.edges, r)
        a, b, coef = self.pieces[min(i, len(self.pieces) - 1)]
        x = (2.0 * r - a - b) / (b - a)
        x2 = 2.0 * x
        b1 = b2 = 0.0
        for c in coef[:0:-1]:
            b1, b2 = c + x2 * b1 - b2, b1
        return coef[0] + x * b1 - b2


def _chebfit(func, a, b, tol: float = 1e-12, degree: int = 32, depth: int = 0):
    # analytic on [a, b]: bisect until a fixed-degree fit has its tail at roundoff
    cheb = Chebyshev.interpolate(lambda x: func(np.asarray(x)), degree, domain=[a, b])
    scale = max(np.max(np.abs(cheb.coef)), 1e-300)
    if np.max(np.abs(cheb.coef[-3:])) < tol * scale or depth >= 12:
        return [(a, b, cheb.trim(1e-16 * scale).coef)]
    m = 0.5 * (a + b)
    return _chebfit(func, a, m, tol, degree, depth + 1) + _chebfit(func, m, b, tol, degree, depth + 1)


def _theta_from(gen: RadialFunction, r, flat_radius, flat_value, support_radius):
    out = np.empty(r.shape)
    inner = r <= flat_radius
    outer = r >= support_radius
    out[inner] = flat_value
    out[outer] = 0.0
    mid = ~(inner | outer)
    if mid.any():
        rm = r[mid]
        d = gen.derivs(rm)
        out[mid] = (d[0] - bilaplacian(d, rm)) / d[0]
    return out


def build_u0(grid: RadialGrid, blend: BlendSpec = BlendSpec()) -> RadialProfile:
    if grid.r_max < blend.end + 0.5:
        raise ConstructionError("grid must extend past the blend end by a margin")
    gen = BlendGenerator(blend)
    prof = RadialProfile.from_function(grid, gen)
    fine = np.linspace(blend.start, blend.end, 2001)
    if np.min(prof.samples) <= 0.0 or np.min(gen(fine)) <= 0.0:
        raise ConstructionError("blend produces a nonpositive u0")
    return prof


def build_theta(u0: RadialProfile) -> Potential:
    gen = u0.func
    if not isinstance(gen, RadialFunction):
        raise ConstructionError("u0 needs an analytic generator (build it with build_u0)")
    if np.min(u0.samples) <= 0.0:
        raise ConstructionError("u0 must be positive everywhere")
    flat, support = _flat_and_support(gen)
    theta = _theta_from(gen, u0.grid.nodes, flat, 1.0, support)
    return Potential(u0.grid, gen, u0, RadialProfile(u0.grid, theta, func=None),
                     support_radius=support, flat_radius=flat, flat_value=1.0)


def _flat_and_support(gen: RadialFunction) -> tuple[float, float]:
    if isinstance(gen, BlendGenerator):
        return gen.blend.start, gen.blend.end
    if isinstance(gen, Combination):
        flat, support = np.inf, 0.0
        for c, f in gen.terms:
            if c == 0.0:
                continue
            if isinstance(f, BlendGenerator):
                flat, support = min(flat, f.blend.start), max(support, f.blend.end)
            else:
                flat, support = min(flat, f.support[0]), max(support, f.support[1])
        return flat, support
    raise ConstructionError(f"cannot locate flat/support region of {type(gen).__name__}")


def default_potential(grid: RadialGrid | None = None, blend: BlendSpec = BlendSpec()) -> Potential:
    grid = grid or RadialGrid.uniform()
    return build_theta(build_u0(grid, blend))


def add_core_bump(pot: Potential, eps: float, v0: RadialProfile) -> Potential:
    if eps == 0.0:
        return pot
    bump = v0.func
    if not isinstance(bump, RadialFunction):
        raise ConstructionError("bump profile needs an analytic evaluator")
    lo, hi = bump.support
    outside = (pot.grid.nodes <= 0.5) | (pot.grid.nodes >= 1.0)
    if lo < 0.5 or hi > 1.0 or np.any(v0.samples[outside] != 0.0):
        raise ConstructionError("core bump must be supported in (1/2, 1)")
    if pot.generator is None:
        raise ConstructionError("potential has no generator to modify")
    gen = pot.generator + bump.scaled(eps)
    samples = pot.generator_u0.samples + eps * v0.samples
    fine = np.linspace(lo, hi, 2001)
    if np.min(samples) <= 0.0 or np.min(gen(fine)) <= 0.0:
        raise ConstructionError("u0 + eps*v0 is not positive")
    u0 = RadialProfile(pot.grid, samples, func=gen)
    flat = min(pot.flat_radius, lo)
    theta = _theta_from(gen, pot.grid.nodes, flat, pot.flat_value, pot.support_radius)
    return Potential(pot.grid, gen, u0, RadialProfile(pot.grid, theta), pot.support_radius,
                     flat, pot.flat_value, pot.bump_amplitude + eps, bump)


def core_bump_profile(grid: RadialGrid) -> RadialProfile:
    """The default C^5 bump with maximum 1 at ``r = 0.75`` and support (1/2, 1)."""
    return RadialProfile.from_function(grid, PolynomialBump(0.75, 0.25))


# ---------------------------------------------------------------------------
# perturbations
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Perturbation:
    """Fourier-resolved perturbation ``rho = Σ_k rho_k(r) e^{ikφ}`` supported in ``[0, r1]``."""

    grid: RadialGrid
    modes: Mapping[int, RadialProfile]
    kmax: int

    def __post_init__(self):
        modes = {int(k): p for k, p in sorted(self.modes.items())}
        object.__setattr__(self, "modes", modes)
        for k, prof in modes.items():
            if abs(k) > self.kmax:
                raise ConstructionError(f"mode {k} exceeds kmax={self.kmax}")
            if prof.grid is not self.grid:
                raise ConstructionError("all modes must live on the perturbation's grid")
            if np.any(prof.samples[self.grid.i1 + 1:] != 0):
                raise ConstructionError(f"mode {k} does not vanish beyond r1")

    @classmethod
    def from_core(cls, grid: RadialGrid, core_samples: Mapping[int, np.ndarray], kmax: int | None = None):
        """Build from samples on the core nodes only; zero-padded beyond ``r1``."""
        modes = {}
        for k, vals in core_samples.items():
            vals = np.asarray(vals)
            full = np.zeros(grid.nodes.shape, dtype=vals.dtype)
            full[: grid.i1 + 1] = vals
            modes[int(k)] = RadialProfile(grid, full, int(k))
        kmax = max((abs(k) for k in modes), default=0) if kmax is None else kmax
        return cls(grid, modes, kmax)

    @classmethod
    def from_functions(cls, grid: RadialGrid, funcs: Mapping[int, Callable], kmax: int | None = None):
        core = grid.core
        return cls.from_core(grid, {k: f(core) for k, f in funcs.items()}, kmax)

    def core_samples(self, k: int) -> np.ndarray:
        prof = self.modes.get(k)
        if prof is None:
            return np.zeros(self.grid.i1 + 1)
        return prof.samples[: self.grid.i1 + 1]

    def map_modes(self, fn: Callable[[int, np.ndarray], np.ndarray]) -> "Perturbation":
        return Perturbation.from_core(self.grid, {k: fn(k, self.core_samples(k)) for k in self.modes}, self.kmax)

    def __add__(self, other: "Perturbation") -> "Perturbation":
        keys = sorted(set(self.modes) | set(other.modes))
        return Perturbation.from_core(
            self.grid, {k: self.core_samples(k) + other.core_samples(k) for k in keys},
            max(self.kmax, other.kmax))

    def __mul__(self, scalar) -> "Perturbation":
        return self.map_modes(lambda k, v: scalar * v)

    __rmul__ = __mul__

    def to_json(self) -> dict:
        return {"kmax": self.kmax, "r": self.grid.core.tolist(),
                "modes": {str(k): _encode(self.core_samples(k)) for k in self.modes}}

    @classmethod
    def from_json(cls, obj: Mapping, grid: RadialGrid) -> "Perturbation":
        if not np.allclose(obj["r"], grid.core, rtol=1e-14, atol=0.0):
            raise ConstructionError("JSON radii do not match the grid core")
        return cls.from_core(grid, {int(k): _decode(v) for k, v in obj["modes"].items()}, int(obj["kmax"]))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json()))


def r_norm(rho: Perturbation) -> float:
    """``(Σ_k (1+k²)^{1/2} ∫_0^{r1} |rho_k|² r dr)^{1/2}``."""
    total = 0.0
    for k in rho.modes:
        vals = rho.core_samples(k)
        total += np.sqrt(1.0 + k * k) * float(rho.grid.integrate_core(np.abs(vals) ** 2).real)
    return float(np.sqrt(total))
