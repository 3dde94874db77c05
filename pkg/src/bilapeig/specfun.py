"""Integer-order Bessel functions of real positive argument.

Values come from ``scipy.special``; first derivatives are assembled from the
order recurrences, never from finite differences. ``I`` and ``K`` have scaled
variants (``e^{-x} I_k`` and ``e^{x} K_k``) so that far-field matching never
under- or overflows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DomainError, RangeError

KINDS = ("J", "Y", "I", "K")


@dataclass(frozen=True)
class BesselEval:
    kind: str
    order: int
    argument: float
    value: float
    derivative: float
    scaled: bool


def _raw(kind: str, order, x, scaled: bool):
    if kind == "J":
        return special.jv(order, x)
    if kind == "Y":
        return special.yv(order, x)
    if kind == "I":
        return special.ive(order, x) if scaled else special.iv(order, x)
    return special.kve(order, x) if scaled else special.kv(order, x)


def bessel_pair(kind: str, order: int, x, scaled: bool = False):
    """Vectorised ``(value, derivative)`` of the order-``|order|`` function.

    The sign symmetry ``Z_{-k} = (-1)^k Z_k`` is applied for ``J`` and ``Y``;
    ``I`` and ``K`` are even in the order. No domain checks: callers that need
    them go through :func:`bessel`.
    """
    k = abs(int(order))
    x = np.asarray(x, dtype=float)
    val = _raw(kind, k, x, scaled)
    below = _raw(kind, k - 1, x, scaled) if k > 0 else None
    if kind in ("J", "Y"):
        der = -_raw(kind, 1, x, scaled) if k == 0 else below - (k / x) * val
        if order < 0 and k % 2:
            val, der = -val, -der
    elif kind == "I":
        der = _raw(kind, 1, x, scaled) if k == 0 else below - (k / x) * val
    else:
        der = -_raw(kind, 1, x, scaled) if k == 0 else -below - (k / x) * val
    return val, der


def bessel(kind: str, order: int, x: float, scaled: bool = False) -> BesselEval:
    if kind not in KINDS:
        raise ValueError(f"unknown Bessel kind {kind!r}; expected one of {KINDS}")
    if scaled and kind in ("J", "Y"):
        raise ValueError("scaled variants exist only for I and K")
    x = float(x)
    if not x > 0.0:
        raise DomainError(f"Bessel argument must be positive, got {x!r}")
    with np.errstate(over="ignore", under="ignore"):
        val, der = bessel_pair(kind, order, x, scaled)
    val, der = float(val), float(der)
    if not (np.isfinite(val) and np.isfinite(der)):
        raise RangeError(
            f"{kind}_{abs(order)}({x}) overflows in double precision; use scaled=True"
        )
    if kind in ("I", "K") and not scaled and val == 0.0:
        raise RangeError(
            f"{kind}_{abs(order)}({x}) underflows to zero; use scaled=True"
        )
    return BesselEval(kind, abs(int(order)), x, val, der, bool(scaled))


def cross_products(k: int, s: float, t: float) -> tuple[float, float, float, float]:
    """Cross products of ``J_k`` and ``Y_k`` between arguments ``s`` and ``t``.

    Returns ``(a, b, c, d)`` with

    * ``a = J(s) Y'(t) - Y(s) J'(t)``
    * ``b = -J(s) Y(t) + Y(s) J(t)``
    * ``c = J'(s) Y'(t) - Y'(s) J'(t)``
    * ``d = -J'(s) Y(t) + Y'(s) J(t)``

    so that ``(pi t / 2) [[a, b], [c, d]]`` propagates ``(u, u')`` of the
    order-``k`` Bessel equation from ``t`` to ``s``.
    """
    if not (s > 0 and t > 0):
        raise DomainError(f"cross products need s, t > 0, got s={s!r}, t={t!r}")
    js, djs = bessel_pair("J", k, s)
    ys, dys = bessel_pair("Y", k, s)
    jt, djt = bessel_pair("J", k, t)
    yt, dyt = bessel_pair("Y", k, t)
    a = js * dyt - ys * djt
    b = -js * yt + ys * jt
    c = djs * dyt - dys * djt
    d = -djs * yt + dys * jt
    return float(a), float(b), float(c), float(d)
