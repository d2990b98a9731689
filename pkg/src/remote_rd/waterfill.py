"""Water-filling of a sum-distortion budget over eigen-directions.

Given floors ``a_i > 0`` and a budget ``D >= sum(a)``, the product
``prod(xi_i)`` subject to ``sum(xi_i) <= D`` and ``xi_i >= a_i`` is maximised
by ``xi_i = max(level, a_i)``. The level is found exactly by sorting the
floors and scanning the piecewise-linear function ``sum(max(level, a_i))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import Infeasible, InvalidInput
from .linalg import eigvals_sym
from .model import SourceSpec, as_rates, info_matrix

__all__ = [
    "WaterfillResult",
    "waterfill",
    "waterfill_log_theta_batch",
    "theta",
    "log_theta",
    "theta_result",
    "u_from_r",
    "r_from_u",
    "theta_in_u",
]

# a budget short of sum(floors) by less than this (relative) is treated as equal
BUDGET_RTOL = 1e-12


@dataclass(frozen=True)
class WaterfillResult:
    level: float
    components: np.ndarray
    theta: float
    log_theta: float


def waterfill(floors, D: float) -> WaterfillResult:
    """Maximise the product of components with sum ``D`` and per-component floors."""
    a = np.asarray(floors, dtype=float).ravel()
    if a.size == 0 or not np.all(np.isfinite(a)) or np.any(a <= 0):
        raise InvalidInput("floors must be finite and positive")
    D = float(D)
    total = float(np.sum(a))
    if D < total * (1.0 - BUDGET_RTOL):
        raise Infeasible(f"budget {D:.17g} below the sum of floors {total:.17g}")
    D = max(D, total)
    s = np.sort(a)
    n = s.size
    # tail[k] = sum of s[k:], i.e. floors left untouched when the k smallest are raised
    tail = np.concatenate([np.cumsum(s[::-1])[::-1], [0.0]])
    k = np.arange(1, n + 1)
    levels = (D - tail[1:]) / k
    ok = s <= levels * (1.0 + 4 * np.finfo(float).eps)
    kstar = int(np.nonzero(ok)[0][-1]) if np.any(ok) else 0
    level = max(float(levels[kstar]), float(s[0]))
    comps = np.maximum(level, a)
    lt = float(np.sum(np.log(comps)))
    return WaterfillResult(level=level, components=comps, theta=math.exp(lt), log_theta=lt)


def waterfill_log_theta_batch(floors: np.ndarray, D: float) -> np.ndarray:
    """log of the maximal product for each row of an (N, L) floor array.

    Rows whose floors sum above ``D`` (beyond rounding) give ``nan``.
    """
    a = np.atleast_2d(np.asarray(floors, dtype=float))
    s = np.sort(a, axis=1)
    n = s.shape[1]
    total = s.sum(axis=1)
    Deff = np.maximum(D, total)
    tail = np.cumsum(s[:, ::-1], axis=1)[:, ::-1]
    tail_next = np.concatenate([tail[:, 1:], np.zeros((s.shape[0], 1))], axis=1)
    levels = (Deff[:, None] - tail_next) / np.arange(1, n + 1)
    ok = s <= levels * (1.0 + 4 * np.finfo(float).eps)
    kstar = n - 1 - np.argmax(ok[:, ::-1], axis=1)
    level = np.maximum(levels[np.arange(s.shape[0]), kstar], s[:, 0])
    out = np.sum(np.log(np.maximum(level[:, None], s)), axis=1)
    out[D < total * (1.0 - BUDGET_RTOL)] = np.nan
    return out


def theta_result(spec: SourceSpec, r, D: float) -> WaterfillResult:
    """Water-filling over the floors 1/alpha_i, alpha_i the eigenvalues of info_matrix(r)."""
    r = as_rates(r, spec.L)
    alpha = eigvals_sym(info_matrix(spec, r))
    try:
        return waterfill(1.0 / alpha, D)
    except Infeasible as exc:
        raise Infeasible(f"rate vector lies outside B_L(D): {exc}") from None


def theta(spec: SourceSpec, r, D: float) -> float:
    return theta_result(spec, r, D).theta


def log_theta(spec: SourceSpec, r, D: float) -> float:
    return theta_result(spec, r, D).log_theta


def u_from_r(spec: SourceSpec, r) -> np.ndarray:
    """u_i = a_ii + c_i (1 - e^{-2 r_i}), the diagonal of info_matrix(r)."""
    r = as_rates(r, spec.L)
    return np.diag(spec.cov_inv) - np.expm1(-2.0 * r) * spec.precision_gain


def r_from_u(spec: SourceSpec, u) -> np.ndarray:
    """Inverse of :func:`u_from_r`; needs a_ii <= u_i < a_ii + c_i."""
    u = np.asarray(u, dtype=float).ravel()
    a = np.diag(spec.cov_inv)
    c = spec.precision_gain
    if u.size != spec.L or not np.all(np.isfinite(u)):
        raise InvalidInput("u must be a finite vector of length L")
    if np.any(u < a) or np.any(u >= a + c):
        raise InvalidInput("u outside [a_ii, a_ii + c_i)")
    # 2 r_i = log(c_i / (a_ii + c_i - u_i)) = -log1p(-(u_i - a_ii) / c_i)
    return -0.5 * np.log1p(-(u - a) / c)


def theta_in_u(spec: SourceSpec, u, D: float) -> float:
    return theta(spec, r_from_u(spec, u), D)
