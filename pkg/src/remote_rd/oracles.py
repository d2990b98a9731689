"""Independent reference computations used to cross-check the main routines.

Each oracle reaches its answer by a different route from the code it
checks: brute-force grids, explicit joint covariances, finite differences,
or a generic LU determinant.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import InvalidInput
from .model import SourceSpec, as_rates
from .waterfill import WaterfillResult

__all__ = [
    "random_spec",
    "random_distortion",
    "grid_log_product_max",
    "grid_cell_bound",
    "kkt_residual",
    "gaussian_mi",
    "fd_eig_sensitivity",
    "lu_det",
]


def random_spec(rng: np.random.Generator, L: int) -> SourceSpec:
    """Random well-conditioned source covariance with log-uniform noise variances."""
    a = rng.normal(size=(L, L))
    cov = a @ a.T / L + 0.3 * np.eye(L)
    d = np.sqrt(np.diag(cov))
    sd = np.exp(rng.uniform(-0.25, 0.25, size=L))
    cov = cov / np.outer(d, d) * np.outer(sd, sd)
    noise = np.exp(rng.uniform(math.log(0.1), math.log(2.0), size=L))
    return SourceSpec(cov, noise)


def random_distortion(rng: np.random.Generator, spec: SourceSpec, lo: float = 0.05, hi: float = 0.95) -> float:
    """Uniform draw strictly between the infinite-rate MMSE and tr(cov_x)."""
    k = spec.cov_inv + np.diag(spec.precision_gain)
    floor = float(np.trace(np.linalg.inv(k)))
    return floor + rng.uniform(lo, hi) * (spec.trace_cov - floor)


def grid_log_product_max(floors, D: float, n: int = 200, chunk: int = 1 << 22) -> float:
    """Brute-force max of sum(log xi) over sum(xi) = D, xi >= floors.

    The first L-1 components range over ``n`` evenly spaced values between
    their floor and the largest value the other floors allow; the last
    component takes the remaining budget.
    """
    a = np.asarray(floors, dtype=float).ravel()
    L = a.size
    total = float(np.sum(a))
    if D < total:
        raise InvalidInput("budget below the sum of floors")
    if L == 1:
        return math.log(D)
    axes = [np.linspace(a[i], D - total + a[i], n) for i in range(L - 1)]
    best = -math.inf
    # outer loop over the first axis keeps memory bounded
    rest = np.meshgrid(*axes[1:], indexing="ij") if L > 2 else []
    rest_sum = sum(g.ravel() for g in rest) if rest else np.zeros(1)
    rest_log = sum(np.log(g.ravel()) for g in rest) if rest else np.zeros(1)
    for x0 in axes[0]:
        for s in range(0, rest_sum.size, chunk):
            last = D - x0 - rest_sum[s:s + chunk]
            ok = last >= a[-1]
            if not np.any(ok):
                continue
            vals = rest_log[s:s + chunk][ok] + np.log(last[ok])
            best = max(best, math.log(x0) + float(np.max(vals)))
    return best


def grid_cell_bound(floors, D: float, n: int = 200) -> float:
    """Upper bound on the log-product lost by rounding the optimum down to the grid.

    Along the segment from the optimum to the rounded point every component
    stays above its floor, so each partial derivative 1/xi_i - 1/xi_L is at
    most 1/a_i + 1/a_L in magnitude.
    """
    a = np.asarray(floors, dtype=float).ravel()
    if a.size == 1:
        return 0.0
    h = (D - float(np.sum(a))) / (n - 1)
    return float(np.sum(h * (1.0 / a[:-1] + 1.0 / a[-1])))


def kkt_residual(floors, D: float, res: WaterfillResult) -> float:
    """Largest violation of the optimality conditions for max sum(log xi).

    Multipliers: nu = 1/level for the budget, mu_i = nu - 1/xi_i for the
    floors. Residuals are relative to the natural scale of each condition.
    """
    a = np.asarray(floors, dtype=float).ravel()
    xi = np.asarray(res.components, dtype=float)
    nu = 1.0 / res.level
    mu = nu - 1.0 / xi
    slack_floor = (xi - a) / xi
    parts = [
        abs(float(np.sum(xi)) - max(D, float(np.sum(a)))) / D,   # budget active
        float(np.max(np.maximum(0.0, -slack_floor))),            # xi >= a
        float(np.max(np.maximum(0.0, -mu / nu))),                # mu >= 0
        float(np.max(np.abs(mu / nu) * np.abs(slack_floor))),    # complementary slackness
        abs(res.log_theta - float(np.sum(np.log(xi)))) / max(1.0, abs(res.log_theta)),
    ]
    return max(parts)


def _cond_cov(cov: np.ndarray, keep: np.ndarray, given: np.ndarray) -> np.ndarray:
    """Covariance of the ``keep`` block conditioned on the ``given`` block (Schur complement)."""
    a = cov[np.ix_(keep, keep)]
    if given.size == 0:
        return a
    b = cov[np.ix_(keep, given)]
    c = cov[np.ix_(given, given)]
    return a - b @ np.linalg.solve(c, b.T)


def _logdet(m: np.ndarray) -> float:
    if m.size == 0:
        return 0.0
    sign, val = np.linalg.slogdet(m)
    if sign <= 0:
        raise InvalidInput("conditional covariance is not positive definite")
    return float(val)


def gaussian_mi(spec: SourceSpec, r, S: int) -> float:
    """I(U_S; Y_S | U_{S^c}) for the test channel U_i = Y_i + V_i.

    Y_i = X_i + N_i and V_i has variance sigma2_i / (e^{2 r_i} - 1), so
    encoder i conveys r_i nats about Y_i. Encoders with r_i = 0 carry no
    auxiliary variable.
    """
    r = as_rates(r, spec.L)
    L = spec.L
    S = int(S)
    cov_y = spec.cov_x + np.diag(spec.noise_var)
    active = np.nonzero(r > 0)[0]
    var_v = spec.noise_var[active] / np.expm1(2.0 * r[active])
    m = active.size
    # joint order: U_active, then Y
    joint = np.empty((m + L, m + L))
    joint[:m, :m] = cov_y[np.ix_(active, active)] + np.diag(var_v)
    joint[:m, m:] = cov_y[active, :]
    joint[m:, :m] = cov_y[:, active]
    joint[m:, m:] = cov_y
    in_s = np.array([(S >> int(i)) & 1 == 1 for i in active], dtype=bool)
    u_s = np.nonzero(in_s)[0]
    u_c = np.nonzero(~in_s)[0]
    y_s = m + np.array([i for i in range(L) if S >> i & 1], dtype=int)
    if u_s.size == 0 or y_s.size == 0:
        return 0.0
    both = np.concatenate([u_s, y_s])
    return 0.5 * (_logdet(_cond_cov(joint, u_s, u_c)) + _logdet(_cond_cov(joint, y_s, u_c))
                  - _logdet(_cond_cov(joint, both, u_c)))


def fd_eig_sensitivity(m, i: int, h: float = 1e-6) -> np.ndarray:
    """Central differences of the ascending eigenvalues with respect to the diagonal entry i."""
    m = np.asarray(m, dtype=float)
    e = np.zeros_like(m)
    e[i, i] = h
    return (np.linalg.eigvalsh(m + e) - np.linalg.eigvalsh(m - e)) / (2.0 * h)


def lu_det(m) -> float:
    """Determinant by LU factorisation with partial pivoting."""
    return float(np.linalg.det(np.asarray(m, dtype=float)))
