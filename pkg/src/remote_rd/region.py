"""Per-subset rate bounds, their polytopes, and sum-rate optimisation.

Subsets of the encoder set are integer bitmasks: bit ``i`` set means encoder
``i`` (0-based) belongs to the subset. For a fixed rate allocation ``r`` the
inner bound on ``sum_{i in S} R_i`` is

    J_S = 1/2 log( |K(r)| prod_{i in S} e^{2 r_i} / |K(r with r_S = 0)| )

and the outer bound replaces ``|K(r)|`` with ``1/theta(D, r)`` and clamps at
zero. ``K(r)`` is :func:`remote_rd.model.info_matrix`.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.stats import qmc

from .errors import Infeasible, InvalidInput
from .model import (
    SourceSpec,
    as_rates,
    check_distortion,
    common_boundary_rate,
    cyclic_eigs,
    mmse_trace,
    r_star,
    scale_to_boundary,
)
from .waterfill import log_theta, waterfill

__all__ = [
    "MAX_L",
    "members",
    "mask_of",
    "subset_label",
    "RegionBound",
    "copolymatroid_violations",
    "j_inner",
    "j_outer",
    "inner_bound",
    "outer_bound",
    "endpoint",
    "all_endpoints",
    "point_in_bound",
    "sum_rate_objective",
    "SumRateResult",
    "sum_rate_min",
    "CyclicLowerBound",
    "cyclic_lower_objective",
    "sum_rate_lower_cyclic",
    "parametric_curve",
]

MAX_L = 20
_CHUNK = 4096


def members(mask: int, L: int) -> list[int]:
    return [i for i in range(L) if mask >> i & 1]


def mask_of(indices: Iterable[int]) -> int:
    m = 0
    for i in indices:
        m |= 1 << int(i)
    return m


def subset_label(mask: int, L: int) -> str:
    """1-based member list such as ``{1,3}``."""
    return "{" + ",".join(str(i + 1) for i in members(mask, L)) + "}"


def _membership(L: int, masks: np.ndarray) -> np.ndarray:
    return (masks[:, None] >> np.arange(L)) & 1 == 1


def _complement_logdets(spec: SourceSpec, r: np.ndarray, masks: np.ndarray) -> np.ndarray:
    """log|K(r with r_S zeroed)| for every mask S."""
    L = spec.L
    prec = -np.expm1(-2.0 * r) * spec.precision_gain
    out = np.empty(masks.size)
    idx = np.arange(L)
    for start in range(0, masks.size, _CHUNK):
        chunk = masks[start:start + _CHUNK]
        k = np.broadcast_to(spec.cov_inv, (chunk.size, L, L)).copy()
        k[:, idx, idx] += np.where(_membership(L, chunk), 0.0, prec)
        sign, logabs = np.linalg.slogdet(k)
        if np.any(sign <= 0):
            raise InvalidInput("information matrix lost positive definiteness")
        out[start:start + chunk.size] = logabs
    return out


def _rate_sums(r: np.ndarray, masks: np.ndarray) -> np.ndarray:
    return np.where(_membership(r.size, masks), r, 0.0).sum(axis=1)


def _check_mask(mask: int, L: int) -> int:
    mask = int(mask)
    if not 0 <= mask < 1 << L:
        raise InvalidInput(f"subset mask {mask} out of range for L={L}")
    return mask


def j_inner(spec: SourceSpec, r, S: int) -> float:
    """Inner-bound rate function for subset mask ``S``."""
    r = as_rates(r, spec.L)
    S = _check_mask(S, spec.L)
    ld = _complement_logdets(spec, r, np.array([0, S]))
    return 0.5 * (ld[0] - ld[1]) + float(_rate_sums(r, np.array([S]))[0])


def j_outer(spec: SourceSpec, r, D: float, S: int) -> float:
    """Outer-bound rate function for subset mask ``S``; needs r in B_L(D)."""
    r = as_rates(r, spec.L)
    S = _check_mask(S, spec.L)
    lt = log_theta(spec, r, D)
    ld = _complement_logdets(spec, r, np.array([S]))[0]
    # log-domain argument, clamped after evaluation
    return max(0.0, float(_rate_sums(r, np.array([S]))[0]) - 0.5 * (lt + ld))


@dataclass(frozen=True, eq=False)
class RegionBound:
    """Lower bounds on partial rate sums, one per subset mask.

    ``values[mask]`` holds the bound for that subset; ``values[0]`` is 0.
    ``kind`` is ``"outer"`` or ``"inner"``.
    """

    L: int
    values: np.ndarray
    kind: str
    r: np.ndarray
    D: float | None = None
    meta: dict = field(default_factory=dict)

    @property
    def lower(self) -> dict[int, float]:
        return {m: float(self.values[m]) for m in range(1, 1 << self.L)}

    def __getitem__(self, mask: int) -> float:
        return float(self.values[mask])


def _bound_values(spec: SourceSpec, r: np.ndarray, D: float | None) -> np.ndarray:
    L = spec.L
    if L > MAX_L:
        raise InvalidInput(f"subset enumeration limited to L <= {MAX_L}")
    masks = np.arange(1 << L)
    ld = _complement_logdets(spec, r, masks)
    sums = _rate_sums(r, masks)
    if D is None:
        vals = 0.5 * (ld[0] - ld) + sums
    else:
        lt = log_theta(spec, r, D)
        vals = np.maximum(0.0, sums - 0.5 * (lt + ld))
    vals[0] = 0.0
    return vals


def inner_bound(spec: SourceSpec, r) -> RegionBound:
    r = as_rates(r, spec.L)
    return RegionBound(spec.L, _bound_values(spec, r, None), "inner", r)


def outer_bound(spec: SourceSpec, D: float, r) -> RegionBound:
    r = as_rates(r, spec.L)
    return RegionBound(spec.L, _bound_values(spec, r, float(D)), "outer", r, float(D))


def copolymatroid_violations(values, tol: float = 1e-10) -> dict[str, float]:
    """Worst violation of each co-polymatroid axiom over all subset pairs.

    Returns ``{"empty": ..., "nonneg": ..., "monotone": ..., "supermodular": ...}``;
    a value of 0 means the axiom holds within ``tol``.
    """
    f = np.asarray(values, dtype=float)
    n = f.size
    a = np.arange(n)[:, None]
    b = np.arange(n)[None, :]
    subset = (a & ~b) == 0
    mono = np.where(subset, f[:, None] - f[None, :] - tol, 0.0)
    sup = f[a] + f[b] - f[a & b] - f[a | b] - tol
    return {
        "empty": max(0.0, abs(float(f[0])) - tol),
        "nonneg": max(0.0, float(-np.min(f)) - tol),
        "monotone": max(0.0, float(np.max(mono))),
        "supermodular": max(0.0, float(np.max(sup))),
    }


def _require_copolymatroid(bound: RegionBound, tol: float = 1e-9) -> None:
    bad = {k: v for k, v in copolymatroid_violations(bound.values, tol).items() if v > 0}
    if bad:
        raise InvalidInput(f"bound is not a co-polymatroid: {bad}")


def endpoint(bound: RegionBound, perm: Sequence[int]) -> np.ndarray:
    """Vertex of the polytope generated by the chain ``{perm[i], ..., perm[L-1]}``.

    ``perm`` lists 0-based encoder indices.
    """
    L = bound.L
    perm = [int(p) for p in perm]
    if sorted(perm) != list(range(L)):
        raise InvalidInput(f"{perm} is not a permutation of 0..{L - 1}")
    _require_copolymatroid(bound)
    return _chain_point(bound.values, perm)


def _chain_point(f: np.ndarray, perm: list[int]) -> np.ndarray:
    rates = np.zeros(len(perm))
    tail = 0
    for i in reversed(perm):
        prev = tail
        tail |= 1 << i
        rates[i] = f[tail] - f[prev]
    return rates


def all_endpoints(bound: RegionBound, tol: float = 1e-10) -> list[np.ndarray]:
    """Distinct chain vertices over all L! orderings, in lexicographic permutation order."""
    _require_copolymatroid(bound)
    pts: list[np.ndarray] = []
    for perm in itertools.permutations(range(bound.L)):
        p = _chain_point(bound.values, list(perm))
        if not any(np.max(np.abs(p - q)) <= tol for q in pts):
            pts.append(p)
    return pts


def point_in_bound(bound: RegionBound, p, tol: float = 1e-9) -> bool:
    p = np.asarray(p, dtype=float).ravel()
    if p.size != bound.L:
        raise InvalidInput("rate point has the wrong dimension")
    masks = np.arange(1 << bound.L)
    sums = _rate_sums(p, masks)
    return bool(np.all(sums[1:] >= bound.values[1:] - tol))


def sum_rate_objective(spec: SourceSpec, r) -> float:
    """sum(r) + 1/2 log(|K(r)| / |cov_x^{-1}|)."""
    r = as_rates(r, spec.L)
    k = spec.cov_inv + np.diag(-np.expm1(-2.0 * r) * spec.precision_gain)
    return float(np.sum(r) + 0.5 * (np.linalg.slogdet(k)[1] + spec.logdet_cov))


@dataclass(frozen=True)
class SumRateResult:
    value: float
    argmin: np.ndarray
    boundary_residual: float
    n_starts: int


def _objective_and_grad(spec: SourceSpec):
    cinv = spec.cov_inv
    c = spec.precision_gain
    offset = 0.5 * spec.logdet_cov

    def k_of(r):
        return cinv + np.diag(-np.expm1(-2.0 * r) * c)

    def fun(r):
        return float(np.sum(r) + 0.5 * np.linalg.slogdet(k_of(r))[1] + offset)

    def jac(r):
        kinv = np.linalg.inv(k_of(r))
        return 1.0 + np.diag(kinv) * c * np.exp(-2.0 * r)

    return fun, jac, k_of


def sum_rate_min(spec: SourceSpec, D: float, n_starts: int = 32, seed: int = 0x5EED) -> SumRateResult:
    """Minimise the sum-rate objective over B_L(D).

    Starts: the common-rate boundary point plus ``n_starts - 1`` scrambled
    Sobol directions, each scaled onto the boundary. Each start is refined
    by SLSQP with analytic gradients and rescaled onto the boundary along
    its ray. The best value wins; near-ties go to the lexicographically
    smallest argmin.
    """
    D = check_distortion(spec, D)
    L = spec.L
    r0 = np.full(L, common_boundary_rate(spec, D))
    starts = [r0]
    if n_starts > 1:
        m = max(1, math.ceil(math.log2(n_starts)))
        dirs = qmc.Sobol(d=L, scramble=True, seed=seed).random_base2(m)[: n_starts - 1]
        for d in dirs:
            try:
                starts.append(scale_to_boundary(spec, d + 1e-3, D))
            except Infeasible:
                continue

    fun, jac, k_of = _objective_and_grad(spec)
    c = spec.precision_gain

    def cons(r):
        return D - float(np.trace(np.linalg.inv(k_of(r))))

    def cons_jac(r):
        kinv = np.linalg.inv(k_of(r))
        return 2.0 * np.einsum("ij,ji->i", kinv, kinv) * c * np.exp(-2.0 * r)

    best: tuple[float, tuple] | None = None
    best_r = r0
    for x0 in starts:
        res = minimize(
            fun, x0, jac=jac, method="SLSQP",
            bounds=[(0.0, None)] * L,
            constraints=[{"type": "ineq", "fun": cons, "jac": cons_jac}],
            options={"ftol": 1e-14, "maxiter": 500},
        )
        cand = np.clip(np.asarray(res.x, dtype=float), 0.0, None)
        if not np.all(np.isfinite(cand)) or not np.any(cand > 0):
            cand = x0
        try:
            cand = scale_to_boundary(spec, cand, D)
        except Infeasible:
            cand = x0
        val = fun(cand)
        key = (val, tuple(cand))
        if best is None or val < best[0] - 1e-12 or (abs(val - best[0]) <= 1e-12 and key[1] < best[1]):
            best = key
            best_r = cand
    resid = (mmse_trace(spec, best_r) - D) / D
    return SumRateResult(value=best[0], argmin=best_r, boundary_residual=resid, n_starts=len(starts))


@dataclass(frozen=True)
class CyclicLowerBound:
    value: float
    r_min: float
    r_star: float
    value_at_r_star: float
    monotone: bool


def cyclic_lower_objective(spec: SourceSpec, D: float, r: float) -> float:
    """1/2 log(e^{2Lr} |cov_x| / theta(D, r)) at common rate r >= r*(D)."""
    beta = cyclic_eigs(spec, r)
    lt = waterfill(1.0 / beta, D).log_theta
    return 0.5 * (2 * spec.L * r + spec.logdet_cov - lt)


def _golden(f, a: float, b: float, tol: float = 1e-13) -> tuple[float, float]:
    g = (math.sqrt(5.0) - 1.0) / 2.0
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol * (1.0 + abs(a) + abs(b)):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def sum_rate_lower_cyclic(spec: SourceSpec, D: float, n_grid: int = 401) -> CyclicLowerBound:
    """Sum-rate lower bound for a cyclic-shift-invariant source with equal noises.

    Minimises :func:`cyclic_lower_objective` over ``r >= r*(D)`` by a dense grid
    followed by golden-section refinement. ``monotone`` records whether
    ``e^{-2Lr} theta(D, r)`` was non-increasing on the grid, in which case the
    minimum is the value at ``r*(D)``.
    """
    if not spec.is_cyclic():
        raise InvalidInput("source is not cyclic-shift invariant with equal noise variances")
    D = check_distortion(spec, D)
    L = spec.L
    rs = r_star(spec, D)
    f = lambda r: cyclic_lower_objective(spec, D, r)  # noqa: E731
    at_rs = f(rs)
    # theta <= (D/L)^L bounds the objective below by a line in r
    hi = (at_rs - 0.5 * spec.logdet_cov + 0.5 * L * math.log(D / L)) / L
    hi = max(hi, rs) + 1e-6 + 1e-3 * max(hi - rs, 0.0)
    grid = np.linspace(rs, hi, n_grid)
    vals = np.array([f(x) for x in grid])
    # e^{-2Lr} theta = |cov_x| e^{-2 J}; non-increasing iff J non-decreasing
    monotone = bool(np.all(np.diff(vals) >= -1e-13 * (1.0 + np.abs(vals[1:]))))
    k = int(np.argmin(vals))
    a, b = grid[max(k - 1, 0)], grid[min(k + 1, n_grid - 1)]
    x, fx = _golden(f, a, b)
    if vals[k] < fx:
        x, fx = float(grid[k]), float(vals[k])
    if at_rs <= fx:
        x, fx = rs, at_rs
    return CyclicLowerBound(value=fx, r_min=x, r_star=rs, value_at_r_star=at_rs, monotone=monotone)


def parametric_curve(spec: SourceSpec, r_grid) -> list[tuple[float, float]]:
    """(D(r), R(r)) pairs: D = sum 1/beta_i(r), R = 1/2 log(|cov_x| e^{2Lr} prod beta_i(r))."""
    if not spec.is_cyclic():
        raise InvalidInput("source is not cyclic-shift invariant with equal noise variances")
    out = []
    for r in np.asarray(r_grid, dtype=float).ravel():
        if not r >= 0:
            raise InvalidInput("curve parameters must be non-negative")
        beta = cyclic_eigs(spec, float(r))
        out.append((float(np.sum(1.0 / beta)),
                    0.5 * (spec.logdet_cov + 2 * spec.L * float(r) + float(np.sum(np.log(beta))))))
    return out
