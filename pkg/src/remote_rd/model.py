"""Source/noise specification and the feasible set B_L(D).

Rates are in nats throughout. A rate allocation ``r`` is a non-negative
vector; encoder ``i`` at rate ``r_i`` behaves like an observation with noise
variance ``sigma2_i / (1 - exp(-2 r_i))``, so ``r_i = 0`` contributes exactly
zero precision.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import Infeasible, InvalidInput
from .linalg import as_symmetric, eig_sym, logdet_spd

__all__ = [
    "SourceSpec",
    "as_rates",
    "check_distortion",
    "noise_precision",
    "info_matrix",
    "mmse_trace",
    "mmse_trace_batch",
    "in_B",
    "on_boundary_B",
    "equicorr_inverse_coeffs",
    "build_equicorrelated",
    "build_circulant4",
    "cyclic_eigs",
    "phi_cyclic",
    "r_star",
    "common_boundary_rate",
    "scale_to_boundary",
    "scale_to_boundary_batch",
    "load_model",
    "dump_model",
]

PD_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class SourceSpec:
    """Covariance of the hidden source plus per-encoder observation noise variances.

    Immutable; the stored arrays are read-only.
    """

    cov_x: np.ndarray
    noise_var: np.ndarray
    label: str = field(default="", compare=False)

    def __post_init__(self):
        cov = as_symmetric(self.cov_x)
        noise = np.array(self.noise_var, dtype=float).ravel()
        if noise.size == 1 and cov.shape[0] > 1:
            noise = np.full(cov.shape[0], float(noise[0]))
        if noise.size != cov.shape[0]:
            raise InvalidInput(f"noise_var has length {noise.size}, expected {cov.shape[0]}")
        if not np.all(np.isfinite(noise)) or np.any(noise <= 0):
            raise InvalidInput("noise variances must be finite and positive")
        lam = eig_sym(cov).eigenvalues
        if lam[0] <= PD_RTOL * max(lam[-1], 0.0) or lam[-1] <= 0:
            raise InvalidInput("cov_x is not positive definite")
        cov.setflags(write=False)
        noise.setflags(write=False)
        object.__setattr__(self, "cov_x", cov)
        object.__setattr__(self, "noise_var", noise)

    @property
    def L(self) -> int:
        return self.cov_x.shape[0]

    @cached_property
    def precision_gain(self) -> np.ndarray:
        """c_i = 1 / sigma2_i."""
        c = 1.0 / self.noise_var
        c.setflags(write=False)
        return c

    @cached_property
    def cov_inv(self) -> np.ndarray:
        inv = np.linalg.inv(self.cov_x)
        inv = 0.5 * (inv + inv.T)
        inv.setflags(write=False)
        return inv

    @cached_property
    def source_eigs(self) -> np.ndarray:
        """Ascending eigenvalues of cov_x."""
        lam = eig_sym(self.cov_x).eigenvalues
        lam.setflags(write=False)
        return lam

    @cached_property
    def logdet_cov(self) -> float:
        return logdet_spd(self.cov_x)

    @property
    def trace_cov(self) -> float:
        return float(np.trace(self.cov_x))

    def is_cyclic(self, tol: float = 1e-12) -> bool:
        """True when cov_x is invariant under the cyclic index shift and all noises are equal."""
        scale = max(1.0, float(np.max(np.abs(self.cov_x))))
        shifted = np.roll(np.roll(self.cov_x, 1, axis=0), 1, axis=1)
        same_cov = np.max(np.abs(shifted - self.cov_x)) <= tol * scale
        same_noise = np.ptp(self.noise_var) <= tol * float(np.max(self.noise_var))
        return bool(same_cov and same_noise)

    def equicorrelation(self, tol: float = 1e-12) -> float | None:
        """Return rho when cov_x has unit diagonal and a common off-diagonal rho, else None."""
        n = self.L
        if np.max(np.abs(np.diag(self.cov_x) - 1.0)) > tol:
            return None
        if n == 1:
            return 0.0
        off = self.cov_x[~np.eye(n, dtype=bool)]
        if np.ptp(off) > tol:
            return None
        return float(np.mean(off))

    def to_dict(self) -> dict:
        return {"cov_x": self.cov_x.tolist(), "noise_var": self.noise_var.tolist()}


def as_rates(r, L: int) -> np.ndarray:
    """Validate a rate allocation of length L (finite, non-negative)."""
    arr = np.array(r, dtype=float).ravel()
    if arr.size == 1 and L > 1:
        arr = np.full(L, float(arr[0]))
    if arr.size != L:
        raise InvalidInput(f"rate vector has length {arr.size}, expected {L}")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise InvalidInput("rates must be finite and non-negative")
    return arr


def check_distortion(spec: SourceSpec, D: float) -> float:
    """Validate 0 < D < tr(cov_x)."""
    D = float(D)
    if not math.isfinite(D) or D <= 0:
        raise InvalidInput("distortion must be finite and positive")
    if D >= spec.trace_cov:
        raise InvalidInput(
            f"D={D:g} is at or above tr(cov_x)={spec.trace_cov:g}; the region is the whole orthant"
        )
    return D


def _precision_diag(spec: SourceSpec, r: np.ndarray) -> np.ndarray:
    # -expm1(-2r) is exactly 0 at r = 0 and 1 at r = inf
    return -np.expm1(-2.0 * r) * spec.precision_gain


def noise_precision(spec: SourceSpec, r) -> np.ndarray:
    """Diagonal precision of the rate-equivalent noise, (1 - e^{-2 r_i}) / sigma2_i."""
    r = np.array(r, dtype=float).ravel()
    if r.size == 1 and spec.L > 1:
        r = np.full(spec.L, float(r[0]))
    if r.size != spec.L or np.any(np.isnan(r)) or np.any(r < 0):
        raise InvalidInput("rates must be non-negative")
    return np.diag(_precision_diag(spec, r))


def info_matrix(spec: SourceSpec, r) -> np.ndarray:
    """Posterior precision cov_x^{-1} + noise_precision(r)."""
    return spec.cov_inv + noise_precision(spec, r)


def mmse_trace(spec: SourceSpec, r) -> float:
    """Sum MSE of the linear estimate, tr[(cov_x^{-1} + noise_precision(r))^{-1}]."""
    return float(np.trace(np.linalg.inv(info_matrix(spec, r))))


def mmse_trace_batch(spec: SourceSpec, rs: np.ndarray) -> np.ndarray:
    """mmse_trace for every row of an (N, L) array of rates."""
    rs = np.atleast_2d(np.asarray(rs, dtype=float))
    k = np.broadcast_to(spec.cov_inv, (rs.shape[0], spec.L, spec.L)).copy()
    idx = np.arange(spec.L)
    k[:, idx, idx] += _precision_diag(spec, rs)
    return np.sum(1.0 / np.linalg.eigvalsh(k), axis=1)


def in_B(spec: SourceSpec, r, D: float) -> bool:
    return mmse_trace(spec, r) <= D


def on_boundary_B(spec: SourceSpec, r, D: float, tol: float = 1e-9) -> bool:
    return abs(mmse_trace(spec, r) - D) <= tol * D


def equicorr_inverse_coeffs(L: int, rho: float) -> tuple[float, float]:
    """(a, b) with inverse of the unit equicorrelated matrix = a on the diagonal, -b off it."""
    den = (1.0 - rho) * (1.0 + (L - 1) * rho)
    return (1.0 + (L - 2) * rho) / den, rho / den


def build_equicorrelated(L: int, rho: float, noise_var) -> SourceSpec:
    """Unit-variance sources with common correlation ``rho``."""
    L = int(L)
    if L < 1:
        raise InvalidInput("L must be at least 1")
    if L > 1 and not (-1.0 / (L - 1) < rho < 1.0):
        raise InvalidInput(f"rho={rho} outside (-1/(L-1), 1)")
    cov = np.full((L, L), float(rho))
    np.fill_diagonal(cov, 1.0)
    return SourceSpec(cov, np.broadcast_to(np.asarray(noise_var, float), (L,)),
                      label=f"equicorr:{L},{rho!r}")


def build_circulant4(rho: float, noise_var) -> SourceSpec:
    """Four cyclically correlated sources: neighbours at correlation rho, opposite pair uncorrelated."""
    if not abs(rho) < 0.5:
        raise InvalidInput("|rho| must be below 1/2")
    cov = np.array(
        [[1, rho, 0, rho], [rho, 1, rho, 0], [0, rho, 1, rho], [rho, 0, rho, 1]], dtype=float
    )
    return SourceSpec(cov, np.broadcast_to(np.asarray(noise_var, float), (4,)),
                      label=f"circulant4:{rho!r}")


def _require_common_noise(spec: SourceSpec) -> float:
    if np.ptp(spec.noise_var) > 1e-12 * float(np.max(spec.noise_var)):
        raise InvalidInput("requires identical noise variances")
    return float(spec.noise_var[0])


def cyclic_eigs(spec: SourceSpec, r: float) -> np.ndarray:
    """Eigenvalues 1/lambda_i + (1 - e^{-2r}) / sigma2 of the information matrix at common rate r."""
    sigma2 = _require_common_noise(spec)
    return 1.0 / spec.source_eigs + (-math.expm1(-2.0 * r)) / sigma2


def phi_cyclic(spec: SourceSpec, r: float) -> float:
    """Sum MSE at common rate r."""
    return float(np.sum(1.0 / cyclic_eigs(spec, r)))


def _common_t(spec: SourceSpec, D: float, trace_at) -> float:
    """Bisection for t = 1 - e^{-2r} in [0, 1] with trace_at(t) = D (trace_at decreasing)."""
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if trace_at(mid) > D:
            lo = mid
        else:
            hi = mid
    return hi


def r_star(spec: SourceSpec, D: float) -> float:
    """Unique common rate r with phi(r) = D for a cyclic-shift-invariant source."""
    if not spec.is_cyclic():
        raise InvalidInput("r_star needs a cyclic-shift-invariant source with equal noise variances")
    return common_boundary_rate(spec, D)


def common_boundary_rate(spec: SourceSpec, D: float) -> float:
    """Common rate r (same for every encoder) placing r*1 on the boundary of B_L(D).

    Works for any source; with equal noise variances the information matrix
    at common rate r has eigenvalues ``1/lambda_i + c(1 - e^{-2r})``.
    """
    D = float(D)
    lam = spec.source_eigs
    if np.ptp(spec.noise_var) <= 1e-12 * float(np.max(spec.noise_var)):
        c = float(spec.precision_gain[0])

        def trace_at(t):
            return float(np.sum(1.0 / (1.0 / lam + c * t)))
    else:
        def trace_at(t):
            k = spec.cov_inv + np.diag(t * spec.precision_gain)
            return float(np.trace(np.linalg.inv(k)))

    lo_val, hi_val = trace_at(1.0), trace_at(0.0)
    if not lo_val < D:
        raise Infeasible(f"D={D:g} not above the infinite-rate limit {lo_val:.12g}")
    if D >= hi_val:
        if D > hi_val * (1 + 1e-15):
            raise Infeasible(f"D={D:g} not below tr(cov_x)={hi_val:.12g}")
        return 0.0
    t = _common_t(spec, D, trace_at)
    return -0.5 * math.log1p(-t)


def scale_to_boundary(spec: SourceSpec, r, D: float) -> np.ndarray:
    """Rescale r along its ray so that mmse_trace(s * r) = D.

    Raises :class:`Infeasible` if the ray never reaches the boundary.
    """
    r = as_rates(r, spec.L)
    if not np.any(r > 0):
        raise Infeasible("zero rate vector cannot be scaled onto the boundary")
    lim = mmse_trace(spec, np.where(r > 0, np.inf, 0.0))
    if lim >= D:
        raise Infeasible("boundary not reachable along this ray")
    lo, hi = 0.0, 1.0
    while mmse_trace(spec, hi * r) > D:
        lo, hi = hi, 2.0 * hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if mmse_trace(spec, mid * r) > D:
            lo = mid
        else:
            hi = mid
    return hi * r


def scale_to_boundary_batch(spec: SourceSpec, rs, D: float) -> np.ndarray:
    """Row-wise :func:`scale_to_boundary` for an (N, L) array; unreachable rows become nan."""
    rs = np.atleast_2d(np.asarray(rs, dtype=float))
    if rs.shape[1] != spec.L or not np.all(np.isfinite(rs)) or np.any(rs < 0):
        raise InvalidInput("rates must be a finite non-negative (N, L) array")
    lim = mmse_trace_batch(spec, np.where(rs > 0, np.inf, 0.0))
    ok = lim < D
    lo = np.zeros(rs.shape[0])
    hi = np.ones(rs.shape[0])
    out = ~ok
    for _ in range(1100):
        over = ~out & (mmse_trace_batch(spec, hi[:, None] * rs) > D)
        if not np.any(over):
            break
        lo = np.where(over, hi, lo)
        hi = np.where(over, 2.0 * hi, hi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        active = (mid > lo) & (mid < hi) & ~out
        if not np.any(active):
            break
        above = mmse_trace_batch(spec, mid[:, None] * rs) > D
        lo = np.where(active & above, mid, lo)
        hi = np.where(active & ~above, mid, hi)
    res = hi[:, None] * rs
    res[~ok] = np.nan
    return res


def load_model(path) -> SourceSpec:
    """Read ``{"cov_x": [[...]], "noise_var": [...]}`` from a JSON file."""
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidInput(f"cannot read model file {path}: {exc}") from exc
    if not isinstance(data, dict) or "cov_x" not in data or "noise_var" not in data:
        raise InvalidInput("model file needs 'cov_x' and 'noise_var'")
    try:
        cov = np.array(data["cov_x"], dtype=float)
        noise = np.array(data["noise_var"], dtype=float)
    except (TypeError, ValueError) as exc:
        raise InvalidInput(f"model file has non-numeric entries: {exc}") from exc
    if noise.ndim != 1:
        raise InvalidInput("noise_var must be a flat list")
    return SourceSpec(cov, noise, label=f"file:{path}")


def dump_model(spec: SourceSpec, path) -> None:
    Path(path).write_text(json.dumps(spec.to_dict()))
