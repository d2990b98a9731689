"""Sufficient conditions under which the inner and outer bounds coincide.

Every check returns a :class:`MatchingReport` whose ``slack`` is the
smallest margin of the governing inequality (positive when it holds).
Sampled checks draw points of B_L(D) from a seeded generator, so reports
are reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import Infeasible, InvalidInput, NotApplicable
from .linalg import secular_eig_equicorr
from .model import (
    SourceSpec,
    check_distortion,
    equicorr_inverse_coeffs,
    mmse_trace_batch,
    scale_to_boundary,
)
from .waterfill import waterfill_log_theta_batch

__all__ = [
    "CONDITIONS",
    "DEFAULT_SEED",
    "MatchingReport",
    "sample_B",
    "check_md_sampled",
    "check_lemma3",
    "check_theorem4",
    "check_corollary4",
    "check_theorem6",
    "check_theorem7",
    "check_theorem8_window",
    "theorem8_window",
    "theorem8_closed_form",
    "theorem9_threshold",
    "check_theorem9",
    "theorem9_curve",
    "circulant4_rho",
    "run_all_checks",
]

CONDITIONS = (
    "MD_sampled", "Lemma3", "Theorem4", "Corollary4",
    "Theorem6", "Theorem7", "Theorem8_window", "Theorem9",
)
DEFAULT_SEED = 0x5EED
R_CAP = 10.0
MD_STEP = 1e-4
MD_TOL = 1e-8
REL_TOL = 1e-12


@dataclass(frozen=True)
class MatchingReport:
    condition_id: str
    verdict: str
    slack: float
    witnesses: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    @property
    def holds(self) -> bool:
        return self.verdict == "holds"

    def to_dict(self) -> dict:
        return {
            "condition_id": self.condition_id,
            "verdict": self.verdict,
            "slack": self.slack,
            "witnesses": [[float(x) for x in np.ravel(w)] for w in self.witnesses],
            "details": dict(self.details),
        }


def _window_report(cid: str, lower: float, upper: float, D: float, strict_lower: bool = False,
                   details: dict | None = None) -> MatchingReport:
    """Verdict for lower (<= or <) D <= upper with relative boundary tolerance."""
    scale = max(abs(lower), abs(upper), abs(D), 1.0)
    slack = min(D - lower, upper - D)
    lo_ok = D > lower if strict_lower else D - lower >= -REL_TOL * scale
    hi_ok = upper - D >= -REL_TOL * scale
    info = {"lower": lower, "upper": upper, "D": D}
    info.update(details or {})
    return MatchingReport(cid, "holds" if lo_ok and hi_ok else "fails", slack, [], info)


def sample_B(spec: SourceSpec, D: float, n: int, seed: int = DEFAULT_SEED,
             r_cap: float = R_CAP, max_rounds: int = 64) -> tuple[np.ndarray, int]:
    """Draw ``n`` points of B_L(D) by rejection from the box [0, r_cap]^L.

    If rejection yields too few points, the rest are boundary points along
    random rays pushed inward by a random factor. Returns ``(points, n_rejection)``.
    """
    D = check_distortion(spec, D)
    L = spec.L
    rng = np.random.default_rng(seed)
    batch = max(1024, 4 * n)
    got: list[np.ndarray] = []
    count = 0
    for _ in range(max_rounds):
        if count >= n:
            break
        cand = rng.uniform(0.0, r_cap, size=(batch, L))
        keep = cand[mmse_trace_batch(spec, cand) <= D]
        got.append(keep)
        count += keep.shape[0]
    pts = np.concatenate(got)[:n] if got else np.empty((0, L))
    n_rej = pts.shape[0]
    fill = []
    while n_rej + len(fill) < n:
        d = rng.uniform(0.0, 1.0, size=L) + 1e-3
        try:
            b = scale_to_boundary(spec, d, D)
        except Infeasible:
            continue
        fill.append(b * rng.uniform(1.0, 2.0))
    if fill:
        pts = np.concatenate([pts, np.array(fill)])
    return pts, n_rej


def _info_eigs(spec: SourceSpec, rs: np.ndarray) -> np.ndarray:
    k = np.broadcast_to(spec.cov_inv, (rs.shape[0], spec.L, spec.L)).copy()
    idx = np.arange(spec.L)
    k[:, idx, idx] += -np.expm1(-2.0 * rs) * spec.precision_gain
    return np.linalg.eigvalsh(k)


def _log_theta_batch(spec: SourceSpec, rs: np.ndarray, D: float) -> np.ndarray:
    return waterfill_log_theta_batch(1.0 / _info_eigs(spec, rs), D)


def check_md_sampled(spec: SourceSpec, D: float, n_samples: int = 1000,
                     seed: int = DEFAULT_SEED, step: float = MD_STEP) -> MatchingReport:
    """Forward differences of e^{-2 r_i} theta(D, r) along each coordinate at sampled points."""
    pts, n_rej = sample_B(spec, D, n_samples, seed)
    L = spec.L
    base = _log_theta_batch(spec, pts, D)
    worst = -math.inf
    where = (0, 0)
    for i in range(L):
        moved = pts.copy()
        moved[:, i] += step
        lt = _log_theta_batch(spec, moved, D)
        diff = np.exp(lt - 2.0 * moved[:, i]) - np.exp(base - 2.0 * pts[:, i])
        k = int(np.argmax(diff))
        if diff[k] > worst:
            worst, where = float(diff[k]), (k, i)
    slack = MD_TOL - worst
    return MatchingReport(
        "MD_sampled", "holds" if worst <= MD_TOL else "fails", slack, [pts[where[0]]],
        {"n_samples": int(pts.shape[0]), "n_rejection": n_rej, "max_difference": worst,
         "coordinate": where[1], "step": step},
    )


def check_lemma3(spec: SourceSpec, D: float, n_samples: int = 1000,
                 seed: int = DEFAULT_SEED) -> MatchingReport:
    """1/alpha_min - 1/alpha_max <= 1/(a_ii + c_i) for all i at sampled points of B_L(D)."""
    pts, n_rej = sample_B(spec, D, n_samples, seed)
    eig = _info_eigs(spec, pts)
    lhs = 1.0 / eig[:, 0] - 1.0 / eig[:, -1]
    rhs = float(np.min(1.0 / (np.diag(spec.cov_inv) + spec.precision_gain)))
    margin = rhs - lhs
    k = int(np.argmin(margin))
    slack = float(margin[k])
    ok = slack >= -REL_TOL * rhs
    return MatchingReport("Lemma3", "holds" if ok else "fails", slack, [pts[k]],
                          {"n_samples": int(pts.shape[0]), "n_rejection": n_rej, "rhs": rhs})


def check_theorem4(spec: SourceSpec, D: float) -> MatchingReport:
    """tr[(cov_x^{-1} + cov_n^{-1})^{-1}] < D <= (L+1)/alpha*_max."""
    k = spec.cov_inv + np.diag(spec.precision_gain)
    eig = np.linalg.eigvalsh(k)
    lower = float(np.sum(1.0 / eig))
    amax = float(eig[-1])
    L = spec.L
    details = {"alpha_star_max": amax}
    if L > 1:
        details["prior_upper"] = (L + 1.0 / (L - 1)) / amax
    return _window_report("Theorem4", lower, (L + 1) / amax, float(D), strict_lower=True,
                          details=details)


def _equicorr_checked(L: int, rho: float) -> tuple[float, float]:
    L = int(L)
    if L < 2:
        raise InvalidInput("equicorrelated checks need L >= 2")
    if not (-1.0 / (L - 1) < rho < 1.0):
        raise InvalidInput(f"rho={rho} outside (-1/(L-1), 1)")
    return equicorr_inverse_coeffs(L, rho)


def check_corollary4(L: int, rho: float, c, D: float) -> MatchingReport:
    """Explicit window for equicorrelated sources with per-encoder noise precisions c."""
    a, b = _equicorr_checked(L, rho)
    c = np.broadcast_to(np.asarray(c, dtype=float), (int(L),)).copy()
    if np.any(c <= 0) or not np.all(np.isfinite(c)):
        raise InvalidInput("noise precisions must be positive and finite")
    w = 1.0 / (a + b + c)
    # sum over ordered pairs i != j of w_i w_j
    cross = float(np.sum(w) ** 2 - np.sum(w ** 2))
    num = float(np.sum(w)) - b * cross
    den = 1.0 - b * float(np.sum(w))
    amax = float(secular_eig_equicorr(a + c, -b)[-1])
    upper = (L + 1) / amax
    info = {"a": a, "b": b, "alpha_star_max": amax}
    if den <= 0:
        return MatchingReport("Corollary4", "not_applicable", den, [], dict(info, denominator=den))
    lower = num / den
    if lower > upper:
        return MatchingReport("Corollary4", "not_applicable", upper - lower, [],
                              dict(info, lower=lower, upper=upper, D=float(D)))
    return _window_report("Corollary4", lower, upper, float(D), details=info)


def check_theorem6(a: float, b: float, c_min: float, c_max: float, L: int, D: float) -> MatchingReport:
    """(L/s)(1 + b/(s - Lb)) <= D <= (L+1)/(a+b+c_max) with s = a + b + c_min."""
    s = a + b + c_min
    den = s - L * b
    if den <= 0:
        return MatchingReport("Theorem6", "not_applicable", den, [], {"denominator": den})
    lower = (L / s) * (1.0 + b / den)
    upper = (L + 1) / (a + b + c_max)
    return _window_report("Theorem6", lower, upper, float(D))


def check_theorem7(spec: SourceSpec) -> MatchingReport:
    """sigma^2 >= ((L-1)/L)(lambda_max/lambda_min)(lambda_max - lambda_min)."""
    if not spec.is_cyclic():
        raise InvalidInput("needs a cyclic-shift-invariant source with equal noise variances")
    lam = spec.source_eigs
    lmin, lmax = float(lam[0]), float(lam[-1])
    L = spec.L
    rhs = ((L - 1) / L) * (lmax / lmin) * (lmax - lmin)
    sigma2 = float(spec.noise_var[0])
    slack = sigma2 - rhs
    ok = slack >= -REL_TOL * max(sigma2, rhs)
    return MatchingReport("Theorem7", "holds" if ok else "fails", slack, [],
                          {"rhs": rhs, "sigma2": sigma2, "lambda_min": lmin, "lambda_max": lmax})


def theorem8_window(a: float, b: float, c: float, L: int) -> tuple[float, float]:
    s = a + b + c
    den = s - L * b
    if den <= 0:
        raise NotApplicable("a + b + c - L b must be positive")
    return (L / s) * (1.0 + b / den), (L / s) * (1.0 + 1.0 / L)


def check_theorem8_window(a: float, b: float, c: float, L: int, D: float) -> MatchingReport:
    try:
        lower, upper = theorem8_window(a, b, c, L)
    except NotApplicable:
        den = a + b + c - L * b
        return MatchingReport("Theorem8_window", "not_applicable", den, [], {"denominator": den})
    if lower > upper:
        return MatchingReport("Theorem8_window", "not_applicable", upper - lower, [],
                              {"lower": lower, "upper": upper, "D": float(D)})
    return _window_report("Theorem8_window", lower, upper, float(D))


def theorem8_closed_form(a: float, b: float, c: float, L: int, D: float, rho: float) -> tuple[float, float]:
    """Minimal sum rate and the optimal common rate for an equicorrelated source.

    Valid inside the window of :func:`theorem8_window`; raises
    :class:`NotApplicable` outside it.
    """
    rep = check_theorem8_window(a, b, c, L, D)
    if not rep.holds:
        raise NotApplicable(f"D={D!r} outside the closed-form window {rep.details}")
    s = a + b + c
    db = D * b
    l1 = 0.5 * L * (1.0 + db + math.sqrt((1.0 - db) ** 2 + 4.0 * db / L))
    gap = D * s - l1
    if gap <= 0:
        # the window's lower edge is the infinite-rate distortion
        raise Infeasible("D does not exceed the infinite-rate distortion")
    r_sum = (0.5 * L * math.log((1.0 - rho) * l1 * c / gap)
             + 0.5 * math.log((1.0 + (L - 1) * rho) / (1.0 - rho) * (1.0 - L * db / l1)))
    r_opt = 0.5 * math.log(D * c / gap)
    return r_sum, r_opt


def theorem9_threshold(rho: float) -> float:
    p = abs(rho)
    return 3.0 * p * (1.0 + 2.0 * p) / (1.0 - 2.0 * p)


def check_theorem9(rho: float, sigma2: float) -> MatchingReport:
    if not abs(rho) < 0.5:
        raise InvalidInput("|rho| must be below 1/2")
    rhs = theorem9_threshold(rho)
    slack = sigma2 - rhs
    ok = slack >= -REL_TOL * max(sigma2, rhs)
    return MatchingReport("Theorem9", "holds" if ok else "fails", slack, [], {"rhs": rhs, "sigma2": sigma2})


def theorem9_curve(rho: float, sigma2: float, r_grid) -> list[tuple[float, float]]:
    """(D, R) along the common-rate parameter for the four-source cyclic model."""
    if not check_theorem9(rho, sigma2).holds:
        raise NotApplicable(f"sigma2={sigma2!r} below the threshold {theorem9_threshold(rho)!r}")
    inv_lam = 1.0 / np.array([1.0 + 2.0 * rho, 1.0, 1.0, 1.0 - 2.0 * rho])
    out = []
    for r in np.asarray(r_grid, dtype=float).ravel():
        if not r >= 0:
            raise InvalidInput("curve parameters must be non-negative")
        beta = inv_lam + (-math.expm1(-2.0 * r)) / sigma2
        out.append((float(np.sum(1.0 / beta)),
                    0.5 * (math.log1p(-4.0 * rho * rho) + 8.0 * float(r) + float(np.sum(np.log(beta))))))
    return out


def circulant4_rho(spec: SourceSpec) -> float | None:
    """rho when ``spec`` is the four-source cyclic model with neighbour correlation rho."""
    if spec.L != 4:
        return None
    rho = float(spec.cov_x[0, 1])
    ref = np.array([[1, rho, 0, rho], [rho, 1, rho, 0], [0, rho, 1, rho], [rho, 0, rho, 1]])
    return rho if np.allclose(spec.cov_x, ref, rtol=0, atol=1e-12) else None


def run_all_checks(spec: SourceSpec, D: float, n_samples: int = 1000,
                   seed: int = DEFAULT_SEED) -> list[MatchingReport]:
    """Every check that applies to ``spec``, in :data:`CONDITIONS` order."""
    D = check_distortion(spec, D)
    reports = [
        check_md_sampled(spec, D, n_samples, seed),
        check_lemma3(spec, D, n_samples, seed),
        check_theorem4(spec, D),
    ]
    rho = spec.equicorrelation()
    common = np.ptp(spec.precision_gain) <= 1e-12 * float(np.max(spec.precision_gain))
    if rho is not None and spec.L >= 2:
        a, b = equicorr_inverse_coeffs(spec.L, rho)
        c = spec.precision_gain
        reports.append(check_corollary4(spec.L, rho, c, D))
        reports.append(check_theorem6(a, b, float(np.min(c)), float(np.max(c)), spec.L, D))
    if spec.is_cyclic():
        reports.append(check_theorem7(spec))
    if rho is not None and spec.L >= 2 and common:
        reports.append(check_theorem8_window(a, b, float(c[0]), spec.L, D))
    rho4 = circulant4_rho(spec)
    if rho4 is not None and common:
        reports.append(check_theorem9(rho4, float(spec.noise_var[0])))
    order = {cid: i for i, cid in enumerate(CONDITIONS)}
    return sorted(reports, key=lambda rep: order[rep.condition_id])
