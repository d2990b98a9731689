"""Small dense symmetric-matrix numerics.

Everything here works on plain ``numpy`` arrays. The eigensolver is a cyclic
Jacobi sweep (deterministic, no LAPACK dependence for the decomposition
itself); the secular solvers locate eigenvalues of structured matrices by
bisection inside brackets that are guaranteed by interlacing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateSpectrum, InvalidInput

__all__ = [
    "SpectralDecomp",
    "SecularRoots",
    "as_symmetric",
    "eig_sym",
    "eigvals_sym",
    "logdet_spd",
    "det_uniform_offdiag",
    "group_values",
    "equicorr_secular_roots",
    "secular_eig_equicorr",
    "bordered_secular_roots",
    "secular_eig_bordered",
    "eig_sensitivity",
]

SYM_TOL = 1e-12
GROUP_RTOL = 1e-9
_MAX_SWEEPS = 60
_MAX_BISECT = 200


@dataclass(frozen=True)
class SpectralDecomp:
    """Eigenvalues in ascending order and the matching orthonormal basis.

    ``basis[:, k]`` is the unit eigenvector for ``eigenvalues[k]``.
    """

    eigenvalues: np.ndarray
    basis: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.basis * self.eigenvalues) @ self.basis.T


def as_symmetric(m, tol: float = SYM_TOL) -> np.ndarray:
    """Validate a square symmetric matrix and return an exactly symmetric copy.

    Asymmetry up to ``tol`` (relative to the largest entry) is removed by
    averaging with the transpose.
    """
    a = np.array(m, dtype=float, copy=True)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise InvalidInput(f"expected a non-empty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInput("matrix has non-finite entries")
    scale = max(float(np.max(np.abs(a))), 1.0)
    if np.max(np.abs(a - a.T)) > tol * scale:
        raise InvalidInput("matrix is not symmetric")
    return 0.5 * (a + a.T)


def eig_sym(m) -> SpectralDecomp:
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Each eigenvector is sign-normalised so that its largest-magnitude
    component is positive, which makes the output deterministic.
    """
    a = as_symmetric(m)
    n = a.shape[0]
    v = np.eye(n)
    scale = float(np.max(np.abs(a)))
    eps = np.finfo(float).eps
    if n > 1 and scale > 0.0:
        iu = np.triu_indices(n, 1)
        for _ in range(_MAX_SWEEPS):
            off = math.sqrt(float(np.sum(a[iu] ** 2)))
            if off <= eps * scale:
                break
            for p in range(n - 1):
                for q in range(p + 1, n):
                    apq = a[p, q]
                    if abs(apq) <= 1e-300:
                        continue
                    theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                    if abs(theta) > 1e150:
                        t = 0.5 / theta
                    else:
                        t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                    c = 1.0 / math.sqrt(t * t + 1.0)
                    s = t * c
                    ap = a[:, p].copy()
                    aq = a[:, q]
                    a[:, p] = c * ap - s * aq
                    a[:, q] = s * ap + c * aq
                    ap = a[p, :].copy()
                    aq = a[q, :]
                    a[p, :] = c * ap - s * aq
                    a[q, :] = s * ap + c * aq
                    a[p, q] = a[q, p] = 0.0
                    vp = v[:, p].copy()
                    vq = v[:, q]
                    v[:, p] = c * vp - s * vq
                    v[:, q] = s * vp + c * vq
    w = np.diag(a).copy()
    order = np.argsort(w, kind="stable")
    w = w[order]
    v = v[:, order]
    lead = np.argmax(np.abs(v), axis=0)
    signs = np.sign(v[lead, np.arange(n)])
    signs[signs == 0] = 1.0
    return SpectralDecomp(eigenvalues=w, basis=v * signs)


def eigvals_sym(m) -> np.ndarray:
    """Ascending eigenvalues of one symmetric matrix or a stack of them.

    Batched hot paths (sampling, optimisation) go through LAPACK here;
    :func:`eig_sym` is the reference decomposition.
    """
    return np.linalg.eigvalsh(np.asarray(m, dtype=float))


def logdet_spd(m) -> np.ndarray | float:
    """log-determinant of a positive definite matrix (or stack) via Cholesky."""
    try:
        chol = np.linalg.cholesky(np.asarray(m, dtype=float))
    except np.linalg.LinAlgError:
        raise InvalidInput("matrix is not positive definite") from None
    out = 2.0 * np.sum(np.log(np.diagonal(chol, axis1=-2, axis2=-1)), axis=-1)
    return out if np.ndim(out) else float(out)


def det_uniform_offdiag(z: Sequence[float], delta: float) -> float:
    """Determinant of the matrix with diagonal ``z`` and every off-diagonal entry ``delta``.

    Uses the product form ``prod(z - delta) * (1 + delta * sum(1 / (z - delta)))``.
    When some ``z_i`` coincides with ``delta`` the product form divides by
    zero, so the matrix is assembled and factorised instead.
    """
    z = np.asarray(z, dtype=float).ravel()
    if z.size == 0:
        raise InvalidInput("z must be non-empty")
    d = z - delta
    scale = max(1.0, abs(delta), float(np.max(np.abs(z))))
    if np.any(np.abs(d) <= 1e-12 * scale):
        m = np.full((z.size, z.size), float(delta))
        np.fill_diagonal(m, z)
        return float(np.linalg.det(m))
    return float(np.prod(d) * (1.0 + delta * np.sum(1.0 / d)))


def group_values(values, rtol: float = GROUP_RTOL) -> list[tuple[float, list[int]]]:
    """Group nearly equal values.

    Returns ``(representative, indices)`` pairs in ascending order. Two
    neighbouring sorted values belong to the same group when they differ by
    at most ``rtol`` relative to their magnitude.
    """
    vals = np.asarray(values, dtype=float).ravel()
    order = np.argsort(vals, kind="stable")
    groups: list[tuple[float, list[int]]] = []
    for idx in order:
        x = vals[idx]
        if groups:
            rep, members = groups[-1]
            last = vals[members[-1]]
            if abs(x - last) <= rtol * max(abs(x), abs(last), 1e-300):
                members.append(int(idx))
                groups[-1] = (float(np.mean(vals[members])), members)
                continue
        groups.append((float(x), [int(idx)]))
    return groups


@dataclass(frozen=True)
class SecularRoots:
    """Roots of a secular equation together with the poles that bracket them."""

    roots: np.ndarray
    poles: np.ndarray
    multiplicities: np.ndarray
    residuals: np.ndarray
    eigenvalues: np.ndarray


class _Secular:
    """h(alpha) = s0 + s1*alpha + sum_j w_j / (p_j - alpha), with w_j > 0.

    h is increasing on each interval between consecutive poles, so every
    interval holds at most one root and bisection is safe.
    """

    def __init__(self, s0: float, s1: float, poles: np.ndarray, weights: np.ndarray):
        self.s0 = float(s0)
        self.s1 = float(s1)
        self.p = np.asarray(poles, dtype=float)
        self.w = np.asarray(weights, dtype=float)

    def shifted(self, origin: float, tau: float) -> float:
        # evaluate at alpha = origin + tau with pole offsets taken relative to origin
        return self.s0 + self.s1 * (origin + tau) + float(np.sum(self.w / ((self.p - origin) - tau)))

    def scaled_residual(self, alpha: float) -> float:
        terms = self.w / (self.p - alpha)
        num = self.s0 + self.s1 * alpha + float(np.sum(terms))
        den = abs(self.s0) + abs(self.s1 * alpha) + float(np.sum(np.abs(terms)))
        return abs(num) / den if den > 0 else abs(num)

    def _bisect(self, origin: float, lo: float, hi: float) -> float:
        for _ in range(_MAX_BISECT):
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            if self.shifted(origin, mid) < 0.0:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-14 * (1.0 + abs(origin + mid)) and hi - lo <= 4 * np.finfo(float).eps * max(abs(lo), abs(hi)):
                break
        return origin + 0.5 * (lo + hi)

    def root_between(self, left: float, right: float) -> float:
        """Root strictly between two consecutive poles."""
        gap = right - left
        if self.shifted(left, 0.5 * gap) >= 0.0:
            return self._bisect(left, 0.0, 0.5 * gap)
        return self._bisect(right, -0.5 * gap, 0.0)

    def root_below(self, pole: float, start: float) -> float:
        t = max(start, 1e-300)
        while self.shifted(pole, -t) > 0.0:
            t *= 2.0
        return self._bisect(pole, -t, 0.0)

    def root_above(self, pole: float, start: float) -> float:
        t = max(start, 1e-300)
        while self.shifted(pole, t) < 0.0:
            t *= 2.0
        return self._bisect(pole, 0.0, t)


def _equicorr_matrix(u: np.ndarray, b: float) -> np.ndarray:
    m = np.full((u.size, u.size), float(b))
    np.fill_diagonal(m, u)
    return m


def equicorr_secular_roots(u: Sequence[float], b: float, rtol: float = GROUP_RTOL) -> SecularRoots:
    """Secular-equation eigenvalues of ``diag(u) + b * (ones - I)``.

    Writing the matrix as ``diag(u - b) + b * 1 1^T``, the eigenvalues are the
    values ``u_j - b`` repeated (multiplicity - 1) times, plus one root of
    ``1 + b * sum_j l_j / (u_j - b - alpha) = 0`` per distinct ``u_j``. For
    ``b < 0`` each root lies just below its pole ``u_j - b``, for ``b > 0``
    just above it.
    """
    u = np.asarray(u, dtype=float).ravel()
    if u.size == 0 or not np.all(np.isfinite(u)) or not math.isfinite(b):
        raise InvalidInput("u must be a non-empty finite vector and b finite")
    n = u.size
    groups = group_values(u - b, rtol)
    poles = np.array([g[0] for g in groups])
    mult = np.array([len(g[1]) for g in groups])
    if b == 0.0 or n == 1:
        eig = np.sort(u)
        return SecularRoots(eig.copy(), poles, mult, np.zeros(n), eig)
    sec = _Secular(-1.0 if b < 0 else 1.0, 0.0, poles, abs(b) * mult)
    roots = []
    span = abs(b) * n
    if b < 0:
        roots.append(sec.root_below(poles[0], span))
        for j in range(1, poles.size):
            roots.append(sec.root_between(poles[j - 1], poles[j]))
    else:
        for j in range(poles.size - 1):
            roots.append(sec.root_between(poles[j], poles[j + 1]))
        roots.append(sec.root_above(poles[-1], span))
    roots = np.array(roots)
    resid = np.array([sec.scaled_residual(a) for a in roots])
    extra = np.repeat(poles, mult - 1)
    eig = np.sort(np.concatenate([roots, extra]))
    return SecularRoots(roots, poles, mult, resid, eig)


def secular_eig_equicorr(u: Sequence[float], b: float) -> np.ndarray:
    """All eigenvalues (ascending) of the positive definite matrix ``diag(u) + b * (ones - I)``.

    Raises :class:`InvalidInput` when the matrix is not positive definite.
    """
    res = equicorr_secular_roots(u, b)
    if res.eigenvalues[0] <= 0.0:
        raise InvalidInput("matrix with uniform off-diagonal is not positive definite")
    return res.eigenvalues


def bordered_secular_roots(
    u1: float,
    etas: Sequence[float],
    btilde: Sequence[float],
    rtol: float = GROUP_RTOL,
) -> SecularRoots:
    """Eigenvalues of the arrow matrix ``[[u1, btilde], [btilde^T, diag(etas)]]``.

    Equal ``etas`` are grouped and their border weights pooled into
    ``eps_j = sum btilde_l^2``. Groups with ``eps_j > 0`` act as poles of
    ``u1 = alpha - sum_j eps_j / (alpha - eta_j)``, whose ``w + 1`` roots
    interlace them. A pole group of size ``t`` keeps ``t - 1`` copies of its
    eta; a group with zero weight keeps all ``t`` copies.
    """
    etas = np.asarray(etas, dtype=float).ravel()
    bt = np.asarray(btilde, dtype=float).ravel()
    if etas.shape != bt.shape:
        raise InvalidInput("etas and btilde must have the same length")
    if not (math.isfinite(u1) and np.all(np.isfinite(etas)) and np.all(np.isfinite(bt))):
        raise InvalidInput("non-finite input")
    groups = group_values(etas, rtol)
    scale = max(abs(u1), float(np.max(np.abs(etas))) if etas.size else 0.0, 1e-300)
    active_p, active_w, active_t, extra = [], [], [], []
    for rep, members in groups:
        eps_j = float(np.sum(bt[members] ** 2))
        if eps_j > (rtol * scale) ** 2:
            active_p.append(rep)
            active_w.append(eps_j)
            active_t.append(len(members))
            extra.extend([rep] * (len(members) - 1))
        else:
            extra.extend([rep] * len(members))
    poles = np.array(active_p)
    weights = np.array(active_w)
    mult = np.array(active_t, dtype=int)
    if poles.size == 0:
        roots = np.array([float(u1)])
        resid = np.zeros(1)
    else:
        sec = _Secular(-float(u1), 1.0, poles, weights)
        span = math.sqrt(float(np.sum(weights)))
        roots_l = [sec.root_below(poles[0], max(poles[0] - u1, 0.0) + span)]
        for j in range(1, poles.size):
            roots_l.append(sec.root_between(poles[j - 1], poles[j]))
        roots_l.append(sec.root_above(poles[-1], max(u1 - poles[-1], 0.0) + span))
        roots = np.array(roots_l)
        resid = np.array([sec.scaled_residual(a) for a in roots])
    eig = np.sort(np.concatenate([roots, np.array(extra, dtype=float)]))
    return SecularRoots(roots, poles, mult, resid, eig)


def secular_eig_bordered(u1: float, etas: Sequence[float], btilde: Sequence[float]) -> np.ndarray:
    """All eigenvalues (ascending) of a positive definite arrow matrix."""
    res = bordered_secular_roots(u1, etas, btilde)
    if res.eigenvalues[0] <= 0.0:
        raise InvalidInput("bordered matrix is not positive definite")
    return res.eigenvalues


def eig_sensitivity(m, i: int, gap_tol: float = 1e-8) -> np.ndarray:
    """Derivatives of every eigenvalue with respect to the diagonal entry ``m[i, i]``.

    For a simple eigenvalue the derivative is the squared ``i``-th component of
    its unit eigenvector, so the returned vector is non-negative and sums to one.
    """
    dec = eig_sym(m)
    n = dec.eigenvalues.size
    if not 0 <= i < n:
        raise InvalidInput(f"index {i} out of range for dimension {n}")
    if n > 1:
        scale = max(1.0, float(np.max(np.abs(dec.eigenvalues))))
        if np.min(np.diff(dec.eigenvalues)) < gap_tol * scale:
            raise DegenerateSpectrum("eigenvalues are not separated; use finite differences")
    return dec.basis[i, :] ** 2
