"""Seeded oracle suites run by ``remote-rd selftest``."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSpectrum
from .linalg import det_uniform_offdiag, eig_sensitivity
from .model import SourceSpec
from .oracles import (
    fd_eig_sensitivity,
    gaussian_mi,
    grid_cell_bound,
    grid_log_product_max,
    kkt_residual,
    lu_det,
    random_spec,
)
from .region import j_inner
from .waterfill import waterfill

__all__ = ["SuiteResult", "suite_waterfill", "suite_sensitivity", "suite_determinant",
           "suite_mutual_info", "run_selftest"]


@dataclass(frozen=True)
class SuiteResult:
    name: str
    passed: bool
    count: int
    worst: float
    tol: float

    def __post_init__(self):
        object.__setattr__(self, "passed", bool(self.passed))
        object.__setattr__(self, "worst", float(self.worst))

    def to_dict(self) -> dict:
        return {"suite": self.name, "passed": self.passed, "count": self.count,
                "worst": self.worst, "tol": self.tol}


def suite_waterfill(rng: np.random.Generator, n: int, grid: int = 200) -> SuiteResult:
    """Grid maximiser bracket plus KKT residual; worst is the larger normalised miss."""
    worst = 0.0
    for _ in range(n):
        L = int(rng.integers(2, 5))
        a = rng.uniform(0.05, 2.0, size=L)
        D = float(np.sum(a)) * rng.uniform(1.0, 4.0)
        res = waterfill(a, D)
        g = grid_log_product_max(a, D, grid)
        gap = res.log_theta - g
        cell = grid_cell_bound(a, D, grid)
        miss = max(-gap, gap - cell, 0.0)
        worst = max(worst, miss, kkt_residual(a, D, res))
    return SuiteResult("waterfill_grid", worst <= 1e-10, n, worst, 1e-10)


def suite_sensitivity(rng: np.random.Generator, n: int) -> SuiteResult:
    worst = 0.0
    done = 0
    while done < n:
        L = int(rng.integers(2, 7))
        a = rng.normal(size=(L, L))
        m = a @ a.T + 0.1 * np.eye(L)
        i = int(rng.integers(L))
        try:
            d = eig_sensitivity(m, i)
        except DegenerateSpectrum:
            continue
        # each check divided by its own tolerance: 1e-10 on the sum, 1e-5 against differences
        worst = max(worst, abs(float(np.sum(d)) - 1.0) / 1e-10,
                    float(np.max(np.abs(d - fd_eig_sensitivity(m, i)))) / 1e-5)
        done += 1
    return SuiteResult("eig_sensitivity_fd", worst <= 1.0, n, worst, 1.0)


def suite_determinant(rng: np.random.Generator, n: int) -> SuiteResult:
    worst = 0.0
    for _ in range(n):
        L = int(rng.integers(1, 9))
        z = rng.uniform(0.5, 3.0, size=L)
        delta = float(rng.uniform(-0.4, 0.4)) * float(np.min(z))
        m = np.full((L, L), delta)
        np.fill_diagonal(m, z)
        ref = lu_det(m)
        worst = max(worst, abs(det_uniform_offdiag(z, delta) - ref) / abs(ref))
    return SuiteResult("determinant_identity", worst <= 1e-10, n, worst, 1e-10)


def suite_mutual_info(rng: np.random.Generator, n: int, spec: SourceSpec | None = None) -> SuiteResult:
    worst = 0.0
    for _ in range(n):
        s = spec if spec is not None else random_spec(rng, int(rng.integers(1, 6)))
        r = rng.uniform(0.0, 3.0, size=s.L) * (rng.random(s.L) < 0.85)
        S = int(rng.integers(0, 1 << s.L))
        worst = max(worst, abs(gaussian_mi(s, r, S) - j_inner(s, r, S)))
    return SuiteResult("gaussian_mutual_information", worst <= 1e-8, n, worst, 1e-8)


def run_selftest(seed: int, n: int, spec: SourceSpec | None = None) -> list[SuiteResult]:
    """All suites, each from its own child stream of ``seed``."""
    streams = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(4)]
    m = max(1, math.ceil(n / 4))
    return [
        suite_waterfill(streams[0], m),
        suite_sensitivity(streams[1], n),
        suite_determinant(streams[2], n),
        suite_mutual_info(streams[3], n, spec),
    ]
