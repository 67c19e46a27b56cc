"""Multivariate normal CDF with the sqrt-of-remaining-time correlation structure.

Sequential observations of one geometric Brownian motion at increasing dates
produce standardized log-returns whose pairwise correlation is
``sqrt(tau_l / tau_m)`` for ``l < m`` (``tau`` counting time left to each
date).  This module evaluates the joint CDF for that structure, a variant
with the sign of the last coordinate flipped, and the density-weighted
partial CDFs that appear when differentiating the joint CDF.

Evaluation strategy:

* n = 1: ``erfc``-based univariate CDF (machine precision);
* n = 2: composite Gauss-Legendre reduction to a single integral
  (deterministic, ~1e-14 absolute);
* n >= 3: Cholesky transform to sequential conditional uniforms integrated
  with scrambled-Sobol quasi Monte Carlo over 8 independent randomizations.
  The scrambling is seeded, so results are bit-reproducible per call.

Limits beyond ``+/-CLIP`` standard deviations are clipped; the univariate
tail mass there is below 1e-17, which is far inside every tolerance used.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri
from scipy.stats import qmc

from .errors import BudgetExceeded, NonIncreasingTimes, NotPositiveDefinite

CLIP = 8.5

_N_SHIFTS = 8
_FIRST_LEVEL = 1 << 10
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(32)
_BVN_PANELS = 16


@dataclass(frozen=True)
class MvnAccuracy:
    """Accuracy/budget/reproducibility knobs for the QMC integrator."""

    abs_tol: float = 1e-7
    max_points: int = 1 << 21
    seed: int = 1234

    def __post_init__(self):
        if not self.abs_tol > 0:
            raise ValueError("abs_tol must be positive")
        if not self.max_points > 0:
            raise ValueError("max_points must be positive")


@dataclass(frozen=True)
class CorrelationSpec:
    """Correlation structure driven by the remaining times to observation.

    Args:
        times: remaining times to each observation date, strictly increasing
            and positive.
        flip_last: negate the off-diagonal entries of the last row/column
            (the structure used when the final event is a shortfall rather
            than an exceedance).
    """

    times: tuple[float, ...]
    flip_last: bool = False

    def __post_init__(self):
        object.__setattr__(self, "times", tuple(float(t) for t in self.times))
        prev = 0.0
        for tau in self.times:
            if not tau > prev:
                raise NonIncreasingTimes(
                    "remaining times must be strictly increasing and positive"
                )
            prev = tau

    @property
    def dims(self) -> int:
        return len(self.times)

    def matrix(self) -> np.ndarray:
        """Dense correlation matrix (symmetric positive definite)."""
        tau = np.asarray(self.times)
        ratio = np.sqrt(np.minimum.outer(tau, tau) / np.maximum.outer(tau, tau))
        np.fill_diagonal(ratio, 1.0)
        if self.flip_last and self.dims > 1:
            ratio[-1, :-1] *= -1.0
            ratio[:-1, -1] *= -1.0
        return ratio


def build_correlation(times, t: float, flip_last: bool = False) -> CorrelationSpec:
    """Correlation spec for observation dates ``times`` seen from time ``t``."""
    times = tuple(float(x) for x in times)
    if not times or t >= min(times):
        raise NonIncreasingTimes("evaluation time must precede every observation date")
    return CorrelationSpec(times=tuple(x - t for x in times), flip_last=flip_last)


def _cholesky(matrix: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(matrix)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite("correlation matrix is not positive definite") from exc


def _bvn_batch(a: np.ndarray, b: np.ndarray, rho: float) -> np.ndarray:
    """P(X <= a, Y <= b) for standard bivariate normals, vectorized over rows.

    Reduces to integrating ``phi(x) * Phi((b - rho x) / sqrt(1 - rho^2))``
    up to ``a`` with composite Gauss-Legendre panels; the integrand is
    analytic, so 32 nodes per unit-length panel reach machine accuracy.
    """
    a = np.minimum(np.asarray(a, dtype=float), CLIP)
    b = np.minimum(np.asarray(b, dtype=float), CLIP)
    if abs(rho) < 1e-14:
        return ndtr(a) * ndtr(b)
    if rho >= 1.0 - 1e-13:
        return ndtr(np.minimum(a, b))
    if rho <= -1.0 + 1e-13:
        return np.maximum(ndtr(a) + ndtr(b) - 1.0, 0.0)

    scale = math.sqrt(1.0 - rho * rho)
    width = np.maximum(a + CLIP, 0.0)
    # Per-panel affine maps of the shared Gauss-Legendre rule.
    offsets = (np.arange(_BVN_PANELS) + 0.5) / _BVN_PANELS
    half = width[:, None] / (2.0 * _BVN_PANELS)
    centers = -CLIP + width[:, None] * offsets[None, :]
    x = centers[:, :, None] + half[:, :, None] * _GL_NODES[None, None, :]
    integrand = (
        np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
        * ndtr((b[:, None, None] - rho * x) / scale)
    )
    return np.einsum("qpk,k->q", integrand, _GL_WEIGHTS) * half[:, 0]


def _genz_eval(limits: np.ndarray, chol: np.ndarray, w: np.ndarray) -> np.ndarray:
    """One QMC batch of the sequential conditional-probability product.

    Args:
        limits: (q, n) clipped upper limits.
        chol: (n, n) lower Cholesky factor of the correlation.
        w: (m, n-1) points in the unit cube.

    Returns:
        (q,) batch means of the product integrand.
    """
    q, n = limits.shape
    m = w.shape[0]
    e = np.broadcast_to(ndtr(limits[:, 0] / chol[0, 0])[:, None], (q, m)).copy()
    f = e.copy()
    ys: list[np.ndarray] = []
    for i in range(1, n):
        u = np.clip(w[None, :, i - 1] * e, 1e-300, 1.0 - 1e-16)
        ys.append(ndtri(u))
        shift = chol[i, 0] * ys[0]
        for j in range(1, i):
            shift = shift + chol[i, j] * ys[j]
        e = ndtr((limits[:, i, None] - shift) / chol[i, i])
        f *= e
    return f.mean(axis=1)


def _genz_qmc(limits: np.ndarray, matrix: np.ndarray, acc: MvnAccuracy) -> np.ndarray:
    """Randomized-QMC joint CDF for n >= 3, vectorized over limit rows.

    Runs ``_N_SHIFTS`` independently scrambled Sobol sequences and doubles
    the per-shift sample count until the 3-sigma spread of the shift means
    drops below ``acc.abs_tol`` or the point budget runs out (then the best
    estimate is returned under a ``BudgetExceeded`` warning).  Draws extend
    each sequence incrementally, so the point sets at any level are the
    sequence prefixes and results are reproducible per seed.  Variables are
    integrated most-restrictive-first and each lattice point is paired with
    its antithetic mirror; both reduce the randomization variance.
    """
    q, n = limits.shape
    order = np.argsort(limits.mean(axis=0), kind="stable")
    limits = limits[:, order]
    matrix = matrix[np.ix_(order, order)]
    chol = _cholesky(matrix)
    children = np.random.SeedSequence(acc.seed).spawn(_N_SHIFTS)
    engines = [
        qmc.Sobol(d=n - 1, scramble=True, seed=np.random.default_rng(child))
        for child in children
    ]
    sums = np.zeros((_N_SHIFTS, q))
    count = 0
    draw = _FIRST_LEVEL
    while True:
        row_block = max(1, (1 << 22) // draw)
        for s, engine in enumerate(engines):
            w = engine.random(draw)
            for start in range(0, q, row_block):
                stop = min(start + row_block, q)
                block = limits[start:stop]
                half = _genz_eval(block, chol, w) + _genz_eval(block, chol, 1.0 - w)
                sums[s, start:stop] += draw * 0.5 * half
        count += draw
        means = sums / count
        estimate = means.mean(axis=0)
        spread = 3.0 * means.std(axis=0, ddof=1) / math.sqrt(_N_SHIFTS)
        if spread.max() <= acc.abs_tol:
            return estimate
        if _N_SHIFTS * 2 * count > acc.max_points:
            warnings.warn(
                f"QMC budget {acc.max_points} reached with error estimate "
                f"{spread.max():.3e} > abs_tol {acc.abs_tol:.3e}",
                BudgetExceeded,
            )
            return estimate
        draw = count


def mvn_cdf_batch(limits: np.ndarray, matrix: np.ndarray, acc: MvnAccuracy) -> np.ndarray:
    """Joint CDF rows for a shared correlation matrix.

    Args:
        limits: (q, n) upper limits; ``+/-inf`` sentinels allowed.
        matrix: (n, n) correlation matrix.
        acc: integrator accuracy settings.

    Returns:
        (q,) probabilities, deterministic for fixed ``acc.seed``.
    """
    limits = np.atleast_2d(np.asarray(limits, dtype=float))
    q, n = limits.shape
    if matrix.shape != (n, n):
        raise ValueError("limits/matrix dimension mismatch")
    clipped = np.clip(limits, -CLIP, CLIP)
    if n == 1:
        return ndtr(clipped[:, 0])
    if n == 2:
        return _bvn_batch(clipped[:, 0], clipped[:, 1], float(matrix[0, 1]))
    _cholesky(matrix)
    out = np.zeros(q)
    live = ~np.any(clipped <= -CLIP, axis=1)
    if np.any(live):
        out[live] = _genz_qmc(clipped[live], matrix, acc)
    return out


def mvn_cdf(limits, corr: CorrelationSpec, acc: MvnAccuracy | None = None) -> float:
    """Joint CDF under the sqrt-time correlation structure.

    For one dimension this matches the univariate normal CDF to machine
    precision; higher dimensions follow the strategy in the module docstring.
    """
    acc = acc or MvnAccuracy()
    limits = np.asarray(limits, dtype=float)
    if limits.ndim != 1 or limits.size != corr.dims:
        raise ValueError("limits must be a vector of length corr.dims")
    return float(mvn_cdf_batch(limits[None, :], corr.matrix(), acc)[0])


def _condition_on(limits: np.ndarray, matrix: np.ndarray, pin: int):
    """Gaussian conditioning on coordinate ``pin`` held at its limit.

    Returns the transformed limits and correlation of the remaining
    coordinates.  Infinite limits stay infinite.
    """
    a = limits[pin]
    keep = [j for j in range(limits.size) if j != pin]
    rho = matrix[keep, pin]
    denom = np.sqrt(np.maximum(1.0 - rho * rho, 1e-300))
    raw = limits[keep]
    new_limits = np.where(np.isinf(raw), raw, (raw - rho * a) / denom)
    sub = matrix[np.ix_(keep, keep)]
    new_matrix = (sub - np.outer(rho, rho)) / np.outer(denom, denom)
    np.fill_diagonal(new_matrix, 1.0)
    return new_limits, new_matrix


def mvn_cdf_partial_matrix(
    limits, matrix: np.ndarray, index: int, acc: MvnAccuracy | None = None
) -> float:
    """Density-weighted partial CDF with coordinate ``index`` (1-based) pinned.

    Evaluates ``phi(a_i)`` times the conditional CDF of the remaining
    coordinates, which is the coefficient of ``a_i'(x)`` when
    differentiating the joint CDF along a path ``a(x)``.
    """
    acc = acc or MvnAccuracy()
    limits = np.asarray(limits, dtype=float)
    m = limits.size
    if not 1 <= index <= m:
        raise ValueError("index must lie in 1..n")
    pin = index - 1
    a = limits[pin]
    if not np.isfinite(a):
        return 0.0
    density = math.exp(-0.5 * a * a) / math.sqrt(2.0 * math.pi)
    if m == 1:
        return density
    new_limits, new_matrix = _condition_on(limits, matrix, pin)
    return density * float(mvn_cdf_batch(new_limits[None, :], new_matrix, acc)[0])


def mvn_cdf_partial(
    limits, corr: CorrelationSpec, index: int, acc: MvnAccuracy | None = None
) -> float:
    """Partial CDF kernel for the sqrt-time correlation structure."""
    limits = np.asarray(limits, dtype=float)
    if limits.ndim != 1 or limits.size != corr.dims:
        raise ValueError("limits must be a vector of length corr.dims")
    return mvn_cdf_partial_matrix(limits, corr.matrix(), index, acc)
