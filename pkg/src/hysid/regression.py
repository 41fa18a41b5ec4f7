"""Dense least squares and sequentially thresholded least squares (STLSQ).

STLSQ alternates a least-squares solve with zeroing of small coefficients
until the active set is stable. Each target column gets its own active set.
Thresholding compares effect sizes (coefficient times column rms) so that a
single tuning parameter stays meaningful when the library mixes columns of
very different magnitudes; for data scaled to a common range this coincides
with thresholding raw coefficients.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import AllTermsEliminated, HysidError, RankDeficient

_RANK_RTOL = 1e-10


@dataclass(frozen=True)
class StlsqConfig:
    threshold: float = 0.05
    max_iterations: int = 20
    ridge: float = 0.0
    normalize: bool = True

    def __post_init__(self):
        if self.threshold < 0:
            raise HysidError("threshold must be >= 0")
        if self.max_iterations < 1:
            raise HysidError("max_iterations must be >= 1")
        if self.ridge < 0:
            raise HysidError("ridge must be >= 0")


def least_squares(theta: np.ndarray, target: np.ndarray, ridge: float = 0.0) -> np.ndarray:
    """Minimum-residual solve via orthogonal factorization.

    With ridge == 0 a numerically rank-deficient theta raises RankDeficient
    (singular value below 1e-10 times the largest). ridge > 0 adds Tikhonov
    damping and always succeeds.
    """
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    target = np.asarray(target, dtype=float)
    squeeze = target.ndim == 1
    if squeeze:
        target = target[:, None]
    if theta.shape[0] != target.shape[0]:
        raise HysidError("row counts of theta and target differ")
    if ridge > 0:
        k = theta.shape[1]
        aug_t = np.vstack([theta, np.sqrt(ridge) * np.eye(k)])
        aug_y = np.vstack([target, np.zeros((k, target.shape[1]))])
        coef, *_ = scipy.linalg.lstsq(aug_t, aug_y)
    else:
        coef, _, rank, _ = scipy.linalg.lstsq(theta, target, cond=_RANK_RTOL)
        if rank < theta.shape[1]:
            raise RankDeficient(
                f"theta has numerical rank {rank} < {theta.shape[1]} columns"
            )
    return coef[:, 0] if squeeze else coef


def basic_solution(theta: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Sparse exact-least-squares solution for a rank-deficient theta.

    Column-pivoted QR selects a maximal independent column subset; the
    remaining (linearly dependent) columns get exact zeros. This keeps
    redundant library columns out of the solution instead of smearing
    minimum-norm weight across them.
    """
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    target = np.asarray(target, dtype=float)
    squeeze = target.ndim == 1
    if squeeze:
        target = target[:, None]
    q, r, piv = scipy.linalg.qr(theta, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    rank = int(np.sum(diag > _RANK_RTOL * diag[0])) if diag.size and diag[0] > 0 else 0
    keep = piv[:rank]
    coef = np.zeros((theta.shape[1], target.shape[1]))
    if rank:
        rhs = q.T @ target
        coef[keep] = scipy.linalg.solve_triangular(r[:rank, :rank], rhs[:rank])
    return coef[:, 0] if squeeze else coef


def _solve(theta, target, ridge):
    if ridge > 0:
        return least_squares(theta, target, ridge=ridge)
    try:
        return least_squares(theta, target)
    except RankDeficient:
        # expected whenever the library contains a hysteron pair alongside
        # the constant column (1 = H + H-bar); the basic solution keeps the
        # redundant columns at exact zero
        return basic_solution(theta, target)


def stlsq(
    theta: np.ndarray,
    target: np.ndarray,
    cfg: StlsqConfig,
):
    """Sequentially thresholded least squares.

    Returns (coefficients, active_mask). Inactive coefficients are exact
    zeros. With threshold == 0 the result equals plain least squares.
    """
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    target = np.asarray(target, dtype=float)
    squeeze = target.ndim == 1
    if squeeze:
        target = target[:, None]
    n_cols = theta.shape[1]
    n_targets = target.shape[1]

    scale = np.sqrt(np.mean(theta**2, axis=0)) if cfg.normalize else np.ones(n_cols)

    coefs = np.zeros((n_cols, n_targets))
    masks = np.zeros((n_cols, n_targets), dtype=bool)
    for j in range(n_targets):
        active = np.ones(n_cols, dtype=bool)
        xi = np.zeros(n_cols)
        for _ in range(cfg.max_iterations):
            sub = _solve(theta[:, active], target[:, j], cfg.ridge)
            xi = np.zeros(n_cols)
            xi[active] = sub
            if cfg.threshold == 0:
                break
            keep = np.abs(xi) * scale >= cfg.threshold
            keep &= active
            if not keep.any():
                raise AllTermsEliminated(
                    f"threshold {cfg.threshold} eliminated every term of "
                    f"target column {j}"
                )
            if np.array_equal(keep, active):
                break
            active = keep
            xi[~active] = 0.0
        xi[~active] = 0.0
        coefs[:, j] = xi
        masks[:, j] = active & (xi != 0) if cfg.threshold > 0 else xi != 0

    if squeeze:
        return coefs[:, 0], masks[:, 0]
    return coefs, masks
