"""Rank-1 signal extraction from a recovered lifted matrix, plus error metrics.

The quadratic measurements determine the signal only up to a global sign, so
the extracted vector is canonicalized (largest-magnitude entry positive) and
the signal metric minimizes over both signs.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .linalg import dominant_eigenpair, frobenius_norm_sq

__all__ = [
    "ZeroReference",
    "LiftedEstimate",
    "extract_signal",
    "nmse_matrix",
    "nmse_signal",
    "evaluate",
]


class ZeroReference(Exception):
    """NMSE is undefined against an all-zero reference."""


@dataclass(frozen=True)
class LiftedEstimate:
    """Recovered matrix, extracted signal and the two error metrics."""

    x_bar_matrix: np.ndarray
    x_bar: np.ndarray
    lambda_max: float
    nmse_matrix: float
    nmse_signal: float


def extract_signal(x_bar_matrix: np.ndarray) -> tuple[np.ndarray, float]:
    """Scale the dominant eigenvector of the (symmetrized) matrix to a signal.

    Returns (x_bar, lambda_max) with x_bar = sqrt(max(lambda_max, 0)) * v.
    Solvers do not enforce positive semidefiniteness, so an unconverged run
    can hand us a matrix whose dominant curvature is negative; that clamps to
    the zero signal with a warning.
    """
    a = np.asarray(x_bar_matrix, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("lifted estimate must be square")
    lam, v = dominant_eigenpair(0.5 * (a + a.T), allow_negative=True)
    if lam < 0.0:
        warnings.warn(
            f"dominant curvature is negative (lambda={lam:.3e}); clamping the "
            "extracted signal to zero",
            RuntimeWarning,
            stacklevel=2,
        )
        return np.zeros(a.shape[0]), 0.0
    x = np.sqrt(lam) * v
    i = int(np.argmax(np.abs(x)))
    if x[i] < 0.0:
        x = -x
    return x, lam


def nmse_matrix(x_star_matrix: np.ndarray, x_bar_matrix: np.ndarray) -> float:
    """||X* - Xbar||_F^2 / ||X*||_F^2."""
    ref = np.asarray(x_star_matrix, dtype=np.float64)
    est = np.asarray(x_bar_matrix, dtype=np.float64)
    if ref.shape != est.shape:
        raise ValueError("matrix shapes must match")
    denom = frobenius_norm_sq(ref)
    if denom == 0.0:
        raise ZeroReference("reference matrix is zero")
    return frobenius_norm_sq(ref - est) / denom


def nmse_signal(x_star: np.ndarray, x_bar: np.ndarray) -> float:
    """min over s in {-1, +1} of ||x* - s*xbar||^2 / ||x*||^2."""
    ref = np.asarray(x_star, dtype=np.float64)
    est = np.asarray(x_bar, dtype=np.float64)
    if ref.shape != est.shape:
        raise ValueError("signal shapes must match")
    denom = float(ref @ ref)
    if denom == 0.0:
        raise ZeroReference("reference signal is zero")
    plus = float(np.sum((ref - est) ** 2))
    minus = float(np.sum((ref + est) ** 2))
    return min(plus, minus) / denom


def evaluate(x_bar_matrix: np.ndarray, x_star: np.ndarray) -> LiftedEstimate:
    """Bundle extraction and both metrics against the true signal."""
    ref = np.asarray(x_star, dtype=np.float64)
    x_bar, lam = extract_signal(x_bar_matrix)
    return LiftedEstimate(
        x_bar_matrix=np.asarray(x_bar_matrix, dtype=np.float64),
        x_bar=x_bar,
        lambda_max=lam,
        nmse_matrix=nmse_matrix(np.outer(ref, ref), x_bar_matrix),
        nmse_signal=nmse_signal(ref, x_bar),
    )
