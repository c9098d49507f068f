"""Dense linear-algebra kernels shared by the solver stack.

All routines operate on plain float64 numpy arrays: matrices are 2-D
(C-contiguous, row-major), vectors are 1-D.  Inputs are never mutated and
every function is a pure mapping of its arguments, so values can be shared
freely across threads or worker processes.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import cho_solve

__all__ = [
    "SingularGram",
    "NoConvergence",
    "RankDeficient",
    "frobenius_norm_sq",
    "gram_pseudoinverse_apply",
    "dominant_eigenpair",
    "scaled_condition_number",
]


class SingularGram(Exception):
    """Gram matrix of a row block stayed singular through the ridge ladder."""


class NoConvergence(Exception):
    """Power iteration failed to reach its residual tolerance."""


class RankDeficient(Exception):
    """Smallest singular value fell below the absolute floor."""


# Ridge levels for Gram solves, applied as eps * trace(G)/k on the diagonal.
# Greedy residual selection can pick near-parallel rows, so the first level is
# always on; the second is a one-shot rescue before giving up.
_GRAM_RIDGE = (1e-12, 1e-8)

# Absolute floor under which a singular value counts as numerically zero.
_SIGMA_FLOOR = 1e-12


def frobenius_norm_sq(mat: np.ndarray) -> float:
    """Sum of squared entries (squared Frobenius norm).

    Summation runs in column-major order so the value is bit-identical to the
    squared Euclidean norm of the column-major vectorization.
    """
    m = np.asarray(mat, dtype=np.float64).flatten(order="F")
    return float(np.sum(m * m))


def gram_pseudoinverse_apply(block: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Apply the wide-matrix pseudoinverse Bᵀ(BBᵀ)⁻¹ of ``block`` to ``v``.

    ``block`` is k x n with k < n.  The k x k Gram matrix is factored by
    Cholesky with a tiny additive ridge (see ``_GRAM_RIDGE``); if both ridge
    levels fail the row selection was degenerate and SingularGram is raised.
    For a full-row-rank block the result w satisfies block @ w == v up to
    solver tolerance.
    """
    b = np.asarray(block, dtype=np.float64)
    rhs = np.asarray(v, dtype=np.float64)
    if b.ndim != 2 or rhs.ndim != 1 or b.shape[0] != rhs.shape[0]:
        raise ValueError("block must be k x n and v length k")
    k = b.shape[0]
    gram = b @ b.T
    scale = float(np.trace(gram)) / k
    for eps in _GRAM_RIDGE:
        try:
            chol = np.linalg.cholesky(gram + (eps * scale) * np.eye(k))
        except np.linalg.LinAlgError:
            continue
        return b.T @ cho_solve((chol, True), rhs, check_finite=False)
    raise SingularGram(
        f"Gram matrix of a {k}x{b.shape[1]} row block is singular even after "
        f"ridge {_GRAM_RIDGE[-1]:g}; degenerate row selection"
    )


def dominant_eigenpair(
    mat: np.ndarray,
    tol: float = 1e-10,
    max_iter: int = 10_000,
    allow_negative: bool = False,
) -> tuple[float, np.ndarray]:
    """Dominant eigenpair of a symmetric matrix by power iteration.

    The input is symmetrized as (M + Mᵀ)/2 first.  Iteration starts from the
    normalized all-ones vector and, if the Rayleigh quotient stagnates without
    meeting the residual test, restarts with a seeded perturbation so results
    stay reproducible.  Convergence means ||M v - lam v|| <= tol * ||M||_F.

    By default the routine is meant for (numerically) PSD matrices and raises
    NoConvergence when the dominant direction has negative curvature; callers
    that want to observe the negative value pass ``allow_negative=True``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    a = np.asarray(mat, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    a = 0.5 * (a + a.T)
    n = a.shape[0]
    scale = np.sqrt(frobenius_norm_sq(a))
    if scale == 0.0:
        v = np.zeros(n)
        v[0] = 1.0
        return 0.0, v

    v = np.full(n, 1.0 / np.sqrt(n))
    lam = float(v @ (a @ v))
    rng = np.random.default_rng(0)
    stall = 0
    for _ in range(max_iter):
        w = a @ v
        norm_w = float(np.linalg.norm(w))
        if norm_w == 0.0:
            # started inside the null space; kick out of it
            v = _perturb(v, rng)
            continue
        v_next = w / norm_w
        if float(v_next @ v) < 0.0:
            v_next = -v_next
        lam_next = float(v_next @ (a @ v_next))
        residual = float(np.linalg.norm(a @ v_next - lam_next * v_next))
        if residual <= tol * scale:
            if lam_next < 0.0 and not allow_negative:
                raise NoConvergence(
                    "power iteration converged to a negative-curvature "
                    f"direction (lambda={lam_next:.3e})"
                )
            return lam_next, v_next
        if abs(lam_next - lam) <= 1e-14 * scale:
            stall += 1
            if stall >= 20:
                v_next = _perturb(v_next, rng)
                stall = 0
        else:
            stall = 0
        v, lam = v_next, lam_next
    raise NoConvergence(
        f"power iteration residual above {tol:g}*||M||_F after {max_iter} "
        "iterations; spectrum is likely near-degenerate"
    )


def _perturb(v: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    w = v + 1e-6 * rng.standard_normal(v.shape[0])
    return w / np.linalg.norm(w)


def scaled_condition_number(mat: np.ndarray) -> float:
    """||M||_F / sigma_min(M), the scaled condition number.

    Intended for small diagnostic matrices only (sigma_min comes from a full
    SVD).  For any full-column-rank M the value is at least sqrt(cols).
    """
    a = np.asarray(mat, dtype=np.float64)
    sigma = np.linalg.svd(a, compute_uv=False)
    sigma_min = float(sigma[-1])
    if sigma_min <= _SIGMA_FLOOR:
        raise RankDeficient(
            f"sigma_min={sigma_min:.3e} is below the {_SIGMA_FLOOR:g} floor"
        )
    return float(np.sqrt(np.sum(sigma * sigma)) / sigma_min)
