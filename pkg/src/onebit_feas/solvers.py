"""Kaczmarz-family solvers for overdetermined systems of linear inequalities.

Everything here works on the convention  B x <= b.  The one-bit polyhedron
P vec(X) >= rhs is adapted by negation (B = -P, b = -rhs), which
``LiftedSystem`` performs internally.

Four iterations are provided:

* ``rka_step``    -- randomized Kaczmarz: one row, sampled with probability
                     proportional to its squared norm, projected with
                     relaxation lam.
* ``skm_step``    -- sampling Kaczmarz-Motzkin: gamma rows sampled uniformly,
                     the worst violator is projected.
* ``block_skm_step`` -- a block is sampled with Frobenius-weighted
                     probability, the k' rows with largest residual are kept
                     and the iterate is projected through the block
                     pseudoinverse applied to the clamped residual.
* ``gaussian_sketch_step`` -- same machinery on a Gaussian-sketched
                     contiguous row window (the variant with a convergence
                     certificate; see ``block_rate_bound``).

Steps are pure: they return a fresh iterate (or the same array when no
constraint in view is violated) and never mutate their input.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import qcs
from .linalg import SingularGram, gram_pseudoinverse_apply
from .onebit import _entropy

__all__ = [
    "RKA",
    "SKM",
    "BLOCK_SKM",
    "GAUSSIAN_SKETCH",
    "ALGORITHMS",
    "NonFinite",
    "InvalidRate",
    "SolverConfig",
    "SolverTrace",
    "DenseSystem",
    "LiftedSystem",
    "projection_coefficient",
    "rka_step",
    "skm_step",
    "block_skm_step",
    "gaussian_sketch_step",
    "solve",
    "skm_bound",
    "block_rate_bound",
]

RKA = "rka"
SKM = "skm"
BLOCK_SKM = "block_skm"
GAUSSIAN_SKETCH = "gaussian_sketch_block_skm"
ALGORITHMS = (RKA, SKM, BLOCK_SKM, GAUSSIAN_SKETCH)


class NonFinite(Exception):
    """Iterate left the finite-float domain (symptom of a bad relaxation)."""


class InvalidRate(Exception):
    """Predicted contraction factor outside [0, 1]."""


@dataclass(frozen=True)
class SolverConfig:
    """Algorithm selection and run parameters.

    ``k_prime`` of None resolves at solve time to min(unknowns // 8, 128);
    ``tol_margin`` / ``tol_nmse`` of None disable the corresponding stopping
    rule (the run then uses its full iteration budget).  Stopping rules and
    trace rows are evaluated every ``log_stride`` iterations.
    """

    algorithm: str = BLOCK_SKM
    lam: float = 1.0
    gamma: int = 50
    k_prime: int | None = None
    max_iters: int = 1000
    tol_margin: float | None = None
    tol_nmse: float | None = None
    seed: int | tuple[int, ...] = 0
    log_stride: int = 1

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if not 0.0 < self.lam < 2.0:
            raise ValueError(f"relaxation lam must lie in (0, 2), got {self.lam}")
        if self.gamma < 1:
            raise ValueError("gamma must be >= 1")
        if self.k_prime is not None and self.k_prime < 1:
            raise ValueError("k_prime must be >= 1")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.log_stride < 1:
            raise ValueError("log_stride must be >= 1")
        for name in ("tol_margin", "tol_nmse"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ValueError(f"{name} must be nonnegative")


@dataclass
class SolverTrace:
    """Per-iteration history logged at the configured stride."""

    iterations: list = field(default_factory=list)
    err_sq: list = field(default_factory=list)
    max_pos_residual: list = field(default_factory=list)
    selected: list = field(default_factory=list)
    wall_ns: list = field(default_factory=list)
    total_wall_ns: int = 0
    terminated: str = ""

    def record(self, iteration, err, residual, sel, wall):
        self.iterations.append(int(iteration))
        self.err_sq.append(float(err))
        self.max_pos_residual.append(float(residual))
        self.selected.append(int(sel))
        self.wall_ns.append(int(wall))

    def to_csv(self, path: str) -> None:
        with open(path, "w", newline="\n") as fh:
            fh.write("iter,err_sq,max_pos_residual,selected_block,wall_ns\n")
            for i in range(len(self.iterations)):
                fh.write(
                    f"{self.iterations[i]},{self.err_sq[i]:.17g},"
                    f"{self.max_pos_residual[i]:.17g},{self.selected[i]},"
                    f"{self.wall_ns[i]}\n"
                )


class DenseSystem:
    """B x <= b with B held densely, split into equal contiguous row blocks."""

    def __init__(self, B: np.ndarray, b: np.ndarray, n_blocks: int = 1):
        B = np.asarray(B, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64)
        if B.ndim != 2 or b.shape != (B.shape[0],):
            raise ValueError("B must be 2-D with b one rhs entry per row")
        if n_blocks < 1 or B.shape[0] % n_blocks != 0:
            raise ValueError("row count must split into n_blocks equal blocks")
        norms = np.sum(B * B, axis=1)
        if np.any(norms == 0.0):
            raise ValueError("zero rows are not allowed in an inequality system")
        self.B = B
        self.b = b
        self.n_rows, self.n_unknowns = B.shape
        self.n_blocks = n_blocks
        self.rows_per_block = self.n_rows // n_blocks
        self.row_norms_sq = norms
        self.block_frob_sq = norms.reshape(n_blocks, self.rows_per_block).sum(axis=1)
        self._row_probs = norms / norms.sum()
        self._block_probs = self.block_frob_sq / self.block_frob_sq.sum()

    def sample_row(self, rng: np.random.Generator) -> int:
        return int(rng.choice(self.n_rows, p=self._row_probs))

    def sample_block(self, rng: np.random.Generator) -> int:
        return int(rng.choice(self.n_blocks, p=self._block_probs))

    def gather_rows(self, idx):
        idx = np.asarray(idx, dtype=np.int64)
        return self.B[idx], self.b[idx], self.row_norms_sq[idx]

    def block_residual(self, ell: int, x: np.ndarray) -> np.ndarray:
        lo = ell * self.rows_per_block
        hi = lo + self.rows_per_block
        return self.B[lo:hi] @ x - self.b[lo:hi]

    def block_rows(self, ell: int, local_idx):
        gidx = ell * self.rows_per_block + np.asarray(local_idx, dtype=np.int64)
        return self.B[gidx], self.b[gidx]

    def max_pos_residual(self, x: np.ndarray) -> float:
        return max(float(np.max(self.B @ x - self.b)), 0.0)


class LiftedSystem:
    """Inequality-system view of a one-bit polyhedron (B = -P, b = -rhs).

    Blocks coincide with threshold sequences; rows of one block are never
    materialized together, only the k' rows a step actually touches.
    """

    def __init__(self, poly: qcs.Polyhedron):
        self.poly = poly
        self.n_rows = poly.n_rows
        self.n_unknowns = poly.n_unknowns
        self.n_blocks = poly.m1
        self.rows_per_block = poly.m
        base = poly.ensemble.row_norms_sq()
        if np.any(base == 0.0):
            raise ValueError("ensemble contains a zero sensing matrix")
        self._base_norms = base
        # sign diagonals preserve norms: every block has the same Frobenius mass
        self.block_frob_sq = np.full(poly.m1, float(base.sum()))
        self._measure_probs = base / base.sum()
        self._block_probs = np.full(poly.m1, 1.0 / poly.m1)

    def row_norms_sq_at(self, idx):
        return self._base_norms[np.asarray(idx, dtype=np.int64) % self.rows_per_block]

    def sample_row(self, rng: np.random.Generator) -> int:
        # norm of row (l, j) does not depend on l, so the categorical over all
        # m1*m rows factorizes into (j ~ norms, l ~ uniform)
        j = int(rng.choice(self.rows_per_block, p=self._measure_probs))
        ell = int(rng.integers(self.n_blocks))
        return ell * self.rows_per_block + j

    def sample_block(self, rng: np.random.Generator) -> int:
        return int(rng.choice(self.n_blocks, p=self._block_probs))

    def gather_rows(self, idx):
        idx = np.asarray(idx, dtype=np.int64)
        ell = idx // self.rows_per_block
        j = idx % self.rows_per_block
        signs = self.poly.record.signs[j, ell]
        rows = -signs[:, None] * qcs.lifted_rows(self.poly.ensemble, j)
        rhs = -signs * self.poly.record.thresholds.gamma[j, ell]
        return rows, rhs, self._base_norms[j]

    def block_residual(self, ell: int, x: np.ndarray) -> np.ndarray:
        vx = qcs.lifted_apply(self.poly.ensemble, x)
        rec = self.poly.record
        return rec.signs[:, ell] * (rec.thresholds.gamma[:, ell] - vx)

    def block_rows(self, ell: int, local_idx):
        j = np.asarray(local_idx, dtype=np.int64)
        rec = self.poly.record
        signs = rec.signs[j, ell]
        rows = -signs[:, None] * qcs.lifted_rows(self.poly.ensemble, j)
        rhs = -signs * rec.thresholds.gamma[j, ell]
        return rows, rhs

    def max_pos_residual(self, x: np.ndarray) -> float:
        vx = qcs.lifted_apply(self.poly.ensemble, x)
        rec = self.poly.record
        res = rec.signs * (rec.thresholds.gamma - vx[:, None])
        return max(float(res.max()), 0.0)


def projection_coefficient(row: np.ndarray, rhs: float, x: np.ndarray,
                           equality: bool = False) -> float:
    """Residual of a single constraint at x: clamped at zero for inequality
    rows, signed for equality rows."""
    r = float(row @ x) - rhs
    return r if equality else max(r, 0.0)


def _project_row(x, row, rhs, norm_sq, lam):
    beta = max(float(row @ x) - rhs, 0.0)
    if beta == 0.0 or norm_sq == 0.0:
        return x
    return x - (lam * beta / norm_sq) * row


def rka_step(system, x, lam, rng, row_index=None):
    """One randomized-Kaczmarz update; returns (new iterate, row index)."""
    i = system.sample_row(rng) if row_index is None else int(row_index)
    rows, rhs, norms = system.gather_rows(np.array([i]))
    return _project_row(x, rows[0], float(rhs[0]), float(norms[0]), lam), i


def skm_step(system, x, gamma, lam, rng, sample=None):
    """One sampling Kaczmarz-Motzkin update; returns (new iterate, row index).

    gamma rows are sampled uniformly without replacement and the one with the
    largest positive residual is projected.  Residual ties break toward the
    lowest row index.  With gamma equal to the total row count the selection
    is the deterministic Motzkin rule.
    """
    if sample is None:
        if not 1 <= gamma <= system.n_rows:
            raise ValueError("gamma must lie in [1, total rows]")
        idx = rng.choice(system.n_rows, size=gamma, replace=False)
    else:
        idx = np.asarray(sample, dtype=np.int64)
    idx = np.sort(idx)
    rows, rhs, norms = system.gather_rows(idx)
    residuals = rows @ x - rhs
    j = int(np.argmax(residuals))
    if residuals[j] <= 0.0:
        return x, int(idx[j])
    return _project_row(x, rows[j], float(rhs[j]), float(norms[j]), lam), int(idx[j])


def block_skm_step(system, x, k_prime, lam, rng, block_index=None):
    """One block sampling Kaczmarz-Motzkin update; returns (iterate, block).

    A block is sampled with probability proportional to its squared Frobenius
    norm, the k' rows with largest residual (descending, ties toward lower
    index) form the subproblem, and the iterate moves by
    lam * pinv(B') applied to the clamped residual.  With k' = 1 this is
    exactly a Motzkin projection inside the block.

    A SingularGram from a degenerate row selection is retried once with a
    fresh block sample, then surfaced.
    """
    attempts = 2 if block_index is None else 1
    for attempt in range(attempts):
        ell = system.sample_block(rng) if block_index is None else int(block_index)
        e = system.block_residual(ell, x)
        top = min(k_prime, e.shape[0])
        if top == 1:
            j = int(np.argmax(e))
            if e[j] <= 0.0:
                return x, ell
            rows, rhs = system.block_rows(ell, np.array([j]))
            row = rows[0]
            return _project_row(x, row, float(rhs[0]), float(row @ row), lam), ell
        cand = np.argpartition(-e, top - 1)[:top]
        order = np.lexsort((cand, -e[cand]))
        sel = cand[order]
        rows, rhs = system.block_rows(ell, sel)
        clamped = np.maximum(rows @ x - rhs, 0.0)
        if not np.any(clamped > 0.0):
            return x, ell
        try:
            return x - lam * gram_pseudoinverse_apply(rows, clamped), ell
        except SingularGram:
            if attempt + 1 == attempts:
                raise
    raise AssertionError("unreachable")


def gaussian_sketch_step(system, x, k_prime, lam, rng, alpha=None, g=None):
    """One Gaussian-sketched block update; returns (iterate, window index).

    A contiguous window of k' rows starting at offset k' * (alpha mod W),
    W = floor(rows / k'), is mixed by a k' x k' iid N(0,1) matrix; the mixed
    rows then go through the same sorted, clamped pseudoinverse projection as
    ``block_skm_step``.  ``alpha`` and ``g`` are injectable for tests (g set
    to the identity reproduces the plain block update on that window).
    """
    n_windows = system.n_rows // k_prime
    if n_windows < 1:
        raise ValueError("k_prime exceeds the number of rows")
    attempts = 2 if (alpha is None and g is None) else 1
    for attempt in range(attempts):
        a = int(rng.integers(1, n_windows + 1)) if alpha is None else int(alpha)
        w = a % n_windows
        idx = np.arange(k_prime * w, k_prime * w + k_prime)
        rows, rhs, _ = system.gather_rows(idx)
        gm = rng.standard_normal((k_prime, k_prime)) if g is None else np.asarray(g, dtype=np.float64)
        srows = gm @ rows
        srhs = gm @ rhs
        e = srows @ x - srhs
        if k_prime == 1:
            if e[0] <= 0.0:
                return x, w
            row = srows[0]
            return _project_row(x, row, float(srhs[0]), float(row @ row), lam), w
        order = np.lexsort((np.arange(k_prime), -e))
        srows, srhs, e = srows[order], srhs[order], e[order]
        clamped = np.maximum(e, 0.0)
        if not np.any(clamped > 0.0):
            return x, w
        try:
            return x - lam * gram_pseudoinverse_apply(srows, clamped), w
        except SingularGram:
            if attempt + 1 == attempts:
                raise
    raise AssertionError("unreachable")


def _resolve_k_prime(cfg: SolverConfig, n_unknowns: int) -> int:
    # default keeps the O(k'^3) Gram solve cheap relative to the unknown count
    kp = cfg.k_prime if cfg.k_prime is not None else min(max(n_unknowns // 8, 1), 128)
    if not 1 <= kp < n_unknowns:
        raise ValueError(f"k_prime must lie in [1, unknowns), got {kp} for {n_unknowns}")
    return kp


def solve(system, cfg: SolverConfig, ground_truth=None, stop_callback=None,
          x0=None):
    """Iterate the configured step; returns (final iterate, SolverTrace).

    Stopping rules (any combination): the iteration budget, max positive
    residual <= tol_margin, squared error <= tol_nmse * ||ground_truth||^2,
    or a custom ``stop_callback(x, iteration) -> bool``.  Rules are evaluated
    at every logged iteration; when at least one rule is active the start
    point is checked too, so a feasible start terminates at iteration 0.
    Wall time covers the iteration loop only.
    """
    rng = np.random.default_rng(_entropy(cfg.seed))
    x = np.zeros(system.n_unknowns) if x0 is None else np.array(x0, dtype=np.float64)
    gt = None if ground_truth is None else np.asarray(ground_truth, dtype=np.float64)
    gt_norm_sq = None if gt is None else float(gt @ gt)
    if cfg.tol_nmse is not None and gt is not None and gt_norm_sq == 0.0:
        raise ValueError("tol_nmse stopping needs a nonzero ground truth")

    if cfg.algorithm in (BLOCK_SKM, GAUSSIAN_SKETCH):
        k_prime = _resolve_k_prime(cfg, system.n_unknowns)
    if cfg.algorithm == SKM and not 1 <= cfg.gamma <= system.n_rows:
        raise ValueError("gamma must lie in [1, total rows]")

    def step(xc):
        if cfg.algorithm == RKA:
            return rka_step(system, xc, cfg.lam, rng)
        if cfg.algorithm == SKM:
            return skm_step(system, xc, cfg.gamma, cfg.lam, rng)
        if cfg.algorithm == BLOCK_SKM:
            return block_skm_step(system, xc, k_prime, cfg.lam, rng)
        return gaussian_sketch_step(system, xc, k_prime, cfg.lam, rng)

    def err_of(xc):
        return float("nan") if gt is None else float(np.sum((xc - gt) ** 2))

    def stop_reason(xc, err, residual, iteration):
        if cfg.tol_margin is not None and residual <= cfg.tol_margin:
            return "margin"
        if cfg.tol_nmse is not None and gt is not None and err <= cfg.tol_nmse * gt_norm_sq:
            return "nmse"
        if stop_callback is not None and stop_callback(xc, iteration):
            return "callback"
        return ""

    check_active = (
        cfg.tol_margin is not None
        or (cfg.tol_nmse is not None and gt is not None)
        or stop_callback is not None
    )

    trace = SolverTrace()
    start = time.perf_counter_ns()
    if check_active:
        err = err_of(x)
        residual = system.max_pos_residual(x)
        reason = stop_reason(x, err, residual, 0)
        if reason:
            trace.record(0, err, residual, -1, time.perf_counter_ns() - start)
            trace.total_wall_ns = time.perf_counter_ns() - start
            trace.terminated = reason
            return x, trace

    reason = ""
    for it in range(1, cfg.max_iters + 1):
        x, sel = step(x)
        if not np.all(np.isfinite(x)):
            raise NonFinite(f"iterate became non-finite at iteration {it}")
        if it % cfg.log_stride == 0 or it == cfg.max_iters:
            err = err_of(x)
            residual = system.max_pos_residual(x)
            trace.record(it, err, residual, sel, time.perf_counter_ns() - start)
            reason = stop_reason(x, err, residual, it)
            if reason:
                break
    trace.total_wall_ns = time.perf_counter_ns() - start
    trace.terminated = reason or "max_iters"
    return x, trace


def skm_bound(kappa: float, lam: float, iters: int, initial_err_sq: float) -> float:
    """Expected-error envelope (1 - (2*lam - lam^2)/kappa^2)^iters * err0."""
    if not 0.0 < lam < 2.0:
        raise ValueError("lam must lie in (0, 2)")
    if kappa < 1.0:
        raise ValueError("scaled condition number is always >= 1")
    rate = 1.0 - (2.0 * lam - lam * lam) / (kappa * kappa)
    return (rate ** iters) * initial_err_sq


def block_rate_bound(sigma_min_sq: float, frob_sq: float, k_prime: int,
                     c: float, iters: int, initial_err_sq: float) -> float:
    """Sketched-block envelope (1 - c sigma_min^2 log k' / frob^2)^iters * err0.

    Diagnostic only: the absolute constant c is not pinned by theory, so the
    caller supplies it and is responsible for a factor in [0, 1].  The
    degenerate sigma_min = 0 gives factor 1 (a constant, no-progress bound)
    and is allowed.
    """
    if k_prime < 2:
        raise ValueError("k_prime must be >= 2 for the log k' factor")
    if frob_sq <= 0.0:
        raise ValueError("frob_sq must be positive")
    factor = 1.0 - c * sigma_min_sq * math.log(k_prime) / frob_sq
    if not 0.0 <= factor <= 1.0:
        raise InvalidRate(f"contraction factor {factor:.6g} outside [0, 1]")
    return (factor ** iters) * initial_err_sq
