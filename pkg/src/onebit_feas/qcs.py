"""Quadratic compressed sensing instances and the one-bit inequality polyhedron.

A sparse signal x in R^n is observed through quadratic forms y_j = xᵀ A_j x.
Lifting X = x xᵀ turns each measurement into a linear functional of vec(X):
the row vec(A_jᵀ)ᵀ of the operator V, so that y = V vec(X).  One-bit
quantization of y against m1 threshold sequences then yields the polyhedron

    sign r_j^(l) * (V vec(X))_j >= r_j^(l) * tau_j^(l)   for all j, l,

kept here in implicit block form: V (or the rank-one vectors generating it),
the sign/threshold record, and the stacked right-hand side.  The full
(m1*m) x n^2 matrix is never materialized.

Vectorization is column-major everywhere.  Note vec(A_jᵀ) in column-major
order equals the row-major flattening of A_j, which is what the code uses.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from . import onebit
from .onebit import OneBitRecord, generate_thresholds, quantize, stacked_rhs

__all__ = [
    "RANK_ONE",
    "FULL_RANK",
    "InvalidSparsity",
    "IndexOutOfRange",
    "SensingEnsemble",
    "ProblemInstance",
    "Polyhedron",
    "generate_ensemble",
    "generate_instance",
    "build_instance",
    "lifted_row",
    "lifted_apply",
    "apply_operator",
    "build_polyhedron",
    "feasibility_margin",
    "dump_instance",
]

RANK_ONE = "rank_one"
FULL_RANK = "full_rank"
KINDS = (RANK_ONE, FULL_RANK)


class InvalidSparsity(Exception):
    """Sparsity level outside 1 <= k <= n."""


class IndexOutOfRange(Exception):
    """Measurement or block index outside the ensemble."""


@dataclass(frozen=True)
class SensingEnsemble:
    """Collection of m sensing matrices acting on R^n.

    rank_one ensembles keep only the generating vectors a_j (A_j = a_j a_jᵀ)
    and synthesize lifted rows on demand; full_rank ensembles store the
    matrices themselves, whose row-major flattening is the lifted operator V.
    """

    n: int
    m: int
    kind: str
    vectors: np.ndarray | None = None   # (m, n) for rank_one
    matrices: np.ndarray | None = None  # (m, n, n) for full_rank
    seed: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.n < 1 or self.m < 1:
            raise ValueError("need n >= 1 and m >= 1")
        if self.kind == RANK_ONE:
            a = np.asarray(self.vectors, dtype=np.float64)
            if a.shape != (self.m, self.n):
                raise ValueError(f"vectors must have shape {(self.m, self.n)}")
            object.__setattr__(self, "vectors", a)
        else:
            mats = np.asarray(self.matrices, dtype=np.float64)
            if mats.shape != (self.m, self.n, self.n):
                raise ValueError(f"matrices must have shape {(self.m, self.n, self.n)}")
            object.__setattr__(self, "matrices", mats)

    def matrix(self, j: int) -> np.ndarray:
        """Materialize the n x n sensing matrix A_j."""
        self._check_index(j)
        if self.kind == RANK_ONE:
            a = self.vectors[j]
            return np.outer(a, a)
        return self.matrices[j]

    def row_norms_sq(self) -> np.ndarray:
        """||vec(A_j)||^2 for every j (norms of the lifted operator rows)."""
        if self.kind == RANK_ONE:
            sq = np.sum(self.vectors * self.vectors, axis=1)
            return sq * sq
        return np.sum(self.matrices * self.matrices, axis=(1, 2))

    def _check_index(self, j: int) -> None:
        if not 0 <= j < self.m:
            raise IndexOutOfRange(f"measurement index {j} outside [0, {self.m})")


@dataclass(frozen=True)
class ProblemInstance:
    """Ground truth signal, sensing ensemble and noiseless measurements."""

    x_true: np.ndarray
    sparsity: int
    ensemble: SensingEnsemble
    y: np.ndarray
    seed: tuple[int, ...] | None = None

    def lifted_truth(self) -> np.ndarray:
        """The rank-1 lifted matrix X = x xᵀ (materialized on request only)."""
        return np.outer(self.x_true, self.x_true)

    def lifted_truth_vec(self) -> np.ndarray:
        return self.lifted_truth().flatten(order="F")


@dataclass(frozen=True)
class Polyhedron:
    """Implicit block form of the one-bit feasibility system.

    Block l of the stacked operator is diag(R[:, l]) @ V with right-hand side
    R[:, l] * Gamma[:, l]; ``rhs`` holds the column-major stack of all blocks.
    """

    ensemble: SensingEnsemble
    record: OneBitRecord
    rhs: np.ndarray

    @property
    def m(self) -> int:
        return self.ensemble.m

    @property
    def m1(self) -> int:
        return self.record.m1

    @property
    def n_unknowns(self) -> int:
        return self.ensemble.n ** 2

    @property
    def n_rows(self) -> int:
        return self.m * self.m1


def generate_ensemble(n: int, m: int, kind: str, seed) -> SensingEnsemble:
    """Draw a sensing ensemble with iid standard normal entries / vectors."""
    entropy = onebit._entropy(seed)
    rng = np.random.default_rng(entropy)
    if kind == RANK_ONE:
        return SensingEnsemble(
            n=n, m=m, kind=kind, vectors=rng.standard_normal((m, n)), seed=entropy
        )
    if kind == FULL_RANK:
        return SensingEnsemble(
            n=n, m=m, kind=kind, matrices=rng.standard_normal((m, n, n)), seed=entropy
        )
    raise ValueError(f"kind must be one of {KINDS}, got {kind!r}")


def measure(ensemble: SensingEnsemble, x: np.ndarray) -> np.ndarray:
    """Noiseless quadratic measurements y_j = xᵀ A_j x."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (ensemble.n,):
        raise ValueError(f"signal must have shape ({ensemble.n},)")
    if ensemble.kind == RANK_ONE:
        proj = ensemble.vectors @ x
        return proj * proj
    return np.einsum("i,mij,j->m", x, ensemble.matrices, x)


def build_instance(x_true: np.ndarray, ensemble: SensingEnsemble,
                   seed=None) -> ProblemInstance:
    """Assemble an instance from explicit parts (test hook / replay path)."""
    x = np.asarray(x_true, dtype=np.float64)
    k = int(np.count_nonzero(x))
    return ProblemInstance(
        x_true=x,
        sparsity=k,
        ensemble=ensemble,
        y=measure(ensemble, x),
        seed=None if seed is None else onebit._entropy(seed),
    )


def generate_instance(n: int, k: int, m: int, kind: str, seed) -> ProblemInstance:
    """Random k-sparse instance: uniform support, standard normal amplitudes.

    The support is drawn without replacement; nonzero amplitudes are resampled
    until none is exactly zero so that ||x||_0 == k holds exactly.
    """
    if not 1 <= k <= n:
        raise InvalidSparsity(f"need 1 <= k <= n, got k={k}, n={n}")
    if m < 1:
        raise ValueError("need m >= 1")
    entropy = onebit._entropy(seed)
    rng = np.random.default_rng(entropy)
    support = rng.choice(n, size=k, replace=False)
    amplitudes = rng.standard_normal(k)
    while np.any(amplitudes == 0.0):  # probability zero, but the invariant is exact
        amplitudes = rng.standard_normal(k)
    x = np.zeros(n)
    x[support] = amplitudes
    ensemble = generate_ensemble(n, m, kind, entropy + (1,))
    inst = build_instance(x, ensemble)
    return ProblemInstance(
        x_true=inst.x_true, sparsity=k, ensemble=ensemble, y=inst.y, seed=entropy
    )


def lifted_row(ensemble: SensingEnsemble, j: int) -> np.ndarray:
    """Row j of the lifted operator V, i.e. vec(A_jᵀ) in column-major order.

    For rank-one ensembles this is the Kronecker form a_j ⊗ a_j and A_j is
    never materialized.
    """
    ensemble._check_index(j)
    if ensemble.kind == RANK_ONE:
        a = ensemble.vectors[j]
        return np.kron(a, a)
    return ensemble.matrices[j].reshape(-1)


def lifted_rows(ensemble: SensingEnsemble, idx: np.ndarray) -> np.ndarray:
    """Materialize the lifted rows for a batch of measurement indices."""
    idx = np.asarray(idx, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= ensemble.m):
        raise IndexOutOfRange("measurement index outside ensemble")
    n = ensemble.n
    if ensemble.kind == RANK_ONE:
        a = ensemble.vectors[idx]
        return np.einsum("ki,kj->kij", a, a).reshape(len(idx), n * n)
    return ensemble.matrices[idx].reshape(len(idx), n * n)


def lifted_apply(ensemble: SensingEnsemble, xvec: np.ndarray) -> np.ndarray:
    """V @ xvec for the whole ensemble, without materializing V when rank-one."""
    xvec = np.asarray(xvec, dtype=np.float64)
    n = ensemble.n
    if xvec.shape != (n * n,):
        raise ValueError(f"xvec must have length {n * n}")
    if ensemble.kind == RANK_ONE:
        xmat = xvec.reshape(n, n, order="F")
        ax = ensemble.vectors @ xmat
        return np.sum(ax * ensemble.vectors, axis=1)
    return ensemble.matrices.reshape(ensemble.m, n * n) @ xvec


def apply_operator(poly: Polyhedron, xvec: np.ndarray, block: int) -> np.ndarray:
    """Block ``block`` of the stacked operator applied to xvec.

    Entry j is r_j^(block) * (V xvec)_j; the stacked matrix itself is never
    formed.
    """
    if not 0 <= block < poly.m1:
        raise IndexOutOfRange(f"block index {block} outside [0, {poly.m1})")
    return poly.record.signs[:, block] * lifted_apply(poly.ensemble, xvec)


def build_polyhedron(
    inst: ProblemInstance,
    m1: int,
    dynamic_range: float | None = None,
    seed=0,
) -> Polyhedron:
    """Quantize the instance against m1 fresh threshold sequences.

    The threshold scale defaults to the measurement dynamic range ||y||_inf
    (oracle knowledge of the noiseless y); pass ``dynamic_range`` to model a
    deployment where only an estimate is available.
    """
    if m1 < 1:
        raise onebit.InvalidDims(f"need m1 >= 1, got {m1}")
    beta = float(np.max(np.abs(inst.y))) if dynamic_range is None else float(dynamic_range)
    if not beta > 0:
        raise ValueError("dynamic range must be positive (all-zero measurements?)")
    thresholds = generate_thresholds(inst.ensemble.m, m1, beta, seed)
    record = quantize(inst.y, thresholds)
    return Polyhedron(ensemble=inst.ensemble, record=record, rhs=stacked_rhs(record))


def feasibility_margin(poly: Polyhedron, xvec: np.ndarray) -> tuple[float, int]:
    """Min row margin of the polyhedron at xvec and the count of violated rows.

    Margin of a row is (operator row . xvec) - rhs; nonnegative margins mean
    the point satisfies every inequality.
    """
    vx = lifted_apply(poly.ensemble, xvec)
    margins = poly.record.signs * (vx[:, None] - poly.record.thresholds.gamma)
    return float(margins.min()), int(np.count_nonzero(margins < 0))


def dump_instance(inst: ProblemInstance, out_dir: str,
                  poly: Polyhedron | None = None) -> None:
    """Write instance.json plus y.csv (and R.csv/Gamma.csv when poly is given)."""
    os.makedirs(out_dir, exist_ok=True)
    support = np.flatnonzero(inst.x_true)
    meta = {
        "n": inst.ensemble.n,
        "k": inst.sparsity,
        "m": inst.ensemble.m,
        "m1": None if poly is None else poly.m1,
        "kind": inst.ensemble.kind,
        "seed": None if inst.seed is None else list(inst.seed),
        "x_true_support": [int(i) for i in support],
        "x_true_values": [float(v) for v in inst.x_true[support]],
    }
    with open(os.path.join(out_dir, "instance.json"), "w", newline="\n") as fh:
        json.dump(meta, fh, indent=2)
        fh.write("\n")
    np.savetxt(
        os.path.join(out_dir, "y.csv"),
        inst.y,
        fmt=onebit.FLOAT_FMT,
        delimiter=",",
        newline="\n",
    )
    if poly is not None:
        onebit.save_record(poly.record, out_dir)
