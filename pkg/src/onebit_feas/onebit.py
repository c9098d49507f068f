"""One-bit quantization against time-varying Gaussian threshold sequences.

A measurement vector y of length m is compared against m1 independent
threshold sequences.  The result is a sign matrix R (entries +-1) paired with
the threshold matrix Gamma; column l holds sequence l.  Stacking is
column-major throughout so that the rows belonging to sequence l form one
contiguous block of the inequality system.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

__all__ = [
    "InvalidDims",
    "LengthMismatch",
    "ThresholdEnsemble",
    "OneBitRecord",
    "generate_thresholds",
    "quantize",
    "stacked_rhs",
    "save_record",
    "load_record",
]

# CSV float format: 17 significant digits round-trips float64 exactly.
FLOAT_FMT = "%.17g"


class InvalidDims(Exception):
    """Zero or negative sample / sequence counts."""


class LengthMismatch(Exception):
    """Measurement vector does not match the threshold ensemble."""


def _entropy(seed) -> tuple[int, ...]:
    """Normalize a seed (int or sequence of ints) to an entropy tuple."""
    if isinstance(seed, (int, np.integer)):
        return (int(seed),)
    return tuple(int(s) for s in seed)


@dataclass(frozen=True)
class ThresholdEnsemble:
    """m x m1 matrix of thresholds; column l is the l-th sequence.

    ``sigma`` and ``seed`` are generation provenance and are None for
    ensembles reconstructed from CSV dumps.
    """

    m: int
    m1: int
    gamma: np.ndarray
    d: float = 0.0
    sigma: float | None = None
    seed: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.m < 1 or self.m1 < 1:
            raise InvalidDims(f"need m >= 1 and m1 >= 1, got m={self.m}, m1={self.m1}")
        g = np.asarray(self.gamma, dtype=np.float64)
        if g.shape != (self.m, self.m1):
            raise InvalidDims(
                f"threshold matrix has shape {g.shape}, expected {(self.m, self.m1)}"
            )
        if not np.all(np.isfinite(g)):
            raise ValueError("thresholds must be finite")
        object.__setattr__(self, "gamma", g)


@dataclass(frozen=True)
class OneBitRecord:
    """Sign matrix R (+-1 entries) plus the threshold ensemble that produced it."""

    signs: np.ndarray
    thresholds: ThresholdEnsemble

    def __post_init__(self):
        r = np.asarray(self.signs, dtype=np.float64)
        if r.shape != self.thresholds.gamma.shape:
            raise LengthMismatch(
                f"sign matrix shape {r.shape} != threshold shape "
                f"{self.thresholds.gamma.shape}"
            )
        if not np.all(np.abs(r) == 1.0):
            raise ValueError("sign matrix entries must be +-1")
        object.__setattr__(self, "signs", r)

    @property
    def m(self) -> int:
        return self.thresholds.m

    @property
    def m1(self) -> int:
        return self.thresholds.m1


def generate_thresholds(m: int, m1: int, dynamic_range: float, seed) -> ThresholdEnsemble:
    """Draw m1 iid Gaussian threshold sequences of length m.

    Entries are N(0, (dynamic_range/3)^2).  Sequence l is generated from its
    own counter-based stream keyed by (seed, l), so generating columns in
    parallel or generating a prefix of the columns reproduces the serial
    result bit for bit.
    """
    if m < 1 or m1 < 1:
        raise InvalidDims(f"need m >= 1 and m1 >= 1, got m={m}, m1={m1}")
    if not dynamic_range > 0:
        raise ValueError("dynamic_range must be positive")
    base = _entropy(seed)
    sigma = dynamic_range / 3.0
    gamma = np.empty((m, m1), dtype=np.float64)
    for ell in range(m1):
        rng = np.random.default_rng(base + (ell,))
        gamma[:, ell] = sigma * rng.standard_normal(m)
    return ThresholdEnsemble(m=m, m1=m1, gamma=gamma, d=0.0, sigma=sigma, seed=base)


def quantize(y: np.ndarray, thresholds: ThresholdEnsemble) -> OneBitRecord:
    """Sign-compare y against every threshold sequence.

    R[j, l] = +1 when y[j] >= Gamma[j, l], else -1; the tie y == threshold
    maps to +1 so quantization is deterministic.
    """
    yv = np.asarray(y, dtype=np.float64)
    if yv.ndim != 1 or yv.shape[0] != thresholds.m:
        raise LengthMismatch(
            f"measurement length {yv.shape} does not match m={thresholds.m}"
        )
    signs = np.where(yv[:, None] >= thresholds.gamma, 1.0, -1.0)
    return OneBitRecord(signs=signs, thresholds=thresholds)


def stacked_rhs(record: OneBitRecord) -> np.ndarray:
    """vec(R) * vec(Gamma) elementwise, column-major (sequence blocks contiguous)."""
    return (record.signs * record.thresholds.gamma).flatten(order="F")


def save_record(record: OneBitRecord, out_dir: str) -> None:
    """Write the record as a binary-free CSV pair R.csv / Gamma.csv."""
    os.makedirs(out_dir, exist_ok=True)
    np.savetxt(
        os.path.join(out_dir, "R.csv"),
        record.signs.astype(np.int64),
        fmt="%d",
        delimiter=",",
        newline="\n",
    )
    np.savetxt(
        os.path.join(out_dir, "Gamma.csv"),
        record.thresholds.gamma,
        fmt=FLOAT_FMT,
        delimiter=",",
        newline="\n",
    )


def load_record(out_dir: str) -> OneBitRecord:
    """Rebuild a record from a save_record dump (generation provenance is lost)."""
    signs = np.loadtxt(os.path.join(out_dir, "R.csv"), delimiter=",", ndmin=2)
    gamma = np.loadtxt(os.path.join(out_dir, "Gamma.csv"), delimiter=",", ndmin=2)
    m, m1 = gamma.shape
    ens = ThresholdEnsemble(m=m, m1=m1, gamma=gamma, d=0.0, sigma=None, seed=None)
    return OneBitRecord(signs=signs.astype(np.float64), thresholds=ens)
