"""One-bit quadratic compressed sensing as linear feasibility.

Generate lifted QCS instances, quantize measurements to sign bits against
time-varying thresholds, assemble the resulting block-structured inequality
polyhedron, and recover the lifted matrix with randomized Kaczmarz-family
solvers (RKA, SKM, Block SKM and its Gaussian-sketched variant).
"""

from .linalg import (
    NoConvergence,
    RankDeficient,
    SingularGram,
    dominant_eigenpair,
    frobenius_norm_sq,
    gram_pseudoinverse_apply,
    scaled_condition_number,
)
from .onebit import (
    InvalidDims,
    LengthMismatch,
    OneBitRecord,
    ThresholdEnsemble,
    generate_thresholds,
    quantize,
    stacked_rhs,
)
from .qcs import (
    FULL_RANK,
    RANK_ONE,
    IndexOutOfRange,
    InvalidSparsity,
    Polyhedron,
    ProblemInstance,
    SensingEnsemble,
    apply_operator,
    build_polyhedron,
    feasibility_margin,
    generate_instance,
    lifted_row,
)
from .recovery import LiftedEstimate, ZeroReference, extract_signal, nmse_matrix, nmse_signal
from .solvers import (
    ALGORITHMS,
    BLOCK_SKM,
    GAUSSIAN_SKETCH,
    RKA,
    SKM,
    DenseSystem,
    InvalidRate,
    LiftedSystem,
    NonFinite,
    SolverConfig,
    SolverTrace,
    block_rate_bound,
    block_skm_step,
    gaussian_sketch_step,
    projection_coefficient,
    rka_step,
    skm_bound,
    skm_step,
    solve,
)

__version__ = "0.1.0"
