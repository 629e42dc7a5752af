"""Input-sparsity-time lp subspace embeddings, leverage sampling and fast lp regression."""

from .conditioning import (
    ConditionEstimate,
    Conditioner,
    RankDeficientError,
    ellipsoidal_round,
    estimate_condition,
    qr_condition,
)
from .generators import FAMILIES, generate_matrix, noisy_rhs
from .regression import (
    PipelineError,
    RegressionSolution,
    fast_l2_regression,
    fast_lp_regression,
    improve_embedding_dimension,
    l1_oracle_bruteforce,
    lp_objective,
    solve_l2_exact,
    solve_lp_small,
)
from .sampling import (
    LeverageWeights,
    SamplingMatrix,
    build_sampling_matrix,
    leverage_weights,
    sampling_size,
    verify_sampling_distortion,
)
from .sketch import (
    DistortionReport,
    SketchKind,
    SketchPlan,
    apply_dense_pstable,
    apply_sketch,
    measure_distortion,
    plan_sketch,
)
from .sparse_core import SparseMatrix, elementwise_lp_norm, load_matrix_market, lp_norm, row_lp_norms, spmm
from .stable_rand import DomainError, RngStream, StableParams, sample_cauchy, sample_gaussian, sample_pstable

__version__ = "0.1.0"
