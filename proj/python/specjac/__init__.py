"""Speculative Jacobi decoding testbed: toy autoregressive models, the
draft-then-verify engine with a verification-prediction drafter, and the
total-variation analysis utilities, all backed by the C++ core."""

from ._specjac import (  # noqa: F401
    Distribution,
    DirectionReport,
    ExactSequenceDistribution,
    MarkovModel,
    PerturbationSpec,
    Prompt,
    RunStats,
    SeededRng,
    VPConfig,
    autoregressive_decode,
    bayesian_fusion,
    decomposition_check,
    direction_accuracy,
    ewa_reference,
    exact_sequence_distribution,
    exact_tv_delta,
    first_order_tv_delta,
    growth_mask,
    ideal_direction,
    log_probs,
    prediction_score,
    residual_distribution,
    run_greedy_jacobi,
    run_speculative_jacobi,
    sample,
    softmax,
    top_k_candidates,
    tv_distance,
)

__version__ = "0.1.0"
