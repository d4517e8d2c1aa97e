"""Checkpoint merging and mergeability diagnostics."""

from ._mergemeter import (  # noqa: F401
    ActivationSet,
    AnovaResult,
    BallResult,
    Checkpoint,
    ConflictReport,
    CorrelationResult,
    DistortionReport,
    LmcLinearEnsemble,
    ReprEnsemble,
    SimilarityMatrix,
    TaskVector,
    achievability_merge,
    anova_oneway,
    apply_task_vector,
    avg_cosine_similarity,
    average_merging_loss,
    best_merging_loss,
    conflict_report,
    conflicting_magnitude_ratio,
    converse_check,
    diameter,
    distortion_report,
    hiddensim,
    load_activation_set,
    magnitude_change_ratio,
    make_ensemble,
    mds,
    merge_dare,
    merge_linear_average,
    merge_slerp,
    merge_task_arithmetic,
    merge_ties,
    merged_hidden_states,
    mergeability_test,
    merging_loss,
    min_enclosing_ball,
    min_enclosing_ball_points,
    pairwise_hidden_distance,
    pearson,
    rate_lower_bound,
    read_container,
    read_task_vector,
    regularized_incomplete_beta,
    save_activation_set,
    sign_change_ratio,
    synth_lmc_ensemble,
    task_vector,
    write_container,
    write_task_vector,
)

__version__ = "0.1.0"
