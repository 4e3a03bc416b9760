"""Selective mixup, selective sampling and resampling strategies."""

from ._core import (
    ClassDistribution,
    ConfigError,
    EmptyDatasetError,
    Error,
    InvalidArgument,
    UndefinedMetricError,
    Dataset,
    EvaluationReport,
    ExperimentConfig,
    GridOutcome,
    Model,
    ModelSpec,
    SampledDistribution,
    TrainConfig,
    audit_results,
    auroc,
    combined_distribution,
    distribution_divergence,
    effective_sampled_distribution,
    emit_plot_data,
    entropy,
    evaluate,
    gen_spurious_correlation,
    gen_temporal_label_shift,
    load_dataset_csv,
    load_experiment_config,
    nn_covariate_divergence,
    parse_strategy,
    pearson_correlation,
    run_experiment_grid,
    train,
    uniformity_shift_report,
    virtual_class_distribution,
    write_dataset_csv,
)

__all__ = [name for name in dir() if not name.startswith("_")]
