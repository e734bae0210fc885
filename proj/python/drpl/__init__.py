"""Label-noise detection and robust training pipeline."""

try:
    from ._drpl import (
        BetaMixture,
        Dataset,
        OodPool,
        RunConfig,
        RunReport,
        TransitionMatrix,
        fit_beta_mixture,
        generate_synthetic,
        inject_nonuniform_id,
        inject_uniform_id,
        inject_uniform_ood,
        noisy_posterior,
        normalize_losses,
        roc_auc,
        run_pipeline,
    )
except ImportError:  # dev fallback: extension from an in-tree CMake build dir
    from _drpl import (
        BetaMixture,
        Dataset,
        OodPool,
        RunConfig,
        RunReport,
        TransitionMatrix,
        fit_beta_mixture,
        generate_synthetic,
        inject_nonuniform_id,
        inject_uniform_id,
        inject_uniform_ood,
        noisy_posterior,
        normalize_losses,
        roc_auc,
        run_pipeline,
    )

__all__ = [
    "BetaMixture",
    "Dataset",
    "OodPool",
    "RunConfig",
    "RunReport",
    "TransitionMatrix",
    "fit_beta_mixture",
    "generate_synthetic",
    "inject_nonuniform_id",
    "inject_uniform_id",
    "inject_uniform_ood",
    "noisy_posterior",
    "normalize_losses",
    "roc_auc",
    "run_pipeline",
]
