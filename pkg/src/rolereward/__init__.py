"""Verifiable reward engine for role-aware reasoning RL."""

from .trajectory import (
    Diagnostic,
    DiagnosticCode,
    FocusDeclaration,
    FocusDimension,
    FormatReport,
    ParsedTrajectory,
    Severity,
    build_trajectory,
    parse_trajectory,
    render_trajectory,
    validate_format,
)
from .metrics import BleuConfig, bleu, bleu1, exact_match, ngram_precision_config, tokenize
from .rewards import (
    DEFAULT_REF_CONFIG,
    GoldAnnotation,
    RefRewardConfig,
    RewardVector,
    score_focus,
    score_focus_attr,
    score_parsed,
    score_reference,
    score_trajectory,
)
from .grouping import (
    CharacterProfile,
    GroupModel,
    assign_group,
    fallback_embedding,
    fit_kmeans,
    inertia,
    silhouette,
    sweep_cluster_counts,
)
from .normalizer import (
    DEFAULT_WEIGHTS,
    NormalizedRewards,
    NormalizerState,
    RunningStat,
    WeightVector,
    aggregate,
    restore,
    snapshot,
)
from .grpo import (
    BanditBatchEntry,
    GrpoConfig,
    ResponseLogProbs,
    bandit_objective_and_gradient,
    group_advantages,
    grpo_gradient_check,
    grpo_objective,
    kl_estimate,
    token_ratios,
)
from .trainer import (
    ToyCategoricalPolicy,
    ToyPrompt,
    ToyTask,
    TrainingLog,
    TrainingRecord,
    default_task,
    emit_curves,
    run_training,
)
from .pipeline import ItemResult, NoGroupModelError, RewardPipeline

__version__ = "0.1.0"
