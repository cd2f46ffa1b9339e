"""Anomaly-focused token selection and temporal localization toolkit."""

from .store import (
    FrameEmbedding,
    FrameSequence,
    LabelManifest,
    LabeledInterval,
    SyntheticSpec,
    generate_synthetic,
    read_sequence,
    write_sequence,
)
from .select import (
    DifferenceMap,
    EffectiveTokenSet,
    FrameSelection,
    FrameTokens,
    SelectionMask,
    SelectionStats,
    content_token,
    context_token,
    difference_map,
    process_sequence,
    select_tokens,
    selection_mask,
    token_budget,
)
from .classifier import (
    DEFAULT_CATEGORIES,
    AnomalyModel,
    IntervalPrompt,
    ScoredSequence,
    TemporalInterval,
    TrainConfig,
    TrainingLog,
    bce_loss,
    extract_interval,
    extract_islands,
    forward,
    gradient,
    init_model,
    render_prompt,
    score_sequence,
    train,
)
from .metrics import (
    EvalReport,
    KRatioResult,
    UndefinedMetricError,
    ablate_k,
    frame_auc,
    temporal_iou,
    token_stats,
    write_report,
)

__version__ = "0.1.0"
