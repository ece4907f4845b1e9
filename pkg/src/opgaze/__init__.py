"""Behavioral analytics for egocentric machine-operation recordings.

Turns per-frame attention / hand / touch tracks into operation units
(gazing, approaching, operating), touch hotspots, and per-unit features
(distances, kinematics, eye-hand synergy, early-shift behavior), and runs
two studies on top: earlier-vs-later skill comparison across operator
pairs and feature correlation with rated step difficulty.
"""

from .analysis import (
    CATEGORICAL_FEATURES,
    SCALAR_FEATURES,
    ComparisonReport,
    CorrelationReport,
    SessionPair,
    SessionSummary,
    difficulty_correlation,
    pairwise_comparison,
    pearson,
    scalar_features,
    session_feature_summary,
    step_feature_means,
    summarize_rows,
    unit_row,
)
from .features import (
    FeatureParams,
    attention_hand_correlation,
    attention_lead_lag,
    build_distance_series,
    classify_gaze_pattern,
    classify_shift_kind,
    compensate_offset,
    count_sign_changes,
    early_shift_ratio,
    feature_vector,
    kinematics,
    sign_series,
    trailing_positive_run,
)
from .hotspot import (
    ClusterParams,
    TouchDistribution,
    cluster_touches,
    extract_touches,
    touch_distribution,
)
from .ingest import (
    ParseError,
    ValidationReport,
    load_ratings,
    load_step_labels,
    parse_session,
    validate_session,
    write_ratings,
    write_session,
    write_step_labels,
)
from .segmentation import SegmentationParams, period_durations, segment_units
from .session import (
    DifficultyRatings,
    DistanceSeries,
    FeatureVector,
    FrameRecord,
    Hotspot,
    Interval,
    KinematicsSummary,
    OperationUnit,
    Point2,
    Rating,
    Session,
    StepLabel,
    scene_diagonal,
)
from .synth import (
    ArchetypeSpec,
    Cohort,
    CohortSpec,
    GeneratedSession,
    generate_classification_set,
    generate_cohort,
    generate_ou_trace,
    generate_session,
    write_cohort,
)

__version__ = "0.1.0"

__all__ = [
    "ArchetypeSpec",
    "CATEGORICAL_FEATURES",
    "ClusterParams",
    "Cohort",
    "CohortSpec",
    "ComparisonReport",
    "CorrelationReport",
    "DifficultyRatings",
    "DistanceSeries",
    "FeatureParams",
    "FeatureVector",
    "FrameRecord",
    "GeneratedSession",
    "Hotspot",
    "Interval",
    "KinematicsSummary",
    "OperationUnit",
    "ParseError",
    "Point2",
    "Rating",
    "SCALAR_FEATURES",
    "SegmentationParams",
    "Session",
    "SessionPair",
    "SessionSummary",
    "StepLabel",
    "TouchDistribution",
    "ValidationReport",
    "attention_hand_correlation",
    "attention_lead_lag",
    "build_distance_series",
    "classify_gaze_pattern",
    "classify_shift_kind",
    "cluster_touches",
    "compensate_offset",
    "count_sign_changes",
    "difficulty_correlation",
    "early_shift_ratio",
    "extract_touches",
    "feature_vector",
    "generate_classification_set",
    "generate_cohort",
    "generate_ou_trace",
    "generate_session",
    "kinematics",
    "load_ratings",
    "load_step_labels",
    "pairwise_comparison",
    "parse_session",
    "pearson",
    "period_durations",
    "scalar_features",
    "scene_diagonal",
    "segment_units",
    "session_feature_summary",
    "step_feature_means",
    "summarize_rows",
    "sign_series",
    "touch_distribution",
    "trailing_positive_run",
    "unit_row",
    "validate_session",
    "write_cohort",
    "write_ratings",
    "write_session",
    "write_step_labels",
]
