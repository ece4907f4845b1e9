"""Cross-session studies on per-unit feature vectors.

Two studies are supported:

* pairwise comparison: for operators recorded twice, the relative change
  of each feature's session mean from the earlier to the later session,
  averaged over operator pairs;
* difficulty correlation: Pearson correlation between a feature's
  per-step mean and the step's mean rated difficulty.

Feature vectors carry None for undefined values; both studies aggregate
over defined values only and report how many contributed.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .session import (
    DifficultyRatings,
    FeatureVector,
    Session,
)

logger = logging.getLogger(__name__)

# Canonical order of the scalar (numeric) per-unit features in reports.
SCALAR_FEATURES = (
    "dur_gazing",
    "dur_approaching",
    "dur_operating",
    "ratio_gazing",
    "ratio_approaching",
    "ratio_operating",
    "operating_mean_dist",
    "gazing_sign_changes",
    "gazing_mean_speed",
    "gazing_dist_var",
    "approaching_sign_changes",
    "approaching_mean_speed",
    "approaching_dist_var",
    "operating_sign_changes",
    "operating_mean_speed",
    "operating_dist_var",
    "corr_attention_hand",
    "attention_lead_lag",
    "early_shift_ratio",
)

CATEGORICAL_FEATURES = ("gaze_pattern", "shift_kind")


def pearson(x: Sequence[float], y: Sequence[float]) -> Optional[float]:
    """Pearson correlation coefficient, clamped to [-1, 1].

    None when there are fewer than three points or either input is
    constant (the coefficient is undefined there).  Raises on mismatched
    lengths.
    """
    xs = np.asarray(x, dtype=float)
    ys = np.asarray(y, dtype=float)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise ValueError(f"pearson needs two equal-length vectors, got {xs.shape} and {ys.shape}")
    n = len(xs)
    if n < 3:
        return None
    dx = xs - xs.mean()
    dy = ys - ys.mean()
    sx = float(np.sqrt(np.sum(dx * dx)))
    sy = float(np.sqrt(np.sum(dy * dy)))
    if sx == 0.0 or sy == 0.0:
        return None
    r = float(np.sum(dx * dy) / (sx * sy))
    return max(-1.0, min(1.0, r))


def scalar_features(fv: FeatureVector) -> dict[str, Optional[float]]:
    """Flatten a feature vector to the canonical scalar names; undefined
    values stay None."""
    out: dict[str, Optional[float]] = {
        "dur_gazing": fv.dur_gazing,
        "dur_approaching": fv.dur_approaching,
        "dur_operating": fv.dur_operating,
        "ratio_gazing": fv.ratio_gazing,
        "ratio_approaching": fv.ratio_approaching,
        "ratio_operating": fv.ratio_operating,
        "operating_mean_dist": fv.operating_mean_dist,
        "corr_attention_hand": fv.corr_attention_hand,
        "attention_lead_lag": fv.attention_lead_lag,
        "early_shift_ratio": fv.early_shift_ratio,
    }
    for period, kin in (
        ("gazing", fv.gazing_kin),
        ("approaching", fv.approaching_kin),
        ("operating", fv.operating_kin),
    ):
        if kin is None:
            out[f"{period}_sign_changes"] = None
            out[f"{period}_mean_speed"] = None
            out[f"{period}_dist_var"] = None
        else:
            changes = kin.sign_changes
            out[f"{period}_sign_changes"] = None if changes is None else float(changes)
            out[f"{period}_mean_speed"] = kin.mean_abs_speed
            out[f"{period}_dist_var"] = kin.variance
    return out


@dataclass(frozen=True)
class SessionSummary:
    """Per-session feature means over units where each feature is defined."""

    session_id: str
    operator: str
    ordinal: str
    n_units: int
    feature_means: Mapping[str, Optional[float]]
    feature_counts: Mapping[str, int]
    n_search: int = 0
    n_shift: int = 0
    n_early: int = 0
    n_non_early: int = 0
    n_shift_undefined: int = 0


def summarize_rows(
    session_id: str,
    operator: str,
    ordinal: str,
    rows: Sequence[Mapping[str, Optional[float]]],
    patterns: Sequence[str] = (),
    kinds: Sequence[str] = (),
) -> SessionSummary:
    """Session summary from flattened per-unit scalar rows (the
    features.csv shape); lets reports be rebuilt without the raw frames."""
    if not rows:
        raise ValueError(f"session {session_id!r} has no operation units to summarize")
    means: dict[str, Optional[float]] = {}
    counts: dict[str, int] = {}
    for name in SCALAR_FEATURES:
        defined = [r[name] for r in rows if r.get(name) is not None]
        counts[name] = len(defined)
        means[name] = float(np.mean(defined)) if defined else None
    return SessionSummary(
        session_id=session_id,
        operator=operator,
        ordinal=ordinal,
        n_units=len(rows),
        feature_means=means,
        feature_counts=counts,
        n_search=sum(1 for p in patterns if p == "search"),
        n_shift=sum(1 for p in patterns if p == "shift"),
        n_early=sum(1 for k in kinds if k == "early"),
        n_non_early=sum(1 for k in kinds if k == "non-early"),
        n_shift_undefined=sum(1 for k in kinds if k == "undefined"),
    )


def session_feature_summary(s: Session, fvs: Sequence[FeatureVector]) -> SessionSummary:
    """Mean of each scalar feature over a session's units.

    Undefined unit values are left out of the mean; a feature undefined in
    every unit gets a None mean with count 0.  Raises on sessions without
    units.
    """
    return summarize_rows(
        s.id,
        s.operator,
        s.ordinal,
        [scalar_features(fv) for fv in fvs],
        patterns=[fv.gaze_pattern for fv in fvs],
        kinds=[fv.shift_kind for fv in fvs],
    )


@dataclass(frozen=True)
class SessionPair:
    """Earlier and later session of the same operator."""

    earlier: SessionSummary
    later: SessionSummary

    def __post_init__(self) -> None:
        if self.earlier.operator != self.later.operator:
            raise ValueError(
                f"pair mixes operators {self.earlier.operator!r} and {self.later.operator!r}"
            )
        if self.earlier.ordinal != "earlier" or self.later.ordinal != "later":
            raise ValueError("pair sessions must be ordered earlier, later")

    @property
    def operator(self) -> str:
        return self.earlier.operator


@dataclass(frozen=True)
class ComparisonRow:
    """One feature's earlier-to-later change over all pairs.

    ``mean_delta_pct`` is the mean over pairs of
    (later - earlier) / earlier * 100; ``n_later_smaller`` counts pairs
    where the later session's mean is strictly smaller.
    """

    feature: str
    mean_delta_pct: Optional[float]
    n_pairs: int
    n_later_smaller: int
    deltas_pct: tuple[float, ...] = field(default=())


@dataclass(frozen=True)
class ComparisonReport:
    rows: tuple[ComparisonRow, ...]
    n_pairs_total: int

    def row(self, feature: str) -> ComparisonRow:
        for r in self.rows:
            if r.feature == feature:
                return r
        raise KeyError(feature)


def pairwise_comparison(
    pairs: Sequence[SessionPair],
    features: Sequence[str] = SCALAR_FEATURES,
) -> ComparisonReport:
    """Relative earlier-to-later change of each feature's session mean.

    Pairs where a feature's mean is undefined in either session, or zero
    in the earlier one (no relative change exists), are skipped for that
    feature and logged.
    """
    rows = []
    for name in features:
        deltas: list[float] = []
        n_smaller = 0
        for pair in pairs:
            e = pair.earlier.feature_means.get(name)
            l = pair.later.feature_means.get(name)
            if e is None or l is None:
                logger.warning(
                    "pair %s: feature %s undefined in %s session, skipped",
                    pair.operator, name, "earlier" if e is None else "later",
                )
                continue
            if e == 0.0:
                logger.warning(
                    "pair %s: feature %s is 0 in the earlier session, "
                    "relative change undefined, skipped", pair.operator, name,
                )
                continue
            deltas.append((l - e) / e * 100.0)
            if l < e:
                n_smaller += 1
        rows.append(ComparisonRow(
            feature=name,
            mean_delta_pct=float(np.mean(deltas)) if deltas else None,
            n_pairs=len(deltas),
            n_later_smaller=n_smaller,
            deltas_pct=tuple(deltas),
        ))
    return ComparisonReport(rows=tuple(rows), n_pairs_total=len(pairs))


UnitRow = tuple[Optional[str], Mapping[str, Optional[float]]]
"""A unit's step label and its flattened scalar features."""


def unit_row(fv: FeatureVector) -> UnitRow:
    return fv.step_id, scalar_features(fv)


def step_feature_means(
    units: Iterable[UnitRow],
    features: Sequence[str] = SCALAR_FEATURES,
) -> dict[str, dict[str, Optional[float]]]:
    """Per-step mean of each feature over all units labeled with the step,
    across sessions.  Units without a step label are ignored."""
    by_step: dict[str, list[Mapping[str, Optional[float]]]] = {}
    for step_id, table in units:
        if step_id is None:
            continue
        by_step.setdefault(step_id, []).append(table)
    out: dict[str, dict[str, Optional[float]]] = {}
    for step_id in sorted(by_step):
        tables = by_step[step_id]
        row: dict[str, Optional[float]] = {}
        for name in features:
            defined = [t[name] for t in tables if t.get(name) is not None]
            row[name] = float(np.mean(defined)) if defined else None
        out[step_id] = row
    return out


@dataclass(frozen=True)
class CorrelationRow:
    """One feature's correlation with rated step difficulty.

    ``r_vs_difficulty`` uses the difficulty orientation (negated score:
    higher = harder); ``r_vs_score`` the raw -5..5 scale (higher =
    easier).  Both are None when fewer than three steps have the feature
    defined or the values are constant.
    """

    feature: str
    r_vs_difficulty: Optional[float]
    r_vs_score: Optional[float]
    n_steps: int


@dataclass(frozen=True)
class CorrelationReport:
    rows: tuple[CorrelationRow, ...]
    step_ids: tuple[str, ...]

    def row(self, feature: str) -> CorrelationRow:
        for r in self.rows:
            if r.feature == feature:
                return r
        raise KeyError(feature)


def difficulty_correlation(
    units: Iterable[UnitRow],
    ratings: DifficultyRatings,
    features: Sequence[str] = SCALAR_FEATURES,
    role: Optional[str] = None,
) -> CorrelationReport:
    """Correlate per-step feature means with mean rated difficulty.

    ``units`` are (step_id, scalar features) rows, see :func:`unit_row`.
    Only steps present in both the units and the ratings contribute.
    ``role`` restricts the ratings to one rater role.
    """
    step_means = step_feature_means(units, features)
    steps = tuple(sid for sid in sorted(step_means) if sid in ratings.by_step)
    missing = sorted(set(step_means) - set(steps))
    if missing:
        logger.warning("steps without ratings ignored: %s", ", ".join(missing))
    rows = []
    for name in features:
        xs: list[float] = []
        scores: list[float] = []
        for sid in steps:
            v = step_means[sid][name]
            if v is None or not math.isfinite(v):
                continue
            xs.append(v)
            scores.append(ratings.mean_score(sid, role))
        difficulties = [-s for s in scores]
        rows.append(CorrelationRow(
            feature=name,
            r_vs_difficulty=pearson(xs, difficulties) if len(xs) >= 3 else None,
            r_vs_score=pearson(xs, scores) if len(xs) >= 3 else None,
            n_steps=len(xs),
        ))
    return CorrelationReport(rows=tuple(rows), step_ids=steps)
