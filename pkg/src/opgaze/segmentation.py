"""Split a session into operation units with gazing / approaching /
operating boundaries.

An operating period is a maximal run of touching frames after micro-gaps
shorter than ``touch_merge_gap`` are merged; runs shorter than
``min_operating`` are discarded as contact-detection jitter (logged).  The
approaching period starts at the first debounced hand appearance after the
previous contact ended -- or exactly at the previous contact's end when the
hand never left sight -- and the gazing period fills the space before it.
A trailing bout-less stretch (touches never resume) produces no unit.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

from .session import Hotspot, Interval, OperationUnit, Session
from .hotspot import assign_operating_hotspot

logger = logging.getLogger(__name__)

DEFAULT_TOUCH_MERGE_GAP = 0.3
DEFAULT_MIN_OPERATING = 0.2
DEFAULT_HAND_DEBOUNCE = 2


@dataclass(frozen=True)
class SegmentationParams:
    touch_merge_gap: float = DEFAULT_TOUCH_MERGE_GAP
    min_operating: float = DEFAULT_MIN_OPERATING
    hand_presence_debounce: int = DEFAULT_HAND_DEBOUNCE

    def __post_init__(self) -> None:
        if self.touch_merge_gap < 0 or self.min_operating < 0 or self.hand_presence_debounce < 0:
            raise ValueError("segmentation parameters must be >= 0")


def _touch_bouts(s: Session) -> list[tuple[int, int]]:
    """Maximal runs of touching frames, as (first, last) frame indices."""
    bouts = []
    start = None
    for i, f in enumerate(s.frames):
        if f.touching:
            if start is None:
                start = i
        elif start is not None:
            bouts.append((start, i - 1))
            start = None
    if start is not None:
        bouts.append((start, len(s.frames) - 1))
    return bouts


def _merge_bouts(s: Session, bouts: list[tuple[int, int]], gap: float) -> list[tuple[int, int]]:
    if not bouts:
        return []
    merged = [bouts[0]]
    for first, last in bouts[1:]:
        prev_first, prev_last = merged[-1]
        if s.frames[first].t - s.frames[prev_last].t < gap:
            merged[-1] = (prev_first, last)
        else:
            merged.append((first, last))
    return merged


def _visible_flags(s: Session, debounce: int) -> list[bool]:
    """Per-frame flag: hand in sight, counting only presence runs of at
    least ``debounce`` frames."""
    n = len(s.frames)
    visible = [False] * n
    i = 0
    while i < n:
        if s.frames[i].hand is None:
            i += 1
            continue
        j = i
        while j < n and s.frames[j].hand is not None:
            j += 1
        if j - i >= max(debounce, 1):
            for k in range(i, j):
                visible[k] = True
        i = j
    return visible


def _majority_step(s: Session, o_start: float, o_end: float) -> Optional[str]:
    if s.step_labels is None:
        return None
    dur = o_end - o_start
    if dur == 0:
        for label in s.step_labels:
            if label.start_t <= o_start < label.end_t:
                return label.step_id
        return None
    best_id, best_overlap = None, 0.0
    for label in s.step_labels:
        overlap = min(o_end, label.end_t) - max(o_start, label.start_t)
        if overlap > best_overlap:
            best_id, best_overlap = label.step_id, overlap
    if best_overlap > 0.5 * dur:
        return best_id
    return None


def segment_units(
    s: Session,
    params: SegmentationParams = SegmentationParams(),
    hotspots: Optional[Sequence[Hotspot]] = None,
) -> list[OperationUnit]:
    """Segment a session into ordered, non-overlapping operation units.

    When ``hotspots`` are provided each unit gets the hotspot nearest its
    touch positions (None are flagged as unassigned); when the session has
    step labels each unit gets the step covering the majority of its
    operating period.
    """
    raw = _touch_bouts(s)
    if not raw:
        logger.warning("session %s: no touches, nothing to segment", s.id)
        return []
    merged = _merge_bouts(s, raw, params.touch_merge_gap)

    kept: list[tuple[int, int]] = []
    for first, last in merged:
        duration = s.frames[last].t - s.frames[first].t
        if duration < params.min_operating:
            logger.warning(
                "session %s: dropped operating bout [%s, %s] shorter than %ss",
                s.id, s.frames[first].t, s.frames[last].t, params.min_operating,
            )
        else:
            kept.append((first, last))
    if not kept:
        logger.warning("session %s: all operating bouts below min_operating", s.id)
        return []

    visible = _visible_flags(s, params.hand_presence_debounce)
    units: list[OperationUnit] = []
    prev_end_t = s.start_t
    prev_end_i = -1
    for index, (ob, oe) in enumerate(kept):
        o_start, o_end = s.frames[ob].t, s.frames[oe].t
        appearance = o_start
        for j in range(prev_end_i + 1, ob + 1):
            if visible[j]:
                # hand still in sight right after the previous contact
                # means it never left: approaching starts at the boundary
                appearance = prev_end_t if j == prev_end_i + 1 else s.frames[j].t
                break
        appearance = min(max(appearance, prev_end_t), o_start)

        touches = [(f.t, f.hand) for f in s.frames[ob:oe + 1] if f.touching]
        hotspot_id = None
        if hotspots is not None:
            hotspot_id = assign_operating_hotspot(touches, hotspots)
            if hotspot_id is None:
                logger.warning("session %s: unit %d has no hotspot to assign", s.id, index)

        units.append(OperationUnit(
            index=index,
            gazing=Interval(prev_end_t, appearance),
            approaching=Interval(appearance, o_start),
            operating=Interval(o_start, o_end),
            hotspot_id=hotspot_id,
            step_id=_majority_step(s, o_start, o_end),
        ))
        prev_end_t = o_end
        prev_end_i = oe
    return units


def period_durations(ou: OperationUnit) -> tuple[float, float, float, float, float, float]:
    """Absolute period durations and their ratios to the whole unit.

    Ratios sum to 1; a fully degenerate (zero-length) unit counts as all
    operating.
    """
    dur_g = ou.gazing.duration
    dur_h = ou.approaching.duration
    dur_o = ou.operating.duration
    total = dur_g + dur_h + dur_o
    if total <= 0:
        return dur_g, dur_h, dur_o, 0.0, 0.0, 1.0
    return dur_g, dur_h, dur_o, dur_g / total, dur_h / total, dur_o / total
