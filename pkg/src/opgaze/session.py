"""Core domain types for egocentric machine-operation recordings.

A recording is a :class:`Session`: a time-ordered sequence of
:class:`FrameRecord` samples, each carrying the operator's attention proxy
(the projected view center), the tracked hand position when in sight, and a
physical-contact flag.  Downstream stages derive hotspots, operation units,
distance series, and per-unit behavioral features from these types.

All types are immutable after construction and safe to share across threads.
Positions live in one planar scene coordinate frame per session; the unit
(pixels or millimeters) is opaque metadata carried in ``coord_frame``.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

ORDINALS = ("earlier", "later")
DISTANCE_KINDS = ("AO", "HO", "AH")
GAZE_PATTERNS = ("search", "shift")
SHIFT_KINDS = ("early", "non-early", "undefined")
RATER_ROLES = ("expert", "beginner")

SCORE_MIN = -5
SCORE_MAX = 5


@dataclass(frozen=True)
class Point2:
    """A point in the session's scene coordinate frame."""

    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite coordinates: ({self.x}, {self.y})")
        # normalize numpy scalars so repr() serialization is plain decimal
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))

    def distance_to(self, other: "Point2") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True)
class FrameRecord:
    """One timestamped sample.

    ``attention`` is the per-frame attention proxy (view center projected
    into scene coordinates); ``hand`` is None while the hand is out of
    sight; ``touching`` flags physical contact with the machine surface.
    """

    t: float
    attention: Point2
    hand: Optional[Point2]
    touching: bool

    def __post_init__(self) -> None:
        if not math.isfinite(self.t) or self.t < 0:
            raise ValueError(f"frame time must be finite and >= 0, got {self.t}")
        object.__setattr__(self, "t", float(self.t))
        if self.touching and self.hand is None:
            raise ValueError("contact without hand: touching=true requires a hand position")


@dataclass(frozen=True)
class StepLabel:
    """One annotated operation step: the interval [start_t, end_t)."""

    start_t: float
    end_t: float
    step_id: str

    def __post_init__(self) -> None:
        if not self.end_t > self.start_t:
            raise ValueError(f"step '{self.step_id}': end {self.end_t} not after start {self.start_t}")


@dataclass(frozen=True)
class Session:
    """One recorded operation experience.

    Frames are strictly increasing in time.  ``ordinal`` marks whether this
    is the operator's earlier or later experience of the task; ``step_labels``
    optionally annotate operation-step intervals (non-overlapping).
    """

    id: str
    operator: str
    ordinal: str
    frames: tuple[FrameRecord, ...]
    sample_rate_hz: float
    coord_frame: str = "scene"
    step_labels: Optional[tuple[StepLabel, ...]] = None

    def __post_init__(self) -> None:
        if self.ordinal not in ORDINALS:
            raise ValueError(f"ordinal must be one of {ORDINALS}, got {self.ordinal!r}")
        if not self.frames:
            raise ValueError(f"session {self.id!r}: frames must be nonempty")
        if not (math.isfinite(self.sample_rate_hz) and self.sample_rate_hz > 0):
            raise ValueError(f"session {self.id!r}: sample_rate_hz must be positive")
        object.__setattr__(self, "frames", tuple(self.frames))
        prev = None
        for rec in self.frames:
            if prev is not None and rec.t <= prev:
                kind = "duplicate timestamp" if rec.t == prev else "non-monotonic timestamp"
                raise ValueError(f"session {self.id!r}: {kind} at t={rec.t}")
            prev = rec.t
        if self.step_labels is not None:
            labels = tuple(sorted(self.step_labels, key=lambda s: s.start_t))
            object.__setattr__(self, "step_labels", labels)
            for a, b in zip(labels, labels[1:]):
                if b.start_t < a.end_t:
                    raise ValueError(
                        f"session {self.id!r}: overlapping steps {a.step_id!r} and {b.step_id!r}"
                    )

    @property
    def start_t(self) -> float:
        return self.frames[0].t

    @property
    def end_t(self) -> float:
        return self.frames[-1].t

    # The per-frame arrays below are derived once and cached on the
    # instance (frames are immutable, so they can never go stale).

    @functools.cached_property
    def _times(self) -> np.ndarray:
        return _readonly(np.array([f.t for f in self.frames], dtype=float))

    def times(self) -> np.ndarray:
        return self._times

    @functools.cached_property
    def attention_xy(self) -> np.ndarray:
        arr = np.array([(f.attention.x, f.attention.y) for f in self.frames], dtype=float)
        arr.flags.writeable = False
        return arr

    @functools.cached_property
    def hand_xy(self) -> np.ndarray:
        """(n, 2) hand positions, NaN rows where the hand is out of sight."""
        arr = np.full((len(self.frames), 2), np.nan, dtype=float)
        for i, f in enumerate(self.frames):
            if f.hand is not None:
                arr[i, 0] = f.hand.x
                arr[i, 1] = f.hand.y
        arr.flags.writeable = False
        return arr

    @functools.cached_property
    def touching_mask(self) -> np.ndarray:
        arr = np.array([f.touching for f in self.frames], dtype=bool)
        arr.flags.writeable = False
        return arr

    @functools.cached_property
    def hand_visible_mask(self) -> np.ndarray:
        arr = np.array([f.hand is not None for f in self.frames], dtype=bool)
        arr.flags.writeable = False
        return arr


def scene_diagonal(sessions: Session | Sequence[Session]) -> float:
    """Diagonal of the bounding box of every observed point (attention and hand).

    Used to scale spatial defaults; 0.0 when all points coincide.
    """
    if isinstance(sessions, Session):
        sessions = [sessions]
    xs: list[float] = []
    ys: list[float] = []
    for s in sessions:
        for f in s.frames:
            xs.append(f.attention.x)
            ys.append(f.attention.y)
            if f.hand is not None:
                xs.append(f.hand.x)
                ys.append(f.hand.y)
    if not xs:
        return 0.0
    return math.hypot(max(xs) - min(xs), max(ys) - min(ys))


@dataclass(frozen=True)
class Hotspot:
    """A frequently touched hand-machine interaction location.

    A spatio-temporal cluster of touch points: ``centroid`` is the mean of
    member positions, ``first_t``/``last_t`` bound its active interval, and
    ``member_touch_indices`` refer to positions in the touch list the
    cluster was built from.
    """

    id: int
    centroid: Point2
    touch_count: int
    first_t: float
    last_t: float
    member_touch_indices: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.touch_count != len(self.member_touch_indices):
            raise ValueError("touch_count must match member count")
        if self.first_t > self.last_t:
            raise ValueError("hotspot interval inverted")


@dataclass(frozen=True)
class Interval:
    """Half-open-by-convention time interval [start, end); may be empty."""

    start: float
    end: float

    def __post_init__(self) -> None:
        if self.end < self.start:
            raise ValueError(f"interval inverted: [{self.start}, {self.end})")

    @property
    def duration(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class OperationUnit:
    """One pure-gazing -> hand-approaching -> operating cycle.

    The three periods are contiguous: gazing ends where approaching starts,
    approaching ends where operating starts.  Gazing and approaching may be
    empty; operating is nonempty and contains at least one touching frame.
    """

    index: int
    gazing: Interval
    approaching: Interval
    operating: Interval
    hotspot_id: Optional[int] = None
    step_id: Optional[str] = None

    def __post_init__(self) -> None:
        if self.gazing.end != self.approaching.start or self.approaching.end != self.operating.start:
            raise ValueError(f"unit {self.index}: periods are not contiguous")

    @property
    def start(self) -> float:
        return self.gazing.start

    @property
    def end(self) -> float:
        return self.operating.end


def _readonly(a: np.ndarray) -> np.ndarray:
    out = np.asarray(a, dtype=float)
    if out.ndim != 1:
        raise ValueError("series must be one-dimensional")
    out = out.copy()
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class DistanceSeries:
    """A per-frame distance track between two of attention / hand / hotspot.

    ``kind`` is "AO" (attention-hotspot), "HO" (hand-hotspot) or "AH"
    (attention-hand).  Values are nonnegative scene units; the hand-hotspot
    distance is 0 at frames where the hotspot is touched.
    """

    times: np.ndarray
    values: np.ndarray
    kind: str

    def __post_init__(self) -> None:
        if self.kind not in DISTANCE_KINDS:
            raise ValueError(f"kind must be one of {DISTANCE_KINDS}, got {self.kind!r}")
        times = _readonly(self.times)
        values = _readonly(self.values)
        if len(times) != len(values):
            raise ValueError("times and values must have equal length")
        if len(times) > 1 and not np.all(np.diff(times) > 0):
            raise ValueError("times must be strictly increasing")
        if not np.all(np.isfinite(values)):
            raise ValueError("distance values must be finite")
        if len(values) and float(np.min(values)) < 0:
            raise ValueError("distance values must be >= 0")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def span(self) -> float:
        """Time covered by the samples; 0 for fewer than two samples."""
        if len(self.times) < 2:
            return 0.0
        return float(self.times[-1] - self.times[0])


@dataclass(frozen=True)
class KinematicsSummary:
    """Motion statistics of a distance series.

    ``speed`` holds per-sample distance increments; ``signs`` their
    direction (+1 / 0 / -1 after the deadband); ``sign_changes`` counts
    reversals between + and - with zeros transparent.  ``variance`` is the
    population variance of the series and is defined for any nonempty
    series; the speed-derived fields are None for series shorter than two
    samples.
    """

    n_samples: int
    variance: float
    speed: Optional[np.ndarray] = None
    signs: Optional[np.ndarray] = None
    sign_changes: Optional[int] = None
    mean_abs_speed: Optional[float] = None

    def __post_init__(self) -> None:
        if self.variance < 0:
            raise ValueError("variance must be >= 0")
        if self.sign_changes is not None and self.sign_changes < 0:
            raise ValueError("sign_changes must be >= 0")
        if self.speed is not None:
            speed = _readonly(self.speed)
            if len(speed) != self.n_samples - 1:
                raise ValueError("speed must have one value per sample interval")
            object.__setattr__(self, "speed", speed)
        if self.signs is not None:
            signs = self.signs.copy()
            signs.flags.writeable = False
            object.__setattr__(self, "signs", signs)


@dataclass(frozen=True)
class FeatureVector:
    """All per-unit behavioral features.

    Optional fields are None when undefined; ``undefined`` maps each
    undefined field to a reason code so reports can explain the gap.
    """

    ou_index: int
    hotspot_id: Optional[int]
    step_id: Optional[str]
    dur_gazing: float
    dur_approaching: float
    dur_operating: float
    ratio_gazing: float
    ratio_approaching: float
    ratio_operating: float
    operating_mean_dist: Optional[float]
    gazing_kin: Optional[KinematicsSummary]
    approaching_kin: Optional[KinematicsSummary]
    operating_kin: Optional[KinematicsSummary]
    corr_attention_hand: Optional[float]
    attention_lead_lag: Optional[float]
    early_shift_ratio: Optional[float]
    gaze_pattern: str
    shift_kind: str
    undefined: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.gaze_pattern not in GAZE_PATTERNS:
            raise ValueError(f"gaze_pattern must be one of {GAZE_PATTERNS}")
        if self.shift_kind not in SHIFT_KINDS:
            raise ValueError(f"shift_kind must be one of {SHIFT_KINDS}")
        total = self.dur_gazing + self.dur_approaching + self.dur_operating
        if total > 0:
            ratio_sum = self.ratio_gazing + self.ratio_approaching + self.ratio_operating
            if abs(ratio_sum - 1.0) > 1e-9:
                raise ValueError(f"period ratios must sum to 1, got {ratio_sum}")
        if self.early_shift_ratio is not None and not 0.0 <= self.early_shift_ratio <= 1.0:
            raise ValueError(f"early_shift_ratio out of [0,1]: {self.early_shift_ratio}")
        if self.corr_attention_hand is not None and not -1.0 <= self.corr_attention_hand <= 1.0:
            raise ValueError(f"correlation out of [-1,1]: {self.corr_attention_hand}")
        object.__setattr__(self, "undefined", dict(self.undefined))


@dataclass(frozen=True)
class Rating:
    """One rater's difficulty score for one step, on the -5..5 scale

    (most difficult to easiest)."""

    rater_id: str
    role: str
    score: int

    def __post_init__(self) -> None:
        if self.role not in RATER_ROLES:
            raise ValueError(f"role must be one of {RATER_ROLES}, got {self.role!r}")
        if not SCORE_MIN <= self.score <= SCORE_MAX:
            raise ValueError(f"score {self.score} outside [{SCORE_MIN}, {SCORE_MAX}]")


@dataclass(frozen=True)
class DifficultyRatings:
    """Per-step rater scores."""

    by_step: Mapping[str, tuple[Rating, ...]]

    def __post_init__(self) -> None:
        clean = {}
        for step_id, ratings in self.by_step.items():
            if not ratings:
                raise ValueError(f"step {step_id!r} has no raters")
            clean[step_id] = tuple(ratings)
        object.__setattr__(self, "by_step", clean)

    def step_ids(self) -> tuple[str, ...]:
        return tuple(sorted(self.by_step))

    def mean_score(self, step_id: str, role: Optional[str] = None) -> float:
        """Mean score for a step, optionally over one rater role only."""
        ratings = self.by_step[step_id]
        if role is not None:
            if role not in RATER_ROLES:
                raise ValueError(f"role must be one of {RATER_ROLES}, got {role!r}")
            ratings = tuple(r for r in ratings if r.role == role)
            if not ratings:
                raise ValueError(f"step {step_id!r} has no raters with role {role!r}")
        return sum(r.score for r in ratings) / len(ratings)

    def mean_difficulty(self, step_id: str, role: Optional[str] = None) -> float:
        """Mean rated difficulty: the negated score (the scale runs from
        most difficult at -5 to easiest at +5)."""
        return -self.mean_score(step_id, role)
