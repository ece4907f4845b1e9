"""Per-unit behavioral features from attention / hand / hotspot tracks.

The building blocks are distance series between the attention proxy (A),
the hand (H) and the unit's hotspot (O), taken over a unit's periods.
From those this module derives:

* offset-compensated distances (series minus its period minimum),
* motion kinematics: per-sample speed, direction-reversal count with a
  configurable deadband, variance,
* the early-shift ratio: the fraction of the operating period occupied by
  the trailing continuous increase of the attention-hotspot distance,
* the search / shift gazing classification and the early / non-early
  shift classification,
* attention-hand synergy: correlation of the two hotspot distances and the
  lead time of attention over the hand when approaching the hotspot,

and assembles them into a :class:`FeatureVector` per unit.  Degenerate
units never abort: fields that cannot be computed come back None with a
reason code.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .analysis import pearson
from .segmentation import period_durations
from .session import (
    DistanceSeries,
    FeatureVector,
    Hotspot,
    KinematicsSummary,
    OperationUnit,
    Session,
)

PERIODS = ("G", "H", "O", "GH", "OU")

DEFAULT_SIGN_DEADBAND = 0.0
DEFAULT_LAG_THRESHOLD = 0.2
DEFAULT_SEARCH_FREQ_MIN = 1.0
DEFAULT_EARLY_SHIFT_MIN = 0.1
MIN_OPERATING_FOR_EARLY_SHIFT = 1.0


@dataclass(frozen=True)
class FeatureParams:
    """Tunables for feature extraction.

    ``sign_deadband``: speed magnitudes at or below this count as "no
    motion" when detecting direction reversals (0 = strict sign).
    ``lag_threshold``: fraction of a series' maximum that defines reaching
    the hotspot's neighborhood for the lead-lag measurement.
    ``min_operating_for_early_shift`` stays at 1.0 s: shorter operating
    periods have no early-shift ratio.
    """

    sign_deadband: float = DEFAULT_SIGN_DEADBAND
    lag_threshold: float = DEFAULT_LAG_THRESHOLD
    min_operating_for_early_shift: float = MIN_OPERATING_FOR_EARLY_SHIFT
    search_freq_min: float = DEFAULT_SEARCH_FREQ_MIN
    early_shift_min: float = DEFAULT_EARLY_SHIFT_MIN

    def __post_init__(self) -> None:
        if self.sign_deadband < 0:
            raise ValueError("sign_deadband must be >= 0")
        if not 0.0 < self.lag_threshold < 1.0:
            raise ValueError("lag_threshold must be in (0, 1)")
        if not self.min_operating_for_early_shift > 0:
            raise ValueError("min_operating_for_early_shift must be positive")
        if self.search_freq_min < 0 or self.early_shift_min < 0:
            raise ValueError("classification thresholds must be >= 0")


def build_distance_series(
    s: Session,
    ou: OperationUnit,
    hotspot: Optional[Hotspot],
    kind: str,
    period: str = "OU",
) -> DistanceSeries:
    """Distance series of the given kind over one of a unit's periods.

    ``period`` is "G", "H", "O", "GH" (gazing + approaching, up to the
    first touch) or "OU" (the whole unit).  Frames before the operating
    period contribute only while not touching (a touching frame belongs to
    an operating period, not to this unit's gazing or approaching).  For
    the hand-involving kinds ("HO", "AH") frames without a hand in sight
    are skipped, and the hand-hotspot distance is 0 whenever the hotspot
    is touched.
    """
    if period not in PERIODS:
        raise ValueError(f"period must be one of {PERIODS}, got {period!r}")
    if kind in ("AO", "HO") and hotspot is None:
        raise ValueError(f"kind {kind!r} needs an assigned hotspot")

    bounds = {
        "G": (ou.gazing.start, ou.gazing.end),
        "H": (ou.approaching.start, ou.approaching.end),
        "GH": (ou.gazing.start, ou.operating.start),
        "O": (ou.operating.start, ou.operating.end),
        "OU": (ou.gazing.start, ou.operating.end),
    }[period]

    lo, hi = bounds
    t = s.times()
    touching = s.touching_mask
    if period in ("O", "OU"):  # these end at the last operating frame
        sel = (t >= lo) & (t <= hi)
    else:
        sel = (t >= lo) & (t < hi)
    o_start, o_end = ou.operating.start, ou.operating.end
    in_operating = (t >= o_start) & (t <= o_end)
    # contacts outside this unit's operating period are stray (previous
    # unit boundary or a dropped micro-bout) and carry no distance sample
    sel &= in_operating | ~touching
    if kind in ("HO", "AH"):
        sel &= s.hand_visible_mask

    if kind == "AO":
        delta = s.attention_xy[sel] - (hotspot.centroid.x, hotspot.centroid.y)
        values = np.hypot(delta[:, 0], delta[:, 1])
    elif kind == "HO":
        delta = s.hand_xy[sel] - (hotspot.centroid.x, hotspot.centroid.y)
        values = np.hypot(delta[:, 0], delta[:, 1])
        values[touching[sel]] = 0.0
    else:  # AH
        delta = s.attention_xy[sel] - s.hand_xy[sel]
        values = np.hypot(delta[:, 0], delta[:, 1])
    return DistanceSeries(times=t[sel], values=values, kind=kind)


def compensate_offset(d: DistanceSeries) -> DistanceSeries:
    """Subtract the series' minimum, the estimated offset between the view
    center and the actual attention location for this period.  The result
    has an exact minimum of 0."""
    if len(d) == 0:
        raise ValueError("cannot compensate an empty series")
    values = d.values - float(np.min(d.values))
    return DistanceSeries(times=d.times, values=values, kind=d.kind)


def sign_series(speed: np.ndarray, deadband: float = 0.0) -> np.ndarray:
    """Direction of each increment: +1 above the deadband, -1 below its
    negative, else 0."""
    signs = np.zeros(len(speed), dtype=int)
    signs[speed > deadband] = 1
    signs[speed < -deadband] = -1
    return signs


def count_sign_changes(signs: np.ndarray) -> int:
    """Number of reversals between + and -; zeros are transparent, so a
    plateau between opposite motions still counts as one reversal."""
    changes = 0
    last = 0
    for sgn in signs:
        if sgn == 0:
            continue
        if last != 0 and sgn != last:
            changes += 1
        last = sgn
    return changes


def kinematics(
    d_star: DistanceSeries,
    deadband: float = DEFAULT_SIGN_DEADBAND,
    sample_rate_hz: Optional[float] = None,
) -> KinematicsSummary:
    """Speed, reversal count, and variance of a distance series.

    Speed is per sample interval; ``mean_abs_speed`` is converted to
    units/second with the sample rate (derived from the series' own median
    time step when not given).  Series with fewer than two samples get
    variance only; the speed-derived fields stay None.
    """
    n = len(d_star)
    if n == 0:
        raise ValueError("kinematics needs a nonempty series")
    variance = float(np.mean((d_star.values - float(np.mean(d_star.values))) ** 2))
    if n < 2:
        return KinematicsSummary(n_samples=n, variance=variance)
    speed = np.diff(d_star.values)
    signs = sign_series(speed, deadband)
    if sample_rate_hz is None:
        step = float(np.median(np.diff(d_star.times)))
        sample_rate_hz = 1.0 / step if step > 0 else 0.0
    return KinematicsSummary(
        n_samples=n,
        variance=variance,
        speed=speed,
        signs=signs,
        sign_changes=count_sign_changes(signs),
        mean_abs_speed=float(np.mean(np.abs(speed))) * sample_rate_hz,
    )


def trailing_positive_run(d_star: DistanceSeries, deadband: float = 0.0) -> float:
    """Duration of the maximal trailing run of strictly-increasing steps.

    Zeros break the run: a pause at the end is not a continuous increase.
    0.0 for series with fewer than two samples.
    """
    if len(d_star) < 2:
        return 0.0
    signs = sign_series(np.diff(d_star.values), deadband)
    k = 0
    for sgn in signs[::-1]:
        if sgn != 1:
            break
        k += 1
    if k == 0:
        return 0.0
    return float(d_star.times[-1] - d_star.times[len(d_star) - 1 - k])


def early_shift_ratio(
    d_ao_operating: DistanceSeries,
    dur_operating: float,
    deadband: float = DEFAULT_SIGN_DEADBAND,
    min_operating: float = MIN_OPERATING_FOR_EARLY_SHIFT,
) -> Optional[float]:
    """Fraction of the operating period occupied by the trailing
    continuous increase of the attention-hotspot distance.

    None (undefined) for operating periods shorter than ``min_operating``
    seconds; otherwise in [0, 1].
    """
    if dur_operating < min_operating:
        return None
    if dur_operating <= 0:
        return None
    run = trailing_positive_run(d_ao_operating, deadband)
    return min(run / dur_operating, 1.0)


def classify_shift_kind(
    r: Optional[float], early_min: float = DEFAULT_EARLY_SHIFT_MIN
) -> str:
    """"early" when the early-shift ratio reaches ``early_min``;
    undefined ratios propagate."""
    if r is None:
        return "undefined"
    return "early" if r >= early_min else "non-early"


def classify_gaze_pattern(
    d_ao_gazing: DistanceSeries,
    deadband: float = DEFAULT_SIGN_DEADBAND,
    search_freq_min: float = DEFAULT_SEARCH_FREQ_MIN,
) -> str:
    """"search" when the attention-hotspot distance reverses direction at
    least ``search_freq_min`` times per second over the gazing period;
    otherwise (including degenerate periods) "shift"."""
    if len(d_ao_gazing) < 3:
        return "shift"
    span = d_ao_gazing.span
    if span <= 0:
        return "shift"
    changes = count_sign_changes(sign_series(np.diff(d_ao_gazing.values), deadband))
    return "search" if changes / span >= search_freq_min else "shift"


def align_series(a: DistanceSeries, b: DistanceSeries) -> tuple[np.ndarray, np.ndarray]:
    """Values of both series at their common sample times."""
    common, ia, ib = np.intersect1d(a.times, b.times, return_indices=True)
    return a.values[ia], b.values[ib]


def attention_hand_correlation(
    d_ao: DistanceSeries, d_ho: DistanceSeries
) -> Optional[float]:
    """Pearson correlation of the two hotspot distances over their common
    frames; None with fewer than three common samples or a constant
    series."""
    va, vb = align_series(d_ao, d_ho)
    if len(va) < 3:
        return None
    return pearson(va, vb)


def attention_lead_lag(
    d_ao_star: DistanceSeries,
    d_ho_star: DistanceSeries,
    lag_threshold: float = DEFAULT_LAG_THRESHOLD,
) -> Optional[float]:
    """Time by which attention reaches the hotspot's neighborhood before
    the hand, over the approach (compensated series up to the first
    touch).

    A series reaches the neighborhood at the first time it drops below
    ``lag_threshold`` x its maximum and stays below through the end of the
    approach.  Positive = attention leads.  None when either series never
    crosses.
    """
    t_attention = _arrival_time(d_ao_star, lag_threshold)
    t_hand = _arrival_time(d_ho_star, lag_threshold)
    if t_attention is None or t_hand is None:
        return None
    return t_hand - t_attention


def _arrival_time(d_star: DistanceSeries, threshold_fraction: float) -> Optional[float]:
    if len(d_star) == 0:
        return None
    peak = float(np.max(d_star.values))
    if peak <= 0:
        return None
    threshold = threshold_fraction * peak
    below = d_star.values < threshold
    if not below[-1]:
        return None
    # first index from which the series stays below the threshold
    idx = len(below) - 1
    while idx > 0 and below[idx - 1]:
        idx -= 1
    return float(d_star.times[idx])


def feature_vector(
    s: Session,
    ou: OperationUnit,
    hotspot: Optional[Hotspot],
    params: FeatureParams = FeatureParams(),
) -> FeatureVector:
    """All features of one unit; never aborts on degenerate units."""
    undefined: dict[str, str] = {}
    dur_g, dur_h, dur_o, ratio_g, ratio_h, ratio_o = period_durations(ou)

    if hotspot is None:
        for name in ("operating_mean_dist", "gazing_kinematics", "approaching_kinematics",
                     "operating_kinematics", "corr_attention_hand", "attention_lead_lag",
                     "early_shift_ratio", "gaze_pattern", "shift_kind"):
            undefined[name] = "no_hotspot"
        return FeatureVector(
            ou_index=ou.index, hotspot_id=None, step_id=ou.step_id,
            dur_gazing=dur_g, dur_approaching=dur_h, dur_operating=dur_o,
            ratio_gazing=ratio_g, ratio_approaching=ratio_h, ratio_operating=ratio_o,
            operating_mean_dist=None, gazing_kin=None, approaching_kin=None,
            operating_kin=None, corr_attention_hand=None, attention_lead_lag=None,
            early_shift_ratio=None, gaze_pattern="shift", shift_kind="undefined",
            undefined=undefined,
        )

    ao_g = build_distance_series(s, ou, hotspot, "AO", "G")
    ao_h = build_distance_series(s, ou, hotspot, "AO", "H")
    ao_o = build_distance_series(s, ou, hotspot, "AO", "O")
    ao_gh = build_distance_series(s, ou, hotspot, "AO", "GH")
    ho_gh = build_distance_series(s, ou, hotspot, "HO", "GH")
    ao_ou = build_distance_series(s, ou, hotspot, "AO", "OU")
    ho_ou = build_distance_series(s, ou, hotspot, "HO", "OU")

    kins: dict[str, Optional[KinematicsSummary]] = {}
    for key, series in (("gazing", ao_g), ("approaching", ao_h), ("operating", ao_o)):
        if len(series) == 0:
            kins[key] = None
            undefined[f"{key}_kinematics"] = "empty_period"
            continue
        summary = kinematics(compensate_offset(series), params.sign_deadband, s.sample_rate_hz)
        kins[key] = summary
        if summary.sign_changes is None:
            undefined[f"{key}_sign_changes"] = "series_too_short"

    operating_mean_dist = float(np.mean(ao_o.values)) if len(ao_o) else None
    if operating_mean_dist is None:
        undefined["operating_mean_dist"] = "empty_period"

    va, vb = align_series(ao_ou, ho_ou)
    if len(va) < 3:
        corr = None
        undefined["corr_attention_hand"] = "insufficient_samples"
    else:
        corr = pearson(va, vb)
        if corr is None:
            undefined["corr_attention_hand"] = "zero_variance"

    if len(ao_gh) == 0 or len(ho_gh) == 0:
        lag = None
        undefined["attention_lead_lag"] = "empty_approach_series"
    else:
        lag = attention_lead_lag(
            compensate_offset(ao_gh), compensate_offset(ho_gh), params.lag_threshold
        )
        if lag is None:
            undefined["attention_lead_lag"] = "no_threshold_crossing"

    if dur_o < params.min_operating_for_early_shift:
        early = None
        undefined["early_shift_ratio"] = "operating_below_min_duration"
    elif len(ao_o) == 0:
        early = None
        undefined["early_shift_ratio"] = "empty_period"
    else:
        early = early_shift_ratio(
            compensate_offset(ao_o), dur_o, params.sign_deadband,
            params.min_operating_for_early_shift,
        )

    pattern = classify_gaze_pattern(ao_g, params.sign_deadband, params.search_freq_min)
    shift_kind = classify_shift_kind(early, params.early_shift_min)
    if shift_kind == "undefined":
        undefined.setdefault("shift_kind", undefined.get("early_shift_ratio", "undefined_ratio"))

    return FeatureVector(
        ou_index=ou.index, hotspot_id=hotspot.id, step_id=ou.step_id,
        dur_gazing=dur_g, dur_approaching=dur_h, dur_operating=dur_o,
        ratio_gazing=ratio_g, ratio_approaching=ratio_h, ratio_operating=ratio_o,
        operating_mean_dist=operating_mean_dist,
        gazing_kin=kins["gazing"], approaching_kin=kins["approaching"],
        operating_kin=kins["operating"],
        corr_attention_hand=corr, attention_lead_lag=lag, early_shift_ratio=early,
        gaze_pattern=pattern, shift_kind=shift_kind, undefined=undefined,
    )
