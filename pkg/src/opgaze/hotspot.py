"""Hotspot detection by spatio-temporal clustering of touch points.

Two touches are neighbors when they are within ``spatial_eps`` scene units
AND within ``temporal_gap_max`` seconds of each other; hotspots are the
connected components of that neighbor graph with at least ``min_points``
members.  Touches in smaller components are noise but stay countable.

Also computes the accumulated touch distribution (centroid, bias relative
to the attention point, covariance) across sessions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .session import Hotspot, Point2, Session, scene_diagonal

DEFAULT_EPS_DIAGONAL_FRACTION = 0.05
DEFAULT_TEMPORAL_GAP_MAX = 3.0
DEFAULT_MIN_POINTS = 3

Touch = tuple[float, Point2]


@dataclass(frozen=True)
class ClusterParams:
    """Neighborhood thresholds for touch clustering.

    ``spatial_eps`` of None means "resolve from the data": 5% of the scene
    diagonal of the sessions being analyzed.
    """

    spatial_eps: Optional[float] = None
    temporal_gap_max: float = DEFAULT_TEMPORAL_GAP_MAX
    min_points: int = DEFAULT_MIN_POINTS

    def __post_init__(self) -> None:
        if self.spatial_eps is not None and not self.spatial_eps > 0:
            raise ValueError("spatial_eps must be strictly positive")
        if not self.temporal_gap_max > 0:
            raise ValueError("temporal_gap_max must be strictly positive")
        if not self.min_points > 0:
            raise ValueError("min_points must be strictly positive")

    def resolve(self, sessions: Session | Sequence[Session]) -> "ClusterParams":
        """Return params with a concrete spatial_eps for these sessions."""
        if self.spatial_eps is not None:
            return self
        diag = scene_diagonal(sessions)
        eps = DEFAULT_EPS_DIAGONAL_FRACTION * diag
        if eps <= 0:
            eps = 1.0  # degenerate scene: all points coincide
        return ClusterParams(spatial_eps=eps,
                             temporal_gap_max=self.temporal_gap_max,
                             min_points=self.min_points)


@dataclass(frozen=True)
class TouchDistribution:
    """Accumulated touch statistics: where operators touch relative to
    where they look."""

    centroid: Point2
    bias_vector: Point2
    covariance: tuple[tuple[float, float], tuple[float, float]]
    touch_count: int

    def __post_init__(self) -> None:
        (cxx, cxy), (cyx, cyy) = self.covariance
        if abs(cxy - cyx) > 1e-9:
            raise ValueError("covariance must be symmetric")
        # PSD check for a symmetric 2x2: nonnegative diagonal and determinant
        if cxx < 0 or cyy < 0 or cxx * cyy - cxy * cyx < -1e-9:
            raise ValueError("covariance must be positive semi-definite")


def extract_touches(s: Session) -> list[Touch]:
    """All (t, hand position) pairs for frames with physical contact."""
    return [(f.t, f.hand) for f in s.frames if f.touching]


class _UnionFind:
    def __init__(self, n: int) -> None:
        self.parent = list(range(n))

    def find(self, i: int) -> int:
        root = i
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[i] != root:
            self.parent[i], i = root, self.parent[i]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


def cluster_touches(touches: Sequence[Touch], params: ClusterParams) -> list[Hotspot]:
    """Cluster touches into hotspots.

    Input touches are expected time-ordered (as produced by
    :func:`extract_touches`); they are canonicalized internally, so the
    result does not depend on input order.  Hotspots are ordered by first
    touch time and numbered from 0; member indices refer to positions in
    the input sequence.
    """
    if params.spatial_eps is None:
        raise ValueError("spatial_eps unresolved; call ClusterParams.resolve first")
    n = len(touches)
    if n == 0:
        return []

    order = sorted(range(n), key=lambda i: (touches[i][0], touches[i][1].x, touches[i][1].y, i))
    times = np.array([touches[i][0] for i in order], dtype=float)
    xs = np.array([touches[i][1].x for i in order], dtype=float)
    ys = np.array([touches[i][1].y for i in order], dtype=float)

    uf = _UnionFind(n)
    eps_sq = params.spatial_eps ** 2
    lo = 0
    for i in range(n):
        # only earlier touches within the temporal window can be neighbors
        while times[i] - times[lo] > params.temporal_gap_max:
            lo += 1
        if lo == i:
            continue
        dx = xs[lo:i] - xs[i]
        dy = ys[lo:i] - ys[i]
        close = np.nonzero(dx * dx + dy * dy <= eps_sq)[0]
        for j in close:
            uf.union(i, int(lo + j))

    components: dict[int, list[int]] = {}
    for i in range(n):
        components.setdefault(uf.find(i), []).append(i)

    hotspots: list[Hotspot] = []
    kept = [sorted(m) for m in components.values() if len(m) >= params.min_points]
    kept.sort(key=lambda m: float(times[m[0]]))
    for cluster_id, members in enumerate(kept):
        cx = float(np.mean(xs[members]))
        cy = float(np.mean(ys[members]))
        member_input_indices = tuple(sorted(order[i] for i in members))
        hotspots.append(Hotspot(
            id=cluster_id,
            centroid=Point2(cx, cy),
            touch_count=len(members),
            first_t=float(times[members[0]]),
            last_t=float(times[members[-1]]),
            member_touch_indices=member_input_indices,
        ))
    return hotspots


def noise_indices(touches: Sequence[Touch], hotspots: Sequence[Hotspot]) -> list[int]:
    """Input indices of touches that belong to no hotspot."""
    member = set()
    for h in hotspots:
        member.update(h.member_touch_indices)
    return [i for i in range(len(touches)) if i not in member]


def assign_operating_hotspot(
    ou_touches: Sequence[Touch], hotspots: Sequence[Hotspot]
) -> Optional[int]:
    """Hotspot whose centroid is nearest the mean of a unit's touch
    positions; ties break toward the lower id.  None when there are no
    hotspots to assign (flagged on the unit)."""
    if not hotspots:
        return None
    if not ou_touches:
        raise ValueError("ou_touches must be nonempty")
    mx = sum(p.x for _, p in ou_touches) / len(ou_touches)
    my = sum(p.y for _, p in ou_touches) / len(ou_touches)
    mean = Point2(mx, my)
    best_id = None
    best_dist = None
    for h in sorted(hotspots, key=lambda h: h.id):
        d = mean.distance_to(h.centroid)
        if best_dist is None or d < best_dist:
            best_id, best_dist = h.id, d
    return best_id


def touch_distribution(sessions: Session | Sequence[Session]) -> TouchDistribution:
    """Accumulated touch centroid, bias, and covariance across sessions.

    The bias vector is the touch centroid minus the mean attention point
    over the same (touching) frames: how far contact sits from where the
    operator is looking when touching.
    """
    if isinstance(sessions, Session):
        sessions = [sessions]
    px: list[float] = []
    py: list[float] = []
    att_x: list[float] = []
    att_y: list[float] = []
    for s in sessions:
        for f in s.frames:
            if f.touching:
                px.append(f.hand.x)
                py.append(f.hand.y)
                att_x.append(f.attention.x)
                att_y.append(f.attention.y)
    if not px:
        raise ValueError("no touches across sessions")
    xs = np.array(px)
    ys = np.array(py)
    cx, cy = float(np.mean(xs)), float(np.mean(ys))
    bias = Point2(cx - float(np.mean(att_x)), cy - float(np.mean(att_y)))
    dx = xs - cx
    dy = ys - cy
    n = len(xs)
    cxx = float(np.dot(dx, dx) / n)
    cyy = float(np.dot(dy, dy) / n)
    cxy = float(np.dot(dx, dy) / n)
    return TouchDistribution(
        centroid=Point2(cx, cy),
        bias_vector=bias,
        covariance=((cxx, cxy), (cxy, cyy)),
        touch_count=n,
    )


def touch_distribution_plot_data(
    dist: TouchDistribution, sessions: Session | Sequence[Session]
) -> dict:
    """Plot-ready payload: the distribution plus the raw touch points."""
    if isinstance(sessions, Session):
        sessions = [sessions]
    points = [[f.hand.x, f.hand.y] for s in sessions for f in s.frames if f.touching]
    return {
        "centroid": [dist.centroid.x, dist.centroid.y],
        "bias": [dist.bias_vector.x, dist.bias_vector.y],
        "covariance": [list(row) for row in dist.covariance],
        "touch_count": dist.touch_count,
        "points": points,
    }
