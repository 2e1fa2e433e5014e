"""Turning-point extraction and chain-graph assembly per floor segment.

A window anchors at the last accepted vertex; its baseline is the direction of
the first displacement after the anchor. Each following point's turning angle
is the wrapped absolute difference between its incoming displacement direction
and that baseline. Points stay in the window while the angle is within
epsilon; the first point beyond epsilon marks its predecessor as a new turning
point (new anchor, window restarts), provided the window has accumulated at
least ``window_min`` points -- smaller windows swallow the deviation as noise.

Graphs then split wherever two vertices are consecutive original points
(frequent-turning noise), short leftovers are dropped, and each surviving
vertex chain becomes a ChainGraph whose edge vectors telescope exactly to the
vertex position differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .floors import TrajectorySegment
from .pdr import WIFI_MATCH_WINDOW_S, PdrPoint, PdrTrajectory, WifiBatch


@dataclass(frozen=True)
class TurningConfig:
    epsilon_rad: float = 1.0
    window_min: int = 4
    min_subtraj_len_m: float = 5.0

    def __post_init__(self):
        if self.epsilon_rad <= 0:
            raise ValueError("epsilon_rad must be positive")
        if self.window_min < 1:
            raise ValueError("window_min must be >= 1")
        if self.min_subtraj_len_m <= 0:
            raise ValueError("min_subtraj_len_m must be positive")


@dataclass(frozen=True)
class ChainVertex:
    origin_index: int          # index into the segment's point slice
    x: float
    y: float
    t: float
    rss: dict[str, int] | None

    def __eq__(self, other):
        if not isinstance(other, ChainVertex):
            return NotImplemented
        return (
            self.origin_index == other.origin_index
            and self.x == other.x
            and self.y == other.y
            and self.t == other.t
            and self.rss == other.rss
        )


@dataclass(frozen=True)
class ChainEdge:
    dx: float
    dy: float


@dataclass(frozen=True)
class ChainGraph:
    """Single-path graph: |edges| = |vertices| - 1, edge j = vertex j+1 - vertex j."""

    floor: int
    vertices: tuple[ChainVertex, ...]
    edges: tuple[ChainEdge, ...]


def _turn_angle(direction: float, baseline: float) -> float:
    """Absolute direction difference wrapped to [0, pi]."""
    d = math.fmod(direction - baseline, 2.0 * math.pi)
    if d < -math.pi:
        d += 2.0 * math.pi
    elif d > math.pi:
        d -= 2.0 * math.pi
    return abs(d)


def detect_turning_points(
    points: Sequence[PdrPoint] | np.ndarray, cfg: TurningConfig = TurningConfig()
) -> list[int]:
    """Indices of the start point, accepted turning points, and end point.

    ``points`` may be PdrPoints or an (N, 2) position array. Zero-length
    displacements contribute no turning and simply extend the window.
    """
    positions = points if isinstance(points, np.ndarray) else np.array([[p.x, p.y] for p in points])
    n = len(positions)
    if n < 2:
        raise ValueError("need at least 2 points")

    vertices = [0]
    anchor = 0
    baseline = None
    window_len = 1  # the anchor itself
    j = 1
    while j < n:
        delta = positions[j] - positions[j - 1]
        if float(np.hypot(delta[0], delta[1])) < 1e-12:
            window_len += 1
            j += 1
            continue
        direction = math.atan2(delta[1], delta[0])
        if baseline is None:
            baseline = direction  # first post-anchor displacement
            window_len += 1
            j += 1
            continue
        alpha = _turn_angle(direction, baseline)
        if alpha <= cfg.epsilon_rad or window_len < cfg.window_min:
            window_len += 1
            j += 1
        else:
            vertices.append(j - 1)
            anchor = j - 1
            baseline = None
            window_len = 1
            # j is re-examined against the new window; its displacement from
            # the new anchor establishes the next baseline
    if vertices[-1] != n - 1:
        vertices.append(n - 1)
    return vertices


def _group_at_successive(vertices: Sequence[int]) -> list[list[int]]:
    """Cut the vertex chain wherever two vertices are consecutive points."""
    groups: list[list[int]] = []
    current: list[int] = []
    for v in vertices:
        if current and v == current[-1] + 1:
            groups.append(current)
            current = [v]
        else:
            current.append(v)
    if current:
        groups.append(current)
    return groups


def split_frequent_turnings(
    points: Sequence[PdrPoint] | np.ndarray,
    vertices: Sequence[int],
    cfg: TurningConfig = TurningConfig(),
) -> list[list[int]]:
    """Split the vertex chain at consecutive-index vertex pairs; drop shorts.

    Two vertices on successive original points mean the user was turning every
    step, so the chain is cut between them. Afterwards any piece with fewer
    than two vertices or a path length under ``min_subtraj_len_m`` is removed.
    """
    positions = points if isinstance(points, np.ndarray) else np.array([[p.x, p.y] for p in points])
    groups = _group_at_successive(vertices)

    step_lengths = np.hypot(*(np.diff(positions, axis=0).T)) if len(positions) > 1 else np.array([])

    kept = []
    for group in groups:
        if len(group) < 2:
            continue
        path_len = float(step_lengths[group[0]:group[-1]].sum())
        if path_len >= cfg.min_subtraj_len_m:
            kept.append(group)
    return kept


def build_chain_graph(
    points: Sequence[PdrPoint],
    vertices: Sequence[int],
    wifi_batches: Sequence[WifiBatch],
    floor: int,
) -> ChainGraph | None:
    """Assemble one chain graph from a vertex index list over segment points.

    Edge vectors are the position differences between consecutive vertices
    (the telescoped sum of the per-step motion vectors in between). Each
    vertex's RSS feature is the nearest WiFi burst within 5 s, if any.
    """
    if len(vertices) < 2:
        return None
    batch_times = np.array([b.time for b in wifi_batches])

    def rss_for(t: float) -> dict[str, int] | None:
        if len(batch_times) == 0:
            return None
        pos = int(np.searchsorted(batch_times, t))
        best = None
        for idx in (pos - 1, pos):
            if 0 <= idx < len(batch_times):
                d = abs(batch_times[idx] - t)
                if best is None or d < best[0]:
                    best = (d, idx)
        if best is None or best[0] > WIFI_MATCH_WINDOW_S:
            return None
        return wifi_batches[best[1]].rss_map()

    vs = []
    for v in vertices:
        p = points[v]
        vs.append(ChainVertex(origin_index=v, x=p.x, y=p.y, t=p.t, rss=rss_for(p.t)))
    edges = tuple(
        ChainEdge(dx=b.x - a.x, dy=b.y - a.y) for a, b in zip(vs, vs[1:])
    )
    return ChainGraph(floor=floor, vertices=tuple(vs), edges=edges)


def featurize_segment(
    traj: PdrTrajectory,
    segment: TrajectorySegment,
    cfg: TurningConfig = TurningConfig(),
) -> list[ChainGraph]:
    """Turning points -> frequent-turning split -> chain graphs, in order."""
    graphs, _ = featurize_segment_report(traj, segment, cfg)
    return graphs


def featurize_segment_report(
    traj: PdrTrajectory,
    segment: TrajectorySegment,
    cfg: TurningConfig = TurningConfig(),
) -> tuple[list[ChainGraph], int]:
    """featurize_segment plus the number of dropped sub-trajectories."""
    start, stop = segment.point_range
    points = traj.points[start:stop]
    if len(points) < 2:
        return [], 0
    vertices = detect_turning_points(points, cfg)
    raw_groups = _group_at_successive(vertices)
    groups = split_frequent_turnings(points, vertices, cfg)
    graphs = []
    for group in groups:
        graph = build_chain_graph(points, group, traj.wifi_batches, segment.floor or 0)
        if graph is not None:
            graphs.append(graph)
    return graphs, len(raw_groups) - len(graphs)
