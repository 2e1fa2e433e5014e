"""Turning-point and floor-classification scoring, plus parameter sweeps.

Turning points are scored by greedy one-to-one matching between detected and
true corner positions within a match radius (interior vertices only; segment
endpoints never count). Floor accuracy is the fraction of segments whose
assigned index equals the ground-truth floor; the pressure ordering fixes the
label alignment, so no permutation search is involved.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .featurize import TurningConfig, detect_turning_points
from .floors import TrajectorySegment
from .pdr import PdrTrajectory
from .synth import GroundTruth


@dataclass(frozen=True)
class TurningScore:
    precision: float
    recall: float
    f_measure: float
    match_radius: float
    true_positives: int
    detected: int
    truth: int


def score_turnings(
    detected: Sequence[tuple[float, float]] | np.ndarray,
    truth: Sequence[tuple[float, float]] | np.ndarray,
    match_radius: float = 2.0,
) -> TurningScore:
    """Greedy nearest-first one-to-one matching within ``match_radius``.

    Empty detected counts as vacuous precision 1.0 (and likewise for empty
    truth and recall) so parameter sweeps never divide by zero.
    """
    if match_radius <= 0:
        raise ValueError("match_radius must be positive")
    det = np.asarray(detected, dtype=float).reshape(-1, 2)
    tru = np.asarray(truth, dtype=float).reshape(-1, 2)

    pairs = []
    for i, d in enumerate(det):
        for j, g in enumerate(tru):
            dist = float(math.hypot(d[0] - g[0], d[1] - g[1]))
            if dist <= match_radius:
                pairs.append((dist, i, j))
    pairs.sort()
    used_d: set[int] = set()
    used_t: set[int] = set()
    tp = 0
    for dist, i, j in pairs:
        if i in used_d or j in used_t:
            continue
        used_d.add(i)
        used_t.add(j)
        tp += 1

    precision = tp / len(det) if len(det) else 1.0
    recall = tp / len(tru) if len(tru) else 1.0
    f = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return TurningScore(precision, recall, f, match_radius, tp, len(det), len(tru))


def segment_truth_floor(segment: TrajectorySegment, truth: GroundTruth) -> int | None:
    """Majority ground-truth floor over a segment's point range (None = all transition)."""
    start, stop = segment.point_range
    counts: dict[int, int] = {}
    for f in truth.point_floors[start:stop]:
        if f is not None:
            counts[f] = counts.get(f, 0) + 1
    if not counts:
        return None
    return max(sorted(counts), key=lambda f: counts[f])


def score_floors(predicted: Sequence[int], truth: Sequence[int]) -> float:
    """Fraction of segments with the correct floor index."""
    if len(predicted) != len(truth):
        raise ValueError("predicted and truth floor lists differ in length")
    if not predicted:
        return 1.0
    hits = sum(1 for p, t in zip(predicted, truth) if p == t)
    return hits / len(predicted)


def interior_turning_points(
    traj: PdrTrajectory, segments: Sequence[TrajectorySegment], cfg: TurningConfig
) -> list[tuple[float, float]]:
    """Detected turning-point positions, excluding each segment's endpoints."""
    out: list[tuple[float, float]] = []
    for seg in segments:
        start, stop = seg.point_range
        points = traj.points[start:stop]
        if len(points) < 2:
            continue
        vertices = detect_turning_points(points, cfg)
        for v in vertices[1:-1]:
            out.append((points[v].x, points[v].y))
    return out


@dataclass(frozen=True)
class SweepRow:
    epsilon: float
    window: int
    precision: float
    recall: float
    f_measure: float


def sweep(
    corpus: Sequence[tuple[PdrTrajectory, Sequence[TrajectorySegment], GroundTruth]],
    epsilon_grid: Sequence[float],
    window_grid: Sequence[int],
    match_radius: float = 2.0,
    min_subtraj_len_m: float = 5.0,
) -> list[SweepRow]:
    """Score turning detection over an (epsilon, window) grid.

    ``corpus`` holds already-processed trajectories with their floor segments
    and ground truths; only the turning stage depends on the swept parameters,
    so re-running it per cell is equivalent to re-running the whole pipeline.
    Counts pool across trajectories (micro-average); rows come back ordered by
    (epsilon, window).
    """
    if not epsilon_grid or not window_grid:
        raise ValueError("sweep grids must be non-empty")
    rows = []
    for eps in epsilon_grid:
        for win in window_grid:
            cfg = TurningConfig(
                epsilon_rad=float(eps), window_min=int(win), min_subtraj_len_m=min_subtraj_len_m
            )
            tp = n_det = n_tru = 0
            for traj, segments, truth in corpus:
                detected = interior_turning_points(traj, segments, cfg)
                score = score_turnings(detected, truth.corner_points, match_radius)
                tp += score.true_positives
                n_det += score.detected
                n_tru += score.truth
            precision = tp / n_det if n_det else 1.0
            recall = tp / n_tru if n_tru else 1.0
            f = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
            rows.append(SweepRow(float(eps), int(win), precision, recall, f))
    return rows


def sweep_table(rows: Sequence[SweepRow]) -> str:
    lines = ["epsilon,window,precision,recall,f"]
    for r in rows:
        lines.append(f"{r.epsilon!r},{r.window},{r.precision!r},{r.recall!r},{r.f_measure!r}")
    return "\n".join(lines) + "\n"


def sweep_plot_data(rows: Sequence[SweepRow]) -> str:
    doc = {
        "rows": [
            {
                "epsilon": r.epsilon,
                "window": r.window,
                "precision": r.precision,
                "recall": r.recall,
                "f": r.f_measure,
            }
            for r in rows
        ]
    }
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"
