"""Dead-reckoning integration of detected steps into a 2-D trajectory.

Each step advances the position by (S*cos(theta), S*sin(theta)) from the
origin (0, 0). Points carry the nearest-in-time barometer reading and a
reference to the nearest WiFi scan burst within 5 s, which later stages use
for floor segmentation and vertex features.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .logio import SensorLog, WifiObservation
from .stepdetect import Step

WIFI_BATCH_GAP_S = 0.5   # observations closer than this belong to one scan burst
WIFI_MATCH_WINDOW_S = 5.0


@dataclass(frozen=True)
class WifiBatch:
    """One scan burst: observations grouped by arrival time."""

    time: float
    observations: tuple[WifiObservation, ...]

    def rss_map(self) -> dict[str, int]:
        """bssid -> strongest dBm seen in the burst."""
        out: dict[str, int] = {}
        for obs in self.observations:
            prev = out.get(obs.bssid)
            if prev is None or obs.rssi_dbm > prev:
                out[obs.bssid] = obs.rssi_dbm
        return out


@dataclass(frozen=True)
class PdrPoint:
    x: float
    y: float
    t: float
    step_index: int          # -1 for the origin
    baro_hpa: float | None
    wifi_ref: int | None     # index into the trajectory's wifi batch list


@dataclass
class PdrTrajectory:
    points: list[PdrPoint]
    step_vectors: list[tuple[float, float]]  # points[k+1] - points[k], exact
    wifi_batches: list[WifiBatch] = field(default_factory=list)
    source_id: str = ""

    def positions(self) -> np.ndarray:
        return np.array([[p.x, p.y] for p in self.points])


def pdr_update(prev: tuple[float, float], stride_m: float, theta_rad: float) -> tuple[float, float]:
    """One dead-reckoning step: (x + S cos theta, y + S sin theta)."""
    if not stride_m > 0:
        raise ValueError(f"stride must be positive, got {stride_m}")
    if not math.isfinite(theta_rad):
        raise ValueError(f"heading must be finite, got {theta_rad}")
    x, y = prev
    return x + stride_m * math.cos(theta_rad), y + stride_m * math.sin(theta_rad)


def group_wifi_batches(wifi: Sequence[WifiObservation]) -> list[WifiBatch]:
    """Group time-sorted observations into scan bursts (gap < 0.5 s)."""
    batches: list[WifiBatch] = []
    current: list[WifiObservation] = []
    for obs in wifi:
        if current and obs.app_timestamp - current[-1].app_timestamp >= WIFI_BATCH_GAP_S:
            times = [o.app_timestamp for o in current]
            batches.append(WifiBatch(time=sum(times) / len(times), observations=tuple(current)))
            current = []
        current.append(obs)
    if current:
        times = [o.app_timestamp for o in current]
        batches.append(WifiBatch(time=sum(times) / len(times), observations=tuple(current)))
    return batches


def _nearest_baro(baro_times: np.ndarray, baro_values: np.ndarray, t: float) -> float | None:
    if len(baro_times) == 0:
        return None
    pos = int(np.searchsorted(baro_times, t))
    best = None
    for idx in (pos - 1, pos):
        if 0 <= idx < len(baro_times):
            d = abs(baro_times[idx] - t)
            if best is None or d < best[0]:  # strict: ties keep the earlier sample
                best = (d, idx)
    return float(baro_values[best[1]])


def _nearest_batch(batch_times: np.ndarray, t: float) -> int | None:
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
    return int(best[1])


def integrate(steps: Sequence[Step], log: SensorLog) -> PdrTrajectory:
    """Fold pdr_update over the steps and annotate barometer/WiFi context.

    Steps must arrive time-ordered with stride_m and heading_rad filled.
    Empty steps give a single-point trajectory at the origin.
    """
    for s in steps:
        if s.stride_m is None or s.heading_rad is None:
            raise ValueError("steps must have stride_m and heading_rad filled")

    baro_times = np.array([s.app_timestamp for s in log.baro])
    baro_values = np.array([s.values[0] for s in log.baro])
    batches = group_wifi_batches(log.wifi)
    batch_times = np.array([b.time for b in batches])

    origin_t = log.accel[0].app_timestamp if log.accel else 0.0

    def make_point(x: float, y: float, t: float, step_index: int) -> PdrPoint:
        return PdrPoint(
            x=x,
            y=y,
            t=t,
            step_index=step_index,
            baro_hpa=_nearest_baro(baro_times, baro_values, t),
            wifi_ref=_nearest_batch(batch_times, t),
        )

    points = [make_point(0.0, 0.0, origin_t, -1)]
    vectors: list[tuple[float, float]] = []
    for k, step in enumerate(steps):
        x, y = pdr_update((points[-1].x, points[-1].y), step.stride_m, step.heading_rad)
        points.append(make_point(x, y, step.peak_time, k))
        # stored as the as-integrated position difference so the telescoping
        # identity point[k+1] - point[k] == step_vectors[k] is bitwise
        vectors.append((x - points[-2].x, y - points[-2].y))

    return PdrTrajectory(
        points=points, step_vectors=vectors, wifi_batches=batches, source_id=log.source_id
    )
