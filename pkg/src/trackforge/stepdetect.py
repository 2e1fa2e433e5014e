"""Footfall detection on accelerometer magnitude with adaptive jerk/pace thresholds.

A step candidate is a local peak paired with the next local valley on the
smoothed magnitude signal. Candidates are accepted when both the jerk
(peak-to-valley magnitude drop) and the pace (time since the previous accepted
step's peak) clear the current thresholds. Accepted (jerk, pace) pairs feed a
bounded FIFO buffer, and each threshold tracks ``update_ratio * mean(buffer)``
clamped to its configured floor (and ceiling, for pace), so the detector adapts
to the signal energy of the current carrier/placement.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.signal import find_peaks

from .logio import SensorSample


@dataclass(frozen=True)
class StepConfig:
    """Detector defaults; all overridable via the ``step.*`` config keys."""

    jerk_init: float = 1.0      # m/s^2
    jerk_floor: float = 0.6     # m/s^2
    pace_init: float = 0.25     # s
    pace_floor: float = 0.2     # s
    pace_ceiling: float = 2.0   # s
    buffer_capacity: int = 10
    update_ratio: float = 0.5
    smooth_window: int = 5      # samples
    min_prominence: float = 0.2  # m/s^2, suppresses quantization chatter


@dataclass
class AdaptiveThresholds:
    """Mutable detector state: current thresholds plus the (jerk, pace) buffer."""

    jerk_threshold: float
    pace_threshold: float
    buffer: deque = field(default_factory=deque)
    buffer_capacity: int = 10
    jerk_floor: float = 0.6
    pace_floor: float = 0.2
    pace_ceiling: float = 2.0
    update_ratio: float = 0.5

    @classmethod
    def from_config(cls, cfg: StepConfig) -> "AdaptiveThresholds":
        return cls(
            jerk_threshold=cfg.jerk_init,
            pace_threshold=cfg.pace_init,
            buffer=deque(maxlen=cfg.buffer_capacity),
            buffer_capacity=cfg.buffer_capacity,
            jerk_floor=cfg.jerk_floor,
            pace_floor=cfg.pace_floor,
            pace_ceiling=cfg.pace_ceiling,
            update_ratio=cfg.update_ratio,
        )

    def accept(self, jerk: float, pace: float) -> None:
        """Push an accepted step's stats and re-derive both thresholds."""
        self.buffer.append((jerk, pace))
        jerks = [j for j, _ in self.buffer]
        paces = [p for _, p in self.buffer]
        self.jerk_threshold = max(self.jerk_floor, self.update_ratio * sum(jerks) / len(jerks))
        self.pace_threshold = min(
            self.pace_ceiling,
            max(self.pace_floor, self.update_ratio * sum(paces) / len(paces)),
        )


@dataclass
class StrideFeatures:
    stride_duration: float   # s
    accel_variance: float    # (m/s^2)^2
    accel_peak: float        # m/s^2
    accel_rms: float         # m/s^2

    def as_vector(self) -> np.ndarray:
        return np.array(
            [self.stride_duration, self.accel_variance, self.accel_peak, self.accel_rms]
        )


@dataclass
class Step:
    """One detected footfall. stride/heading/features are filled downstream."""

    peak_index: int
    valley_index: int
    peak_time: float
    valley_time: float
    jerk: float
    pace: float
    features: StrideFeatures | None = None
    stride_m: float | None = None
    heading_rad: float | None = None


def moving_average(values: np.ndarray, window: int) -> np.ndarray:
    """Centered moving average with shrinking edge windows (constant-preserving)."""
    if window <= 1:
        return np.asarray(values, dtype=float).copy()
    values = np.asarray(values, dtype=float)
    n = len(values)
    half = window // 2
    csum = np.concatenate(([0.0], np.cumsum(values)))
    lo = np.maximum(np.arange(n) - half, 0)
    hi = np.minimum(np.arange(n) + half + 1, n)
    return (csum[hi] - csum[lo]) / (hi - lo)


def magnitude_series(
    accel: Sequence[SensorSample], smooth_window: int = 5
) -> tuple[np.ndarray, np.ndarray]:
    """Euclidean norm of each accel sample, low-pass smoothed by moving average.

    Returns (times, magnitudes), same length and order as the input stream.
    """
    if not accel:
        raise ValueError("accel stream is empty")
    times = np.array([s.app_timestamp for s in accel])
    comps = np.array([s.values for s in accel])
    mags = np.linalg.norm(comps, axis=1)
    return times, moving_average(mags, smooth_window)


def detect_steps(
    times: np.ndarray,
    magnitudes: np.ndarray,
    cfg: StepConfig = StepConfig(),
    state: AdaptiveThresholds | None = None,
) -> list[Step]:
    """Detect steps on a smoothed (time, magnitude) series.

    Peak/valley candidates come from local extrema with a minimum prominence of
    ``cfg.min_prominence``; acceptance and threshold adaptation follow the
    jerk/pace buffer scheme described in the module docstring. Deterministic:
    identical input and config give identical output.
    """
    times = np.asarray(times, dtype=float)
    magnitudes = np.asarray(magnitudes, dtype=float)
    if len(times) == 0:
        return []
    if state is None:
        state = AdaptiveThresholds.from_config(cfg)

    peaks, _ = find_peaks(magnitudes, prominence=cfg.min_prominence)
    valleys, _ = find_peaks(-magnitudes, prominence=cfg.min_prominence)
    if len(peaks) == 0 or len(valleys) == 0:
        return []

    steps: list[Step] = []
    last_valley = -1
    last_peak_time: float | None = None
    vi = 0
    for p in peaks:
        if p <= last_valley:
            continue  # keeps accepted steps non-overlapping
        while vi < len(valleys) and valleys[vi] <= p:
            vi += 1
        if vi >= len(valleys):
            break
        v = valleys[vi]
        jerk = magnitudes[p] - magnitudes[v]
        if last_peak_time is None:
            pace = times[v] - times[p]
        else:
            pace = times[p] - last_peak_time
        if jerk <= 0 or pace <= 0:
            continue
        if jerk >= state.jerk_threshold and pace >= state.pace_threshold:
            steps.append(
                Step(
                    peak_index=int(p),
                    valley_index=int(v),
                    peak_time=float(times[p]),
                    valley_time=float(times[v]),
                    jerk=float(jerk),
                    pace=float(pace),
                )
            )
            state.accept(float(jerk), float(pace))
            last_valley = v
            last_peak_time = times[p]
    return steps
