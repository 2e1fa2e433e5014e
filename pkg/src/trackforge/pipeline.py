"""End-to-end orchestration: logs -> steps -> trajectories -> floors -> graphs.

Per-file stages are independent; floor clustering joins all trajectories'
segments (floor indices only make sense across the whole corpus) and is the
one cross-file synchronization point. Files are processed in sorted order and
every output is byte-deterministic for a fixed input set and config.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import PipelineConfig
from .featurize import ChainGraph, featurize_segment_report
from .floors import TrajectorySegment, cluster_floors, segment_trajectory
from .heading import step_headings
from .logio import SensorLog, parse_log, write_chain_graphs
from .pdr import PdrTrajectory, integrate
from .stepdetect import Step, detect_steps, magnitude_series
from .stride import GaitModel, classify_gait, default_gait_model, extract_features, load_gait_model, stride_length

logger = logging.getLogger(__name__)


class PipelineError(RuntimeError):
    """Fatal condition: nothing could be processed."""


@dataclass
class ProcessedLog:
    log: SensorLog
    steps: list[Step]
    trajectory: PdrTrajectory
    segments: list[TrajectorySegment] = field(default_factory=list)


@dataclass
class FileReport:
    name: str
    steps: int = 0
    segments: int = 0
    graphs: int = 0
    dropped_subtrajectories: int = 0
    error: str | None = None


@dataclass
class RunReport:
    files: list[FileReport]
    floor_count: int = 0
    floor_pressures: list[float] = field(default_factory=list)

    def totals(self) -> dict[str, int]:
        return {
            "steps": sum(f.steps for f in self.files),
            "segments": sum(f.segments for f in self.files),
            "graphs": sum(f.graphs for f in self.files),
            "dropped_subtrajectories": sum(f.dropped_subtrajectories for f in self.files),
            "errors": sum(1 for f in self.files if f.error is not None),
        }

    def to_json(self) -> dict:
        return {
            "files": [
                {
                    "name": f.name,
                    "steps": f.steps,
                    "segments": f.segments,
                    "graphs": f.graphs,
                    "dropped_subtrajectories": f.dropped_subtrajectories,
                    "error": f.error,
                }
                for f in self.files
            ],
            "floor_count": self.floor_count,
            "floor_pressures": self.floor_pressures,
            "totals": self.totals(),
        }


def process_log(log: SensorLog, cfg: PipelineConfig, gait_model: GaitModel) -> ProcessedLog:
    """Steps -> gait/stride -> headings -> PDR trajectory for one log."""
    if not log.accel:
        raise ValueError("log has no accelerometer samples")
    times, mags = magnitude_series(log.accel, cfg.step.smooth_window)
    steps = detect_steps(times, mags, cfg.step)

    for step in steps:
        lo = int(np.searchsorted(times, step.peak_time - step.pace, side="right"))
        hi = step.peak_index + 1
        if hi - lo < 2:
            lo = max(0, hi - 2)
        step.features = extract_features(times[lo:hi], mags[lo:hi])
        gait = classify_gait(step.features, gait_model)
        step.stride_m = stride_length(gait, gait_model)

    step_headings(steps, log, cfg.heading)
    trajectory = integrate(steps, log)
    return ProcessedLog(log=log, steps=steps, trajectory=trajectory)


def load_gait_model_or_default(cfg: PipelineConfig) -> GaitModel:
    if cfg.gait_model_path:
        return load_gait_model(cfg.gait_model_path)
    return default_gait_model()


def run_pipeline(input_dir: str | Path, output_dir: str | Path, cfg: PipelineConfig) -> RunReport:
    """Process every ``*.tsl`` file under input_dir into chain-graph documents.

    Unreadable files are recorded and skipped; an empty directory or zero
    parsable files raises PipelineError. Writes one ``<stem>.graphs.json`` per
    parsed input plus ``report.json`` into output_dir.
    """
    input_dir = Path(input_dir)
    output_dir = Path(output_dir)
    files = sorted(input_dir.glob("*.tsl"))
    if not files:
        raise PipelineError(f"no .tsl files in {input_dir}")
    output_dir.mkdir(parents=True, exist_ok=True)

    gait_model = load_gait_model_or_default(cfg)
    reports: list[FileReport] = []
    processed: dict[str, ProcessedLog] = {}

    for path in files:
        report = FileReport(name=path.name)
        reports.append(report)
        try:
            log = parse_log(path.read_bytes(), source_id=path.stem)
            item = process_log(log, cfg, gait_model)
            item.segments = segment_trajectory(
                item.trajectory, cfg.floor.eps_hpa, cfg.floor.min_pts, cfg.floor.max_clusters
            )
            processed[path.name] = item
            report.steps = len(item.steps)
            report.segments = len(item.segments)
        except Exception as exc:  # recorded per-file; the run continues
            logger.error("failed to process %s: %s", path.name, exc)
            report.error = str(exc)

    if not processed:
        raise PipelineError("no input file could be processed")

    all_segments = [seg for name in sorted(processed) for seg in processed[name].segments]
    assignment = cluster_floors(all_segments, cut=cfg.floor.cut, floor_count=cfg.floors_override)

    for name in sorted(processed):
        item = processed[name]
        report = next(r for r in reports if r.name == name)
        graphs: list[ChainGraph] = []
        for seg in item.segments:
            seg_graphs, dropped = featurize_segment_report(item.trajectory, seg, cfg.turn)
            graphs.extend(seg_graphs)
            report.dropped_subtrajectories += dropped
        report.graphs = len(graphs)
        write_chain_graphs(graphs, output_dir / f"{Path(name).stem}.graphs.json")

    run_report = RunReport(
        files=reports,
        floor_count=assignment.floor_count,
        floor_pressures=assignment.cluster_pressures,
    )
    (output_dir / "report.json").write_text(
        json.dumps(run_report.to_json(), indent=1, sort_keys=True) + "\n", encoding="utf-8"
    )
    return run_report
