"""trackforge command line: run, synth, eval, sweep, train-gait.

Configuration comes from one ``key = value`` file plus flag overrides (flags
win). ``TRACKFORGE_LOG`` sets the log level (DEBUG/INFO/WARNING/...).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import evalkit, synth
from .config import ConfigError, PipelineConfig, load_config
from .logio import TslEncodingError, TslParseError, parse_log
from .pipeline import PipelineError, load_gait_model_or_default, process_log, run_pipeline
from .floors import cluster_floors, segment_trajectory
from .stepdetect import StrideFeatures
from .stride import Gait, GaitTrainingError, save_gait_model, train_gait_model

logger = logging.getLogger("trackforge")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_FATAL = 2


def _config_from_args(args: argparse.Namespace) -> PipelineConfig:
    overrides: dict[str, str] = {}
    if getattr(args, "epsilon", None) is not None:
        overrides["turn.epsilon_rad"] = str(args.epsilon)
    if getattr(args, "window", None) is not None:
        overrides["turn.window_min"] = str(args.window)
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = str(args.seed)
    cfg = load_config(getattr(args, "config", None), overrides)
    floors = getattr(args, "floors", None)
    if floors is not None and floors != "auto":
        try:
            cfg.floors_override = int(floors)
        except ValueError:
            raise ConfigError(f"--floors expects an integer or 'auto', got {floors!r}") from None
        if cfg.floors_override < 1:
            raise ConfigError("--floors must be >= 1")
    if getattr(args, "gait_model", None):
        cfg.gait_model_path = args.gait_model
    return cfg


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, default=None, help="key = value config file")
    p.add_argument("--epsilon", type=float, default=None, help="turning threshold, rad")
    p.add_argument("--window", type=int, default=None, help="turning window minimum, points")
    p.add_argument("--floors", default=None, help="floor count K, or 'auto'")
    p.add_argument("--gait-model", default=None, help="gait model file")
    p.add_argument("--seed", type=int, default=None)


def cmd_run(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    try:
        report = run_pipeline(args.input, args.output, cfg)
    except PipelineError as exc:
        logger.error("fatal: %s", exc)
        return EXIT_FATAL
    totals = report.totals()
    print(
        f"processed {len(report.files)} file(s): {totals['steps']} steps, "
        f"{totals['segments']} segments, {report.floor_count} floors, "
        f"{totals['graphs']} graphs ({totals['dropped_subtrajectories']} sub-trajectories dropped, "
        f"{totals['errors']} file errors)"
    )
    return EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
    if args.script is None and not args.default_corpus:
        logger.error("synth needs --script or --default-corpus")
        return EXIT_FATAL
    if args.script is not None:
        script = synth.load_script(args.script)
        if args.seed is not None:
            script.seed = args.seed
        scripts = [script]
    else:
        scripts = synth.default_corpus_scripts(args.seed if args.seed is not None else synth.DEFAULT_CORPUS_SEED)
    written = synth.write_corpus(scripts, args.out)
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


def _load_eval_corpus(input_dir: Path, cfg: PipelineConfig):
    """(trajectory, segments, truth) triples for every log with a truth sidecar."""
    gait_model = load_gait_model_or_default(cfg)
    corpus = []
    for log_path in sorted(input_dir.glob("*.tsl")):
        truth_path = log_path.with_suffix("").with_suffix(".truth.json")
        if not truth_path.exists():
            truth_path = log_path.parent / (log_path.stem + ".truth.json")
        if not truth_path.exists():
            logger.warning("no truth sidecar for %s, skipping", log_path.name)
            continue
        log = parse_log(log_path.read_bytes(), source_id=log_path.stem)
        item = process_log(log, cfg, gait_model)
        segments = segment_trajectory(
            item.trajectory, cfg.floor.eps_hpa, cfg.floor.min_pts, cfg.floor.max_clusters
        )
        truth = synth.GroundTruth.from_json(json.loads(truth_path.read_text(encoding="utf-8")))
        corpus.append((item.trajectory, segments, truth))
    if not corpus:
        raise PipelineError(f"no (.tsl, .truth.json) pairs in {input_dir}")
    return corpus


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    try:
        corpus = _load_eval_corpus(Path(args.input), cfg)
    except PipelineError as exc:
        logger.error("fatal: %s", exc)
        return EXIT_FATAL

    all_segments = [seg for _, segments, _ in corpus for seg in segments]
    assignment = cluster_floors(all_segments, cut=cfg.floor.cut, floor_count=cfg.floors_override)
    predicted, truths = [], []
    for _, segments, truth in corpus:
        for seg in segments:
            true_floor = evalkit.segment_truth_floor(seg, truth)
            if true_floor is not None:
                predicted.append(seg.floor)
                truths.append(true_floor)
    floor_acc = evalkit.score_floors(predicted, truths)

    tp = n_det = n_tru = 0
    for traj, segments, truth in corpus:
        detected = evalkit.interior_turning_points(traj, segments, cfg.turn)
        score = evalkit.score_turnings(detected, truth.corner_points, args.match_radius)
        tp += score.true_positives
        n_det += score.detected
        n_tru += score.truth
    precision = tp / n_det if n_det else 1.0
    recall = tp / n_tru if n_tru else 1.0
    f = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0

    result = {
        "floor_accuracy": floor_acc,
        "floor_count": assignment.floor_count,
        "segments_scored": len(predicted),
        "turning": {
            "epsilon": cfg.turn.epsilon_rad,
            "window": cfg.turn.window_min,
            "precision": precision,
            "recall": recall,
            "f": f,
        },
    }
    print(
        f"floors: {assignment.floor_count}, accuracy {floor_acc:.3f} over {len(predicted)} segments; "
        f"turning P={precision:.3f} R={recall:.3f} F={f:.3f} "
        f"(eps={cfg.turn.epsilon_rad}, t={cfg.turn.window_min})"
    )
    if args.output:
        out = Path(args.output)
        out.mkdir(parents=True, exist_ok=True)
        (out / "eval.json").write_text(json.dumps(result, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return EXIT_OK


def _parse_grid(text: str, typ):
    try:
        return [typ(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"bad grid spec {text!r}") from None


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    eps_grid = _parse_grid(args.epsilon_grid, float)
    win_grid = _parse_grid(args.window_grid, int)
    try:
        corpus = _load_eval_corpus(Path(args.input), cfg)
    except PipelineError as exc:
        logger.error("fatal: %s", exc)
        return EXIT_FATAL
    rows = evalkit.sweep(
        corpus, eps_grid, win_grid,
        match_radius=args.match_radius, min_subtraj_len_m=cfg.turn.min_subtraj_len_m,
    )
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    (out / "sweep.csv").write_text(evalkit.sweep_table(rows), encoding="utf-8")
    (out / "sweep_plot.json").write_text(evalkit.sweep_plot_data(rows), encoding="utf-8")
    best = max(rows, key=lambda r: (r.f_measure, -r.epsilon))
    print(f"{len(rows)} cells -> {out / 'sweep.csv'}; best F={best.f_measure:.3f} "
          f"at eps={best.epsilon}, t={best.window}")
    return EXIT_OK


def cmd_train_gait(args: argparse.Namespace) -> int:
    labeled: list[tuple[StrideFeatures, Gait]] = []
    try:
        lines = Path(args.labels).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        logger.error("cannot read labels: %s", exc)
        return EXIT_FATAL
    for line_no, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#") or line.startswith("duration"):
            continue
        parts = line.split(",")
        if len(parts) != 5:
            logger.error("labels line %d: expected duration,variance,peak,rms,gait", line_no)
            return EXIT_FATAL
        try:
            features = StrideFeatures(*(float(v) for v in parts[:4]))
            gait = Gait(parts[4].strip())
        except ValueError as exc:
            logger.error("labels line %d: %s", line_no, exc)
            return EXIT_FATAL
        labeled.append((features, gait))
    try:
        result = train_gait_model(labeled)
    except GaitTrainingError as exc:
        logger.error("training failed: %s", exc)
        return EXIT_FATAL
    save_gait_model(result.model, args.out)
    print(f"trained on {result.n_samples} steps, accuracy {result.accuracy:.3f} -> {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trackforge",
        description="Featured indoor motion trajectories from smartphone sensor logs",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the full pipeline over a directory of TSL logs")
    p_run.add_argument("--input", required=True, type=Path)
    p_run.add_argument("--output", required=True, type=Path)
    _add_config_flags(p_run)
    p_run.set_defaults(func=cmd_run)

    p_synth = sub.add_parser("synth", help="render synthetic walks to TSL logs with ground truth")
    p_synth.add_argument("--script", type=Path, default=None, help="WalkScript JSON file")
    p_synth.add_argument("--default-corpus", action="store_true", help="render the bundled 3-phone corpus")
    p_synth.add_argument("--out", required=True, type=Path)
    p_synth.add_argument("--seed", type=int, default=None)
    p_synth.set_defaults(func=cmd_synth)

    p_eval = sub.add_parser("eval", help="score the pipeline against truth sidecars")
    p_eval.add_argument("--input", required=True, type=Path, help="directory of .tsl + .truth.json")
    p_eval.add_argument("--output", type=Path, default=None)
    p_eval.add_argument("--match-radius", type=float, default=2.0)
    _add_config_flags(p_eval)
    p_eval.set_defaults(func=cmd_eval)

    p_sweep = sub.add_parser("sweep", help="grid-sweep turning parameters")
    p_sweep.add_argument("--input", required=True, type=Path)
    p_sweep.add_argument("--output", required=True, type=Path)
    p_sweep.add_argument("--epsilon-grid", default="0.6,0.8,1.0,1.2,1.4")
    p_sweep.add_argument("--window-grid", default="4")
    p_sweep.add_argument("--match-radius", type=float, default=2.0)
    _add_config_flags(p_sweep)
    p_sweep.set_defaults(func=cmd_sweep)

    p_train = sub.add_parser("train-gait", help="fit the gait classifier from labeled features")
    p_train.add_argument("--labels", required=True, type=Path, help="CSV: duration,variance,peak,rms,gait")
    p_train.add_argument("--out", required=True, type=Path)
    p_train.set_defaults(func=cmd_train_gait)
    return parser


def main(argv: list[str] | None = None) -> int:
    level = os.environ.get("TRACKFORGE_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        logger.error("config: %s", exc)
        return EXIT_FATAL
    except (TslParseError, TslEncodingError) as exc:
        logger.error("parse: %s", exc)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
