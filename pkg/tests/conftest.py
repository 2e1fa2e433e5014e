import pytest

from trackforge import synth
from trackforge.config import PipelineConfig
from trackforge.floors import segment_trajectory
from trackforge.pipeline import process_log
from trackforge.stride import default_gait_model


@pytest.fixture(scope="session")
def default_corpus():
    """Generated default corpus: list of (script, log, truth)."""
    out = []
    for script in synth.default_corpus_scripts():
        log, truth = synth.generate(script)
        out.append((script, log, truth))
    return out


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory, default_corpus):
    """Default corpus rendered to disk as .tsl logs with truth sidecars."""
    from trackforge.logio import serialize_log
    import json

    out = tmp_path_factory.mktemp("default-corpus")
    for script, log, truth in default_corpus:
        (out / f"{script.source_id}.tsl").write_text(serialize_log(log), encoding="utf-8")
        (out / f"{script.source_id}.truth.json").write_text(
            json.dumps(truth.to_json(), indent=1, sort_keys=True) + "\n", encoding="utf-8"
        )
    return out


@pytest.fixture(scope="session")
def processed_corpus(default_corpus):
    """(trajectory, segments, truth) per corpus log, default config."""
    cfg = PipelineConfig()
    model = default_gait_model()
    triples = []
    for _, log, truth in default_corpus:
        item = process_log(log, cfg, model)
        segments = segment_trajectory(
            item.trajectory, cfg.floor.eps_hpa, cfg.floor.min_pts, cfg.floor.max_clusters
        )
        triples.append((item.trajectory, segments, truth))
    return triples
