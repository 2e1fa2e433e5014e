import json
import math

import numpy as np
import pytest

from trackforge.logio import parse_log, serialize_log
from trackforge.stride import Gait
from trackforge.synth import (
    GroundTruth,
    WalkScript,
    WalkSegmentSpec,
    default_corpus_scripts,
    floor_pressure,
    generate,
    load_script,
    save_script,
)


def straight_script(steps=10, seed=1, **kwargs):
    return WalkScript(
        source_id="straight", seed=seed,
        segments=[WalkSegmentSpec(floor=1, gait=Gait.NORMAL, heading_rad=0.0, steps=steps)],
        **kwargs,
    )


class TestGenerate:
    def test_zero_noise_straight_truth_collinear(self):
        _, truth = generate(straight_script())
        pts = np.array(truth.points)
        assert len(pts) == 11
        assert np.allclose(pts[:, 1], 0.0)
        assert np.all(np.diff(pts[:, 0]) > 0)

    def test_seed_determinism_bit_identical(self):
        log_a, _ = generate(straight_script(seed=9))
        log_b, _ = generate(straight_script(seed=9))
        assert serialize_log(log_a) == serialize_log(log_b)

    def test_different_seeds_differ(self):
        a, _ = generate(straight_script(seed=1, noise={"accel": 0.1, "gyro": 0, "magn": 0, "baro": 0}))
        b, _ = generate(straight_script(seed=2, noise={"accel": 0.1, "gyro": 0, "magn": 0, "baro": 0}))
        assert serialize_log(a) != serialize_log(b)

    def test_three_floor_plateaus_match_closed_form(self):
        script = WalkScript(
            source_id="threefloor", seed=3, baro_bias_hpa=0.25,
            segments=[
                WalkSegmentSpec(floor=f, gait=Gait.NORMAL, heading_rad=0.0, steps=20)
                for f in (1, 2, 3)
            ],
        )
        log, truth = generate(script)
        values = np.array([s.values[0] for s in log.baro])
        for f in (1, 2, 3):
            expected = floor_pressure(f) + 0.25
            assert expected == pytest.approx(1013.25 - 0.12 * (f - 1) * 3.3 + 0.25)
            # a plateau at the scripted pressure must exist in the stream
            assert np.min(np.abs(values - expected)) < 1e-9
            assert truth.floor_pressures[f] == pytest.approx(expected)

    def test_round_trip_through_logio(self):
        log, _ = generate(straight_script(noise={"accel": 0.2, "gyro": 0.01, "magn": 0.1, "baro": 0.02}))
        assert parse_log(serialize_log(log).encode(), source_id=log.source_id) == log

    def test_wifi_draws_from_floor_pool(self):
        script = straight_script()
        log, _ = generate(script)
        assert all(obs.bssid.startswith("02:00:00:00:01:") for obs in log.wifi)

    def test_truth_shapes_consistent(self):
        script = WalkScript(
            source_id="shapes", seed=11,
            segments=[
                WalkSegmentSpec(floor=1, gait=Gait.SLOW, heading_rad=0.0, steps=12),
                WalkSegmentSpec(floor=1, gait=Gait.FAST, heading_rad=1.3, steps=12),
                WalkSegmentSpec(floor=2, gait=Gait.NORMAL, heading_rad=1.3, steps=12),
            ],
        )
        _, truth = generate(script)
        n_steps = len(truth.step_times)
        assert len(truth.points) == n_steps + 1
        assert len(truth.point_floors) == n_steps + 1
        assert len(truth.step_gaits) == n_steps == len(truth.step_headings)
        assert truth.corner_indices == [12]
        assert any(f is None for f in truth.step_floors)  # stair steps
        assert truth.step_times == sorted(truth.step_times)

    def test_validation_rejects_bad_scripts(self):
        with pytest.raises(ValueError):
            WalkScript(source_id="x", seed=0, segments=[]).validate()
        with pytest.raises(ValueError):
            generate(WalkScript(
                source_id="x", seed=0,
                segments=[WalkSegmentSpec(floor=1, gait=Gait.NORMAL, heading_rad=0.0, steps=0)],
            ))
        bad = straight_script()
        bad.wifi_leakage = 1.5
        with pytest.raises(ValueError):
            generate(bad)
        uneven = straight_script()
        uneven.segments[0].drift = [0.0] * 3
        with pytest.raises(ValueError):
            generate(uneven)


class TestScriptIO:
    def test_json_round_trip(self, tmp_path):
        script = default_corpus_scripts()[0]
        path = tmp_path / "walk.json"
        save_script(script, path)
        loaded = load_script(path)
        assert loaded == script

    def test_ground_truth_json_round_trip(self):
        _, truth = generate(straight_script())
        again = GroundTruth.from_json(json.loads(json.dumps(truth.to_json())))
        assert again == truth


class TestDefaultCorpus:
    def test_three_phones_three_floors(self, default_corpus):
        assert len(default_corpus) == 3
        for script, log, truth in default_corpus:
            floors = {s.floor for s in script.segments}
            assert floors == {1, 2, 3}
            assert abs(script.baro_bias_hpa) <= 0.5
            assert script.wifi_leakage == pytest.approx(0.1)
            assert script.noise["baro"] == pytest.approx(0.02)
            assert len(truth.corner_indices) == 6

    def test_corner_angles_at_least_1_2_rad(self, default_corpus):
        for script, _, _ in default_corpus:
            prev = None
            prev_floor = None
            for seg in script.segments:
                if prev is not None and seg.floor == prev_floor and seg.heading_rad != prev:
                    turn = abs(math.atan2(math.sin(seg.heading_rad - prev), math.cos(seg.heading_rad - prev)))
                    assert turn >= 1.2 - 1e-9
                prev, prev_floor = seg.heading_rad, seg.floor

    def test_per_step_heading_changes_bounded(self, default_corpus):
        for _, _, truth in default_corpus:
            heads = np.array(truth.step_headings)
            floors = truth.step_floors
            for k in range(1, len(heads)):
                # within one corridor (same floor, no scripted corner crossing)
                if floors[k] is not None and floors[k] == floors[k - 1] \
                        and (k not in truth.corner_indices):
                    d = abs(math.atan2(math.sin(heads[k] - heads[k - 1]),
                                       math.cos(heads[k] - heads[k - 1])))
                    if d < 1.0:  # skip corner boundaries
                        assert d <= 0.3 + 1e-9
