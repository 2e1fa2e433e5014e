import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trackforge.evalkit import (
    SweepRow,
    score_floors,
    score_turnings,
    sweep,
    sweep_plot_data,
    sweep_table,
)


class TestScoreTurnings:
    def test_exact_match(self):
        pts = [(0.0, 0.0), (5.0, 5.0)]
        score = score_turnings(pts, pts)
        assert (score.precision, score.recall, score.f_measure) == (1.0, 1.0, 1.0)

    def test_empty_detected_vacuous_precision(self):
        score = score_turnings([], [(0.0, 0.0)])
        assert score.precision == 1.0
        assert score.recall == 0.0
        assert score.f_measure == 0.0

    def test_empty_truth_vacuous_recall(self):
        score = score_turnings([(0.0, 0.0)], [])
        assert score.recall == 1.0
        assert score.precision == 0.0

    def test_matching_is_one_to_one(self):
        detected = [(0.0, 0.0), (0.1, 0.0), (0.2, 0.0)]
        truth = [(0.0, 0.05)]
        score = score_turnings(detected, truth)
        assert score.true_positives == 1
        assert score.precision == pytest.approx(1 / 3)

    def test_match_radius_enforced(self):
        score = score_turnings([(0.0, 0.0)], [(5.0, 0.0)], match_radius=2.0)
        assert score.true_positives == 0

    def test_greedy_prefers_nearest(self):
        detected = [(0.0, 0.0), (1.0, 0.0)]
        truth = [(0.9, 0.0)]
        score = score_turnings(detected, truth, match_radius=2.0)
        assert score.true_positives == 1

    def test_invalid_radius(self):
        with pytest.raises(ValueError):
            score_turnings([], [], match_radius=0.0)

    @given(
        st.lists(st.tuples(st.floats(-50, 50), st.floats(-50, 50)), max_size=12),
        st.lists(st.tuples(st.floats(-50, 50), st.floats(-50, 50)), max_size=12),
    )
    @settings(max_examples=80, deadline=None)
    def test_bounds_and_f_inequality(self, detected, truth):
        s = score_turnings(detected, truth)
        assert 0.0 <= s.precision <= 1.0
        assert 0.0 <= s.recall <= 1.0
        assert 0.0 <= s.f_measure <= 1.0
        assert s.true_positives <= min(len(detected), len(truth)) or not detected or not truth
        assert s.f_measure <= (s.precision + s.recall) / 2 + 1e-12


class TestScoreFloors:
    def test_perfect(self):
        assert score_floors([1, 2, 3], [1, 2, 3]) == 1.0

    def test_one_of_four_wrong(self):
        assert score_floors([1, 2, 3, 3], [1, 2, 3, 2]) == 0.75

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            score_floors([1], [1, 2])


class TestSweep:
    def test_single_cell_equals_score_turnings(self, processed_corpus):
        rows = sweep(processed_corpus, [1.0], [4])
        assert len(rows) == 1
        row = rows[0]
        # recompute the pooled score by hand
        from trackforge.evalkit import interior_turning_points
        from trackforge.featurize import TurningConfig

        tp = det = tru = 0
        cfg = TurningConfig(epsilon_rad=1.0, window_min=4)
        for traj, segments, truth in processed_corpus:
            detected = interior_turning_points(traj, segments, cfg)
            s = score_turnings(detected, truth.corner_points)
            tp += s.true_positives
            det += s.detected
            tru += s.truth
        assert row.precision == pytest.approx(tp / det if det else 1.0)
        assert row.recall == pytest.approx(tp / tru if tru else 1.0)

    def test_rows_ordered_and_deterministic(self, processed_corpus):
        grid_e = [1.2, 0.6]
        grid_w = [4, 1]
        rows_a = sweep(processed_corpus, sorted(grid_e), sorted(grid_w))
        rows_b = sweep(processed_corpus, sorted(grid_e), sorted(grid_w))
        assert rows_a == rows_b
        keys = [(r.epsilon, r.window) for r in rows_a]
        assert keys == sorted(keys)

    def test_empty_grid_rejected(self, processed_corpus):
        with pytest.raises(ValueError):
            sweep(processed_corpus, [], [4])

    def test_table_and_plot_output(self):
        rows = [SweepRow(1.0, 4, 1.0, 0.5, 2 / 3)]
        table = sweep_table(rows)
        lines = table.strip().split("\n")
        assert lines[0] == "epsilon,window,precision,recall,f"
        assert lines[1].startswith("1.0,4,1.0,0.5,")
        plot = sweep_plot_data(rows)
        assert '"epsilon": 1.0' in plot
