import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trackforge.featurize import ChainEdge, ChainGraph, ChainVertex
from trackforge.logio import (
    SensorLog,
    SensorSample,
    TslEncodingError,
    TslParseError,
    WifiObservation,
    graphs_to_document,
    parse_chain_graphs,
    parse_log,
    serialize_log,
    write_chain_graphs,
)


class TestParseBasics:
    def test_accel_line(self):
        log = parse_log(b"ACCE;1.000;1.000;0.0;0.0;9.81;3\n")
        assert len(log.accel) == 1
        s = log.accel[0]
        assert s.app_timestamp == 1.0
        assert s.values == (0.0, 0.0, 9.81)
        assert s.accuracy == 3

    def test_comment_and_empty(self):
        log = parse_log(b"% comment\n")
        assert log == SensorLog()

    def test_wifi_line(self):
        log = parse_log(b"WIFI;2.0;2.0;lab;AA:BB:CC:DD:EE:FF;2412;-60\n")
        assert len(log.wifi) == 1
        w = log.wifi[0]
        assert w.bssid == "aa:bb:cc:dd:ee:ff"  # normalized lowercase
        assert w.rssi_dbm == -60
        assert w.ssid == "lab"

    def test_pres_line(self):
        log = parse_log(b"PRES;3.5;3.5;1013.25;0\n")
        assert log.baro[0].values == (1013.25,)

    def test_unknown_tags_skipped(self):
        log = parse_log(b"GNSS;1;2;3\nACCE;1.0;1.0;0;0;9.8;3\nCELL;x\n")
        assert log.skipped_records == 2
        assert len(log.accel) == 1

    def test_streams_sorted_stably(self):
        text = (
            "ACCE;2.0;2.0;1;1;1;3\n"
            "ACCE;1.0;1.0;0;0;9.8;3\n"
            "ACCE;2.0;2.0;2;2;2;3\n"
        )
        log = parse_log(text.encode())
        assert [s.app_timestamp for s in log.accel] == [1.0, 2.0, 2.0]
        # ties keep file order
        assert log.accel[1].values[0] == 1.0
        assert log.accel[2].values[0] == 2.0


class TestParseErrors:
    @pytest.mark.parametrize(
        "line",
        [
            "ACCE;1.0;1.0;x;0;9.8;3",       # unparsable number
            "ACCE;1.0;1.0;0;0;9.8",          # field count
            "ACCE;-1.0;1.0;0;0;9.8;3",       # negative timestamp
            "PRES;1.0;1.0;nan;0",            # non-finite
            "WIFI;1.0;1.0;lab;zz:bb:cc:dd:ee:ff;2412;-60",  # bad bssid
            "WIFI;1.0;1.0;lab;aa:bb:cc:dd:ee;2412;-60",     # 5 octets
            "WIFI;1.0;1.0;lab;aa:bb:cc:dd:ee:ff;2412;-500", # rssi range
            "WIFI;1.0;1.0;lab;aa:bb:cc:dd:ee:ff;ch6;-60",   # bad int
        ],
    )
    def test_malformed_known_tag(self, line):
        with pytest.raises(TslParseError) as err:
            parse_log((line + "\n").encode())
        assert err.value.line_no == 1

    def test_error_carries_later_line_number(self):
        with pytest.raises(TslParseError) as err:
            parse_log(b"ACCE;1.0;1.0;0;0;9.8;3\nACCE;bad\n")
        assert err.value.line_no == 2

    def test_non_utf8(self):
        with pytest.raises(TslEncodingError):
            parse_log(b"\xff\xfe\x00ACCE")

    def test_fuzz_never_crashes(self):
        import random

        rng = random.Random(99)
        base = (
            "ACCE;1.0;1.0;0.1;0.2;9.8;3\nGYRO;1.0;1.0;0;0;0.1;3\n"
            "MAGN;1.0;1.0;20;5;40;3\nPRES;1.0;1.0;1013.2;0\n"
            "WIFI;1.0;1.0;lab;aa:bb:cc:dd:ee:ff;2412;-60\n"
        )
        for _ in range(500):
            chars = list(base)
            for _ in range(rng.randint(1, 6)):
                pos = rng.randrange(len(chars))
                chars[pos] = chr(rng.randrange(32, 127))
            try:
                parse_log("".join(chars).encode())
            except (TslParseError, TslEncodingError):
                pass


def _small_log():
    return SensorLog(
        accel=(SensorSample(0.01, 0.01, (0.1, -0.2, 9.81), 3),
               SensorSample(0.02, 0.02, (0.3, 0.0, 9.7999999), 3)),
        gyro=(SensorSample(0.01, 0.01, (0.0, 0.001, -0.2), 3),),
        magn=(SensorSample(0.015, 0.015, (21.5, 3.25, 40.0), 3),),
        baro=(SensorSample(0.0, 0.0, (1013.2500001,), 0),),
        wifi=(WifiObservation(0.02, 0.02, "ap", "aa:bb:cc:00:11:22", 2412, -61),),
        source_id="unit",
    )


class TestRoundTrip:
    def test_small_log_bit_exact(self):
        log = _small_log()
        again = parse_log(serialize_log(log).encode(), source_id="unit")
        assert again == log

    @given(
        st.lists(
            st.tuples(
                st.floats(min_value=0, max_value=1e6, allow_nan=False),
                st.floats(min_value=-1e3, max_value=1e3, allow_nan=False),
                st.floats(min_value=-1e3, max_value=1e3, allow_nan=False),
                st.floats(min_value=-1e3, max_value=1e3, allow_nan=False),
            ),
            min_size=1,
            max_size=30,
        )
    )
    @settings(max_examples=50, deadline=None)
    def test_accel_round_trip_property(self, rows):
        rows.sort(key=lambda r: r[0])
        log = SensorLog(
            accel=tuple(SensorSample(t, t, (x, y, z), 3) for t, x, y, z in rows)
        )
        assert parse_log(serialize_log(log).encode()) == log

    def test_serializer_rejects_separator_in_ssid(self):
        log = SensorLog(wifi=(WifiObservation(0.0, 0.0, "a;b", "aa:bb:cc:00:11:22", 2412, -60),))
        with pytest.raises(ValueError):
            serialize_log(log)


def _two_vertex_graph():
    return ChainGraph(
        floor=2,
        vertices=(
            ChainVertex(0, 0.0, 0.0, 1.0, {"aa:bb:cc:00:11:22": -60}),
            ChainVertex(5, 3.5, -1.25, 4.0, None),
        ),
        edges=(ChainEdge(3.5, -1.25),),
    )


class TestChainGraphDocuments:
    def test_empty_sequence(self, tmp_path):
        out = tmp_path / "empty.json"
        n = write_chain_graphs([], out)
        assert n == len(out.read_bytes())
        assert parse_chain_graphs(out.read_text()) == []

    def test_one_graph_counts(self):
        doc = graphs_to_document([_two_vertex_graph()])
        assert len(doc["graphs"]) == 1
        assert len(doc["graphs"][0]["vertices"]) == 2
        assert len(doc["graphs"][0]["edges"]) == 1
        assert doc["graphs"][0]["floor"] == 2

    def test_round_trip_value_equality(self, tmp_path):
        out = tmp_path / "graphs.json"
        graph = _two_vertex_graph()
        write_chain_graphs([graph], out)
        parsed = parse_chain_graphs(out.read_bytes())
        assert parsed == [graph]
