import numpy as np
import pytest

from bleprox.core import (
    CarryLocation,
    Channel,
    DistanceClass,
    EventFile,
    EventMetadata,
    Grain,
    Look,
    Pose,
    SensorReading,
)
from bleprox.ingest import (
    EmptyEventError,
    ParseError,
    _numeric_value,
    assemble_rows,
    encode_row,
    encode_rows,
    fit_schema,
    parse_event_text,
    read_key_file,
    read_system_output,
    serialize_event_file,
    validate_mask,
    with_angle,
)
from bleprox.synthgen import GeneratorConfig, generate_corpus, generate_event, event_rng

HEADER = """#event_id=ev0
#grain=fine
#tx_power=-55
#carry=hand
#pose=sitting
"""


def _meta(**overrides):
    fields = dict(
        event_id="ev0",
        grain=Grain.FINE,
        tx_power=-55.0,
        carry_location=CarryLocation.HAND,
        pose=Pose.SITTING,
        reference_distance=None,
    )
    fields.update(overrides)
    return EventMetadata(**fields)


def _reading(t, channel, *values):
    return SensorReading(t, channel, tuple(values))


class TestParsing:
    def test_minimal_file(self):
        text = HEADER + "0,0.000000,bluetooth,-60.0\n0,0.250000,attitude,0.1,0.2,0.3\n"
        event = parse_event_text(text)
        assert len(event.looks) == 1
        assert len(event.looks[0].readings) == 2
        assert event.metadata.tx_power == -55.0
        assert event.metadata.reference_distance is None

    def test_reference_distance_header(self):
        text = HEADER + "#reference_distance=1.2\n0,0.000000,bluetooth,-60.0\n"
        assert parse_event_text(text).metadata.reference_distance is DistanceClass.D1_2

    def test_wrong_component_count_names_line(self):
        text = HEADER + "0,0.000000,accelerometer,-60.0\n"
        with pytest.raises(ParseError, match="line 6"):
            parse_event_text(text)

    def test_unknown_channel_names_line(self):
        text = HEADER + "0,0.000000,barometer,-60.0\n"
        with pytest.raises(ParseError, match="line 6.*barometer"):
            parse_event_text(text)

    def test_non_monotone_timestamps_rejected(self):
        text = HEADER + "0,1.000000,bluetooth,-60.0\n0,0.500000,bluetooth,-61.0\n"
        with pytest.raises(ParseError, match="monotone"):
            parse_event_text(text)

    def test_missing_mandatory_header(self):
        text = "#event_id=e\n#grain=fine\n#tx_power=-55\n#carry=hand\n0,0.0,bluetooth,-60.0\n"
        with pytest.raises(ParseError, match="pose"):
            parse_event_text(text)

    def test_unknown_header_key(self):
        with pytest.raises(ParseError, match="colour"):
            parse_event_text("#colour=red\n" + HEADER)

    def test_header_after_readings_rejected(self):
        text = HEADER + "0,0.000000,bluetooth,-60.0\n#pose=walking\n"
        with pytest.raises(ParseError, match="header line after readings"):
            parse_event_text(text)

    def test_positive_rssi_rejected_at_line(self):
        text = HEADER + "0,0.000000,bluetooth,5.0\n"
        with pytest.raises(ParseError, match="line 6"):
            parse_event_text(text)

    def test_look_revisit_rejected(self):
        text = HEADER + "1,0.000000,bluetooth,-60.0\n0,5.000000,bluetooth,-60.0\n"
        with pytest.raises(ParseError, match="revisits"):
            parse_event_text(text)

    def test_round_trip_on_generator_output(self, tmp_path):
        cfg = GeneratorConfig(seed=7, events_per_class=1, grain_mix=0.0)
        generate_corpus(cfg, str(tmp_path))
        for path in sorted((tmp_path / "events").iterdir()):
            original = path.read_text()
            assert serialize_event_file(parse_event_text(original)) == original

    def test_serialize_parse_identity_in_memory(self):
        cfg = GeneratorConfig(seed=3, events_per_class=1)
        event, _ = generate_event(cfg, Grain.FINE, DistanceClass.D3_0, event_rng(cfg, 0), "e0")
        assert parse_event_text(serialize_event_file(event)) == event


class TestKeyAndOutputFiles:
    def test_key_round_trip(self, tmp_path):
        path = tmp_path / "key.tsv"
        path.write_text("a\t1.2\tfine\nb\t4.5\tcoarse\n")
        key = read_key_file(path)
        assert key == {"a": (1.2, Grain.FINE), "b": (4.5, Grain.COARSE)}

    def test_key_duplicate_rejected(self, tmp_path):
        path = tmp_path / "key.tsv"
        path.write_text("a\t1.2\tfine\na\t1.8\tfine\n")
        with pytest.raises(ParseError, match="duplicate"):
            read_key_file(path)

    def test_system_output_round_trip(self, tmp_path):
        path = tmp_path / "out.tsv"
        path.write_text("a\t1.2\nb\t3.0\n")
        assert read_system_output(path) == [("a", 1.2), ("b", 3.0)]

    def test_malformed_output_line(self, tmp_path):
        path = tmp_path / "out.tsv"
        path.write_text("a\n")
        with pytest.raises(ParseError):
            read_system_output(path)


class TestAssembly:
    def test_never_observed_channel_drops_all_rows(self):
        looks = (
            Look(0, (
                _reading(0.0, Channel.ATTITUDE, 0.1, 0.2, 0.3),
                _reading(0.0, Channel.GYROSCOPE, 0.0, 0.0, 0.0),
                _reading(0.0, Channel.ACCELEROMETER, 0.0, 0.0, 1.0),
                _reading(0.5, Channel.BLUETOOTH, -60.0),
            )),
        )
        assert assemble_rows(EventFile(_meta(), looks)) == []

    def test_carry_forward_semantics(self):
        looks = (
            Look(0, (
                _reading(1.0, Channel.ATTITUDE, 0.1, 0.2, 0.3),
                _reading(1.0, Channel.MAGNETIC_FIELD, 20.0, 1.0, -40.0),
                _reading(1.0, Channel.GYROSCOPE, 0.01, 0.02, 0.03),
                _reading(1.0, Channel.ACCELEROMETER, 0.0, 0.0, 1.0),
                _reading(2.0, Channel.BLUETOOTH, -60.0),
                _reading(3.0, Channel.BLUETOOTH, -62.0),
            )),
        )
        rows = assemble_rows(EventFile(_meta(), looks))
        assert len(rows) == 2
        for row in rows:
            assert row.attitude == (0.1, 0.2, 0.3)
            assert row.magnetic_field == (20.0, 1.0, -40.0)
        assert rows[0].rssi == -60.0 and rows[1].rssi == -62.0

    def test_no_fill_from_the_future(self):
        # channel values encode their own timestamps, so causality is visible
        def clock_reading(t, ch):
            return _reading(t, ch, t, t, t)

        looks = (
            Look(0, (
                clock_reading(0.0, Channel.ATTITUDE),
                clock_reading(0.0, Channel.MAGNETIC_FIELD),
                clock_reading(0.0, Channel.GYROSCOPE),
                clock_reading(0.0, Channel.ACCELEROMETER),
                _reading(0.5, Channel.BLUETOOTH, -60.0),
                clock_reading(1.0, Channel.ATTITUDE),
                _reading(1.5, Channel.BLUETOOTH, -61.0),
                clock_reading(2.0, Channel.ATTITUDE),
            )),
        )
        rows = assemble_rows(EventFile(_meta(), looks))
        assert len(rows) == 2
        for row in rows:
            for values in (row.attitude, row.magnetic_field, row.gyro, row.accelerometer):
                assert all(v <= row.timestamp for v in values)
        assert rows[1].attitude == (1.0, 1.0, 1.0)  # most recent at t=1.5

    def test_same_timestamp_counts_as_at_or_before(self):
        looks = (
            Look(0, (
                _reading(0.0, Channel.ATTITUDE, 9.0, 9.0, 9.0),
                _reading(0.0, Channel.MAGNETIC_FIELD, 1.0, 1.0, 1.0),
                _reading(0.0, Channel.GYROSCOPE, 1.0, 1.0, 1.0),
                _reading(0.0, Channel.ACCELEROMETER, 1.0, 1.0, 1.0),
                _reading(1.0, Channel.ATTITUDE, 5.0, 5.0, 5.0),
                _reading(1.0, Channel.BLUETOOTH, -60.0),
            )),
        )
        rows = assemble_rows(EventFile(_meta(), looks))
        assert rows[0].attitude == (5.0, 5.0, 5.0)

    def test_empty_event_error(self):
        looks = (Look(0, (_reading(0.0, Channel.ATTITUDE, 0.1, 0.2, 0.3),)),)
        with pytest.raises(EmptyEventError):
            assemble_rows(EventFile(_meta(), looks))

    def test_engineered_features(self):
        looks = (
            Look(0, (
                _reading(0.0, Channel.ATTITUDE, 0.0, 0.0, 0.0),
                _reading(0.0, Channel.MAGNETIC_FIELD, 0.0, 0.0, 0.0),
                _reading(0.0, Channel.GYROSCOPE, 0.0, 0.0, 0.0),
                _reading(0.0, Channel.ACCELEROMETER, 0.0, 0.0, 1.0),
                _reading(1.0, Channel.BLUETOOTH, -75.0),
            )),
        )
        rows = assemble_rows(EventFile(_meta(), looks))
        assert rows[0].expected_distance == pytest.approx(10.0, rel=1e-9)  # fine params
        assert rows[0].attenuation == -55.0 - (-75.0)

    def test_idempotent_when_nothing_missing(self):
        cfg = GeneratorConfig(seed=5, events_per_class=1)
        event, _ = generate_event(cfg, Grain.FINE, DistanceClass.D1_8, event_rng(cfg, 0), "e")
        rows = assemble_rows(event)
        by_ts = {}
        for r in event.readings():
            if r.channel is Channel.ATTITUDE:
                by_ts[r.timestamp] = r.values
        for row in rows:
            if row.timestamp in by_ts:
                assert row.attitude == by_ts[row.timestamp]


def _rows_fixture():
    looks = (
        Look(0, (
            _reading(0.0, Channel.ATTITUDE, 0.1, 0.2, 0.3),
            _reading(0.0, Channel.MAGNETIC_FIELD, 20.0, 1.0, -40.0),
            _reading(0.0, Channel.GYROSCOPE, 0.01, 0.02, 0.03),
            _reading(0.0, Channel.ACCELEROMETER, 0.0, 0.0, 1.0),
            _reading(0.5, Channel.BLUETOOTH, -50.0),
            _reading(1.0, Channel.BLUETOOTH, -60.0),
        )),
    )
    rows = assemble_rows(EventFile(_meta(), looks))
    return [with_angle(rows[0], 45), with_angle(rows[1], 90)]


class TestSchema:
    def test_population_std_convention(self):
        rows = _rows_fixture()
        schema = fit_schema(rows)
        i = schema.numeric_names.index("rssi")
        assert schema.means[i] == -55.0
        assert schema.stds[i] == 5.0  # divide-by-n over {-50, -60}

    def test_zero_variance_features_dropped_and_recorded(self):
        rows = _rows_fixture()
        schema = fit_schema(rows)
        assert "tx_power" in schema.dropped  # constant within the fixture
        assert "tx_power" not in schema.numeric_names

    def test_needs_two_rows(self):
        with pytest.raises(ValueError):
            fit_schema(_rows_fixture()[:1])

    def test_vector_length_contract(self):
        rows = _rows_fixture()
        schema = fit_schema(rows)
        vec = encode_row(rows[0], schema)
        want = len(schema.numeric_names) + sum(len(v) for v in schema.vocab.values())
        assert vec.shape == (want,)
        assert schema.width == want

    def test_unknown_bucket(self):
        rows = _rows_fixture()
        schema = fit_schema(rows)
        other = rows[0]
        import dataclasses

        other = dataclasses.replace(other, carry_location=CarryLocation.SHIRT)
        vec = encode_row(other, schema)
        vocab = schema.vocab["carry_location"]
        assert vocab == ("hand", "unknown")
        offset = len(schema.numeric_names)
        assert vec[offset + vocab.index("unknown")] == 1.0

    def test_angle_mask_removes_angle_block(self):
        rows = _rows_fixture()
        schema = fit_schema(rows, {"angle"})
        assert "angle" not in schema.vocab
        none_schema = fit_schema(rows)
        assert schema.width == none_schema.width - len(none_schema.vocab["angle"])

    def test_expected_distance_mask_removes_numeric(self):
        rows = _rows_fixture()
        schema = fit_schema(rows, {"expected_distance"})
        assert "expected_distance" not in schema.numeric_names
        assert "expected_distance" not in schema.dropped

    def test_coarse_grain_mask_removes_grain_and_switches_params(self):
        rows = _rows_fixture()
        schema = fit_schema(rows, {"coarse_grain"})
        assert "grain" not in schema.vocab
        row = rows[0]
        import dataclasses

        row = dataclasses.replace(row, rssi=-76.5)
        assert _numeric_value(row, "expected_distance", frozenset({"coarse_grain"})) == pytest.approx(
            10.0, rel=1e-9
        )

    def test_encode_is_pure(self):
        rows = _rows_fixture()
        schema = fit_schema(rows)
        a = encode_row(rows[0], schema)
        b = encode_row(rows[0], schema)
        assert np.array_equal(a, b)

    def test_mask_mismatch_rejected(self):
        rows = _rows_fixture()
        schema = fit_schema(rows, {"angle"})
        with pytest.raises(ValueError, match="mask"):
            encode_row(rows[0], schema, mask=frozenset())
        encode_row(rows[0], schema, mask={"angle"})  # matching mask is fine

    def test_schema_round_trip_preserves_encoding(self):
        from bleprox.ingest import EncodingSchema

        rows = _rows_fixture()
        schema = fit_schema(rows)
        clone = EncodingSchema.from_dict(schema.to_dict())
        assert np.array_equal(encode_rows(rows, schema), encode_rows(rows, clone))

    def test_validate_mask_rejects_unknown_names(self):
        with pytest.raises(ValueError):
            validate_mask({"rssi"})
