import math

import pytest
from hypothesis import given, strategies as st

from bleprox.core import (
    COARSE_PATH_LOSS,
    DISTANCE_CLASSES,
    FINE_PATH_LOSS,
    MIDPOINT_PATH_LOSS,
    Channel,
    DistanceClass,
    EventFile,
    EventMetadata,
    Grain,
    Look,
    PathLossParams,
    ProtocolError,
    SensorReading,
    attenuation,
    classes_for_grain,
    expected_distance,
    params_for_grain,
    quantize_distance,
)


class TestQuantize:
    @pytest.mark.parametrize(
        "metres,expected",
        [
            (0.9, DistanceClass.D1_2),
            (1.2, DistanceClass.D1_2),
            (1.5, DistanceClass.D1_8),
            (1.8, DistanceClass.D1_8),
            (2.4, DistanceClass.D3_0),
            (2.7, DistanceClass.D3_0),
            (3.0, DistanceClass.D3_0),
            (3.6, DistanceClass.D4_5),
            (4.5, DistanceClass.D4_5),
        ],
    )
    def test_bands(self, metres, expected):
        assert quantize_distance(metres) is expected

    @pytest.mark.parametrize("metres", [0.8, 1.3, 2.0, 3.2, 5.0, -1.0])
    def test_out_of_band_rejected(self, metres):
        with pytest.raises(ProtocolError):
            quantize_distance(metres)

    def test_round_trip_on_class_values(self):
        for cls in DISTANCE_CLASSES:
            assert quantize_distance(cls.metres) is cls
            assert DistanceClass.from_metres(cls.metres) is cls

    def test_from_metres_rejects_non_class(self):
        with pytest.raises(ProtocolError):
            DistanceClass.from_metres(2.0)


class TestPathLoss:
    def test_rssi_equal_to_tx_gives_one_metre_exactly(self):
        assert expected_distance(-52.0, COARSE_PATH_LOSS) == 1.0
        assert expected_distance(-54.0, FINE_PATH_LOSS) == 1.0

    def test_hand_computed_ten_metres(self):
        # 10^((-52+78)/26) and 10^((-54+75)/21) are both exactly one decade
        assert expected_distance(-78.0, COARSE_PATH_LOSS) == pytest.approx(10.0, rel=1e-9)
        assert expected_distance(-75.0, FINE_PATH_LOSS) == pytest.approx(10.0, rel=1e-9)

    def test_midpoint_params_ten_metres(self):
        assert expected_distance(-76.5, MIDPOINT_PATH_LOSS) == pytest.approx(10.0, rel=1e-9)

    @given(st.floats(min_value=-120, max_value=0))
    def test_always_positive(self, rssi):
        assert expected_distance(rssi, COARSE_PATH_LOSS) > 0

    @given(
        st.floats(min_value=-120, max_value=-1),
        st.floats(min_value=0.01, max_value=40),
    )
    def test_strictly_decreasing_in_rssi(self, rssi, gap):
        params = FINE_PATH_LOSS
        assert expected_distance(rssi, params) > expected_distance(rssi + gap, params)

    def test_exponent_must_be_positive(self):
        with pytest.raises(ValueError):
            PathLossParams(-52.0, 0.0)

    def test_params_for_grain(self):
        assert params_for_grain(Grain.COARSE) == COARSE_PATH_LOSS
        assert params_for_grain(Grain.FINE) == FINE_PATH_LOSS


class TestAttenuation:
    @pytest.mark.parametrize(
        "tx,rssi,expected",
        [(-52.0, -60.0, 8.0), (-52.0, -52.0, 0.0), (-54.0, -80.0, 26.0)],
    )
    def test_fixtures(self, tx, rssi, expected):
        assert attenuation(tx, rssi) == expected

    @given(st.integers(min_value=-100, max_value=0), st.integers(min_value=-120, max_value=0))
    def test_identity_exact_on_integer_dbm(self, tx, rssi):
        assert attenuation(float(tx), float(rssi)) + rssi == tx

    @given(
        st.floats(min_value=-100, max_value=0),
        st.floats(min_value=-120, max_value=0),
    )
    def test_identity_within_float_precision(self, tx, rssi):
        assert math.isclose(attenuation(tx, rssi) + rssi, tx, rel_tol=0, abs_tol=1e-10)


class TestDomainTypes:
    def test_grain_class_sets(self):
        assert classes_for_grain(Grain.COARSE) == (DistanceClass.D1_8, DistanceClass.D4_5)
        assert classes_for_grain(Grain.FINE) == DISTANCE_CLASSES

    def test_reading_component_count_enforced(self):
        with pytest.raises(ValueError):
            SensorReading(0.0, Channel.ACCELEROMETER, (1.0,))
        with pytest.raises(ValueError):
            SensorReading(0.0, Channel.BLUETOOTH, (-50.0, 1.0))

    def test_rssi_must_be_nonpositive(self):
        with pytest.raises(ValueError):
            SensorReading(0.0, Channel.BLUETOOTH, (3.0,))
        SensorReading(0.0, Channel.BLUETOOTH, (0.0,))  # boundary is legal

    def test_look_rejects_decreasing_timestamps(self):
        r1 = SensorReading(1.0, Channel.BLUETOOTH, (-50.0,))
        r2 = SensorReading(0.5, Channel.BLUETOOTH, (-50.0,))
        with pytest.raises(ValueError):
            Look(0, (r1, r2))

    def test_look_rejects_span_over_four_seconds(self):
        r1 = SensorReading(0.0, Channel.BLUETOOTH, (-50.0,))
        r2 = SensorReading(4.5, Channel.BLUETOOTH, (-50.0,))
        with pytest.raises(ValueError):
            Look(0, (r1, r2))

    def test_event_requires_ordered_looks(self):
        meta = EventMetadata("e0", Grain.FINE, -55.0, *_carry_pose())
        early = Look(1, (SensorReading(0.0, Channel.BLUETOOTH, (-50.0,)),))
        late = Look(0, (SensorReading(10.0, Channel.BLUETOOTH, (-50.0,)),))
        with pytest.raises(ValueError):
            EventFile(meta, (late, early))  # indices must increase
        with pytest.raises(ValueError):
            EventFile(meta, (Look(0, (SensorReading(10.0, Channel.BLUETOOTH, (-50.0,)),)),
                             Look(1, (SensorReading(0.0, Channel.BLUETOOTH, (-50.0,)),))))


def _carry_pose():
    from bleprox.core import CarryLocation, Pose

    return CarryLocation.HAND, Pose.SITTING
