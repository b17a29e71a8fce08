"""Event-file parsing, forward-fill row assembly, and numeric encoding.

File formats owned here:

* Event file (UTF-8, LF): ``#key=value`` header lines for event_id, grain,
  tx_power (integer dBm), carry, pose and an optional reference_distance,
  followed by one reading per line ``look_index,timestamp,channel,v1[,v2,v3]``
  with timestamps printed with six fractional digits.
* Key file: ``event_id<TAB>reference_distance_m<TAB>grain`` per line.
* System output: ``event_id<TAB>predicted_distance_m`` per line.

Parsing generator output and re-serializing it is byte-identical.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, replace

import numpy as np

from .core import (
    CHANNEL_COMPONENTS,
    CarryLocation,
    Channel,
    DistanceClass,
    EventFile,
    EventMetadata,
    Grain,
    Look,
    MIDPOINT_PATH_LOSS,
    Pose,
    SensorReading,
    attenuation,
    expected_distance,
    params_for_grain,
)


class ParseError(ValueError):
    """Malformed input file; the message names the offending line."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class EmptyEventError(ValueError):
    """Event contains no bluetooth readings, so no rows can be assembled."""


# ---------------------------------------------------------------------------
# Event files

_HEADER_KEYS = ("event_id", "grain", "tx_power", "carry", "pose", "reference_distance")
_MANDATORY_KEYS = _HEADER_KEYS[:5]
_CHANNEL_BY_NAME = {c.value: c for c in Channel}


def serialize_event_file(event: EventFile) -> str:
    meta = event.metadata
    if not float(meta.tx_power).is_integer():
        raise ValueError("tx_power must be an integer dBm for serialization")
    lines = [
        f"#event_id={meta.event_id}",
        f"#grain={meta.grain.value}",
        f"#tx_power={int(meta.tx_power)}",
        f"#carry={meta.carry_location.value}",
        f"#pose={meta.pose.value}",
    ]
    if meta.reference_distance is not None:
        lines.append(f"#reference_distance={meta.reference_distance.metres:.1f}")
    for look in event.looks:
        for r in look.readings:
            values = ",".join(repr(float(v)) for v in r.values)
            lines.append(f"{look.index},{r.timestamp:.6f},{r.channel.value},{values}")
    return "\n".join(lines) + "\n"


def parse_event_text(text: str) -> EventFile:
    headers: dict[str, str] = {}
    looks: list[Look] = []
    current_index: int | None = None
    current: list[SensorReading] = []
    seen_reading = False

    def close_look(line_no: int):
        if current_index is None:
            return
        try:
            looks.append(Look(current_index, tuple(current)))
        except ValueError as exc:
            raise ParseError(line_no, str(exc)) from exc

    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    last_line = 0
    for line_no, raw in enumerate(lines, start=1):
        last_line = line_no
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if seen_reading:
                raise ParseError(line_no, "header line after readings")
            key, sep, value = line[1:].partition("=")
            if not sep:
                raise ParseError(line_no, "header line is not #key=value")
            if key not in _HEADER_KEYS:
                raise ParseError(line_no, f"unknown header key {key!r}")
            if key in headers:
                raise ParseError(line_no, f"duplicate header key {key!r}")
            headers[key] = value
            continue

        seen_reading = True
        parts = line.split(",")
        if len(parts) < 4:
            raise ParseError(line_no, "reading needs look_index,timestamp,channel,values")
        try:
            look_index = int(parts[0])
        except ValueError:
            raise ParseError(line_no, f"bad look index {parts[0]!r}") from None
        try:
            timestamp = float(parts[1])
        except ValueError:
            raise ParseError(line_no, f"bad timestamp {parts[1]!r}") from None
        channel = _CHANNEL_BY_NAME.get(parts[2])
        if channel is None:
            raise ParseError(line_no, f"unknown channel {parts[2]!r}")
        try:
            values = tuple(float(v) for v in parts[3:])
        except ValueError:
            raise ParseError(line_no, "bad value component") from None
        want = CHANNEL_COMPONENTS[channel]
        if len(values) != want:
            raise ParseError(
                line_no, f"{channel.value} carries {want} components, got {len(values)}"
            )
        try:
            reading = SensorReading(timestamp, channel, values)
        except ValueError as exc:
            raise ParseError(line_no, str(exc)) from exc

        if look_index != current_index:
            if current_index is not None and look_index < current_index:
                raise ParseError(line_no, f"look index {look_index} revisits an earlier look")
            close_look(line_no)
            current_index = look_index
            current = []
        elif current and timestamp < current[-1].timestamp:
            raise ParseError(
                line_no, f"timestamp {timestamp:.6f} not monotone within look {look_index}"
            )
        current.append(reading)
    close_look(last_line)

    missing = [k for k in _MANDATORY_KEYS if k not in headers]
    if missing:
        raise ParseError(last_line, f"missing mandatory header keys: {', '.join(missing)}")

    try:
        grain = Grain(headers["grain"])
    except ValueError:
        raise ParseError(1, f"unknown grain {headers['grain']!r}") from None
    try:
        tx_power = float(int(headers["tx_power"]))
    except ValueError:
        raise ParseError(1, f"tx_power must be an integer dBm, got {headers['tx_power']!r}") from None
    try:
        carry = CarryLocation(headers["carry"])
        pose = Pose(headers["pose"])
    except ValueError as exc:
        raise ParseError(1, str(exc)) from None
    reference = None
    if "reference_distance" in headers:
        reference = DistanceClass.from_metres(float(headers["reference_distance"]))

    metadata = EventMetadata(headers["event_id"], grain, tx_power, carry, pose, reference)
    try:
        return EventFile(metadata, tuple(looks))
    except ValueError as exc:
        raise ParseError(last_line, str(exc)) from exc


def parse_event_file(data: bytes) -> EventFile:
    return parse_event_text(data.decode("utf-8"))


def read_event_file(path) -> EventFile:
    with open(path, "rb") as fh:
        return parse_event_file(fh.read())


# ---------------------------------------------------------------------------
# Key files and system output

def write_key_line(event_id: str, metres: float, grain: Grain) -> str:
    return f"{event_id}\t{metres:.1f}\t{grain.value}"


def read_key_file(path) -> dict[str, tuple[float, Grain]]:
    key: dict[str, tuple[float, Grain]] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ParseError(line_no, "key line needs event_id<TAB>distance<TAB>grain")
            event_id, metres, grain = parts
            if event_id in key:
                raise ParseError(line_no, f"duplicate event id {event_id!r} in key")
            try:
                key[event_id] = (float(metres), Grain(grain))
            except ValueError as exc:
                raise ParseError(line_no, str(exc)) from None
    return key


def write_system_output(rows) -> str:
    """Render (event_id, metres) pairs; callers sort before rendering."""
    return "".join(f"{event_id}\t{metres:.1f}\n" for event_id, metres in rows)


def read_system_output(path) -> list[tuple[str, float]]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ParseError(line_no, "output line needs event_id<TAB>distance")
            try:
                out.append((parts[0], float(parts[1])))
            except ValueError:
                raise ParseError(line_no, f"bad distance {parts[1]!r}") from None
    return out


# ---------------------------------------------------------------------------
# Row assembly (last observation carried forward)

@dataclass(frozen=True)
class FeatureRow:
    """One fully-populated timestamp, anchored at a bluetooth reading."""

    look_index: int
    timestamp: float
    gyro: tuple[float, float, float]
    magnetic_field: tuple[float, float, float]
    accelerometer: tuple[float, float, float]
    attitude: tuple[float, float, float]
    rssi: float
    tx_power: float
    carry_location: CarryLocation
    pose: Pose
    grain: Grain
    expected_distance: float
    attenuation: float
    angle: int | None = None  # degrees, attached by the angle model


def with_angle(row: FeatureRow, angle_deg: int) -> FeatureRow:
    return replace(row, angle=int(angle_deg))


_FILL_CHANNELS = (
    Channel.GYROSCOPE,
    Channel.MAGNETIC_FIELD,
    Channel.ACCELEROMETER,
    Channel.ATTITUDE,
)


def assemble_rows(event: EventFile) -> list[FeatureRow]:
    """One row per bluetooth reading; other channels carry their most recent
    observation at or before the row timestamp. Rows for which some channel
    was never observed are removed."""
    series: dict[Channel, tuple[list[float], list[tuple[float, ...]]]] = {
        ch: ([], []) for ch in _FILL_CHANNELS
    }
    anchors: list[tuple[int, float, float]] = []
    for look in event.looks:
        for r in look.readings:
            if r.channel is Channel.BLUETOOTH:
                anchors.append((look.index, r.timestamp, r.values[0]))
            else:
                times, values = series[r.channel]
                times.append(r.timestamp)
                values.append(r.values)
    if not anchors:
        raise EmptyEventError(f"event {event.metadata.event_id} has no bluetooth readings")

    meta = event.metadata
    params = params_for_grain(meta.grain)
    rows: list[FeatureRow] = []
    for look_index, timestamp, rssi in anchors:
        filled: dict[Channel, tuple[float, ...]] = {}
        for ch in _FILL_CHANNELS:
            times, values = series[ch]
            pos = bisect.bisect_right(times, timestamp) - 1
            if pos < 0:
                filled = {}
                break
            filled[ch] = values[pos]
        if not filled:
            continue  # some channel has no observation yet: drop the row
        rows.append(
            FeatureRow(
                look_index=look_index,
                timestamp=timestamp,
                gyro=filled[Channel.GYROSCOPE],
                magnetic_field=filled[Channel.MAGNETIC_FIELD],
                accelerometer=filled[Channel.ACCELEROMETER],
                attitude=filled[Channel.ATTITUDE],
                rssi=rssi,
                tx_power=meta.tx_power,
                carry_location=meta.carry_location,
                pose=meta.pose,
                grain=meta.grain,
                expected_distance=expected_distance(rssi, params),
                attenuation=attenuation(meta.tx_power, rssi),
            )
        )
    return rows


# ---------------------------------------------------------------------------
# Encoding

#: Canonical numeric feature order.
NUMERIC_FEATURES = (
    "gyro_x", "gyro_y", "gyro_z",
    "mag_x", "mag_y", "mag_z",
    "acc_x", "acc_y", "acc_z",
    "att_roll", "att_pitch", "att_yaw",
    "rssi", "tx_power", "expected_distance", "attenuation",
)

#: Canonical one-hot block order.
CATEGORICAL_FEATURES = ("carry_location", "pose", "grain", "angle")

MASKABLE = frozenset({"coarse_grain", "expected_distance", "angle"})

UNKNOWN = "unknown"


def validate_mask(names) -> frozenset[str]:
    mask = frozenset(names)
    bad = mask - MASKABLE
    if bad:
        raise ValueError(f"unknown mask names: {sorted(bad)} (allowed: {sorted(MASKABLE)})")
    return mask


def _numeric_value(row: FeatureRow, name: str, mask: frozenset[str]) -> float:
    if name == "expected_distance" and "coarse_grain" in mask:
        # Without the grain indicator the distance estimate may not depend on
        # it either; the midpoint constants replace the per-grain pair.
        return expected_distance(row.rssi, MIDPOINT_PATH_LOSS)
    if name.startswith("gyro_"):
        return row.gyro["xyz".index(name[-1])]
    if name.startswith("mag_"):
        return row.magnetic_field["xyz".index(name[-1])]
    if name.startswith("acc_"):
        return row.accelerometer["xyz".index(name[-1])]
    if name == "att_roll":
        return row.attitude[0]
    if name == "att_pitch":
        return row.attitude[1]
    if name == "att_yaw":
        return row.attitude[2]
    return getattr(row, name)


def _categorical_value(row: FeatureRow, name: str) -> str:
    if name == "angle":
        if row.angle is None:
            raise ValueError("row has no angle but the schema encodes one")
        return str(int(row.angle))
    return getattr(row, name).value


def _active_numeric_names(mask: frozenset[str]) -> tuple[str, ...]:
    return tuple(n for n in NUMERIC_FEATURES if not (n == "expected_distance" and n in mask))


def _active_categorical_names(mask: frozenset[str]) -> tuple[str, ...]:
    out = []
    for name in CATEGORICAL_FEATURES:
        if name == "grain" and "coarse_grain" in mask:
            continue
        if name == "angle" and "angle" in mask:
            continue
        out.append(name)
    return tuple(out)


@dataclass(frozen=True)
class EncodingSchema:
    """Feature layout plus the training-split normalization statistics.

    Fitted once on training rows under a fixed feature mask and persisted
    with the trained models; inference reuses it verbatim.
    """

    mask: frozenset[str]
    numeric_names: tuple[str, ...]   # retained numerics, canonical order
    means: tuple[float, ...]
    stds: tuple[float, ...]
    dropped: tuple[str, ...]         # zero-variance numerics, recorded
    vocab: dict[str, tuple[str, ...]]  # per categorical block, unknown bucket included

    @property
    def width(self) -> int:
        return len(self.numeric_names) + sum(len(v) for v in self.vocab.values())

    def to_dict(self) -> dict:
        return {
            "kind": "encoding_schema",
            "mask": sorted(self.mask),
            "numeric_names": list(self.numeric_names),
            "means": list(self.means),
            "stds": list(self.stds),
            "dropped": list(self.dropped),
            "vocab": {k: list(v) for k, v in self.vocab.items()},
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "EncodingSchema":
        if doc.get("kind") != "encoding_schema":
            raise ValueError("not an encoding schema document")
        return cls(
            mask=validate_mask(doc["mask"]),
            numeric_names=tuple(doc["numeric_names"]),
            means=tuple(float(v) for v in doc["means"]),
            stds=tuple(float(v) for v in doc["stds"]),
            dropped=tuple(doc["dropped"]),
            vocab={k: tuple(v) for k, v in doc["vocab"].items()},
        )


def fit_schema(rows, mask=frozenset()) -> EncodingSchema:
    """Record normalization statistics and categorical vocabularies."""
    mask = validate_mask(mask)
    if len(rows) < 2:
        raise ValueError("schema fitting needs at least two rows")

    names = _active_numeric_names(mask)
    matrix = np.array(
        [[_numeric_value(row, n, mask) for n in names] for row in rows], dtype=np.float64
    )
    means = matrix.mean(axis=0)
    stds = matrix.std(axis=0)  # population convention

    retained, r_means, r_stds, dropped = [], [], [], []
    for i, name in enumerate(names):
        if stds[i] > 0.0:
            retained.append(name)
            r_means.append(float(means[i]))
            r_stds.append(float(stds[i]))
        else:
            dropped.append(name)

    vocab: dict[str, tuple[str, ...]] = {}
    for name in _active_categorical_names(mask):
        observed = {_categorical_value(row, name) for row in rows}
        observed.discard(UNKNOWN)
        if name == "angle":
            ordered = [str(v) for v in sorted(int(x) for x in observed)]
        else:
            ordered = sorted(observed)
        vocab[name] = tuple(ordered) + (UNKNOWN,)

    return EncodingSchema(mask, tuple(retained), tuple(r_means), tuple(r_stds), tuple(dropped), vocab)


def encode_row(row: FeatureRow, schema: EncodingSchema, mask=None) -> np.ndarray:
    """Z-scored numerics followed by one-hot blocks, in schema order."""
    if mask is not None and validate_mask(mask) != schema.mask:
        raise ValueError(
            f"mask {sorted(validate_mask(mask))} does not match the schema's {sorted(schema.mask)}"
        )
    return encode_rows([row], schema)[0]


def encode_rows(rows, schema: EncodingSchema) -> np.ndarray:
    out = np.zeros((len(rows), schema.width), dtype=np.float64)
    means = np.asarray(schema.means)
    stds = np.asarray(schema.stds)
    n_num = len(schema.numeric_names)
    for i, row in enumerate(rows):
        for j, name in enumerate(schema.numeric_names):
            out[i, j] = _numeric_value(row, name, schema.mask)
        offset = n_num
        for name in _active_categorical_names(schema.mask):
            vocab = schema.vocab[name]
            value = _categorical_value(row, name)
            try:
                pos = vocab.index(value)
            except ValueError:
                pos = len(vocab) - 1  # unknown bucket
            out[i, offset + pos] = 1.0
            offset += len(vocab)
    if n_num:
        out[:, :n_num] = (out[:, :n_num] - means) / stds
    return out
