"""Domain types for BLE proximity events plus the log-distance path-loss math.

Everything in this module is an immutable value object; construction
validates the collection-protocol invariants so downstream code can trust
field contents without re-checking. All arithmetic is plain float64; any
rounding for display happens in the report renderers, never here.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field


class ProtocolError(ValueError):
    """A value falls outside the data-collection protocol."""


class DistanceClass(enum.Enum):
    """The four reference distances of the ranging protocol, in metres."""

    D1_2 = 1.2
    D1_8 = 1.8
    D3_0 = 3.0
    D4_5 = 4.5

    @property
    def metres(self) -> float:
        return self.value

    @classmethod
    def from_metres(cls, metres: float) -> "DistanceClass":
        for member in cls:
            if abs(member.value - metres) <= 1e-9:
                return member
        raise ProtocolError(f"{metres} m is not one of the four distance classes")


#: Classes in increasing metre order; index positions double as model labels.
DISTANCE_CLASSES = tuple(DistanceClass)


class Grain(enum.Enum):
    """Label granularity of an event: two possible targets vs four."""

    COARSE = "coarse"
    FINE = "fine"


def classes_for_grain(grain: Grain) -> tuple[DistanceClass, ...]:
    if grain is Grain.COARSE:
        return (DistanceClass.D1_8, DistanceClass.D4_5)
    return DISTANCE_CLASSES


@dataclass(frozen=True)
class PathLossParams:
    """The (TX, N) pair of the log-distance model: TX is the expected RSSI at
    1 m in dBm, N the path-loss exponent."""

    tx_power: float
    exponent: float

    def __post_init__(self):
        if not self.exponent > 0:
            raise ValueError(f"path-loss exponent must be positive, got {self.exponent}")


COARSE_PATH_LOSS = PathLossParams(tx_power=-52.0, exponent=2.6)
FINE_PATH_LOSS = PathLossParams(tx_power=-54.0, exponent=2.1)
# Midpoint constants, used when the grain indicator is withheld from the model.
MIDPOINT_PATH_LOSS = PathLossParams(tx_power=-53.0, exponent=2.35)


def params_for_grain(grain: Grain) -> PathLossParams:
    return COARSE_PATH_LOSS if grain is Grain.COARSE else FINE_PATH_LOSS


# Quantization bands of the collection protocol: marked positions between the
# band edges all carry the band's class label. Gaps between bands (e.g. 2.0 m)
# never occur in protocol data and are rejected rather than rounded.
_QUANTIZE_BANDS = (
    (0.9, 1.2, DistanceClass.D1_2),
    (1.5, 1.8, DistanceClass.D1_8),
    (2.4, 3.0, DistanceClass.D3_0),
    (3.6, 4.5, DistanceClass.D4_5),
)

_BAND_EPS = 1e-9


def quantize_distance(metres: float) -> DistanceClass:
    """Map a protocol distance to its class; reject out-of-band values."""
    for lo, hi, cls in _QUANTIZE_BANDS:
        if lo - _BAND_EPS <= metres <= hi + _BAND_EPS:
            return cls
    raise ProtocolError(f"{metres} m falls outside every protocol distance band")


def expected_distance(rssi: float, params: PathLossParams) -> float:
    """Distance estimate d' = 10^((TX - RSSI) / (10 N)) from one RSSI sample."""
    return 10.0 ** ((params.tx_power - rssi) / (10.0 * params.exponent))


def attenuation(tx_power: float, rssi: float) -> float:
    """Total signal loss in dB between transmitter power and received power."""
    return tx_power - rssi


class Channel(enum.Enum):
    GYROSCOPE = "gyroscope"
    MAGNETIC_FIELD = "magnetic_field"
    ACCELEROMETER = "accelerometer"
    ATTITUDE = "attitude"
    BLUETOOTH = "bluetooth"


#: Number of value components each channel carries per reading.
CHANNEL_COMPONENTS = {
    Channel.GYROSCOPE: 3,       # rad/s
    Channel.MAGNETIC_FIELD: 3,  # microtesla
    Channel.ACCELEROMETER: 3,   # g
    Channel.ATTITUDE: 3,        # roll/pitch/yaw, rad
    Channel.BLUETOOTH: 1,       # RSSI, dBm
}


class CarryLocation(enum.Enum):
    HAND = "hand"
    POCKET = "pocket"
    SHIRT = "shirt"
    PURSE = "purse"
    UNKNOWN = "unknown"


class Pose(enum.Enum):
    SITTING = "sitting"
    STANDING = "standing"
    WALKING = "walking"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class SensorReading:
    """One timestamped sample from one channel."""

    timestamp: float
    channel: Channel
    values: tuple[float, ...]

    def __post_init__(self):
        want = CHANNEL_COMPONENTS[self.channel]
        if len(self.values) != want:
            raise ValueError(
                f"{self.channel.value} reading needs {want} components, got {len(self.values)}"
            )
        if self.channel is Channel.BLUETOOTH and self.values[0] > 0:
            raise ValueError(f"RSSI must be <= 0 dBm, got {self.values[0]}")


@dataclass(frozen=True)
class EventMetadata:
    event_id: str
    grain: Grain
    tx_power: float  # the phone's advertised transmit power, dBm
    carry_location: CarryLocation
    pose: Pose
    reference_distance: DistanceClass | None = None  # absent for unlabeled test events


# Maximum recording-window length. Slight slack absorbs float timestamp noise.
LOOK_SECONDS = 4.0
_LOOK_SPAN_EPS = 1e-6


@dataclass(frozen=True)
class Look:
    """A 4-second recording window; readings are in non-decreasing time order."""

    index: int
    readings: tuple[SensorReading, ...] = field(default_factory=tuple)

    def __post_init__(self):
        times = [r.timestamp for r in self.readings]
        if any(b < a for a, b in zip(times, times[1:])):
            raise ValueError(f"look {self.index}: timestamps not monotone")
        if times and times[-1] - times[0] > LOOK_SECONDS + _LOOK_SPAN_EPS:
            raise ValueError(
                f"look {self.index}: span {times[-1] - times[0]:.6f}s exceeds {LOOK_SECONDS}s"
            )

    @property
    def start(self) -> float:
        return self.readings[0].timestamp if self.readings else 0.0


@dataclass(frozen=True)
class EventFile:
    """One contact event: metadata plus its looks in chronological order."""

    metadata: EventMetadata
    looks: tuple[Look, ...]

    def __post_init__(self):
        indices = [lk.index for lk in self.looks]
        if any(b <= a for a, b in zip(indices, indices[1:])):
            raise ValueError("look indices must be strictly increasing")
        starts = [lk.start for lk in self.looks if lk.readings]
        if any(b < a for a, b in zip(starts, starts[1:])):
            raise ValueError("looks must be ordered by first timestamp")

    def readings(self):
        """All readings in file order (looks are already chronological)."""
        for look in self.looks:
            yield from look.readings
