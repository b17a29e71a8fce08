"""Synthetic contact-event corpora following the ranging collection protocol.

Each event fixes one marked distance; the receiver rotates 45 degrees every
15 seconds through all 8 angles, recording 4-second looks. The facing angle
is recoverable from attitude (yaw tracks it) and from the magnetometer (a
fixed field vector rotated into the phone frame), so the angle model has
something real to learn. RSSI follows the log-distance model with Gaussian
dB shadowing; some IMU samples are withheld to exercise forward fill.

Generation is deterministic: every event draws from its own substream seeded
by ``config.seed ^ event_index``, so corpora are reproducible byte for byte
and events may be produced in parallel.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from .core import (
    Channel,
    CarryLocation,
    COARSE_PATH_LOSS,
    DISTANCE_CLASSES,
    DistanceClass,
    EventFile,
    EventMetadata,
    FINE_PATH_LOSS,
    Grain,
    Look,
    PathLossParams,
    Pose,
    ProtocolError,
    SensorReading,
    classes_for_grain,
)
from .ingest import serialize_event_file, write_key_line
from .sidecar import write_text_atomic

SEGMENT_SECONDS = 15.0
N_SEGMENTS = 8
LOOK_SECONDS = 4.0

#: Marked positions per class; an event sits at one mark for its whole run.
MARKS_BY_CLASS = {
    DistanceClass.D1_2: (0.9, 1.2),
    DistanceClass.D1_8: (1.5, 1.8),
    DistanceClass.D3_0: (2.4, 2.7, 3.0),
    DistanceClass.D4_5: (3.6, 4.5),
}

#: Advertised transmit powers phones report, independent of the path-loss
#: constants so the TxPower feature does not leak the grain.
TX_POWER_CHOICES = (-59, -55, -51)

# Channel noise scales (not exposed in config; protocol-level constants).
_ATT_SIGMA = 0.05   # rad
_MAG_SIGMA = 1.5    # microtesla
_GYRO_SIGMA = 0.02  # rad/s
_ACC_SIGMA = 0.02   # g
_MAG_HORIZONTAL = 22.0
_MAG_VERTICAL = -43.0
_MISSING_P = 0.1

_CHANNEL_ORDER = (
    Channel.GYROSCOPE,
    Channel.MAGNETIC_FIELD,
    Channel.ACCELEROMETER,
    Channel.ATTITUDE,
    Channel.BLUETOOTH,
)


def _default_carry_weights() -> dict[str, float]:
    return {"hand": 0.35, "pocket": 0.30, "shirt": 0.20, "purse": 0.15}


def _default_pose_weights() -> dict[str, float]:
    return {"sitting": 0.40, "standing": 0.35, "walking": 0.25}


@dataclass(frozen=True)
class GeneratorConfig:
    seed: int = 0
    events_per_class: int = 8
    grain_mix: float = 0.5          # fraction of each class's events that are coarse
    shadowing_sigma: float = 2.0    # dB std of the RSSI noise
    sample_rate: float = 4.0        # Hz per channel
    look_step: float = 11.0         # gap between the end of a look and the next
    coarse_params: PathLossParams = COARSE_PATH_LOSS
    fine_params: PathLossParams = FINE_PATH_LOSS
    carry_weights: dict[str, float] = field(default_factory=_default_carry_weights)
    pose_weights: dict[str, float] = field(default_factory=_default_pose_weights)

    def __post_init__(self):
        if self.events_per_class < 1:
            raise ValueError("events_per_class must be >= 1")
        if not 0.0 <= self.grain_mix <= 1.0:
            raise ValueError("grain_mix must be in [0, 1]")
        if self.shadowing_sigma < 0:
            raise ValueError("shadowing_sigma must be >= 0")
        if not self.sample_rate > 0:
            raise ValueError("sample_rate must be positive")
        if self.look_step < 0:
            raise ValueError("look_step must be >= 0")
        for name, weights in (("carry", self.carry_weights), ("pose", self.pose_weights)):
            if not weights or any(w < 0 for w in weights.values()) or sum(weights.values()) <= 0:
                raise ValueError(f"{name} weights must be non-empty and non-negative")

    def params(self, grain: Grain) -> PathLossParams:
        return self.coarse_params if grain is Grain.COARSE else self.fine_params

    @property
    def coarse_per_class(self) -> int:
        return round(self.events_per_class * self.grain_mix)

    @property
    def fine_per_class(self) -> int:
        return self.events_per_class - self.coarse_per_class


@dataclass(frozen=True)
class GroundTruth:
    event_id: str
    true_distance: DistanceClass
    #: (angle_degrees, t_start, t_end) per 15-second rotation segment
    segments: tuple[tuple[int, float, float], ...]

    def angle_at(self, timestamp: float) -> int:
        for angle, t0, t1 in self.segments:
            if t0 <= timestamp < t1:
                return angle
        return self.segments[-1][0]


def sample_rssi(distance: float, params: PathLossParams, noise: float = 0.0) -> float:
    """Log-distance RSSI: TX - 10 N log10(d) + noise. Inverse of the ranging
    estimate, so a noiseless sample round-trips to the exact distance."""
    if not distance > 0:
        raise ValueError(f"distance must be positive, got {distance}")
    return params.tx_power - 10.0 * params.exponent * math.log10(distance) + noise


def _weighted_choice(rng: np.random.Generator, weights: dict[str, float]) -> str:
    names = sorted(weights)
    total = sum(weights[n] for n in names)
    u = rng.random() * total
    acc = 0.0
    for name in names:
        acc += weights[name]
        if u < acc:
            return name
    return names[-1]


def event_rng(config: GeneratorConfig, event_index: int) -> np.random.Generator:
    return np.random.default_rng(config.seed ^ event_index)


def generate_event(
    config: GeneratorConfig,
    grain: Grain,
    distance: DistanceClass,
    rng: np.random.Generator,
    event_id: str,
    include_reference: bool = True,
) -> tuple[EventFile, GroundTruth]:
    if distance not in classes_for_grain(grain):
        raise ProtocolError(
            f"{distance.metres} m is not a legal target for {grain.value} grain events"
        )
    params = config.params(grain)
    marks = MARKS_BY_CLASS[distance]
    mark = marks[int(rng.integers(len(marks)))]
    tx_power = float(TX_POWER_CHOICES[int(rng.integers(len(TX_POWER_CHOICES)))])
    carry = CarryLocation(_weighted_choice(rng, config.carry_weights))
    pose = Pose(_weighted_choice(rng, config.pose_weights))
    base_roll = float(rng.normal(0.0, 0.1))
    base_pitch = float(rng.normal(0.0, 0.1))

    n_per_look = int(math.floor(config.sample_rate * LOOK_SECONDS - 1e-9)) + 1
    period = LOOK_SECONDS + config.look_step

    looks: list[Look] = []
    segments: list[tuple[int, float, float]] = []
    for seg in range(N_SEGMENTS):
        angle = 45 * seg
        seg_start = seg * SEGMENT_SECONDS
        segments.append((angle, seg_start, seg_start + SEGMENT_SECONDS))
        theta = math.radians(angle)
        look_start = seg * period
        readings: list[SensorReading] = []
        for k in range(n_per_look):
            t = round(look_start + k / config.sample_rate, 6)
            for channel in _CHANNEL_ORDER:
                if channel is not Channel.BLUETOOTH and rng.random() < _MISSING_P:
                    continue
                if channel is Channel.GYROSCOPE:
                    values = tuple(float(v) for v in rng.normal(0.0, _GYRO_SIGMA, 3))
                elif channel is Channel.MAGNETIC_FIELD:
                    values = (
                        float(_MAG_HORIZONTAL * math.cos(theta) + rng.normal(0.0, _MAG_SIGMA)),
                        float(-_MAG_HORIZONTAL * math.sin(theta) + rng.normal(0.0, _MAG_SIGMA)),
                        float(_MAG_VERTICAL + rng.normal(0.0, _MAG_SIGMA)),
                    )
                elif channel is Channel.ACCELEROMETER:
                    values = (
                        float(rng.normal(0.0, _ACC_SIGMA)),
                        float(rng.normal(0.0, _ACC_SIGMA)),
                        float(1.0 + rng.normal(0.0, _ACC_SIGMA)),
                    )
                elif channel is Channel.ATTITUDE:
                    values = (
                        float(base_roll + rng.normal(0.0, _ATT_SIGMA)),
                        float(base_pitch + rng.normal(0.0, _ATT_SIGMA)),
                        float(theta + rng.normal(0.0, _ATT_SIGMA)),
                    )
                else:
                    noise = float(rng.normal(0.0, config.shadowing_sigma)) if config.shadowing_sigma > 0 else 0.0
                    values = (sample_rssi(mark, params, noise),)
                readings.append(SensorReading(t, channel, values))
        looks.append(Look(seg, tuple(readings)))

    metadata = EventMetadata(
        event_id=event_id,
        grain=grain,
        tx_power=tx_power,
        carry_location=carry,
        pose=pose,
        reference_distance=distance if include_reference else None,
    )
    truth = GroundTruth(event_id, distance, tuple(segments))
    return EventFile(metadata, tuple(looks)), truth


def corpus_plan(config: GeneratorConfig) -> list[tuple[Grain, DistanceClass]]:
    """Deterministic (grain, class) sequence: coarse block, then fine block,
    exactly balanced within each grain."""
    plan: list[tuple[Grain, DistanceClass]] = []
    for cls in classes_for_grain(Grain.COARSE):
        plan.extend((Grain.COARSE, cls) for _ in range(config.coarse_per_class))
    for cls in DISTANCE_CLASSES:
        plan.extend((Grain.FINE, cls) for _ in range(config.fine_per_class))
    return plan


def render_angles_line(truth: GroundTruth) -> str:
    return "".join(
        f"{truth.event_id}\t{i}\t{angle}\t{t0:.6f}\t{t1:.6f}\n"
        for i, (angle, t0, t1) in enumerate(truth.segments)
    )


def read_angles_file(path) -> dict[str, tuple[tuple[int, float, float], ...]]:
    segments: dict[str, list[tuple[int, float, float]]] = {}
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            event_id, _idx, angle, t0, t1 = line.split("\t")
            segments.setdefault(event_id, []).append((int(angle), float(t0), float(t1)))
    return {eid: tuple(segs) for eid, segs in segments.items()}


def _event_payload(args) -> tuple[str, str, str, str]:
    """Worker for corpus generation: one event rendered to text."""
    config, index, grain, cls, event_id, include_reference = args
    event, truth = generate_event(
        config, grain, cls, event_rng(config, index), event_id, include_reference
    )
    key_line = write_key_line(event_id, cls.metres, grain) + "\n"
    return event_id, serialize_event_file(event), key_line, render_angles_line(truth)


def generate_corpus(
    config: GeneratorConfig,
    out_dir: str,
    *,
    id_prefix: str = "ev",
    write_key: bool = True,
    write_angles: bool = True,
    include_reference: bool = True,
    jobs: int = 1,
) -> list[str]:
    """Write a balanced corpus; returns the event ids in order.

    With jobs > 1 events are rendered in a process pool; output is identical
    because every event owns an index-derived rng substream and files are
    written in plan order by the parent.
    """
    events_dir = os.path.join(out_dir, "events")
    os.makedirs(events_dir, exist_ok=True)

    plan = corpus_plan(config)
    work = [
        (config, index, grain, cls, f"{id_prefix}{index:05d}", include_reference)
        for index, (grain, cls) in enumerate(plan)
    ]
    if jobs > 1:
        import concurrent.futures

        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            payloads = list(pool.map(_event_payload, work, chunksize=8))
    else:
        payloads = [_event_payload(w) for w in work]

    key_lines: list[str] = []
    angle_lines: list[str] = []
    event_ids: list[str] = []
    for event_id, event_text, key_line, angles_text in payloads:
        write_text_atomic(os.path.join(events_dir, f"{event_id}.evt"), event_text)
        key_lines.append(key_line)
        angle_lines.append(angles_text)
        event_ids.append(event_id)

    if write_key:
        write_text_atomic(os.path.join(out_dir, "key.tsv"), "".join(key_lines))
    if write_angles:
        write_text_atomic(os.path.join(out_dir, "angles.tsv"), "".join(angle_lines))
    return event_ids
