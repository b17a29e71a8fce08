"""End-to-end stages wiring corpus, models, and scoring together.

The CLI subcommands are thin wrappers over these functions, which keeps the
whole train/predict cycle callable in-process (the acceptance suite drives
it that way).
"""

from __future__ import annotations

import glob
import os
from dataclasses import dataclass

import numpy as np

from . import angle_model as am
from . import distance_model as dm
from .config import ConfigError, RunConfig
from .core import DISTANCE_CLASSES, EventFile
from .ingest import (
    EncodingSchema,
    FeatureRow,
    assemble_rows,
    encode_rows,
    fit_schema,
    read_event_file,
    with_angle,
)
from .sidecar import load_document, save_document
from .synthgen import generate_corpus, read_angles_file

ANGLE_MODEL_FILE = "angle_model.json"
SCHEMA_FILE = "schema.json"
DISTANCE_MODEL_FILE = "distance_model.json"


class DataError(ValueError):
    """Corpus or artifact contents prevent the requested stage."""


@dataclass
class Artifacts:
    schema: EncodingSchema
    distance: dm.DistanceModel
    angle: am.AngleModel | None
    fingerprint: str


# ---------------------------------------------------------------------------
# Corpus access

def split_dir(cfg: RunConfig, split: str) -> str:
    return os.path.join(cfg.corpus_dir, split)


def event_paths(corpus_dir: str) -> list[str]:
    paths = sorted(glob.glob(os.path.join(corpus_dir, "events", "*.evt")))
    if not paths:
        raise DataError(f"no event files under {corpus_dir} (run `gen` first?)")
    return paths


def gen_splits(cfg: RunConfig, jobs: int = 1):
    """Write train/dev/test corpora: keys for train and dev, angle ground
    truth for train, unlabeled test events."""
    for split in ("train", "dev", "test"):
        generate_corpus(
            cfg.generator_config(f"gen.{split}"),
            split_dir(cfg, split),
            id_prefix=f"{split}-",
            write_key=split in ("train", "dev"),
            write_angles=split == "train",
            include_reference=split in ("train", "dev"),
            jobs=jobs,
        )


# ---------------------------------------------------------------------------
# Training

def _attach_angles(model: am.AngleModel, rows: list[FeatureRow]) -> list[FeatureRow]:
    angles, _ = am.predict_angles(model, rows)
    return [with_angle(row, a) for row, a in zip(rows, angles)]


def _angle_at(segments, timestamp: float) -> int:
    for angle, t0, t1 in segments:
        if t0 <= timestamp < t1:
            return angle
    return segments[-1][0]


def _load_training_events(cfg: RunConfig) -> tuple[list[EventFile], list[list[FeatureRow]]]:
    events = [read_event_file(p) for p in event_paths(split_dir(cfg, "train"))]
    return events, [assemble_rows(ev) for ev in events]


def _angle_training_data(cfg, events, rows_by_event) -> tuple[list[FeatureRow], list[int]]:
    angles_path = os.path.join(split_dir(cfg, "train"), "angles.tsv")
    if not os.path.exists(angles_path):
        raise DataError(f"missing angle ground truth {angles_path}")
    truth = read_angles_file(angles_path)
    flat_rows: list[FeatureRow] = []
    labels: list[int] = []
    for ev, rows in zip(events, rows_by_event):
        segments = truth.get(ev.metadata.event_id)
        if segments is None:
            raise DataError(f"no angle ground truth for event {ev.metadata.event_id}")
        for row in rows:
            flat_rows.append(row)
            labels.append(_angle_at(segments, row.timestamp))
    return flat_rows, labels


def _save_with_fingerprint(cfg: RunConfig, filename: str, doc: dict):
    doc["fingerprint"] = cfg.fingerprint()
    save_document(os.path.join(cfg.model_dir, filename), doc)


def _fit_distance_stage(cfg, events, rows_by_event, angle) -> Artifacts:
    """Fit the encoding schema and the distance net on training rows, with
    angle predictions already attached when Stage 1 is in play."""
    if angle is not None:
        rows_by_event = [_attach_angles(angle, rows) for rows in rows_by_event]

    all_rows: list[FeatureRow] = []
    label_idx: list[int] = []
    for ev, rows in zip(events, rows_by_event):
        reference = ev.metadata.reference_distance
        if reference is None:
            raise DataError(f"training event {ev.metadata.event_id} has no reference distance")
        idx = DISTANCE_CLASSES.index(reference)
        all_rows.extend(rows)
        label_idx.extend([idx] * len(rows))

    schema = fit_schema(all_rows, cfg.feature_mask)
    _save_with_fingerprint(cfg, SCHEMA_FILE, schema.to_dict())

    x = encode_rows(all_rows, schema)
    distance = dm.train_distance(x, np.asarray(label_idx), cfg.net_config())
    _save_with_fingerprint(cfg, DISTANCE_MODEL_FILE, distance.to_dict())
    return Artifacts(schema, distance, angle, cfg.fingerprint())


def train_artifacts(cfg: RunConfig) -> Artifacts:
    """Full training: Stage 1 (unless masked), schema, Stage 2."""
    events, rows_by_event = _load_training_events(cfg)
    angle = None
    if "angle" not in cfg.feature_mask:
        flat_rows, labels = _angle_training_data(cfg, events, rows_by_event)
        angle = am.train_angle(flat_rows, labels, cfg.gbc_config())
        _save_with_fingerprint(cfg, ANGLE_MODEL_FILE, angle.to_dict())
    return _fit_distance_stage(cfg, events, rows_by_event, angle)


def train_angle_stage(cfg: RunConfig) -> am.AngleModel:
    """Stage 1 alone; useful when iterating on the angle model."""
    if "angle" in cfg.feature_mask:
        raise DataError("feature mask excludes the angle; nothing to train")
    events, rows_by_event = _load_training_events(cfg)
    flat_rows, labels = _angle_training_data(cfg, events, rows_by_event)
    model = am.train_angle(flat_rows, labels, cfg.gbc_config())
    _save_with_fingerprint(cfg, ANGLE_MODEL_FILE, model.to_dict())
    return model


def train_distance_stage(cfg: RunConfig) -> Artifacts:
    """Stage 2 (schema + net), reusing a previously trained angle model."""
    angle = None
    if "angle" not in cfg.feature_mask:
        path = os.path.join(cfg.model_dir, ANGLE_MODEL_FILE)
        if not os.path.exists(path):
            raise DataError(f"missing {path}; run train-angle first or mask the angle")
        doc = load_document(path)
        if doc.get("fingerprint") != cfg.fingerprint():
            raise DataError("angle model fingerprint does not match this configuration")
        angle = am.AngleModel.from_dict(doc)
    events, rows_by_event = _load_training_events(cfg)
    return _fit_distance_stage(cfg, events, rows_by_event, angle)


# ---------------------------------------------------------------------------
# Prediction

def load_artifacts(model_dir: str) -> Artifacts:
    schema_path = os.path.join(model_dir, SCHEMA_FILE)
    model_path = os.path.join(model_dir, DISTANCE_MODEL_FILE)
    for path in (schema_path, model_path):
        if not os.path.exists(path):
            raise DataError(f"missing artifact {path} (run `train` first?)")
    schema_doc = load_document(schema_path)
    model_doc = load_document(model_path)
    schema = EncodingSchema.from_dict(schema_doc)
    distance = dm.DistanceModel.from_dict(model_doc)

    fingerprints = {schema_doc.get("fingerprint"), model_doc.get("fingerprint")}
    angle = None
    if "angle" not in schema.mask:
        angle_path = os.path.join(model_dir, ANGLE_MODEL_FILE)
        if not os.path.exists(angle_path):
            raise DataError(f"missing artifact {angle_path}")
        angle_doc = load_document(angle_path)
        angle = am.AngleModel.from_dict(angle_doc)
        fingerprints.add(angle_doc.get("fingerprint"))
    if len(fingerprints) != 1:
        raise DataError("artifacts were trained under different configurations")
    return Artifacts(schema, distance, angle, fingerprints.pop())


def predict_event(event: EventFile, artifacts: Artifacts, look_mode: str) -> float:
    """Predicted distance in metres for one parsed event."""
    rows = assemble_rows(event)
    if not rows:
        raise DataError(f"event {event.metadata.event_id}: no complete rows after forward fill")
    if artifacts.angle is not None:
        rows = _attach_angles(artifacts.angle, rows)
    rows = dm.select_look(rows, look_mode)
    x = encode_rows(rows, artifacts.schema)
    classes, _ = dm.predict_rows(artifacts.distance, x)
    return dm.aggregate_event(classes).metres


_WORKER: dict = {}


def _init_predict_worker(model_dir: str, look_mode: str):
    _WORKER["artifacts"] = load_artifacts(model_dir)
    _WORKER["look"] = look_mode


def _predict_worker(path: str):
    event_id = os.path.splitext(os.path.basename(path))[0]
    try:
        event = read_event_file(path)
        return event.metadata.event_id, predict_event(event, _WORKER["artifacts"], _WORKER["look"]), None
    except Exception as exc:  # failures are reported per event, run continues
        return event_id, None, str(exc)


def predict_corpus(
    cfg: RunConfig, split: str, look_mode: str | None = None, jobs: int = 1
) -> tuple[list[tuple[str, float]], list[tuple[str, str]]]:
    """Predict every event of a split; returns (id-sorted predictions, failures)."""
    look = look_mode or cfg.look_mode
    artifacts = load_artifacts(cfg.model_dir)
    if artifacts.fingerprint != cfg.fingerprint():
        raise ConfigError(
            "artifact fingerprint does not match this configuration; retrain or restore the config"
        )
    paths = event_paths(split_dir(cfg, split))

    if jobs > 1:
        import concurrent.futures

        with concurrent.futures.ProcessPoolExecutor(
            max_workers=jobs, initializer=_init_predict_worker, initargs=(cfg.model_dir, look)
        ) as pool:
            results = list(pool.map(_predict_worker, paths, chunksize=4))
    else:
        results = []
        for path in paths:
            event_id = os.path.splitext(os.path.basename(path))[0]
            try:
                event = read_event_file(path)
                results.append((event.metadata.event_id, predict_event(event, artifacts, look), None))
            except Exception as exc:
                results.append((event_id, None, str(exc)))

    predictions = sorted((eid, m) for eid, m, err in results if err is None)
    failures = sorted((eid, err) for eid, m, err in results if err is not None)
    return predictions, failures
