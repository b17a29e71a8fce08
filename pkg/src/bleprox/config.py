"""Run configuration: one flat ``section.key = value`` text document.

Every knob of the pipeline lives under a dotted key with a typed default;
CLI ``--set section.key=value`` overrides config-file values, which override
defaults. A single master seed governs all stochastic stages; per-stage
seeds are derived from it by hashing the stage name, so adding a stage never
perturbs the others. The fingerprint over training-relevant keys is stored
in every artifact and checked before prediction.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from .angle_model import GBCConfig
from .core import Grain, PathLossParams
from .distance_model import NetConfig
from .ingest import validate_mask
from .scorer import ScoringConfig
from .synthgen import GeneratorConfig


class ConfigError(ValueError):
    pass


SPLITS = ("train", "dev", "test")
LOOK_MODES = ("first", "last", "full")


def _parse_bool(_: str):  # placeholder: no boolean keys yet
    raise ConfigError("no boolean keys defined")


def _parse_mask(text: str) -> tuple[str, ...]:
    names = tuple(sorted(set(text.split())))
    try:
        validate_mask(names)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return names


def _parse_look(text: str) -> str:
    if text not in LOOK_MODES:
        raise ConfigError(f"look_mode must be one of {LOOK_MODES}, got {text!r}")
    return text


def _parse_weights(text: str) -> tuple[tuple[str, float], ...]:
    pairs = []
    for item in text.split():
        name, sep, weight = item.partition(":")
        if not sep:
            raise ConfigError(f"weight entry {item!r} is not name:weight")
        try:
            pairs.append((name, float(weight)))
        except ValueError:
            raise ConfigError(f"bad weight in {item!r}") from None
    if not pairs:
        raise ConfigError("weights must be non-empty")
    return tuple(pairs)


def _parse_thresholds(text: str) -> tuple[tuple[str, float], ...]:
    out = []
    for item in text.split():
        subset, sep, dist = item.partition(":")
        if not sep or subset not in ("fine", "coarse"):
            raise ConfigError(f"threshold entry {item!r} is not fine:D or coarse:D")
        try:
            out.append((subset, float(dist)))
        except ValueError:
            raise ConfigError(f"bad distance in {item!r}") from None
    if not out:
        raise ConfigError("thresholds must be non-empty")
    return tuple(out)


def _parse_widths(text: str) -> tuple[int, ...]:
    try:
        widths = tuple(int(w) for w in text.split())
    except ValueError:
        raise ConfigError(f"bad layer widths {text!r}") from None
    if not widths:
        raise ConfigError("at least one hidden layer width is required")
    return widths


def _render_weights(pairs) -> str:
    return " ".join(f"{name}:{weight:g}" for name, weight in pairs)


def _render_thresholds(pairs) -> str:
    return " ".join(f"{subset}:{dist:g}" for subset, dist in pairs)


@dataclass(frozen=True)
class _Entry:
    default: object
    parse: object  # str -> value
    render: object  # value -> str


def _scalar(default, caster):
    def parse(text: str):
        try:
            return caster(text)
        except ValueError:
            raise ConfigError(f"cannot parse {text!r} as {caster.__name__}") from None

    return _Entry(default, parse, lambda v: f"{v:g}" if isinstance(v, float) else str(v))


_ENTRIES: dict[str, _Entry] = {
    "paths.corpus_dir": _Entry("corpus", str, str),
    "paths.model_dir": _Entry("models", str, str),
    "paths.report_dir": _Entry("reports", str, str),
    "run.seed": _scalar(1234, int),
    "run.look_mode": _Entry("full", _parse_look, str),
    "run.feature_mask": _Entry((), _parse_mask, lambda v: " ".join(v)),
    "generator.events_per_class": _scalar(8, int),
    "generator.grain_mix": _scalar(0.5, float),
    "generator.shadowing_sigma": _scalar(2.0, float),
    "generator.sample_rate": _scalar(4.0, float),
    "generator.look_step": _scalar(11.0, float),
    "generator.coarse_tx": _scalar(-52.0, float),
    "generator.coarse_exponent": _scalar(2.6, float),
    "generator.fine_tx": _scalar(-54.0, float),
    "generator.fine_exponent": _scalar(2.1, float),
    "generator.carry_weights": _Entry(
        _parse_weights("hand:0.35 pocket:0.3 shirt:0.2 purse:0.15"), _parse_weights, _render_weights
    ),
    "generator.pose_weights": _Entry(
        _parse_weights("sitting:0.4 standing:0.35 walking:0.25"), _parse_weights, _render_weights
    ),
    "gbc.n_estimators": _scalar(100, int),
    "gbc.learning_rate": _scalar(0.2, float),
    "gbc.max_depth": _scalar(3, int),
    "gbc.min_samples_leaf": _scalar(5, int),
    "net.hidden_layers": _Entry((256, 128, 64), _parse_widths, lambda v: " ".join(map(str, v))),
    "net.learning_rate": _scalar(0.02, float),
    "net.beta1": _scalar(0.9, float),
    "net.beta2": _scalar(0.999, float),
    "net.epsilon": _scalar(1e-8, float),
    "net.scheduler_gamma": _scalar(0.9, float),
    "net.scheduler_step": _scalar(10, int),
    "net.epochs": _scalar(1000, int),
    "net.batch_size": _scalar(256, int),
    "scoring.thresholds": _Entry(
        _parse_thresholds("fine:1.2 fine:1.8 fine:3.0 coarse:1.8"), _parse_thresholds, _render_thresholds
    ),
    "scoring.w_miss": _scalar(1.0, float),
    "scoring.w_fa": _scalar(1.0, float),
}

#: Keys that shape training artifacts; their fingerprint is stored with every
#: artifact and must match at prediction time.
_FINGERPRINT_KEYS = tuple(
    k for k in sorted(_ENTRIES)
    if k.startswith(("generator.", "gbc.", "net."))
    or k in ("run.seed", "run.feature_mask")
)


def derive_seed(master: int, stage: str) -> int:
    digest = hashlib.sha256(f"{master}/{stage}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


@dataclass
class RunConfig:
    values: dict[str, object]

    # -- construction ------------------------------------------------------

    @classmethod
    def default(cls) -> "RunConfig":
        return cls({k: e.default for k, e in _ENTRIES.items()})

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        cfg = cls.default()
        for line_no, raw in enumerate(text.split("\n"), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ConfigError(f"config line {line_no}: expected key = value")
            cfg.set(key.strip(), value.strip())
        return cfg

    def set(self, key: str, text: str):
        entry = _ENTRIES.get(key)
        if entry is None:
            raise ConfigError(f"unknown config key {key!r}")
        self.values[key] = entry.parse(text)

    def apply_set(self, assignment: str):
        key, sep, value = assignment.partition("=")
        if not sep:
            raise ConfigError(f"--set needs section.key=value, got {assignment!r}")
        self.set(key.strip(), value.strip())

    # -- rendering / identity ----------------------------------------------

    def canonical_text(self) -> str:
        lines = [f"{k} = {_ENTRIES[k].render(self.values[k])}" for k in sorted(_ENTRIES)]
        return "\n".join(lines) + "\n"

    def fingerprint(self) -> str:
        payload = "\n".join(
            f"{k} = {_ENTRIES[k].render(self.values[k])}" for k in _FINGERPRINT_KEYS
        )
        return hashlib.sha256(payload.encode()).hexdigest()

    # -- typed accessors -----------------------------------------------------

    def __getitem__(self, key: str):
        return self.values[key]

    @property
    def corpus_dir(self) -> str:
        return self.values["paths.corpus_dir"]

    @property
    def model_dir(self) -> str:
        return self.values["paths.model_dir"]

    @property
    def report_dir(self) -> str:
        return self.values["paths.report_dir"]

    @property
    def seed(self) -> int:
        return self.values["run.seed"]

    @property
    def look_mode(self) -> str:
        return self.values["run.look_mode"]

    @property
    def feature_mask(self) -> frozenset[str]:
        return frozenset(self.values["run.feature_mask"])

    def generator_config(self, stage: str) -> GeneratorConfig:
        v = self.values
        try:
            return GeneratorConfig(
                seed=derive_seed(self.seed, stage),
                events_per_class=v["generator.events_per_class"],
                grain_mix=v["generator.grain_mix"],
                shadowing_sigma=v["generator.shadowing_sigma"],
                sample_rate=v["generator.sample_rate"],
                look_step=v["generator.look_step"],
                coarse_params=PathLossParams(v["generator.coarse_tx"], v["generator.coarse_exponent"]),
                fine_params=PathLossParams(v["generator.fine_tx"], v["generator.fine_exponent"]),
                carry_weights=dict(v["generator.carry_weights"]),
                pose_weights=dict(v["generator.pose_weights"]),
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def gbc_config(self) -> GBCConfig:
        v = self.values
        try:
            return GBCConfig(
                n_estimators=v["gbc.n_estimators"],
                learning_rate=v["gbc.learning_rate"],
                max_depth=v["gbc.max_depth"],
                min_samples_leaf=v["gbc.min_samples_leaf"],
                seed=derive_seed(self.seed, "train.angle"),
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def net_config(self) -> NetConfig:
        v = self.values
        try:
            return NetConfig(
                hidden_layers=v["net.hidden_layers"],
                learning_rate=v["net.learning_rate"],
                beta1=v["net.beta1"],
                beta2=v["net.beta2"],
                epsilon=v["net.epsilon"],
                scheduler_gamma=v["net.scheduler_gamma"],
                scheduler_step=v["net.scheduler_step"],
                epochs=v["net.epochs"],
                batch_size=v["net.batch_size"],
                seed=derive_seed(self.seed, "train.distance"),
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def scoring_config(self) -> ScoringConfig:
        v = self.values
        try:
            return ScoringConfig(
                thresholds=tuple(
                    (Grain.COARSE if subset == "coarse" else Grain.FINE, dist)
                    for subset, dist in v["scoring.thresholds"]
                ),
                w_miss=v["scoring.w_miss"],
                w_fa=v["scoring.w_fa"],
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from None


def load_config(path: str | None, sets: list[str], seed: int | None = None,
                look: str | None = None, masks: list[str] | None = None) -> RunConfig:
    """Defaults <- config file <- --set overrides <- dedicated flags."""
    if path is None:
        cfg = RunConfig.default()
    else:
        try:
            with open(path, encoding="utf-8") as fh:
                cfg = RunConfig.from_text(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
    for assignment in sets:
        cfg.apply_set(assignment)
    if seed is not None:
        cfg.values["run.seed"] = int(seed)
    if look is not None:
        cfg.set("run.look_mode", look)
    if masks:
        cfg.set("run.feature_mask", " ".join(masks))
    return cfg
