"""Challenge-style scoring: distance estimates become contact decisions at a
threshold D, and miss / false-alarm rates combine into a normalized decision
cost. The time-overlap parameter is fixed at zero, so a decision depends on
distance alone.

Rounding to two decimals happens only in the text rendering; every stored
and averaged value keeps full precision.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .core import Grain
from .ingest import read_key_file, read_system_output


class ScoringError(ValueError):
    """Key/output mismatch or an unscorable subset."""


class UndefinedRateError(ScoringError):
    """A subset has no targets or no non-targets; its rates are undefined."""


def _default_thresholds() -> tuple[tuple[Grain, float], ...]:
    return (
        (Grain.FINE, 1.2),
        (Grain.FINE, 1.8),
        (Grain.FINE, 3.0),
        (Grain.COARSE, 1.8),
    )


@dataclass(frozen=True)
class ScoringConfig:
    thresholds: tuple[tuple[Grain, float], ...] = field(default_factory=_default_thresholds)
    w_miss: float = 1.0
    w_fa: float = 1.0
    overlap_seconds: float = 0.0  # T: the time component is out of scope, fixed at 0

    def __post_init__(self):
        if not self.thresholds:
            raise ValueError("at least one (subset, D) threshold is required")
        if any(d <= 0 for _, d in self.thresholds):
            raise ValueError("decision distances D must be positive")
        if self.w_miss <= 0 or self.w_fa <= 0:
            raise ValueError("weights must be positive")
        if self.overlap_seconds != 0.0:
            raise ValueError("time overlap T is fixed at 0")


def decide(distance_m: float, threshold_m: float) -> bool:
    """True = contact (TC4TL). The boundary is inclusive: D itself is a legal
    class value, so an estimate exactly at D counts as contact."""
    return distance_m <= threshold_m


def error_rates(ref: list[bool], hyp: list[bool]) -> tuple[float, float]:
    """(P_miss, P_fa) over aligned reference/hypothesis contact labels."""
    if len(ref) != len(hyp):
        raise ScoringError("reference and hypothesis label lists differ in length")
    n_target = sum(ref)
    n_nontarget = len(ref) - n_target
    if n_target == 0 or n_nontarget == 0:
        raise UndefinedRateError(
            f"rates undefined: {n_target} targets, {n_nontarget} non-targets"
        )
    misses = sum(1 for r, h in zip(ref, hyp) if r and not h)
    false_alarms = sum(1 for r, h in zip(ref, hyp) if not r and h)
    return misses / n_target, false_alarms / n_nontarget


def ndcf(p_miss: float, p_fa: float, w_miss: float = 1.0, w_fa: float = 1.0) -> float:
    """(w_miss P_miss + w_fa P_fa) / min(w_miss, w_fa); unit weights give the
    plain sum."""
    return (w_miss * p_miss + w_fa * p_fa) / min(w_miss, w_fa)


@dataclass(frozen=True)
class ScoreRow:
    subset: Grain
    threshold_m: float
    p_miss: float
    p_fa: float
    ndcf: float
    n_target: int | None  # None when re-read from a CSV, which drops counts
    n_nontarget: int | None
    valid: bool = True


@dataclass(frozen=True)
class ScoreReport:
    rows: tuple[ScoreRow, ...]
    avg_p_miss: float
    avg_p_fa: float
    avg_ndcf: float


def score_events(
    key: dict[str, tuple[float, Grain]],
    hyp: dict[str, float],
    config: ScoringConfig = ScoringConfig(),
) -> ScoreReport:
    missing = sorted(set(key) - set(hyp))
    if missing:
        raise ScoringError(f"output is missing event ids: {', '.join(missing)}")
    unknown = sorted(set(hyp) - set(key))
    if unknown:
        raise ScoringError(f"output contains event ids absent from the key: {', '.join(unknown)}")

    rows: list[ScoreRow] = []
    for subset, threshold in config.thresholds:
        ids = sorted(eid for eid, (_, grain) in key.items() if grain is subset)
        ref = [decide(key[eid][0], threshold) for eid in ids]
        labels = [decide(hyp[eid], threshold) for eid in ids]
        n_target = sum(ref)
        n_nontarget = len(ref) - n_target
        try:
            p_miss, p_fa = error_rates(ref, labels)
        except UndefinedRateError:
            rows.append(ScoreRow(subset, threshold, float("nan"), float("nan"), float("nan"),
                                 n_target, n_nontarget, valid=False))
            continue
        rows.append(
            ScoreRow(subset, threshold, p_miss, p_fa,
                     ndcf(p_miss, p_fa, config.w_miss, config.w_fa),
                     n_target, n_nontarget)
        )

    valid = [r for r in rows if r.valid]
    if not valid:
        raise ScoringError("no threshold produced a scorable subset")
    k = len(valid)
    return ScoreReport(
        rows=tuple(rows),
        avg_p_miss=sum(r.p_miss for r in valid) / k,
        avg_p_fa=sum(r.p_fa for r in valid) / k,
        avg_ndcf=sum(r.ndcf for r in valid) / k,
    )


def score_run(key_path, output_path, config: ScoringConfig = ScoringConfig()) -> ScoreReport:
    key = read_key_file(key_path)
    pairs = read_system_output(output_path)
    hyp: dict[str, float] = {}
    duplicates = []
    for event_id, metres in pairs:
        if event_id in hyp:
            duplicates.append(event_id)
        hyp[event_id] = metres
    if duplicates:
        raise ScoringError(f"duplicate event ids in output: {', '.join(sorted(set(duplicates)))}")
    return score_events(key, hyp, config)


# ---------------------------------------------------------------------------
# Rendering

def _subset_name(grain: Grain) -> str:
    return f"{grain.value}_grain"


def render_text(report: ScoreReport, title: str = "") -> str:
    lines = []
    if title:
        lines.append(title)
    lines.append(f"{'subset':<14}{'D':>6}  {'P_miss':>7}{'P_fa':>7}{'nDCF':>7}  {'targets':>8}{'nontgt':>7}")
    for r in report.rows:
        if r.valid:
            cells = f"{r.p_miss:>7.2f}{r.p_fa:>7.2f}{r.ndcf:>7.2f}"
        else:
            cells = f"{'n/a':>7}{'n/a':>7}{'n/a':>7}"
        counts = "" if r.n_target is None else f"  {r.n_target:>8}{r.n_nontarget:>7}"
        lines.append(f"{_subset_name(r.subset):<14}{r.threshold_m:>6.2f}  {cells}{counts}")
    lines.append(
        f"{'average':<14}{'':>6}  {report.avg_p_miss:>7.2f}{report.avg_p_fa:>7.2f}{report.avg_ndcf:>7.2f}"
    )
    return "\n".join(lines) + "\n"


def render_csv(report: ScoreReport) -> str:
    lines = ["subset,D,p_miss,p_fa,ndcf"]
    for r in report.rows:
        if r.valid:
            lines.append(
                f"{_subset_name(r.subset)},{r.threshold_m!r},{r.p_miss!r},{r.p_fa!r},{r.ndcf!r}"
            )
        else:
            lines.append(f"{_subset_name(r.subset)},{r.threshold_m!r},,,")
    lines.append(f"average,,{report.avg_p_miss!r},{report.avg_p_fa!r},{report.avg_ndcf!r}")
    return "\n".join(lines) + "\n"


def read_report_csv(path) -> ScoreReport:
    """Reload a rendered CSV report (per-row counts are not stored there)."""
    rows: list[ScoreRow] = []
    averages = None
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "subset,D,p_miss,p_fa,ndcf":
            raise ScoringError(f"{path} is not a score report CSV")
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            subset, d, p_miss, p_fa, cost = line.split(",")
            if subset == "average":
                averages = (float(p_miss), float(p_fa), float(cost))
                continue
            grain = Grain.COARSE if subset.startswith("coarse") else Grain.FINE
            if p_miss == "":
                rows.append(ScoreRow(grain, float(d), float("nan"), float("nan"), float("nan"),
                                     None, None, valid=False))
            else:
                rows.append(ScoreRow(grain, float(d), float(p_miss), float(p_fa), float(cost),
                                     None, None))
    if averages is None:
        raise ScoringError(f"{path} has no average row")
    return ScoreReport(tuple(rows), *averages)
