"""
Experiment reports: rows, aggregates, curves and their files.

A run directory holds:

    report.json    full report (deterministic for a given config and seed)
    report.csv     one row per measurement (CSV_COLUMNS)
    timing.json    wall-time metadata, kept apart so report.json stays byte-stable
    summary.csv    macro / micro aggregates (written by the report command)
"""

import csv
import io
from dataclasses import asdict, dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.utils.common_functions import PathLike, read_json, write_file_text, write_json
from src.utils.exceptions import PeasError, ReportError
from src.utils.logger import get_logger

logger = get_logger(__name__)

REPORT_JSON = "report.json"
REPORT_CSV = "report.csv"
TIMING_JSON = "timing.json"
SUMMARY_CSV = "summary.csv"

CSV_COLUMNS = (
    "dataset", "victim", "surrogate", "strategy", "sampling", "attack",
    "epsilon", "n", "asr", "ci_low", "ci_high", "pool_size", "seed",
)
SUMMARY_COLUMNS = ("strategy", "sampling", "attack", "epsilon", "n", "macro_asr", "micro_asr", "pairs", "samples")

# report names of boosted attacks, e.g. BTA-PEAS
ATTACK_NAMES = {"pgd": "BTA", "fgsm": "FGSM", "timi": "TIMI", "simba": "SimBA", "external": "EXT"}

GroupKey = Tuple[str, str, str, float, int]


@dataclass
class ReportRow:
    """
    One measurement: ASR of one strategy for one (victim, surrogate) pair.

    Baseline rows use sampling "none" and n = 0.
    """
    dataset: str
    victim: str
    surrogate: str
    strategy: str
    sampling: str
    attack: str
    epsilon: float
    n: int
    asr: float
    ci_low: float
    ci_high: float
    pool_size: int
    seed: int
    successes: int = 0
    mean_queries: Optional[float] = None
    median_queries: Optional[float] = None

    def __post_init__(self) -> None:
        if self.victim == self.surrogate:
            raise ReportError(f"Report row with victim == surrogate ({self.victim})")
        if not 0.0 <= self.asr <= 1.0:
            raise ReportError(f"ASR out of range: {self.asr}")

    @property
    def pair_id(self) -> str:
        return f"{self.victim}|{self.surrogate}"

    @property
    def group(self) -> GroupKey:
        return self.strategy, self.sampling, self.attack, self.epsilon, self.n


@dataclass
class Curve:
    """
    ASR as a function of one swept value.

    Attributes:
        series: "<attack>/<strategy>/<sampling>".
        scope: "mean", "pair:<victim>|<surrogate>" or "victim:<id>".
        axis: "n" or "epsilon".
        x: Swept values.
        asr: ASR per value.
        ci_low: Bootstrap lower bounds (None for averaged scopes).
        ci_high: Bootstrap upper bounds (None for averaged scopes).
    """
    series: str
    scope: str
    axis: str
    x: List[float] = field(default_factory=list)
    asr: List[float] = field(default_factory=list)
    ci_low: List[Optional[float]] = field(default_factory=list)
    ci_high: List[Optional[float]] = field(default_factory=list)


@dataclass
class ExperimentReport:
    """
    Result of one harness run.

    Attributes:
        kind: "pairwise", "ablate", "sweep-n", "sweep-eps" or "sweep-aug".
        rows: Every measurement.
        curves: Sweep curves (empty for pairwise runs).
        aggregates: Macro (over pairs) and micro (over samples) ASR per group.
        boosts: X-PEAS over X ratios per attack.
        analysis: Extra observations, e.g. natural error rates of un-attacked candidates.
        candidates: Per-sample candidate dumps when enabled.
        metadata: Config, config hash, seed, pair ids and run flags.
        timing: Wall-time figures (not part of report.json).
    """
    kind: str
    rows: List[ReportRow] = field(default_factory=list)
    curves: List[Curve] = field(default_factory=list)
    aggregates: List[Dict[str, Any]] = field(default_factory=list)
    boosts: List[Dict[str, Any]] = field(default_factory=list)
    analysis: Dict[str, Any] = field(default_factory=dict)
    candidates: List[Dict[str, Any]] = field(default_factory=list)
    metadata: Dict[str, Any] = field(default_factory=dict)
    timing: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        """JSON form without timing."""
        data = asdict(self)
        data.pop("timing")
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any], timing: Optional[Dict[str, Any]] = None) -> "ExperimentReport":
        try:
            return cls(
                kind=data["kind"],
                rows=[ReportRow(**row) for row in data.get("rows", [])],
                curves=[Curve(**curve) for curve in data.get("curves", [])],
                aggregates=list(data.get("aggregates", [])),
                boosts=list(data.get("boosts", [])),
                analysis=dict(data.get("analysis", {})),
                candidates=list(data.get("candidates", [])),
                metadata=dict(data.get("metadata", {})),
                timing=dict(timing or {}),
            )
        except (KeyError, TypeError) as e:
            raise ReportError(f"Malformed report data: {e}") from e


def aggregate_rows(rows: Sequence[ReportRow]) -> List[Dict[str, Any]]:
    """
    Macro and micro ASR per (strategy, sampling, attack, epsilon, n), in first-seen order.

    Macro averages the per-pair ASRs; micro pools every sample of every pair.
    """
    groups: Dict[GroupKey, List[ReportRow]] = {}
    for row in rows:
        groups.setdefault(row.group, []).append(row)
    out = []
    for (strategy, sampling, attack, epsilon, n), members in groups.items():
        samples = sum(r.pool_size for r in members)
        out.append({
            "strategy": strategy,
            "sampling": sampling,
            "attack": attack,
            "epsilon": epsilon,
            "n": n,
            "macro_asr": float(np.mean([r.asr for r in members])),
            "micro_asr": sum(r.successes for r in members) / samples if samples else 0.0,
            "pairs": len(members),
            "samples": samples,
        })
    return out


def _macro(rows: Sequence[ReportRow]) -> float:
    return float(np.mean([r.asr for r in rows])) if rows else 0.0


def compute_boosts(rows: Sequence[ReportRow]) -> List[Dict[str, Any]]:
    """
    macro ASR(X-PEAS) / macro ASR(X) per attack, epsilon, sampling and n,
    with the largest per-pair ratio. Ratios over a zero baseline are None.
    """
    baselines: Dict[Tuple[str, float], Dict[str, ReportRow]] = {}
    boosted: Dict[Tuple[str, float, str, int], Dict[str, ReportRow]] = {}
    for row in rows:
        if row.strategy == "baseline":
            baselines.setdefault((row.attack, row.epsilon), {})[row.pair_id] = row
        elif row.strategy == "top1-adversarial":
            boosted.setdefault((row.attack, row.epsilon, row.sampling, row.n), {})[row.pair_id] = row
    out = []
    for (attack, epsilon, sampling, n), peas_rows in boosted.items():
        base_rows = baselines.get((attack, epsilon))
        if not base_rows:
            continue
        base_macro = _macro([base_rows[p] for p in peas_rows if p in base_rows])
        peas_macro = _macro(list(peas_rows.values()))
        pair_ratios = [
            peas_rows[p].asr / base_rows[p].asr
            for p in peas_rows
            if p in base_rows and base_rows[p].asr > 0
        ]
        out.append({
            "name": f"{ATTACK_NAMES.get(attack, attack.upper())}-PEAS",
            "attack": attack,
            "epsilon": epsilon,
            "sampling": sampling,
            "n": n,
            "baseline_asr": base_macro,
            "peas_asr": peas_macro,
            "boost": peas_macro / base_macro if base_macro > 0 else None,
            "max_pair_boost": max(pair_ratios) if pair_ratios else None,
        })
    return out


def build_curves(rows: Sequence[ReportRow], axis: str, scope: str = "pair") -> List[Curve]:
    """
    Curves of ASR over ``axis`` ("n" or "epsilon") for every series.

    Args:
        scope: "pair" for one curve per pair plus their mean; "victim" for one
            curve per victim averaged over its surrogates, plus the overall mean.
    """
    series: Dict[str, Dict[str, Dict[float, List[ReportRow]]]] = {}
    for row in rows:
        if row.strategy == "baseline" and axis == "n":
            continue
        name = f"{row.attack}/{row.strategy}/{row.sampling}"
        x = float(row.n) if axis == "n" else row.epsilon
        keys = ["mean", f"pair:{row.pair_id}" if scope == "pair" else f"victim:{row.victim}"]
        for key in keys:
            series.setdefault(name, {}).setdefault(key, {}).setdefault(x, []).append(row)
    curves = []
    for name, scopes in series.items():
        for key, points in scopes.items():
            xs = sorted(points)
            single = key.startswith("pair:")
            curves.append(Curve(
                series=name,
                scope=key,
                axis=axis,
                x=xs,
                asr=[_macro(points[x]) for x in xs],
                ci_low=[points[x][0].ci_low if single else None for x in xs],
                ci_high=[points[x][0].ci_high if single else None for x in xs],
            ))
    return curves


def finalize_report(report: ExperimentReport) -> ExperimentReport:
    """Fill aggregates and boosts from the rows."""
    report.aggregates = aggregate_rows(report.rows)
    report.boosts = compute_boosts(report.rows)
    return report


def _rows_csv(rows: Sequence[ReportRow]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        values = asdict(row)
        writer.writerow([repr(values[c]) if isinstance(values[c], float) else values[c] for c in CSV_COLUMNS])
    return buffer.getvalue()


def _run_dir(directory: Path, kind: str) -> Path:
    stamp = datetime.now().strftime("%Y%m%d-%H%M%S")
    candidate = directory / f"{kind}-{stamp}"
    suffix = 1
    while candidate.exists():
        candidate = directory / f"{kind}-{stamp}-{suffix}"
        suffix += 1
    return candidate


def write_report(report: ExperimentReport, directory: PathLike) -> Path:
    """
    Write a report into a new timestamped subdirectory of ``directory``.

    Returns:
        Path: The run directory.

    Raises:
        ReportError: If the files cannot be written.
    """
    run_dir = _run_dir(Path(directory), report.kind)
    try:
        run_dir.mkdir(parents=True, exist_ok=False)
        write_json(run_dir / REPORT_JSON, report.to_dict())
        write_file_text(run_dir / REPORT_CSV, _rows_csv(report.rows))
        write_json(run_dir / TIMING_JSON, report.timing)
    except (OSError, PeasError) as e:
        raise ReportError(f"Cannot write report to {run_dir}: {e}") from e
    logger.info("✅ Report written to %s", run_dir)
    return run_dir


def load_report(directory: PathLike) -> ExperimentReport:
    """
    Load a run directory written by ``write_report``.

    Raises:
        ReportError: If report.json is missing or malformed.
    """
    root = Path(directory)
    path = root / REPORT_JSON
    if not path.is_file():
        raise ReportError(f"No {REPORT_JSON} in {root}")
    try:
        data = read_json(path)
        timing = read_json(root / TIMING_JSON) if (root / TIMING_JSON).is_file() else {}
    except PeasError as e:
        raise ReportError(f"Cannot read report in {root}: {e}") from e
    return ExperimentReport.from_dict(data, timing)


def write_summary(report: ExperimentReport, directory: PathLike) -> Path:
    """Write summary.csv (one row per aggregate) next to the report and return its path."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(SUMMARY_COLUMNS)
    for entry in report.aggregates or aggregate_rows(report.rows):
        writer.writerow([repr(entry[c]) if isinstance(entry[c], float) else entry[c] for c in SUMMARY_COLUMNS])
    path = Path(directory) / SUMMARY_CSV
    try:
        write_file_text(path, buffer.getvalue())
    except PeasError as e:
        raise ReportError(f"Cannot write {path}: {e}") from e
    return path

