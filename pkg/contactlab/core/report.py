"""
Check reports: per-point residual records, summary statistics, verdicts and
the three output formats (human table, JSON lines, CSV).
"""

import csv
import json
import math
from collections.abc import Iterable, Mapping, Sequence
from typing import IO, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from contactlab import __version__

DEFAULT_TOLERANCE = 1e-8

Verdict = Literal["pass", "fail", "not-applicable", "error"]
Expectation = Literal["pass", "fail", "not-applicable", "record", "exceeds"]


class PointRecord(BaseModel):
    scenario: str
    point: list[float]
    residuals: dict[str, float]
    passed: bool = Field(alias="pass")
    trusted: bool
    values: dict[str, float] = Field(default_factory=dict)
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    @property
    def worst(self) -> float:
        return max(self.residuals.values(), default=0.0)

    def to_json(self) -> dict:
        exclude = None if self.values else {"values"}
        return self.model_dump(by_alias=True, exclude=exclude)


class Summary(BaseModel):
    count: int
    trusted: int
    max: float
    mean: float
    p99: float
    model_config = ConfigDict(extra="forbid")


class Provenance(BaseModel):
    tolerance: float
    seed: int | None = None
    sampling: str | None = None
    variant: str | None = None
    convention: str | None = None
    engine_version: str = __version__
    model_config = ConfigDict(extra="forbid")


class CheckReport(BaseModel):
    scenario: str
    records: list[PointRecord]
    summary: Summary
    verdict: Verdict
    provenance: Provenance
    notes: dict[str, str] = Field(default_factory=dict)
    expectation: Expectation | None = None
    met: bool | None = None
    model_config = ConfigDict(extra="forbid")

    def residual(self, name: str) -> np.ndarray:
        """Column of one residual across records (NaN where absent)."""
        return np.array([r.residuals.get(name, math.nan) for r in self.records])

    def value(self, name: str) -> np.ndarray:
        return np.array([r.values.get(name, math.nan) for r in self.records])

    def summary_json(self) -> dict:
        out = {
            **self.summary.model_dump(),
            "verdict": self.verdict,
            "provenance": self.provenance.model_dump(),
        }
        if self.notes:
            out["notes"] = self.notes
        if self.expectation is not None:
            out["expectation"] = self.expectation
            out["met"] = self.met
        return out


def summarize(records: Sequence[PointRecord]) -> Summary:
    """Statistics of the per-point worst residual over trusted records."""
    worst = [r.worst for r in records if r.trusted]
    if not worst:
        return Summary(count=len(records), trusted=0, max=0.0, mean=0.0, p99=0.0)
    return Summary(
        count=len(records),
        trusted=len(worst),
        max=float(max(worst)),
        mean=math.fsum(worst) / len(worst),
        p99=float(np.percentile(np.asarray(worst), 99)),
    )


def verdict_of(summary: Summary, tolerance: float) -> Verdict:
    return "pass" if summary.max < tolerance else "fail"


def _clean(v: float) -> float:
    return math.inf if math.isnan(v) else float(v)


def build_report(
    scenario: str,
    points: np.ndarray,
    residuals: Mapping[str, np.ndarray],
    *,
    tolerance: float = DEFAULT_TOLERANCE,
    trusted: np.ndarray | None = None,
    values: Mapping[str, np.ndarray] | None = None,
    notes: Mapping[str, str] | None = None,
    provenance: Mapping[str, object] | None = None,
    verdict: Verdict | None = None,
) -> CheckReport:
    """Assemble a report from per-point residual arrays.

    Args:
        residuals: name -> (N,) array; counted towards pass/fail.
        trusted: (N,) mask; untrusted points are reported but not counted.
        values: name -> (N,) array of measured quantities, never counted.
        verdict: forced verdict (e.g. "not-applicable"); computed otherwise.
    """
    n = points.shape[0]
    trusted = np.ones(n, dtype=bool) if trusted is None else np.asarray(trusted)
    columns = {k: np.broadcast_to(np.asarray(v, dtype=np.float64), (n,)) for k, v in residuals.items()}
    extra = {k: np.broadcast_to(np.asarray(v, dtype=np.float64), (n,)) for k, v in (values or {}).items()}
    records = []
    for i in range(n):
        res = {k: _clean(col[i]) for k, col in columns.items()}
        records.append(
            PointRecord(
                scenario=scenario,
                point=[float(c) for c in points[i]],
                residuals=res,
                passed=all(v < tolerance for v in res.values()),
                trusted=bool(trusted[i]),
                values={k: float(col[i]) for k, col in extra.items()},
            )
        )
    summary = summarize(records)
    return CheckReport(
        scenario=scenario,
        records=records,
        summary=summary,
        verdict=verdict or verdict_of(summary, tolerance),
        provenance=Provenance(tolerance=tolerance, **(provenance or {})),
        notes=dict(notes or {}),
    )


def error_report(scenario: str, message: str, provenance: Provenance) -> CheckReport:
    return CheckReport(
        scenario=scenario,
        records=[],
        summary=summarize([]),
        verdict="error",
        provenance=provenance,
        notes={"error": message},
    )


def _merge_notes(target: dict[str, str], notes: Mapping[str, str]) -> None:
    for k, v in notes.items():
        if k in target and target[k] != v:
            target[k] = "mixed"
        else:
            target.setdefault(k, v)


def merge_reports(
    scenario: str, reports: Sequence[CheckReport], tolerance: float
) -> CheckReport:
    """Join reports of several checks over the same points into one.

    Records are zipped by point index. A not-applicable part keeps its
    residuals as information but does not decide the verdict; an error wins.
    """
    if not reports:
        raise ValueError("Nothing to merge")
    if any(r.verdict == "error" for r in reports):
        bad = next(r for r in reports if r.verdict == "error")
        return bad.model_copy(update={"scenario": scenario})
    counted = [r for r in reports if r.verdict != "not-applicable"]
    records = []
    for parts in zip(*(r.records for r in reports), strict=True):
        residuals: dict[str, float] = {}
        values: dict[str, float] = {}
        decisive: dict[str, float] = {}
        for report, rec in zip(reports, parts, strict=True):
            values.update(rec.values)
            if report.verdict == "not-applicable":
                values.update(rec.residuals)
                continue
            residuals.update(rec.residuals)
            decisive.update(rec.residuals)
        records.append(
            PointRecord(
                scenario=scenario,
                point=parts[0].point,
                residuals=residuals,
                passed=all(v < tolerance for v in decisive.values()),
                trusted=all(p.trusted for p in parts),
                values=values,
            )
        )
    notes: dict[str, str] = {}
    for r in reports:
        _merge_notes(notes, r.notes)
    summary = summarize(records)
    verdict: Verdict = verdict_of(summary, tolerance) if counted else "not-applicable"
    return CheckReport(
        scenario=scenario,
        records=records,
        summary=summary,
        verdict=verdict,
        provenance=reports[0].provenance,
        notes=notes,
    )


def concat_reports(
    scenario: str, reports: Sequence[CheckReport], tolerance: float
) -> CheckReport:
    """Concatenate chunk reports in order and recompute the summary."""
    if any(r.verdict == "error" for r in reports):
        return next(r for r in reports if r.verdict == "error")
    records = [rec for r in reports for rec in r.records]
    notes: dict[str, str] = {}
    for r in reports:
        _merge_notes(notes, r.notes)
    summary = summarize(records)
    if all(r.verdict == "not-applicable" for r in reports):
        verdict: Verdict = "not-applicable"
    else:
        verdict = verdict_of(summary, tolerance)
    return CheckReport(
        scenario=scenario,
        records=records,
        summary=summary,
        verdict=verdict,
        provenance=reports[0].provenance,
        notes=notes,
    )


# Output


def write_jsonl(report: CheckReport, out: IO[str]) -> None:
    for rec in report.records:
        out.write(json.dumps(rec.to_json()) + "\n")
    out.write(json.dumps({"scenario": report.scenario, "summary": report.summary_json()}) + "\n")


def _residual_columns(report: CheckReport) -> list[str]:
    names: dict[str, None] = {}
    for rec in report.records:
        names.update(dict.fromkeys(rec.residuals))
    return list(names)


def write_csv(report: CheckReport, out: IO[str]) -> None:
    names = _residual_columns(report)
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["scenario", "x", "y", "z", *names, "pass", "trusted"])
    for rec in report.records:
        writer.writerow(
            [
                rec.scenario,
                *(repr(c) for c in rec.point),
                *(repr(rec.residuals[k]) if k in rec.residuals else "" for k in names),
                str(rec.passed).lower(),
                str(rec.trusted).lower(),
            ]
        )


def write_table(reports: Iterable[CheckReport], out: IO[str]) -> None:
    header = f"{'scenario':<34} {'points':>6} {'max':>10} {'mean':>10} {'p99':>10}  {'verdict':<14} {'expect':<14}"
    out.write(header + "\n")
    out.write("-" * len(header) + "\n")
    for r in reports:
        s = r.summary
        expect = ""
        if r.expectation is not None:
            expect = f"{r.expectation} ({'ok' if r.met else 'MISSED'})"
        out.write(
            f"{r.scenario:<34} {s.count:>6} {s.max:>10.3e} {s.mean:>10.3e} "
            f"{s.p99:>10.3e}  {r.verdict:<14} {expect:<14}\n"
        )
        if "error" in r.notes:
            out.write(f"    error: {r.notes['error']}\n")


def emit_report(
    report: CheckReport | Sequence[CheckReport],
    fmt: Literal["table", "jsonl", "csv"],
    out: IO[str],
) -> None:
    """Write one or several reports to `out` in the requested format."""
    reports = [report] if isinstance(report, CheckReport) else list(report)
    if fmt == "table":
        write_table(reports, out)
    elif fmt == "jsonl":
        for r in reports:
            write_jsonl(r, out)
    elif fmt == "csv":
        for r in reports:
            write_csv(r, out)
    else:
        raise ValueError(f"Unknown report format '{fmt}'")
