"""Run manifests, evaluation orchestration and report emission."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Mapping, Sequence

from .corpus import Dataset, Split
from .evaluators import (
    EvalReport,
    EvaluationError,
    holdout_eval,
    ips_eval,
    paired_ttest,
    per_stratum_eval,
    stratified_eval,
)
from .metrics import MetricSpec, rank_all
from .models import Recommender
from .propensity import PropensityTable
from .strata import StrataAssignment, assign_strata, stratum_weights

METHODS = ("holdout", "ips", "stratified")
SIGNIFICANCE_ALPHA = 0.05


@dataclass(frozen=True)
class RunManifest:
    command: str
    config_digest: str
    seeds: list[int]
    input_digests: dict[str, str]
    artifact_paths: list[str]
    created_at: str

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True)


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def sha256_config(config: Mapping) -> str:
    return hashlib.sha256(
        json.dumps(config, sort_keys=True, default=str).encode()
    ).hexdigest()


def write_manifest(
    path: str | Path,
    command: str,
    config: Mapping,
    inputs: Iterable[str | Path] = (),
    artifacts: Iterable[str | Path] = (),
    seeds: Iterable[int] = (),
) -> RunManifest:
    manifest = RunManifest(
        command=command,
        config_digest=sha256_config(config),
        seeds=list(seeds),
        input_digests={str(p): sha256_file(p) for p in inputs},
        artifact_paths=[str(p) for p in artifacts],
        created_at=time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime()),
    )
    Path(path).write_text(manifest.to_json() + "\n")
    return manifest


@dataclass(frozen=True)
class ModelEvaluation:
    """All requested estimator outputs for one model at one metric spec."""

    model: str
    spec: MetricSpec
    reports: dict[str, EvalReport]


def evaluate_models(
    models: Sequence[Recommender],
    split: Split,
    spec: MetricSpec,
    methods: Sequence[str] = ("holdout",),
    K: int = 2,
    propensities: PropensityTable | None = None,
    assignment: StrataAssignment | None = None,
) -> list[ModelEvaluation]:
    """Evaluate every model with every requested estimator.

    Rankings are computed once per model and shared across estimators.
    The stratified method derives its assignment from the propensity table
    when one is not supplied.
    """
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown evaluation method {m!r}")
    needs_prop = "ips" in methods or ("stratified" in methods and assignment is None)
    if needs_prop and propensities is None:
        raise EvaluationError(
            "this evaluation needs a propensity table; run propensity fitting first"
        )
    weights = None
    if "stratified" in methods:
        if assignment is None:
            assignment = assign_strata(propensities, K)
        weights = stratum_weights(assignment, split.test)
    out: list[ModelEvaluation] = []
    for model in models:
        rankings = rank_all(model, split)
        reports: dict[str, EvalReport] = {}
        if "holdout" in methods:
            reports["holdout"] = holdout_eval(rankings, split.test, spec)
        if "ips" in methods:
            reports["ips"] = ips_eval(rankings, split.test, propensities, spec)
        if "stratified" in methods:
            per_stratum = per_stratum_eval(rankings, split.test, assignment, spec)
            reports["stratified"] = stratified_eval(per_stratum, weights, spec)
        out.append(ModelEvaluation(model=model.label, spec=spec, reports=reports))
    return out


def audit_report(report: EvalReport, tol: float = 1e-9) -> None:
    """Re-check the report's arithmetic invariants; raise on violation."""
    if report.per_stratum is not None:
        wsum = sum(r.weight for r in report.per_stratum.values())
        if abs(wsum - 1.0) > tol:
            raise EvaluationError(f"stratum weights sum to {wsum}, expected 1")
        combined = sum(
            r.value * r.weight for r in report.per_stratum.values() if r.value is not None
        )
        if abs(combined - report.overall) > max(tol, 1e-12 * abs(report.overall)):
            raise EvaluationError(
                f"stratified overall {report.overall} != weighted stratum sum {combined}"
            )
    if report.per_user:
        defined = [v for _, v in sorted(report.per_user.items()) if v is not None]
        if defined and abs(sum(defined) / len(defined) - report.overall) > tol:
            raise EvaluationError("overall is not the mean of the defined per-user values")


def report_records(
    evaluations: Sequence[ModelEvaluation],
    baseline: str | None = None,
    alpha: float = SIGNIFICANCE_ALPHA,
) -> list[dict]:
    """Flatten evaluations into serializable records (one per model x method),
    with paired t-test markers against a named baseline model."""
    baseline_reports: dict[str, EvalReport] = {}
    if baseline is not None:
        for ev in evaluations:
            if ev.model == baseline:
                baseline_reports = ev.reports
                break
        else:
            raise ValueError(f"baseline model {baseline!r} not among the evaluations")
    records = []
    for ev in evaluations:
        for method, report in ev.reports.items():
            audit_report(report)
            rec: dict = {
                "model": ev.model,
                "method": method,
                "metric": ev.spec.label,
                "cutoff": ev.spec.cutoff,
                "K": report.strata_K,
                "overall": report.overall,
                "n_users": sum(v is not None for v in report.per_user.values()),
            }
            if report.per_stratum is not None:
                rec["per_stratum"] = {
                    str(s): {
                        "value": r.value,
                        "weight": r.weight,
                        "users": r.user_count,
                        "interactions": r.interaction_count,
                        "low_support": r.low_support,
                    }
                    for s, r in report.per_stratum.items()
                }
            if baseline and ev.model != baseline and method in baseline_reports:
                base = baseline_reports[method]
                if report.per_user and base.per_user:
                    t, p = paired_ttest(report.per_user, base.per_user)
                    rec["t_vs_baseline"] = t
                    rec["p_vs_baseline"] = p
                    rec["significant_vs_baseline"] = bool(
                        p < alpha and report.overall > base.overall
                    )
            records.append(rec)
    return records


def write_records(records: Iterable[Mapping], stream: IO[str]) -> None:
    for rec in records:
        stream.write(json.dumps(rec, sort_keys=True) + "\n")


def read_records(stream: IO[str]) -> list[dict]:
    return [json.loads(line) for line in stream if line.strip()]


def write_table(records: Sequence[Mapping], stream: IO[str]) -> None:
    """Diff-friendly TSV projection of the evaluation records."""
    cols = ["model", "method", "metric", "K", "overall", "significant_vs_baseline"]
    stream.write("\t".join(cols) + "\n")
    for rec in records:
        stream.write(
            "\t".join("" if rec.get(c) is None else str(rec.get(c)) for c in cols) + "\n"
        )


def simpson_flags(
    evaluations: Sequence[ModelEvaluation], dominant_weight: float = 0.9
) -> list[dict]:
    """Model pairs where the holdout winner loses in the stratum carrying at
    least `dominant_weight` of the test feedback."""
    flags = []
    usable = [
        ev
        for ev in evaluations
        if "holdout" in ev.reports and ev.reports.get("stratified") is not None
    ]
    for a_idx in range(len(usable)):
        for b_idx in range(len(usable)):
            if a_idx == b_idx:
                continue
            a, b = usable[a_idx], usable[b_idx]
            if a.reports["holdout"].overall <= b.reports["holdout"].overall:
                continue
            for s, ra in a.reports["stratified"].per_stratum.items():
                rb = b.reports["stratified"].per_stratum[s]
                if (
                    ra.weight >= dominant_weight
                    and ra.value is not None
                    and rb.value is not None
                    and ra.value < rb.value
                ):
                    flags.append(
                        {
                            "holdout_winner": a.model,
                            "stratum_winner": b.model,
                            "stratum": s,
                            "stratum_weight": ra.weight,
                            "holdout": {a.model: a.reports["holdout"].overall,
                                        b.model: b.reports["holdout"].overall},
                            "stratum_values": {a.model: ra.value, b.model: rb.value},
                        }
                    )
    return flags
