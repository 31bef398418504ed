"""Effectiveness estimators over per-user rankings.

Three estimators share one per-item credit scale (discounted gain divided by
the user's ideal DCG) so their outputs are directly comparable:

* holdout: mean per-user nDCG over the test split;
* ips: each item's credit is reweighted by its inverse propensity, so unit
  propensities reproduce the holdout value exactly;
* stratified: per-stratum conditional means recombined by the strata's
  feedback weights (the marginalization over the confounder).
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from typing import Mapping

from scipy.stats import t as student_t

from .corpus import Dataset
from .metrics import AGG_MEAN_CREDIT, MetricSpec, RankedList, gain_at, ideal_dcg, ndcg
from .propensity import PropensityTable
from .strata import StrataAssignment, StratumWeights


class EvaluationError(ValueError):
    pass


@dataclass(frozen=True)
class StratumResult:
    value: float | None
    weight: float
    user_count: int
    interaction_count: int

    @property
    def low_support(self) -> bool:
        return self.user_count <= 1


@dataclass(frozen=True)
class EvalReport:
    method: str
    overall: float
    per_user: dict[str, float | None]
    spec: MetricSpec
    per_stratum: dict[int, StratumResult] | None = None
    strata_K: int | None = None


def _relevant_by_user(test: Dataset) -> dict[str, set[str]]:
    out: dict[str, set[str]] = {u: set() for u in test.user_index}
    for x in test.interactions:
        if x.relevant:
            out[x.user].add(x.item)
    return out


def _test_items_by_user(test: Dataset) -> dict[str, set[str]]:
    out: dict[str, set[str]] = {u: set() for u in test.user_index}
    for x in test.interactions:
        out[x.user].add(x.item)
    return out


def _mean(values: list[float]) -> float:
    return sum(values) / len(values)


def _mean_defined(per_user: Mapping[str, float | None], method: str) -> float:
    defined = [v for u, v in sorted(per_user.items()) if v is not None]
    if not defined:
        raise EvaluationError(f"{method}: no user has a defined metric value")
    return _mean(defined)


def _require_rankings(rankings: Mapping[str, RankedList], test: Dataset) -> None:
    missing = [u for u in test.user_index if u not in rankings]
    if missing:
        raise EvaluationError(f"missing rankings for {len(missing)} test users (e.g. {missing[0]!r})")


def holdout_eval(
    rankings: Mapping[str, RankedList], test: Dataset, spec: MetricSpec
) -> EvalReport:
    """Mean per-user metric over the holdout test set; users with no relevant
    test item are skipped."""
    _require_rankings(rankings, test)
    relevant = _relevant_by_user(test)
    per_user: dict[str, float | None] = {}
    if spec.aggregation == AGG_MEAN_CREDIT:
        test_items = _test_items_by_user(test)
        for u in test.user_index:
            per_user[u] = _mean_credit_user(rankings[u], test_items[u], relevant[u], spec)
    else:
        for u in test.user_index:
            per_user[u] = ndcg(rankings[u], relevant[u], spec)
    overall = _mean_defined(per_user, "holdout")
    return EvalReport(method="holdout", overall=overall, per_user=per_user, spec=spec)


def _mean_credit_user(
    ranked: RankedList, user_test_items: set[str], rel: set[str], spec: MetricSpec,
    propensities: Mapping[str, float] | None = None,
) -> float | None:
    # literal mean-of-credits aggregation: average the (possibly reweighted)
    # discounted gain over every test item of the user
    if not user_test_items:
        return None
    rank_of = ranked.rank_of
    gains = []
    for item in sorted(user_test_items):
        gain = gain_at(rank_of.get(item), spec.cutoff) if item in rel else 0.0
        if propensities is not None:
            gain = gain / propensities[item]
        gains.append(gain)
    return math.fsum(gains) / len(user_test_items)


def ips_eval(
    rankings: Mapping[str, RankedList],
    test: Dataset,
    propensities: PropensityTable,
    spec: MetricSpec,
) -> EvalReport:
    """Inverse-propensity-weighted estimator: each relevant item's credit is
    divided by its propensity. With all propensities equal to 1 this equals
    holdout_eval exactly."""
    _require_rankings(rankings, test)
    scores = propensities.scores
    for item in test.item_index:
        p = scores.get(item)
        if p is None:
            raise EvaluationError(f"no propensity for test item {item!r}")
        if p <= 0.0:
            raise EvaluationError(f"non-positive propensity for item {item!r}")
    relevant = _relevant_by_user(test)
    per_user: dict[str, float | None] = {}
    if spec.aggregation == AGG_MEAN_CREDIT:
        test_items = _test_items_by_user(test)
        for u in test.user_index:
            per_user[u] = _mean_credit_user(
                rankings[u], test_items[u], relevant[u], spec, propensities=scores
            )
    else:
        for u in test.user_index:
            rel = sorted(relevant[u])
            if not rel:
                per_user[u] = None
                continue
            rank_of = rankings[u].rank_of
            weighted = math.fsum(
                gain_at(rank_of.get(item), spec.cutoff) / scores[item] for item in rel
            )
            per_user[u] = weighted / ideal_dcg(len(rel), spec.cutoff)
    overall = _mean_defined(per_user, "ips")
    return EvalReport(method="ips", overall=overall, per_user=per_user, spec=spec)


def per_stratum_eval(
    rankings: Mapping[str, RankedList],
    test: Dataset,
    assignment: StrataAssignment,
    spec: MetricSpec,
) -> dict[int, StratumResult]:
    """Conditional per-stratum metric values.

    Rankings stay over the full candidate set; only the credited relevant
    items are restricted to the stratum. A user contributes to a stratum's
    mean only when they have at least one relevant test item there.
    Weights are filled in by stratified_eval; here they are reported as the
    stratum's share of all test interactions.
    """
    _require_rankings(rankings, test)
    relevant = _relevant_by_user(test)
    interaction_counts = {s: 0 for s in range(1, assignment.K + 1)}
    for x in test.interactions:
        s = assignment.stratum_of.get(x.item)
        if s is None:
            raise EvaluationError(f"test item {x.item!r} has no stratum")
        interaction_counts[s] += 1
    total = len(test)
    results: dict[int, StratumResult] = {}
    for s in range(1, assignment.K + 1):
        in_stratum = assignment.items_in(s)
        values: list[float] = []
        for u in sorted(test.user_index):
            restricted = relevant[u] & in_stratum
            v = ndcg(rankings[u], restricted, spec)
            if v is not None:
                values.append(v)
        value = _mean(values) if values else None
        results[s] = StratumResult(
            value=value,
            weight=interaction_counts[s] / total if total else 0.0,
            user_count=len(values),
            interaction_count=interaction_counts[s],
        )
    return results


def stratified_eval(
    per_stratum: Mapping[int, StratumResult | float],
    weights: StratumWeights,
    spec: MetricSpec = MetricSpec(),
) -> EvalReport:
    """Marginalize per-stratum values by the stratum weights:
    overall = sum_s value_s * P(X = s)."""
    wsum = sum(weights.weights.values())
    if abs(wsum - 1.0) > 1e-9:
        raise EvaluationError(f"stratum weights sum to {wsum}, expected 1")
    detailed: dict[int, StratumResult] = {}
    overall = 0.0
    for s, w in weights.weights.items():
        entry = per_stratum.get(s)
        value = entry.value if isinstance(entry, StratumResult) else entry
        if value is None or entry is None:
            if w > 0.0:
                raise EvaluationError(f"stratum {s} has weight {w} but no defined value")
            value = None
        else:
            overall += value * w
        if isinstance(entry, StratumResult):
            detailed[s] = StratumResult(
                value=value,
                weight=w,
                user_count=entry.user_count,
                interaction_count=entry.interaction_count,
            )
        else:
            detailed[s] = StratumResult(
                value=value, weight=w, user_count=0, interaction_count=weights.counts.get(s, 0)
            )
    return EvalReport(
        method="stratified",
        overall=overall,
        per_user={},
        spec=spec,
        per_stratum=detailed,
        strata_K=len(weights.weights),
    )


def paired_ttest(
    per_user_a: Mapping[str, float | None], per_user_b: Mapping[str, float | None]
) -> tuple[float, float]:
    """Two-sided paired t-test over users defined in both vectors.

    Zero-variance, nonzero-mean differences report p at the machine floor
    rather than dividing by zero; all-zero differences give (0, 1).
    """
    users = sorted(
        u
        for u in per_user_a
        if per_user_a[u] is not None and per_user_b.get(u) is not None
    )
    n = len(users)
    if n < 2:
        raise EvaluationError(f"paired t-test needs >= 2 paired users, got {n}")
    diffs = [per_user_a[u] - per_user_b[u] for u in users]
    mean = _mean(diffs)
    var = sum((d - mean) ** 2 for d in diffs) / (n - 1)
    if var == 0.0:
        if mean == 0.0:
            return 0.0, 1.0
        return math.copysign(math.inf, mean), sys.float_info.min
    t = mean / math.sqrt(var / n)
    p = 2.0 * float(student_t.sf(abs(t), n - 1))
    return t, min(p, 1.0)
