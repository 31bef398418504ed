"""Per-item exposure propensities from interaction counts.

The deployed system's exposure tendency is summarized by a single power-law
exponent fitted to the item interaction counts; per-item propensities are
then proportional to count^((gamma + 1) / 2) and rescaled so the most
exposed item has propensity 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import IO, Mapping

import numpy as np
from scipy.optimize import brentq
from scipy.special import zeta

from .corpus import Dataset


class EstimationError(ValueError):
    pass


@dataclass(frozen=True)
class GammaEstimate:
    gamma: float
    n_samples: int
    x_min: int = 1
    method: str = "mle"


@dataclass(frozen=True)
class PropensityTable:
    scores: dict[str, float]
    gamma: GammaEstimate
    item_counts: dict[str, int]
    normalization: str = "max_one"

    def __post_init__(self):
        if self.normalization != "max_one":
            raise ValueError(f"unknown normalization {self.normalization!r}")

    def __len__(self) -> int:
        return len(self.scores)


def _approximate_gamma(counts: np.ndarray, x_min: int) -> float:
    # Continuous-approximation estimator: 1 + n / sum(ln(x / (x_min - 0.5))).
    # The denominator is positive whenever counts >= x_min >= 1.
    return 1.0 + len(counts) / float(np.sum(np.log(counts / (x_min - 0.5))))


def _exact_gamma(counts: np.ndarray, x_min: int, gamma_max: float = 50.0) -> float:
    # Discrete power-law MLE: gamma solves  zeta'(g, x_min)/zeta(g, x_min)
    # = -mean(ln x).  Solved by bracketing the score function.
    mean_log = float(np.mean(np.log(counts)))

    def score(g: float) -> float:
        h = 1e-7 * g
        dz = (math.log(zeta(g + h, x_min)) - math.log(zeta(g - h, x_min))) / (2 * h)
        return dz + mean_log

    # score rises from -inf at gamma -> 1+ toward mean_log at large gamma,
    # so an interior root needs score(lo) < 0 < score(hi).  The lower edge
    # stays away from the zeta pole at gamma = 1.
    lo, hi = 1.0 + 1e-4, gamma_max
    if score(lo) >= 0.0 or score(hi) <= 0.0:
        raise EstimationError("no interior likelihood maximum for the given counts")
    return float(brentq(score, lo, hi, xtol=1e-9))


def fit_gamma(
    item_counts: Mapping[str, int], x_min: int = 1, method: str = "mle"
) -> GammaEstimate:
    """Fit the power-law exponent of the item interaction counts.

    method="mle" maximizes the discrete power-law likelihood (zeta
    normalization); method="approximate" uses the closed form
    1 + n / sum(ln(x / (x_min - 0.5))).  When every count equals x_min the
    exact likelihood has no interior maximum, so the closed form is used.
    """
    counts = np.array([c for c in item_counts.values() if c >= x_min], dtype=np.float64)
    if len(counts) < 2:
        raise EstimationError(f"need at least 2 items with count >= {x_min}, got {len(counts)}")
    if np.any(counts < 1):
        raise EstimationError("item counts must be positive integers")
    if method == "approximate":
        gamma = _approximate_gamma(counts, x_min)
    elif method == "mle":
        if np.all(counts == x_min):
            gamma = _approximate_gamma(counts, x_min)
        else:
            gamma = _exact_gamma(counts, x_min)
    else:
        raise ValueError(f"unknown method {method!r}")
    return GammaEstimate(gamma=gamma, n_samples=len(counts), x_min=x_min, method=method)


def estimate_propensities(dataset: Dataset, gamma: GammaEstimate) -> PropensityTable:
    """Per-item propensities proportional to count^((gamma + 1) / 2),
    scaled so the maximum score is exactly 1."""
    if len(dataset) == 0:
        raise EstimationError("empty dataset")
    if not math.isfinite(gamma.gamma) or gamma.gamma <= 0:
        raise EstimationError(f"invalid gamma {gamma.gamma}")
    exponent = (gamma.gamma + 1.0) / 2.0
    items = list(dataset.item_counts)
    raw = np.array([dataset.item_counts[i] for i in items], dtype=np.float64) ** exponent
    scores = raw / raw.max()
    return PropensityTable(
        scores=dict(zip(items, scores.tolist())),
        gamma=gamma,
        item_counts=dict(dataset.item_counts),
    )


def write_propensities(table: PropensityTable, stream: IO[str], delimiter: str = ",") -> None:
    """Export as item, count, score rows with the fitted gamma in a header comment."""
    stream.write(
        f"# gamma={table.gamma.gamma!r} n_samples={table.gamma.n_samples}"
        f" x_min={table.gamma.x_min} method={table.gamma.method}"
        f" normalization={table.normalization}\n"
    )
    for item in sorted(table.scores):
        stream.write(
            f"{item}{delimiter}{table.item_counts[item]}{delimiter}{table.scores[item]!r}\n"
        )


def read_propensities(stream: IO[str], delimiter: str = ",") -> PropensityTable:
    gamma: GammaEstimate | None = None
    scores: dict[str, float] = {}
    counts: dict[str, int] = {}
    for line in stream:
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            fields = dict(part.split("=", 1) for part in line[1:].split() if "=" in part)
            gamma = GammaEstimate(
                gamma=float(fields["gamma"]),
                n_samples=int(fields["n_samples"]),
                x_min=int(fields["x_min"]),
                method=fields.get("method", "mle"),
            )
            continue
        item, count, score = line.split(delimiter)
        scores[item] = float(score)
        counts[item] = int(count)
    if gamma is None:
        raise EstimationError("propensity file is missing its gamma header")
    return PropensityTable(scores=scores, gamma=gamma, item_counts=counts)
