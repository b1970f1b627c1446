"""Hypothesis tests with a Shapiro-Wilk gate between parametric and rank-based routes."""

from __future__ import annotations

import logging
import math
from enum import Enum
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy import stats

from dyad_influence.domain.errors import ConfigError, DegenerateSampleError, InsufficientSamplesError

logger = logging.getLogger(__name__)

NORMALITY_ALPHA = 0.05
EXACT_RANK_SUM_MAX = 10
EXACT_SIGNED_RANK_MAX = 12
SHAPIRO_MAX_N = 5000

ArrayLike = Union[Sequence[float], np.ndarray]


class TestResult(BaseModel):
    __test__ = False  # not a pytest class

    model_config = ConfigDict(frozen=True)

    statistic: float
    p_value: float = Field(ge=0.0, le=1.0)
    test_name: str
    n: Tuple[int, ...] = ()
    df: Optional[float] = None
    route: Optional[str] = None

    @field_validator("statistic")
    @classmethod
    def validate_statistic(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("test statistic must be finite")
        return value


class TTestKind(str, Enum):
    ONE_SAMPLE = "one-sample"
    TWO_SAMPLE = "two-sample"
    PAIRED = "paired"


class RankTestKind(str, Enum):
    SIGNED_RANK = "signed-rank"
    RANK_SUM = "rank-sum"


class RankMethod(str, Enum):
    AUTO = "auto"
    EXACT = "exact"
    APPROX = "approx"


def _sample(values: ArrayLike, name: str, minimum: int = 1) -> np.ndarray:
    array = np.asarray(values, dtype=float).ravel()
    if array.size < minimum:
        raise InsufficientSamplesError(f"sample {name} needs at least {minimum} values, got {array.size}")
    if not np.all(np.isfinite(array)):
        raise DegenerateSampleError(f"sample {name} contains non-finite values")
    return array


def _clip_p(p: float) -> float:
    return float(min(1.0, max(0.0, p)))


def t_test(
    kind: TTestKind,
    x: ArrayLike,
    y: Union[ArrayLike, float, None] = None,
    equal_var: bool = True,
) -> TestResult:
    """Student t test, two-sided. ``y`` is mu for the one-sample form.

    The two-sample form pools variances unless ``equal_var`` is False (Welch).
    """
    x = _sample(x, "x", 2)
    if kind is TTestKind.ONE_SAMPLE:
        mu = 0.0 if y is None else float(y)
        if np.ptp(x) == 0:
            raise DegenerateSampleError("one-sample t test on a constant sample")
        result = stats.ttest_1samp(x, mu)
        df: float = x.size - 1
        n: Tuple[int, ...] = (x.size,)
    else:
        if y is None:
            raise ConfigError(f"{kind.value} t test needs a second sample")
        y = _sample(y, "y", 2)
        if kind is TTestKind.PAIRED:
            if x.size != y.size:
                raise ConfigError("paired samples must have equal length")
            if np.ptp(x - y) == 0:
                raise DegenerateSampleError("paired differences have zero variance")
            result = stats.ttest_rel(x, y)
            df = x.size - 1
            n = (x.size,)
        else:
            if np.ptp(x) == 0 and np.ptp(y) == 0:
                raise DegenerateSampleError("both samples are constant")
            result = stats.ttest_ind(x, y, equal_var=equal_var)
            df = float(result.df) if not equal_var else x.size + y.size - 2
            n = (x.size, y.size)
    name = f"t-test {kind.value}" + ("" if equal_var or kind is not TTestKind.TWO_SAMPLE else " (welch)")
    return TestResult(statistic=float(result.statistic), p_value=_clip_p(result.pvalue), test_name=name, n=n, df=df)


def _doubled_midranks(values: np.ndarray) -> np.ndarray:
    return np.rint(2.0 * stats.rankdata(values)).astype(np.int64)


def _two_sided_from_counts(counts: np.ndarray, observed: int) -> float:
    total = counts.sum()
    lower = counts[: observed + 1].sum() / total
    upper = counts[observed:].sum() / total
    return _clip_p(2.0 * min(lower, upper))


def _exact_rank_sum_p(doubled_ranks: np.ndarray, n: int, observed: int) -> float:
    # counts[k, s]: subsets of size k with doubled rank sum s
    max_sum = int(doubled_ranks.sum())
    counts = np.zeros((n + 1, max_sum + 1), dtype=float)
    counts[0, 0] = 1.0
    for rank in doubled_ranks:
        counts[1:, rank:] += counts[:-1, : max_sum + 1 - rank].copy()
    return _two_sided_from_counts(counts[n], observed)


def _exact_signed_rank_p(doubled_ranks: np.ndarray, observed: int) -> float:
    max_sum = int(doubled_ranks.sum())
    counts = np.zeros(max_sum + 1, dtype=float)
    counts[0] = 1.0
    for rank in doubled_ranks:
        counts[rank:] += counts[: max_sum + 1 - rank].copy()
    return _two_sided_from_counts(counts, observed)


def _tie_term(values: np.ndarray) -> float:
    _, tie_counts = np.unique(values, return_counts=True)
    return float(np.sum(tie_counts**3 - tie_counts))


def _normal_p(statistic: float, mean: float, variance: float) -> float:
    if variance <= 0:
        raise DegenerateSampleError("rank statistic has zero variance")
    z = max(0.0, abs(statistic - mean) - 0.5) / math.sqrt(variance)
    return _clip_p(2.0 * stats.norm.sf(z))


def rank_test(
    kind: RankTestKind,
    x: ArrayLike,
    y: ArrayLike,
    method: RankMethod = RankMethod.AUTO,
) -> TestResult:
    """Wilcoxon rank tests with midranks for ties.

    Rank-sum: W is the rank sum of ``x``. Signed-rank: W is the sum of positive ranks of
    ``x - y`` after zero differences are dropped. The exact null distribution is used up
    to 10 (rank-sum, smaller sample) or 12 (signed-rank) observations.
    """
    x = _sample(x, "x")
    y = _sample(y, "y")
    if kind is RankTestKind.SIGNED_RANK:
        if x.size != y.size:
            raise ConfigError("signed-rank test needs paired samples of equal length")
        differences = x - y
        differences = differences[differences != 0]
        if differences.size == 0:
            raise DegenerateSampleError("all paired differences are zero")
        absolute = np.abs(differences)
        ranks = stats.rankdata(absolute)
        statistic = float(ranks[differences > 0].sum())
        n = differences.size
        exact = method is RankMethod.EXACT or (method is RankMethod.AUTO and n <= EXACT_SIGNED_RANK_MAX)
        if exact:
            p = _exact_signed_rank_p(_doubled_midranks(absolute), int(round(2 * statistic)))
        else:
            mean = n * (n + 1) / 4.0
            variance = n * (n + 1) * (2 * n + 1) / 24.0 - _tie_term(absolute) / 48.0
            p = _normal_p(statistic, mean, variance)
        sizes: Tuple[int, ...] = (n,)
    else:
        pooled = np.concatenate([x, y])
        if np.ptp(pooled) == 0:
            raise DegenerateSampleError("all observations are tied")
        ranks = stats.rankdata(pooled)
        statistic = float(ranks[: x.size].sum())
        n, m = x.size, y.size
        exact = method is RankMethod.EXACT or (method is RankMethod.AUTO and min(n, m) <= EXACT_RANK_SUM_MAX)
        if exact:
            p = _exact_rank_sum_p(_doubled_midranks(pooled), n, int(round(2 * statistic)))
        else:
            total = n + m
            mean = n * (total + 1) / 2.0
            variance = n * m / 12.0 * ((total + 1) - _tie_term(pooled) / (total * (total - 1)))
            p = _normal_p(statistic, mean, variance)
        sizes = (n, m)
    name = f"wilcoxon {kind.value} ({'exact' if exact else 'normal approx'})"
    return TestResult(statistic=statistic, p_value=p, test_name=name, n=sizes)


def ks_two_sample(x: ArrayLike, y: ArrayLike) -> TestResult:
    """D = sup |ECDF_x - ECDF_y| with the asymptotic Kolmogorov p-value at n_eff = nm/(n+m)."""
    try:
        x = _sample(x, "x")
        y = _sample(y, "y")
    except InsufficientSamplesError as exc:
        raise DegenerateSampleError(str(exc)) from exc
    statistic = float(stats.ks_2samp(x, y).statistic)
    effective = x.size * y.size / (x.size + y.size)
    p = _clip_p(stats.kstwobign.sf(math.sqrt(effective) * statistic))
    return TestResult(statistic=statistic, p_value=p, test_name="kolmogorov-smirnov two-sample", n=(x.size, y.size))


def pearson(x: ArrayLike, y: ArrayLike) -> TestResult:
    x = _sample(x, "x", 3)
    y = _sample(y, "y", 3)
    if x.size != y.size:
        raise ConfigError("pearson correlation needs samples of equal length")
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise DegenerateSampleError("pearson correlation needs non-constant samples")
    result = stats.pearsonr(x, y)
    r = float(np.clip(result.statistic, -1.0, 1.0))
    return TestResult(statistic=r, p_value=_clip_p(result.pvalue), test_name="pearson", n=(x.size,), df=x.size - 2)


def shapiro_wilk(x: ArrayLike) -> TestResult:
    x = _sample(x, "x", 3)
    if x.size > SHAPIRO_MAX_N:
        raise InsufficientSamplesError(f"shapiro-wilk accepts at most {SHAPIRO_MAX_N} values, got {x.size}")
    if np.ptp(x) == 0:
        raise DegenerateSampleError("shapiro-wilk on a constant sample")
    result = stats.shapiro(x)
    return TestResult(statistic=float(result.statistic), p_value=_clip_p(result.pvalue), test_name="shapiro-wilk", n=(x.size,))


def looks_normal(x: ArrayLike, alpha: float = NORMALITY_ALPHA) -> bool:
    try:
        return shapiro_wilk(x).p_value > alpha
    except DegenerateSampleError:
        return False


def gated_compare(x: ArrayLike, y: ArrayLike, paired: bool, alpha: float = NORMALITY_ALPHA) -> TestResult:
    if looks_normal(x, alpha) and looks_normal(y, alpha):
        kind = TTestKind.PAIRED if paired else TTestKind.TWO_SAMPLE
        result, route = t_test(kind, x, y), "parametric"
    else:
        kind_rank = RankTestKind.SIGNED_RANK if paired else RankTestKind.RANK_SUM
        result, route = rank_test(kind_rank, x, y), "nonparametric"
    logger.debug("gated compare routed to %s (%s)", route, result.test_name)
    return result.model_copy(update={"route": route})


def gated_one_sample(x: ArrayLike, mu: float = 0.0, alpha: float = NORMALITY_ALPHA) -> TestResult:
    values = _sample(x, "x", 3)
    if looks_normal(values, alpha):
        return t_test(TTestKind.ONE_SAMPLE, values, mu).model_copy(update={"route": "parametric"})
    shifted = rank_test(RankTestKind.SIGNED_RANK, values, np.full(values.size, mu))
    return shifted.model_copy(update={"route": "nonparametric"})
