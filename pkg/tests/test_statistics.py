import itertools
import math

import numpy as np
import pytest
from scipy import stats

from dyad_influence.domain.errors import ConfigError, DegenerateSampleError, InsufficientSamplesError
from dyad_influence.domain.statistics import (
    RankMethod,
    RankTestKind,
    TTestKind,
    gated_compare,
    gated_one_sample,
    ks_two_sample,
    pearson,
    rank_test,
    shapiro_wilk,
    t_test,
)

NORMAL_SCORES = stats.norm.ppf(np.linspace(0.05, 0.95, 15))
SKEWED = np.exp(np.arange(12, dtype=float))


def enumerated_rank_sum_p(x, y) -> float:
    pooled = np.concatenate([x, y])
    ranks = stats.rankdata(pooled)
    observed = ranks[: len(x)].sum()
    sums = np.array([ranks[list(subset)].sum() for subset in itertools.combinations(range(pooled.size), len(x))])
    return min(1.0, 2.0 * min(np.mean(sums <= observed), np.mean(sums >= observed)))


def enumerated_signed_rank_p(differences) -> float:
    differences = np.asarray(differences, dtype=float)
    ranks = stats.rankdata(np.abs(differences))
    observed = ranks[differences > 0].sum()
    sums = np.array([ranks[np.array(signs, dtype=bool)].sum() for signs in itertools.product([0, 1], repeat=ranks.size)])
    return min(1.0, 2.0 * min(np.mean(sums <= observed), np.mean(sums >= observed)))


def test_one_sample_t_matches_closed_form():
    x = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
    result = t_test(TTestKind.ONE_SAMPLE, x, 0.0)
    expected = 3.0 / (np.std(x, ddof=1) / math.sqrt(5))
    assert result.statistic == pytest.approx(expected)
    assert result.df == 4
    assert result.p_value == pytest.approx(2 * stats.t.sf(expected, 4))


def test_two_sample_t_pools_variance():
    x = np.array([2.0, 4.0, 6.0, 8.0])
    y = np.array([1.0, 2.0, 3.0])
    result = t_test(TTestKind.TWO_SAMPLE, x, y)
    pooled = (3 * np.var(x, ddof=1) + 2 * np.var(y, ddof=1)) / 5
    expected = (x.mean() - y.mean()) / math.sqrt(pooled * (1 / 4 + 1 / 3))
    assert result.statistic == pytest.approx(expected)
    assert result.df == 5
    assert result.n == (4, 3)


def test_welch_t_uses_satterthwaite_df():
    x = np.array([2.0, 4.0, 6.0, 8.0, 30.0])
    y = np.array([1.0, 2.0, 3.0])
    result = t_test(TTestKind.TWO_SAMPLE, x, y, equal_var=False)
    vx, vy = np.var(x, ddof=1) / 5, np.var(y, ddof=1) / 3
    df = (vx + vy) ** 2 / (vx**2 / 4 + vy**2 / 2)
    assert result.df == pytest.approx(df)
    assert result.test_name.endswith("(welch)")


def test_paired_t_equals_one_sample_on_differences():
    x = np.array([5.0, 6.5, 7.0, 8.2, 9.9])
    y = np.array([4.0, 6.0, 7.5, 7.0, 8.0])
    paired = t_test(TTestKind.PAIRED, x, y)
    single = t_test(TTestKind.ONE_SAMPLE, x - y)
    assert paired.statistic == pytest.approx(single.statistic)
    assert paired.p_value == pytest.approx(single.p_value)


def test_t_test_rejects_degenerate_input():
    with pytest.raises(DegenerateSampleError):
        t_test(TTestKind.ONE_SAMPLE, [2.0, 2.0, 2.0])
    with pytest.raises(InsufficientSamplesError):
        t_test(TTestKind.ONE_SAMPLE, [1.0])
    with pytest.raises(ConfigError):
        t_test(TTestKind.PAIRED, [1.0, 2.0], [1.0, 2.0, 3.0])
    with pytest.raises(ConfigError):
        t_test(TTestKind.TWO_SAMPLE, [1.0, 2.0])


def test_rank_sum_exact_for_separated_samples():
    result = rank_test(RankTestKind.RANK_SUM, [1.0, 2.0, 3.0], [4.0, 5.0, 6.0])
    assert result.statistic == 6.0
    assert result.p_value == pytest.approx(0.1)
    assert "exact" in result.test_name


def test_rank_sum_exact_matches_enumeration_with_ties():
    x = [1.0, 2.0, 2.0, 3.0]
    y = [2.0, 3.0, 4.0, 5.0, 5.0]
    result = rank_test(RankTestKind.RANK_SUM, x, y)
    assert result.p_value == pytest.approx(enumerated_rank_sum_p(x, y), abs=1e-12)


def test_signed_rank_exact_matches_enumeration():
    assert rank_test(RankTestKind.SIGNED_RANK, [1, 2, 3, 4, 5], [0, 0, 0, 0, 0]).p_value == pytest.approx(0.0625)
    rng = np.random.default_rng(4)
    for _ in range(5):
        differences = np.round(rng.normal(0.3, 1.0, 9), 1)
        differences[differences == 0] = 0.5
        result = rank_test(RankTestKind.SIGNED_RANK, differences, np.zeros(9))
        assert result.p_value == pytest.approx(enumerated_signed_rank_p(differences), abs=1e-12)


def test_signed_rank_drops_zero_differences():
    result = rank_test(RankTestKind.SIGNED_RANK, [1.0, 2.0, 3.0, 5.0], [1.0, 1.0, 1.0, 1.0])
    assert result.n == (3,)
    assert result.statistic == 6.0
    with pytest.raises(DegenerateSampleError):
        rank_test(RankTestKind.SIGNED_RANK, [1.0, 2.0], [1.0, 2.0])


def test_rank_sum_normal_approximation_matches_scipy():
    rng = np.random.default_rng(8)
    x = rng.normal(0.0, 1.0, 30)
    y = rng.normal(0.5, 1.0, 25)
    result = rank_test(RankTestKind.RANK_SUM, x, y)
    reference = stats.mannwhitneyu(x, y, alternative="two-sided", use_continuity=True, method="asymptotic")
    assert "normal approx" in result.test_name
    assert result.p_value == pytest.approx(reference.pvalue, rel=1e-6)


def test_signed_rank_approximation_close_to_exact():
    rng = np.random.default_rng(10)
    differences = rng.normal(0.4, 1.0, 12)
    exact = rank_test(RankTestKind.SIGNED_RANK, differences, np.zeros(12), method=RankMethod.EXACT)
    approx = rank_test(RankTestKind.SIGNED_RANK, differences, np.zeros(12), method=RankMethod.APPROX)
    assert approx.p_value == pytest.approx(exact.p_value, abs=0.02)


def test_rank_sum_rejects_all_tied():
    with pytest.raises(DegenerateSampleError):
        rank_test(RankTestKind.RANK_SUM, [1.0, 1.0], [1.0, 1.0, 1.0])


def test_ks_of_separated_samples():
    result = ks_two_sample([1.0, 2.0, 3.0], [4.0, 5.0, 6.0])
    assert result.statistic == 1.0
    assert result.p_value == pytest.approx(stats.kstwobign.sf(math.sqrt(1.5)))
    with pytest.raises(DegenerateSampleError):
        ks_two_sample([], [1.0])


def test_pearson_of_linear_relation():
    x = np.arange(10, dtype=float)
    result = pearson(x, 3.0 * x - 2.0)
    assert result.statistic == pytest.approx(1.0)
    assert result.p_value < 1e-6
    assert result.df == 8
    with pytest.raises(DegenerateSampleError):
        pearson(x, np.ones(10))
    with pytest.raises(ConfigError):
        pearson(x, x[:-1])


def test_shapiro_wilk_limits():
    assert shapiro_wilk(NORMAL_SCORES).p_value > 0.5
    with pytest.raises(DegenerateSampleError):
        shapiro_wilk([1.0, 1.0, 1.0])
    with pytest.raises(InsufficientSamplesError):
        shapiro_wilk(np.arange(5001, dtype=float))


def test_gated_compare_routes_on_normality():
    normal = gated_compare(NORMAL_SCORES, NORMAL_SCORES + 1.0, paired=False)
    assert normal.route == "parametric"
    assert normal.test_name.startswith("t-test two-sample")
    skewed = gated_compare(SKEWED, SKEWED[::-1] + 0.5, paired=True)
    assert skewed.route == "nonparametric"
    assert skewed.test_name.startswith("wilcoxon signed-rank")


def test_gated_one_sample_routes_on_normality():
    assert gated_one_sample(NORMAL_SCORES + 0.2).route == "parametric"
    skewed = gated_one_sample(SKEWED)
    assert skewed.route == "nonparametric"
    assert skewed.p_value == pytest.approx(2.0 / 2**12)


def test_shapiro_wilk_calibration():
    normal_ok = 0
    uniform_rejected = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        normal = shapiro_wilk(rng.standard_normal(500))
        normal_ok += normal.statistic > 0.98 and normal.p_value > 0.05
        uniform_rejected += shapiro_wilk(rng.uniform(size=500)).p_value < 0.01
    assert normal_ok >= 90
    assert uniform_rejected >= 95
