import functools
import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from murmurscale.features import FeatureMatrix, FeatureVector
from murmurscale.stats import (
    EXACT_MAX_PRODUCT,
    average_ranks,
    rank_sum_distribution,
    screen_features,
    wilcoxon_rank_sum,
)
from murmurscale.stats import _normal_two_sided


@functools.lru_cache(maxsize=None)
def _split_sums(n1, n2):
    return tuple(sum(s) for s in itertools.combinations(range(1, n1 + n2 + 1), n1))


def _enumeration_p(n1, n2, chosen):
    """Two-sided p by listing every split of ranks 1..n into groups of n1 and n2."""
    twice_mean = n1 * (n1 + n2 + 1)  # integer arithmetic on doubled sums
    observed = abs(2 * sum(chosen) - twice_mean)
    sums = _split_sums(n1, n2)
    return Fraction(sum(1 for s in sums if abs(2 * s - twice_mean) >= observed), len(sums))


def test_exhaustive_small_samples():
    checked = 0
    for n in range(2, 13):
        for n1 in range(1, n):
            n2 = n - n1
            for chosen in itertools.combinations(range(1, n + 1), n1):
                rest = [r for r in range(1, n + 1) if r not in chosen]
                res = wilcoxon_rank_sum(list(chosen), rest)
                assert res.method == "Exact"
                assert res.p_value == float(_enumeration_p(n1, n2, chosen))
                checked += 1
    assert checked == sum(2 ** n - 2 for n in range(2, 13))


def test_two_by_two_example():
    res = wilcoxon_rank_sum([1, 2], [3, 4])
    assert res.p_value == 1 / 3
    assert res.statistic == 3
    assert res.u_statistic == 0
    assert (res.n1, res.n2) == (2, 2)


def test_fully_separated_ten_by_ten():
    res = wilcoxon_rank_sum(np.arange(1, 11), np.arange(11, 21))
    assert res.method == "Exact"
    assert res.statistic == 55
    assert res.p_value == pytest.approx(2 / math.comb(20, 10), rel=1e-12)


def test_distribution_counts():
    counts = rank_sum_distribution(3, 4)
    assert counts.sum() == math.comb(7, 3)
    assert counts[6] == 1 and counts[18] == 1
    nz = np.nonzero(counts)[0]
    np.testing.assert_array_equal(counts[nz], counts[nz][::-1])
    assert rank_sum_distribution(20, 20).sum() == math.comb(40, 20)


def test_average_ranks_with_ties():
    np.testing.assert_array_equal(average_ranks([3, 1, 3, 2]), [3.5, 1, 3.5, 2])


def test_identical_samples_give_p_one():
    x = [0.3, 1.2, -0.4, 2.2, 0.9]
    assert wilcoxon_rank_sum(x, list(x)).p_value == pytest.approx(1.0, abs=0.05)
    assert wilcoxon_rank_sum([5.0] * 4, [5.0] * 7).p_value == 1.0


def test_method_selection():
    rng = np.random.default_rng(0)
    big = wilcoxon_rank_sum(rng.normal(size=21), rng.normal(size=20))
    assert 21 * 20 > EXACT_MAX_PRODUCT and big.method == "NormalApprox"
    tied = wilcoxon_rank_sum([1, 2, 2, 3], [2, 4, 5])
    assert tied.method == "NormalApprox"


@pytest.mark.parametrize("x, y", [([], [1.0]), ([1.0], []), ([np.nan], [1.0]), ([1.0], [np.inf])])
def test_invalid_inputs(x, y):
    with pytest.raises(ValueError):
        wilcoxon_rank_sum(x, y)


def test_only_two_sided():
    with pytest.raises(ValueError):
        wilcoxon_rank_sum([1, 2], [3, 4], alternative="less")


samples = st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=1, max_size=25)


@given(samples, samples)
def test_swap_invariance(x, y):
    assert wilcoxon_rank_sum(x, y).p_value == pytest.approx(wilcoxon_rank_sum(y, x).p_value,
                                                            abs=1e-12)


@given(samples, samples, st.sampled_from(["cube", "exp", "affine"]))
def test_monotone_transform_invariance(x, y, kind):
    f = {"cube": lambda v: np.asarray(v) ** 3,
         "exp": lambda v: np.exp(np.asarray(v) / 1e3),
         "affine": lambda v: 3.0 * np.asarray(v) - 7.0}[kind]
    a, b = wilcoxon_rank_sum(x, y), wilcoxon_rank_sum(f(x), f(y))
    # only strictly monotone transforms that keep distinct values distinct qualify
    if len(np.unique(np.r_[x, y])) == len(np.unique(np.r_[f(x), f(y)])):
        assert a.p_value == pytest.approx(b.p_value, abs=1e-12)
        assert a.statistic == b.statistic


@given(st.randoms(use_true_random=False))
def test_exact_and_normal_agree_at_ten(rnd):
    perm = list(range(1, 21))
    rnd.shuffle(perm)
    x, y = perm[:10], perm[10:]
    res = wilcoxon_rank_sum(x, y)
    ranks = average_ranks(x + y)
    approx = _normal_two_sided(res.u_statistic, 10, 10, ranks)
    assert res.method == "Exact"
    assert abs(res.p_value - approx) <= 0.01


def test_agrees_with_scipy():
    scipy_stats = pytest.importorskip("scipy.stats")
    rng = np.random.default_rng(4)
    for _ in range(30):
        x, y = rng.normal(size=8), rng.normal(0.8, size=12)
        ref = scipy_stats.mannwhitneyu(x, y, method="exact").pvalue
        assert wilcoxon_rank_sum(x, y).p_value == pytest.approx(ref, abs=1e-12)
        xt, yt = np.round(rng.normal(size=30)), np.round(rng.normal(size=25))
        ref = scipy_stats.mannwhitneyu(xt, yt, method="asymptotic", use_continuity=True).pvalue
        assert wilcoxon_rank_sum(xt, yt).p_value == pytest.approx(ref, rel=1e-9)


def _matrix(X, y):
    names = ("slope", "entropy_cv", "broadness")
    rows = []
    for i, (r, lab) in enumerate(zip(X, y)):
        fv = FeatureVector(recording_id=f"r{i}", label=int(lab))
        for n, v in zip(names, r):
            setattr(fv, n, None if np.isnan(v) else float(v))
        rows.append(fv)
    return FeatureMatrix(rows, names)


def test_screening_separated_groups():
    rng = np.random.default_rng(1)
    X = np.vstack([rng.uniform(0, 1, (15, 3)), rng.uniform(2, 3, (12, 3))])
    y = np.r_[np.zeros(15), np.ones(12)]
    table = screen_features(_matrix(X, y))
    assert set(table.significant(0.05)) == {"slope", "entropy_cv", "broadness"}


def test_screening_constant_column_and_missing_values(tmp_path):
    rng = np.random.default_rng(2)
    X = rng.normal(size=(40, 3))
    X[:, 1] = 4.0
    X[:5, 2] = np.nan
    y = np.r_[np.zeros(20), np.ones(20)]
    table = screen_features(_matrix(X, y))
    assert table.results["entropy_cv"].p_value == 1.0
    assert table.results["broadness"].n1 + table.results["broadness"].n2 == 35
    path = tmp_path / "screen.csv"
    table.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "feature,statistic,p_value,method" and len(lines) == 4


def test_screening_needs_two_labels():
    X = np.random.default_rng(3).normal(size=(10, 3))
    with pytest.raises(ValueError):
        screen_features(_matrix(X, np.zeros(10)))


def test_permutation_calibration():
    rng = np.random.default_rng(7)
    X = rng.normal(size=(60, 3))
    y = np.r_[np.zeros(30), np.ones(30)]
    rejections = []
    for _ in range(200):
        table = screen_features(_matrix(X, rng.permutation(y)))
        rejections += [p < 0.05 for p in table.p_values().values()]
    rate = np.mean(rejections)
    assert 0.025 <= rate <= 0.075
