import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from murmurscale.wavelets import (
    MAX_DAUBECHIES_ORDER,
    WaveletConfigError,
    WaveletDecomposition,
    boundary_count,
    dwt_forward,
    dwt_inverse,
    dwt_matrix,
    make_filter,
    rescale_normalization,
)

ORDERS = list(range(1, MAX_DAUBECHIES_ORDER + 1))


@pytest.mark.parametrize("order", ORDERS)
def test_daubechies_filter_identities(order):
    f = make_filter("daubechies", order)
    h, g = f.low_pass, f.high_pass
    assert f.taps == 2 * order
    assert abs(h.sum() - np.sqrt(2)) < 1e-12
    for m in range(order):
        dot = h[: len(h) - 2 * m] @ h[2 * m:]
        assert abs(dot - (1.0 if m == 0 else 0.0)) < 1e-12
    k = np.arange(len(h))
    np.testing.assert_allclose(g, (-1.0) ** k * h[::-1], atol=0)


@pytest.mark.parametrize("order", [2, 4, 6, 8])
def test_vanishing_moments(order):
    g = make_filter("daubechies", order).high_pass
    k = np.arange(len(g), dtype=float)
    for p in range(order):
        # scale by k^p magnitude so high moments are compared relatively
        assert abs(np.sum(k**p * g)) < 1e-9 * max(1.0, (len(g) - 1) ** p)


def test_db6_is_minimal_phase():
    h = make_filter("db6").low_pass
    roots = np.roots(h)
    # besides the order-6 zero at z=-1, all roots lie inside the unit circle
    rest = roots[np.abs(roots + 1) > 1e-2]
    assert np.all(np.abs(rest) < 1.0)


def test_haar_and_db1_agree():
    haar = make_filter("haar")
    np.testing.assert_allclose(haar.low_pass, [2**-0.5, 2**-0.5], atol=1e-15)
    np.testing.assert_allclose(make_filter("daubechies", 1).low_pass, haar.low_pass, atol=1e-15)
    assert make_filter("db4").taps == 8


@pytest.mark.parametrize("family,order", [("symlet", 4), ("daubechies", 0),
                                          ("daubechies", MAX_DAUBECHIES_ORDER + 1), ("haar", 2)])
def test_unsupported_filters_raise(family, order):
    with pytest.raises(WaveletConfigError, match=str(order)):
        make_filter(family, order)


def test_constant_signal_small_example():
    d = dwt_forward([1.0, 1, 1, 1], make_filter("haar"), depth=2)
    np.testing.assert_allclose(d.smooth, [2.0])
    np.testing.assert_allclose(d.details[1], [0.0], atol=1e-15)
    np.testing.assert_allclose(d.details[2], [0.0, 0.0], atol=1e-15)


def test_two_sample_haar_matches_matrix():
    d = dwt_forward([1.0, 0.0], make_filter("haar"), depth=1)
    np.testing.assert_allclose(d.smooth, [2**-0.5])
    np.testing.assert_allclose(d.details[1], [2**-0.5])
    W = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    np.testing.assert_allclose(W @ [1.0, 0.0], np.r_[d.smooth, d.details[1]])


@pytest.mark.parametrize("name", ["haar", "db2", "db6"])
@pytest.mark.parametrize("n", [8, 16, 64])
def test_matrix_oracle(name, n):
    filt = make_filter(name)
    W = dwt_matrix(n, filt)
    np.testing.assert_allclose(W @ W.T, np.eye(n), atol=1e-12)
    y = np.random.default_rng(n).normal(size=n)
    d = dwt_forward(y, filt)
    flat = np.concatenate([d.smooth] + [d.details[j] for j in d.levels])
    np.testing.assert_allclose(W @ y, flat, atol=1e-10)


def test_partial_depth_matches_matrix():
    filt = make_filter("db2")
    y = np.random.default_rng(0).normal(size=32)
    d = dwt_forward(y, filt, depth=3)
    assert d.levels == [3, 4, 5]
    flat = np.concatenate([d.smooth] + [d.details[j] for j in d.levels])
    np.testing.assert_allclose(dwt_matrix(32, filt, depth=3) @ y, flat, atol=1e-12)


def test_level_sizes_use_canonical_indexing():
    d = dwt_forward(np.zeros(1024), make_filter("db6"), depth=9)
    assert d.levels == list(range(2, 11))
    for j in d.levels:
        assert len(d.details[j]) == 2 ** (j - 1)
    assert len(d.smooth) == 2


def test_energy_preserved_db6_depth9():
    y = np.random.default_rng(5).normal(size=1024)
    d = dwt_forward(y, make_filter("db6"), depth=9)
    energy = np.sum(d.smooth**2) + sum(np.sum(v**2) for v in d.details.values())
    assert abs(energy - np.sum(y**2)) <= 1e-9 * np.sum(y**2)


def test_inverse_examples():
    y = np.arange(1.0, 9.0)
    haar = make_filter("haar")
    np.testing.assert_allclose(dwt_inverse(dwt_forward(y, haar)), y, atol=1e-12)
    zero = dwt_forward(np.zeros(16), make_filter("db2"))
    np.testing.assert_array_equal(dwt_inverse(zero), np.zeros(16))


def test_inverse_rejects_inconsistent_levels():
    d = dwt_forward(np.ones(8), make_filter("haar"))
    broken = WaveletDecomposition(d.smooth, {**d.details, 2: np.zeros(3)}, d.n, d.filter)
    with pytest.raises(ValueError, match="level 2"):
        dwt_inverse(broken)


@pytest.mark.parametrize("n", [3, 6, 1000, 1])
def test_non_dyadic_length_asks_for_truncation(n):
    with pytest.raises(ValueError, match="truncate"):
        dwt_forward(np.ones(n), make_filter("haar"))


def test_l1_rescale_examples():
    d = dwt_forward([1.0, -1.0], make_filter("haar"))
    single = WaveletDecomposition(np.array([0.0]), {1: np.array([1.0])}, 2, d.filter)
    l1 = rescale_normalization(single, "L1")
    assert l1.details[1][0] == pytest.approx(2**0.5, abs=1e-15)
    assert rescale_normalization(single, "L2") is single
    y = np.random.default_rng(1).normal(size=256)
    dec = dwt_forward(y, make_filter("db4"))
    e = lambda z: np.sum(z.smooth**2) + sum(np.sum(v**2) for v in z.details.values())
    there = rescale_normalization(dec, "L1")
    assert abs(e(there) - np.sum(y**2)) > 1.0
    back = rescale_normalization(there, "L2")
    assert abs(e(back) - np.sum(y**2)) <= 1e-12 * np.sum(y**2)
    np.testing.assert_allclose(dwt_inverse(there), y, atol=1e-10)


def _support_wraps(taps, J, j, k):
    s = 2 ** (J - j + 1)
    return s * k + (taps - 1) * (s - 1) >= 2**J


@pytest.mark.parametrize("taps", [2, 4, 12])
def test_boundary_count_matches_support(taps):
    J = 10
    for j in range(1, J + 1):
        n_wrap = sum(_support_wraps(taps, J, j, k) for k in range(2 ** (j - 1)))
        assert boundary_count(taps, J, j) == n_wrap


@pytest.mark.parametrize("name", ["db2", "db6"])
def test_interior_coefficients_match_zero_padded_transform(name):
    # a coefficient whose support never wraps cannot tell periodic extension
    # from zero padding, so it must equal the padded signal's coefficient
    filt = make_filter(name)
    y = np.random.default_rng(2).normal(size=512)
    a = dwt_forward(y, filt)
    padded = dwt_forward(np.r_[y, np.zeros(512)], filt)
    for j in a.levels:
        inner = a.interior(j)
        np.testing.assert_allclose(inner, padded.details[j + 1][: len(inner)], atol=1e-12)
        if len(inner) < len(a.details[j]):
            k = len(inner)
            assert abs(a.details[j][k] - padded.details[j + 1][k]) > 1e-9


signals = st.integers(1, 9).flatmap(
    lambda J: arrays(np.float64, 2**J, elements=st.floats(-1e3, 1e3, allow_nan=False))
)


@given(signals, st.sampled_from(["haar", "db2", "db6", "db10"]))
def test_property_round_trip_and_parseval(y, name):
    filt = make_filter(name)
    d = dwt_forward(y, filt)
    scale = max(1.0, np.max(np.abs(y)))
    assert np.max(np.abs(dwt_inverse(d) - y)) <= 1e-9 * scale
    energy = np.sum(d.smooth**2) + sum(np.sum(v**2) for v in d.details.values())
    assert abs(energy - np.sum(y**2)) <= 1e-9 * max(1.0, np.sum(y**2))


@given(st.integers(2, 10), st.floats(-50, 50), st.sampled_from(["haar", "db3", "db6"]))
def test_property_constant_has_zero_details(J, c, name):
    d = dwt_forward(np.full(2**J, c), make_filter(name))
    for v in d.details.values():
        assert np.max(np.abs(v)) <= 1e-10 * max(1.0, abs(c))


@given(signals, signals, st.floats(-3, 3))
def test_property_linearity(y1, y2, a):
    if len(y1) != len(y2):
        y2 = np.resize(y2, len(y1))
    filt = make_filter("db4")
    d1, d2 = dwt_forward(y1, filt), dwt_forward(y2, filt)
    d = dwt_forward(a * y1 + y2, filt)
    for j in d.levels:
        np.testing.assert_allclose(d.details[j], a * d1.details[j] + d2.details[j],
                                   atol=1e-8 * (1 + np.max(np.abs(y1)) + np.max(np.abs(y2))))


def test_round_trip_large_dyadic():
    y = np.random.default_rng(3).normal(size=2**16)
    for name in ("haar", "db6", "db14"):
        d = dwt_forward(y, make_filter(name))
        assert np.max(np.abs(dwt_inverse(d) - y)) <= 1e-9 * np.max(np.abs(y))
