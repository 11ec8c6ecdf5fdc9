import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aliasnet.filters import (
    Kernel,
    binomial_kernel,
    binomial_psd_closed_form,
    binomial_taps,
    blur_subsample,
    convolve2d_direct,
    convolve_same,
    ideal_lowpass,
    outer2d,
    psd_sweep,
    tap_response,
)
from aliasnet.spectral import dft1d, subsample

PASCAL = {3: [1, 2, 1], 5: [1, 4, 6, 4, 1], 7: [1, 6, 15, 20, 15, 6, 1]}
W64 = np.linspace(0, np.pi, 64)


def pascal_row(n):
    row = [1]
    for _ in range(n):
        row = [a + b for a, b in zip([0] + row, row + [0])]
    return row


@pytest.mark.parametrize("k", [3, 5, 7, 9])
def test_taps_are_pascal_rows(k):
    assert list(binomial_taps(k).taps) == pascal_row(k - 1)
    kern = binomial_kernel(k)
    assert kern.normalized
    assert sum(kern.taps) == pytest.approx(1.0, abs=1e-15)


def test_fixed_rows():
    for k, row in PASCAL.items():
        assert list(binomial_taps(k).taps) == row


@pytest.mark.parametrize("k", [1, 2, 4, 0, -3, 3.5])
def test_bad_sizes(k):
    with pytest.raises(ValueError):
        binomial_taps(k)


def test_x1_closed_form_matches_taps():
    resp = tap_response(binomial_taps(3), W64)
    assert np.max(np.abs(resp.imag)) < 1e-12
    assert np.max(np.abs(resp.real - (2 + 2 * np.cos(W64)))) < 1e-9
    np.testing.assert_allclose(binomial_psd_closed_form(3, W64, "printed"), resp.real, atol=1e-9)


@pytest.mark.parametrize("k", [5, 7])
def test_corrected_series_matches_taps_printed_does_not(k):
    resp = tap_response(binomial_taps(k), W64).real
    np.testing.assert_allclose(binomial_psd_closed_form(k, W64), resp, atol=1e-9)
    assert np.max(np.abs(binomial_psd_closed_form(k, W64, "printed") - resp)) > 0.5


def test_closed_form_dc_and_nyquist():
    for k, row in PASCAL.items():
        assert binomial_psd_closed_form(k, 0.0) == pytest.approx(sum(row))
        assert binomial_psd_closed_form(k, np.pi) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        binomial_psd_closed_form(9, 0.0)


def test_tap_response_agrees_with_dft_bins():
    n = 32
    for k in (3, 5, 7):
        h = np.zeros(n)
        half = k // 2
        for j, t in enumerate(binomial_taps(k).taps):
            h[(j - half) % n] = t
        w = 2 * np.pi * np.arange(n) / n
        np.testing.assert_allclose(dft1d(h), tap_response(binomial_taps(k), w), atol=1e-9)


def test_separability():
    a = np.array(binomial_taps(3).taps)
    assert np.convolve(a, a).tolist() == [1, 4, 6, 4, 1]
    np.testing.assert_array_equal(outer2d(binomial_taps(3)), np.outer([1, 2, 1], [1, 2, 1]))


def test_attenuation_ordering_at_nyquist_and_passband():
    at = {k: abs(tap_response(binomial_kernel(k), [np.pi])[0]) for k in (3, 5, 7)}
    assert at[7] <= at[5] <= at[3]
    mid = {k: abs(tap_response(binomial_kernel(k), [np.pi / 2])[0]) for k in (3, 5, 7)}
    assert mid[7] < mid[5] < mid[3] < 1  # wider filters also eat more of the passband


def test_kernel_validation():
    with pytest.raises(ValueError):
        Kernel((1.0, 2.0))
    with pytest.raises(ValueError):
        Kernel((1.0, 2.0, 3.0))
    with pytest.raises(ValueError):
        Kernel((1.0, 2.0, 1.0), normalized=True)
    k = Kernel((1, 2, 1)).normalize()
    assert k.taps == (0.25, 0.5, 0.25) and k.normalize() is k


@settings(max_examples=30, deadline=None)
@given(st.sampled_from([3, 5, 7]), st.sampled_from(["reflect", "zero"]), st.integers(0, 2**31 - 1))
def test_separable_equals_direct_2d(k, padding, seed):
    img = np.random.default_rng(seed).normal(size=(9, 11))
    kern = binomial_kernel(k)
    np.testing.assert_allclose(convolve_same(img, kern, padding), convolve2d_direct(img, outer2d(kern), padding), atol=1e-12)


def test_convolve_1d_against_numpy_zero_padding():
    x = np.random.default_rng(1).normal(size=20)
    np.testing.assert_allclose(convolve_same(x, binomial_kernel(5), "zero"), np.convolve(x, binomial_kernel(5).array, "same"))


def test_constant_preserved_by_reflect_padding():
    x = np.full((6, 7), 2.5)
    np.testing.assert_allclose(convolve_same(x, binomial_kernel(7)), x)


def test_blur_subsample_definition():
    x = np.random.default_rng(2).normal(size=(2, 10, 10))
    kern = binomial_taps(5)  # raw taps are normalized internally
    out = blur_subsample(x, kern, 2)
    np.testing.assert_allclose(out, subsample(convolve_same(x, binomial_kernel(5)), 2))
    assert out.shape == (2, 5, 5)
    with pytest.raises(ValueError):
        blur_subsample(x, kern, 0)


def test_psd_sweep_rows():
    rows = psd_sweep([3], 128)
    k3 = [r for r in rows if r[0] == "k3"]
    assert len(k3) == 128
    assert k3[0][1] == 0.0 and k3[0][2] == pytest.approx(1.0)
    assert k3[-1][1] == pytest.approx(np.pi) and abs(k3[-1][2]) < 1e-9
    ideal = [r for r in rows if r[0] == "ideal_stride2"]
    assert [r[2] for r in ideal] == list(ideal_lowpass([r[1] for r in ideal], 2))
    with pytest.raises(ValueError):
        psd_sweep([3], 1)
