import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import erf

from aliasnet.activations import KINDS, Activation, apply, decay_exponent, derivative, spectral_leakage


def projected_power(kind, cycles, n, m, amplitude=1.0, offset=0.0):
    t = np.arange(n)
    y = apply(kind, offset + amplitude * np.sin(2 * np.pi * cycles * t / n))
    return abs(np.mean(y * np.exp(-2j * np.pi * m * cycles * t / n))) ** 2


def test_pointwise_definitions():
    x = np.linspace(-5, 5, 101)
    np.testing.assert_array_equal(apply("relu", x), np.where(x > 0, x, 0.0))
    np.testing.assert_allclose(apply("gelu", x), 0.5 * x * (1 + erf(x / np.sqrt(2))), atol=1e-15)
    np.testing.assert_allclose(apply("swish", x), x / (1 + np.exp(-x)), atol=1e-15)
    np.testing.assert_allclose(Activation("swish", beta=2.0)(x), x / (1 + np.exp(-2 * x)), atol=1e-15)
    with pytest.raises(ValueError):
        Activation("tanh")


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(KINDS), st.floats(-6, 6).filter(lambda v: abs(v) > 1e-3))
def test_derivative_matches_central_difference(kind, x0):
    h = 1e-6
    fd = (apply(kind, x0 + h) - apply(kind, x0 - h)) / (2 * h)
    assert derivative(kind, x0) == pytest.approx(fd, rel=1e-7, abs=1e-9)


def test_relu_derivative_at_zero():
    assert derivative("relu", 0.0) == 0.0


def half_wave_coefficient(m):
    """Complex Fourier coefficient of max(0, sin t) at integer harmonic m."""
    m = np.asarray(m)
    even = m % 2 == 0
    c = np.zeros(m.shape, dtype=complex)
    c[even] = -1.0 / (np.pi * (m[even].astype(float) ** 2 - 1))
    c[m == 1] = -0.25j
    c[m == -1] = 0.25j
    return c


def test_relu_half_wave_series():
    # 4 cycles in 256 samples: harmonic m lands on harmonic bin m mod 64 once sampled
    prof = spectral_leakage("relu")
    period = 64
    j = np.arange(-10**6, 10**6 + 1)
    for m in range(6):
        aliased = half_wave_coefficient(m + period * j).sum()
        # truncating the alias sum at |j| = 1e6 leaves ~2e-10 in amplitude
        assert prof.power[m] == pytest.approx(abs(aliased) ** 2, rel=1e-7, abs=1e-18)
    # leading terms of the continuous series, to the accuracy the sampling allows
    assert prof.power[0] == pytest.approx(1 / np.pi**2, rel=5e-3)
    assert prof.power[1] == pytest.approx(1 / 16, rel=1e-9)
    assert prof.power[2] == pytest.approx(1 / (9 * np.pi**2), rel=5e-3)
    assert np.all(prof.power[3::2] < 1e-20)


@pytest.mark.parametrize("kind", KINDS)
def test_profile_against_direct_projection(kind):
    prof = spectral_leakage(kind, 8 / 256, 256, amplitude=2.0, offset=0.3)
    for m in range(prof.harmonics.max() + 1):
        want = projected_power(kind, 8, 256, m, 2.0, 0.3)
        assert prof.power[m] == pytest.approx(want, rel=1e-9, abs=1e-15)


@pytest.mark.parametrize("kind,offset", [("relu", 2.0), ("gelu", 20.0), ("swish", 40.0)])
def test_identity_region_leaves_spectrum_unchanged(kind, offset):
    ident = spectral_leakage(lambda_identity := Activation(kind), 4 / 256, 256, 1.0, offset)
    t = np.arange(256)
    raw = np.abs(np.fft.fft(offset + np.sin(2 * np.pi * 4 * t / 256))) ** 2 / 256**2
    bins = np.minimum((ident.harmonics * 4) % 256, 256 - (ident.harmonics * 4) % 256)
    np.testing.assert_allclose(ident.power, raw[bins], atol=1e-9)
    assert lambda_identity.kind == kind


def test_smooth_activations_decay_faster_than_relu():
    slopes = {k: decay_exponent(spectral_leakage(k)) for k in KINDS}
    assert slopes["gelu"] < slopes["relu"]
    assert slopes["swish"] < slopes["relu"]
    assert slopes["relu"] == pytest.approx(-4, abs=0.2)  # 1/m^2 amplitude decay for a kinked signal
    tails = {k: spectral_leakage(k).tail_power(4) for k in KINDS}
    assert tails["relu"] > tails["gelu"] and tails["relu"] > tails["swish"]


def test_rows_and_validation():
    prof = spectral_leakage("gelu", n_harmonics=5)
    assert [r[1] for r in prof.rows()] == list(range(6))
    with pytest.raises(ValueError):
        spectral_leakage("relu", freq=3.5 / 256)
    with pytest.raises(ValueError):
        spectral_leakage("relu", freq=0.6)
    with pytest.raises(ValueError):
        decay_exponent(prof, m_range=(50, 60))
