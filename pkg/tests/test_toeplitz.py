import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from etsc.toeplitz import (
    DECAY,
    ToeplitzKernel,
    ZeroNormError,
    apply_fft,
    apply_naive,
    extended_coeff,
    reconstruction_error,
    relative_error,
)


def test_extended_coeff():
    k = ToeplitzKernel([1.0, 2.0])
    assert extended_coeff(k, 5) == 0.0
    assert extended_coeff(k, 1) == 2.0
    assert extended_coeff(ToeplitzKernel([1.0, 2.0], DECAY, 0.5), 3) == 0.5


def test_materialize_agrees_with_extended_coeff():
    k = ToeplitzKernel([1.0, -2.0, 3.0], DECAY, 0.7)
    np.testing.assert_allclose(k.materialize(9), [extended_coeff(k, i) for i in range(9)], rtol=1e-14)


@pytest.mark.parametrize("kw", [dict(coeffs=[]), dict(coeffs=[np.nan]), dict(coeffs=[1.0], extension="bogus"),
                                dict(coeffs=[1.0], extension=DECAY, gamma=0.0)])
def test_kernel_validation(kw):
    with pytest.raises(ValueError):
        ToeplitzKernel(**kw)


def test_apply_naive_examples(rng):
    np.testing.assert_array_equal(apply_naive(ToeplitzKernel([1.0, 2.0]), [3.0, 4.0]), [3.0, 10.0])
    x = rng.standard_normal(6)
    np.testing.assert_allclose(apply_naive(ToeplitzKernel([2.5]), x), 2.5 * x)
    assert not apply_naive(ToeplitzKernel(np.zeros(4)), x).any()


def test_apply_fft_delta_and_shift(rng):
    x = rng.standard_normal(10)
    delta = np.zeros(10)
    delta[0] = 1
    np.testing.assert_allclose(apply_fft(ToeplitzKernel(delta), x), x, atol=1e-14)
    shift = np.zeros(10)
    shift[1] = 1
    np.testing.assert_allclose(apply_fft(ToeplitzKernel(shift), x), np.r_[0.0, x[:-1]], atol=1e-14)


def test_apply_fft_matches_naive_257(rng):
    t, x = rng.standard_normal(257), rng.standard_normal(257)
    k = ToeplitzKernel(t)
    ref = apply_naive(k, x)
    assert np.linalg.norm(apply_fft(k, x) - ref) <= 1e-10 * np.linalg.norm(ref)


@pytest.mark.parametrize("m", list(range(1, 40)) + [100, 255, 256, 257, 511, 512])
def test_apply_fft_matches_naive_all_lengths(m, rng):
    k = ToeplitzKernel(rng.standard_normal(rng.integers(1, 2 * m + 1)),
                       DECAY if m % 2 else "zeros", 0.8)
    x = rng.standard_normal(m)
    ref = apply_naive(k, x)
    assert np.linalg.norm(apply_fft(k, x) - ref) <= 1e-10 * max(np.linalg.norm(ref), 1e-300)


@settings(max_examples=50, deadline=None)
@given(m=st.integers(1, 64), seed=st.integers(0, 2 ** 32 - 1), alpha=st.floats(-3, 3), beta=st.floats(-3, 3))
def test_linearity(m, seed, alpha, beta):
    r = np.random.default_rng(seed)
    k = ToeplitzKernel(r.standard_normal(m))
    x, z = r.standard_normal((2, m))
    lhs = apply_fft(k, alpha * x + beta * z)
    rhs = alpha * apply_fft(k, x) + beta * apply_fft(k, z)
    assert np.abs(lhs - rhs).max() <= 1e-10 * (1 + np.abs(rhs).max())


@settings(max_examples=50, deadline=None)
@given(m=st.integers(2, 64), seed=st.integers(0, 2 ** 32 - 1), data=st.data())
def test_causality(m, seed, data):
    r = np.random.default_rng(seed)
    k = ToeplitzKernel(r.standard_normal(m))
    x = r.standard_normal(m)
    j = data.draw(st.integers(1, m - 1))
    x2 = x.copy()
    x2[j:] = r.standard_normal(m - j)
    np.testing.assert_array_equal(apply_naive(k, x)[:j], apply_naive(k, x2)[:j])


def test_relative_error_examples():
    assert relative_error([3.0, 4.0], [3.0, 4.0]) == 0.0
    assert relative_error([3.0, 4.0], [0.0, 0.0]) == 1.0
    assert relative_error([3.0, 4.0], [3.0, 0.0]) == pytest.approx(0.8)


def test_relative_error_complex_prediction():
    # full complex deviation: sqrt(0^2 + 3^2 + 4^2) / 5
    assert relative_error([3.0, 4.0], [3.0 + 3j, 4.0]) == pytest.approx(0.6)


def test_relative_error_zero_reference():
    with pytest.raises(ZeroNormError):
        relative_error([0.0, 0.0], [1.0, 0.0])
    assert reconstruction_error([0.0, 0.0], [3.0, 4.0]) == (5.0, True)
    assert reconstruction_error([1.0], [1.0]) == (0.0, False)
