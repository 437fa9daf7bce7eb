import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from etsc.conversion import SsmModes, convert_with_decay, etsc_convert
from etsc.ssm import ChannelBank, InputError, compress_conjugate_pairs, init_state, scan, step
from etsc.toeplitz import ToeplitzKernel, apply_fft, apply_naive


def test_init_state():
    m = etsc_convert(np.arange(4.0))
    s = init_state(m)
    assert s.u.shape == (4,) and not s.u.any() and s.position == 0
    np.testing.assert_array_equal(init_state(m).u, s.u)
    _, y = step(m, s, 0.0)
    assert y == 0.0


def test_integrator():
    m = SsmModes([1.0], [1.0])
    s = init_state(m)
    xs = [1.0, 2.0, -0.5, 4.0]
    ys = []
    for x in xs:
        s, y = step(m, s, x)
        ys.append(y)
    np.testing.assert_allclose(ys, np.cumsum(xs))
    assert s.position == 4


def test_memoryless():
    m = SsmModes([0.0], [3.0])
    np.testing.assert_allclose(scan(m, [1.0, -2.0, 5.0]), [3.0, -6.0, 15.0])


def test_scan_geometric_impulse():
    np.testing.assert_allclose(scan(SsmModes([0.5], [1.0]), [1.0, 0.0, 0.0]), [1.0, 0.5, 0.25])
    assert not scan(SsmModes([0.5], [1.0]), np.zeros(5)).any()


def test_step_rejects_non_finite():
    m = SsmModes([0.5], [1.0])
    with pytest.raises(InputError):
        step(m, init_state(m), float("nan"))
    with pytest.raises(InputError):
        scan(m, [1.0, float("inf")])


def test_step_rejects_foreign_state():
    with pytest.raises(ValueError):
        step(SsmModes([0.5, 0.2], [1.0, 1.0]), init_state(SsmModes([0.5], [1.0])), 1.0)


def test_scan_equals_step_fold_bitwise(rng):
    t = rng.standard_normal(300)
    m = etsc_convert(t)
    x = rng.standard_normal(300)
    s = init_state(m)
    ys = []
    for xi in x:
        s, y = step(m, s, xi)
        ys.append(y)
        assert s.u.shape == (m.h,)  # constant state size
    np.testing.assert_array_equal(scan(m, x), ys)
    assert s.healthy


def test_etsc_stream_reproduces_toeplitz_1024(rng):
    t = rng.standard_normal(1024)
    x = rng.standard_normal(1024)
    m = etsc_convert(t)
    s = init_state(m)
    ys = np.empty(1024)
    for i, xi in enumerate(x):
        s, ys[i] = step(m, s, xi)
    ref = apply_naive(ToeplitzKernel(t), x)
    assert np.linalg.norm(ys - ref) <= 1e-6 * np.linalg.norm(ref)
    assert s.healthy


@settings(max_examples=25, deadline=None)
@given(n=st.integers(1, 2048), seed=st.integers(0, 2 ** 32 - 1))
def test_toeplitz_parity_property(n, seed):
    r = np.random.default_rng(seed)
    t, x = r.standard_normal((2, n))
    ref = apply_fft(ToeplitzKernel(t), x)
    out = scan(etsc_convert(t), x)
    assert np.linalg.norm(out - ref) <= 1e-6 * max(np.linalg.norm(ref), 1e-300)


def test_unit_poles_extend_periodically(rng):
    t = rng.standard_normal(16)
    m = etsc_convert(t)
    impulse = np.zeros(3 * 17)
    impulse[0] = 1.0
    y = scan(m, impulse)
    period = np.append(t, -t.sum())
    np.testing.assert_allclose(y, np.tile(period, 3), atol=1e-12)


def test_decay_state_envelope(rng):
    gamma = 0.9
    m = convert_with_decay(rng.standard_normal(40), gamma)
    bound_x = 2.0
    x = rng.uniform(-bound_x, bound_x, 500)
    u = np.zeros(m.h, dtype=complex)
    limit = np.linalg.norm(m.weights) * bound_x / (1 - gamma)
    for xi in x:
        u = m.lam * u + m.weights * xi
        assert np.linalg.norm(u) <= limit


def test_compressed_pairs_same_output(rng):
    for n in (15, 16):  # n+1 even puts a real pole at -1
        t = rng.standard_normal(n)
        m = etsc_convert(t)
        c = compress_conjugate_pairs(m)
        assert c.h == (n + 1) // 2
        x = rng.standard_normal(40)
        np.testing.assert_allclose(scan(c, x), scan(m, x), atol=1e-11)


def test_channel_bank_matches_single_channels(rng):
    kernels = rng.standard_normal((3, 20))
    modes = [etsc_convert(k) for k in kernels]
    bank = ChannelBank.from_modes(modes)
    x = rng.standard_normal((25, 3))
    out = bank.scan(x)
    for c in range(3):
        np.testing.assert_allclose(out[:, c], scan(modes[c], x[:, c]), atol=1e-12)
    assert bank.position == 25
    assert bank.resident_scalars() == 2 * 3 * 20
    bank.reset()
    assert bank.position == 0 and not bank.u.any()


def test_channel_bank_validation():
    with pytest.raises(ValueError):
        ChannelBank.from_modes([etsc_convert([1.0, 2.0]), etsc_convert([1.0])])
    bank = ChannelBank.from_modes([etsc_convert([1.0])])
    with pytest.raises(ValueError):
        bank.step([1.0, 2.0])
    with pytest.raises(InputError):
        bank.step([np.nan])
