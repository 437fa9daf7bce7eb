import numpy as np
import pytest

from etsc.inference import (
    GELU,
    STRATEGIES,
    StackedMixer,
    open_session,
    parity_report,
    run_stream,
)
from etsc.toeplitz import DECAY, apply_naive


def test_open_session_structure():
    model = StackedMixer.random(2, 4, 8, seed=0)
    origin = open_session(model, "origin")
    assert origin.position == 0 and origin.history.size == 0
    cache = open_session(model, "cache")
    assert len(cache.caches) == 2 and all(c.size == 0 for c in cache.caches)
    ssm = open_session(model, "ssm")
    states = [bank.u[c] for bank in ssm.banks for c in range(bank.d)]
    assert len(states) == 8 and all(s.shape == (8,) for s in states)
    with pytest.raises(ValueError):
        open_session(model, "bogus")


@pytest.mark.parametrize("strategy", STRATEGIES)
def test_identity_kernel_echoes(strategy, rng):
    model = StackedMixer.identity(1, 1, 16)
    session = open_session(model, strategy)
    for x in rng.standard_normal(16):
        np.testing.assert_allclose(session.push([x]), [x], atol=1e-12)


def test_push_validates_input():
    session = open_session(StackedMixer.random(1, 2, 4), "cache")
    with pytest.raises(ValueError):
        session.push([1.0])
    with pytest.raises(ValueError):
        session.push([1.0, np.nan])


def test_three_way_parity_in_range():
    model = StackedMixer.random(2, 4, 256, seed=5)
    xs = np.random.default_rng(6).standard_normal((256, 4))
    report = parity_report(model, xs)
    assert report.in_range_max() < 1e-5
    np.testing.assert_allclose(report.outputs["origin"], model.forward(xs), atol=1e-12)


def test_parity_with_nonlinearity():
    model = StackedMixer.random(3, 3, 64, seed=2, nonlinearity=GELU)
    xs = np.random.default_rng(3).standard_normal((64, 3))
    assert parity_report(model, xs).in_range_max() < 1e-5


def test_beyond_n_ssm_diverges_but_cache_matches_origin():
    model = StackedMixer.random(2, 4, 64, seed=1)
    xs = np.random.default_rng(2).standard_normal((160, 4))
    report = parity_report(model, xs)
    assert report.in_range_max() < 1e-5
    assert report.beyond_max(("origin", "cache")) < 1e-5
    assert report.beyond_max(("origin", "ssm")) > 1e-2


def test_decay_extension_origin_matches_cache():
    model = StackedMixer.random(2, 2, 32, seed=4, extension=DECAY, gamma=0.8)
    xs = np.random.default_rng(5).standard_normal((100, 2))
    report = parity_report(model, xs, strategies=("origin", "cache"))
    assert report.beyond_max(("origin", "cache")) < 1e-10


def test_parity_identity_and_zero_input():
    model = StackedMixer.identity(2, 3, 16)
    xs = np.random.default_rng(0).standard_normal((16, 3))
    # FFT and complex-mode arithmetic round at the 1e-16 level
    assert all(v <= 1e-14 for d in parity_report(model, xs).deviations.values() for v in d.values())
    zero = parity_report(StackedMixer.random(2, 3, 16), np.zeros((20, 3)))
    assert all(v == 0.0 for d in zero.deviations.values() for v in d.values())
    for out in zero.outputs.values():
        assert not out.any()


def test_parity_threads_match_serial():
    model = StackedMixer.random(2, 2, 32, seed=9)
    xs = np.random.default_rng(1).standard_normal((40, 2))
    a = parity_report(model, xs, threads=1)
    b = parity_report(model, xs, threads=3)
    for s in STRATEGIES:
        np.testing.assert_array_equal(a.outputs[s], b.outputs[s])


def test_cache_equals_naive_recompute(rng):
    model = StackedMixer.random(1, 2, 50, seed=3)
    xs = rng.standard_normal((50, 2))
    session = open_session(model, "cache")
    for i, x in enumerate(xs):
        y = session.push(x)
        for c in range(2):
            ref = apply_naive(model.kernel(0, c), xs[: i + 1, c])[-1]
            assert abs(y[c] - ref) <= 1e-10 * max(1.0, abs(ref))


@pytest.mark.parametrize("strategy", STRATEGIES)
def test_prefill_matches_pushing(strategy, rng):
    model = StackedMixer.random(2, 3, 40, seed=8, nonlinearity=GELU)
    xs = rng.standard_normal((30, 3))
    a = open_session(model, strategy)
    run_stream(a, xs[:20])
    b = open_session(model, strategy)
    b.prefill(xs[:20])
    assert a.position == b.position == 20
    np.testing.assert_allclose(run_stream(a, xs[20:]), run_stream(b, xs[20:]), atol=1e-10)


def test_resident_scalar_accounting(rng):
    model = StackedMixer.random(2, 3, 16, seed=0)
    xs = rng.standard_normal((40, 3))
    sessions = {s: open_session(model, s) for s in STRATEGIES}
    for i, x in enumerate(xs, start=1):
        for s in sessions.values():
            s.push(x)
        assert sessions["origin"].resident_scalars() == i * 3 * 2
        assert sessions["cache"].resident_scalars() == i * 3 * 2
        assert sessions["ssm"].resident_scalars() == 2 * 16 * 3 * 2


def test_ssm_work_independent_of_position(rng):
    model = StackedMixer.random(2, 3, 16, seed=0)
    ssm, cache = open_session(model, "ssm"), open_session(model, "cache")
    work_ssm, work_cache = set(), []
    for x in rng.standard_normal((50, 3)):
        ssm.push(x)
        cache.push(x)
        work_ssm.add(ssm.last_work)
        work_cache.append(cache.last_work)
    assert work_ssm == {3 * 16 * 3 * 2}
    assert work_cache == sorted(work_cache) and work_cache[-1] > work_cache[0]


def test_ssm_decay_session_in_range():
    model = StackedMixer.random(2, 2, 64, seed=7)
    xs = np.random.default_rng(7).standard_normal((64, 2))
    report = parity_report(model, xs, decay=0.98)
    assert report.in_range_max() < 1e-5


def test_mixer_validation():
    with pytest.raises(ValueError):
        StackedMixer(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        StackedMixer(np.zeros((1, 1, 4)), nonlinearity="relu")
    with pytest.raises(ValueError):
        StackedMixer(np.zeros((1, 1, 4)), extension="mirror")
