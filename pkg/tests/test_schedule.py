import numpy as np
import pytest

from pnpdiff.schedule import DiffusionSchedule, build_schedule, forward_noise


def test_single_step_schedule():
    s = build_schedule(1, 0.5, 0.5)
    np.testing.assert_array_equal(s.alpha_bar, [1.0, 0.5])
    assert s.T == 1


def test_default_schedule_against_cumulative_product():
    s = build_schedule(100, 1e-3, 0.2)
    betas = [1e-3 + (0.2 - 1e-3) * k / 99 for k in range(100)]
    expected = [1.0]
    for b in betas:
        expected.append(expected[-1] * (1 - b))
    np.testing.assert_allclose(s.alpha_bar, expected, rtol=1e-12)
    assert np.all(np.diff(s.alpha_bar) < 0)
    assert s.alpha_bar[-1] <= 1e-3


def test_deterministic_flags():
    s = build_schedule(50, zeta=0.7, stochastic=False)
    assert not np.any(s.sigma) and s.zeta == 0.0 and np.all(s.w == 1.0)
    assert s.deterministic


def test_stochastic_sigma_matches_zeta():
    s = build_schedule(50, zeta=0.3, stochastic=True)
    np.testing.assert_allclose(s.sigma ** 2, 0.3 * (1 - s.alpha_bar[:-1]))
    assert np.all(1 - s.alpha_bar[:-1] - s.sigma ** 2 >= 0)
    assert not s.deterministic


def test_default_delta_ramp():
    s = build_schedule(11)
    assert s.delta[0] == 1.0 and s.delta[-1] == 0.0
    assert np.all(np.diff(s.delta) < 0)


@pytest.mark.parametrize("lo,hi", [(0.0, 0.1), (0.2, 0.1), (0.1, 1.0)])
def test_invalid_beta_range(lo, hi):
    with pytest.raises(ValueError):
        build_schedule(10, lo, hi)


def test_schedule_invariants_enforced():
    with pytest.raises(ValueError):
        DiffusionSchedule([1.0, 0.5, 0.6], np.zeros(2), np.ones(2), np.zeros(2))
    with pytest.raises(ValueError):
        DiffusionSchedule([1.0, 0.5], np.ones(1), np.ones(1), np.zeros(1))
    with pytest.raises(ValueError):
        DiffusionSchedule([1.0, 0.5], np.zeros(1), np.ones(1), [2.0])


def test_forward_noise_endpoint_and_determinism(rng):
    s = build_schedule(10)
    x0 = rng.standard_normal(8)
    np.testing.assert_array_equal(forward_noise(x0, 0, s, 3), x0)
    a = forward_noise(x0, 5, s, 42)
    b = forward_noise(x0, 5, s, 42)
    assert np.array_equal(a, b)
    with pytest.raises(ValueError):
        forward_noise(x0, 11, s, 0)


def test_forward_noise_moments():
    s = build_schedule(100)
    t = 50
    x0 = np.linspace(-1, 1, 64)
    draws = np.stack([forward_noise(x0, t, s, seed) for seed in range(10_000)])
    a = s.alpha_bar[t]
    se = np.sqrt((1 - a) / draws.shape[0])
    assert np.all(np.abs(draws.mean(axis=0) - np.sqrt(a) * x0) <= 4 * se)
    pooled = np.mean(draws.var(axis=0, ddof=1))
    assert abs(pooled - (1 - a)) <= 0.05 * (1 - a)
