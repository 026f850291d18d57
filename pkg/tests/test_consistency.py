import numpy as np
import pytest
from scipy.linalg import solve

from conftest import random_ortho_sensor, rel_err
from pnpdiff.consistency import (ConsistencyConfig, apply_consistency, consistency_step_size,
                                 fused_gain, fused_update, fused_update_separable, gap_update,
                                 hqs_update)
from pnpdiff.schedule import build_schedule
from pnpdiff.sensing import DenseSensor, SeparableSensor, build_separable_sensor, densify


def test_config_validation():
    with pytest.raises(ValueError):
        ConsistencyConfig(lam=0.0)
    with pytest.raises(ValueError):
        ConsistencyConfig(delta=1.5)
    with pytest.raises(ValueError):
        ConsistencyConfig(mode="admm")
    assert ConsistencyConfig(delta=0.4, mode="gap").effective_delta == 0.0
    assert ConsistencyConfig(delta=0.4, mode="hqs").effective_delta == 1.0
    assert ConsistencyConfig(delta=0.4).effective_delta == 0.4


def test_gap_consistent_input_is_fixed(rng):
    d = DenseSensor(rng.standard_normal((3, 6)))
    x = rng.standard_normal(6)
    np.testing.assert_allclose(gap_update(d, x, d.H @ x), x, atol=1e-12)


def test_gap_identity_sensor(rng):
    x, y = rng.standard_normal(5), rng.standard_normal(5)
    np.testing.assert_allclose(gap_update(DenseSensor(np.eye(5)), x, y), y, atol=1e-14)


def test_gap_against_explicit_pseudoinverse(rng):
    H = rng.standard_normal((3, 6))
    x, y = rng.standard_normal(6), rng.standard_normal(3)
    out = gap_update(DenseSensor(H), x, y)
    # oracle: dense Gram solve, then a row-space membership check
    expected = x + H.T @ solve(H @ H.T, y - H @ x, assume_a="pos")
    np.testing.assert_allclose(out, expected, atol=1e-12)
    np.testing.assert_allclose(H @ out, y, atol=1e-10)
    coef, *_ = np.linalg.lstsq(H.T, out - x, rcond=None)
    np.testing.assert_allclose(H.T @ coef, out - x, atol=1e-10)


def test_gap_projection_and_idempotence(rng):
    for _ in range(50):
        d = DenseSensor(rng.standard_normal((4, 9)))
        x, y = rng.standard_normal(9), rng.standard_normal(4)
        once = gap_update(d, x, y)
        assert np.linalg.norm(d.H @ once - y) <= 1e-8 * (1 + np.linalg.norm(y))
        assert np.max(np.abs(gap_update(d, once, y) - once)) <= 1e-10


def test_hqs_prior_dominated_limit(rng):
    d = DenseSensor(rng.standard_normal((3, 6)))
    x, y = rng.standard_normal(6), rng.standard_normal(3)
    np.testing.assert_allclose(hqs_update(d, x, y, 1e12), x, atol=1e-4)


def test_hqs_identity_sensor_averages(rng):
    x, y = rng.standard_normal(4), rng.standard_normal(4)
    np.testing.assert_allclose(hqs_update(DenseSensor(np.eye(4)), x, y, 1.0), (x + y) / 2, atol=1e-14)


def test_hqs_against_normal_equations(rng):
    H = rng.standard_normal((3, 6))
    x, y = rng.standard_normal(6), rng.standard_normal(3)
    expected = solve(H.T @ H + 0.5 * np.eye(6), H.T @ y + 0.5 * x, assume_a="pos")
    np.testing.assert_allclose(hqs_update(DenseSensor(H), x, y, 0.5), expected, atol=1e-12)


def test_hqs_rejects_non_positive_lambda(rng):
    d = DenseSensor(np.eye(2))
    with pytest.raises(ValueError):
        hqs_update(d, np.zeros(2), np.zeros(2), 0.0)


def test_hqs_stationarity_and_finite_differences(rng):
    for _ in range(20):
        H = rng.standard_normal((4, 8))
        d = DenseSensor(H)
        x0, y = rng.standard_normal(8), rng.standard_normal(4)
        lam = float(rng.uniform(0.1, 5.0))
        xs = hqs_update(d, x0, y, lam)
        grad = H.T @ (H @ xs - y) + lam * (xs - x0)
        assert np.linalg.norm(grad) <= 1e-8 * (1 + np.linalg.norm(x0))

        def objective(x):
            return 0.5 * np.sum((y - H @ x) ** 2) + 0.5 * lam * np.sum((x - x0) ** 2)

        # directional derivatives by central differences at the solution,
        # relative to the gradient size at the starting point
        h = 1e-3
        scale = np.linalg.norm(H.T @ (H @ x0 - y))
        for _ in range(5):
            v = rng.standard_normal(8)
            v /= np.linalg.norm(v)
            fd = (objective(xs + h * v) - objective(xs - h * v)) / (2 * h)
            assert abs(fd) / scale <= 1e-5


def test_fused_endpoints_and_hand_value(rng):
    d = DenseSensor(rng.standard_normal((3, 6)))
    x, y = rng.standard_normal(6), rng.standard_normal(3)
    np.testing.assert_array_equal(fused_update(d, x, y, ConsistencyConfig(0.7, 0.0)),
                                  gap_update(d, x, y))
    np.testing.assert_array_equal(fused_update(d, x, y, ConsistencyConfig(0.7, 1.0)),
                                  hqs_update(d, x, y, 0.7))
    x, y = rng.standard_normal(4), rng.standard_normal(4)
    out = fused_update(DenseSensor(np.eye(4)), x, y, ConsistencyConfig(1.0, 0.5))
    np.testing.assert_allclose(out, 0.75 * y + 0.25 * x, atol=1e-14)


def test_fused_is_affine_in_delta(rng):
    d = DenseSensor(rng.standard_normal((4, 7)))
    x, y = rng.standard_normal(7), rng.standard_normal(4)
    f0 = fused_update(d, x, y, ConsistencyConfig(0.3, 0.0))
    f1 = fused_update(d, x, y, ConsistencyConfig(0.3, 1.0))
    for delta in (0.25, 0.5, 0.75):
        fd = fused_update(d, x, y, ConsistencyConfig(0.3, delta))
        assert np.max(np.abs(fd - ((1 - delta) * f0 + delta * f1))) <= 1e-12


def test_gain_formula():
    assert fused_gain(1.0, 0.0) == 1.0
    assert fused_gain(1.0, 1.0) == 0.5
    assert fused_gain(3.0, 0.5) == pytest.approx(1 - 1.5 / 4)


def test_separable_gap_endpoint(rng):
    s = build_separable_sensor(3, 6, seed=2)
    X, Y = rng.standard_normal((6, 6)), rng.standard_normal((3, 3))
    out = fused_update_separable(s, X, Y, ConsistencyConfig(2.0, 0.0))
    np.testing.assert_allclose(out, X + s.U.T @ (Y - s.U @ X @ s.V.T) @ s.V, atol=1e-14)


def test_separable_matches_dense_small_instance(rng):
    s = build_separable_sensor(2, 4, seed=9)
    X, Y = rng.standard_normal((4, 4)), rng.standard_normal((2, 2))
    cfg = ConsistencyConfig(0.7, 0.3)
    fast = fused_update_separable(s, X, Y, cfg)
    slow = fused_update(densify(s), X.ravel(), Y.ravel(), cfg)
    assert rel_err(fast.ravel(), slow) <= 1e-9


def test_separable_dense_equivalence_random(rng):
    for _ in range(50):
        s = random_ortho_sensor(rng)
        X = rng.standard_normal(s.signal_shape)
        Y = rng.standard_normal(s.measurement_shape)
        cfg = ConsistencyConfig(float(rng.uniform(0.01, 10)), float(rng.uniform(0, 1)))
        fast = fused_update_separable(s, X, Y, cfg)
        slow = fused_update(densify(s), X.ravel(), Y.ravel(), cfg)
        assert rel_err(fast.ravel(), slow) <= 1e-9


def test_separable_fast_path_requires_orthogonality(rng):
    s = SeparableSensor(rng.standard_normal((2, 4)), rng.standard_normal((2, 4)))
    with pytest.raises(ValueError):
        fused_update_separable(s, np.zeros((4, 4)), np.zeros((2, 2)), ConsistencyConfig())
    with pytest.raises(TypeError):
        fused_update_separable(DenseSensor(np.eye(2)), np.zeros(2), np.zeros(2), ConsistencyConfig())


def test_generic_separable_path_matches_dense(rng):
    s = SeparableSensor(rng.standard_normal((2, 4)), rng.standard_normal((3, 4))[:2])
    X, Y = rng.standard_normal((4, 4)), rng.standard_normal((2, 2))
    cfg = ConsistencyConfig(0.4, 0.6)
    out = apply_consistency(s, X, Y, cfg)
    assert rel_err(out.ravel(), fused_update(densify(s), X.ravel(), Y.ravel(), cfg)) <= 1e-9


@pytest.mark.parametrize("dense", [True, False])
def test_residual_contraction(rng, dense):
    for _ in range(30):
        if dense:
            d = DenseSensor(rng.standard_normal((4, 9)))
            x, y = rng.standard_normal(9), rng.standard_normal(4)
        else:
            d = random_ortho_sensor(rng)
            x, y = rng.standard_normal(d.signal_shape), rng.standard_normal(d.measurement_shape)
        cfg = ConsistencyConfig(float(rng.uniform(0.01, 10)), float(rng.uniform(0, 1)))
        out = apply_consistency(d, x, y, cfg)
        assert np.linalg.norm(d.apply(out) - y) <= np.linalg.norm(d.apply(x) - y) * (1 + 1e-12)


def test_step_size_formula():
    sched = build_schedule(10)
    t = 4
    a, ap = sched.alpha_bar[t], sched.alpha_bar[t - 1]
    assert consistency_step_size(sched, t) == pytest.approx(np.sqrt((1 - ap) * (1 - a) / a))
