import numpy as np
import pytest

from pnpdiff.consistency import hqs_update
from pnpdiff.pnp import PnpConfig, pnp_solve
from pnpdiff.priors import DenoiserAdapter, smoothing_denoiser
from pnpdiff.sensing import DenseSensor, build_separable_sensor, pseudoinverse_apply

IDENTITY = DenoiserAdapter(lambda x, s: x)


def test_config_validation():
    with pytest.raises(ValueError):
        PnpConfig(iterations=0)
    with pytest.raises(ValueError):
        PnpConfig(gamma=0.0)
    with pytest.raises(ValueError):
        PnpConfig(iterations=3, sigmas=[0.1, 0.2, 0.05])
    with pytest.raises(ValueError):
        PnpConfig(variant="admm")
    cfg = PnpConfig(iterations=5)
    assert cfg.sigmas[0] == pytest.approx(0.2) and cfg.sigmas[-1] == pytest.approx(0.01)


def test_gap_identity_denoiser_one_iteration(rng):
    d = DenseSensor(rng.standard_normal((3, 7)))
    y, x_init = rng.standard_normal(3), rng.standard_normal(7)
    out = pnp_solve(y, d, IDENTITY, PnpConfig(iterations=1, variant="gap"), x_init)
    H = d.H
    pinv = H.T @ np.linalg.inv(H @ H.T)
    np.testing.assert_allclose(out, pinv @ y + (np.eye(7) - pinv @ H) @ x_init, atol=1e-12)
    again = pnp_solve(y, d, IDENTITY, PnpConfig(iterations=4, variant="gap"), out)
    np.testing.assert_allclose(again, out, atol=1e-12)


def test_hqs_identity_sensor_converges_to_measurement(rng):
    y, x = rng.standard_normal(6), rng.standard_normal(6)
    gamma = 0.1
    out = pnp_solve(y, DenseSensor(np.eye(6)), IDENTITY,
                    PnpConfig(iterations=10, gamma=gamma, variant="hqs"), x)
    # scalar recursion v <- (v + y / gamma) / (1 + 1 / gamma), run by hand
    v = x.copy()
    for _ in range(10):
        v = (v + y / gamma) / (1 + 1 / gamma)
    np.testing.assert_allclose(out, v, atol=1e-12)
    assert np.max(np.abs(out - y)) <= 1e-8


def test_hqs_with_tiny_gamma_approaches_gap(rng):
    sensor = build_separable_sensor(6, 16, seed=3)
    y = sensor.apply(rng.uniform(0, 1, (16, 16)))
    den = DenoiserAdapter(smoothing_denoiser)
    gap = pnp_solve(y, sensor, den, PnpConfig(iterations=8, variant="gap"))
    hqs = pnp_solve(y, sensor, den, PnpConfig(iterations=8, gamma=1e-8, variant="hqs"))
    assert np.max(np.abs(gap - hqs)) <= 1e-4


def test_hard_constraint_and_hqs_optimality(rng):
    d = DenseSensor(rng.standard_normal((5, 16)))
    y = rng.standard_normal(5)
    den = DenoiserAdapter(smoothing_denoiser, shape=(4, 4))
    seen = []
    pnp_solve(y, d, den, PnpConfig(iterations=6, variant="gap"),
              callback=lambda k, x, z: seen.append(x))
    for x in seen:
        assert np.linalg.norm(d.H @ x - y) <= 1e-8 * (1 + np.linalg.norm(y))

    gamma = 0.3
    pairs = []
    z_prev = [pseudoinverse_apply(d, y)]

    def record(k, x, z):
        pairs.append((z_prev[0], x))
        z_prev[0] = z

    pnp_solve(y, d, den, PnpConfig(iterations=6, gamma=gamma, variant="hqs"), callback=record)
    for v, x in pairs:
        # (I + H^T H / gamma) x = v + H^T y / gamma
        lhs = x + d.H.T @ (d.H @ x) / gamma
        rhs = v + d.H.T @ y / gamma
        assert np.linalg.norm(lhs - rhs) <= 1e-8 * (1 + np.linalg.norm(rhs))
        np.testing.assert_allclose(x, hqs_update(d, v, y, gamma), atol=1e-12)


@pytest.mark.parametrize("variant", ["gap", "hqs"])
def test_fixed_point(rng, variant):
    sensor = build_separable_sensor(4, 16, seed=0)
    x_star = np.full((16, 16), 0.4)  # constants are fixed by the smoothing denoiser
    y = sensor.apply(x_star)
    out = pnp_solve(y, sensor, DenoiserAdapter(smoothing_denoiser),
                    PnpConfig(iterations=5, variant=variant), x_star)
    np.testing.assert_allclose(out, x_star, atol=1e-12)


def test_gap_residual_bounded_by_denoiser_step(rng):
    sensor = build_separable_sensor(6, 16, seed=2)
    y = sensor.apply(rng.uniform(0, 1, (16, 16)))
    den = DenoiserAdapter(smoothing_denoiser)
    history = []
    pnp_solve(y, sensor, den, PnpConfig(iterations=10, variant="gap"),
              callback=lambda k, x, z: history.append((x, z)))
    for (x, z), _ in zip(history, history[1:]):
        # the next consistency step starts from z; its residual is bounded by ||z - x||
        slack = 1e-8 * (1 + np.linalg.norm(y))
        assert np.linalg.norm(sensor.apply(z) - y) <= np.linalg.norm(z - x) + slack
