import numpy as np
import pytest

from pnpdiff.sensing import DenseSensor, build_separable_sensor


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_dense_sensor(rng, m, n):
    return DenseSensor(rng.standard_normal((m, n)))


def random_ortho_sensor(rng, max_m=8, max_n=16):
    n = int(rng.integers(2, max_n + 1))
    m = int(rng.integers(1, min(max_m, n) + 1))
    return build_separable_sensor(m, n, "orthonormal-random", int(rng.integers(1 << 30)))


def rel_err(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300)


def kron_oracle(U, V):
    """Element-by-element Kronecker product, kept independent of np.kron."""
    m1, n1 = U.shape
    m2, n2 = V.shape
    H = np.empty((m1 * m2, n1 * n2))
    for i in range(m1):
        for j in range(m2):
            for k in range(n1):
                for l in range(n2):
                    H[i * m2 + j, k * n2 + l] = U[i, k] * V[j, l]
    return H
