"""Linear measurement operators for single-pixel / compressive imaging.

Two operator flavours are provided:

* :class:`SeparableSensor` implements the 2D model ``Y = U @ X @ V.T``.
  It never forms the full ``M x N`` matrix.
* :class:`DenseSensor` holds an explicit matrix ``H``. It exists mainly as a
  cross-check for the separable path and for small generic problems.

Vectorization convention
------------------------
Images are flattened **row-major** (``X.ravel()``, C order). Under that
convention ``vec(U X V^T) = kron(U, V) @ vec(X)``, so the dense form of a
separable sensor is exactly ``H = U ⊗ V``. Column-major flattening gives
``kron(V, U)`` instead; :func:`densify` supports both.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import linalg
from scipy.linalg import hadamard

__all__ = [
    "RankDeficientError",
    "SeparableSensor",
    "DenseSensor",
    "build_separable_sensor",
    "apply_separable",
    "adjoint_separable",
    "densify",
    "apply_dense",
    "pseudoinverse_apply",
    "save_sensor",
    "load_sensor",
    "SENSOR_KINDS",
    "MAX_DENSE_SIDE",
]

SENSOR_KINDS = ("orthonormal-random", "scrambled-hadamard")
MAX_DENSE_SIDE = 32
ORTHO_TOL = 1e-10


class RankDeficientError(ValueError):
    """Raised when a sensing matrix does not have full row rank."""


def _max_gram_error(A):
    return float(np.max(np.abs(A @ A.T - np.eye(A.shape[0]))))


@dataclass(frozen=True, eq=False)
class SeparableSensor:
    """Separable sensing operator ``X -> U X V^T``.

    ``U`` and ``V`` both have shape ``(sqrt_m, sqrt_n)``. ``kind`` and
    ``seed`` are provenance only (``None`` for user-supplied matrices).
    """

    U: np.ndarray
    V: np.ndarray
    kind: str | None = None
    seed: int | None = None
    orthogonal_rows: bool = field(init=False)
    # eigendecompositions of U U^T and V V^T, used by the generic solves
    _gram_u: tuple = field(init=False, repr=False)
    _gram_v: tuple = field(init=False, repr=False)

    def __post_init__(self):
        U = np.array(self.U, dtype=np.float64)
        V = np.array(self.V, dtype=np.float64)
        if U.ndim != 2 or V.ndim != 2:
            raise ValueError("U and V must be 2D matrices")
        if U.shape != V.shape:
            raise ValueError(f"U and V must share a shape, got {U.shape} and {V.shape}")
        if U.shape[0] > U.shape[1]:
            raise ValueError(f"need sqrt_m <= sqrt_n, got U of shape {U.shape}")
        if not (np.all(np.isfinite(U)) and np.all(np.isfinite(V))):
            raise ValueError("U and V must be finite")
        U.setflags(write=False)
        V.setflags(write=False)
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "V", V)

        grams = []
        for name, A in (("U", U), ("V", V)):
            w, Q = np.linalg.eigh(A @ A.T)
            if w[0] <= 1e-12 * max(w[-1], 1.0):
                raise RankDeficientError(f"{name} does not have full row rank")
            grams.append((w, Q))
        object.__setattr__(self, "_gram_u", grams[0])
        object.__setattr__(self, "_gram_v", grams[1])
        ortho = _max_gram_error(U) <= ORTHO_TOL and _max_gram_error(V) <= ORTHO_TOL
        object.__setattr__(self, "orthogonal_rows", bool(ortho))

    @property
    def measurement_shape(self):
        return (self.U.shape[0], self.V.shape[0])

    @property
    def signal_shape(self):
        return (self.U.shape[1], self.V.shape[1])

    @property
    def n_measurements(self):
        return self.U.shape[0] * self.V.shape[0]

    @property
    def n_pixels(self):
        return self.U.shape[1] * self.V.shape[1]

    @property
    def compression_ratio(self):
        return self.n_measurements / self.n_pixels

    def apply(self, X):
        return apply_separable(self, X)

    def adjoint(self, Y):
        return adjoint_separable(self, Y)

    def solve_gram(self, R, lam=0.0):
        """Return ``(H H^T + lam I)^{-1} r`` with ``r = vec(R)``, in grid form.

        ``H H^T = (U U^T) ⊗ (V V^T)`` so the inverse is diagonal in the
        product eigenbasis.
        """
        R = _check_shape(R, self.measurement_shape, "measurement")
        if self.orthogonal_rows:
            return R / (1.0 + lam)
        wu, Qu = self._gram_u
        wv, Qv = self._gram_v
        C = Qu.T @ R @ Qv
        C = C / (np.outer(wu, wv) + lam)
        return Qu @ C @ Qv.T


@dataclass(frozen=True, eq=False)
class DenseSensor:
    """Explicit ``m x n`` sensing matrix with a cached Cholesky factor of ``H H^T``."""

    H: np.ndarray
    _chol: tuple = field(init=False, repr=False)

    def __post_init__(self):
        H = np.array(self.H, dtype=np.float64)
        if H.ndim != 2:
            raise ValueError("H must be a 2D matrix")
        if H.shape[0] > H.shape[1]:
            raise ValueError(f"need m <= n, got H of shape {H.shape}")
        if not np.all(np.isfinite(H)):
            raise ValueError("H must be finite")
        if np.linalg.matrix_rank(H) < H.shape[0]:
            raise RankDeficientError(f"H of shape {H.shape} is not full row rank")
        H.setflags(write=False)
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "_chol", _cholesky(H @ H.T))

    @property
    def shape(self):
        return self.H.shape

    @property
    def n_measurements(self):
        return self.H.shape[0]

    @property
    def n_pixels(self):
        return self.H.shape[1]

    @property
    def compression_ratio(self):
        return self.H.shape[0] / self.H.shape[1]

    def apply(self, x):
        return apply_dense(self, x)

    def adjoint(self, y):
        y = _check_vector(y, self.H.shape[0], "measurement")
        return self.H.T @ y

    def solve_gram(self, r, lam=0.0):
        """Return ``(H H^T + lam I)^{-1} r`` by Cholesky."""
        r = _check_vector(r, self.H.shape[0], "measurement")
        if lam == 0.0:
            return linalg.cho_solve(self._chol, r)
        G = self.H @ self.H.T + lam * np.eye(self.H.shape[0])
        return linalg.cho_solve(_cholesky(G), r)


def _cholesky(G):
    try:
        return linalg.cho_factor(G, lower=True)
    except linalg.LinAlgError as exc:
        raise RankDeficientError("Gram matrix is not positive definite") from exc


def _check_shape(A, shape, what):
    A = np.asarray(A, dtype=np.float64)
    if A.shape != tuple(shape):
        raise ValueError(f"{what} grid has shape {A.shape}, expected {tuple(shape)}")
    return A


def _check_vector(a, n, what):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 1 or a.shape[0] != n:
        raise ValueError(f"{what} vector has shape {a.shape}, expected ({n},)")
    return a


def _orthonormal_rows(rng, m, n):
    G = rng.standard_normal((n, m))
    Q, R = np.linalg.qr(G)
    # fix the QR sign ambiguity so the result only depends on the draw
    Q = Q * np.sign(np.diag(R))
    return Q.T


def _scrambled_hadamard_rows(rng, m, n):
    W = hadamard(n).astype(np.float64) / np.sqrt(n)
    rows = rng.choice(n, size=m, replace=False)
    cols = rng.permutation(n)
    return W[np.sort(rows)][:, cols]


def build_separable_sensor(sqrt_m, sqrt_n, kind="orthonormal-random", seed=0):
    """Build a row-orthonormal separable sensor.

    ``orthonormal-random`` takes the Q factor of a Gaussian matrix.
    ``scrambled-hadamard`` keeps a random subset of rows of the normalized
    Sylvester-Hadamard matrix and permutes its columns, so entries are
    ``±1/sqrt(sqrt_n)`` and ``U U^T = I``. ``U`` and ``V`` are drawn
    independently from one generator seeded with ``seed``.
    """
    sqrt_m, sqrt_n = int(sqrt_m), int(sqrt_n)
    if sqrt_m < 1 or sqrt_n < 1:
        raise ValueError("sensor dimensions must be positive")
    if sqrt_m > sqrt_n:
        raise ValueError(f"sqrt_m={sqrt_m} exceeds sqrt_n={sqrt_n}")
    rng = np.random.default_rng(seed)
    if kind == "orthonormal-random":
        U = _orthonormal_rows(rng, sqrt_m, sqrt_n)
        V = _orthonormal_rows(rng, sqrt_m, sqrt_n)
    elif kind == "scrambled-hadamard":
        if sqrt_n & (sqrt_n - 1):
            raise ValueError(f"scrambled-hadamard needs a power-of-two sqrt_n, got {sqrt_n}")
        U = _scrambled_hadamard_rows(rng, sqrt_m, sqrt_n)
        V = _scrambled_hadamard_rows(rng, sqrt_m, sqrt_n)
    else:
        raise ValueError(f"unknown sensor kind {kind!r}; expected one of {SENSOR_KINDS}")
    return SeparableSensor(U, V, kind=kind, seed=int(seed))


def apply_separable(sensor, X):
    """Forward model ``Y = U X V^T``."""
    X = _check_shape(X, sensor.signal_shape, "signal")
    return sensor.U @ X @ sensor.V.T


def adjoint_separable(sensor, Y):
    """Adjoint ``X = U^T Y V`` (Frobenius inner product)."""
    Y = _check_shape(Y, sensor.measurement_shape, "measurement")
    return sensor.U.T @ Y @ sensor.V


def densify(sensor, vec_convention="row-major"):
    """Expand a separable sensor to an explicit :class:`DenseSensor`.

    The result satisfies ``H @ vec(X) == vec(U X V^T)`` for the chosen
    flattening. Limited to ``sqrt_n <= MAX_DENSE_SIDE``.
    """
    if max(sensor.signal_shape) > MAX_DENSE_SIDE:
        raise ValueError(
            f"refusing to densify a {sensor.signal_shape} sensor "
            f"(limit is {MAX_DENSE_SIDE} per side); use the separable path"
        )
    if vec_convention == "row-major":
        H = np.kron(sensor.U, sensor.V)
    elif vec_convention == "column-major":
        H = np.kron(sensor.V, sensor.U)
    else:
        raise ValueError(f"unknown vec_convention {vec_convention!r}")
    return DenseSensor(H)


def apply_dense(sensor, x):
    x = _check_vector(x, sensor.H.shape[1], "signal")
    return sensor.H @ x


def pseudoinverse_apply(sensor, y):
    """Minimum-norm solution ``H^T (H H^T)^{-1} y``.

    Accepts either sensor flavour; for a separable sensor ``y`` is a
    measurement grid and the result is a signal grid.
    """
    if isinstance(sensor, SeparableSensor):
        return adjoint_separable(sensor, sensor.solve_gram(y))
    y = _check_vector(y, sensor.H.shape[0], "measurement")
    return sensor.H.T @ sensor.solve_gram(y)


# -- serialization ----------------------------------------------------------

_MAGIC = b"PNPSENS\x00"
_VERSION = 1


def save_sensor(sensor, path, include_matrices=True):
    """Write a sensor container.

    Layout: 8-byte magic, uint16 format version, uint32 header length, a
    UTF-8 JSON header, then (optionally) ``U`` and ``V`` as row-major
    little-endian float64. All integers are little-endian.
    """
    if not isinstance(sensor, SeparableSensor):
        raise TypeError("only separable sensors can be serialized")
    if not include_matrices and sensor.kind is None:
        raise ValueError("a sensor without kind/seed must be saved with its matrices")
    header = {
        "kind": sensor.kind,
        "seed": sensor.seed,
        "sqrt_m": sensor.U.shape[0],
        "sqrt_n": sensor.U.shape[1],
        "matrices": bool(include_matrices),
        "dtype": "<f8",
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    buf = io.BytesIO()
    buf.write(_MAGIC)
    buf.write(struct.pack("<HI", _VERSION, len(blob)))
    buf.write(blob)
    if include_matrices:
        buf.write(np.ascontiguousarray(sensor.U, dtype="<f8").tobytes())
        buf.write(np.ascontiguousarray(sensor.V, dtype="<f8").tobytes())
    Path(path).write_bytes(buf.getvalue())


def load_sensor(path):
    data = Path(path).read_bytes()
    if not data.startswith(_MAGIC):
        raise ValueError(f"{path}: not a sensor container (bad magic)")
    offset = len(_MAGIC)
    if len(data) < offset + 6:
        raise ValueError(f"{path}: truncated sensor header")
    version, hlen = struct.unpack_from("<HI", data, offset)
    if version != _VERSION:
        raise ValueError(f"{path}: unsupported sensor format version {version}")
    offset += 6
    try:
        header = json.loads(data[offset:offset + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ValueError(f"{path}: malformed sensor header") from exc
    offset += hlen
    m, n = int(header["sqrt_m"]), int(header["sqrt_n"])
    if not header["matrices"]:
        return build_separable_sensor(m, n, header["kind"], header["seed"])
    size = m * n * 8
    if len(data) != offset + 2 * size:
        raise ValueError(f"{path}: matrix payload has wrong length")
    U = np.frombuffer(data, dtype="<f8", count=m * n, offset=offset).reshape(m, n)
    V = np.frombuffer(data, dtype="<f8", count=m * n, offset=offset + size).reshape(m, n)
    return SeparableSensor(U.astype(np.float64), V.astype(np.float64),
                           kind=header["kind"], seed=header["seed"])
