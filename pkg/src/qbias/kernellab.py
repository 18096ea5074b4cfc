"""Fidelity kernels, Gram matrices and their concentration with width.

For angle encoding of data uniform on [0, 1]^n the kernel factorizes over
qubits, each factor having mean 1/2 + 2/pi^2 ~ 0.7026, so the mean
off-diagonal Gram entry shrinks like 0.7026^n and the matrix drifts toward
the identity (dominant eigenvalue -> 1). This law belongs to that encoding
and data distribution; it is not a general statement about quantum kernels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import batched, simcore
from .encode import EncodingSpec, encoded_state, encoding_circuit
from .errors import ArityError, CapacityError, ConvergenceError, DataError

MAX_KERNEL_QUBITS = 20
MAX_SAMPLES = 200
# Bytes of statevectors held at once while filling a Gram matrix.
_STATE_BUDGET = 256 * 2**20


@dataclass
class GramMatrix:
    entries: np.ndarray

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=float)
        if self.entries.ndim != 2 or self.entries.shape[0] != self.entries.shape[1]:
            raise ArityError(f"Gram matrix must be square, got {self.entries.shape}")

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    def mean_offdiag(self) -> float:
        m = self.size
        return float((self.entries.sum() - np.trace(self.entries)) / (m * (m - 1)))

    def check(self, tol: float = 1e-12, psd_tol: float = 1e-9) -> None:
        """Raise ``ValueError`` unless symmetric, unit-diagonal and PSD."""
        k = self.entries
        if np.max(np.abs(k - k.T)) > tol:
            raise ValueError("Gram matrix is not symmetric")
        if np.max(np.abs(np.diag(k) - 1.0)) > tol:
            raise ValueError("Gram matrix diagonal is not 1")
        if np.linalg.eigvalsh(k).min() < -psd_tol:
            raise ValueError("Gram matrix is not positive semidefinite")


@dataclass
class ConcentrationRow:
    n_qubits: int
    m: int
    mean_offdiag: float
    lambda_max: float
    seeds: int


def _check_encoding(encoding: EncodingSpec, *vectors) -> None:
    for v in vectors:
        if np.shape(v) != (encoding.num_features,):
            raise ArityError(
                f"encoding expects {encoding.num_features} features, got shape {np.shape(v)}"
            )


def kernel_value(x, y, encoding: EncodingSpec) -> float:
    """|<phi(x)|phi(y)>|^2 from the two encoded statevectors."""
    _check_encoding(encoding, x, y)
    a = encoded_state(encoding, x).amplitudes
    b = encoded_state(encoding, y).amplitudes
    return float(np.abs(np.vdot(a, b)) ** 2)


def _states(X: np.ndarray, encoding: EncodingSpec) -> np.ndarray:
    n = encoding.num_features
    factors = []
    for x in X:
        circuit = encoding_circuit(encoding, x)
        angles = circuit.bound_angles(encoding.weights if encoding.kind == "hybrid" else None)
        factors.append(batched.qubit_factors(n, circuit.gates, angles))
    return batched.kron_states(np.stack(factors))


def gram_matrix(X, encoding: EncodingSpec) -> GramMatrix:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or len(X) < 2:
        raise DataError("need at least two samples for a Gram matrix")
    for x in X:
        _check_encoding(encoding, x)
    m, n = len(X), encoding.num_features
    chunk = max(1, _STATE_BUDGET // (2 * 16 * (1 << n)))
    k = np.empty((m, m))
    for i in range(0, m, chunk):
        left = _states(X[i:i + chunk], encoding)
        for j in range(i, m, chunk):
            right = left if j == i else _states(X[j:j + chunk], encoding)
            block = np.abs(left.conj() @ right.T) ** 2
            k[i:i + chunk, j:j + chunk] = block
            k[j:j + chunk, i:i + chunk] = block.T
    return GramMatrix(k)


def dominant_eigenvalue(matrix, tol: float = 1e-9, max_iter: int = 100_000) -> float:
    """Largest eigenvalue of a symmetric PSD matrix by power iteration.

    Starts from the normalized all-ones vector and stops once successive
    Rayleigh quotients differ by less than ``tol``.
    """
    a = matrix.entries if isinstance(matrix, GramMatrix) else np.asarray(matrix, dtype=float)
    x = np.ones(a.shape[0]) / np.sqrt(a.shape[0])
    previous = None
    for _ in range(max_iter):
        y = a @ x
        rayleigh = float(x @ y)
        if previous is not None and abs(rayleigh - previous) < tol:
            return rayleigh
        norm = np.linalg.norm(y)
        if norm == 0.0:
            return 0.0
        x = y / norm
        previous = rayleigh
    raise ConvergenceError(f"power iteration did not converge in {max_iter} steps")


def concentration_experiment(n_list, m: int, num_seeds: int, seed: int,
                             identical_samples: bool = False) -> list[ConcentrationRow]:
    """Angle-encoded uniform data: mean off-diagonal kernel and lambda_max per width.

    Substream ``(n << 16) + s`` draws the data for width n and repeat s.
    ``identical_samples`` repeats the first draw m times (the rank-one case).
    """
    if not 2 <= m <= MAX_SAMPLES:
        raise CapacityError(f"m must be in 2..{MAX_SAMPLES}, got {m}")
    if num_seeds < 1:
        raise ValueError("num_seeds must be >= 1")
    rows = []
    for n in n_list:
        if not 1 <= n <= MAX_KERNEL_QUBITS:
            raise CapacityError(f"kernel width must be in 1..{MAX_KERNEL_QUBITS}, got {n}")
        spec = EncodingSpec("angle", n)
        offdiag, lam = [], []
        for s in range(num_seeds):
            rng = simcore.substream(seed, (n << 16) + s)
            X = rng.random((m, n))
            if identical_samples:
                X[:] = X[0]
            gram = gram_matrix(X, spec)
            offdiag.append(gram.mean_offdiag())
            lam.append(dominant_eigenvalue(gram))
        rows.append(ConcentrationRow(n, m, float(np.mean(offdiag)), float(np.mean(lam)), num_seeds))
    return rows
