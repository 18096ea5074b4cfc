"""Statevector simulation of small gate circuits.

Conventions used throughout the package:

* qubit ``i`` is bit ``i`` of the basis index, qubit 0 least significant;
* rendered bitstrings list qubit 0 first (leftmost);
* rotations are ``R_P(theta) = exp(-i theta P / 2)``.

Gates are applied in place over strided amplitude pairs. The public
functions are pure (they copy before mutating); the underscored batch
kernels work on arrays of shape ``(batch, 2**n)`` and are what the
classifier uses for training.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .errors import ArityError, CapacityError, QubitIndexError, UnsupportedGateError

MAX_QUBITS = 24
ROTATIONS = ("RX", "RY", "RZ")
GATE_KINDS = ("X", "H") + ROTATIONS + ("CNOT",)

_SQRT1_2 = 1.0 / np.sqrt(2.0)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_H = np.array([[1, 1], [1, -1]], dtype=complex) * _SQRT1_2
# Generators P of the rotations, used by the adjoint gradient.
PAULI = {
    "RX": _X,
    "RY": np.array([[0, -1j], [1j, 0]]),
    "RZ": np.array([[1, 0], [0, -1]], dtype=complex),
}
# Permutations for CNOT runs are cached; above this size they cost too much memory.
_PERMUTATION_MAX_QUBITS = 20


def substream(seed: int, stream: int = 0) -> np.random.Generator:
    """Seeded PCG64 generator for substream ``seed + stream`` (mod 2**64)."""
    return np.random.Generator(np.random.PCG64((int(seed) + int(stream)) % 2**64))


# ---------------------------------------------------------------------------
# Data types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Gate:
    """One gate. Rotations carry either a literal ``angle`` or a parameter
    ``slot``, in which case the bound angle is ``scale * params[slot]``."""

    kind: str
    qubits: tuple[int, ...]
    angle: float = 0.0
    slot: int | None = None
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        arity = 2 if self.kind == "CNOT" else 1
        if len(self.qubits) != arity:
            raise QubitIndexError(f"{self.kind} takes {arity} qubit(s), got {self.qubits}")
        if self.kind == "CNOT" and self.qubits[0] == self.qubits[1]:
            raise QubitIndexError("CNOT control and target must differ")
        if self.slot is not None and self.kind not in ROTATIONS:
            raise UnsupportedGateError(f"{self.kind} cannot take a parameter slot")

    @property
    def is_rotation(self) -> bool:
        return self.kind in ROTATIONS

    def bound_angle(self, params: Sequence[float] | None = None) -> float:
        if self.slot is None:
            return self.angle
        return self.scale * params[self.slot]


def X(q: int) -> Gate:
    return Gate("X", (q,))


def H(q: int) -> Gate:
    return Gate("H", (q,))


def RX(q: int, angle: float = 0.0, slot: int | None = None, scale: float = 1.0) -> Gate:
    return Gate("RX", (q,), float(angle), slot, float(scale))


def RY(q: int, angle: float = 0.0, slot: int | None = None, scale: float = 1.0) -> Gate:
    return Gate("RY", (q,), float(angle), slot, float(scale))


def RZ(q: int, angle: float = 0.0, slot: int | None = None, scale: float = 1.0) -> Gate:
    return Gate("RZ", (q,), float(angle), slot, float(scale))


def CNOT(control: int, target: int) -> Gate:
    return Gate("CNOT", (control, target))


@dataclass
class Circuit:
    """Ordered gate list over ``num_qubits`` with ``num_params`` free slots."""

    num_qubits: int
    gates: list[Gate] = field(default_factory=list)
    num_params: int = 0

    def __post_init__(self):
        _check_register(self.num_qubits)
        self.gates = list(self.gates)
        seen = set()
        for g in self.gates:
            for q in g.qubits:
                if not 0 <= q < self.num_qubits:
                    raise QubitIndexError(f"qubit {q} outside {self.num_qubits}-qubit circuit")
            if g.slot is not None:
                if not 0 <= g.slot < self.num_params:
                    raise ArityError(f"slot {g.slot} not in 0..{self.num_params - 1}")
                seen.add(g.slot)
        missing = set(range(self.num_params)) - seen
        if missing:
            raise ArityError(f"parameter slots never used: {sorted(missing)}")

    @property
    def bindings(self) -> dict[int, list[tuple[int, float]]]:
        """slot -> [(gate position, scale), ...]"""
        out: dict[int, list[tuple[int, float]]] = {k: [] for k in range(self.num_params)}
        for pos, g in enumerate(self.gates):
            if g.slot is not None:
                out[g.slot].append((pos, g.scale))
        return out

    def bound_angles(self, params: Sequence[float] | None) -> list[float]:
        params = check_params(self, params)
        return [g.bound_angle(params) for g in self.gates]

    def offset_slots(self, offset: int) -> list[Gate]:
        """Gates with every slot index moved by ``offset``."""
        return [
            g if g.slot is None else Gate(g.kind, g.qubits, g.angle, g.slot + offset, g.scale)
            for g in self.gates
        ]


def check_params(circuit: Circuit, params) -> np.ndarray:
    params = np.zeros(0) if params is None else np.asarray(params, dtype=float)
    if params.shape != (circuit.num_params,):
        raise ArityError(
            f"circuit has {circuit.num_params} parameter(s), got shape {params.shape}"
        )
    return params


@dataclass
class Statevector:
    num_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        _check_register(self.num_qubits)
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.complex128)
        if self.amplitudes.shape != (1 << self.num_qubits,):
            raise ArityError(
                f"{self.num_qubits} qubits need {1 << self.num_qubits} amplitudes, "
                f"got shape {self.amplitudes.shape}"
            )
        norm = float(np.vdot(self.amplitudes, self.amplitudes).real)
        if abs(norm - 1.0) > 1e-10:
            raise ValueError(f"state is not normalized (norm^2 = {norm!r})")


@dataclass
class ShotCounts:
    """Bitstring histogram; keys list qubit 0 first."""

    num_qubits: int
    shots: int
    counts: dict[str, int]

    def __post_init__(self):
        total = 0
        for key, c in self.counts.items():
            if len(key) != self.num_qubits or set(key) - {"0", "1"}:
                raise ValueError(f"bad bitstring {key!r} for {self.num_qubits} qubits")
            if c < 0:
                raise ValueError("negative count")
            total += c
        if total != self.shots:
            raise ValueError(f"counts sum to {total}, expected {self.shots}")
        self.counts = dict(sorted(self.counts.items()))

    def get(self, bitstring: str) -> int:
        return self.counts.get(bitstring, 0)

    def z_estimate(self, qubit: int) -> float:
        """Sample mean of the Z eigenvalue on ``qubit``."""
        if not 0 <= qubit < self.num_qubits:
            raise QubitIndexError(f"qubit {qubit} outside register")
        ones = sum(c for key, c in self.counts.items() if key[qubit] == "1")
        return (self.shots - 2 * ones) / self.shots


def bitstring(index: int, num_qubits: int) -> str:
    return "".join("1" if (index >> q) & 1 else "0" for q in range(num_qubits))


def bitstring_index(key: str) -> int:
    return sum(1 << q for q, ch in enumerate(key) if ch == "1")


def counts_from_indices(indices: np.ndarray, num_qubits: int) -> ShotCounts:
    values, freq = np.unique(np.asarray(indices, dtype=np.int64), return_counts=True)
    counts = {bitstring(int(v), num_qubits): int(c) for v, c in zip(values, freq)}
    return ShotCounts(num_qubits, int(freq.sum()), counts)


# ---------------------------------------------------------------------------
# Batch kernels (arrays of shape (batch, 2**n), modified in place)
# ---------------------------------------------------------------------------


def _check_register(n: int) -> None:
    if not isinstance(n, (int, np.integer)) or not 1 <= n <= MAX_QUBITS:
        raise CapacityError(f"register size must be in 1..{MAX_QUBITS}, got {n!r}")


def gate_matrix(kind: str, theta=0.0) -> np.ndarray:
    """2x2 unitary, or a stack of shape (B, 2, 2) when ``theta`` is an array."""
    if kind == "X":
        return _X
    if kind == "H":
        return _H
    theta = np.asarray(theta, dtype=float)
    c = np.cos(theta / 2)
    s = np.sin(theta / 2)
    z = np.zeros_like(c)
    if kind == "RY":
        m = [[c, -s], [s, c]]
    elif kind == "RX":
        m = [[c, -1j * s], [-1j * s, c]]
    elif kind == "RZ":
        m = [[c - 1j * s, z], [z, c + 1j * s]]
    else:
        raise ValueError(f"no single-qubit matrix for {kind!r}")
    m = np.array(m, dtype=complex)
    return np.moveaxis(m, (0, 1), (-2, -1)) if m.ndim == 3 else m


def _pair_view(psi: np.ndarray, n: int, q: int):
    v = psi.reshape(psi.shape[0], 1 << (n - q - 1), 2, 1 << q)
    return v[:, :, 0, :], v[:, :, 1, :]


def _coef(a, batched: bool):
    return a[:, None, None] if batched else a


def apply_rotation_(psi: np.ndarray, n: int, kind: str, q: int, theta) -> None:
    """In-place rotation; ``theta`` is a scalar or one angle per batch row."""
    theta = np.asarray(theta, dtype=float)
    batched = theta.ndim == 1
    a0, a1 = _pair_view(psi, n, q)
    c = _coef(np.cos(theta / 2), batched)
    s = _coef(np.sin(theta / 2), batched)
    if kind == "RY":
        new0 = c * a0 - s * a1
        a1 *= c
        a1 += s * a0
        a0[...] = new0
    elif kind == "RZ":
        a0 *= c - 1j * s
        a1 *= c + 1j * s
    elif kind == "RX":
        new0 = c * a0 - 1j * s * a1
        a1 *= c
        a1 -= 1j * s * a0
        a0[...] = new0
    else:
        raise ValueError(f"{kind!r} is not a rotation")


def apply_fixed_(psi: np.ndarray, n: int, kind: str, q: int) -> None:
    a0, a1 = _pair_view(psi, n, q)
    if kind == "X":
        tmp = a0.copy()
        a0[...] = a1
        a1[...] = tmp
    elif kind == "H":
        tmp = a0 - a1
        a0 += a1
        a0 *= _SQRT1_2
        a1[...] = tmp * _SQRT1_2
    else:
        raise ValueError(f"{kind!r} is not a fixed single-qubit gate")


def apply_cnot_(psi: np.ndarray, n: int, control: int, target: int) -> None:
    hi, lo = max(control, target), min(control, target)
    v = psi.reshape(psi.shape[0], 1 << (n - hi - 1), 2, 1 << (hi - lo - 1), 2, 1 << lo)

    def index(c_bit, t_bit):
        bits = {control: c_bit, target: t_bit}
        return (slice(None), slice(None), bits[hi], slice(None), bits[lo], slice(None))

    tmp = v[index(1, 0)].copy()
    v[index(1, 0)] = v[index(1, 1)]
    v[index(1, 1)] = tmp


@lru_cache(maxsize=64)
def _cnot_permutation(n: int, pairs: tuple[tuple[int, int], ...]) -> np.ndarray:
    # new[j] = old[f_1(f_2(...f_k(j)))] for the run g_1..g_k applied in order.
    idx = np.arange(1 << n, dtype=np.int64)
    for c, t in reversed(pairs):
        idx = idx ^ (((idx >> c) & 1) << t)
    return idx


def apply_cnot_run_(psi: np.ndarray, n: int, pairs: Sequence[tuple[int, int]]) -> np.ndarray:
    """Apply consecutive CNOTs; returns the (possibly new) array."""
    pairs = tuple(pairs)
    if len(pairs) >= 3 and n <= _PERMUTATION_MAX_QUBITS:
        return np.take(psi, _cnot_permutation(n, pairs), axis=1)
    for c, t in pairs:
        apply_cnot_(psi, n, c, t)
    return psi


def run_gates_(psi: np.ndarray, n: int, gates: Sequence[Gate], angles: Sequence) -> np.ndarray:
    """Apply ``gates`` in order with pre-bound ``angles`` (scalars or batch arrays)."""
    i = 0
    while i < len(gates):
        g = gates[i]
        if g.kind == "CNOT":
            j = i
            while j < len(gates) and gates[j].kind == "CNOT":
                j += 1
            psi = apply_cnot_run_(psi, n, [gates[k].qubits for k in range(i, j)])
            i = j
            continue
        if g.is_rotation:
            apply_rotation_(psi, n, g.kind, g.qubits[0], angles[i])
        else:
            apply_fixed_(psi, n, g.kind, g.qubits[0])
        i += 1
    return psi


def z_expectations(psi: np.ndarray, n: int, q: int) -> np.ndarray:
    """Per-row <Z_q> of a batch."""
    a0, a1 = _pair_view(psi, n, q)
    p0 = (np.abs(a0) ** 2).sum(axis=(1, 2))
    p1 = (np.abs(a1) ** 2).sum(axis=(1, 2))
    return p0 - p1


# ---------------------------------------------------------------------------
# Public, value-semantics API
# ---------------------------------------------------------------------------


def new_zero_state(n: int) -> Statevector:
    _check_register(n)
    amps = np.zeros(1 << n, dtype=np.complex128)
    amps[0] = 1.0
    return Statevector(n, amps)


def _validate_gate(gate: Gate, n: int) -> None:
    for q in gate.qubits:
        if not 0 <= q < n:
            raise QubitIndexError(f"qubit {q} outside {n}-qubit state")


def apply_gate(state: Statevector, gate: Gate, params: Sequence[float] | None = None) -> Statevector:
    """Return ``gate`` applied to ``state``. ``params`` is only needed for slotted rotations."""
    n = state.num_qubits
    _validate_gate(gate, n)
    psi = state.amplitudes.copy()[None, :]
    if gate.kind == "CNOT":
        apply_cnot_(psi, n, *gate.qubits)
    elif gate.is_rotation:
        apply_rotation_(psi, n, gate.kind, gate.qubits[0], gate.bound_angle(params))
    else:
        apply_fixed_(psi, n, gate.kind, gate.qubits[0])
    return Statevector(n, psi[0])


def apply_circuit(state: Statevector, circuit: Circuit, params: Sequence[float] | None = None) -> Statevector:
    if circuit.num_qubits != state.num_qubits:
        raise ArityError(
            f"circuit acts on {circuit.num_qubits} qubits, state has {state.num_qubits}"
        )
    angles = circuit.bound_angles(params)
    n = state.num_qubits
    psi = run_gates_(state.amplitudes.copy()[None, :], n, circuit.gates, angles)
    return Statevector(n, psi[0])


def probabilities(state: Statevector) -> np.ndarray:
    return np.abs(state.amplitudes) ** 2


def expectation_z(state: Statevector, qubit: int) -> float:
    if not 0 <= qubit < state.num_qubits:
        raise QubitIndexError(f"qubit {qubit} outside {state.num_qubits}-qubit state")
    return float(z_expectations(state.amplitudes[None, :], state.num_qubits, qubit)[0])


def sample_indices(probs: np.ndarray, shots: int, rng: np.random.Generator) -> np.ndarray:
    """Inverse-CDF draws of basis indices."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    cdf = np.cumsum(probs)
    cdf /= cdf[-1]
    idx = np.searchsorted(cdf, rng.random(shots), side="right")
    return np.minimum(idx, len(probs) - 1)


def sample_counts(state: Statevector, shots: int, seed: int) -> ShotCounts:
    idx = sample_indices(probabilities(state), shots, substream(seed))
    return counts_from_indices(idx, state.num_qubits)


def basis_state(bits: str | Iterable[int]) -> Statevector:
    """Computational basis state; ``bits`` lists qubit 0 first."""
    bits = "".join(str(int(b)) for b in bits)
    n = len(bits)
    _check_register(n)
    amps = np.zeros(1 << n, dtype=np.complex128)
    amps[bitstring_index(bits)] = 1.0
    return Statevector(n, amps)
