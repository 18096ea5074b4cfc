"""Batched execution of fixed-structure circuits.

A gate list is compiled into two kinds of operations:

* ``Layer`` - consecutive single-qubit gates on distinct qubits. Applied as a
  tensor product, four bits at a time, through one matmul per block.
* ``Permutation`` - a run of consecutive CNOTs, applied as one gather.

States are arrays of shape ``(batch, 2**n)``. Complex states hit by real
layers are processed through a float view whose lowest bit is the
real/imaginary part, so real ansatz layers never pay for complex matmuls.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Sequence, Union

import numpy as np

from .simcore import PAULI, Gate, gate_matrix

BLOCK_BITS = 4
_I2 = np.eye(2)


@dataclass
class Layer:
    positions: list[int]  # gate indices into the program's gate list
    qubits: list[int]


@dataclass
class Permutation:
    pairs: tuple[tuple[int, int], ...]
    forward: np.ndarray
    inverse: np.ndarray


Op = Union[Layer, Permutation]


@dataclass
class Program:
    num_qubits: int
    gates: list[Gate]
    ops: list[Op]

    @property
    def is_real(self) -> bool:
        return all(g.kind in ("X", "H", "RY", "CNOT") for g in self.gates)


def _permutation(n: int, pairs) -> np.ndarray:
    idx = np.arange(1 << n, dtype=np.int64)
    for c, t in reversed(pairs):
        idx = idx ^ (((idx >> c) & 1) << t)
    return idx


def compile_gates(n: int, gates: Sequence[Gate]) -> Program:
    ops: list[Op] = []
    run: list[tuple[int, int]] = []
    layer: Layer | None = None

    def flush_run():
        nonlocal run
        if run:
            fwd = _permutation(n, run)
            inv = np.empty_like(fwd)
            inv[fwd] = np.arange(fwd.size)
            ops.append(Permutation(tuple(run), fwd, inv))
            run = []

    for pos, g in enumerate(gates):
        if g.kind == "CNOT":
            layer = None
            run.append(g.qubits)
            continue
        flush_run()
        q = g.qubits[0]
        if layer is None or q in layer.qubits:
            layer = Layer([], [])
            ops.append(layer)
        layer.positions.append(pos)
        layer.qubits.append(q)
    flush_run()
    return Program(n, list(gates), ops)


def layer_matrices(program: Program, layer: Layer, angles) -> dict[int, np.ndarray]:
    return {
        q: gate_matrix(program.gates[p].kind, angles[p])
        for p, q in zip(layer.positions, layer.qubits)
    }


def _is_real(m: np.ndarray) -> bool:
    return not np.iscomplexobj(m) or not np.any(m.imag)


def _apply_blocks(arr: np.ndarray, nbits: int, mats: dict[int, np.ndarray]) -> np.ndarray:
    """Apply per-bit 2x2 matrices (bit -> matrix) to ``arr`` of shape (B, 2**nbits)."""
    batch = arr.shape[0]
    for j in range(0, nbits, BLOCK_BITS):
        k = min(BLOCK_BITS, nbits - j)
        bits = range(j, j + k)
        if not any(b in mats for b in bits):
            continue
        m = reduce(np.kron, [mats.get(b, _I2) for b in reversed(bits)])
        if j == 0:
            arr = (arr.reshape(-1, 1 << k) @ m.T).reshape(batch, -1)
        else:
            v = arr.reshape(batch, 1 << (nbits - j - k), 1 << k, 1 << j)
            arr = np.matmul(m, v).reshape(batch, -1)
    return arr


def apply_layer(psi: np.ndarray, n: int, mats: dict[int, np.ndarray]) -> np.ndarray:
    """Return ``psi`` after the tensor product of ``mats`` (qubit -> 2x2)."""
    real_mats = all(_is_real(m) for m in mats.values())
    if real_mats:
        mats = {q: np.real(m) for q, m in mats.items()}
    if np.iscomplexobj(psi) and real_mats:
        flat = np.ascontiguousarray(psi).view(np.float64).reshape(psi.shape[0], -1)
        shifted = {q + 1: m for q, m in mats.items()}
        out = _apply_blocks(flat, n + 1, shifted)
        return np.ascontiguousarray(out).view(np.complex128).reshape(psi.shape)
    if not real_mats and not np.iscomplexobj(psi):
        psi = psi.astype(np.complex128)
    return _apply_blocks(psi, n, mats)


def apply_op(program: Program, op: Op, psi: np.ndarray, angles, inverse: bool = False) -> np.ndarray:
    n = program.num_qubits
    if isinstance(op, Permutation):
        return np.take(psi, op.inverse if inverse else op.forward, axis=1)
    mats = layer_matrices(program, op, angles)
    if inverse:
        mats = {q: m.conj().T for q, m in mats.items()}
    return apply_layer(psi, n, mats)


def run(program: Program, psi: np.ndarray, angles, keep: bool = False):
    """Forward pass. With ``keep``, also return the state after every op."""
    trail = []
    for op in program.ops:
        psi = apply_op(program, op, psi, angles)
        if keep:
            trail.append(psi)
    return (psi, trail) if keep else psi


def _conj(a: np.ndarray) -> np.ndarray:
    return a.conj() if np.iscomplexobj(a) else a


def reduced_transitions(
    lam: np.ndarray, psi: np.ndarray, n: int, qubits: Sequence[int], per_sample: bool = False
) -> dict[int, np.ndarray]:
    """Per-qubit ``R[a, b] = sum_rest conj(lam[a, rest]) * psi[b, rest]``.

    Summed over the batch unless ``per_sample``, in which case each value has
    shape (B, 2, 2). For a one-qubit operator A, ``<lam|A_q|psi> = sum(A * R_q)``.
    """
    batch = psi.shape[0]
    wanted = set(qubits)
    out = {}
    for j in range(0, n, BLOCK_BITS):
        k = min(BLOCK_BITS, n - j)
        inside = [q for q in range(j, j + k) if q in wanted]
        if not inside:
            continue
        if j == 0:
            lv = lam.reshape(batch, -1, 1 << k)
            pv = psi.reshape(batch, -1, 1 << k)
            t = np.matmul(_conj(lv).transpose(0, 2, 1), pv)  # (B, 2^k, 2^k)
        else:
            lv = lam.reshape(batch, -1, 1 << k, 1 << j)
            pv = psi.reshape(batch, -1, 1 << k, 1 << j)
            t = np.matmul(_conj(lv), pv.transpose(0, 1, 3, 2)).sum(axis=1)
        if not per_sample:
            t = t.sum(axis=0)
        lead = t.shape[:-2]
        for q in inside:
            i = q - j
            hi, lo = 1 << (k - i - 1), 1 << i
            t6 = t.reshape(*lead, hi, 2, lo, hi, 2, lo)
            out[q] = np.einsum("...xayxby->...ab", t6)
    return out


def rotation_gradient(r: np.ndarray, generator: np.ndarray) -> np.ndarray:
    """``Im <lam|P|psi>`` from a reduced transition matrix (or a stack of them)."""
    return np.imag(np.sum(generator * r, axis=(-2, -1)))


def qubit_factors(n: int, gates: Sequence[Gate], angles: Sequence[float]) -> np.ndarray:
    """Per-qubit states (n, 2) produced by a CNOT-free gate list on |0..0>.

    Each factor is de-phased so its largest component is real and positive;
    this only changes the global phase of the product state.
    """
    vecs = np.zeros((n, 2), dtype=np.complex128)
    vecs[:, 0] = 1.0
    for g, theta in zip(gates, angles):
        if g.kind == "CNOT":
            raise ValueError("qubit_factors needs a CNOT-free gate list")
        q = g.qubits[0]
        vecs[q] = gate_matrix(g.kind, theta) @ vecs[q]
    lead = vecs[np.arange(n), np.abs(vecs).argmax(axis=1)]
    return vecs * (np.abs(lead) / lead)[:, None]


def kron_states(factors: np.ndarray) -> np.ndarray:
    """Product states from factors of shape (B, n, 2); real when possible."""
    if np.max(np.abs(factors.imag)) < 1e-14:
        factors = factors.real
    batch, n = factors.shape[:2]
    state = factors[:, 0]
    for q in range(1, n):
        state = (factors[:, q, :, None] * state[:, None, :]).reshape(batch, -1)
    return np.ascontiguousarray(state)


def local_generators(gates: Sequence[Gate], angles: Sequence[float]) -> dict[int, np.ndarray]:
    """For a CNOT-free gate list, map rotation position -> ``V P V^dagger``

    where V is the product of later gates on the same qubit, so the
    rotation's gradient can be read off at the end of the list.
    """
    later: dict[int, np.ndarray] = {}
    out = {}
    for pos in range(len(gates) - 1, -1, -1):
        g = gates[pos]
        q = g.qubits[0]
        v = later.get(q)
        if g.is_rotation:
            p = PAULI[g.kind]
            out[pos] = p if v is None else v @ p @ v.conj().T
        m = gate_matrix(g.kind, angles[pos])
        later[q] = m if v is None else v @ m
    return out
