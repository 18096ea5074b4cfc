"""Variational quantum classifier: encoding -> RY/CNOT-ring ansatz -> <Z_0>.

Labels are +1/-1, the loss is MSE against <Z> on the readout qubit, and
training uses Adam. Two exact gradients are available:

* ``parameter_shift_gradient`` evaluates the circuit at theta +/- pi/2 for
  every parameterized gate. Cost grows with (#params x #gates).
* ``adjoint_gradient`` gets the same numbers from one forward and one
  backward sweep over a batch and is what ``train`` uses by default.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import batched, simcore
from .dataio import Dataset
from .encode import EncodingSpec, encoding_circuit
from .errors import ArityError, DataError, QubitIndexError
from .simcore import Circuit

SHUFFLE_STREAM = 1
INIT_STREAM = 2
GRADIENTS = ("adjoint", "shift")


def build_ansatz(n_qubits: int, layers: int) -> Circuit:
    """``layers`` x (RY on every qubit, then CNOT(i, i+1 mod n) ring)."""
    if layers < 0:
        raise ValueError("layers must be >= 0")
    gates = []
    for layer in range(layers):
        gates += [simcore.RY(q, slot=layer * n_qubits + q) for q in range(n_qubits)]
        if n_qubits > 1:
            gates += [simcore.CNOT(q, (q + 1) % n_qubits) for q in range(n_qubits)]
    return Circuit(n_qubits, gates, num_params=layers * n_qubits)


@dataclass
class Model:
    encoding: EncodingSpec
    ansatz: Circuit
    params: np.ndarray
    readout_qubit: int = 0
    _plan: "_Plan | None" = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        self.params = np.asarray(self.params, dtype=float)
        expected = self.ansatz.num_params + self.encoding.num_params
        if self.params.shape != (expected,):
            raise ArityError(f"model needs {expected} params, got shape {self.params.shape}")
        if self.ansatz.num_qubits != self.encoding.num_features:
            raise ArityError("ansatz width must equal the number of features")
        if not 0 <= self.readout_qubit < self.num_qubits:
            raise QubitIndexError(f"readout qubit {self.readout_qubit} outside register")

    @classmethod
    def create(cls, encoding: EncodingSpec, layers: int = 2, seed: int = 0,
               init_scale: float = 1.0, readout_qubit: int = 0) -> "Model":
        """Ansatz angles ~ N(0, init_scale^2) from the seed's init substream;
        hybrid weights start at ``encoding.weights`` (ones by default)."""
        ansatz = build_ansatz(encoding.num_features, layers)
        rng = simcore.substream(seed, INIT_STREAM)
        theta = rng.normal(0.0, init_scale, size=ansatz.num_params)
        weights = encoding.weights if encoding.kind == "hybrid" else np.zeros(0)
        return cls(encoding, ansatz, np.concatenate([theta, weights]), readout_qubit)

    @property
    def num_qubits(self) -> int:
        return self.ansatz.num_qubits

    @property
    def encoding_weights(self) -> np.ndarray | None:
        if self.encoding.kind != "hybrid":
            return None
        return self.params[self.ansatz.num_params:]

    def with_params(self, params) -> "Model":
        return Model(self.encoding, self.ansatz, np.array(params, dtype=float), self.readout_qubit)

    def circuit(self, features) -> Circuit:
        """Full circuit for one sample; encoding slots follow the ansatz slots."""
        enc = encoding_circuit(self.encoding, features)
        gates = enc.offset_slots(self.ansatz.num_params) + self.ansatz.gates
        return Circuit(self.num_qubits, gates, self.ansatz.num_params + enc.num_params)

    @property
    def plan(self) -> "_Plan":
        if self._plan is None:
            self._plan = _make_plan(self)
        return self._plan


def _check_features(model: Model, features) -> np.ndarray:
    x = np.asarray(features, dtype=float)
    if x.shape[-1] != model.encoding.num_features:
        raise ArityError(
            f"model expects {model.encoding.num_features} features, got {x.shape[-1]}"
        )
    return x


def predict(model: Model, features) -> float:
    """<Z> on the readout qubit, by plain gate-by-gate simulation."""
    x = _check_features(model, features)
    state = simcore.apply_circuit(simcore.new_zero_state(model.num_qubits), model.circuit(x), model.params)
    return simcore.expectation_z(state, model.readout_qubit)


@dataclass
class _Plan:
    """How the batched engine splits a model's circuit.

    Everything before the first CNOT (encoding plus the first rotation
    layer) stays a product state and is built per qubit. The trailing CNOT
    run is folded into the readout: measuring Z after a permutation equals
    measuring the permuted sign vector before it.
    """

    split: int  # ansatz gates [0, split) join the product-state prefix
    middle: batched.Program  # ansatz gates [split, end)
    zsign: np.ndarray


def _make_plan(model: Model) -> _Plan:
    gates = model.ansatz.gates
    n = model.num_qubits
    split = next((i for i, g in enumerate(gates) if g.kind == "CNOT"), len(gates))
    end = len(gates)
    while end > split and gates[end - 1].kind == "CNOT":
        end -= 1
    zsign = 1.0 - 2.0 * ((np.arange(1 << n) >> model.readout_qubit) & 1)
    if end < len(gates):
        tail = batched.compile_gates(n, gates[end:]).ops[0]
        zsign = zsign[tail.inverse]
    return _Plan(split, batched.compile_gates(n, gates[split:end]), zsign)


def _prefix(model: Model, x: np.ndarray, angles: list[float]):
    """Gates and bound angles of one sample's product-state prefix."""
    enc = encoding_circuit(model.encoding, x)
    split = model.plan.split
    gates = enc.offset_slots(model.ansatz.num_params) + model.ansatz.gates[:split]
    prefix_angles = enc.bound_angles(model.encoding_weights) + angles[:split]
    return gates, prefix_angles


def _forward(model: Model, X: np.ndarray, keep: bool = False):
    """Product-state prefix, then the compiled middle of the ansatz.

    Complex states under a real middle section are carried as stacked real
    rows ``[re; im]``, which a real circuit maps independently.
    """
    n, plan = model.num_qubits, model.plan
    angles = model.ansatz.bound_angles(model.params[: model.ansatz.num_params])
    prefixes = [_prefix(model, x, angles) for x in X]
    psi0 = batched.kron_states(np.stack([batched.qubit_factors(n, g, a) for g, a in prefixes]))
    stacked = np.iscomplexobj(psi0) and plan.middle.is_real
    work = np.concatenate([psi0.real, psi0.imag]) if stacked else psi0
    middle_angles = angles[plan.split:]
    out = batched.run(plan.middle, work, middle_angles, keep=keep)
    return psi0, prefixes, middle_angles, stacked, out


def _readout(model: Model, psi: np.ndarray, stacked: bool) -> np.ndarray:
    z = (np.abs(psi) ** 2) @ model.plan.zsign
    if stacked:
        half = len(z) // 2
        z = z[:half] + z[half:]
    return z


def predict_batch(model: Model, X, chunk: int = 32) -> np.ndarray:
    X = np.atleast_2d(_check_features(model, X))
    preds = []
    for start in range(0, len(X), chunk):
        _, _, _, stacked, psi = _forward(model, X[start:start + chunk])
        preds.append(_readout(model, psi, stacked))
    return np.concatenate(preds) if preds else np.zeros(0)


def mse_loss(predictions, labels) -> float:
    p = np.asarray(predictions, dtype=float)
    y = np.asarray(labels, dtype=float)
    if p.shape != y.shape:
        raise ArityError(f"{p.shape} predictions vs {y.shape} labels")
    return float(np.mean((p - y) ** 2))


def _batch_arrays(model, features, labels):
    X = np.atleast_2d(_check_features(model, features))
    y = np.asarray(labels, dtype=float).ravel()
    if len(X) != len(y):
        raise ArityError(f"{len(X)} samples but {len(y)} labels")
    if len(X) == 0:
        raise DataError("empty batch")
    return X, y


def parameter_shift_gradient(model: Model, features, labels):
    """Gradient of the batch MSE by the two-term shift rule.

    Returns ``(grad, loss, predictions)``. Each slotted rotation is
    re-evaluated at angle +/- pi/2; occurrences contribute
    ``scale * (f+ - f-) / 2`` chained with ``2 (f - y) / B``.
    """
    X, y = _batch_arrays(model, features, labels)
    n, q_out = model.num_qubits, model.readout_qubit
    grad = np.zeros_like(model.params)
    preds = np.empty(len(X))
    for s, x in enumerate(X):
        circuit = model.circuit(x)
        angles = circuit.bound_angles(model.params)
        # prefix[i] is the state before gate i
        psi = simcore.new_zero_state(n).amplitudes[None, :].copy()
        prefix = []
        for g, theta in zip(circuit.gates, angles):
            prefix.append(psi.copy())
            psi = simcore.run_gates_(psi, n, [g], [theta])
        preds[s] = simcore.z_expectations(psi, n, q_out)[0]
        weight = 2.0 * (preds[s] - y[s]) / len(X)
        for pos, g in enumerate(circuit.gates):
            if g.slot is None:
                continue
            shifted = []
            for shift in (np.pi / 2, -np.pi / 2):
                phi = prefix[pos].copy()
                simcore.apply_rotation_(phi, n, g.kind, g.qubits[0], angles[pos] + shift)
                phi = simcore.run_gates_(phi, n, circuit.gates[pos + 1:], angles[pos + 1:])
                shifted.append(simcore.z_expectations(phi, n, q_out)[0])
            grad[g.slot] += weight * g.scale * (shifted[0] - shifted[1]) / 2.0
    return grad, mse_loss(preds, y), preds


def adjoint_gradient(model: Model, features, labels):
    """Same contract as ``parameter_shift_gradient``, by one batched adjoint sweep.

    With lam = dL/d<psi| propagated backwards, a rotation exp(-i t P / 2)
    contributes ``Im <lam|P|psi>`` at its output. Rotations in the
    product-state prefix are read off at the prefix end with their generator
    conjugated by the later gates on the same qubit. On stacked real rows
    the batch-summed transition matrix is Re(R), which is all an RY needs.
    """
    X, y = _batch_arrays(model, features, labels)
    n, plan = model.num_qubits, model.plan
    program = plan.middle
    psi0, prefixes, angles, stacked, (psi, trail) = _forward(model, X, keep=True)
    preds = _readout(model, psi, stacked)
    weights = 2.0 * (preds - y) / len(X)
    row_weights = np.tile(weights, 2) if stacked else weights
    lam = psi * (row_weights[:, None] * plan.zsign[None, :])

    grad = np.zeros_like(model.params)
    for i in reversed(range(len(program.ops))):
        op = program.ops[i]
        if isinstance(op, batched.Layer):
            slotted = [(p, q) for p, q in zip(op.positions, op.qubits)
                       if program.gates[p].slot is not None]
            if slotted:
                r = batched.reduced_transitions(lam, trail[i], n, [q for _, q in slotted])
                for p, q in slotted:
                    g = program.gates[p]
                    grad[g.slot] += g.scale * batched.rotation_gradient(r[q], simcore.PAULI[g.kind])
        lam = batched.apply_op(program, op, lam, angles, inverse=True)

    if stacked:
        lam = lam[: len(X)] + 1j * lam[len(X):]
    r = batched.reduced_transitions(lam, psi0, n, range(n), per_sample=True)
    for s, (gates, prefix_angles) in enumerate(prefixes):
        for pos, gen in batched.local_generators(gates, prefix_angles).items():
            g = gates[pos]
            if g.slot is not None:
                grad[g.slot] += g.scale * batched.rotation_gradient(r[g.qubits[0]][s], gen)
    return grad, mse_loss(preds, y), preds


def evaluate(model: Model, dataset: Dataset) -> float:
    """Fraction of samples with sign(prediction) == label; sign(0) is +1."""
    if len(dataset) == 0:
        raise DataError("cannot evaluate on an empty dataset")
    preds = predict_batch(model, dataset.features)
    return float(np.mean(np.where(preds >= 0, 1, -1) == dataset.labels))


class Adam:
    def __init__(self, lr: float = 0.01, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = None
        self.v = None
        self.t = 0

    def step(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
        if self.m is None:
            self.m = np.zeros_like(params)
            self.v = np.zeros_like(params)
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        m_hat = self.m / (1 - self.beta1 ** self.t)
        v_hat = self.v / (1 - self.beta2 ** self.t)
        return params - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


@dataclass
class TrainConfig:
    epochs: int = 20
    batch_size: int = 16
    learning_rate: float = 0.01
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    layers: int = 2
    gradient: str = "adjoint"

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not self.learning_rate >= 0:
            raise ValueError("learning_rate must be >= 0")
        if self.gradient not in GRADIENTS:
            raise ValueError(f"gradient must be one of {GRADIENTS}")


@dataclass
class EpochRow:
    epoch: int
    train_loss: float
    train_acc: float
    test_acc: float


@dataclass
class TrainReport:
    rows: list[EpochRow]
    params: np.ndarray
    config: dict
    seconds: float = field(default=0.0, compare=False)

    def __eq__(self, other):
        if not isinstance(other, TrainReport):
            return NotImplemented
        return (self.rows == other.rows and self.config == other.config
                and np.array_equal(self.params, other.params))


def train(dataset: Dataset, model: Model, config: TrainConfig, test: Dataset | None = None,
          log=None) -> TrainReport:
    """Adam over shuffled mini-batches. ``test`` defaults to the training set.

    The input model is not modified; the trained parameters are in the report.
    """
    if len(dataset) == 0:
        raise DataError("cannot train on an empty dataset")
    test = dataset if test is None else test
    grad_fn = adjoint_gradient if config.gradient == "adjoint" else parameter_shift_gradient
    start = time.perf_counter()
    rng = simcore.substream(config.seed, SHUFFLE_STREAM)
    opt = Adam(config.learning_rate, config.adam_beta1, config.adam_beta2, config.adam_eps)
    current = model.with_params(model.params)
    m = len(dataset)
    rows = []
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(m)
        total = 0.0
        for lo in range(0, m, config.batch_size):
            idx = order[lo:lo + config.batch_size]
            grad, loss, _ = grad_fn(current, dataset.features[idx], dataset.labels[idx])
            total += loss * len(idx)
            current.params = opt.step(current.params, grad)
        row = EpochRow(epoch, total / m, evaluate(current, dataset), evaluate(current, test))
        rows.append(row)
        if log is not None:
            log(row)
    return TrainReport(rows, current.params.copy(), asdict(config), time.perf_counter() - start)
