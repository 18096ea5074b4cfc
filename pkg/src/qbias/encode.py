"""Classical feature vectors to encoding circuits, one qubit per feature.

Three families are provided:

* basis  - X on qubit i iff feature i >= threshold;
* angle  - RY(pi * x_i) on qubit i;
* hybrid - optional H on every qubit, then R_axis(pi * w_i * x_i) where the
  weights w are trainable parameter slots (slot i, scale pi * x_i).

The hybrid form is one reading of a "parameterized" encoding. With axis Z
and no Hadamard it only adds phases to |0...0>, so the encoded
probabilities do not depend on the data at all.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import simcore
from .errors import ArityError, DomainError, RangeError
from .simcore import Circuit, Statevector

ENCODING_NAMES = ("basis", "angle", "hybrid-rx", "hybrid-ry", "hybrid-rz")
AXES = ("X", "Y", "Z")
_ROTATION = {"X": simcore.RX, "Y": simcore.RY, "Z": simcore.RZ}


@dataclass
class EncodingSpec:
    kind: str  # "basis" | "angle" | "hybrid"
    num_features: int
    threshold: float = 0.5
    axis: str = "Y"
    weights: np.ndarray | None = field(default=None)
    hadamard_pre: bool = False

    def __post_init__(self):
        if self.kind not in ("basis", "angle", "hybrid"):
            raise ValueError(f"unknown encoding kind {self.kind!r}")
        if self.num_features < 1:
            raise ArityError("need at least one feature")
        if self.kind == "basis" and not 0.0 < self.threshold < 1.0:
            raise RangeError(f"basis threshold must lie in (0, 1), got {self.threshold}")
        if self.kind == "hybrid":
            if self.axis not in AXES:
                raise ValueError(f"axis must be one of {AXES}, got {self.axis!r}")
            if self.weights is None:
                self.weights = np.ones(self.num_features)
            self.weights = np.asarray(self.weights, dtype=float)
            if self.weights.shape != (self.num_features,):
                raise ArityError(
                    f"{self.num_features} features but {self.weights.shape} weights"
                )

    @classmethod
    def from_name(cls, name: str, num_features: int, **kwargs) -> "EncodingSpec":
        """Build from one of ``ENCODING_NAMES``."""
        if name not in ENCODING_NAMES:
            raise ValueError(f"unknown encoding {name!r}; expected one of {ENCODING_NAMES}")
        if name.startswith("hybrid-"):
            return cls("hybrid", num_features, axis=name[-1].upper(), **kwargs)
        return cls(name, num_features, **kwargs)

    @property
    def name(self) -> str:
        return f"hybrid-r{self.axis.lower()}" if self.kind == "hybrid" else self.kind

    @property
    def num_params(self) -> int:
        """Trainable encoding parameters (hybrid weights)."""
        return self.num_features if self.kind == "hybrid" else 0


def normalize_features(raw, lo: float, hi: float) -> np.ndarray:
    if not hi > lo:
        raise RangeError(f"need hi > lo, got lo={lo}, hi={hi}")
    raw = np.asarray(raw, dtype=float)
    return np.clip((raw - lo) / (hi - lo), 0.0, 1.0)


def _features(features) -> np.ndarray:
    x = np.asarray(features, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise ArityError(f"expected a non-empty feature vector, got shape {x.shape}")
    return x


def encode_basis(features, threshold: float = 0.5) -> Circuit:
    x = _features(features)
    # inclusive: a feature exactly at the threshold reads as 1
    return Circuit(x.size, [simcore.X(i) for i in range(x.size) if x[i] >= threshold])


def encode_angle(features) -> Circuit:
    x = _features(features)
    if np.any((x < 0) | (x > 1)):
        raise DomainError("angle encoding expects features in [0, 1]")
    return Circuit(x.size, [simcore.RY(i, np.pi * x[i]) for i in range(x.size)])


def encode_hybrid(features, weights, axis: str = "Y", hadamard_pre: bool = False) -> Circuit:
    """Hybrid encoding circuit. Bind ``weights`` as the circuit parameters."""
    x = _features(features)
    w = np.asarray(weights, dtype=float)
    if w.shape != x.shape:
        raise ArityError(f"{x.size} features but {w.size} weights")
    if axis not in AXES:
        raise ValueError(f"axis must be one of {AXES}, got {axis!r}")
    rot = _ROTATION[axis]
    gates = [simcore.H(i) for i in range(x.size)] if hadamard_pre else []
    gates += [rot(i, slot=i, scale=np.pi * x[i]) for i in range(x.size)]
    return Circuit(x.size, gates, num_params=x.size)


def encoding_circuit(spec: EncodingSpec, features) -> Circuit:
    x = _features(features)
    if x.size != spec.num_features:
        raise ArityError(f"encoding expects {spec.num_features} features, got {x.size}")
    if spec.kind == "basis":
        return encode_basis(x, spec.threshold)
    if spec.kind == "angle":
        return encode_angle(x)
    return encode_hybrid(x, spec.weights, spec.axis, spec.hadamard_pre)


def encoded_state(spec: EncodingSpec, features, weights=None) -> Statevector:
    """|phi(x)>; hybrid encodings use ``weights`` or else ``spec.weights``."""
    circuit = encoding_circuit(spec, features)
    params = None
    if spec.kind == "hybrid":
        params = spec.weights if weights is None else weights
    return simcore.apply_circuit(simcore.new_zero_state(spec.num_features), circuit, params)
