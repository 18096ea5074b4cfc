"""Readout bias, Invert-And-Measure mitigation and shot-noise scaling.

Readout noise is classical and i.i.d. per qubit per shot: a true 0 reads as
1 with probability eps01, a true 1 reads as 0 with probability eps10. With
eps10 > eps01 (relaxation toward |0>) the all-one state is read back worse
than the all-zero state. Invert-And-Measure applies X before measurement so
the fragile 1s are physically measured as 0s, then flips the bits back.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import simcore
from .errors import ArityError, DomainError, RangeError
from .simcore import ShotCounts, Statevector

STRATEGIES = ("None", "InvertAll", "InvertMask", "DualRunAverage")
# Readout flips draw from substream(seed, FLIP_STREAM); the ideal draw uses
# substream(seed) exactly as sample_counts does.
FLIP_STREAM = 1 << 40


@dataclass(frozen=True)
class ReadoutNoiseModel:
    eps01: tuple[float, ...]  # P(read 1 | true 0), per qubit
    eps10: tuple[float, ...]  # P(read 0 | true 1), per qubit

    def __post_init__(self):
        object.__setattr__(self, "eps01", tuple(float(e) for e in self.eps01))
        object.__setattr__(self, "eps10", tuple(float(e) for e in self.eps10))
        if len(self.eps01) != len(self.eps10) or not self.eps01:
            raise ArityError("eps01 and eps10 need one entry per qubit")
        for e in self.eps01 + self.eps10:
            if not 0.0 <= e <= 1.0:
                raise RangeError(f"readout error rate {e} outside [0, 1]")

    @classmethod
    def uniform(cls, num_qubits: int, eps01: float, eps10: float) -> "ReadoutNoiseModel":
        return cls((eps01,) * num_qubits, (eps10,) * num_qubits)

    @classmethod
    def noiseless(cls, num_qubits: int) -> "ReadoutNoiseModel":
        return cls.uniform(num_qubits, 0.0, 0.0)

    @property
    def num_qubits(self) -> int:
        return len(self.eps01)


@dataclass(frozen=True)
class MitigationStrategy:
    kind: str = "None"
    mask: tuple[bool, ...] | None = None  # qubit 0 first; InvertMask only

    def __post_init__(self):
        if self.kind not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.kind!r}; expected one of {STRATEGIES}")
        if self.kind == "InvertMask":
            if self.mask is None:
                raise ArityError("InvertMask needs a mask")
            mask = self.mask
            if isinstance(mask, str):
                if set(mask) - {"0", "1"}:
                    raise ValueError(f"bad mask {mask!r}")
                mask = [c == "1" for c in mask]
            object.__setattr__(self, "mask", tuple(bool(b) for b in mask))
        elif self.mask is not None:
            raise ValueError(f"{self.kind} takes no mask")

    @classmethod
    def invert_mask(cls, mask) -> "MitigationStrategy":
        return cls("InvertMask", mask)

    def inversion(self, num_qubits: int) -> int:
        """Bitmask of inverted qubits for the single-run strategies."""
        if self.kind == "None":
            return 0
        if self.kind == "InvertMask":
            if len(self.mask) != num_qubits:
                raise ArityError(f"mask has {len(self.mask)} entries for {num_qubits} qubits")
            return sum(1 << q for q, b in enumerate(self.mask) if b)
        return (1 << num_qubits) - 1


def _check_noise(noise: ReadoutNoiseModel, n: int) -> None:
    if noise.num_qubits != n:
        raise ArityError(f"noise model covers {noise.num_qubits} qubits, state has {n}")


def _noisy_sample(state: Statevector, shots: int, noise: ReadoutNoiseModel, seed: int,
                  inversion: np.ndarray) -> ShotCounts:
    """Measure ``state`` with per-shot X masks ``inversion`` under readout noise.

    The physical state of shot s is X^inversion[s] |state>. Its outcome is
    drawn with the shot's uniform number against the CDF taken in logical
    order, so without noise the result matches sample_counts exactly.
    """
    n = state.num_qubits
    _check_noise(noise, n)
    probs = simcore.probabilities(state)
    logical = simcore.sample_indices(probs, shots, simcore.substream(seed))
    physical = logical ^ inversion
    bits = (physical[:, None] >> np.arange(n)) & 1
    u = simcore.substream(seed, FLIP_STREAM).random((shots, n))
    flip = np.where(bits == 1, u < np.array(noise.eps10), u < np.array(noise.eps01))
    read = physical ^ (flip.astype(np.int64) << np.arange(n)).sum(axis=1)
    return simcore.counts_from_indices(read ^ inversion, n)


def sample_with_noise(state: Statevector, shots: int, noise: ReadoutNoiseModel,
                      seed: int) -> ShotCounts:
    return _noisy_sample(state, shots, noise, seed, np.zeros(shots, dtype=np.int64))


def invert_and_measure(state: Statevector, noise: ReadoutNoiseModel, shots: int,
                       strategy: MitigationStrategy, seed: int) -> ShotCounts:
    """Counts in the original frame after measuring with the chosen inversions.

    DualRunAverage runs the first ``shots // 2`` shots unmitigated and the
    rest with every qubit inverted, pooling both halves.
    """
    n = state.num_qubits
    if strategy.kind == "DualRunAverage":
        inversion = np.zeros(shots, dtype=np.int64)
        inversion[shots // 2:] = (1 << n) - 1
    else:
        inversion = np.full(shots, strategy.inversion(n), dtype=np.int64)
    return _noisy_sample(state, shots, noise, seed, inversion)


def fidelity(counts: ShotCounts, target: str) -> float:
    if len(target) != counts.num_qubits:
        raise ArityError(f"target {target!r} has length {len(target)}, counts have {counts.num_qubits} qubits")
    return counts.get(target) / counts.shots


def calibrate_per_qubit_rates(f_zero: float, f_one: float, n: int) -> tuple[float, float]:
    """i.i.d. per-qubit rates reproducing all-zero / all-one fidelities on n qubits."""
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    for f in (f_zero, f_one):
        if not 0.0 < f <= 1.0:
            raise DomainError(f"fidelity {f} outside (0, 1]")
    return 1.0 - f_zero ** (1.0 / n), 1.0 - f_one ** (1.0 / n)


@dataclass
class ShotRow:
    shots: int
    mean_estimate: float
    std_estimate: float
    exact: float


def shot_scaling_experiment(state: Statevector, qubit: int, shot_list, repeats: int,
                            seed: int) -> list[ShotRow]:
    """Spread of the finite-shot <Z> estimator for each shot budget.

    Budget i, repeat r samples with seed ``seed + 1 + i * repeats + r``; the
    std uses ddof=1.
    """
    if repeats < 2:
        raise ValueError("repeats must be >= 2")
    exact = simcore.expectation_z(state, qubit)
    rows = []
    for i, shots in enumerate(shot_list):
        estimates = [
            simcore.sample_counts(state, shots, seed + 1 + i * repeats + r).z_estimate(qubit)
            for r in range(repeats)
        ]
        rows.append(ShotRow(int(shots), float(np.mean(estimates)),
                            float(np.std(estimates, ddof=1)), exact))
    return rows
