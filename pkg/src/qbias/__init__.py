"""Quantum machine learning bias laboratory on a statevector simulator."""

from .biaslab import (
    MitigationStrategy,
    ReadoutNoiseModel,
    calibrate_per_qubit_rates,
    fidelity,
    invert_and_measure,
    sample_with_noise,
    shot_scaling_experiment,
)
from .dataio import Dataset, avg_pool, load_idx, make_binary_subset, synthetic_digits, synthetic_gaussians
from .encode import EncodingSpec, encode_angle, encode_basis, encode_hybrid, encoding_circuit
from .kernellab import GramMatrix, concentration_experiment, dominant_eigenvalue, gram_matrix, kernel_value
from .simcore import (
    Circuit,
    Gate,
    ShotCounts,
    Statevector,
    apply_circuit,
    apply_gate,
    expectation_z,
    new_zero_state,
    probabilities,
    sample_counts,
)
from .vqc import Model, TrainConfig, TrainReport, build_ansatz, evaluate, parameter_shift_gradient, predict, train

__version__ = "0.1.0"
