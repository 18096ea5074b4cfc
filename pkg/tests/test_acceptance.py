"""End-to-end acceptance checks, one test per criterion.

Each test prints a PASS/FAIL line; the lines are also collected into an
"acceptance criteria" section at the end of the pytest run. The encoding
benchmark (criterion 3) trains 18 sixteen-qubit models and takes several
minutes; deselect it with ``-m "not slow"``.
"""

import json
import time

import numpy as np
import pytest

from qbias import biaslab, cli, dataio, kernellab, simcore, vqc
from qbias.encode import EncodingSpec
from qbias.errors import FormatError, LengthError

import oracles

N_READOUT = 5
SHOTS = 10_000


def calibrated_noise():
    eps01, eps10 = biaslab.calibrate_per_qubit_rates(0.84, 0.62, N_READOUT)
    return biaslab.ReadoutNoiseModel.uniform(N_READOUT, eps01, eps10)


def readout_fidelity(bit, strategy, seed):
    target = bit * N_READOUT
    counts = biaslab.invert_and_measure(simcore.basis_state(target), calibrated_noise(), SHOTS,
                                        biaslab.MitigationStrategy(strategy), seed)
    return biaslab.fidelity(counts, target)


def test_readout_bias_reproduction(criterion):
    start = time.perf_counter()
    f_zero = readout_fidelity("0", "None", 101)
    f_one = readout_fidelity("1", "None", 102)
    seconds = time.perf_counter() - start
    ok = abs(f_zero - 0.84) <= 0.02 and abs(f_one - 0.62) <= 0.02 and seconds < 10
    criterion(1, "readout bias", ok, f"all-zero {f_zero:.4f}, all-one {f_one:.4f}, {seconds:.2f}s")


def test_invert_and_measure_lift(criterion):
    start = time.perf_counter()
    lifted = readout_fidelity("1", "InvertAll", 103)
    dual_zero = readout_fidelity("0", "DualRunAverage", 104)
    dual_one = readout_fidelity("1", "DualRunAverage", 105)
    seconds = time.perf_counter() - start
    ok = (abs(lifted - 0.84) <= 0.02 and abs(dual_zero - 0.73) <= 0.02
          and abs(dual_one - 0.73) <= 0.02 and seconds < 10)
    criterion(2, "invert-and-measure", ok,
              f"InvertAll all-one {lifted:.4f}, dual all-zero {dual_zero:.4f}, "
              f"dual all-one {dual_one:.4f}, {seconds:.2f}s")


def benchmark_data(seed):
    if dataio.mnist_available():
        return dataio.mnist_split(None, 0, 1, 100, 50, seed, 7), "mnist"
    return dataio.synthetic_digit_split(100, 50, seed, 7), "synthetic digits"


@pytest.mark.slow
def test_encoding_bias_ordering(criterion):
    start = time.perf_counter()
    runs = {"angle": ("angle", False), "basis": ("basis", False), "hybrid-ry": ("hybrid-ry", False),
            "hybrid-rx": ("hybrid-rx", False), "hybrid-rz": ("hybrid-rz", False),
            "hybrid-rz+H": ("hybrid-rz", True)}
    acc = {label: [] for label in runs}
    majority = []
    for seed in range(3):
        (train, test), source = benchmark_data(seed)
        majority.append(max(np.mean(test.labels == 1), np.mean(test.labels == -1)))
        for label, (name, pre) in runs.items():
            spec = EncodingSpec.from_name(name, train.num_features, **({"hadamard_pre": True} if pre else {}))
            model = vqc.Model.create(spec, layers=2, seed=seed)
            report = vqc.train(train, model, vqc.TrainConfig(epochs=20, seed=seed), test=test)
            acc[label].append(report.rows[-1].test_acc)
    seconds = time.perf_counter() - start
    mean = {label: float(np.mean(v)) for label, v in acc.items()}
    chance = float(np.mean(majority))
    checks = {
        "a": mean["angle"] >= 0.90 and mean["hybrid-ry"] >= 0.90,
        "b": mean["basis"] <= mean["angle"] - 0.05,
        "c": acc["hybrid-rz"] == majority,
        "d": mean["hybrid-rz+H"] >= chance + 0.10,
        "runtime": seconds < 30 * 60,
    }
    detail = (f"{source}; mean test accuracy "
              + ", ".join(f"{k} {v:.3f}" for k, v in mean.items())
              + f"; per seed {json.dumps(acc)}; failed {[k for k, v in checks.items() if not v]}; "
              + f"{seconds:.0f}s")
    criterion(3, "encoding bias ordering", all(checks.values()), detail)


def test_gradient_correctness(criterion):
    start = time.perf_counter()
    rng = np.random.default_rng(314)
    names = ["basis", "angle", "hybrid-rx", "hybrid-ry", "hybrid-rz"]
    worst, count = 0.0, 0
    while count < 20:
        n, layers = int(rng.integers(1, 5)), int(rng.integers(0, 3))
        spec = EncodingSpec.from_name(names[count % 5], n,
                                      **({"hadamard_pre": bool(count % 2)} if count % 5 >= 2 else {}))
        model = vqc.Model.create(spec, layers, seed=count)
        if model.params.size == 0:
            continue
        model = model.with_params(rng.uniform(-np.pi, np.pi, model.params.size))
        X, y = rng.random((4, n)), rng.choice([-1, 1], 4)
        grad, _, _ = vqc.parameter_shift_gradient(model, X, y)
        worst = max(worst, float(np.max(np.abs(grad - oracles.finite_difference_gradient(model, X, y, 1e-4)))))
        count += 1
    seconds = time.perf_counter() - start
    criterion(4, "gradient correctness", worst < 1e-5 and seconds < 60,
              f"max |shift - finite difference| {worst:.2e} over 20 models, {seconds:.2f}s")


def test_simulator_oracle_equivalence(criterion):
    start = time.perf_counter()
    rng = np.random.default_rng(2718)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(1, 5))
        circuit = oracles.random_circuit(rng, n, int(rng.integers(1, 30)), simcore.Circuit, simcore)
        got = simcore.apply_circuit(simcore.new_zero_state(n), circuit).amplitudes
        worst = max(worst, float(np.max(np.abs(got - oracles.dense_circuit(circuit)[:, 0]))))
    unitarity = 0.0
    for kind in simcore.GATE_KINDS[:-1]:
        for theta in rng.uniform(-4 * np.pi, 4 * np.pi, 50):
            u = simcore.gate_matrix(kind, theta)
            unitarity = max(unitarity, float(np.max(np.abs(u.conj().T @ u - np.eye(2)))))
    cnot = oracles.dense_gate(simcore.CNOT(0, 1), 2, 0.0)
    unitarity = max(unitarity, float(np.max(np.abs(cnot.conj().T @ cnot - np.eye(4)))))
    seconds = time.perf_counter() - start
    ok = worst < 1e-12 and unitarity < 1e-12 and seconds < 60
    criterion(5, "simulator oracle", ok,
              f"max amplitude error {worst:.1e}, max unitarity error {unitarity:.1e}, {seconds:.2f}s")


def test_kernel_concentration(criterion):
    start = time.perf_counter()
    rows = kernellab.concentration_experiment([2, 4, 8], 50, 5, seed=0)
    law = {r.n_qubits: (0.5 + 2 / np.pi**2) ** r.n_qubits for r in rows}
    within = all(abs(r.mean_offdiag - law[r.n_qubits]) <= 0.3 * law[r.n_qubits] for r in rows)
    decreasing = all(a.mean_offdiag > b.mean_offdiag for a, b in zip(rows, rows[1:]))
    valid = True
    for n in (2, 4, 8):
        for s in range(5):
            X = simcore.substream(0, (n << 16) + s).random((50, n))
            try:
                kernellab.gram_matrix(X, EncodingSpec("angle", n)).check()
            except ValueError:
                valid = False
    seconds = time.perf_counter() - start
    detail = ", ".join(f"n={r.n_qubits}: {r.mean_offdiag:.4f} vs {law[r.n_qubits]:.4f}" for r in rows)
    criterion(6, "kernel concentration", within and decreasing and valid and seconds < 300,
              f"{detail}; Gram checks {'ok' if valid else 'failed'}; {seconds:.2f}s")


def test_sampling_bias_law(criterion):
    start = time.perf_counter()
    plus = simcore.apply_gate(simcore.new_zero_state(1), simcore.H(0))
    rows = biaslab.shot_scaling_experiment(plus, 0, [100, 400, 1600], 200, seed=0)
    law = all(abs(r.std_estimate - np.sqrt(1 / r.shots)) <= 0.2 * np.sqrt(1 / r.shots) for r in rows)
    ratios = [a.std_estimate / b.std_estimate for a, b in zip(rows, rows[1:])]
    ratio_ok = all(abs(q - 2) <= 0.4 for q in ratios)
    seconds = time.perf_counter() - start
    detail = ", ".join(f"S={r.shots}: std {r.std_estimate:.4f}" for r in rows)
    criterion(7, "sampling bias law", law and ratio_ok and seconds < 60,
              f"{detail}; ratios {', '.join(f'{q:.3f}' for q in ratios)}; {seconds:.2f}s")


DETERMINISM_CONFIGS = {
    "encode-bench": {"data_source": "synthetic", "n_train": 8, "n_test": 4, "epochs": 2,
                     "hadamard_pre": ["hybrid-rz"]},
    "readout-bias": {},
    "sampling": {},
    "kernel-concentration": {},
}


def test_cli_determinism(criterion, tmp_path):
    mismatched = []
    for kind, extra in DETERMINISM_CONFIGS.items():
        config = tmp_path / f"{kind}.json"
        config.write_text(json.dumps(dict(extra, kind=kind)))
        out = tmp_path / f"{kind}.csv"
        meta = cli.metadata_path(out)
        snapshots = []
        for _ in range(2):
            code = cli.main([kind, "--config", str(config), "--out", str(out), "--seed", "17"])
            if code != 0:
                mismatched.append(f"{kind} exit {code}")
                break
            snapshots.append((out.read_bytes(), meta.read_bytes()))
        if len(snapshots) == 2 and snapshots[0] != snapshots[1]:
            mismatched.append(kind)
    criterion(8, "determinism", not mismatched,
              "all four experiments byte-identical" if not mismatched else f"differs: {mismatched}")


def test_idx_round_trip(criterion):
    problems = []
    labels = bytes.fromhex("00000801" "00000002" "0702")
    if dataio.parse_idx(labels)[1].tolist() != [7, 2]:
        problems.append("label example")
    image = bytes.fromhex("00000803" "00000001" "00000002" "00000002" "00ff00ff")
    if dataio.parse_idx(image)[1].tolist() != [[[0, 255], [0, 255]]]:
        problems.append("image example")
    rng = np.random.default_rng(9)
    for shape in [(5,), (3, 28, 28), (2, 3, 4, 5), (0,), (1, 1)]:
        a = rng.integers(0, 256, size=shape, dtype=np.uint8)
        got_shape, back = dataio.parse_idx(dataio.to_idx(a))
        if got_shape != shape or not np.array_equal(back, a):
            problems.append(f"round trip {shape}")
    for raw, error in [(bytes.fromhex("00000899" "00000001" "00"), FormatError),
                       (bytes.fromhex("00000801" "00000003" "0702"), LengthError),
                       (image[:-1], LengthError)]:
        try:
            dataio.parse_idx(raw)
            problems.append(f"{raw.hex()} accepted")
        except error:
            pass
    criterion(9, "IDX round trip", not problems, "ok" if not problems else "; ".join(problems))
