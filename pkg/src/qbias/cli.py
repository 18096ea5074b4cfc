"""Command-line experiment runner.

Each subcommand runs one experiment and writes a CSV plus a sibling
``<stem>.meta.json`` holding the full resolved configuration. Outputs contain
no timestamps, so the same configuration and seed give byte-identical files.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 capacity error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import biaslab, dataio, kernellab, simcore, vqc
from .encode import ENCODING_NAMES, EncodingSpec
from .errors import CapacityError, ConfigError, DataError

log = logging.getLogger("qbias")

KINDS = ("encode-bench", "readout-bias", "sampling", "kernel-concentration")
SOURCES = ("mnist", "synthetic")
HEADERS = {
    "encode-bench": ("encoding", "epoch", "train_loss", "train_acc", "test_acc", "seed"),
    "readout-bias": ("state", "strategy", "shots", "fidelity"),
    "sampling": ("shots", "mean_estimate", "std_estimate", "exact"),
    "kernel-concentration": ("n_qubits", "m", "mean_offdiag", "lambda_max"),
}
READOUT_STRATEGIES = ("None", "InvertAll", "DualRunAverage")
EXIT_CONFIG, EXIT_DATA, EXIT_CAPACITY = 2, 3, 4


@dataclass
class ExperimentConfig:
    kind: str = "encode-bench"
    seed: int = 0
    out: str | None = None
    # data
    data_source: str = "mnist"
    data_dir: str | None = None
    class_a: int = 0
    class_b: int = 1
    n_train: int = 100
    n_test: int = 50
    block: int = 7
    # encode-bench
    encodings: list[str] = field(default_factory=lambda: list(ENCODING_NAMES))
    hadamard_pre: list[str] = field(default_factory=list)
    bench_seeds: int = 1
    epochs: int = 20
    batch_size: int = 16
    learning_rate: float = 0.01
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    layers: int = 2
    init_scale: float = 1.0
    gradient: str = "adjoint"
    # readout-bias
    f_zero: float = 0.84
    f_one: float = 0.62
    n_qubits: int = 5
    readout_shots: int = 10_000
    # sampling
    shot_list: list[int] = field(default_factory=lambda: [100, 400, 1600])
    repeats: int = 200
    sampling_qubits: int = 1
    # kernel-concentration
    n_list: list[int] = field(default_factory=lambda: [2, 4, 8])
    m: int = 50
    kernel_seeds: int = 5

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment {self.kind!r}; expected one of {KINDS}")
        if self.data_source not in SOURCES:
            raise ConfigError(f"data_source must be one of {SOURCES}")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        for name in self.encodings + self.hadamard_pre:
            if name not in ENCODING_NAMES:
                raise ConfigError(f"unknown encoding {name!r}; expected one of {ENCODING_NAMES}")
        for name in self.hadamard_pre:
            if not name.startswith("hybrid-"):
                raise ConfigError(f"hadamard_pre applies to hybrid encodings only, got {name!r}")
        positive = ("n_train", "n_test", "block", "bench_seeds", "batch_size", "epochs",
                    "n_qubits", "readout_shots", "sampling_qubits", "kernel_seeds")
        for name in positive:
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.repeats < 2:
            raise ConfigError("repeats must be >= 2")
        if self.layers < 0 or self.init_scale < 0 or not self.learning_rate >= 0:
            raise ConfigError("layers, init_scale and learning_rate must be non-negative")
        if self.gradient not in vqc.GRADIENTS:
            raise ConfigError(f"gradient must be one of {vqc.GRADIENTS}")
        if any(s < 1 for s in self.shot_list) or not self.shot_list:
            raise ConfigError("shot_list needs positive shot counts")
        if not self.n_list:
            raise ConfigError("n_list must not be empty")
        for f in (self.f_zero, self.f_one):
            if not 0.0 < f <= 1.0:
                raise ConfigError(f"fidelity {f} outside (0, 1]")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data)

    def train_config(self, seed: int) -> vqc.TrainConfig:
        return vqc.TrainConfig(
            epochs=self.epochs, batch_size=self.batch_size, learning_rate=self.learning_rate,
            adam_beta1=self.adam_beta1, adam_beta2=self.adam_beta2, adam_eps=self.adam_eps,
            seed=seed, layers=self.layers, gradient=self.gradient,
        )


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _csv(header, rows) -> str:
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def metadata_path(out: Path) -> Path:
    return out.with_name(out.stem + ".meta.json")


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------


def _load_split(config: ExperimentConfig, seed: int):
    if config.data_source == "synthetic":
        if (config.class_a, config.class_b) not in ((0, 1), (1, 0)):
            raise ConfigError("synthetic digits exist for classes 0 and 1 only")
        train, test = dataio.synthetic_digit_split(config.n_train, config.n_test, seed, config.block)
        if config.class_a == 1:
            train = dataio.Dataset(train.features, -train.labels, train.provenance + ", labels swapped")
            test = dataio.Dataset(test.features, -test.labels, test.provenance + ", labels swapped")
        return train, test
    data_dir = config.data_dir or os.environ.get(dataio.DATA_DIR_ENV)
    if not data_dir:
        raise DataError(f"no MNIST directory: pass --data-dir, set ${dataio.DATA_DIR_ENV}, or use --synthetic")
    return dataio.mnist_split(data_dir, config.class_a, config.class_b,
                              config.n_train, config.n_test, seed, config.block)


def run_encode_bench(config: ExperimentConfig):
    rows, provenance = [], []
    runs = [(name, False) for name in config.encodings]
    runs += [(name, True) for name in config.hadamard_pre]
    for k in range(config.bench_seeds):
        seed = (config.seed + k) % 2**64
        train, test = _load_split(config, seed)
        provenance += [train.provenance, test.provenance]
        for name, pre in runs:
            kwargs = {"hadamard_pre": True} if pre else {}
            spec = EncodingSpec.from_name(name, train.num_features, **kwargs)
            if spec.num_features > simcore.MAX_QUBITS:
                raise CapacityError(f"{spec.num_features} features exceed {simcore.MAX_QUBITS} qubits")
            model = vqc.Model.create(spec, config.layers, seed=seed, init_scale=config.init_scale)
            label = name + ("+H" if pre else "")
            report = vqc.train(train, model, config.train_config(seed), test=test)
            log.info("%s seed %d: final test accuracy %.3f", label, seed, report.rows[-1].test_acc)
            rows += [(label, r.epoch, r.train_loss, r.train_acc, r.test_acc, seed) for r in report.rows]
    return rows, {"datasets": provenance}


def run_readout_experiment(config: ExperimentConfig):
    n = config.n_qubits
    if n > simcore.MAX_QUBITS:
        raise CapacityError(f"{n} qubits exceed {simcore.MAX_QUBITS}")
    eps01, eps10 = biaslab.calibrate_per_qubit_rates(config.f_zero, config.f_one, n)
    noise = biaslab.ReadoutNoiseModel.uniform(n, eps01, eps10)
    rows, stream = [], 0
    for label, bit in (("all-zero", "0"), ("all-one", "1")):
        state = simcore.basis_state(bit * n)
        for strategy in READOUT_STRATEGIES:
            stream += 1
            counts = biaslab.invert_and_measure(state, noise, config.readout_shots,
                                                biaslab.MitigationStrategy(strategy),
                                                (config.seed + stream) % 2**64)
            rows.append((label, strategy, config.readout_shots, biaslab.fidelity(counts, bit * n)))
    return rows, {"eps01": eps01, "eps10": eps10}


def run_sampling_experiment(config: ExperimentConfig):
    n = config.sampling_qubits
    state = simcore.new_zero_state(n)
    for q in range(n):
        state = simcore.apply_gate(state, simcore.H(q))
    result = biaslab.shot_scaling_experiment(state, 0, config.shot_list, config.repeats, config.seed)
    rows = [(r.shots, r.mean_estimate, r.std_estimate, r.exact) for r in result]
    return rows, {"state": f"H on each of {n} qubits applied to |0...0>", "readout_qubit": 0}


def run_kernel_experiment(config: ExperimentConfig):
    result = kernellab.concentration_experiment(config.n_list, config.m, config.kernel_seeds,
                                                config.seed)
    rows = [(r.n_qubits, r.m, r.mean_offdiag, r.lambda_max) for r in result]
    return rows, {"seeds_per_row": config.kernel_seeds, "encoding": "angle",
                  "data": "uniform on [0, 1]^n"}


RUNNERS = {
    "encode-bench": run_encode_bench,
    "readout-bias": run_readout_experiment,
    "sampling": run_sampling_experiment,
    "kernel-concentration": run_kernel_experiment,
}


def run(config: ExperimentConfig) -> Path:
    """Run ``config`` and write its CSV and metadata; return the CSV path."""
    out = Path(config.out or f"{config.kind}.csv")
    rows, extra = RUNNERS[config.kind](config)
    meta = {
        "config": config.to_dict(),
        "csv": out.name,
        "details": extra,
        "conventions": {
            "bit_order": "qubit 0 is the least significant index bit; bitstrings list qubit 0 first",
            "rng": "numpy PCG64 seeded with (seed + stream) mod 2**64",
        },
    }
    write_atomic(out, _csv(HEADERS[config.kind], rows))
    write_atomic(metadata_path(out), json.dumps(meta, indent=2, sort_keys=True, default=float) + "\n")
    return out


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qbias", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="kind", required=True)
    for kind in KINDS:
        p = sub.add_parser(kind)
        p.add_argument("--config", help="JSON config file; flags override its values")
        p.add_argument("--out", help="CSV output path (default <experiment>.csv)")
        p.add_argument("--seed", type=int, help="master seed, overrides the config")
        p.add_argument("--data-dir", help=f"MNIST IDX directory (default ${dataio.DATA_DIR_ENV})")
        p.add_argument("--synthetic", action="store_true", help="use synthetic data instead of MNIST")
        p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    return parser


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    data = {}
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        data = ExperimentConfig.from_json(text).to_dict()
        if data["kind"] != args.kind:
            raise ConfigError(f"config is for {data['kind']!r}, command is {args.kind!r}")
    data["kind"] = args.kind
    if args.out is not None:
        data["out"] = args.out
    if args.seed is not None:
        data["seed"] = args.seed
    if args.data_dir is not None:
        data["data_dir"] = args.data_dir
        data["data_source"] = "mnist"
    if args.synthetic:
        data["data_source"] = "synthetic"
    return ExperimentConfig.from_dict(data)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.verbose:
        logging.basicConfig(level=logging.INFO, format="%(message)s")
    try:
        out = run(resolve_config(args))
    except CapacityError as exc:
        print(f"capacity error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
