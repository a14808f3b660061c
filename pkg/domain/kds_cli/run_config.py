"""
Resolved run configuration, stored as flat `key = value` lines.

Precedence: built-in defaults < dataset preset < config file < command-line flags.
"""
import dataclasses
import logging
import typing
from dataclasses import dataclass

from domain.kds.encoder import EncoderParams
from domain.kds.errors import InvalidInputError
from domain.kds.spectral import SPECTRAL_MODES
from domain.kds.trainer import TrainConfig
from kds_cfg import (ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON, ATOMS, BATCH_SIZE, BENCHMARK_GRID, BENCHMARK_REPEATS,
                     BENCHMARK_TRAIN_EPOCHS, BENCHMARK_TRAIN_N, CIRCLES_DELTA, DATASET_PRESETS, EPOCHS, ETA_RULE,
                     KMEANS_REPLICATES, LAMBDA, LAYERS, LEARNING_RATE, OUTPUT_ROOT, SEED, SPECTRAL_MODE, SWEEP_ATOMS,
                     SWEEP_DELTAS, SWEEP_SEEDS)

COMMANDS = ("generate", "fit", "cluster", "benchmark", "sweep", "verify")
DATASETS = ("two-moons", "concentric", "unit-circle", "delaunay")
PREPROCESS_CHOICES = ("none", "minmax", "standardize", "unitnorm", "best")

# file keys that differ from the field names
KEY_ALIASES = {"lam": "lambda"}
FIELD_NAMES = {alias: name for name, alias in KEY_ALIASES.items()}


@dataclass
class RunConfig:
    command: str = "fit"
    out: str = OUTPUT_ROOT
    seed: int = SEED

    # datasets
    dataset: str = "two-moons"
    n: int = 5000
    noise: float | None = None
    delta: float = CIRCLES_DELTA
    atoms_per_cluster: int = 5
    cluster_offset: float = 5.0
    weighting: str = "uniform"
    atoms_file: str | None = None
    atom_clusters_file: str | None = None

    # inputs
    data: str | None = None
    labels: str | None = None
    codes: str | None = None
    atoms: str | None = None

    # training
    preset: str | None = None
    preprocess: str = "none"
    m: int = ATOMS
    T: int = LAYERS
    lam: float = LAMBDA
    lambda_sweep: tuple[float, ...] = ()
    learning_rate: float = LEARNING_RATE
    epochs: int = EPOCHS
    batch_size: int = BATCH_SIZE
    adam_beta1: float = ADAM_BETA1
    adam_beta2: float = ADAM_BETA2
    adam_epsilon: float = ADAM_EPSILON
    alpha: float | None = None
    learn_alpha: bool = False
    eta_rule: str = ETA_RULE
    final_encode_T: int | None = None
    workers: int = 1
    deterministic: bool = True

    # clustering
    k: int | None = None
    mode: str = SPECTRAL_MODE
    replicates: int = KMEANS_REPLICATES
    include_atoms: bool = True

    # benchmark
    grid: tuple[int, ...] = BENCHMARK_GRID
    repeats: int = BENCHMARK_REPEATS
    train_n: int = BENCHMARK_TRAIN_N
    train_epochs: int = BENCHMARK_TRAIN_EPOCHS

    # concentric circles sweep
    sweep_m: tuple[int, ...] = SWEEP_ATOMS
    sweep_delta: tuple[float, ...] = SWEEP_DELTAS
    sweep_seeds: int = SWEEP_SEEDS

    # verify
    suite: str | None = None

    def validate(self):
        if self.command not in COMMANDS:
            raise InvalidInputError(f"command must be one of {COMMANDS}, got {self.command!r}")
        if self.dataset not in DATASETS:
            raise InvalidInputError(f"dataset must be one of {DATASETS}, got {self.dataset!r}")
        if self.preprocess not in PREPROCESS_CHOICES:
            raise InvalidInputError(f"preprocess must be one of {PREPROCESS_CHOICES}, got {self.preprocess!r}")
        if self.mode not in SPECTRAL_MODES:
            raise InvalidInputError(f"mode must be one of {SPECTRAL_MODES}, got {self.mode!r}")
        if self.preset is not None and self.preset not in DATASET_PRESETS:
            raise InvalidInputError(f"unknown preset {self.preset!r}, choose from {sorted(DATASET_PRESETS)}")
        if self.n < 1 or self.replicates < 1 or self.repeats < 1 or self.workers < 1:
            raise InvalidInputError("n, replicates, repeats and workers must be positive")
        if self.noise is not None and self.noise < 0:
            raise InvalidInputError(f"noise must be nonnegative, got {self.noise}")
        if self.k is not None and self.k < 1:
            raise InvalidInputError(f"k must be positive, got {self.k}")
        self.train_config().validate()
        return self

    def encoder_params(self, lam=None):
        return EncoderParams(lam=self.lam if lam is None else lam, T=self.T, alpha=self.alpha,
                             learn_alpha=self.learn_alpha, eta_rule=self.eta_rule)

    def train_config(self, lam=None, n=None):
        batch_size = self.batch_size
        if n is not None and batch_size > n:
            logging.warning(f"batch_size {batch_size} exceeds the {n} available points, using {n}")
            batch_size = n
        return TrainConfig(m=self.m, epochs=self.epochs, batch_size=batch_size, learning_rate=self.learning_rate,
                           adam_beta1=self.adam_beta1, adam_beta2=self.adam_beta2, adam_epsilon=self.adam_epsilon,
                           seed=self.seed, encoder=self.encoder_params(lam), final_encode_T=self.final_encode_T,
                           workers=self.workers, deterministic=self.deterministic)


def _format(value):
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ",".join(_format(v) for v in value)
    return str(value)


def _coerce(kind, text, key):
    text = text.strip()
    origin = typing.get_origin(kind)
    if origin is tuple:
        item = typing.get_args(kind)[0]
        return tuple(_coerce(item, part, key) for part in text.split(',') if part.strip())
    if origin is not None:
        if text.lower() == "none":
            return None
        kind = next(arg for arg in typing.get_args(kind) if arg is not type(None))
    if kind is bool:
        if text.lower() not in ("true", "false"):
            raise InvalidInputError(f"{key} must be true or false, got {text!r}")
        return text.lower() == "true"
    try:
        return kind(text)
    except ValueError as e:
        raise InvalidInputError(f"cannot read {key} = {text!r} as {kind.__name__}") from e


FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(RunConfig)}


def serialize(config):
    return "".join(f"{KEY_ALIASES.get(f.name, f.name)} = {_format(getattr(config, f.name))}\n"
                   for f in dataclasses.fields(config))


def parse_values(text, source="config"):
    """Parse `key = value` lines into typed field values; blank lines and # comments are skipped."""
    values = {}
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith('#'):
            continue
        key, sep, raw = line.partition('=')
        if not sep:
            raise InvalidInputError(f"{source}:{number}: expected 'key = value', got {line!r}")
        key = key.strip()
        name = FIELD_NAMES.get(key, key)
        if name not in FIELD_TYPES:
            raise InvalidInputError(f"{source}:{number}: unknown key {key!r}")
        values[name] = _coerce(FIELD_TYPES[name], raw, key)
    return values


def parse(text, source="config"):
    return RunConfig(**parse_values(text, source))


def preset_values(name):
    if name not in DATASET_PRESETS:
        raise InvalidInputError(f"unknown preset {name!r}, choose from {sorted(DATASET_PRESETS)}")
    return {FIELD_NAMES.get(key, key): value for key, value in DATASET_PRESETS[name].items()}


def resolve(command, file_values=None, flag_values=None):
    file_values = file_values or {}
    flag_values = {key: value for key, value in (flag_values or {}).items() if value is not None}
    preset = flag_values.get("preset", file_values.get("preset"))
    values = preset_values(preset) if preset is not None else {}
    values.update(file_values)
    values.update(flag_values)
    values["command"] = command
    return RunConfig(**values).validate()
