"""YAML experiment configuration with strict keys and line-numbered diagnostics."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, is_dataclass

import yaml

from .attacks import ModelKind, make_hyper
from .core import RnnConfig, parse_pair_policy
from .device import ComparatorMode, Environment, MismatchParams


class ConfigError(ValueError):
    """Invalid configuration; the message names the file, line and key."""


@dataclass
class DeviceSection:
    seed: int = 1
    rows: int = 128
    cols: int = 128
    sigma_mismatch: float = MismatchParams.sigma_mismatch
    sigma_tempco: float = MismatchParams.sigma_tempco
    sigma_noise: float = MismatchParams.sigma_noise
    sigma_bias: float = MismatchParams.sigma_bias


@dataclass
class PufSection:
    feedback_width: int = 1
    recurrence_depth: int = 0
    v_ctrl: float = 0.0
    comparator: str = "shared"
    pair_schedule_key: int = 0
    pair_policy: str = "fixed"


@dataclass
class EnvSection:
    golden_temperature_c: float = 25.0
    corner_temperature_c: float = -45.0
    noise_seed: int = 100


@dataclass
class AttackSection:
    kinds: list = field(default_factory=lambda: ["linear", "mlp", "boosted", "bagged"])
    folds: int = 5
    seed: int = 0
    n_crps: int = 50000
    challenge_seed: int = 11
    # "auto" trains on valid records only when v_ctrl > 0
    valid_only: object = "auto"
    pair_encoding: str = "auto"
    hyper: dict = field(default_factory=dict)


@dataclass
class ReliabilitySection:
    challenges: int = 5000
    trials: int = 5
    challenge_seed: int = 0
    space_sample: int = 20000
    target: float = 0.925
    calibration_tol: float = 0.002


@dataclass
class SweepSection:
    names: list = field(default_factory=list)
    n_values: list = field(default_factory=list)
    theta_values: list = field(default_factory=list)
    col_values: list = field(default_factory=list)
    row_values: list = field(default_factory=list)
    vctrl_values: list = field(default_factory=list)
    train_sizes: list = field(default_factory=lambda: [100, 200, 400, 800, 1500, 3125])
    device_seeds: list = field(default_factory=lambda: [1])
    n_crps: int = 25000


@dataclass
class ExperimentConfig:
    device: DeviceSection = field(default_factory=DeviceSection)
    puf: PufSection = field(default_factory=PufSection)
    env: EnvSection = field(default_factory=EnvSection)
    attack: AttackSection = field(default_factory=AttackSection)
    reliability: ReliabilitySection = field(default_factory=ReliabilitySection)
    sweep: SweepSection = field(default_factory=SweepSection)
    output: str = "out"

    def params(self) -> MismatchParams:
        d = self.device
        return MismatchParams(d.sigma_mismatch, d.sigma_tempco, d.sigma_noise, d.sigma_bias)

    def rnn_config(self) -> RnnConfig:
        p = self.puf
        return RnnConfig(self.device.rows, self.device.cols, p.feedback_width, p.recurrence_depth,
                         p.v_ctrl, p.comparator, p.pair_schedule_key)

    def pair_policy(self):
        return parse_pair_policy(self.puf.pair_policy)

    def golden_env(self) -> Environment:
        return Environment.golden(self.env.golden_temperature_c)

    def corner_env(self) -> Environment:
        return Environment(self.env.corner_temperature_c, self.env.noise_seed,
                           nominal_temperature_c=self.env.golden_temperature_c)

    def valid_only(self) -> bool | None:
        v = self.attack.valid_only
        return None if v == "auto" else bool(v)

    def to_dict(self) -> dict:
        return asdict(self)

    def hash(self) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def override_seed(self, seed: int) -> None:
        """Apply one seed to the device, the challenge draw and the attack splits."""
        self.device.seed = seed
        self.attack.seed = seed
        self.attack.challenge_seed = seed
        self.sweep.device_seeds = [seed]


def _node_to_python(node, lines: dict, path: tuple):
    if isinstance(node, yaml.MappingNode):
        out = {}
        for key_node, value_node in node.value:
            key = key_node.value
            if key in out:
                raise ConfigError(f"line {key_node.start_mark.line + 1}: duplicate key {'.'.join(path + (key,))}")
            lines[path + (key,)] = key_node.start_mark.line + 1
            out[key] = _node_to_python(value_node, lines, path + (key,))
        return out
    if isinstance(node, yaml.SequenceNode):
        return [_node_to_python(n, lines, path) for n in node.value]
    return _scalar(node)


def _scalar(node):
    loader = yaml.SafeLoader("")
    try:
        return loader.construct_object(node, deep=True)
    finally:
        loader.dispose()


def _coerce(value, default, where: str):
    if isinstance(default, bool) or default is None:
        return value
    if isinstance(default, int) and not isinstance(value, bool):
        if isinstance(value, int):
            return value
        raise ConfigError(f"{where}: expected an integer, got {value!r}")
    if isinstance(default, float):
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
        # YAML 1.1 reads exponent forms without a dot (1e-9) as strings
        if isinstance(value, str):
            try:
                return float(value)
            except ValueError:
                pass
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    if isinstance(default, str) and not isinstance(value, str):
        raise ConfigError(f"{where}: expected a string, got {value!r}")
    if isinstance(default, list) and not isinstance(value, list):
        raise ConfigError(f"{where}: expected a list, got {value!r}")
    if isinstance(default, dict) and not isinstance(value, dict):
        raise ConfigError(f"{where}: expected a mapping, got {value!r}")
    return value


def _fill(cls, data, lines, path, source):
    obj = cls()
    if data is None:
        return obj
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: section {'.'.join(path) or '<root>'} must be a mapping")
    known = {f.name: f for f in fields(cls)}
    for key, value in data.items():
        where = f"{source}:{lines.get(path + (key,), '?')}: {'.'.join(path + (key,))}"
        if key not in known:
            raise ConfigError(f"{where}: unknown key (expected one of {sorted(known)})")
        current = getattr(obj, key)
        if is_dataclass(current):
            setattr(obj, key, _fill(type(current), value, lines, path + (key,), source))
        else:
            setattr(obj, key, _coerce(value, current, where))
    return obj


def validate(cfg: ExperimentConfig, source: str = "<config>") -> ExperimentConfig:
    """Check that every section maps onto valid module-level types."""
    try:
        cfg.params()
        cfg.rnn_config()
        cfg.pair_policy()
        ComparatorMode.parse(cfg.puf.comparator)
        cfg.golden_env()
        cfg.corner_env()
        for kind in cfg.attack.kinds:
            make_hyper(kind, cfg.attack.hyper.get(ModelKind.parse(kind).value))
        unknown = set(cfg.attack.hyper) - {k.value for k in ModelKind}
        if unknown:
            raise ValueError(f"attack.hyper has unknown model kinds {sorted(unknown)}")
        if cfg.attack.valid_only not in ("auto", True, False):
            raise ValueError("attack.valid_only must be auto, true or false")
        if cfg.attack.pair_encoding not in ("auto", "onehot", "binary"):
            raise ValueError("attack.pair_encoding must be auto, onehot or binary")
        if cfg.attack.n_crps < 1:
            raise ValueError("attack.n_crps must be >= 1")
        if cfg.attack.folds < 2:
            raise ValueError("attack.folds must be >= 2")
        if cfg.reliability.challenges < 1 or cfg.reliability.trials < 1:
            raise ValueError("reliability.challenges and reliability.trials must be >= 1")
        if not 0.5 < cfg.reliability.target < 1.0:
            raise ValueError("reliability.target must lie in (0.5, 1)")
        if cfg.sweep.n_crps < cfg.attack.folds:
            raise ValueError("sweep.n_crps must be at least attack.folds")
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    return cfg


def loads(text: str, source: str = "<config>") -> ExperimentConfig:
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{source}:{mark.line + 1}" if mark else source
        raise ConfigError(f"{where}: YAML syntax error: {getattr(exc, 'problem', exc)}") from None
    lines: dict = {}
    data = _node_to_python(node, lines, ()) if node is not None else {}
    cfg = _fill(ExperimentConfig, data, lines, (), source)
    return validate(cfg, source)


def load(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from None
    return loads(text, str(path))


def dumps(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)
