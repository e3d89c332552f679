"""Behavioral model of a fabricated current-mirror array (CMA).

A device is an ``A x B`` grid of current-mirror cells. Each cell carries a
lognormal mismatch weight and a linear temperature coefficient; each column
feeds the comparator through its own gain ``k_X``. Currents are expressed in
units of the mean cell current.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from . import rng

log = logging.getLogger(__name__)

TEMP_RANGE_C = (-45.0, 90.0)


class ComparatorMode(enum.Enum):
    PER_COLUMN_BIASED = "biased"
    SHARED_OFFSET_CANCELLED = "shared"

    @classmethod
    def parse(cls, value) -> "ComparatorMode":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        aliases = {
            "biased": cls.PER_COLUMN_BIASED,
            "per_column_biased": cls.PER_COLUMN_BIASED,
            "percolumnbiased": cls.PER_COLUMN_BIASED,
            "shared": cls.SHARED_OFFSET_CANCELLED,
            "shared_offset_cancelled": cls.SHARED_OFFSET_CANCELLED,
            "sharedoffsetcancelled": cls.SHARED_OFFSET_CANCELLED,
        }
        if key not in aliases:
            raise ValueError(f"unknown comparator mode {value!r}")
        return aliases[key]


@dataclass(frozen=True)
class MismatchParams:
    """Standard deviations of the four mismatch/noise sources.

    The defaults are calibration targets, not measured silicon values:
    ``sigma_mismatch`` sets the current scale that ``v_ctrl`` is read against,
    ``sigma_bias`` sets how strongly comparator gain imbalance skews a column
    pair, and the tempco/noise pair is rescaled by :func:`calibrate_noise`.
    """

    sigma_mismatch: float = 0.005
    sigma_tempco: float = 1.1875e-5
    sigma_noise: float = 1.1875e-3
    sigma_bias: float = 3.4e-4

    def __post_init__(self):
        for name in ("sigma_mismatch", "sigma_tempco", "sigma_noise", "sigma_bias"):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {value}")

    def scaled(self, multiplier: float) -> "MismatchParams":
        """Scale the temperature and noise sources by one shared factor."""
        return replace(
            self,
            sigma_tempco=self.sigma_tempco * multiplier,
            sigma_noise=self.sigma_noise * multiplier,
        )


@dataclass(frozen=True)
class Environment:
    temperature_c: float = 25.0
    noise_seed: int = 0
    nominal_temperature_c: float = 25.0
    # golden (enrollment) evaluations switch comparator noise off entirely
    noisy: bool = True

    def __post_init__(self):
        lo, hi = TEMP_RANGE_C
        if not lo <= self.temperature_c <= hi:
            raise ValueError(f"temperature {self.temperature_c} C outside modeled range [{lo}, {hi}]")

    @property
    def delta_t(self) -> float:
        return self.temperature_c - self.nominal_temperature_c

    @classmethod
    def golden(cls, nominal_temperature_c: float = 25.0) -> "Environment":
        return cls(temperature_c=nominal_temperature_c, noise_seed=0,
                   nominal_temperature_c=nominal_temperature_c, noisy=False)

    def with_seed(self, noise_seed: int) -> "Environment":
        return replace(self, noise_seed=int(noise_seed))


@dataclass(frozen=True, eq=False)
class DeviceInstance:
    weights: np.ndarray
    tempcos: np.ndarray
    bias_gains: np.ndarray
    device_seed: int
    params: MismatchParams = field(default_factory=MismatchParams)

    def __post_init__(self):
        for arr in (self.weights, self.tempcos, self.bias_gains):
            arr.setflags(write=False)
        if self.weights.shape != self.tempcos.shape or self.weights.ndim != 2:
            raise ValueError("weights and tempcos must be matching A x B matrices")
        if self.bias_gains.shape != (self.cols,):
            raise ValueError("bias_gains must have one entry per column")
        if np.any(self.weights <= 0) or np.any(self.bias_gains <= 0):
            raise ValueError("weights and bias gains must be strictly positive")

    @property
    def rows(self) -> int:
        return self.weights.shape[0]

    @property
    def cols(self) -> int:
        return self.weights.shape[1]

    def effective_weights(self, env: Environment) -> np.ndarray:
        """Per-cell current at the environment's temperature."""
        return self.weights * (1.0 + self.tempcos * env.delta_t)

    def gains(self, mode: ComparatorMode) -> np.ndarray:
        if mode is ComparatorMode.PER_COLUMN_BIASED:
            return self.bias_gains
        return np.ones(self.cols)

    def identical_to(self, other: "DeviceInstance") -> bool:
        return (self.device_seed == other.device_seed
                and np.array_equal(self.weights, other.weights)
                and np.array_equal(self.tempcos, other.tempcos)
                and np.array_equal(self.bias_gains, other.bias_gains))


def sample_device(device_seed: int, rows: int, cols: int,
                  params: MismatchParams | None = None) -> DeviceInstance:
    """Fabricate one device.

    Cell weights are ``exp(sigma_mismatch * z)`` rescaled so every column sums
    to ``rows`` (unit mean cell current per column). Tempcos and bias gains are
    drawn from the same stream afterwards, so rescaling ``sigma_tempco`` scales
    the tempco matrix exactly.
    """
    params = params or MismatchParams()
    if rows < 1 or cols < 2:
        raise ValueError(f"need rows >= 1 and cols >= 2, got {rows}x{cols}")
    if cols % 2:
        raise ValueError(f"column count must be even for column pairs, got {cols}")
    gen = np.random.default_rng(int(device_seed))
    z = gen.standard_normal((rows, cols))
    weights = np.exp(params.sigma_mismatch * z)
    weights /= weights.mean(axis=0, keepdims=True)
    tempcos = params.sigma_tempco * gen.standard_normal((rows, cols))
    bias_gains = np.exp(params.sigma_bias * gen.standard_normal(cols))
    return DeviceInstance(weights, tempcos, bias_gains, int(device_seed), params)


def column_current(device: DeviceInstance, row_mask, col: int, env: Environment) -> float:
    """Summed current of one column for the rows enabled in ``row_mask``."""
    mask = np.asarray(row_mask, dtype=np.float64)
    if mask.shape != (device.rows,):
        raise ValueError(f"row mask must have {device.rows} bits")
    if not 0 <= col < device.cols:
        raise IndexError(f"column {col} out of range for {device.cols} columns")
    cells = device.weights[:, col] * (1.0 + device.tempcos[:, col] * env.delta_t)
    return float(mask @ cells)


def column_currents(device: DeviceInstance, masks: np.ndarray, env: Environment) -> np.ndarray:
    """Batch form: ``(n, A)`` masks -> ``(n, B)`` column currents."""
    return np.asarray(masks, dtype=np.float64) @ device.effective_weights(env)


def comparator_noise(env: Environment, draw_index, sigma_noise: float):
    """Noise at the two comparator inputs for the given draw indices."""
    draw_index = np.asarray(draw_index)
    if not env.noisy or sigma_noise == 0.0:
        zeros = np.zeros(draw_index.shape)
        return zeros, zeros
    n_a = sigma_noise * rng.standard_normal(env.noise_seed, draw_index, stream=0)
    n_b = sigma_noise * rng.standard_normal(env.noise_seed, draw_index, stream=1)
    return n_a, n_b


def compare_margin(i_a, i_b, col_a, col_b, device: DeviceInstance, mode: ComparatorMode,
                   env: Environment, draw_index):
    """Signed comparator margin ``(g_a*i_a + n_a) - (g_b*i_b + n_b)``; vectorized."""
    gains = device.gains(mode)
    n_a, n_b = comparator_noise(env, draw_index, device.params.sigma_noise)
    return (gains[col_a] * i_a + n_a) - (gains[col_b] * i_b + n_b)


def compare(i_a: float, i_b: float, col_a: int, col_b: int, device: DeviceInstance,
            mode: ComparatorMode, env: Environment, draw_index: int) -> tuple[int, float]:
    """One comparator decision. Returns ``(bit, margin)``; exact ties give 0."""
    if col_a == col_b:
        raise ValueError("comparator inputs must be distinct columns")
    margin = float(compare_margin(i_a, i_b, col_a, col_b, device, mode, env, np.array([draw_index]))[0])
    return int(margin > 0.0), margin


class CalibrationError(RuntimeError):
    pass


def calibrate_noise(target_reliability: float, config, corner: Environment,
                    base_params: MismatchParams | None = None, budget: int = 5000,
                    trials: int = 5, tol: float = 0.002, device_seed: int = 1,
                    challenge_seed: int = 7, max_steps: int = 40,
                    golden_env: Environment | None = None) -> MismatchParams:
    """Rescale tempco and noise so the conventional PUF hits a target reliability.

    A single multiplier on ``(sigma_tempco, sigma_noise)`` is bisected on the
    Monte Carlo reliability of a conventional (theta=0) PUF at ``corner``,
    v_ctrl=0. Device, challenges and noise draws are held fixed across steps,
    which makes measured reliability monotone in the multiplier.
    """
    from .core import RandomizedFinalPair
    from .reliability import reliability_stats

    base_params = base_params or MismatchParams()
    if not 0.5 < target_reliability < 1.0:
        raise ValueError("target reliability must lie in (0.5, 1)")
    if config.recurrence_depth != 0:
        raise ValueError("calibration runs on the conventional PUF (theta = 0)")
    config = replace(config, v_ctrl=0.0)
    if base_params.sigma_noise == 0.0 and (base_params.sigma_tempco == 0.0 or corner.delta_t == 0.0):
        if abs(1.0 - target_reliability) <= tol:
            return base_params.scaled(0.0)
        raise CalibrationError("no perturbation source is active at this corner; reliability is 1.0 "
                               "for every multiplier")
    golden_env = golden_env or Environment.golden(corner.nominal_temperature_c)

    def measure(mult: float) -> float:
        device = sample_device(device_seed, config.rows, config.cols, base_params.scaled(mult))
        stats = reliability_stats(device, config, budget, golden_env, corner, trials,
                                  challenge_seed=challenge_seed, pair_policy=RandomizedFinalPair())
        return stats.reliability

    def done(r: float) -> bool:
        return abs(r - target_reliability) <= tol

    lo, r_lo = 0.0, measure(0.0)
    if done(r_lo):
        log.info("calibration: zero multiplier already gives R=%.4f", r_lo)
        return base_params.scaled(0.0)
    hi, r_hi, steps = 1.0, measure(1.0), 1
    while r_hi > target_reliability:
        if done(r_hi):
            return base_params.scaled(hi)
        if steps >= max_steps:
            raise CalibrationError(
                f"reliability stays at {r_hi:.4f} > target {target_reliability}; "
                "perturbation sources cannot reach the target")
        lo, r_lo = hi, r_hi
        hi *= 2.0
        r_hi = measure(hi)
        steps += 1
    while steps < max_steps:
        if done(r_hi):
            return base_params.scaled(hi)
        mid = 0.5 * (lo + hi)
        r_mid = measure(mid)
        steps += 1
        log.debug("calibration step %d: mult=%.6g R=%.4f", steps, mid, r_mid)
        if done(r_mid):
            return base_params.scaled(mid)
        if r_mid > target_reliability:
            lo, r_lo = mid, r_mid
        else:
            hi, r_hi = mid, r_mid
    raise CalibrationError(f"no multiplier within tolerance after {max_steps} steps "
                           f"(bracket [{lo:.4g}, {hi:.4g}], R in [{r_hi:.4f}, {r_lo:.4f}])")
