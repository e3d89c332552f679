"""Challenge -> response evaluation for the NN-PUF and the recurrent RNN-PUF."""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field, replace
from typing import Iterator, Union

import numpy as np

from .device import (ComparatorMode, DeviceInstance, Environment, column_current, compare,
                     compare_margin)


@dataclass(frozen=True)
class Challenge:
    row_bits: tuple
    final_pair: tuple

    def __post_init__(self):
        object.__setattr__(self, "row_bits", tuple(int(b) for b in self.row_bits))
        object.__setattr__(self, "final_pair", tuple(int(c) for c in self.final_pair))
        if any(b not in (0, 1) for b in self.row_bits):
            raise ValueError("row bits must be 0/1")
        if len(self.final_pair) != 2 or self.final_pair[0] == self.final_pair[1]:
            raise ValueError(f"final pair must be two distinct columns, got {self.final_pair}")

    def check(self, rows: int, cols: int):
        if len(self.row_bits) != rows:
            raise ValueError(f"challenge has {len(self.row_bits)} row bits, device has {rows} rows")
        if not all(0 <= c < cols for c in self.final_pair):
            raise ValueError(f"final pair {self.final_pair} out of range for {cols} columns")

    @classmethod
    def from_string(cls, bits: str, c_a: int, c_b: int) -> "Challenge":
        return cls(tuple(int(ch) for ch in bits), (c_a, c_b))


@dataclass(frozen=True)
class RnnConfig:
    rows: int
    cols: int
    feedback_width: int = 1
    recurrence_depth: int = 0
    v_ctrl: float = 0.0
    comparator: ComparatorMode = ComparatorMode.SHARED_OFFSET_CANCELLED
    pair_schedule_key: int = 0

    def __post_init__(self):
        object.__setattr__(self, "comparator", ComparatorMode.parse(self.comparator))
        if self.rows < 1 or self.cols < 2 or self.cols % 2:
            raise ValueError(f"invalid array {self.rows}x{self.cols}: need A >= 1 and even B >= 2")
        if self.feedback_width < 1:
            raise ValueError("feedback width N must be >= 1")
        if self.rows % self.feedback_width:
            raise ValueError(f"N={self.feedback_width} does not divide A={self.rows}")
        if 2 * self.feedback_width > self.cols:
            raise ValueError(f"N={self.feedback_width} exceeds B/2={self.cols // 2} independent pairs")
        if self.recurrence_depth < 0:
            raise ValueError("recurrence depth must be >= 0")
        if not self.v_ctrl >= 0:
            raise ValueError("v_ctrl must be >= 0")

    @property
    def comparator_fires(self) -> int:
        return self.recurrence_depth * self.feedback_width + 1

    @property
    def n_pairs(self) -> int:
        return self.cols // 2


@dataclass(frozen=True)
class MeasuredResponse:
    bit: int
    margin: float
    valid: bool
    comparator_fires: int


@dataclass(frozen=True)
class CrpRecord:
    challenge: Challenge
    response: int
    margin: float
    valid: bool


@dataclass(frozen=True)
class FixedFinalPair:
    c_a: int = 0
    c_b: int = 1

    def describe(self) -> str:
        return f"fixed:{self.c_a}:{self.c_b}"


@dataclass(frozen=True)
class RandomizedFinalPair:
    def describe(self) -> str:
        return "randomized"


@dataclass(frozen=True)
class RandomizedAnyPair:
    """Final pair drawn uniformly from all ordered pairs of distinct columns."""

    def describe(self) -> str:
        return "any"


PairPolicy = Union[FixedFinalPair, RandomizedFinalPair, RandomizedAnyPair]


def parse_pair_policy(text) -> PairPolicy:
    if isinstance(text, (FixedFinalPair, RandomizedFinalPair, RandomizedAnyPair)):
        return text
    text = str(text).strip().lower()
    if text in ("randomized", "random"):
        return RandomizedFinalPair()
    if text in ("any", "randomized_any"):
        return RandomizedAnyPair()
    if text == "fixed":
        return FixedFinalPair()
    if text.startswith("fixed:"):
        _, a, b = text.split(":")
        return FixedFinalPair(int(a), int(b))
    raise ValueError(f"unknown pair policy {text!r}")


def canonical_pairs(cols: int) -> list[tuple[int, int]]:
    """The B/2 independent (disjoint) column pairs ``(2k, 2k+1)``."""
    return [(2 * k, 2 * k + 1) for k in range(cols // 2)]


def xor_feedback(row_bits, feedback_bits):
    """XOR feedback bit ``k`` into the contiguous block ``[k*A/N, (k+1)*A/N)``.

    Works on a single challenge (1-D) or a batch (2-D, one row per challenge).
    """
    row_bits = np.asarray(row_bits, dtype=np.uint8)
    feedback_bits = np.asarray(feedback_bits, dtype=np.uint8)
    a, n = row_bits.shape[-1], feedback_bits.shape[-1]
    if n == 0 or a % n:
        raise ValueError(f"N={n} does not divide A={a}")
    return row_bits ^ np.repeat(feedback_bits, a // n, axis=-1)


def _schedule_digest(key: int, row_bytes: bytes, c_a: int, c_b: int, cycle: int) -> int:
    h = hashlib.blake2b(digest_size=8, key=int(key).to_bytes(8, "little", signed=True))
    h.update(row_bytes)
    h.update(np.array([c_a, c_b, cycle], dtype="<i8").tobytes())
    return int.from_bytes(h.digest(), "little")


def schedule_pair_indices(row_bits: np.ndarray, final_pairs: np.ndarray, cycle: int,
                          config: RnnConfig) -> np.ndarray:
    """Canonical-pair indices used in one recurrence cycle, shape ``(n, N)``.

    Keyed on the device's schedule key and the original challenge, so the PUF
    stays a deterministic function of its challenge.

    Pairs sharing a column with the final pair are used only when too few
    others remain. Re-using the final pair as an intermediate one leaks: when
    its intermediate bit is 0 no rows are flipped, so the final comparison
    repeats it and the response is 0.
    """
    row_bits = np.atleast_2d(row_bits)
    final_pairs = np.atleast_2d(final_pairs)
    packed = np.packbits(row_bits.astype(np.uint8), axis=1)
    n = config.feedback_width
    out = np.empty((row_bits.shape[0], n), dtype=np.int64)
    for i in range(row_bits.shape[0]):
        c_a, c_b = int(final_pairs[i, 0]), int(final_pairs[i, 1])
        rng = random.Random(_schedule_digest(config.pair_schedule_key, packed[i].tobytes(), c_a, c_b, cycle))
        touched = sorted({c_a // 2, c_b // 2})
        free = [k for k in range(config.n_pairs) if k not in touched]
        if len(free) >= n:
            out[i] = rng.sample(free, n)
        else:
            chosen = free + rng.sample(touched, n - len(free))
            rng.shuffle(chosen)
            out[i] = chosen
    return out


def intermediate_pairs(challenge: Challenge, cycle: int, config: RnnConfig) -> list[tuple[int, int]]:
    if not 0 <= cycle < config.recurrence_depth:
        raise ValueError(f"cycle {cycle} outside recurrence depth {config.recurrence_depth}")
    if 2 * config.feedback_width > config.cols:
        raise ValueError("2N exceeds the column count")
    idx = schedule_pair_indices(np.array([challenge.row_bits]), np.array([challenge.final_pair]),
                                cycle, config)[0]
    return [(2 * int(k), 2 * int(k) + 1) for k in idx]


@dataclass
class BatchResponse:
    bits: np.ndarray
    margins: np.ndarray
    valid: np.ndarray
    comparator_fires: int


def _pair_currents(masks: np.ndarray, w_eff_t: np.ndarray, cols: np.ndarray) -> np.ndarray:
    # row-wise dot of each mask with the weight column it selects
    return np.einsum("ij,ij->i", masks, w_eff_t[cols])


def evaluate_batch(device: DeviceInstance, row_bits, final_pairs, config: RnnConfig,
                   env: Environment, draw_offset: int = 0) -> BatchResponse:
    """Evaluate many challenges at once.

    Record ``r`` uses comparator draw indices ``(draw_offset + r) * fires + f``
    for fires ``f = 0 .. theta*N``, so results do not depend on batch layout.
    Intermediate bits stay local to this function.
    """
    row_bits = np.atleast_2d(np.asarray(row_bits, dtype=np.uint8))
    final_pairs = np.atleast_2d(np.asarray(final_pairs, dtype=np.int64))
    n, a = row_bits.shape
    if a != device.rows or config.rows != device.rows or config.cols != device.cols:
        raise ValueError("challenge/config dimensions do not match the device")
    if np.any(final_pairs < 0) or np.any(final_pairs >= device.cols) or np.any(final_pairs[:, 0] == final_pairs[:, 1]):
        raise ValueError("final pairs must be distinct in-range columns")
    fires = config.comparator_fires
    n_fb = config.feedback_width
    w_eff_t = np.ascontiguousarray(device.effective_weights(env).T)
    mode = config.comparator
    base = (int(draw_offset) + np.arange(n, dtype=np.int64)) * fires

    current = row_bits
    for cycle in range(config.recurrence_depth):
        idx = schedule_pair_indices(row_bits, final_pairs, cycle, config)
        masks = current.astype(np.float64)
        feedback = np.empty((n, n_fb), dtype=np.uint8)
        for k in range(n_fb):
            c_a, c_b = 2 * idx[:, k], 2 * idx[:, k] + 1
            margin = compare_margin(_pair_currents(masks, w_eff_t, c_a), _pair_currents(masks, w_eff_t, c_b),
                                    c_a, c_b, device, mode, env, base + cycle * n_fb + k)
            feedback[:, k] = margin > 0.0
        current = xor_feedback(current, feedback)

    masks = current.astype(np.float64)
    c_a, c_b = final_pairs[:, 0], final_pairs[:, 1]
    margins = compare_margin(_pair_currents(masks, w_eff_t, c_a), _pair_currents(masks, w_eff_t, c_b),
                             c_a, c_b, device, mode, env, base + fires - 1)
    degenerate = ~row_bits.any(axis=1)
    margins = np.where(degenerate, 0.0, margins)
    bits = (margins > 0.0).astype(np.uint8)
    valid = (np.abs(margins) > config.v_ctrl) & ~degenerate
    return BatchResponse(bits, margins, valid, fires)


def eval_rnn(device: DeviceInstance, challenge: Challenge, config: RnnConfig, env: Environment,
             draw_index: int = 0) -> MeasuredResponse:
    challenge.check(device.rows, device.cols)
    out = evaluate_batch(device, [challenge.row_bits], [challenge.final_pair], config, env, draw_index)
    return MeasuredResponse(int(out.bits[0]), float(out.margins[0]), bool(out.valid[0]), out.comparator_fires)


def eval_nn(device: DeviceInstance, challenge: Challenge, config: RnnConfig, env: Environment,
            draw_index: int = 0) -> MeasuredResponse:
    """Conventional NN-PUF read: one comparison of the final column pair.

    Computed one column at a time through :func:`column_current` and
    :func:`compare`, independently of the batched evaluator.
    """
    if config.recurrence_depth != 0:
        raise ValueError("eval_nn takes a conventional (theta = 0) configuration")
    challenge.check(device.rows, device.cols)
    if not any(challenge.row_bits):
        return MeasuredResponse(0, 0.0, False, 1)
    c_a, c_b = challenge.final_pair
    i_a = column_current(device, challenge.row_bits, c_a, env)
    i_b = column_current(device, challenge.row_bits, c_b, env)
    bit, margin = compare(i_a, i_b, c_a, c_b, device, config.comparator, env, draw_index)
    return MeasuredResponse(bit, margin, abs(margin) > config.v_ctrl, 1)


def crp_space(rows: int, cols: int) -> int:
    """Row-challenge space times independent column pairs (exact integer)."""
    if rows < 1 or cols < 2 or cols % 2:
        raise ValueError("need A >= 1 and even B >= 2")
    return (1 << rows) * (cols // 2)


def draw_challenges(n: int, rows: int, cols: int, pair_policy: PairPolicy, seed: int):
    """Uniform challenges with the all-zero row mask excluded."""
    if n < 1:
        raise ValueError("need at least one challenge")
    gen = np.random.default_rng(int(seed))
    row_bits = gen.integers(0, 2, size=(n, rows), dtype=np.uint8)
    while True:
        zero = ~row_bits.any(axis=1)
        if not zero.any():
            break
        row_bits[zero] = gen.integers(0, 2, size=(int(zero.sum()), rows), dtype=np.uint8)
    if isinstance(pair_policy, FixedFinalPair):
        if not (0 <= pair_policy.c_a < cols and 0 <= pair_policy.c_b < cols) or pair_policy.c_a == pair_policy.c_b:
            raise ValueError(f"fixed pair {pair_policy} invalid for {cols} columns")
        pairs = np.tile([pair_policy.c_a, pair_policy.c_b], (n, 1)).astype(np.int64)
    elif isinstance(pair_policy, RandomizedAnyPair):
        c_a = gen.integers(0, cols, size=n)
        c_b = (c_a + gen.integers(1, cols, size=n)) % cols
        pairs = np.stack([c_a, c_b], axis=1).astype(np.int64)
    else:
        k = gen.integers(0, cols // 2, size=n)
        pairs = np.stack([2 * k, 2 * k + 1], axis=1).astype(np.int64)
    return row_bits, pairs


@dataclass
class Dataset:
    config: RnnConfig
    device_seed: int
    env: Environment
    pair_policy: PairPolicy
    challenge_seed: int
    row_bits: np.ndarray
    pairs: np.ndarray
    responses: np.ndarray
    margins: np.ndarray
    valid: np.ndarray
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.responses)

    @property
    def records(self) -> list[CrpRecord]:
        return list(self.iter_records())

    def iter_records(self) -> Iterator[CrpRecord]:
        for i in range(len(self)):
            yield CrpRecord(Challenge(self.row_bits[i], self.pairs[i]), int(self.responses[i]),
                            float(self.margins[i]), bool(self.valid[i]))

    def subset(self, index) -> "Dataset":
        return replace(self, row_bits=self.row_bits[index], pairs=self.pairs[index],
                       responses=self.responses[index], margins=self.margins[index],
                       valid=self.valid[index])

    def valid_only(self) -> "Dataset":
        return self.subset(np.flatnonzero(self.valid))

    @property
    def valid_fraction(self) -> float:
        return float(self.valid.mean()) if len(self) else 0.0

    @property
    def ones_fraction(self) -> float:
        return float(self.responses.mean()) if len(self) else 0.0


def generate_dataset(device: DeviceInstance, config: RnnConfig, n: int, pair_policy: PairPolicy,
                     challenge_seed: int, env: Environment, valid_only: bool = False) -> Dataset:
    row_bits, pairs = draw_challenges(n, config.rows, config.cols, pair_policy, challenge_seed)
    out = evaluate_batch(device, row_bits, pairs, config, env)
    data = Dataset(config, device.device_seed, env, pair_policy, int(challenge_seed),
                   row_bits, pairs, out.bits, out.margins, out.valid)
    return data.valid_only() if valid_only else data
