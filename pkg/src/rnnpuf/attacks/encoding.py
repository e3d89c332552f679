"""Attacker-side feature encoding of CRPs."""

from dataclasses import dataclass

import numpy as np

from ..core import CrpRecord, FixedFinalPair, RandomizedAnyPair, RandomizedFinalPair


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    label: int


def pair_onehot_index(pairs: np.ndarray) -> np.ndarray:
    pairs = np.atleast_2d(pairs)
    k = pairs[:, 0] // 2
    if np.any(pairs[:, 0] % 2) or np.any(pairs[:, 1] != pairs[:, 0] + 1):
        bad = pairs[(pairs[:, 0] % 2 != 0) | (pairs[:, 1] != pairs[:, 0] + 1)][0]
        raise ValueError(f"pair {tuple(bad)} is not one of the canonical disjoint pairs")
    return k


def address_bits(count: int) -> int:
    return max(1, int(np.ceil(np.log2(count))))


def _binary(values, width):
    shifts = np.arange(width)[::-1]
    return ((values[:, None] >> shifts) & 1).astype(np.float32) * 2.0 - 1.0


def _onehot(values, width):
    block = np.zeros((len(values), width), dtype=np.float32)
    block[np.arange(len(values)), values] = 1.0
    return block


def encode_arrays(row_bits, pairs, responses, policy, cols: int, pair_encoding: str = "auto"):
    """Row bits as +-1 features, plus the final pair when pairs are randomized.

    Canonical pairs: ``"onehot"`` appends a B/2 indicator block, ``"binary"``
    the pair index as +-1 address bits. Any-pair datasets append both column
    addresses (binary) or both column indicators (onehot). Binary addresses
    are the column challenge exactly as the chip receives it. ``"auto"`` picks
    onehot for canonical pairs and binary for any-pair datasets.
    """
    if pair_encoding == "auto":
        pair_encoding = "binary" if isinstance(policy, RandomizedAnyPair) else "onehot"
    if pair_encoding not in ("onehot", "binary"):
        raise ValueError(f"unknown pair encoding {pair_encoding!r}")
    row_bits = np.atleast_2d(np.asarray(row_bits))
    x = row_bits.astype(np.float32) * 2.0 - 1.0
    if isinstance(policy, RandomizedFinalPair):
        k = pair_onehot_index(np.asarray(pairs))
        if pair_encoding == "onehot":
            block = _onehot(k, cols // 2)
        else:
            block = _binary(k, address_bits(cols // 2))
        x = np.hstack([x, block])
    elif isinstance(policy, RandomizedAnyPair):
        pairs = np.atleast_2d(np.asarray(pairs))
        if pair_encoding == "onehot":
            blocks = [_onehot(pairs[:, 0], cols), _onehot(pairs[:, 1], cols)]
        else:
            blocks = [_binary(pairs[:, 0], address_bits(cols)), _binary(pairs[:, 1], address_bits(cols))]
        x = np.hstack([x, *blocks])
    elif not isinstance(policy, FixedFinalPair):
        raise TypeError(f"unknown pair policy {policy!r}")
    y = np.asarray(responses, dtype=np.int8) * 2 - 1
    return x, y


def encode_dataset(dataset, pair_encoding: str = "auto"):
    return encode_arrays(dataset.row_bits, dataset.pairs, dataset.responses, dataset.pair_policy,
                         dataset.config.cols, pair_encoding)


def encode(record: CrpRecord, policy, cols: int, pair_encoding: str = "auto") -> FeatureVector:
    if not any(record.challenge.row_bits):
        raise ValueError("all-zero row challenges are never encoded")
    x, y = encode_arrays([record.challenge.row_bits], [record.challenge.final_pair], [record.response],
                         policy, cols, pair_encoding)
    return FeatureVector(x[0], int(y[0]))
