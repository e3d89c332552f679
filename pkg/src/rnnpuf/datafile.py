"""Plain-text dataset files and atomic output writes.

Layout::

    # rnnpuf-dataset 1
    # rows=64
    # ...header keys...
    row_bits<TAB>c_a<TAB>c_b<TAB>response<TAB>margin<TAB>valid
    0110...<TAB>3<TAB>5<TAB>1<TAB>0.004211<TAB>1

Margins are printed with six decimals, so a re-read dataset matches the
in-memory one exactly in every field except the margin, which matches to
within 5e-7.
"""

from __future__ import annotations

import io
import os
import tempfile
from dataclasses import replace

import numpy as np

from .core import Dataset, RnnConfig, parse_pair_policy
from .device import Environment

MAGIC = "# rnnpuf-dataset 1"
COLUMNS = ("row_bits", "c_a", "c_b", "response", "margin", "valid")


class DatasetFormatError(ValueError):
    pass


def atomic_write_text(path, text: str) -> None:
    """Write ``text`` to a temp file beside ``path`` and rename it into place."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _env_text(env: Environment) -> str:
    return (f"temperature_c:{env.temperature_c!r},noise_seed:{env.noise_seed},"
            f"nominal_temperature_c:{env.nominal_temperature_c!r},noisy:{int(env.noisy)}")


def _parse_env(text: str) -> Environment:
    fields = dict(item.split(":", 1) for item in text.split(","))
    return Environment(temperature_c=float(fields["temperature_c"]), noise_seed=int(fields["noise_seed"]),
                       nominal_temperature_c=float(fields["nominal_temperature_c"]),
                       noisy=bool(int(fields["noisy"])))


def header_fields(dataset: Dataset, extra: dict | None = None) -> dict:
    cfg = dataset.config
    out = {
        "rows": cfg.rows,
        "cols": cfg.cols,
        "feedback_width": cfg.feedback_width,
        "recurrence_depth": cfg.recurrence_depth,
        "v_ctrl": repr(float(cfg.v_ctrl)),
        "comparator": cfg.comparator.value,
        "pair_schedule_key": cfg.pair_schedule_key,
        "device_seed": dataset.device_seed,
        "challenge_seed": dataset.challenge_seed,
        "env": _env_text(dataset.env),
        "pair_policy": dataset.pair_policy.describe(),
        "records": len(dataset),
    }
    for key, value in (extra or {}).items():
        if key in out:
            raise ValueError(f"extra header key {key!r} collides with a dataset field")
        out[key] = value
    return out


def dumps_dataset(dataset: Dataset, extra: dict | None = None) -> str:
    buf = io.StringIO()
    buf.write(MAGIC + "\n")
    for key, value in header_fields(dataset, extra).items():
        buf.write(f"# {key}={value}\n")
    buf.write("\t".join(COLUMNS) + "\n")
    # one byte per row bit, then join: far faster than per-bit formatting
    bits = np.where(dataset.row_bits.astype(bool), ord("1"), ord("0")).astype(np.uint8)
    for i in range(len(dataset)):
        c_a, c_b = dataset.pairs[i]
        buf.write(f"{bits[i].tobytes().decode()}\t{c_a}\t{c_b}\t{int(dataset.responses[i])}\t"
                  f"{dataset.margins[i]:.6f}\t{int(dataset.valid[i])}\n")
    return buf.getvalue()


def write_dataset(path, dataset: Dataset, extra: dict | None = None) -> None:
    atomic_write_text(path, dumps_dataset(dataset, extra))


def read_dataset(path) -> Dataset:
    """Load a dataset file. Unknown header keys are kept in ``Dataset.meta``."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise DatasetFormatError(f"cannot read dataset {path}: {exc.strerror or exc}") from exc
    if not lines or lines[0] != MAGIC:
        raise DatasetFormatError(f"{path}: not a dataset file (missing '{MAGIC}' line)")
    header, pos = {}, 1
    while pos < len(lines) and lines[pos].startswith("# "):
        key, sep, value = lines[pos][2:].partition("=")
        if not sep:
            raise DatasetFormatError(f"{path}:{pos + 1}: malformed header line")
        header[key] = value
        pos += 1
    if pos >= len(lines) or tuple(lines[pos].split("\t")) != COLUMNS:
        raise DatasetFormatError(f"{path}:{pos + 1}: expected column line {' '.join(COLUMNS)}")
    try:
        config = RnnConfig(int(header.pop("rows")), int(header.pop("cols")),
                           int(header.pop("feedback_width")), int(header.pop("recurrence_depth")),
                           float(header.pop("v_ctrl")), header.pop("comparator"),
                           int(header.pop("pair_schedule_key")))
        device_seed = int(header.pop("device_seed"))
        challenge_seed = int(header.pop("challenge_seed"))
        env = _parse_env(header.pop("env"))
        policy = parse_pair_policy(header.pop("pair_policy"))
        n_declared = int(header.pop("records"))
    except KeyError as exc:
        raise DatasetFormatError(f"{path}: header is missing {exc.args[0]!r}") from None
    except ValueError as exc:
        raise DatasetFormatError(f"{path}: bad header value: {exc}") from None

    body = lines[pos + 1:]
    if len(body) != n_declared:
        raise DatasetFormatError(f"{path}: header declares {n_declared} records, found {len(body)}")
    row_bits = np.zeros((len(body), config.rows), dtype=np.uint8)
    pairs = np.zeros((len(body), 2), dtype=np.int64)
    responses = np.zeros(len(body), dtype=np.int64)
    margins = np.zeros(len(body))
    valid = np.zeros(len(body), dtype=bool)
    for i, line in enumerate(body):
        parts = line.split("\t")
        if len(parts) != len(COLUMNS) or len(parts[0]) != config.rows:
            raise DatasetFormatError(f"{path}:{pos + 2 + i}: malformed record")
        row_bits[i] = np.frombuffer(parts[0].encode(), dtype=np.uint8) - ord("0")
        pairs[i] = int(parts[1]), int(parts[2])
        responses[i] = int(parts[3])
        margins[i] = float(parts[4])
        valid[i] = parts[5] == "1"
    if row_bits.size and row_bits.max() > 1:
        raise DatasetFormatError(f"{path}: row bits must be 0/1")
    return Dataset(config, device_seed, env, policy, challenge_seed, row_bits, pairs,
                   responses, margins, valid, meta=header)


def same_records(a: Dataset, b: Dataset, margin_tol: float = 5e-7) -> bool:
    return (np.array_equal(a.row_bits, b.row_bits) and np.array_equal(a.pairs, b.pairs)
            and np.array_equal(a.responses, b.responses) and np.array_equal(a.valid, b.valid)
            and bool(np.all(np.abs(a.margins - b.margins) <= margin_tol)))


def with_meta(dataset: Dataset, **meta) -> Dataset:
    return replace(dataset, meta={**dataset.meta, **meta})
