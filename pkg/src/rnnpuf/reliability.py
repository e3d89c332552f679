"""Reliability: analytic XOR/cascade composition and golden-vs-corner Monte Carlo."""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace

import numpy as np

from .core import (Dataset, PairPolicy, RandomizedFinalPair, RnnConfig, crp_space,
                   draw_challenges, evaluate_batch)
from .device import DeviceInstance, Environment


def _check_fraction(*values):
    for v in values:
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"reliability {v} outside [0, 1]")


def r_xor(r1: float, r2: float) -> float:
    """Reliability of the XOR of two independent bits."""
    _check_fraction(r1, r2)
    return r1 * r2 + (1.0 - r1) * (1.0 - r2)


def r_cascade(r1: float, r2: float) -> float:
    _check_fraction(r1, r2)
    return r1 * r2


def _check_stage_args(n, theta, r_conv, r_final):
    if n < 1 or theta < 0:
        raise ValueError(f"need N >= 1 and theta >= 0, got N={n}, theta={theta}")
    _check_fraction(r_conv)
    if r_final is not None:
        _check_fraction(r_final)
    return r_conv if r_final is None else r_final


def r_lower_bound(n: int, theta: int, r_conv: float, r_final: float | None = None) -> float:
    """Recursive lower bound: every wrong fed-back bit spoils the output.

    Intermediate comparisons have reliability ``r_conv``. ``r_final`` (default
    ``r_conv``) is the reliability of the last comparison, which differs when
    v_ctrl filters only the final bit.
    """
    r_final = _check_stage_args(n, theta, r_conv, r_final)
    if theta == 0:
        return r_final
    r = r_conv
    for _ in range(theta - 1):
        r = r ** n * r_conv
    return r ** n * r_final


def r_model(n: int, theta: int, r_conv: float, r_final: float | None = None) -> float:
    """Lower bound plus a coin-flip term for outputs that survive bad feedback."""
    r_final = _check_stage_args(n, theta, r_conv, r_final)
    if theta == 0:
        return r_final
    r = r_conv
    for cycle in range(theta):
        fed = r ** n
        r = fed * (r_final if cycle == theta - 1 else r_conv) + 0.5 * (1.0 - fed)
    return r


@dataclass(frozen=True)
class ReliabilityStats:
    reliability: float
    std_error: float
    n_challenges: int
    n_valid: int
    trials: int

    @property
    def discard_fraction(self) -> float:
        return 1.0 - self.n_valid / self.n_challenges


def reliability_stats(device: DeviceInstance, config: RnnConfig, n_challenges: int,
                      golden_env: Environment, corner_env: Environment, trials_per_corner: int = 5,
                      challenge_seed: int = 0, pair_policy: PairPolicy | None = None) -> ReliabilityStats:
    """Fraction of corner re-evaluations matching the golden response.

    Only challenges that are valid at the golden (noiseless, nominal) read are
    scored; every corner trial of such a challenge counts. Trial ``t`` uses
    noise seed ``corner_env.noise_seed + t``. The standard error treats
    challenges as the independent unit.
    """
    if n_challenges < 1 or trials_per_corner < 1:
        raise ValueError("need at least one challenge and one trial")
    pair_policy = pair_policy or RandomizedFinalPair()
    golden_env = replace(golden_env, noisy=False)
    row_bits, pairs = draw_challenges(n_challenges, config.rows, config.cols, pair_policy, challenge_seed)
    golden = evaluate_batch(device, row_bits, pairs, config, golden_env)
    keep = np.flatnonzero(golden.valid)
    if keep.size == 0:
        raise ValueError("no challenge is valid at the golden read; v_ctrl is too high")
    row_bits, pairs, ref = row_bits[keep], pairs[keep], golden.bits[keep]
    hits = np.zeros(keep.size, dtype=np.int64)
    for t in range(trials_per_corner):
        env = corner_env.with_seed(corner_env.noise_seed + t)
        hits += evaluate_batch(device, row_bits, pairs, config, env).bits == ref
    per_challenge = hits / trials_per_corner
    se = float(per_challenge.std(ddof=1) / np.sqrt(keep.size)) if keep.size > 1 else 0.0
    return ReliabilityStats(float(per_challenge.mean()), se, n_challenges, int(keep.size), trials_per_corner)


def empirical_reliability(device, config, n_challenges, golden_env, corner_env, trials_per_corner=5,
                          challenge_seed=0, pair_policy=None) -> float:
    return reliability_stats(device, config, n_challenges, golden_env, corner_env, trials_per_corner,
                             challenge_seed, pair_policy).reliability


def secure_space(device: DeviceInstance, config: RnnConfig, v_ctrl: float, sample: int,
                 challenge_seed: int = 0, pair_policy: PairPolicy | None = None,
                 golden_env: Environment | None = None) -> tuple[float, int]:
    """Monte Carlo discard fraction at the golden read and surviving CRP count."""
    if sample < 100:
        raise ValueError("secure-space estimate needs at least 100 samples")
    pair_policy = pair_policy or RandomizedFinalPair()
    golden_env = golden_env or Environment.golden()
    config = replace(config, v_ctrl=v_ctrl)
    row_bits, pairs = draw_challenges(sample, config.rows, config.cols, pair_policy, challenge_seed)
    out = evaluate_batch(device, row_bits, pairs, config, replace(golden_env, noisy=False))
    discard = 1.0 - float(out.valid.mean())
    return discard, estimate_secure_space(config.rows, config.cols, discard)


def estimate_secure_space(rows: int, cols: int, discard_fraction: float) -> int:
    # exact integer arithmetic; float only for the surviving fraction
    keep = round((1.0 - discard_fraction) * 10**9)
    return crp_space(rows, cols) * keep // 10**9


def uniformity_metrics(datasets) -> tuple[float, float | None]:
    """Ones fraction and mean pairwise inter-device fractional Hamming distance.

    ``datasets`` is one :class:`Dataset` or a list of datasets from different
    devices over identical challenges. HD is ``None`` with a single device.
    """
    if isinstance(datasets, Dataset):
        datasets = [datasets]
    if not datasets or any(len(d) == 0 for d in datasets):
        raise ValueError("uniformity needs non-empty datasets")
    ones = float(np.mean(np.concatenate([d.responses for d in datasets])))
    if len(datasets) < 2:
        return ones, None
    ref = datasets[0]
    for d in datasets[1:]:
        if not (np.array_equal(d.row_bits, ref.row_bits) and np.array_equal(d.pairs, ref.pairs)):
            raise ValueError("inter-device HD requires identical challenges")
    dists = [np.mean(datasets[i].responses != datasets[j].responses)
             for i in range(len(datasets)) for j in range(i + 1, len(datasets))]
    return ones, float(np.mean(dists))


@dataclass
class ReliabilityReport:
    r_empirical: float
    r_eq3_lower: float
    r_eq4_model: float
    r_conv_used: float
    n_challenges: int
    corner: Environment
    v_ctrl: float
    discard_fraction: float
    secure_space_estimate: int
    std_error: float = 0.0
    # conventional reliability among records passing v_ctrl (equals r_conv_used at v_ctrl = 0)
    r_conv_final: float | None = None

    def to_lines(self) -> list[str]:
        out = []
        for key, value in asdict(self).items():
            if key == "corner":
                value = ",".join(f"{k}:{v}" for k, v in value.items())
            out.append(f"{key}={value}")
        return out


def reliability_report(device: DeviceInstance, config: RnnConfig, n_challenges: int,
                       golden_env: Environment, corner_env: Environment, trials: int = 5,
                       challenge_seed: int = 0, pair_policy: PairPolicy | None = None,
                       space_sample: int = 5000) -> ReliabilityReport:
    """Empirical RNN reliability next to both analytic curves.

    The conventional reliability is measured on the same device read with
    theta=0, once unfiltered (``r_conv_used``, for the intermediate
    comparisons, which v_ctrl never filters) and once at the configured v_ctrl
    (``r_conv_final``, for the final comparison).
    """
    stats = reliability_stats(device, config, n_challenges, golden_env, corner_env, trials,
                              challenge_seed, pair_policy)
    n, theta = config.feedback_width, config.recurrence_depth
    conv = replace(config, recurrence_depth=0)
    if theta == 0:
        r_final = stats.reliability
    else:
        r_final = reliability_stats(device, conv, n_challenges, golden_env, corner_env, trials,
                                    challenge_seed, pair_policy).reliability
    if config.v_ctrl == 0:
        r_conv = r_final
    else:
        r_conv = reliability_stats(device, replace(conv, v_ctrl=0.0), n_challenges, golden_env, corner_env,
                                   trials, challenge_seed, pair_policy).reliability
    discard, space = secure_space(device, config, config.v_ctrl, max(space_sample, 100),
                                  challenge_seed + 1, pair_policy, golden_env)
    return ReliabilityReport(stats.reliability, r_lower_bound(n, theta, r_conv, r_final),
                             r_model(n, theta, r_conv, r_final), r_conv, n_challenges, corner_env,
                             config.v_ctrl, discard, space, stats.std_error, r_final)
