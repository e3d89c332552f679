"""Design-space sweeps over (N, theta, A, B, v_ctrl) and figure/table CSV emission."""

from __future__ import annotations

import csv
import io
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .attacks import AttackReport, ModelKind, cross_validate, learning_curve, make_hyper
from .core import (FixedFinalPair, PairPolicy, RandomizedAnyPair, RnnConfig, generate_dataset)
from .datafile import atomic_write_text
from .device import ComparatorMode, DeviceInstance, Environment, MismatchParams, sample_device
from .reliability import (ReliabilityReport, r_lower_bound, r_model, reliability_report,
                          reliability_stats, secure_space)

log = logging.getLogger(__name__)

FOM_NOTE = "fom = reliability - best_mlaa (reliability first; larger is better)"

# the "Trees" row of the bias table reports the stronger of the two ensembles
TABLE1_ROWS = (("Deep NN", ("mlp",)), ("Linear SVM", ("linear",)), ("Bag/Boost Trees", ("bagged", "boosted")))


def fom(reliability: float, mlaa: float) -> float:
    """Figure of merit: how far reliability sits above attack accuracy."""
    for name, value in (("reliability", reliability), ("mlaa", mlaa)):
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"{name} {value} outside [0, 1]")
    return reliability - mlaa


@dataclass
class SweepSpec:
    base: RnnConfig
    n_values: list = field(default_factory=list)
    theta_values: list = field(default_factory=list)
    col_values: list = field(default_factory=list)
    row_values: list = field(default_factory=list)
    vctrl_values: list = field(default_factory=list)
    n_crps: int = 25000
    attack_kinds: tuple = ("linear", "mlp", "boosted", "bagged")
    hyper: dict = field(default_factory=dict)
    folds: int = 5
    corner: Environment = field(default_factory=lambda: Environment(-45.0, noise_seed=100))
    golden: Environment = field(default_factory=Environment.golden)
    params: MismatchParams = field(default_factory=MismatchParams)
    pair_policy: PairPolicy = field(default_factory=FixedFinalPair)
    device_seed: int = 1
    challenge_seed: int = 11
    attack_seed: int = 0
    reliability_challenges: int = 5000
    trials: int = 5
    workers: int = 1

    def __post_init__(self):
        if self.n_crps < self.folds:
            raise ValueError(f"n_crps={self.n_crps} is smaller than folds={self.folds}")
        for kind in self.attack_kinds:
            ModelKind.parse(kind)


@dataclass
class SweepPoint:
    config: RnnConfig
    reliability: ReliabilityReport
    attacks: list
    best_kind: str
    best_mlaa: float
    fom: float

    def row(self) -> dict:
        cfg, rel = self.config, self.reliability
        out = {"A": cfg.rows, "B": cfg.cols, "N": cfg.feedback_width, "theta": cfg.recurrence_depth,
               "v_ctrl": cfg.v_ctrl, "reliability": f"{rel.r_empirical:.6f}",
               "r_eq3_lower": f"{rel.r_eq3_lower:.6f}", "r_eq4_model": f"{rel.r_eq4_model:.6f}",
               "r_conv": f"{rel.r_conv_used:.6f}", "r_conv_final": f"{rel.r_conv_final:.6f}",
               "discard_fraction": f"{rel.discard_fraction:.6f}"}
        for report in self.attacks:
            out[f"mlaa_{report.model_kind}"] = f"{report.mlaa:.6f}"
        out.update({"best_kind": self.best_kind, "best_mlaa": f"{self.best_mlaa:.6f}",
                    "fom": f"{self.fom:.6f}", "status": "ok", "reason": ""})
        return out


@dataclass
class SweepResult:
    name: str
    points: list = field(default_factory=list)
    # (axis values, machine-readable reason) for grid points that were not run
    skipped: list = field(default_factory=list)

    def rows(self) -> list[dict]:
        out = [p.row() for p in self.points]
        for key, reason in self.skipped:
            out.append({**key, "status": "skipped", "reason": reason})
        return out


def _config_or_reason(base: RnnConfig, **changes):
    try:
        return replace(base, **changes), None
    except ValueError as exc:
        return None, str(exc)


def evaluate_point(spec: SweepSpec, config: RnnConfig, device: DeviceInstance | None = None) -> SweepPoint:
    """Reliability at the corner plus cross-validated MLAA for every attack kind."""
    device = device or sample_device(spec.device_seed, config.rows, config.cols, spec.params)
    rel = reliability_report(device, config, spec.reliability_challenges, spec.golden, spec.corner,
                             spec.trials, challenge_seed=spec.challenge_seed + 1,
                             pair_policy=spec.pair_policy)
    data = generate_dataset(device, config, spec.n_crps, spec.pair_policy, spec.challenge_seed, spec.golden)
    if config.v_ctrl > 0:
        data = data.valid_only()
    reports = []
    for kind in spec.attack_kinds:
        hyper = make_hyper(kind, spec.hyper.get(kind), seed=spec.attack_seed)
        reports.append(cross_validate(data, kind, spec.folds, spec.attack_seed, hyper, valid_only=False))
    best = max(reports, key=lambda r: r.mlaa)
    return SweepPoint(config, rel, reports, best.model_kind, best.mlaa, fom(rel.r_empirical, best.mlaa))


def _run_grid(name: str, spec: SweepSpec, grid: list) -> SweepResult:
    result = SweepResult(name)
    runnable = []
    for key, changes in grid:
        config, reason = _config_or_reason(spec.base, **changes)
        if config is None:
            log.warning("%s: skipping %s: %s", name, key, reason)
            result.skipped.append((key, reason))
        else:
            runnable.append(config)
    if spec.workers > 1 and len(runnable) > 1:
        with ProcessPoolExecutor(spec.workers) as pool:
            result.points = list(pool.map(evaluate_point, [spec] * len(runnable), runnable))
    else:
        result.points = [evaluate_point(spec, c) for c in runnable]
    return result


def sweep_n_theta(spec: SweepSpec) -> SweepResult:
    if not spec.n_values or not spec.theta_values:
        raise ValueError("n_theta sweep needs non-empty n_values and theta_values")
    grid = [({"N": n, "theta": t}, {"feedback_width": n, "recurrence_depth": t})
            for n in spec.n_values for t in spec.theta_values]
    return _run_grid("n_theta", spec, grid)


def sweep_columns(spec: SweepSpec) -> SweepResult:
    if not spec.col_values:
        raise ValueError("columns sweep needs non-empty col_values")
    rows = spec.row_values or [spec.base.rows]
    grid = [({"A": a, "B": b}, {"rows": a, "cols": b}) for a in rows for b in spec.col_values]
    return _run_grid("columns", spec, grid)


def vctrl_curve(device: DeviceInstance, config: RnnConfig, vctrl_values, corner: Environment,
                golden: Environment | None = None, n_challenges: int = 5000, trials: int = 5,
                challenge_seed: int = 0, pair_policy: PairPolicy | None = None,
                space_sample: int = 20000) -> list[dict]:
    """Reliability against v_ctrl with both analytic curves fed by the measured R_conv."""
    values = [float(v) for v in vctrl_values]
    if not values:
        raise ValueError("vctrl_values is empty")
    if any(b < a for a, b in zip(values, values[1:])):
        raise ValueError("vctrl_values must be sorted ascending")
    golden = golden or Environment.golden()
    n, theta = config.feedback_width, config.recurrence_depth
    conv = replace(config, recurrence_depth=0)

    def conv_reliability(v):
        return reliability_stats(device, replace(conv, v_ctrl=v), n_challenges, golden, corner, trials,
                                 challenge_seed, pair_policy).reliability

    # intermediate comparisons are never filtered, so they keep the v_ctrl = 0 reliability
    r_conv = conv_reliability(0.0)
    rows = []
    for v in values:
        cfg = replace(config, v_ctrl=v)
        stats = reliability_stats(device, cfg, n_challenges, golden, corner, trials, challenge_seed, pair_policy)
        r_final = stats.reliability if theta == 0 else conv_reliability(v)
        discard, space = secure_space(device, cfg, v, space_sample, challenge_seed + 1, pair_policy, golden)
        rows.append({"v_ctrl": v, "reliability": stats.reliability, "std_error": stats.std_error,
                     "r_eq3_lower": r_lower_bound(n, theta, r_conv, r_final),
                     "r_eq4_model": r_model(n, theta, r_conv, r_final), "r_conv": r_conv,
                     "r_conv_final": r_final, "discard_fraction": discard, "secure_space": space})
    return rows


def discard_threshold(device: DeviceInstance, config: RnnConfig, target_discard: float, sample: int = 20000,
                      challenge_seed: int = 0, pair_policy: PairPolicy | None = None) -> float:
    """Smallest v_ctrl whose golden-read discard fraction reaches ``target_discard``."""
    from .core import draw_challenges, evaluate_batch

    if not 0.0 < target_discard < 1.0:
        raise ValueError("target discard must lie in (0, 1)")
    pair_policy = pair_policy or FixedFinalPair()
    row_bits, pairs = draw_challenges(sample, config.rows, config.cols, pair_policy, challenge_seed)
    out = evaluate_batch(device, row_bits, pairs, replace(config, v_ctrl=0.0), Environment.golden())
    return float(np.quantile(np.abs(out.margins), target_discard))


def reproduce_table1(device_seeds, spec: SweepSpec, pair_policy: PairPolicy | None = None) -> list[dict]:
    """MLAA of each attacker with per-column biased vs offset-cancelled comparators.

    Rows are averaged over ``device_seeds``. The conventional PUF (theta=0)
    is attacked with the final pair randomized per challenge.
    """
    device_seeds = list(device_seeds)
    if not device_seeds:
        raise ValueError("need at least one device seed")
    pair_policy = pair_policy or RandomizedAnyPair()
    kinds = sorted({k for _, ks in TABLE1_ROWS for k in ks})
    acc = {(mode, k): [] for mode in ComparatorMode for k in kinds}
    for seed in device_seeds:
        device = sample_device(seed, spec.base.rows, spec.base.cols, spec.params)
        for mode in ComparatorMode:
            config = replace(spec.base, recurrence_depth=0, comparator=mode, v_ctrl=0.0)
            data = generate_dataset(device, config, spec.n_crps, pair_policy, spec.challenge_seed, spec.golden)
            for kind in kinds:
                hyper = make_hyper(kind, spec.hyper.get(kind), seed=spec.attack_seed)
                report = cross_validate(data, kind, spec.folds, spec.attack_seed, hyper)
                log.info("table1 seed=%d %s %s mlaa=%.4f", seed, mode.value, kind, report.mlaa)
                acc[(mode, kind)].append(report.mlaa)
    table = []
    for label, ks in TABLE1_ROWS:
        row = {"attacker": label}
        for mode, col in ((ComparatorMode.PER_COLUMN_BIASED, "biased"),
                          (ComparatorMode.SHARED_OFFSET_CANCELLED, "unbiased")):
            means = {k: float(np.mean(acc[(mode, k)])) for k in ks}
            best = max(means, key=means.get)
            row[col] = means[best]
            row[f"{col}_kind"] = best
        table.append(row)
    return table


def conventional_learning_curve(spec: SweepSpec, train_sizes, test_size: int = 10000) -> list[dict]:
    """Linear attack accuracy vs. training CRPs on a fixed-pair conventional PUF."""
    config = replace(spec.base, recurrence_depth=0, v_ctrl=0.0)
    device = sample_device(spec.device_seed, config.rows, config.cols, spec.params)
    n = max(train_sizes) + test_size
    data = generate_dataset(device, config, n, FixedFinalPair(), spec.challenge_seed, spec.golden)
    hyper = make_hyper("linear", spec.hyper.get("linear"), seed=spec.attack_seed)
    curve = learning_curve(data, "linear", train_sizes, spec.attack_seed, hyper, test_size=test_size)
    return [{"n_train": size, "accuracy": accuracy} for size, accuracy in curve]


def format_csv(rows: list[dict], comments: list[str], fieldnames: list | None = None) -> str:
    if fieldnames is None:
        fieldnames = []
        for row in rows:
            fieldnames.extend(k for k in row if k not in fieldnames)
    buf = io.StringIO()
    for line in comments:
        buf.write(f"# {line}\n")
    writer = csv.DictWriter(buf, fieldnames=fieldnames, restval="", lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (f"{v:.6f}" if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()


def write_csv(path, rows: list[dict], comments: list[str], fieldnames: list | None = None) -> None:
    atomic_write_text(path, format_csv(rows, comments, fieldnames))


def write_sweep(path, result: SweepResult, title: str, extra_comments=()) -> None:
    comments = [title, FOM_NOTE, *extra_comments]
    comments += [f"skipped {key}: {reason}" for key, reason in result.skipped]
    write_csv(path, result.rows(), comments)
