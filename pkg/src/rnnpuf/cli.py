"""Command-line front end: generate, attack, reliability, explore, calibrate.

Exit status is 0 on success, 1 for usage or configuration errors and 2 for
runtime failures.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

from . import config as cfgmod
from .attacks import AttackReport, ModelKind, cross_validate, make_hyper
from .core import generate_dataset
from .datafile import DatasetFormatError, atomic_write_text, read_dataset, write_dataset
from .device import CalibrationError, calibrate_noise, sample_device
from .explore import (FOM_NOTE, SweepSpec, conventional_learning_curve, reproduce_table1,
                      sweep_columns, sweep_n_theta, vctrl_curve, write_csv, write_sweep)
from .reliability import reliability_report

log = logging.getLogger("rnnpuf")

SWEEPS = {
    "n_theta": "fig7.csv",
    "columns": "fig9a.csv",
    "vctrl": "fig9c.csv",
    "vctrl_conventional": "fig2.csv",
    "learning_curve": "fig3.csv",
    "table1": "table1.csv",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _provenance(cfg, command: str) -> list[str]:
    return [f"rnnpuf {command}", f"config_hash={cfg.hash()}"]


def _out_dir(args, cfg) -> Path:
    out = Path(args.out or cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_generate(args, cfg) -> int:
    config = cfg.rnn_config()
    device = sample_device(cfg.device.seed, config.rows, config.cols, cfg.params())
    data = generate_dataset(device, config, cfg.attack.n_crps, cfg.pair_policy(), cfg.attack.challenge_seed,
                            cfg.golden_env())
    path = Path(args.dataset) if args.dataset else _out_dir(args, cfg) / "dataset.tsv"
    write_dataset(path, data, {"config_hash": cfg.hash()})
    print(f"wrote {path}")
    print(f"records={len(data)} valid_fraction={data.valid_fraction:.6f} ones_fraction={data.ones_fraction:.6f}")
    return 0


def _check_header(data, cfg):
    config = cfg.rnn_config()
    have, want = data.config, config
    for name in ("rows", "cols", "feedback_width", "recurrence_depth", "comparator"):
        if getattr(have, name) != getattr(want, name):
            raise UsageError(f"dataset {name}={getattr(have, name)} does not match config "
                             f"{name}={getattr(want, name)}")


def cmd_attack(args, cfg) -> int:
    if not args.dataset:
        raise UsageError("attack needs --dataset PATH")
    data = read_dataset(args.dataset)
    _check_header(data, cfg)
    v_ctrl = cfg.puf.v_ctrl
    if v_ctrl != data.config.v_ctrl:
        # re-threshold the stored margins at the configured v_ctrl
        data = replace(data, valid=abs(data.margins) > v_ctrl, config=replace(data.config, v_ctrl=v_ctrl))
    valid_only = cfg.valid_only()
    if valid_only is None:
        valid_only = v_ctrl > 0
    if valid_only and v_ctrl > 0 and data.valid.all():
        log.warning("every record is valid at v_ctrl=%g; valid-only filtering is a no-op", v_ctrl)
    reports = []
    for kind in cfg.attack.kinds:
        hyper = make_hyper(kind, cfg.attack.hyper.get(ModelKind.parse(kind).value), seed=cfg.attack.seed)
        report = cross_validate(data, kind, cfg.attack.folds, cfg.attack.seed, hyper, valid_only,
                                cfg.attack.pair_encoding)
        print(f"{report.model_kind}: mlaa={report.mlaa:.4f} folds={len(report.fold_accuracies)} "
              f"train_seconds={report.train_seconds:.1f}")
        reports.append(report)
    path = _out_dir(args, cfg) / "attack.csv"
    comments = _provenance(cfg, "attack") + [f"dataset={args.dataset}"]
    write_csv(path, [r.csv_row() for r in reports], comments, list(AttackReport.CSV_FIELDS))
    print(f"wrote {path}")
    return 0


def cmd_reliability(args, cfg) -> int:
    config = cfg.rnn_config()
    device = sample_device(cfg.device.seed, config.rows, config.cols, cfg.params())
    rc = cfg.reliability
    report = reliability_report(device, config, rc.challenges, cfg.golden_env(), cfg.corner_env(), rc.trials,
                                rc.challenge_seed, cfg.pair_policy(), rc.space_sample)
    lines = [f"# {line}" for line in _provenance(cfg, "reliability")] + report.to_lines()
    path = _out_dir(args, cfg) / "reliability.txt"
    atomic_write_text(path, "\n".join(lines) + "\n")
    print("\n".join(report.to_lines()))
    print(f"wrote {path}")
    return 0


def _sweep_spec(cfg, threads: int) -> SweepSpec:
    sw = cfg.sweep
    return SweepSpec(base=cfg.rnn_config(), n_values=list(sw.n_values), theta_values=list(sw.theta_values),
                     col_values=list(sw.col_values), row_values=list(sw.row_values),
                     vctrl_values=list(sw.vctrl_values), n_crps=sw.n_crps, attack_kinds=tuple(cfg.attack.kinds),
                     hyper={ModelKind.parse(k).value: v for k, v in cfg.attack.hyper.items()},
                     folds=cfg.attack.folds, corner=cfg.corner_env(), golden=cfg.golden_env(),
                     params=cfg.params(), pair_policy=cfg.pair_policy(), device_seed=cfg.device.seed,
                     challenge_seed=cfg.attack.challenge_seed, attack_seed=cfg.attack.seed,
                     reliability_challenges=cfg.reliability.challenges, trials=cfg.reliability.trials,
                     workers=threads)


def _require(values, name):
    if not values:
        raise UsageError(f"sweep axis {name} is empty")


def cmd_explore(args, cfg) -> int:
    names = cfg.sweep.names
    if not names:
        raise UsageError("sweep.names is empty; choose from " + ", ".join(SWEEPS))
    unknown = [n for n in names if n not in SWEEPS]
    if unknown:
        raise UsageError(f"unknown sweep name(s) {unknown}; choose from {', '.join(SWEEPS)}")
    # validate every requested sweep before running any of them
    axes = {"n_theta": ("n_values", "theta_values"), "columns": ("col_values",), "vctrl": ("vctrl_values",),
            "vctrl_conventional": ("vctrl_values",), "learning_curve": ("train_sizes",),
            "table1": ("device_seeds",)}
    for name in names:
        for axis in axes[name]:
            _require(getattr(cfg.sweep, axis), f"sweep.{axis}")
    threads = args.threads if args.threads and args.threads > 0 else (os.cpu_count() or 1)
    spec = _sweep_spec(cfg, threads)
    out = _out_dir(args, cfg)
    prov = _provenance(cfg, "explore")
    for name in names:
        path = out / SWEEPS[name]
        start = time.perf_counter()
        if name == "n_theta":
            write_sweep(path, sweep_n_theta(spec), "RNN-PUF figure of merit over feedback width N and depth theta",
                        prov)
        elif name == "columns":
            write_sweep(path, sweep_columns(spec), "Column count vs. MLAA, reliability and figure of merit", prov)
        elif name in ("vctrl", "vctrl_conventional"):
            config = spec.base if name == "vctrl" else replace(spec.base, recurrence_depth=0)
            device = sample_device(cfg.device.seed, config.rows, config.cols, cfg.params())
            rows = vctrl_curve(device, config, sorted(cfg.sweep.vctrl_values), spec.corner, spec.golden,
                               cfg.reliability.challenges, cfg.reliability.trials, cfg.reliability.challenge_seed,
                               spec.pair_policy, cfg.reliability.space_sample)
            title = ("Reliability vs. v_ctrl with lower-bound and model overlays" if name == "vctrl"
                     else "Conventional PUF reliability vs. v_ctrl")
            write_csv(path, rows, [title, *prov])
        elif name == "learning_curve":
            rows = conventional_learning_curve(spec, cfg.sweep.train_sizes)
            write_csv(path, rows, ["Linear attack accuracy vs. training CRPs, fixed column pair", *prov])
        elif name == "table1":
            table_spec = replace(spec, n_crps=cfg.attack.n_crps)
            rows = reproduce_table1(cfg.sweep.device_seeds, table_spec)
            write_csv(path, rows, ["Attack accuracy with and without per-column comparator bias",
                                   "Bag/Boost Trees reports the stronger ensemble", FOM_NOTE, *prov])
        print(f"wrote {path} ({time.perf_counter() - start:.1f} s)")
    return 0


def cmd_calibrate(args, cfg) -> int:
    config = replace(cfg.rnn_config(), recurrence_depth=0, v_ctrl=0.0)
    rc = cfg.reliability
    params = calibrate_noise(rc.target, config, cfg.corner_env(), cfg.params(), budget=rc.challenges,
                             trials=rc.trials, tol=rc.calibration_tol, device_seed=cfg.device.seed,
                             golden_env=cfg.golden_env())
    lines = [f"sigma_tempco={params.sigma_tempco!r}", f"sigma_noise={params.sigma_noise!r}"]
    path = _out_dir(args, cfg) / "calibration.txt"
    atomic_write_text(path, "\n".join([f"# {line}" for line in _provenance(cfg, "calibrate")] + lines) + "\n")
    print("\n".join(lines))
    print(f"wrote {path}")
    return 0


COMMANDS = {
    "generate": (cmd_generate, "simulate a device and write a CRP dataset"),
    "attack": (cmd_attack, "cross-validate the configured attackers on a dataset"),
    "reliability": (cmd_reliability, "empirical reliability next to the analytic curves"),
    "explore": (cmd_explore, "run the sweeps named in the config and write CSVs"),
    "calibrate": (cmd_calibrate, "fit tempco/noise so the conventional PUF hits the target reliability"),
}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="YAML experiment config (defaults apply when omitted)")
    common.add_argument("--out", help="output directory (overrides the config's output)")
    common.add_argument("--seed", type=int, help="override device, challenge and attack seeds")
    common.add_argument("--threads", type=int, default=1, help="sweep worker processes; 0 = one per CPU")
    common.add_argument("-v", "--verbose", action="store_true")
    parser = _Parser(prog="rnnpuf", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, parents=[common])
        if name in ("generate", "attack"):
            p.add_argument("--dataset", help="dataset file path (generate: output, attack: input)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = cfgmod.load(args.config) if args.config else cfgmod.validate(cfgmod.ExperimentConfig())
        if args.seed is not None:
            cfg.override_seed(args.seed)
        if args.threads is not None and args.threads < 0:
            raise UsageError("--threads must be >= 0")
        return COMMANDS[args.command][0](args, cfg)
    except (cfgmod.ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DatasetFormatError, CalibrationError, OSError, ValueError, ArithmeticError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
