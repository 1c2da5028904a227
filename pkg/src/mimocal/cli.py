"""Command-line front end: ``mimocal <subcommand> [options]``.

Subcommands
-----------
sweep        MSE versus SNR of every method on the linear TDD model
converge     per-epoch training and validation MSE at several SNRs
scenarios    DNN MSE versus SNR for the three synthetic scenarios
trace        actual and predicted squared modulus of one DL coefficient
gen-dataset  write a calibration dataset in the text format
train        fit a Calinet to a dataset file and save it
predict      apply a saved Calinet to a dataset file

Exit status is 0 on success, 2 for configuration, usage or input errors and
3 for runtime or numerical failures.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import experiments
from .channels import build_dataset, make_scenario
from .config import ExperimentConfig, load_config
from .errors import ConfigError, InvalidArgumentError
from .formats import load_dataset, load_model, save_dataset, save_model
from .network import predict, train
from .numerics import Rng, mse_between

logger = logging.getLogger("mimocal")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _csv_list(text: str) -> tuple[str, ...]:
    return tuple(s.strip() for s in text.split(",") if s.strip())


def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(s) for s in _csv_list(text))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return value


def _common(p: argparse.ArgumentParser, out_default: str):
    p.add_argument("--config", help="key = value config file (omitted keys keep their defaults)")
    p.add_argument("--seed", type=_u64, help="master seed")
    p.add_argument("--out", default=None, help=f"output path (default: {out_default})")
    p.add_argument("--trials", type=int, help="Monte Carlo trials")
    p.add_argument("--methods", type=_csv_list, help="comma-separated subset of dnn,argos,ls_diag,ls_full,crb")
    p.add_argument("--workers", type=int, help="parallel worker processes")
    p.add_argument("--snr-grid", type=_float_list, dest="snr_grid_db", help="SNR grid in dB, e.g. 0,10,20")
    p.set_defaults(out_default=out_default)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mimocal",
        description="Deep-learning UL/DL channel calibration experiments for massive MIMO",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=(
            "examples:\n"
            "  mimocal sweep --trials 20 --snr-grid 0,10,20,30,40 --out sweep.csv\n"
            "  mimocal converge --snrs 20,30,40 --out curves.csv\n"
            "  mimocal gen-dataset --snr 20 --out data.txt && mimocal train --data data.txt --out net.txt\n"
        ),
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="MSE versus SNR for every method")
    _common(p, "results.csv")
    p.add_argument("--train-once-mixed-snr", action="store_true", help="train once on a mix of all grid SNRs")
    p.add_argument("--strict", action="store_true", help="refuse linear baselines on nonlinear scenarios")

    p = sub.add_parser("converge", help="training curves at several SNRs")
    _common(p, "convergence.csv")
    p.add_argument("--snrs", type=_float_list, default=(10.0, 20.0, 30.0), help="SNRs in dB (default: 10,20,30)")

    p = sub.add_parser("scenarios", help="DNN MSE versus SNR for the synthetic scenarios")
    _common(p, "scenarios.csv")

    p = sub.add_parser("trace", help="actual versus predicted |h_DL|^2 of one coefficient")
    _common(p, "trace.csv")
    p.add_argument("--antenna", type=int, default=2, help="1-based BS antenna (default: 2)")
    p.add_argument("--user", type=int, default=3, help="1-based user (default: 3)")
    p.add_argument("--samples", type=int, default=50, help="held-out samples to report (default: 50)")
    p.add_argument("--snr", type=float, default=20.0, help="operating SNR in dB (default: 20)")

    p = sub.add_parser("gen-dataset", help="write a calibration dataset")
    _common(p, "dataset.txt")
    p.add_argument("--snr", default="20", help="SNR in dB, or 'inf' for noiseless (default: 20)")

    p = sub.add_parser("train", help="train a Calinet on a dataset file")
    _common(p, "model.txt")
    p.add_argument("--data", required=True, help="dataset file")
    p.add_argument("--history", help="also write the per-epoch MSE CSV here")

    p = sub.add_parser("predict", help="predict DL channels from a dataset's UL channels")
    _common(p, "prediction.txt")
    p.add_argument("--data", required=True, help="dataset file")
    p.add_argument("--model", required=True, help="model file written by 'train'")
    return parser


def _config_from_args(args) -> ExperimentConfig:
    config = load_config(args.config) if args.config else ExperimentConfig()
    return config.with_overrides(
        master_seed=args.seed,
        trials=args.trials,
        methods=args.methods,
        workers=args.workers,
        snr_grid_db=args.snr_grid_db,
        train_once_mixed_snr=getattr(args, "train_once_mixed_snr", None) or None,
        strict=getattr(args, "strict", None) or None,
    )


def _output_path(args, config: ExperimentConfig) -> Path:
    if args.out:
        return Path(args.out)
    if args.command == "sweep":
        return Path(config.output_path)
    return Path(args.out_default)


def _write(path: Path, text: str):
    with open(path, "w", newline="") as fh:
        fh.write(text)
    logger.info("wrote %s", path)


def _parse_snr(text: str):
    if text.strip().lower() in ("inf", "none"):
        return None
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"--snr: expected a number or 'inf', got {text!r}") from None


def _run(args) -> int:
    config = _config_from_args(args)
    out = _output_path(args, config)
    cmd = args.command
    if cmd == "sweep":
        _write(out, experiments.run_snr_sweep(config).to_csv())
    elif cmd == "converge":
        histories = experiments.run_training_convergence(config, args.snrs)
        _write(out, experiments.convergence_csv(histories))
    elif cmd == "scenarios":
        _write(out, experiments.run_nonlinear_suite(config).to_csv())
    elif cmd == "trace":
        rows = experiments.run_coefficient_trace(config, args.antenna, args.user, args.samples, args.snr)
        _write(out, experiments.trace_csv(rows))
    elif cmd == "gen-dataset":
        root = Rng(config.master_seed)
        scenario = make_scenario(
            root.child(0, "scenario"), config.kind, config.M, config.N,
            crosstalk_level=config.crosstalk_level, normalize=config.normalize_hardware,
            tanh_mode=config.tanh_mode,
        )
        data = build_dataset(
            root.child(0, "data"), scenario, config.P, _parse_snr(args.snr),
            ul_pilot_length=config.ul_pilot_length, dl_pilot_length=config.dl_pilot_length,
        )
        save_dataset(data, out)
    elif cmd == "train":
        data = load_dataset(args.data)
        model, history = train(data, config.train_config(config.master_seed))
        save_model(model, out)
        if args.history:
            _write(Path(args.history), experiments.convergence_csv({float("inf") if data.snr_db is None else data.snr_db: history}))
    elif cmd == "predict":
        data = load_dataset(args.data)
        model = load_model(args.model, N=data.N)
        pred = predict(model, data.ul)
        logger.info("MSE against the file's DL channels: %.6g", mse_between(pred, data.dl))
        save_dataset(type(data)(data.ul, pred, data.kind, data.snr_db), out)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return _run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvalidArgumentError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, ArithmeticError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
