"""Monte Carlo drivers that regenerate the four result figures as tables.

Randomness is addressed by ``(master_seed, trial, role)``: the scenario
draw, the channels and the noise of trial ``t`` come from fixed sub-streams,
so every SNR of a sweep sees the same channels (only the noise scale
changes) and trials can run in any order or in parallel without changing
the averages. Evaluation MSE is per complex entry against the noiseless DL
channels of the held-out split.
"""

from __future__ import annotations

import io
import math
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .baselines import (
    CrbSpec,
    apply_linear_calibration,
    argos_calibrate,
    crb_mse,
    ls_diagonal_calibrate,
    ls_full_calibrate,
)
from .channels import CalibrationDataset, ScenarioKind, build_dataset, concat_datasets, make_scenario
from .config import LINEAR_KINDS, ExperimentConfig
from .errors import ConfigError, InvalidArgumentError
from .formats import fmt_real
from .network import TrainHistory, predict, split_indices, train
from .numerics import Rng, mse_between

logger = logging.getLogger(__name__)

METHOD_LABELS = {
    "dnn": "DNN",
    "argos": "Argos",
    "ls_diag": "LS-diag (NPC-class)",
    "ls_full": "LS-full",
    "crb": "CRB",
}
NONLINEAR_SUITE = (ScenarioKind.LINEAR_SYNTHETIC, ScenarioKind.TANH, ScenarioKind.POWER)
REPORT_HEADER = "scenario,method,snr_db,mse,trials,seed"


@dataclass(frozen=True)
class ReportRow:
    scenario: str
    method: str
    snr_db: float
    mse: float
    trials: int
    seed: int


@dataclass
class MseReport:
    rows: list[ReportRow] = field(default_factory=list)

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write(REPORT_HEADER + "\n")
        for r in self.rows:
            out.write(f"{r.scenario},{r.method},{fmt_real(r.snr_db)},{fmt_real(r.mse)},{r.trials},{r.seed}\n")
        return out.getvalue()

    def write(self, path):
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())

    def series(self, method: str, scenario: Optional[str] = None) -> tuple[np.ndarray, np.ndarray]:
        """SNR grid and MSE values of one curve, ordered by SNR."""
        label = METHOD_LABELS.get(method, method)
        sel = [r for r in self.rows if r.method == label and (scenario is None or r.scenario == scenario)]
        sel.sort(key=lambda r: r.snr_db)
        return np.array([r.snr_db for r in sel]), np.array([r.mse for r in sel])


def _noise_snr(snr_db: float):
    """Grid value to dataset SNR; ``inf`` means noiseless."""
    return None if math.isinf(snr_db) else snr_db


def _trial_seed(config: ExperimentConfig, trial: int) -> int:
    return int(Rng(config.master_seed).child(trial, "train-seed").generator.integers(0, 2**63))


def _check_methods(config: ExperimentConfig, kind: ScenarioKind):
    baselines = {"argos", "ls_diag", "ls_full"} & set(config.methods)
    if "crb" in config.methods and kind not in LINEAR_KINDS:
        raise ConfigError(f"methods: the CRB row needs a linear scenario, not {kind.value}")
    if config.strict and baselines and kind is not ScenarioKind.LINEAR_TDD:
        raise ConfigError(
            f"methods: {','.join(sorted(baselines))} assume the linear TDD model; "
            f"strict mode forbids them on {kind.value}"
        )


def _datasets(config: ExperimentConfig, scenario, trial: int, snr_db) -> tuple[CalibrationDataset, CalibrationDataset]:
    """Training source and evaluation dataset for one sweep cell."""
    root = Rng(config.master_seed).child(trial)
    kwargs = dict(ul_pilot_length=config.ul_pilot_length, dl_pilot_length=config.dl_pilot_length)
    evaluation = build_dataset(root.child("data"), scenario, config.P, _noise_snr(snr_db), **kwargs)
    if config.train_snr_db is None:
        return evaluation, evaluation
    training = build_dataset(root.child("data"), scenario, config.P, _noise_snr(config.train_snr_db), **kwargs)
    return training, evaluation


def _mixed_training_set(config: ExperimentConfig, scenario, trial: int) -> CalibrationDataset:
    root = Rng(config.master_seed).child(trial, "mixed")
    share = max(config.P // len(config.snr_grid_db), 1)
    parts = [
        build_dataset(
            root.child(i), scenario, share, _noise_snr(snr),
            ul_pilot_length=config.ul_pilot_length, dl_pilot_length=config.dl_pilot_length,
        )
        for i, snr in enumerate(config.snr_grid_db)
    ]
    return concat_datasets(parts)


def _fit_baseline(method: str, data: CalibrationDataset, config: ExperimentConfig):
    if method == "argos":
        return argos_calibrate(data, config.reference_antenna)
    if method == "ls_diag":
        return ls_diagonal_calibrate(data)
    return ls_full_calibrate(data)


def sweep_trial(config: ExperimentConfig, trial: int) -> dict[tuple[str, int], float]:
    """All ``(method, snr index) -> MSE`` cells of one Monte Carlo trial."""
    kind = config.kind
    root = Rng(config.master_seed)
    scenario = make_scenario(
        root.child(trial, "scenario"), kind, config.M, config.N,
        crosstalk_level=config.crosstalk_level, normalize=config.normalize_hardware,
        tanh_mode=config.tanh_mode,
    )
    tconfig = config.train_config(_trial_seed(config, trial))
    train_idx, test_idx = split_indices(config.P, config.validation_fraction, Rng(tconfig.seed).child("split"))
    learned = [m for m in config.methods if m != "crb"]

    fitted = {}
    if config.train_once_mixed_snr:
        mixed = _mixed_training_set(config, scenario, trial)
        mixed_idx, _ = split_indices(mixed.P, config.validation_fraction, Rng(tconfig.seed).child("split"))
        for m in learned:
            fitted[m] = train(mixed, tconfig)[0] if m == "dnn" else _fit_baseline(m, mixed.subset(mixed_idx), config)

    cells = {}
    for i, snr in enumerate(config.snr_grid_db):
        training, evaluation = _datasets(config, scenario, trial, snr)
        test = evaluation.subset(test_idx)
        for m in learned:
            if config.train_once_mixed_snr:
                model = fitted[m]
            elif m == "dnn":
                model = train(training, tconfig)[0]
            else:
                model = _fit_baseline(m, training.subset(train_idx), config)
            pred = predict(model, test.ul) if m == "dnn" else apply_linear_calibration(model, test.ul)
            cells[(m, i)] = mse_between(pred, test.truth_dl)
        if "crb" in config.methods:
            spec = CrbSpec(
                M=config.M, P=len(train_idx), snr_db=_noise_snr(snr),
                pilot_length=config.ul_pilot_length or config.N, N=config.N,
                dl_pilot_length=config.dl_pilot_length or config.M, gain=scenario.linear_gain(),
            )
            cells[("crb", i)] = crb_mse(spec)
    return cells


def _run_trials(fn, config: ExperimentConfig, trials: Sequence[int]) -> dict[int, dict]:
    if config.workers > 1 and len(trials) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(fn, [config] * len(trials), trials))
    else:
        results = []
        for t in trials:
            results.append(fn(config, t))
            logger.info("trial %d done", t)
    return dict(zip(trials, results))


def reduce_trials(per_trial: dict[int, dict]) -> dict:
    """Average trial results, always summing in trial-index order."""
    order = sorted(per_trial)
    keys = per_trial[order[0]].keys()
    out = {}
    for key in keys:
        total = 0.0
        for t in order:
            total += per_trial[t][key]
        out[key] = total / len(order)
    return out


def run_snr_sweep(config: ExperimentConfig, trial_order: Optional[Sequence[int]] = None) -> MseReport:
    """MSE versus SNR for every requested method, averaged over trials.

    ``trial_order`` only changes the execution order; the averages do not
    depend on it.
    """
    _check_methods(config, config.kind)
    order = list(range(config.trials)) if trial_order is None else list(trial_order)
    if sorted(order) != list(range(config.trials)):
        raise InvalidArgumentError("trial_order must be a permutation of range(trials)")
    means = reduce_trials(_run_trials(sweep_trial, config, order))
    rows = []
    for i, snr in enumerate(config.snr_grid_db):
        for m in config.methods:
            rows.append(ReportRow(config.scenario, METHOD_LABELS[m], snr, means[(m, i)], config.trials, config.master_seed))
    return MseReport(rows)


def run_training_convergence(config: ExperimentConfig, snr_list: Sequence[float]) -> dict[float, TrainHistory]:
    """Train one Calinet per SNR on trial 0's channels with a shared seed."""
    if "dnn" not in config.methods:
        raise ConfigError("methods: convergence runs need dnn")
    if not snr_list:
        raise ConfigError("at least one SNR is needed")
    root = Rng(config.master_seed)
    scenario = make_scenario(
        root.child(0, "scenario"), config.kind, config.M, config.N,
        crosstalk_level=config.crosstalk_level, normalize=config.normalize_hardware,
        tanh_mode=config.tanh_mode,
    )
    tconfig = config.train_config(_trial_seed(config, 0))
    histories = {}
    for snr in snr_list:
        data = build_dataset(
            root.child(0, "data"), scenario, config.P, _noise_snr(float(snr)),
            ul_pilot_length=config.ul_pilot_length, dl_pilot_length=config.dl_pilot_length,
        )
        histories[float(snr)] = train(data, tconfig)[1]
        logger.info("converge: %s dB done", snr)
    return histories


def convergence_csv(histories: dict[float, TrainHistory]) -> str:
    out = io.StringIO()
    out.write("snr_db,epoch,train_mse,val_mse\n")
    for snr, hist in histories.items():
        for r in hist.records:
            out.write(f"{fmt_real(snr)},{r.epoch},{fmt_real(r.train_mse)},{fmt_real(r.val_mse)}\n")
    return out.getvalue()


def nonlinear_trial(config: ExperimentConfig, trial: int) -> dict[tuple[str, int], float]:
    root = Rng(config.master_seed)
    tconfig = config.train_config(_trial_seed(config, trial))
    _, test_idx = split_indices(config.P, config.validation_fraction, Rng(tconfig.seed).child("split"))
    cells = {}
    for kind in NONLINEAR_SUITE:
        # same sub-stream for every kind, so c and D are shared across scenarios
        scenario = make_scenario(root.child(trial, "scenario"), kind, config.M, config.N, tanh_mode=config.tanh_mode)
        for i, snr in enumerate(config.snr_grid_db):
            training, evaluation = _datasets(config, scenario, trial, snr)
            model = train(training, tconfig)[0]
            test = evaluation.subset(test_idx)
            cells[(kind.value, i)] = mse_between(predict(model, test.ul), test.truth_dl)
    return cells


def run_nonlinear_suite(config: ExperimentConfig) -> MseReport:
    """DNN MSE versus SNR for the linear, tanh-type and power-type scenarios."""
    if "dnn" not in config.methods:
        raise ConfigError("methods: the scenario suite needs dnn")
    means = reduce_trials(_run_trials(nonlinear_trial, config, list(range(config.trials))))
    rows = []
    for kind in NONLINEAR_SUITE:
        for i, snr in enumerate(config.snr_grid_db):
            rows.append(ReportRow(kind.value, METHOD_LABELS["dnn"], snr, means[(kind.value, i)], config.trials, config.master_seed))
    return MseReport(rows)


@dataclass(frozen=True)
class TraceRow:
    sample: int
    actual_sq_modulus: float
    predicted_sq_modulus: float


def run_coefficient_trace(
    config: ExperimentConfig,
    bs_antenna: int = 2,
    user: int = 3,
    num_samples: int = 50,
    snr_db: float = 20.0,
) -> list[TraceRow]:
    """Actual and predicted ``|h_DL|**2`` of one coefficient on held-out samples.

    Uses the TanhType scenario; ``bs_antenna`` and ``user`` are 1-based.
    Only the requested user's network is trained.
    """
    if not 1 <= bs_antenna <= config.M:
        raise InvalidArgumentError(f"bs_antenna must be in [1, {config.M}], got {bs_antenna}")
    if not 1 <= user <= config.N:
        raise InvalidArgumentError(f"user must be in [1, {config.N}], got {user}")
    root = Rng(config.master_seed)
    scenario = make_scenario(root.child(0, "scenario"), ScenarioKind.TANH, config.M, config.N, tanh_mode=config.tanh_mode)
    data = build_dataset(
        root.child(0, "data"), scenario, config.P, _noise_snr(snr_db),
        ul_pilot_length=config.ul_pilot_length, dl_pilot_length=config.dl_pilot_length,
    )
    tconfig = config.train_config(_trial_seed(config, 0))
    _, test_idx = split_indices(config.P, config.validation_fraction, Rng(tconfig.seed).child("split"))
    if not 1 <= num_samples <= len(test_idx):
        raise InvalidArgumentError(f"num_samples must be in [1, {len(test_idx)}], got {num_samples}")
    users = None if config.dnn_mode == "joint" else [user - 1]
    model, _ = train(data, tconfig, users=users)
    test = data.subset(test_idx[:num_samples])
    pred = predict(model, test.ul, users=users)
    actual = np.abs(test.truth_dl[:, user - 1, bs_antenna - 1]) ** 2
    guess = np.abs(pred[:, user - 1, bs_antenna - 1]) ** 2
    return [TraceRow(k + 1, float(a), float(g)) for k, (a, g) in enumerate(zip(actual, guess))]


def trace_csv(rows: Sequence[TraceRow]) -> str:
    out = io.StringIO()
    out.write("sample,actual_sq_modulus,predicted_sq_modulus\n")
    for r in rows:
        out.write(f"{r.sample},{fmt_real(r.actual_sq_modulus)},{fmt_real(r.predicted_sq_modulus)}\n")
    return out.getvalue()
