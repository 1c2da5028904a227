"""Simulation and learning-based UL/DL channel calibration for massive MIMO."""

from .baselines import (
    CrbSpec,
    LinearCalibration,
    apply_linear_calibration,
    argos_calibrate,
    crb_mse,
    ls_diagonal_calibrate,
    ls_full_calibrate,
)
from .channels import (
    CalibrationDataset,
    ChannelPair,
    HardwareProfile,
    ScenarioKind,
    ScenarioSpec,
    build_dataset,
    make_scenario,
)
from .config import ExperimentConfig, load_config
from .network import Calinet, TrainConfig, predict, train
from .numerics import Rng

__version__ = "0.1.0"
