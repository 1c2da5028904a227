"""
Learning the UL-to-DL map with Calinet
======================================

A small per-user network is trained on a nonlinear (tanh-type) scenario,
where no linear calibration can be exact. Training and validation MSE are
printed every few epochs, and the final predictions are compared with the
best linear fit.
"""

import numpy as np

from mimocal.baselines import apply_linear_calibration, ls_full_calibrate
from mimocal.channels import build_dataset, make_scenario
from mimocal.network import TrainConfig, predict, split_indices, train
from mimocal.numerics import Rng, mse_between

M, N, P = 8, 2, 1000
rng = Rng(11)
scenario = make_scenario(rng.child("scenario"), "TanhType", M, N)
data = build_dataset(rng.child("data"), scenario, P, snr_db=25.0)

config = TrainConfig(epochs=60, hidden_dims=(64, 64, 64), batch_size=8, learning_rate=0.01, seed=1)
model, history = train(data, config)
for rec in history.records[::10] + history.records[-1:]:
    print(f"epoch {rec.epoch:3d}  train {rec.train_mse:.4f}  val {rec.val_mse:.4f}")

# score on the same held-out split the trainer used
train_idx, test_idx = split_indices(P, config.validation_fraction, Rng(config.seed).child("split"))
test = data.subset(test_idx)
dnn = mse_between(predict(model, test.ul), test.truth_dl)
linear = mse_between(apply_linear_calibration(ls_full_calibrate(data.subset(train_idx)), test.ul), test.truth_dl)
print(f"held-out MSE: Calinet {dnn:.4f}, LS-full {linear:.4f}")

# one coefficient, sample by sample
n, m = 1, 0
actual = np.abs(test.truth_dl[:8, n, m]) ** 2
guess = np.abs(predict(model, test.ul[:8])[:, n, m]) ** 2
for a, g in zip(actual, guess):
    print(f"|h|^2 actual {a:6.3f}   predicted {g:6.3f}")
