"""
Why TDD reciprocity needs calibration
=====================================

The air between a base station and a user is reciprocal, but the radios at
each end are not. This script draws one set of transceiver responses, shows
that the raw UL and DL channels disagree, and then shows that the linear
correction ``h_DL = a_n * h_UL^T @ B`` recovers the DL channel exactly.
"""

import numpy as np

from mimocal.channels import compose_baseband_tdd, gen_hardware_profile, gen_propagation
from mimocal.numerics import Rng

M, N = 8, 2
rng = Rng(2024)

# transceiver responses with full crosstalk between BS antennas
profile = gen_hardware_profile(rng.child("hardware"), M, N, crosstalk_level=1.0)
ota = gen_propagation(rng.child("ota"), M, N)
pair = compose_baseband_tdd(profile, ota)

# naive reciprocity: pretend H_DL is just H_UL transposed
naive_err = np.mean(np.abs(pair.H_DL - pair.H_UL.T) ** 2) / np.mean(np.abs(pair.H_DL) ** 2)
print(f"relative error of plain transpose: {naive_err:.3f}")

# the hardware-aware correction
a, B = profile.calibration_coefficients()
pred = a[:, None] * (pair.H_UL.T @ B)
print(f"max error after calibration:       {np.max(np.abs(pred - pair.H_DL)):.2e}")

# with no crosstalk B is diagonal, which is what per-antenna schemes assume
diag_profile = gen_hardware_profile(rng.child("diag"), M, N, crosstalk_level=0.0)
_, B_diag = diag_profile.calibration_coefficients()
off = B_diag - np.diag(np.diagonal(B_diag))
print(f"largest off-diagonal entry of B without crosstalk: {np.max(np.abs(off)):.1e}")
