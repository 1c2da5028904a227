"""Linear UL-to-DL calibration estimators and a lower bound on their MSE.

Every estimator returns a :class:`LinearCalibration` describing the map
``h_DL^(n) = a_n * h_UL^(n)^T @ B`` where ``B`` is either a full ``M x M``
matrix or ``diag(d)``. The scale pair ``(a, B)`` is only identifiable up to a
common complex factor; predictions are not affected by that ambiguity.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .channels import CalibrationDataset
from .errors import DegenerateAntennaError, IllConditionedError, InvalidArgumentError, ShapeError
from .numerics import snr_to_noise_variance

__all__ = [
    "LinearCalibration",
    "CrbSpec",
    "ls_diagonal_calibrate",
    "argos_calibrate",
    "ls_full_calibrate",
    "apply_linear_calibration",
    "training_residual",
    "crb_mse",
]

# complex ratios whose denominator is smaller than this are dropped by argos_calibrate
RATIO_FLOOR = 1e-9
MAX_CONDITION = 1e12


@dataclass(frozen=True, eq=False)
class LinearCalibration:
    kind: str  # "Diagonal" or "Full"
    a: np.ndarray
    d: Optional[np.ndarray] = None
    B: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind == "Diagonal":
            ok = self.d is not None and self.B is None and self.d.ndim == 1
        elif self.kind == "Full":
            ok = self.B is not None and self.d is None and self.B.ndim == 2
        else:
            raise InvalidArgumentError(f"kind must be 'Diagonal' or 'Full', got {self.kind!r}")
        if not ok:
            raise InvalidArgumentError(f"{self.kind} calibration carries the wrong fields")
        coeffs = self.d if self.kind == "Diagonal" else self.B
        if not (np.all(np.isfinite(self.a)) and np.all(np.isfinite(coeffs))):
            raise InvalidArgumentError("calibration coefficients must be finite")

    @property
    def M(self) -> int:
        return self.d.shape[0] if self.kind == "Diagonal" else self.B.shape[0]

    @property
    def N(self) -> int:
        return self.a.shape[0]


@dataclass(frozen=True)
class CrbSpec:
    """Inputs of :func:`crb_mse`.

    ``P`` counts training pairs and ``pilot_length`` the UL pilot length.
    ``dl_pilot_length`` defaults to ``M``. ``gain`` is the average DL entry
    power produced by unit-power UL channels (1 for normalized hardware).
    """

    M: int
    P: int
    snr_db: Optional[float]
    pilot_length: int
    N: int = 1
    dl_pilot_length: Optional[int] = None
    gain: float = 1.0

    def __post_init__(self):
        if min(self.M, self.P, self.pilot_length, self.N) < 1:
            raise InvalidArgumentError("M, P, N and pilot_length must be positive")
        if self.dl_pilot_length is not None and self.dl_pilot_length < 1:
            raise InvalidArgumentError("dl_pilot_length must be positive")
        if not self.gain > 0:
            raise InvalidArgumentError(f"gain must be positive, got {self.gain}")


def _stats(dataset: CalibrationDataset):
    # per (antenna, user): UL energy and UL/DL cross-correlation summed over pairs
    u = dataset.ul
    v = np.swapaxes(dataset.dl, 1, 2)
    energy = np.sum(np.abs(u) ** 2, axis=0)
    cross = np.sum(np.conj(u) * v, axis=0)
    return energy, cross


def ls_diagonal_calibrate(dataset: CalibrationDataset, max_iter: int = 2000, tol: float = 1e-14):
    """Least-squares fit of a diagonal calibration with per-user scales.

    Starts from the pooled per-antenna LS coefficient
    ``d_m = sum conj(u) v / sum |u|**2`` over pairs and users, then
    alternates 1-D LS updates of the user scales ``a_n`` and the antenna
    coefficients ``d_m``. Each update lowers the training residual
    ``sum |v - a_n d_m u|**2``, and with equal user scales (or a single
    user) the pooled start is already the minimizer.
    """
    energy, cross = _stats(dataset)
    M, N = energy.shape
    total = energy.sum(axis=1)
    for m in range(M):
        if total[m] == 0.0:
            raise DegenerateAntennaError(m + 1)
    d = cross.sum(axis=1) / total
    a = np.ones(N, dtype=np.complex128)
    if N == 1:
        return LinearCalibration("Diagonal", a, d=d)
    prev = np.outer(d, a)
    for _ in range(max_iter):
        den_a = (np.abs(d) ** 2) @ energy
        if np.any(den_a == 0.0):
            break
        a = (np.conj(d) @ cross) / den_a
        d = (cross @ np.conj(a)) / (energy @ (np.abs(a) ** 2))
        prod = np.outer(d, a)
        change = np.linalg.norm(prod - prev)
        prev = prod
        if change <= tol * max(np.linalg.norm(prod), 1e-300):
            break
    return LinearCalibration("Diagonal", a, d=d)


def argos_calibrate(dataset: CalibrationDataset, reference_antenna: int = 1):
    """Reference-antenna calibration from averaged ratios of ratios.

    For every pair and user the relative coefficient of antenna m is
    ``(v_m / u_m) / (v_ref / u_ref)``, which cancels the user's own scale.
    Ratios with a denominator modulus below ``RATIO_FLOOR`` are dropped,
    the rest are averaged, and a complex scale per user is then fitted by
    1-D least squares. ``reference_antenna`` is 1-based.
    """
    M, N = dataset.M, dataset.N
    if not 1 <= reference_antenna <= M:
        raise InvalidArgumentError(f"reference_antenna must be in [1, {M}], got {reference_antenna}")
    ref = reference_antenna - 1
    u = dataset.ul  # (P, M, N)
    v = np.swapaxes(dataset.dl, 1, 2)
    u_ref = u[:, ref : ref + 1, :]
    v_ref = v[:, ref : ref + 1, :]
    ok_ref = np.abs(u_ref) >= RATIO_FLOOR
    ref_ratio = np.where(ok_ref, v_ref / np.where(ok_ref, u_ref, 1.0), 0.0)
    valid = ok_ref & (np.abs(ref_ratio) >= RATIO_FLOOR) & (np.abs(u) >= RATIO_FLOOR)
    safe_den = np.where(valid, u * ref_ratio, 1.0)
    ratios = np.where(valid, v / safe_den, 0.0)
    counts = valid.sum(axis=(0, 2))
    for m in range(M):
        if counts[m] == 0:
            raise DegenerateAntennaError(m + 1, f"every ratio for antenna {m + 1} was excluded")
    d = ratios.sum(axis=(0, 2)) / counts
    d[ref] = 1.0
    pred = u * d[None, :, None]
    den = np.sum(np.abs(pred) ** 2, axis=(0, 1))
    a = np.where(den > 0, np.sum(np.conj(pred) * v, axis=(0, 1)) / np.where(den > 0, den, 1.0), 0.0)
    return LinearCalibration("Diagonal", a.astype(np.complex128), d=d)


def ls_full_calibrate(dataset: CalibrationDataset):
    """Full-matrix LS calibration shared by all users (``a_n = 1``).

    Solves the normal equations ``(U^H U) B = U^H V`` where the rows of U
    and V are the UL channels (transposed) and DL channels of every pair and
    user.
    """
    P, M, N = dataset.ul.shape
    U = np.swapaxes(dataset.ul, 1, 2).reshape(P * N, M)
    V = dataset.dl.reshape(P * N, M)
    gram = U.conj().T @ U
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise IllConditionedError(
            f"normal equations are ill-conditioned (cond={cond:.3g}); P*N={P * N} observations "
            f"for an M={M} calibration matrix"
        )
    B = np.linalg.solve(gram, U.conj().T @ V)
    return LinearCalibration("Full", np.ones(N, dtype=np.complex128), B=B)


def apply_linear_calibration(cal: LinearCalibration, H_UL) -> np.ndarray:
    """Predict DL channels (``N x M`` or ``(P, N, M)``) from UL channels."""
    H = np.asarray(H_UL, dtype=np.complex128)
    if H.ndim not in (2, 3) or H.shape[-2:] != (cal.M, cal.N):
        raise ShapeError(f"H_UL must end in {(cal.M, cal.N)}, got {H.shape}")
    rows = np.swapaxes(H, -1, -2)
    if cal.kind == "Full":
        return cal.a[:, None] * (rows @ cal.B)
    return cal.a[:, None] * rows * cal.d[None, :]


def training_residual(cal: LinearCalibration, dataset: CalibrationDataset) -> float:
    """Summed squared error of the calibration on its own training pairs."""
    diff = apply_linear_calibration(cal, dataset.ul) - dataset.dl
    return float(np.sum(np.abs(diff) ** 2))


def crb_mse(spec: CrbSpec) -> float:
    """Lower bound on the per-entry MSE of DL prediction.

    Genie-aided Bayesian bound for the diagonal linear model: the estimator
    is handed the true user scales and the clean training UL channels. The
    first term is the MMSE of predicting from a noisy CN(0, 1) UL estimate
    with known calibration; the second propagates the posterior variance of
    a calibration coefficient learned from ``P * N`` noisy DL observations.
    See ``docs/crb.md`` for the derivation.
    """
    noise = snr_to_noise_variance(spec.snr_db)
    if noise == 0.0:
        return 0.0
    var_ul = noise / spec.pilot_length
    var_dl = noise / (spec.dl_pilot_length or spec.M)
    prediction = spec.gain * var_ul / (1.0 + var_ul)
    calibration = 1.0 / ((1.0 + var_ul) * (1.0 / spec.gain + spec.P * spec.N / var_dl))
    return prediction + calibration
