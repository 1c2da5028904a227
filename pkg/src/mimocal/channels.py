"""Channel synthesis, pilot observation and least-squares estimation.

Shape conventions follow the bidirectional link model: ``H_UL`` is
``M x N`` with one column per user, ``H_DL`` is ``N x M`` with one row per
user. Stacks of ``P`` realizations carry a leading axis, ``(P, M, N)`` and
``(P, N, M)``.

The noiseless marker for an SNR is ``None``; it never enters arithmetic.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidArgumentError, InvalidPilotError, InvalidScenarioError, ShapeError
from .numerics import (
    Rng,
    as_complex_matrix,
    complex_normal,
    random_unitary,
    sample_complex_gaussian,
    snr_to_noise_variance,
)

# a diagonal entry of R_UL or a t_UL entry below this modulus is treated as singular
MIN_RESPONSE_MODULUS = 1e-9
MAX_RESPONSE_CONDITION = 1e12


class ScenarioKind(str, enum.Enum):
    LINEAR_TDD = "LinearTdd"
    LINEAR_SYNTHETIC = "LinearSynthetic"
    TANH = "TanhType"
    POWER = "PowerType"

    @classmethod
    def parse(cls, value) -> "ScenarioKind":
        if isinstance(value, cls):
            return value
        for kind in cls:
            if str(value).lower() in (kind.value.lower(), kind.name.lower()):
                return kind
        raise InvalidScenarioError(
            f"unknown scenario kind {value!r}; expected one of {[k.value for k in cls]}"
        )

    def __str__(self):
        return self.value


@dataclass(frozen=True, eq=False)
class HardwareProfile:
    """Transceiver responses of one base station and its N users.

    ``T_DL`` and ``R_UL`` are the BS transmit and receive responses
    (``M x M``), ``r_DL`` and ``t_UL`` the per-user receive and transmit
    scalars (length ``N``).
    """

    T_DL: np.ndarray
    R_UL: np.ndarray
    r_DL: np.ndarray
    t_UL: np.ndarray
    crosstalk_level: float = 1.0

    @property
    def M(self) -> int:
        return self.T_DL.shape[0]

    @property
    def N(self) -> int:
        return self.r_DL.shape[0]

    def calibration_coefficients(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-user scales ``a = r_DL / t_UL`` and shared ``B = R_UL^{-T} T_DL``."""
        a = self.r_DL / self.t_UL
        B = np.linalg.solve(self.R_UL.T, self.T_DL)
        return a, B

    def normalized(self) -> "HardwareProfile":
        """Rescale ``T_DL`` and ``r_DL`` so the UL-to-DL map has unit gain.

        After rescaling ``|a_n| = 1`` for every user and
        ``||B||_F**2 = M``, so i.i.d. CN(0, 1) uplink channels map to
        downlink channels with unit average entry power.
        """
        a, B = self.calibration_coefficients()
        b_scale = math.sqrt(self.M) / np.linalg.norm(B)
        return replace(self, T_DL=self.T_DL * b_scale, r_DL=self.r_DL / np.abs(a))


@dataclass(frozen=True, eq=False)
class ScenarioSpec:
    """A UL-to-DL relationship: either a hardware profile or synthetic ``(c, D)``."""

    kind: ScenarioKind
    M: int
    N: int
    c: Optional[np.ndarray] = None
    D: Optional[np.ndarray] = None
    profile: Optional[HardwareProfile] = None
    tanh_mode: str = "split"

    def __post_init__(self):
        object.__setattr__(self, "kind", ScenarioKind.parse(self.kind))
        synthetic = self.kind is not ScenarioKind.LINEAR_TDD
        if synthetic:
            if self.c is None or self.D is None or self.profile is not None:
                raise InvalidScenarioError(f"{self.kind} needs c and D and no hardware profile")
            if self.c.shape != (self.N,) or self.D.shape != (self.M, self.M):
                raise InvalidScenarioError(
                    f"c must have shape ({self.N},) and D ({self.M}, {self.M}); "
                    f"got {self.c.shape} and {self.D.shape}"
                )
            err = np.max(np.abs(self.D.conj().T @ self.D - np.eye(self.M)))
            if err > 1e-10:
                raise InvalidScenarioError(f"D is not unitary (max deviation {err:.3g})")
        else:
            if self.profile is None or self.c is not None or self.D is not None:
                raise InvalidScenarioError("LinearTdd needs a hardware profile and no c or D")
            if (self.profile.M, self.profile.N) != (self.M, self.N):
                raise InvalidScenarioError(
                    f"profile is {self.profile.M}x{self.profile.N}, scenario is {self.M}x{self.N}"
                )
        if self.tanh_mode not in ("split", "complex"):
            raise InvalidScenarioError(f"tanh_mode must be 'split' or 'complex', got {self.tanh_mode!r}")

    def linear_gain(self) -> float:
        """Average DL entry power produced by unit-power UL channels (linear kinds only)."""
        if self.kind is ScenarioKind.LINEAR_TDD:
            a, B = self.profile.calibration_coefficients()
            return float(np.mean(np.abs(a) ** 2) * np.sum(np.abs(B) ** 2) / self.M)
        if self.kind is ScenarioKind.LINEAR_SYNTHETIC:
            return float(np.mean(np.abs(self.c) ** 2) * np.sum(np.abs(self.D) ** 2) / self.M)
        raise InvalidScenarioError(f"{self.kind} is not a linear scenario")


@dataclass(frozen=True, eq=False)
class ChannelPair:
    H_UL: np.ndarray
    H_DL: np.ndarray
    snr_db: Optional[float] = None  # None marks noiseless ground truth


@dataclass(frozen=True, eq=False)
class CalibrationDataset:
    """``P`` paired channel estimates stored as stacked arrays.

    ``ul`` is ``(P, M, N)`` and ``dl`` is ``(P, N, M)``. ``truth_dl`` holds
    the noiseless downlink channels when the dataset was synthesized; it is
    ``None`` for datasets read back from disk.
    """

    ul: np.ndarray
    dl: np.ndarray
    kind: ScenarioKind
    snr_db: Optional[float] = None
    truth_dl: Optional[np.ndarray] = field(default=None, compare=False)
    truth_ul: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self):
        if self.ul.ndim != 3 or self.dl.ndim != 3:
            raise ShapeError(f"expected stacked 3-D arrays, got {self.ul.shape} and {self.dl.shape}")
        P, M, N = self.ul.shape
        if P < 1:
            raise InvalidArgumentError("a dataset needs at least one pair")
        if self.dl.shape != (P, N, M):
            raise ShapeError(f"dl must have shape {(P, N, M)}, got {self.dl.shape}")
        object.__setattr__(self, "kind", ScenarioKind.parse(self.kind))

    @property
    def P(self) -> int:
        return self.ul.shape[0]

    @property
    def M(self) -> int:
        return self.ul.shape[1]

    @property
    def N(self) -> int:
        return self.ul.shape[2]

    @property
    def pairs(self) -> list[ChannelPair]:
        return [ChannelPair(self.ul[p], self.dl[p], self.snr_db) for p in range(self.P)]

    def subset(self, indices) -> "CalibrationDataset":
        idx = np.asarray(indices, dtype=np.intp)
        pick = lambda arr: None if arr is None else arr[idx]
        return CalibrationDataset(
            self.ul[idx], self.dl[idx], self.kind, self.snr_db, pick(self.truth_dl), pick(self.truth_ul)
        )


def _check_dims(M: int, N: int):
    if M < 1 or N < 1:
        raise InvalidArgumentError(f"M and N must be >= 1, got M={M}, N={N}")


def gen_hardware_profile(rng: Rng, M: int, N: int, crosstalk_level: float = 1.0) -> HardwareProfile:
    """Draw BS and user transceiver responses.

    Diagonal entries of ``T_DL`` and ``R_UL`` and all user scalars are
    CN(0, 1); off-diagonal entries are CN(0, crosstalk_level**2), so
    ``crosstalk_level=0`` gives exactly diagonal matrices. Draws whose
    receive responses are (near) singular are rejected and redrawn from the
    next attempt's sub-stream.
    """
    _check_dims(M, N)
    crosstalk_level = float(crosstalk_level)
    if not 0.0 <= crosstalk_level <= 1.0:
        raise InvalidArgumentError(f"crosstalk_level must be in [0, 1], got {crosstalk_level}")
    off = np.full((M, M), crosstalk_level)
    np.fill_diagonal(off, 1.0)
    for attempt in range(1000):
        sub = rng.child("hardware", attempt)
        T = sample_complex_gaussian(sub, M, M) * off
        R = sample_complex_gaussian(sub, M, M) * off
        r = sample_complex_gaussian(sub, 1, N)[0]
        t = sample_complex_gaussian(sub, 1, N)[0]
        if np.min(np.abs(np.diagonal(R))) <= MIN_RESPONSE_MODULUS:
            continue
        if np.min(np.abs(t)) <= MIN_RESPONSE_MODULUS:
            continue
        if np.linalg.cond(R) > MAX_RESPONSE_CONDITION:
            continue
        return HardwareProfile(T, R, r, t, crosstalk_level)
    raise InvalidArgumentError("could not draw an invertible hardware profile")  # pragma: no cover


def gen_propagation(rng: Rng, M: int, N: int) -> np.ndarray:
    """Over-the-air DL channels, one CN(0, 1) row ``c_DL^(n)`` per user (``N x M``).

    The UL over-the-air channel of user n is the transpose of row n.
    """
    _check_dims(M, N)
    return sample_complex_gaussian(rng, N, M)


def compose_baseband_tdd(profile: HardwareProfile, c: np.ndarray) -> ChannelPair:
    """Baseband channels of a reciprocal TDD link seen through the hardware.

    Row n of ``H_DL`` is ``r_DL[n] * c[n] @ T_DL`` and column n of ``H_UL``
    is ``R_UL @ c[n].T * t_UL[n]``.
    """
    c = as_complex_matrix(c, "c")
    if c.shape != (profile.N, profile.M):
        raise ShapeError(f"OTA channels must be {(profile.N, profile.M)}, got {c.shape}")
    H_DL = profile.r_DL[:, None] * (c @ profile.T_DL)
    H_UL = (profile.R_UL @ c.T) * profile.t_UL[None, :]
    return ChannelPair(H_UL, H_DL, None)


def make_scenario(
    rng: Rng,
    kind,
    M: int,
    N: int,
    crosstalk_level: float = 1.0,
    normalize: bool = True,
    tanh_mode: str = "split",
) -> ScenarioSpec:
    """Draw the random ingredients of a scenario.

    Synthetic kinds draw ``c ~ CN(0, 1)`` per user and a Haar unitary ``D``
    from the same sub-streams, so scenarios of different kinds built from
    one ``rng`` share ``c`` and ``D``. ``LinearTdd`` draws a hardware profile
    and, with ``normalize``, rescales it to unit UL-to-DL gain.
    """
    kind = ScenarioKind.parse(kind)
    _check_dims(M, N)
    if kind is ScenarioKind.LINEAR_TDD:
        profile = gen_hardware_profile(rng, M, N, crosstalk_level)
        if normalize:
            profile = profile.normalized()
        return ScenarioSpec(kind, M, N, profile=profile, tanh_mode=tanh_mode)
    c = sample_complex_gaussian(rng.child("c"), 1, N)[0]
    D = random_unitary(rng.child("D"), M)
    return ScenarioSpec(kind, M, N, c=c, D=D, tanh_mode=tanh_mode)


def _split_tanh(x: np.ndarray) -> np.ndarray:
    return np.tanh(x.real) + 1j * np.tanh(x.imag)


def apply_scenario(scenario: ScenarioSpec, H_UL) -> np.ndarray:
    """Map UL channels to DL channels under ``scenario``.

    Accepts a single ``M x N`` matrix or a ``(P, M, N)`` stack. For user n
    the DL row is ``c_n * g(h_n)^T @ D`` where ``g`` is the identity
    (LinearSynthetic), tanh (TanhType) or the entrywise square (PowerType);
    LinearTdd uses the hardware calibration coefficients ``a_n`` and ``B``.
    """
    if not isinstance(scenario, ScenarioSpec):
        raise InvalidScenarioError("expected a ScenarioSpec")
    H = np.asarray(H_UL, dtype=np.complex128)
    if H.ndim not in (2, 3) or H.shape[-2:] != (scenario.M, scenario.N):
        raise ShapeError(f"H_UL must end in {(scenario.M, scenario.N)}, got {H.shape}")
    kind = scenario.kind
    if kind is ScenarioKind.LINEAR_TDD:
        scale, mix = scenario.profile.calibration_coefficients()
        g = H
    else:
        scale, mix = scenario.c, scenario.D
        if kind is ScenarioKind.LINEAR_SYNTHETIC:
            g = H
        elif kind is ScenarioKind.TANH:
            g = _split_tanh(H) if scenario.tanh_mode == "split" else np.tanh(H)
        else:
            g = H * H
    rows = np.swapaxes(g, -1, -2)
    return scale[:, None] * (rows @ mix)


def gen_pilots(rng: Rng, dim: int, K: Optional[int] = None) -> np.ndarray:
    """Unit-modulus orthogonal pilots, ``dim x K`` with ``X @ X^H = K I``.

    Rows of a K-point DFT matrix with random per-row and per-column phase
    rotations; all phases lie in ``[-pi, pi]``.
    """
    if K is None:
        K = dim
    if dim < 1:
        raise InvalidArgumentError(f"dim must be >= 1, got {dim}")
    if K < dim:
        raise InvalidArgumentError(f"pilot length K={K} is shorter than dim={dim}")
    row_phase = rng.uniform(-np.pi, np.pi, dim)
    col_phase = rng.uniform(-np.pi, np.pi, K)
    phase = -2 * np.pi * np.outer(np.arange(dim), np.arange(K)) / K
    total = np.angle(np.exp(1j * (phase + row_phase[:, None] + col_phase[None, :])))
    return np.exp(1j * total)


def _check_pilots(x: np.ndarray, dim: int):
    if x.ndim != 2 or x.shape[0] != dim:
        raise ShapeError(f"pilots must have {dim} rows, got shape {x.shape}")
    K = x.shape[1]
    if K < dim:
        raise InvalidPilotError(f"pilot length {K} is shorter than {dim}")
    gram = x @ x.conj().T
    if np.max(np.abs(gram - K * np.eye(dim))) > 1e-9 * K:
        raise InvalidPilotError("pilot rows are not orthogonal with energy K")


def _observe(H: np.ndarray, x: np.ndarray, snr_db, rng: Optional[Rng]) -> np.ndarray:
    y = H @ x
    if snr_db is None:
        return y
    if rng is None:
        raise InvalidArgumentError("a noisy observation needs an Rng")
    noise = complex_normal(rng, y.shape) * math.sqrt(snr_to_noise_variance(snr_db))
    return y + noise


def observe_ul(H_UL, x_UL, snr_db, rng: Optional[Rng] = None) -> np.ndarray:
    """Received UL pilots ``H_UL @ x_UL + W`` with W ~ CN(0, 1/SNR) entries.

    ``snr_db=None`` gives the noiseless product.
    """
    H = np.asarray(H_UL, dtype=np.complex128)
    x = np.asarray(x_UL, dtype=np.complex128)
    _check_pilots(x, H.shape[-1])
    return _observe(H, x, snr_db, rng)


def observe_dl(H_DL, x_DL, snr_db, rng: Optional[Rng] = None) -> np.ndarray:
    """Received DL pilots at the users, ``H_DL @ x_DL + W`` (``N x K``)."""
    H = np.asarray(H_DL, dtype=np.complex128)
    x = np.asarray(x_DL, dtype=np.complex128)
    _check_pilots(x, H.shape[-1])
    return _observe(H, x, snr_db, rng)


def estimate_channel_ls(y, x) -> np.ndarray:
    """LS channel estimate ``y @ x^H / K`` for orthogonal pilots."""
    y = np.asarray(y, dtype=np.complex128)
    x = np.asarray(x, dtype=np.complex128)
    if x.ndim != 2 or y.shape[-1] != x.shape[1]:
        raise ShapeError(f"observations {y.shape} do not match pilots {x.shape}")
    return y @ x.conj().T / x.shape[1]


def build_dataset(
    rng: Rng,
    scenario: ScenarioSpec,
    P: int,
    snr_db,
    ul_pilot_length: Optional[int] = None,
    dl_pilot_length: Optional[int] = None,
) -> CalibrationDataset:
    """Synthesize ``P`` pairs of pilot-based UL/DL channel estimates.

    UL channels are drawn i.i.d. CN(0, 1), DL channels follow from
    :func:`apply_scenario`, and both directions are sounded with orthogonal
    pilots at ``snr_db`` and estimated by LS. Channels, pilots and noise
    come from separate sub-streams, so datasets at different SNRs share
    channels and differ only in the noise scale.
    """
    if P < 1:
        raise InvalidArgumentError(f"P must be >= 1, got {P}")
    M, N = scenario.M, scenario.N
    H_UL = complex_normal(rng.child("channels"), (P, M, N))
    H_DL = apply_scenario(scenario, H_UL)
    x_ul = gen_pilots(rng.child("pilots", "ul"), N, ul_pilot_length or N)
    x_dl = gen_pilots(rng.child("pilots", "dl"), M, dl_pilot_length or M)
    y_ul = observe_ul(H_UL, x_ul, snr_db, rng.child("noise", "ul"))
    y_dl = observe_dl(H_DL, x_dl, snr_db, rng.child("noise", "dl"))
    return CalibrationDataset(
        ul=estimate_channel_ls(y_ul, x_ul),
        dl=estimate_channel_ls(y_dl, x_dl),
        kind=scenario.kind,
        snr_db=snr_db,
        truth_dl=H_DL,
        truth_ul=H_UL,
    )


def concat_datasets(datasets: Sequence[CalibrationDataset]) -> CalibrationDataset:
    """Stack datasets of equal shape; the result carries the first one's SNR."""
    if not datasets:
        raise InvalidArgumentError("nothing to concatenate")
    first = datasets[0]
    truth = all(d.truth_dl is not None for d in datasets)
    return CalibrationDataset(
        np.concatenate([d.ul for d in datasets]),
        np.concatenate([d.dl for d in datasets]),
        first.kind,
        first.snr_db,
        np.concatenate([d.truth_dl for d in datasets]) if truth else None,
        np.concatenate([d.truth_ul for d in datasets]) if truth else None,
    )
