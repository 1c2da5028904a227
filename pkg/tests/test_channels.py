import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mimocal.channels import (
    CalibrationDataset,
    HardwareProfile,
    ScenarioKind,
    ScenarioSpec,
    apply_scenario,
    build_dataset,
    compose_baseband_tdd,
    concat_datasets,
    estimate_channel_ls,
    gen_hardware_profile,
    gen_pilots,
    gen_propagation,
    make_scenario,
    observe_dl,
    observe_ul,
)
from mimocal.errors import InvalidArgumentError, InvalidPilotError, InvalidScenarioError, ShapeError
from mimocal.numerics import Rng, complex_normal, random_unitary


def eq7_oracle(profile, H_UL):
    """DL channels from UL channels via explicit per-user algebra (loops, inverse)."""
    M, N = H_UL.shape
    B = np.linalg.inv(profile.R_UL).T @ profile.T_DL
    out = np.empty((N, M), dtype=complex)
    for n in range(N):
        a_n = profile.r_DL[n] / profile.t_UL[n]
        out[n] = a_n * (H_UL[:, n] @ B)
    return out


class TestScenarioKind:
    @pytest.mark.parametrize("text", ["LinearTdd", "lineartdd", "linear_tdd", ScenarioKind.LINEAR_TDD])
    def test_parse(self, text):
        assert ScenarioKind.parse(text) is ScenarioKind.LINEAR_TDD

    def test_parse_unknown(self):
        with pytest.raises(InvalidArgumentError):
            ScenarioKind.parse("Cubic")


class TestHardware:
    def test_shapes_and_determinism(self):
        p1 = gen_hardware_profile(Rng(4), 6, 3)
        p2 = gen_hardware_profile(Rng(4), 6, 3)
        assert p1.T_DL.shape == (6, 6) and p1.r_DL.shape == (3,)
        np.testing.assert_array_equal(p1.R_UL, p2.R_UL)

    def test_zero_crosstalk_is_diagonal(self):
        p = gen_hardware_profile(Rng(4), 5, 2, crosstalk_level=0.0)
        for A in (p.T_DL, p.R_UL):
            np.testing.assert_array_equal(A, np.diag(np.diagonal(A)))

    def test_rejects_bad_crosstalk(self):
        with pytest.raises(InvalidArgumentError):
            gen_hardware_profile(Rng(0), 3, 1, crosstalk_level=1.5)

    def test_calibration_coefficients(self):
        p = gen_hardware_profile(Rng(9), 4, 3)
        a, B = p.calibration_coefficients()
        np.testing.assert_allclose(a, p.r_DL / p.t_UL)
        np.testing.assert_allclose(p.R_UL.T @ B, p.T_DL, atol=1e-12)

    def test_normalized_has_unit_gain(self):
        p = gen_hardware_profile(Rng(9), 8, 3).normalized()
        a, B = p.calibration_coefficients()
        np.testing.assert_allclose(np.abs(a), 1.0)
        assert np.sum(np.abs(B) ** 2) == pytest.approx(8.0)

    @given(seed=st.integers(0, 2**32), M=st.integers(1, 8), N=st.integers(1, 5))
    @settings(max_examples=50, deadline=None)
    def test_reciprocity_identity(self, seed, M, N):
        rng = Rng(seed)
        profile = gen_hardware_profile(rng.child("hw"), M, N)
        c = gen_propagation(rng.child("ota"), M, N)
        pair = compose_baseband_tdd(profile, c)
        oracle = eq7_oracle(profile, pair.H_UL)
        scale = max(1.0, np.max(np.abs(oracle)))
        assert np.max(np.abs(pair.H_DL - oracle)) < 1e-9 * scale

    def test_compose_shape_check(self):
        p = gen_hardware_profile(Rng(0), 3, 2)
        with pytest.raises(ShapeError):
            compose_baseband_tdd(p, np.ones((3, 3)))


class TestScenarios:
    def test_synthetic_kinds_share_c_and_D(self):
        specs = [make_scenario(Rng(5).child("s"), k, 6, 3) for k in ScenarioKind if k is not ScenarioKind.LINEAR_TDD]
        for s in specs[1:]:
            np.testing.assert_array_equal(s.c, specs[0].c)
            np.testing.assert_array_equal(s.D, specs[0].D)

    def test_apply_matches_definitions(self):
        M, N = 5, 3
        base = make_scenario(Rng(1), "LinearSynthetic", M, N)
        H = complex_normal(Rng(2), (M, N))
        g = {
            "LinearSynthetic": H,
            "TanhType": np.tanh(H.real) + 1j * np.tanh(H.imag),
            "PowerType": H**2,
        }
        for kind, gH in g.items():
            spec = ScenarioSpec(kind, M, N, c=base.c, D=base.D)
            expected = np.array([base.c[n] * gH[:, n] @ base.D for n in range(N)])
            np.testing.assert_allclose(apply_scenario(spec, H), expected, atol=1e-13)

    def test_complex_tanh_mode(self):
        base = make_scenario(Rng(1), "TanhType", 3, 2, tanh_mode="complex")
        H = complex_normal(Rng(2), (3, 2)) * 0.5
        expected = base.c[:, None] * (np.tanh(H).T @ base.D)
        np.testing.assert_allclose(apply_scenario(base, H), expected, atol=1e-13)

    def test_apply_stacked_equals_loop(self):
        spec = make_scenario(Rng(3), "LinearTdd", 4, 2)
        H = complex_normal(Rng(4), (6, 4, 2))
        stacked = apply_scenario(spec, H)
        for p in range(6):
            np.testing.assert_allclose(stacked[p], apply_scenario(spec, H[p]), atol=1e-13)

    def test_linear_tdd_matches_oracle(self):
        spec = make_scenario(Rng(3), "LinearTdd", 4, 2, normalize=False)
        H = complex_normal(Rng(4), (4, 2))
        np.testing.assert_allclose(apply_scenario(spec, H), eq7_oracle(spec.profile, H), atol=1e-10)

    def test_linear_gain(self):
        assert make_scenario(Rng(3), "LinearTdd", 6, 2).linear_gain() == pytest.approx(1.0)
        spec = make_scenario(Rng(3), "LinearSynthetic", 6, 2)
        assert spec.linear_gain() == pytest.approx(np.mean(np.abs(spec.c) ** 2))
        with pytest.raises(InvalidScenarioError):
            make_scenario(Rng(3), "PowerType", 6, 2).linear_gain()

    def test_validation(self):
        D = random_unitary(Rng(0), 3)
        with pytest.raises(InvalidScenarioError):
            ScenarioSpec("TanhType", 3, 2, c=np.ones(2), D=2 * D)
        with pytest.raises(InvalidScenarioError):
            ScenarioSpec("TanhType", 3, 2, c=np.ones(3), D=D)
        with pytest.raises(InvalidScenarioError):
            ScenarioSpec("LinearTdd", 3, 2, c=np.ones(2), D=D)
        with pytest.raises(InvalidScenarioError):
            ScenarioSpec("TanhType", 3, 2, c=np.ones(2), D=D, tanh_mode="cubic")
        with pytest.raises(InvalidScenarioError):
            apply_scenario("LinearTdd", np.ones((3, 2)))


class TestPilots:
    @given(dim=st.integers(1, 10), extra=st.integers(0, 6), seed=st.integers(0, 2**32))
    @settings(max_examples=50, deadline=None)
    def test_orthogonal_unit_modulus(self, dim, extra, seed):
        K = dim + extra
        x = gen_pilots(Rng(seed), dim, K)
        assert x.shape == (dim, K)
        np.testing.assert_allclose(np.abs(x), 1.0, atol=1e-14)
        np.testing.assert_allclose(x @ x.conj().T, K * np.eye(dim), atol=1e-10 * K)
        assert np.all(np.abs(np.angle(x)) <= np.pi)

    def test_too_short(self):
        with pytest.raises(InvalidArgumentError):
            gen_pilots(Rng(0), 4, 3)

    def test_non_orthogonal_rejected(self):
        with pytest.raises(InvalidPilotError):
            observe_ul(np.ones((3, 2)), np.ones((2, 2)), None)

    def test_noiseless_ls_is_exact(self):
        H = complex_normal(Rng(1), (5, 3))
        x = gen_pilots(Rng(2), 3, 4)
        np.testing.assert_allclose(estimate_channel_ls(observe_ul(H, x, None), x), H, atol=1e-13)
        G = complex_normal(Rng(3), (3, 5))
        xd = gen_pilots(Rng(4), 5)
        np.testing.assert_allclose(estimate_channel_ls(observe_dl(G, xd, None), xd), G, atol=1e-13)

    def test_ls_error_variance(self):
        # LS error per entry is CN(0, sigma^2 / K)
        K, snr_db = 8, 5.0
        x = gen_pilots(Rng(2), 4, K)
        H = np.zeros((50_000, 4))
        err = estimate_channel_ls(observe_ul(H, x, snr_db, Rng(3)), x)
        expected = 10 ** (-snr_db / 10) / K
        assert np.mean(np.abs(err) ** 2) == pytest.approx(expected, rel=0.02)

    def test_noisy_needs_rng(self):
        x = gen_pilots(Rng(2), 2)
        with pytest.raises(InvalidArgumentError):
            observe_ul(np.ones((3, 2)), x, 10.0)


class TestDataset:
    def test_shapes(self):
        spec = make_scenario(Rng(0), "LinearTdd", 6, 3)
        ds = build_dataset(Rng(1), spec, 7, 10.0)
        assert ds.ul.shape == (7, 6, 3) and ds.dl.shape == (7, 3, 6)
        assert (ds.P, ds.M, ds.N) == (7, 6, 3)
        assert len(ds.pairs) == 7
        np.testing.assert_array_equal(ds.pairs[2].H_UL, ds.ul[2])

    def test_noiseless_equals_truth(self):
        spec = make_scenario(Rng(0), "TanhType", 4, 2)
        ds = build_dataset(Rng(1), spec, 5, None)
        np.testing.assert_allclose(ds.ul, ds.truth_ul, atol=1e-13)
        np.testing.assert_allclose(ds.dl, ds.truth_dl, atol=1e-13)

    def test_common_random_numbers_across_snr(self):
        spec = make_scenario(Rng(0), "LinearTdd", 4, 2)
        lo = build_dataset(Rng(1), spec, 5, 0.0)
        hi = build_dataset(Rng(1), spec, 5, 20.0)
        np.testing.assert_array_equal(lo.truth_ul, hi.truth_ul)
        # same noise draw, scaled by the SNR ratio
        np.testing.assert_allclose((lo.ul - lo.truth_ul) * 0.1, hi.ul - hi.truth_ul, atol=1e-13)
        np.testing.assert_allclose((lo.dl - lo.truth_dl) * 0.1, hi.dl - hi.truth_dl, atol=1e-13)

    def test_dl_power_unit_for_normalized_hardware(self):
        spec = make_scenario(Rng(0), "LinearTdd", 8, 4)
        ds = build_dataset(Rng(1), spec, 3000, None)
        assert np.mean(np.abs(ds.truth_dl) ** 2) == pytest.approx(1.0, rel=0.05)

    def test_subset_and_concat(self):
        spec = make_scenario(Rng(0), "PowerType", 3, 2)
        ds = build_dataset(Rng(1), spec, 6, 10.0)
        sub = ds.subset([4, 1])
        np.testing.assert_array_equal(sub.ul[0], ds.ul[4])
        np.testing.assert_array_equal(sub.truth_dl[1], ds.truth_dl[1])
        both = concat_datasets([ds, sub])
        assert both.P == 8 and both.snr_db == 10.0

    def test_dataset_validation(self):
        with pytest.raises(ShapeError):
            CalibrationDataset(np.ones((2, 3, 2)), np.ones((2, 3, 2)), "LinearTdd", None)
        with pytest.raises(InvalidArgumentError):
            build_dataset(Rng(0), make_scenario(Rng(0), "LinearTdd", 2, 1), 0, None)
        with pytest.raises(InvalidArgumentError):
            concat_datasets([])
