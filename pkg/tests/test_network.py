import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mimocal.channels import build_dataset, make_scenario
from mimocal.errors import InvalidArgumentError, InvalidStateError, ShapeError
from mimocal.network import (
    Activation,
    AdagradState,
    TrainConfig,
    _FlatNet,
    adagrad_step,
    backward,
    decode_channels,
    encode_channels,
    forward,
    init_network,
    loss,
    predict,
    split_indices,
    train,
)
from mimocal.numerics import Rng, complex_normal


def numeric_gradients(params, x, t, h=1e-6):
    """Central differences of the summed squared error, one parameter at a time."""
    grads = []
    for layer in params.layers:
        pair = []
        for arr in (layer.W, layer.b):
            g = np.zeros_like(arr)
            for idx in np.ndindex(arr.shape):
                old = arr[idx]
                arr[idx] = old + h
                up = loss(params, x, t)
                arr[idx] = old - h
                down = loss(params, x, t)
                arr[idx] = old
                g[idx] = (up - down) / (2 * h)
            pair.append(g)
        grads.append(tuple(pair))
    return grads


def tiny_dataset(kind="LinearSynthetic", M=3, N=2, P=40, snr_db=None, seed=0):
    spec = make_scenario(Rng(seed).child("s"), kind, M, N)
    return build_dataset(Rng(seed).child("d"), spec, P, snr_db)


class TestEncoding:
    def test_layout(self):
        H = np.array([[1 + 2j, 3 + 4j], [5 + 6j, 7 + 8j]])
        np.testing.assert_array_equal(encode_channels(H), [1, 2, 3, 4, 5, 6, 7, 8])

    @given(rows=st.integers(1, 5), cols=st.integers(1, 5), seed=st.integers(0, 2**32))
    @settings(max_examples=30, deadline=None)
    def test_round_trip(self, rows, cols, seed):
        H = complex_normal(Rng(seed), (rows, cols))
        np.testing.assert_array_equal(decode_channels(encode_channels(H), rows, cols), H)

    def test_decode_length_check(self):
        with pytest.raises(ShapeError):
            decode_channels(np.zeros(5), 1, 2)


class TestForwardBackward:
    def test_init_glorot_bounds(self):
        params, state = init_network((10, 6, 4), Rng(0))
        for layer, (fan_in, fan_out) in zip(params.layers, [(10, 6), (6, 4)]):
            limit = np.sqrt(6 / (fan_in + fan_out))
            assert np.all(np.abs(layer.W) <= limit)
            assert not np.any(layer.b)
        assert params.layers[0].activation is Activation.TANH
        assert params.output_activation is Activation.LINEAR
        assert all(not np.any(GW) for GW, _ in state.G)

    def test_init_rejects_bad_dims(self):
        with pytest.raises(InvalidArgumentError):
            init_network((4,), Rng(0))

    def test_forward_by_hand(self):
        params, _ = init_network((2, 3, 2), Rng(1), output_activation="tanh")
        x = np.array([0.3, -0.7])
        l1, l2 = params.layers
        expected = np.tanh(l2.W @ np.tanh(l1.W @ x + l1.b) + l2.b)
        out, _ = forward(params, x)
        np.testing.assert_allclose(out, expected, atol=1e-15)

    def test_batch_rows_match_single(self):
        params, _ = init_network((4, 5, 4), Rng(1))
        X = Rng(2).standard_normal((3, 4))
        batch, _ = forward(params, X)
        for i in range(3):
            np.testing.assert_allclose(batch[i], forward(params, X[i])[0], atol=1e-15)

    @pytest.mark.parametrize("out_act", ["linear", "tanh"])
    @pytest.mark.parametrize("batch", [1, 3])
    def test_gradients_match_finite_differences(self, out_act, batch):
        params, _ = init_network((4, 5, 3, 4), Rng(7), output_activation=out_act)
        rng = Rng(8)
        x = rng.standard_normal((batch, 4))
        t = rng.standard_normal((batch, 4))
        _, cache = forward(params, x)
        analytic = backward(params, x, t, cache)
        numeric = numeric_gradients(params, x, t)
        for (aW, ab), (nW, nb) in zip(analytic, numeric):
            np.testing.assert_allclose(aW, nW, rtol=1e-6, atol=1e-8)
            np.testing.assert_allclose(ab, nb, rtol=1e-6, atol=1e-8)

    def test_stale_cache_rejected(self):
        params, _ = init_network((2, 2), Rng(0))
        other, _ = init_network((2, 2), Rng(1))
        x = np.ones(2)
        _, cache = forward(params, x)
        with pytest.raises(InvalidStateError):
            backward(other, x, x, cache)
        with pytest.raises(InvalidStateError):
            backward(params, 2 * x, x, cache)

    def test_shape_errors(self):
        params, _ = init_network((2, 2), Rng(0))
        with pytest.raises(ShapeError):
            forward(params, np.ones(3))
        with pytest.raises(ShapeError):
            loss(params, np.ones((2, 2)), np.ones((3, 2)))


class TestAdagrad:
    def test_step_matches_scalar_rule(self):
        params, state = init_network((3, 2), Rng(0))
        g = [(Rng(1).standard_normal((2, 3)), Rng(2).standard_normal(2))]
        lr, eps = 0.05, 1e-8
        new, new_state = adagrad_step(params, state, g, lr)
        new2, _ = adagrad_step(new, new_state, g, lr)
        W0, gW = params.layers[0].W, g[0][0]
        for idx in np.ndindex(W0.shape):
            G1 = gW[idx] ** 2
            w1 = W0[idx] - lr * gW[idx] / (np.sqrt(G1) + eps)
            G2 = G1 + gW[idx] ** 2
            w2 = w1 - lr * gW[idx] / (np.sqrt(G2) + eps)
            assert new2.layers[0].W[idx] == pytest.approx(w2, rel=1e-13)
        # inputs are not mutated
        assert not np.any(state.G[0][0])

    def test_first_step_moves_each_weight_by_lr(self):
        params, state = init_network((3, 2), Rng(0))
        g = [(np.full((2, 3), 5.0), np.full(2, -0.01))]
        new, _ = adagrad_step(params, state, g, 0.1)
        np.testing.assert_allclose(new.layers[0].W - params.layers[0].W, -0.1, rtol=1e-6)
        np.testing.assert_allclose(new.layers[0].b - params.layers[0].b, 0.1, rtol=1e-4)

    def test_flat_trainer_matches_functional_steps(self):
        params, state = init_network((4, 6, 4), Rng(3))
        rng = Rng(4)
        batches = [(rng.standard_normal((3, 4)), rng.standard_normal((3, 4))) for _ in range(5)]
        flat = _FlatNet(params, state.epsilon)
        ref, ref_state = params, state
        for x, t in batches:
            flat.step(x, t, 0.02)
            _, cache = forward(ref, x)
            ref, ref_state = adagrad_step(ref, ref_state, backward(ref, x, t, cache), 0.02)
        for a, b in zip(flat.params().layers, ref.layers):
            np.testing.assert_allclose(a.W, b.W, rtol=1e-12, atol=1e-14)
            np.testing.assert_allclose(a.b, b.b, rtol=1e-12, atol=1e-14)

    def test_shape_mismatch(self):
        params, state = init_network((3, 2), Rng(0))
        with pytest.raises(ShapeError):
            adagrad_step(params, state, [(np.zeros((3, 2)), np.zeros(2))], 0.1)


class TestSplit:
    @given(P=st.integers(2, 500), vf=st.floats(0.05, 0.95), seed=st.integers(0, 1000))
    @settings(max_examples=50, deadline=None)
    def test_partition(self, P, vf, seed):
        tr, va = split_indices(P, vf, Rng(seed))
        assert len(tr) >= 1 and len(va) >= 1
        np.testing.assert_array_equal(np.sort(np.concatenate([tr, va])), np.arange(P))

    def test_sixty_forty(self):
        tr, va = split_indices(10240, 0.4, Rng(0))
        assert (len(tr), len(va)) == (6144, 4096)

    def test_too_small(self):
        with pytest.raises(InvalidArgumentError):
            split_indices(1, 0.4, Rng(0))


class TestTraining:
    CFG = TrainConfig(epochs=30, hidden_dims=(16,), batch_size=4, learning_rate=0.05, seed=3)

    def test_config_validation(self):
        for bad in (dict(learning_rate=0), dict(epochs=0), dict(validation_fraction=1.0),
                    dict(mode="shared"), dict(output_activation="relu"), dict(hidden_dims=(0,))):
            with pytest.raises((InvalidArgumentError, ValueError)):
                TrainConfig(**bad)

    def test_layer_dims(self):
        assert TrainConfig().layer_dims(32, 4) == (64, 128, 128, 128, 64)
        assert TrainConfig(mode="joint").layer_dims(32, 4) == (256, 128, 128, 128, 256)

    def test_learns_linear_map(self):
        ds = tiny_dataset(P=200)
        model, hist = train(ds, self.CFG)
        assert len(hist.records) == 30 and hist.records[0].epoch == 1
        assert hist.val_mse[-1] < 0.2 * hist.val_mse[0]
        pred = predict(model, ds.ul)
        assert pred.shape == ds.dl.shape

    def test_deterministic(self):
        ds = tiny_dataset()
        m1, h1 = train(ds, self.CFG)
        m2, h2 = train(ds, self.CFG)
        np.testing.assert_array_equal(h1.val_mse, h2.val_mse)
        np.testing.assert_array_equal(predict(m1, ds.ul), predict(m2, ds.ul))

    def test_seed_changes_result(self):
        ds = tiny_dataset()
        _, h1 = train(ds, self.CFG)
        _, h2 = train(ds, TrainConfig(**{**self.CFG.__dict__, "seed": 4}))
        assert not np.array_equal(h1.val_mse, h2.val_mse)

    def test_user_subset(self):
        ds = tiny_dataset()
        model, _ = train(ds, self.CFG, users=[1])
        assert model.nets[0] is None and model.nets[1] is not None
        full, _ = train(ds, self.CFG)
        # each user's network depends only on its own sub-streams
        np.testing.assert_array_equal(
            predict(model, ds.ul, users=[1])[:, 1], predict(full, ds.ul)[:, 1]
        )
        with pytest.raises(InvalidStateError):
            predict(model, ds.ul)
        with pytest.raises(InvalidArgumentError):
            train(ds, self.CFG, users=[2])

    def test_joint_and_tanh_modes(self):
        ds = tiny_dataset(P=60)
        joint = TrainConfig(epochs=3, hidden_dims=(8,), mode="joint", output_activation="tanh", seed=1)
        model, hist = train(ds, joint)
        assert len(model.nets) == 1 and model.nets[0].input_dim == 2 * 3 * 2
        assert model.target_scale == pytest.approx(1 / 3)
        out = predict(model, ds.ul[0])
        assert out.shape == (2, 3)
        # tanh output bounds the prediction by 1 / target_scale
        assert np.all(np.abs(predict(model, ds.ul * 100).real) <= 3.0 + 1e-12)

    def test_history_mse_matches_direct_evaluation(self):
        ds = tiny_dataset(P=30)
        model, hist = train(ds, self.CFG)
        _, va = split_indices(30, 0.4, Rng(self.CFG.seed).child("split"))
        direct = np.mean(np.abs(predict(model, ds.ul[va]) - ds.dl[va]) ** 2)
        assert hist.val_mse[-1] == pytest.approx(direct, rel=1e-10)

    def test_predict_shape_error(self):
        model, _ = train(tiny_dataset(), TrainConfig(epochs=1, hidden_dims=(4,)))
        with pytest.raises(ShapeError):
            predict(model, np.ones((4, 2)))
