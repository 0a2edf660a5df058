import numpy as np
import pytest

from steersim import binio, nn
from steersim.nn.network import REFERENCE_FEATURE_CHAIN


def test_full_size_shape_chain():
    state = nn.default_network((3, 100, 190), seed=1)
    assert state.feature_shapes() == REFERENCE_FEATURE_CHAIN


def test_desk_shape_chain():
    state = nn.default_network((3, 48, 96), seed=1)
    assert state.feature_shapes() == (
        (20, 44, 92), (20, 22, 46), (48, 18, 42), (48, 9, 21), (64, 7, 19), (500,), (1,))


def test_chain_validated_at_construction():
    # conv kernel larger than its input must fail while building
    specs = (nn.LayerSpec("conv", kernel=(5, 5), out_maps=2),)
    with pytest.raises(nn.ShapeError):
        nn.NetworkState.initialize(specs, (3, 4, 4), seed=0)


def test_zero_params_predict_zero():
    state = nn.default_network((3, 48, 96), seed=3)
    for p in state.params:
        if p is not None:
            p[0][:] = 0
            p[1][:] = 0
    x = np.random.default_rng(0).random((2, 48, 96, 3), dtype=np.float32)
    pred, _ = nn.forward(state, x)
    assert np.array_equal(pred, np.zeros(2, np.float32))


def test_init_deterministic_per_seed():
    a = nn.default_network((3, 48, 96), seed=42)
    b = nn.default_network((3, 48, 96), seed=42)
    c = nn.default_network((3, 48, 96), seed=43)
    assert a.param_bytes() == b.param_bytes()
    assert a.param_bytes() != c.param_bytes()


def test_eval_forward_pure():
    state = nn.default_network((3, 48, 96), seed=5)
    x = np.random.default_rng(1).random((2, 48, 96, 3), dtype=np.float32)
    p1, _ = nn.forward(state, x, mode="eval")
    p2, _ = nn.forward(state, x, mode="eval")
    assert np.array_equal(p1, p2)


def test_train_forward_deterministic_per_step():
    state = nn.default_network((3, 48, 96), seed=5)
    x = np.random.default_rng(1).random((2, 48, 96, 3), dtype=np.float32)
    p1, _ = nn.forward(state, x, mode="train", step=11)
    p2, _ = nn.forward(state, x, mode="train", step=11)
    p3, _ = nn.forward(state, x, mode="train", step=12)
    assert np.array_equal(p1, p2)
    assert not np.array_equal(p1, p3)


def test_batch_shape_mismatch():
    state = nn.default_network((3, 48, 96), seed=5)
    with pytest.raises(nn.ShapeError):
        nn.forward(state, np.zeros((1, 96, 48, 3), np.float32))


def test_activations_finite_after_forward_backward():
    state = nn.default_network((3, 48, 96), seed=9)
    x = np.random.default_rng(2).random((4, 48, 96, 3), dtype=np.float32)
    pred, caches = nn.forward(state, x, mode="train", step=1)
    assert np.isfinite(pred).all()
    grads, gx = nn.backward(state, caches, nn.euclidean_loss_grad(pred, np.zeros(4)))
    assert np.isfinite(gx).all()
    for g in grads:
        if g is not None:
            assert np.isfinite(g[0]).all() and np.isfinite(g[1]).all()


class TestSerialization:
    def test_round_trip_bytes(self, tmp_path):
        state = nn.default_network((3, 48, 96), seed=17)
        path = tmp_path / "net.bin"
        nn.write_network(state, path)
        loaded = nn.read_network(path)
        assert loaded.specs == state.specs
        assert loaded.input_chw == state.input_chw
        assert loaded.rng_seed == state.rng_seed
        assert loaded.param_bytes() == state.param_bytes()
        # writing the loaded state reproduces the file byte for byte
        path2 = tmp_path / "net2.bin"
        nn.write_network(loaded, path2)
        assert path.read_bytes() == path2.read_bytes()

    def test_predictions_survive_round_trip(self, tmp_path):
        state = nn.default_network((3, 48, 96), seed=23)
        path = tmp_path / "net.bin"
        nn.write_network(state, path)
        loaded = nn.read_network(path)
        x = np.random.default_rng(3).random((2, 48, 96, 3), dtype=np.float32)
        assert np.array_equal(nn.forward(state, x)[0], nn.forward(loaded, x)[0])

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "net.bin"
        path.write_bytes(b"NOTANET1" + b"\0" * 64)
        with pytest.raises(binio.BadMagicError):
            nn.read_network(path)

    def test_truncated(self, tmp_path):
        state = nn.default_network((3, 48, 96), seed=17)
        path = tmp_path / "net.bin"
        nn.write_network(state, path)
        data = path.read_bytes()
        path.write_bytes(data[: len(data) // 2])
        with pytest.raises(binio.TruncatedFileError):
            nn.read_network(path)

    def test_corrupted_payload(self, tmp_path):
        state = nn.default_network((3, 48, 96), seed=17)
        path = tmp_path / "net.bin"
        nn.write_network(state, path)
        data = bytearray(path.read_bytes())
        data[len(data) // 2] ^= 0xFF
        path.write_bytes(bytes(data))
        with pytest.raises(binio.ChecksumError):
            nn.read_network(path)
