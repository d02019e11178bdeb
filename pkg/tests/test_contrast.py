import math

import numpy as np
import pytest

from dmgsl import autodiff as ad
from dmgsl.autodiff import Tape, Tensor
from dmgsl.contrast import (
    EncoderParams,
    ProjectorParams,
    bootstrap_update,
    edge_drop,
    feature_mask,
    gcn_encode,
    init_encoder,
    init_projector,
    ntxent_loss,
    project,
)
from dmgsl.errors import ConfigError, NumericError, ShapeError
from dmgsl.rng import substream


class TestFeatureMask:
    def test_rate_zero_identity(self):
        rng = np.random.default_rng(0)
        e = Tensor(rng.random((4, 6)))
        assert np.array_equal(feature_mask(e, 0.0, substream(0, "aug")).data, e.data)

    def test_rate_one_zeroes(self):
        e = Tensor(np.ones((3, 5)))
        assert np.array_equal(feature_mask(e, 1.0, substream(0, "aug")).data, np.zeros((3, 5)))

    def test_mask_is_per_column(self):
        e = Tensor(np.ones((8, 50)))
        out = feature_mask(e, 0.5, substream(1, "aug")).data
        # every column is either fully kept or fully zeroed
        assert np.all((out == out[0:1, :]).all(axis=0))

    def test_masked_fraction_monte_carlo(self):
        r, cols, draws = 0.3, 100, 10_000
        rng = substream(2, "aug")
        e = Tensor(np.ones((1, cols)))
        masked = 0
        for _ in range(draws):
            masked += int((feature_mask(e, r, rng).data[0] == 0.0).sum())
        frac = masked / (cols * draws)
        assert abs(frac - r) < 0.02


class TestEdgeDrop:
    def test_rate_zero_identity(self):
        a = Tensor(np.array([[0.0, 0.5], [0.2, 0.0]]))
        assert np.array_equal(edge_drop(a, 0.0, substream(3, "aug")).data, a.data)

    def test_rate_one_zero_matrix(self):
        a = Tensor(np.ones((3, 3)))
        assert np.array_equal(edge_drop(a, 1.0, substream(3, "aug")).data, np.zeros((3, 3)))

    def test_surviving_count_monte_carlo(self):
        r, draws = 0.25, 4000
        rng = substream(4, "aug")
        a = Tensor((np.random.default_rng(4).random((6, 6)) > 0.5) * 0.8)
        nnz = int((a.data != 0).sum())
        survived = 0
        for _ in range(draws):
            survived += int((edge_drop(a, r, rng).data != 0).sum())
        expected = (1.0 - r) * nnz
        assert abs(survived / draws - expected) < 0.02 * nnz

    def test_bad_rate(self):
        with pytest.raises(ConfigError):
            edge_drop(Tensor(np.ones((2, 2))), 1.5, substream(0, "aug"))


class TestGcnEncode:
    def test_identity_operator_identity_weights(self):
        x = np.abs(np.random.default_rng(5).random((4, 3)))
        params = EncoderParams(w1=Tensor(np.eye(3)), w2=Tensor(np.eye(3)))
        out = gcn_encode(Tensor(x), Tensor(np.eye(4)), params)
        assert np.allclose(out.data, x, atol=1e-15)

    def test_zero_features_give_zero(self):
        params = init_encoder(5, 4, substream(5, "init"))
        out = gcn_encode(Tensor(np.zeros((3, 5))), Tensor(np.eye(3)), params)
        assert np.array_equal(out.data, np.zeros((3, 4)))

    def test_gradient_wrt_encoder_weights(self, numeric_grad, grads_close):
        rng = np.random.default_rng(6)
        params = init_encoder(3, 2, substream(6, "init"), hidden=4)
        x = Tensor(rng.random((4, 3)))
        a_hat = Tensor(np.eye(4) * 0.5 + 0.1)
        weights = rng.normal(size=(4, 2))

        def build():
            return ad.mul(gcn_encode(x, a_hat, params), weights).sum()

        with Tape() as tape:
            loss = build()
        tape.backward(loss, [params.w1, params.w2])
        for t in (params.w1, params.w2):
            grads_close(t.grad, numeric_grad(lambda: build().item(), t.data))


class TestProject:
    def test_identity_square_layers(self):
        x = np.abs(np.random.default_rng(7).random((3, 4)))
        params = ProjectorParams(
            w1=Tensor(np.eye(4)), b1=Tensor(np.zeros(4)), w2=Tensor(np.eye(4)), b2=Tensor(np.zeros(4))
        )
        assert np.allclose(project(Tensor(x), params).data, x, atol=1e-15)

    def test_zero_input_propagates_biases(self):
        params = init_projector(3, 2, substream(7, "init"), hidden=4)
        params.b1.data = np.array([0.5, -1.0, 0.25, 0.1])
        out = project(Tensor(np.zeros((4, 3))), params).data
        expected = np.maximum(params.b1.data, 0.0) @ params.w2.data + params.b2.data
        assert np.allclose(out, np.tile(expected, (4, 1)), atol=1e-15)

    def test_gradient_wrt_all_parameters(self, numeric_grad, grads_close):
        rng = np.random.default_rng(8)
        params = init_projector(4, 3, substream(8, "init"))
        h = Tensor(rng.normal(size=(5, 4)))
        weights = rng.normal(size=(5, 3))

        def build():
            return ad.mul(project(h, params), weights).sum()

        tensors = [t for _, t in params.named()]
        with Tape() as tape:
            loss = build()
        tape.backward(loss, tensors)
        for t in tensors:
            grads_close(t.grad, numeric_grad(lambda: build().item(), t.data))


class TestNtxentLoss:
    def test_single_row_zero_loss(self):
        y = Tensor([[1.0, 2.0]])
        assert ntxent_loss(y, y, 0.5).item() == pytest.approx(0.0, abs=1e-12)

    def test_identical_rows_log_n(self):
        row = np.array([0.3, -0.7, 1.1])
        y = Tensor(np.tile(row, (4, 1)))
        assert ntxent_loss(y, y, 0.5).item() == pytest.approx(math.log(4.0), abs=1e-9)

    def test_orthonormal_pair_closed_form(self):
        y = Tensor(np.eye(2))
        expected = -math.log(math.e / (math.e + 1.0))
        assert ntxent_loss(y, y, 1.0).item() == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(0.31326, abs=1e-5)

    def test_zero_row_names_node(self):
        y_a = Tensor(np.array([[1.0, 0.0], [0.0, 0.0]]))
        y_l = Tensor(np.ones((2, 2)))
        with pytest.raises(NumericError, match="row 1"):
            ntxent_loss(y_a, y_l, 0.5)

    def test_scale_invariance_per_row(self):
        rng = np.random.default_rng(9)
        y_a, y_l = rng.normal(size=(5, 3)), rng.normal(size=(5, 3))
        base = ntxent_loss(Tensor(y_a), Tensor(y_l), 0.5).item()
        y_a2 = y_a.copy()
        y_a2[2] *= 7.3
        scaled = ntxent_loss(Tensor(y_a2), Tensor(y_l), 0.5).item()
        assert scaled == pytest.approx(base, abs=1e-12)

    def test_symmetric_in_views(self):
        rng = np.random.default_rng(10)
        y_a, y_l = Tensor(rng.normal(size=(6, 4))), Tensor(rng.normal(size=(6, 4)))
        assert ntxent_loss(y_a, y_l, 0.7).item() == pytest.approx(ntxent_loss(y_l, y_a, 0.7).item(), abs=1e-12)

    def test_non_negative(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            y_a, y_l = rng.normal(size=(5, 3)), rng.normal(size=(5, 3))
            assert ntxent_loss(Tensor(y_a), Tensor(y_l), 0.5).item() >= 0.0

    def test_bad_temperature(self):
        with pytest.raises(ConfigError):
            ntxent_loss(Tensor(np.eye(2)), Tensor(np.eye(2)), 0.0)

    def test_gradient(self, numeric_grad, grads_close):
        rng = np.random.default_rng(12)
        y_a = Tensor(rng.normal(size=(4, 3)), requires_grad=True)
        y_l = Tensor(rng.normal(size=(4, 3)), requires_grad=True)

        def build():
            return ntxent_loss(y_a, y_l, 0.5)

        with Tape() as tape:
            loss = build()
        tape.backward(loss, [y_a, y_l])
        for t in (y_a, y_l):
            grads_close(t.grad, numeric_grad(lambda: build().item(), t.data))


class TestBootstrapUpdate:
    def test_tau_one_unchanged(self):
        slices = [np.random.default_rng(13).random((3, 3)) for _ in range(2)]
        out = bootstrap_update(slices, np.ones((3, 3)), tau=1.0)
        for a, b in zip(out, slices):
            assert np.array_equal(a, b)

    def test_tau_zero_replaces(self):
        learned = np.random.default_rng(14).random((3, 3))
        out = bootstrap_update([np.zeros((3, 3))], learned, tau=0.0)
        assert np.array_equal(out[0], learned)

    @pytest.mark.parametrize("tau", [0.9, 0.99])
    def test_geometric_contraction(self, tau):
        rng = np.random.default_rng(15)
        anchor = rng.random((4, 4))
        learned = rng.random((4, 4))
        initial = np.linalg.norm(anchor - learned)
        current = [anchor]
        for m in range(1, 51):
            current = bootstrap_update(current, learned, tau=tau)
            dist = np.linalg.norm(current[0] - learned)
            assert abs(dist - tau**m * initial) <= 1e-6 * max(dist, tau**m * initial)

    def test_stays_in_unit_interval(self):
        rng = np.random.default_rng(16)
        slices = [rng.random((5, 5))]
        learned = rng.random((5, 5))
        for _ in range(10):
            slices = bootstrap_update(slices, learned, tau=0.7)
            assert slices[0].min() >= 0.0 and slices[0].max() <= 1.0

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            bootstrap_update([np.zeros((2, 2))], np.zeros((3, 3)), tau=0.5)

    def test_bad_tau(self):
        with pytest.raises(ConfigError):
            bootstrap_update([np.zeros((2, 2))], np.zeros((2, 2)), tau=1.5)
