import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from veriframe.errors import RegistryError, VeriframeError
from veriframe.model import (
    ModelConfig,
    available_backbones,
    backbone_spec,
    build_model,
    default_config,
    loss_and_logit_grad,
    sigmoid,
    softmax,
)

finite_floats = st.floats(-500, 500, allow_nan=False, allow_infinity=False)


class TestSigmoid:
    def test_zero_is_half(self):
        assert sigmoid(0.0) == 0.5

    def test_value_at_two_matches_high_precision_oracle(self):
        import mpmath

        mpmath.mp.dps = 50
        oracle = float(1 / (1 + mpmath.e ** (-2)))
        assert abs(sigmoid(2.0) - oracle) < 1e-15
        assert abs(sigmoid(2.0) - 0.8807970779778823) < 1e-15

    @given(x=finite_floats)
    def test_complement_identity(self, x):
        assert abs(sigmoid(x) + sigmoid(-x) - 1.0) < 1e-12

    def test_stable_at_extremes(self):
        with np.errstate(over="raise"):
            assert sigmoid(500.0) == 1.0
            low = sigmoid(-500.0)
        assert np.isfinite(low)
        assert 0.0 <= low < 1e-200

    def test_array_input(self):
        values = sigmoid(np.array([-500.0, 0.0, 500.0]))
        assert values.shape == (3,)
        assert np.all(np.isfinite(values))


class TestSoftmax:
    def test_uniform(self):
        assert np.allclose(softmax([0.0, 0.0, 0.0]), [1 / 3] * 3, atol=1e-15)

    def test_log_two_analytic(self):
        out = softmax([np.log(2.0), 0.0])
        assert abs(out[0] - 2 / 3) < 1e-12
        assert abs(out[1] - 1 / 3) < 1e-12

    def test_matches_naive_formula(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            z = rng.normal(0, 3, size=8)
            naive = np.exp(z) / np.exp(z).sum()
            assert np.max(np.abs(softmax(z) - naive)) < 1e-12

    @settings(max_examples=200)
    @given(z=st.lists(st.floats(-100, 100, allow_nan=False), min_size=1, max_size=16))
    def test_normalized_and_positive(self, z):
        out = softmax(z)
        assert abs(out.sum() - 1.0) <= 1e-9
        assert np.all(out > 0.0)
        assert np.all(out < 1.0 + 1e-15)

    @settings(max_examples=200)
    @given(z=st.lists(st.floats(-50, 50, allow_nan=False), min_size=2, max_size=8),
           c=st.floats(-100, 100, allow_nan=False))
    def test_shift_invariance(self, z, c):
        z = np.array(z)
        assert np.max(np.abs(softmax(z + c) - softmax(z))) <= 1e-9
        assert int(np.argmax(softmax(z + c))) == int(np.argmax(softmax(z)))

    @settings(max_examples=200)
    @given(z=finite_floats)
    def test_bridge_to_sigmoid(self, z):
        assert abs(softmax([z, 0.0])[0] - sigmoid(z)) <= 1e-9

    def test_empty_rejected(self):
        with pytest.raises(VeriframeError):
            softmax([])


class TestRegistry:
    def test_specs(self):
        assert backbone_spec("resnet50").input_size == 224
        assert backbone_spec("resnet50").nominal_depth == 50
        assert backbone_spec("efficientnet_b0").input_size == 224
        assert backbone_spec("inception_resnet_v2").input_size == 299
        assert backbone_spec("inception_resnet_v2").nominal_depth == 164
        assert backbone_spec("tiny_test").input_size == 64

    def test_unknown_name(self):
        from veriframe.model import BackboneSpec

        with pytest.raises(RegistryError, match="vgg99"):
            backbone_spec("vgg99")
        rogue = ModelConfig(backbone=BackboneSpec("vgg99", 64, 1))
        with pytest.raises(RegistryError, match="vgg99"):
            build_model(rogue)

    def test_all_registered(self):
        assert set(available_backbones()) >= {
            "tiny_test", "resnet50", "efficientnet_b0", "inception_resnet_v2",
        }

    def test_config_validation(self):
        with pytest.raises(VeriframeError):
            ModelConfig(backbone=backbone_spec("tiny_test"), head_hidden_units=0)
        with pytest.raises(VeriframeError):
            ModelConfig(backbone=backbone_spec("tiny_test"), head_output="argmax")


class TestTinyModel:
    def test_probabilities_shape_and_range(self):
        model = build_model(default_config("tiny_test"), seed=1)
        batch = np.random.default_rng(0).random((2, 64, 64, 3))
        probs = model.predict_proba(batch)
        assert probs.shape == (2,)
        assert np.all(probs >= 0.0) and np.all(probs <= 1.0)
        assert np.all(np.isfinite(probs))

    @pytest.mark.parametrize("head", ["sigmoid_1", "softmax_2"])
    def test_both_heads(self, head):
        model = build_model(default_config("tiny_test", head_output=head), seed=2)
        batch = np.random.default_rng(1).random((5, 64, 64, 3))
        probs = model.predict_proba(batch)
        assert probs.shape == (5,)
        assert np.all((probs >= 0.0) & (probs <= 1.0))

    def test_input_size_mismatch(self):
        model = build_model(default_config("tiny_test"), seed=1)
        with pytest.raises(VeriframeError, match="input size mismatch"):
            model.predict_proba(np.zeros((2, 32, 32, 3)))

    def test_build_deterministic(self):
        a = build_model(default_config("tiny_test"), seed=9)
        b = build_model(default_config("tiny_test"), seed=9)
        for (name_a, val_a), (name_b, val_b) in zip(a.parameters(), b.parameters()):
            assert name_a == name_b
            assert np.array_equal(val_a, val_b)


@pytest.mark.parametrize("head", ["sigmoid_1", "softmax_2"])
def test_head_gradient_matches_central_differences(head):
    """Analytic cross-entropy gradient through the head vs finite differences."""
    model = build_model(default_config("tiny_test", head_output=head), seed=4)
    rng = np.random.default_rng(8)
    features = rng.normal(0.0, 1.0, size=(6, 16))
    y = (rng.random(6) > 0.5).astype(np.float64)

    analytic = {}
    model.head_loss_and_grads(features, y)
    for p in model.head.parameters():
        analytic[p.name] = p.grad.copy()

    h = 1e-6
    worst = 0.0
    for p in model.head.parameters():
        flat = p.value.reshape(-1)
        grad_flat = analytic[p.name].reshape(-1)
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + h
            loss_plus = model.head_loss(features, y)
            flat[i] = original - h
            loss_minus = model.head_loss(features, y)
            flat[i] = original
            numeric = (loss_plus - loss_minus) / (2 * h)
            scale = max(abs(numeric), abs(grad_flat[i]), 1e-6)
            worst = max(worst, abs(numeric - grad_flat[i]) / scale)
    assert worst <= 1e-4


def test_loss_gradient_conventions():
    # pushing the fake probability toward the label lowers the loss
    z = np.array([[0.3, -0.2]])
    y = np.ones(1)
    loss, p_fake, dz = loss_and_logit_grad(z, y, "softmax_2")
    assert p_fake.shape == (1,)
    step = z - 0.1 * dz * z.shape[0]
    loss_after, _, _ = loss_and_logit_grad(step, y, "softmax_2")
    assert loss_after < loss

    z1 = np.array([[0.4]])
    loss, p_fake, dz = loss_and_logit_grad(z1, y, "sigmoid_1")
    step = z1 - 0.1 * dz
    loss_after, _, _ = loss_and_logit_grad(step, y, "sigmoid_1")
    assert loss_after < loss


def test_concurrent_inference_is_safe():
    from concurrent.futures import ThreadPoolExecutor

    model = build_model(default_config("tiny_test"), seed=6)
    rng = np.random.default_rng(11)
    batches = [rng.random((3, 64, 64, 3)) for _ in range(12)]
    sequential = [model.predict_proba(batch) for batch in batches]
    with ThreadPoolExecutor(max_workers=6) as pool:
        concurrent = list(pool.map(model.predict_proba, batches))
    for expected, got in zip(sequential, concurrent):
        assert np.array_equal(expected, got)


@pytest.mark.slow
def test_inception_resnet_v2_shapes():
    tf = pytest.importorskip("tensorflow")
    del tf
    config = default_config("inception_resnet_v2")
    model = build_model(config, seed=0)
    batch = np.random.default_rng(2).random((4, 299, 299, 3))
    probs = model.predict_proba(batch)
    assert probs.shape == (4,)
    assert np.all((probs >= 0.0) & (probs <= 1.0))
    with pytest.raises(VeriframeError, match="input size mismatch"):
        model.predict_proba(np.zeros((1, 224, 224, 3)))
