import numpy as np
import pytest

from mvpl import model as mdl
from mvpl import tensorlab as tl
from mvpl.model import ModelConfig


CFG = ModelConfig(input_shape=(4, 8, 8), widths=(4, 6), classes=8, dropout_rate=0.5)


def batch(n=2, cfg=CFG, seed=0):
    rng = np.random.default_rng(seed)
    t, h, w = cfg.input_shape
    return rng.uniform(0, 255, size=(n, t, h, w, 3))


def test_logits_shape_contract():
    state = mdl.init_parameters(CFG, seed=0)
    logits = mdl.forward(state, batch(2), mode="eval")
    assert logits.shape == (2, 8)


def test_eval_forward_deterministic_and_side_effect_free():
    state = mdl.init_parameters(CFG, seed=1)
    before = {k: v.copy() for k, v in state.running.items()}
    x = batch(3)
    a = mdl.forward(state, x, mode="eval").data
    b = mdl.forward(state, x, mode="eval").data
    np.testing.assert_array_equal(a, b)
    for k, v in state.running.items():
        np.testing.assert_array_equal(v, before[k])


def test_train_forward_updates_running_stats():
    state = mdl.init_parameters(CFG, seed=1)
    before = {k: v.copy() for k, v in state.running.items()}
    mdl.forward(state, batch(4), mode="train", dropout_key=(0, 0))
    changed = any(not np.array_equal(state.running[k], before[k]) for k in before)
    assert changed


def test_same_state_accepts_any_view_batch():
    state = mdl.init_parameters(CFG, seed=2)
    rgbish = batch(2, seed=3)
    flowish = batch(2, seed=4)
    tgish = np.full_like(rgbish, 127.5)
    outs = [mdl.forward(state, v, mode="eval").data for v in (rgbish, flowish, tgish)]
    assert all(o.shape == (2, 8) for o in outs)


def test_init_deterministic_per_seed():
    a = mdl.init_parameters(CFG, seed=5)
    b = mdl.init_parameters(CFG, seed=5)
    c = mdl.init_parameters(CFG, seed=6)
    assert a.state_bytes() == b.state_bytes()
    assert a.state_bytes() != c.state_bytes()


def test_he_init_variance():
    cfg = ModelConfig(input_shape=(4, 8, 8), widths=(16, 32), classes=4)
    state = mdl.init_parameters(cfg, seed=7)
    k = state.params["conv1/kernel"].data  # 3*3*3*16*32 = 13824 draws
    assert k.size >= 10_000
    fan_in = 27 * 16
    assert abs(k.var() - 2.0 / fan_in) < 0.2 * (2.0 / fan_in)


def test_neutral_input_logits_equal_bias():
    state = mdl.init_parameters(CFG, seed=8)
    rng = np.random.default_rng(9)
    state.params["fc/bias"] = tl.Tensor(rng.normal(size=(8,)), requires_grad=True)
    t, h, w = CFG.input_shape
    neutral = np.full((2, t, h, w, 3), 127.5)
    logits = mdl.forward(state, neutral, mode="eval").data
    np.testing.assert_allclose(logits, np.tile(state.params["fc/bias"].data, (2, 1)), atol=1e-12)


def test_parameter_count_is_function_of_config():
    state = mdl.init_parameters(CFG, seed=10)
    total = sum(t.data.size for t in state.params.values())
    assert total == mdl.parameter_count(CFG)


def test_forward_rejects_wrong_shape():
    state = mdl.init_parameters(CFG, seed=11)
    with pytest.raises(ValueError, match="clip batch shape"):
        mdl.forward(state, np.zeros((2, 4, 8, 9, 3)), mode="eval")


def test_predict_distribution_rows_normalized():
    state = mdl.init_parameters(CFG, seed=12)
    probs = mdl.predict_distribution(state, batch(5, seed=13))
    np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-9)
    assert probs.min() >= 0.0


def test_predict_distribution_closed_form():
    state = mdl.init_parameters(CFG, seed=14)
    logits = np.zeros((1, 8))
    logits[0, 0] = np.log(2.0)
    probs = tl.softmax(logits)
    np.testing.assert_allclose(probs[0, 0], 2.0 / (2.0 + 7.0), rtol=1e-12)


def test_untrained_model_confidence_sane():
    state = mdl.init_parameters(CFG, seed=15)
    rng = np.random.default_rng(16)
    t, h, w = CFG.input_shape
    clips = rng.uniform(0, 255, size=(100, t, h, w, 3))
    probs = mdl.predict_distribution(state, clips)
    mean_max = probs.max(axis=1).mean()
    assert 1.0 / 8.0 < mean_max < 1.0


def test_end_to_end_gradients():
    reports = mdl.gradient_suite()
    assert all(r.passed for r in reports), [(r.name, r.max_rel_error) for r in reports]
