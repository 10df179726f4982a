import numpy as np
import pytest

from conftest import central_diff, rel_err
from graft.data import generate_synthetic, inject_noise
from graft.errors import ConfigurationError, ValidationError
from graft.gates import GateParams
from graft.network import forward, init_params
from graft.softrank import spearman_loss
from graft.trainer import AdamState, TrainConfig, adam_step, predict_scores, total_loss, train


def toy_problem(seed=0, gate_variant="stg", variant="full"):
    rng = np.random.default_rng(seed)
    cfg = TrainConfig(d_h=5, variant=variant, gate_variant=gate_variant)
    P = init_params(4, cfg.d_h, rng, arch_variant=cfg.arch)
    for arr in P.arrays().values():
        arr[...] = rng.normal(scale=0.5, size=arr.shape)
    eta = rng.uniform(0.2, 0.8, 4) if gate_variant == "stg" else rng.normal(size=4)
    gp = GateParams(eta, variant=cfg.gate_kind)
    X = rng.normal(size=(6, 4))
    targets = rng.normal(size=(3, 6))  # one fixed imputation draw, M = 3
    return cfg, P, gp, X, targets


@pytest.mark.parametrize("variant,gate", [("full", "stg"), ("full", "sigmoid"), ("no_stg", "stg"),
                                          ("linear_only", "stg")])
@pytest.mark.parametrize("seed", range(3))
def test_total_loss_gradient_fd(variant, gate, seed):
    cfg, P, gp, X, T = toy_problem(seed, gate, variant)
    _, grads, _ = total_loss(P, gp, X, T, cfg)

    def f():
        return total_loss(P, gp, X, T, cfg)[0]

    for name, arr in P.arrays().items():
        assert np.all(rel_err(grads[name], central_diff(f, arr), floor=1e-7) < 1e-4), name
    if gp.variant != "none":
        assert np.all(rel_err(grads["eta"], central_diff(f, gp.eta), floor=1e-7) < 1e-4)


def test_reduces_to_spearman():
    cfg, P, gp, X, T = toy_problem(1)
    cfg = TrainConfig(d_h=5, lambda_l0=0.0, alpha_l2=0.0)
    gp = GateParams(gp.eta, lambda_l0=0.0)
    loss, _, rank = total_loss(P, gp, X, T[:1], cfg)
    s, _ = forward(P, X, np.clip(gp.eta, 0, 1))
    assert loss == rank == spearman_loss(s, T[0], cfg.softrank)[0]


def test_l2_covers_mu():
    cfg, P, gp, X, T = toy_problem(2, variant="linear_only")
    base, _, _ = total_loss(P, gp, X, T, cfg)
    P.mu[0] += 1.0
    shifted, _, _ = total_loss(P, gp, X, T, cfg)
    # ranks ignore mu, so only the penalty moves
    assert shifted - base == pytest.approx(cfg.alpha_l2 * (2 * P.mu[0] - 1), rel=1e-9)


def test_adam_zero_gradient():
    st = AdamState()
    x = {"w": np.array([1.0, -2.0])}
    adam_step(st, x, {"w": np.zeros(2)}, 0.1)
    np.testing.assert_array_equal(x["w"], [1.0, -2.0])
    assert st.step == 1


def test_adam_first_step_is_signed_lr():
    st = AdamState()
    x = {"w": np.array([0.0, 0.0])}
    adam_step(st, x, {"w": np.array([3.0, -0.02])}, 1e-3)
    np.testing.assert_allclose(x["w"], [-1e-3, 1e-3], atol=1e-9)


def test_adam_reference_recurrence():
    lr, b1, b2, eps = 0.05, 0.9, 0.999, 1e-8
    st = AdamState()
    x = {"w": np.array([2.0])}
    w, m, v = 2.0, 0.0, 0.0
    for t in range(1, 4):
        g = 2 * w  # d/dw of w^2
        adam_step(st, x, {"w": np.array([2 * x["w"][0]])}, lr)
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        w = w - lr * (m / (1 - b1 ** t)) / (np.sqrt(v / (1 - b2 ** t)) + eps)
        assert abs(x["w"][0] - w) < 1e-12


def test_config_validation():
    with pytest.raises(ConfigurationError):
        TrainConfig(patience=20, max_epochs=10)
    with pytest.raises(ConfigurationError):
        TrainConfig(tau=0)
    with pytest.raises(ConfigurationError):
        TrainConfig(variant="deep")
    with pytest.raises(ConfigurationError):
        TrainConfig.from_dict({"learning_rate": 0.1})
    assert TrainConfig.from_dict(TrainConfig(lr=0.5).to_dict()) == TrainConfig(lr=0.5)


@pytest.fixture(scope="module")
def small_data():
    ds, _ = generate_synthetic(300, 6, 3, 0.3, seed=4)
    return ds


def test_training_improves_validation_loss():
    ds, _ = generate_synthetic(500, 10, 3, 0.3, seed=0)
    m = train(ds, TrainConfig(seed=0, max_epochs=100))
    assert m.best_val_loss < m.initial_val_loss
    assert m.best_val_loss <= m.history[1]


def test_training_is_deterministic(small_data):
    cfg = TrainConfig(seed=3, max_epochs=15)
    a, b = train(small_data, cfg), train(small_data, cfg)
    for k in a.params.arrays():
        assert np.array_equal(a.params.arrays()[k], b.params.arrays()[k])
    assert np.array_equal(a.gates.eta, b.gates.eta)
    assert a.history == b.history
    assert np.array_equal(predict_scores(a, small_data.features), predict_scores(b, small_data.features))


@pytest.mark.parametrize("gate", ["stg", "sigmoid", "reinforce"])
def test_gate_variants_train(small_data, gate):
    m = train(small_data, TrainConfig(seed=1, max_epochs=10, gate_variant=gate))
    assert m.gates.variant == gate
    assert np.all(np.isfinite(predict_scores(m, small_data.features)))
    if gate == "reinforce":
        assert np.all((m.gates.eta >= 1e-3) & (m.gates.eta <= 1 - 1e-3))


def test_no_stg_has_unit_gates(small_data):
    m = train(small_data, TrainConfig(seed=1, max_epochs=5, patience=5, variant="no_stg"))
    np.testing.assert_array_equal(m.inference_gates(), 1.0)
    assert m.params.arch_variant == "full"


def test_linear_only_ignores_mlp_settings(small_data):
    a = train(small_data, TrainConfig(seed=2, max_epochs=10, variant="linear_only", d_h=8, dropout=0.0))
    b = train(small_data, TrainConfig(seed=2, max_epochs=10, variant="linear_only", d_h=64, dropout=0.5))
    assert a.params.d_h == 0
    assert np.array_equal(predict_scores(a, small_data.features), predict_scores(b, small_data.features))


def test_predict_matches_forward(small_data):
    m = train(small_data, TrainConfig(seed=0, max_epochs=5, patience=5))
    s, _ = forward(m.params, m.scaler.apply(small_data.features), m.inference_gates())
    assert np.array_equal(predict_scores(m, small_data.features), s)
    X = np.vstack([small_data.features[:1], small_data.features[:1]])
    out = predict_scores(m, X)
    assert out[0] == out[1]
    with pytest.raises(ValidationError):
        predict_scores(m, small_data.features[:, :3])


def test_linear_only_score_differences(small_data):
    m = train(small_data, TrainConfig(seed=0, max_epochs=5, patience=5, variant="linear_only"))
    X = small_data.features[:2]
    s = predict_scores(m, X)
    Z = m.scaler.apply(X)
    assert s[0] - s[1] == pytest.approx(m.params.beta @ (Z[0] - Z[1]), abs=1e-12)


@pytest.mark.slow
def test_signal_gates_beat_noise_gates():
    ds, _ = generate_synthetic(600, 3, 3, 0.3, seed=5)
    ds = inject_noise(ds, 5, "gaussian", seed=6)
    m = train(ds, TrainConfig(seed=0))
    g = m.inference_gates()
    assert g[:3].mean() > g[3:].mean()
