import numpy as np
import pytest

from conftest import central_diff, rel_err
from graft.errors import ValidationError
from graft.network import backward, forward, init_params


def straight_line_scores(P, X, g, keep=None, rate=0.0):
    """Row-by-row scorer written out longhand."""
    out = []
    for i, x in enumerate(X):
        xt = [g[j] * x[j] for j in range(len(x))]
        if P.arch_variant == "no_mlp":
            phi = xt
        else:
            h = []
            for k in range(P.d_h):
                a = P.b1[k] + sum(P.W1[k, j] * xt[j] for j in range(len(x)))
                v = np.tanh(a)
                if keep is not None:
                    v = v * keep[i, k] / (1 - rate)
                h.append(v)
            phi = [xt[j] + P.b2[j] + sum(P.W2[j, k] * h[k] for k in range(P.d_h)) for j in range(len(x))]
        out.append(sum(P.beta[j] * phi[j] for j in range(len(x))) + P.mu[0])
    return np.array(out)


def random_params(rng, p=3, d_h=4, arch="full"):
    P = init_params(p, d_h, rng, arch_variant=arch)
    for arr in P.arrays().values():
        arr[...] = rng.normal(size=arr.shape)
    return P


def test_zero_mlp_is_linear(rng):
    P = init_params(3, 5, rng)
    P.W1[:] = 0
    P.W2[:] = 0
    P.beta[:] = rng.normal(size=3)
    P.mu[0] = 0.7
    X = rng.normal(size=(6, 3))
    s, _ = forward(P, X, np.ones(3))
    np.testing.assert_array_equal(s, X @ P.beta + 0.7)


def test_closed_gates_give_mu(rng):
    P = random_params(rng)
    P.b1[:] = 0
    P.b2[:] = 0
    s, _ = forward(P, rng.normal(size=(4, 3)), np.zeros(3))
    np.testing.assert_array_equal(s, P.mu[0])


@pytest.mark.parametrize("arch", ["full", "no_mlp"])
def test_matches_longhand(rng, arch):
    P = random_params(rng, arch=arch)
    X = rng.normal(size=(5, 3))
    g = rng.uniform(size=3)
    s, _ = forward(P, X, g)
    np.testing.assert_allclose(s, straight_line_scores(P, X, g), rtol=0, atol=1e-12)


def test_dropout_matches_longhand(rng):
    P = random_params(rng)
    P.dropout_rate = 0.25
    X = rng.normal(size=(5, 3))
    keep = rng.random((5, 4)) > 0.25
    s, _ = forward(P, X, np.ones(3), keep)
    np.testing.assert_allclose(s, straight_line_scores(P, X, np.ones(3), keep, 0.25), atol=1e-12)


def test_shape_mismatch(rng):
    P = random_params(rng)
    with pytest.raises(ValidationError):
        forward(P, rng.normal(size=(5, 4)), np.ones(3))
    with pytest.raises(ValidationError):
        forward(P, rng.normal(size=(5, 3)), np.ones(4))


def test_zero_cotangent(rng):
    P = random_params(rng)
    _, cache = forward(P, rng.normal(size=(5, 3)), np.ones(3))
    grads, dg = backward(cache, np.zeros(5))
    assert all(np.all(v == 0) for v in grads.values()) and np.all(dg == 0)


def test_no_mlp_grads(rng):
    P = random_params(rng, arch="no_mlp")
    X = rng.normal(size=(5, 3))
    g = rng.uniform(size=3)
    w = rng.normal(size=5)
    _, cache = forward(P, X, g)
    grads, _ = backward(cache, w)
    assert set(grads) == {"beta", "mu"}
    np.testing.assert_allclose(grads["beta"], (w[:, None] * X * g).sum(axis=0), atol=1e-14)
    assert grads["mu"][0] == pytest.approx(w.sum())


@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("arch", ["full", "no_mlp"])
def test_backward_fd(seed, arch):
    rng = np.random.default_rng(seed)
    P = random_params(rng, arch=arch)
    X = rng.normal(size=(5, 3))
    g = rng.uniform(0.1, 0.9, 3)
    w = rng.normal(size=5)

    def f():
        return float(w @ forward(P, X, g)[0])

    _, cache = forward(P, X, g)
    grads, dg = backward(cache, w)
    for name, arr in P.arrays().items():
        assert np.all(rel_err(grads[name], central_diff(f, arr)) < 1e-4), name
    assert np.all(rel_err(dg, central_diff(f, g)) < 1e-4)


def test_backward_fd_with_dropout(rng):
    P = random_params(rng)
    X = rng.normal(size=(5, 3))
    g = rng.uniform(0.1, 0.9, 3)
    keep = rng.random((5, 4)) > 0.2
    w = rng.normal(size=5)

    def f():
        return float(w @ forward(P, X, g, keep)[0])

    _, cache = forward(P, X, g, keep)
    grads, _ = backward(cache, w)
    for name, arr in P.arrays().items():
        assert np.all(rel_err(grads[name], central_diff(f, arr)) < 1e-4), name


def test_linear_rescaling_invariance(rng):
    P = random_params(rng, arch="no_mlp")
    X = rng.normal(size=(6, 3))
    s0, _ = forward(P, X, np.ones(3))
    c = 3.7
    X2 = X.copy()
    X2[:, 1] *= c
    P.beta[1] /= c
    s1, _ = forward(P, X2, np.ones(3))
    np.testing.assert_allclose(s1, s0, atol=1e-10)


def test_init_rules(rng):
    P = init_params(4, 8, rng, mu0=1.3)
    assert np.all(np.abs(P.W1) <= 0.5) and np.all(np.abs(P.W2) <= 1 / np.sqrt(8))
    assert np.all(P.beta == 0) and P.mu[0] == 1.3
    assert init_params(4, 8, rng, arch_variant="no_mlp").d_h == 0
