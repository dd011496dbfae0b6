import itertools

import numpy as np
import pytest

from ptdlp.energy import (GridMixtureModel, ItemSumModel, LogQuadraticModel, MiniBatchEnergy, RbmModel,
                          VarianceWindow)
from ptdlp.space import DiscreteSpace, enumerate_states


def linear_items(space, items):
    def e(X, c):
        return X @ np.asarray(c, dtype=float).T

    def g(X, c):
        c = np.asarray(c, dtype=float)
        return np.broadcast_to(c, X.shape[:-1] + c.shape)

    return ItemSumModel(space, items, e, g)


def test_rbm_zero_params():
    rbm = RbmModel(np.zeros((3, 5)), np.zeros(3), np.zeros(5))
    x = np.array([1, 0, 1, 1, 0])
    assert rbm.energy(x) == pytest.approx(3 * np.log(2), abs=1e-14)
    assert np.allclose(rbm.gradient(x), 0.0)


def test_log_quadratic_examples():
    m = LogQuadraticModel(DiscreteSpace.binary(2), np.zeros((2, 2)), [1.0, 1.0])
    assert m.energy([1, 1]) == pytest.approx(2.0)
    m = LogQuadraticModel(DiscreteSpace.binary(2), np.eye(2), np.zeros(2))
    assert np.allclose(m.gradient([1, 0]), [2.0, 0.0])


def test_rbm_gradient_is_visible_bias_when_uncoupled(rng):
    b = rng.normal(size=4)
    rbm = RbmModel(np.zeros((3, 4)), rng.normal(size=3), b)
    X = enumerate_states(rbm.space)
    assert np.allclose(rbm.gradient(X), b)


def test_rbm_energy_matches_hidden_sum(rng):
    rbm = RbmModel.random(3, 4, rng)
    H = np.array(list(itertools.product([0, 1], repeat=3)), dtype=float)
    for x in enumerate_states(rbm.space):
        brute = np.exp(H @ (rbm.W @ x + rbm.a) + rbm.b @ x).sum()
        assert np.exp(rbm.energy(x)) == pytest.approx(brute, rel=1e-12)
        prod = np.prod(1 + np.exp(rbm.W @ x + rbm.a)) * np.exp(rbm.b @ x)
        assert np.exp(rbm.energy(x)) == pytest.approx(prod, rel=1e-12)


def _fd_check(model, xs, h=1e-5, rtol=1e-4):
    for x in np.asarray(xs, dtype=float):
        g = model._gradient(x)
        fd = np.empty_like(g)
        for i in range(x.size):
            e = np.zeros_like(x)
            e[i] = h
            fd[i] = (model._energy(x + e) - model._energy(x - e)) / (2 * h)
        scale = max(np.abs(fd).max(), 1.0)
        assert np.abs(g - fd).max() <= rtol * scale


@pytest.mark.parametrize("which", ["rbm", "lq", "mog", "mos"])
def test_gradient_finite_differences(which, rng):
    if which == "rbm":
        m = RbmModel.random(5, 7, rng)
    elif which == "lq":
        m = LogQuadraticModel(DiscreteSpace.binary(6), rng.normal(size=(6, 6)), rng.normal(size=6))
    else:
        m = GridMixtureModel.ring(4, family=which, scale=0.2)
    xs = m.space.random_state(rng, size=100)
    _fd_check(m, xs)


def test_dimension_mismatch():
    rbm = RbmModel(np.zeros((2, 3)), np.zeros(2), np.zeros(3))
    with pytest.raises(ValueError):
        rbm.energy([0, 1])


@pytest.mark.parametrize("family", ["mog", "mos"])
def test_grid_table_normalized(family):
    m = GridMixtureModel.ring(8, family=family)
    t = m.table()
    assert t.shape == (10_000,)
    assert abs(t.sum() - 1.0) < 1e-12


def test_mixture_validation():
    from ptdlp.energy import MixtureComponent

    with pytest.raises(ValueError):
        GridMixtureModel([MixtureComponent(0.5, np.zeros(2), np.eye(2))])
    with pytest.raises(ValueError):
        GridMixtureModel([MixtureComponent(1.0, np.zeros(2), -np.eye(2))])
    with pytest.raises(ValueError):
        GridMixtureModel([MixtureComponent(1.0, np.zeros(2), np.eye(2), dof=-1.0)], family="mos")


def test_mode_posteriors_normalized():
    m = GridMixtureModel.ring(8)
    P = m.mode_posteriors(m.grid_states()[::97])
    assert np.allclose(P.sum(1), 1.0)


def test_rbm_save_load(tmp_path, rng):
    rbm = RbmModel.random(3, 5, rng)
    rbm.save(tmp_path / "rbm.json")
    back = RbmModel.load(tmp_path / "rbm.json")
    for k, v in rbm.params().items():
        assert np.array_equal(v, back.params()[k])


# ------------------------------------------------------------ mini-batch


def test_full_batch_is_exact(rng):
    space = DiscreteSpace.binary(3)
    base = linear_items(space, rng.normal(size=(5, 3)))
    mb = MiniBatchEnergy(base, batch_size=5)
    x = np.array([1, 0, 1])
    w = VarianceWindow()
    for _ in range(10):
        u, g, s2 = mb.minibatch_estimates(x, rng, w)
        assert u == pytest.approx(base.energy(x), abs=1e-12)
        assert np.allclose(g, base.gradient(x))
    assert s2 == pytest.approx(0.0, abs=1e-12)


def test_single_item_dataset(rng):
    space = DiscreteSpace.binary(2)
    base = linear_items(space, [[0.7, -1.2]])
    mb = MiniBatchEnergy(base, batch_size=1)
    for x in enumerate_states(space):
        assert mb.minibatch_estimates(x, rng)[0] == pytest.approx(base.energy(x))


def test_two_item_estimator_distribution(rng):
    space = DiscreteSpace.binary(1)
    c = np.array([[1.5], [-0.5]])
    base = linear_items(space, c)
    mb = MiniBatchEnergy(base, batch_size=1)
    x = np.array([1])
    e1, e2 = c[:, 0]
    # the estimator takes the values 2 e1 and 2 e2 with probability 1/2 each
    values = np.array([2 * e1, 2 * e2])
    mean_exact, var_exact = values.mean(), values.var()
    assert mean_exact == pytest.approx(e1 + e2)
    assert var_exact == pytest.approx((e1 - e2) ** 2)
    n = 100_000
    draws = np.array([mb.minibatch_estimates(x, rng)[0] for _ in range(n)])
    assert set(np.unique(draws)) <= set(values)
    assert abs(draws.mean() - mean_exact) < 3 * np.sqrt(var_exact / n)
    # the windowed variance at a fixed state estimates Var(U_tilde)
    assert mb.window.value == pytest.approx(var_exact, rel=0.1)


@pytest.mark.parametrize("n_items", [2, 3, 4])
def test_minibatch_unbiased_by_enumeration(n_items, rng):
    space = DiscreteSpace.binary(2)
    base = linear_items(space, rng.normal(size=(n_items, 2)))
    for bs in range(1, n_items + 1):
        mb = MiniBatchEnergy(base, bs)
        for x in enumerate_states(space):
            ests = [mb.energy_on(x, list(idx)) for idx in itertools.combinations(range(n_items), bs)]
            assert np.mean(ests) == pytest.approx(base.energy(x), abs=1e-12)
            if bs >= 2:
                v = [mb.within_batch_variance(x, list(idx)) for idx in itertools.combinations(range(n_items), bs)]
                assert np.mean(v) == pytest.approx(np.var(ests), abs=1e-10)


def test_minibatch_errors():
    space = DiscreteSpace.binary(1)
    with pytest.raises(ValueError):
        linear_items(space, np.zeros((0, 1)))
    base = linear_items(space, [[1.0]])
    with pytest.raises(ValueError):
        MiniBatchEnergy(base, 2)
