import numpy as np
import pytest

from conftest import three_sigma
from ptdlp.chain import ChainState, dmala_step, dula_step, local_moves, mh_accept_prob, run_chain
from ptdlp.energy import LogQuadraticModel
from ptdlp.oracle import exact_local_kernel, tempered_target, tv
from ptdlp.proposal import ChainParams, log_q
from ptdlp.space import DiscreteSpace, enumerate_states


def batch_run(model, x0, n_chains, n_steps, beta, alpha, adjusted, rng):
    x = np.broadcast_to(np.asarray(x0), (n_chains, model.space.dim)).copy()
    u, g = model.energy(x), model.gradient(x)
    for _ in range(n_steps):
        x, u, g, _ = local_moves(model, x, u, g, beta, alpha, 2.0, adjusted, rng.random(x.shape),
                                 rng.random(n_chains))
    return x


def test_mh_examples():
    assert mh_accept_prob(1.3, 1.3, -0.7, -0.7, 1.0) == 1.0
    assert mh_accept_prob(0.0, 5.0, 0.0, 0.0, 1.0) == 1.0
    assert mh_accept_prob(0.0, -np.log(2), -1.0, -1.0, 1.0) == pytest.approx(0.5, abs=1e-15)
    assert mh_accept_prob(0.0, -2 * np.log(2), 0.0, 0.0, 0.5) == pytest.approx(0.5, abs=1e-15)


@pytest.mark.parametrize("step", [dula_step, dmala_step])
def test_tiny_alpha_never_moves(step, lq2):
    ch = ChainState.start(lq2, [1, 0], ChainParams(1.0, 1e-4), seed=0)
    for _ in range(500):
        step(ch, lq2)
    assert ch.state.tolist() == [1, 0]


def test_single_point_space():
    space = DiscreteSpace.ordinal(2, 0)
    m = LogQuadraticModel(space, np.eye(2), np.ones(2))
    ch = ChainState.start(m, [0, 0], ChainParams(1.0, 0.5), seed=1)
    for _ in range(20):
        dula_step(ch, m)
        assert ch.state.tolist() == [0, 0]
        _, acc = dmala_step(ch, m)
        assert acc and ch.state.tolist() == [0, 0]


def test_dula_one_step_frequencies(rng, lq2):
    x0 = np.array([1, 0])
    prm = ChainParams(1.0, 0.5)
    states = enumerate_states(lq2.space)
    exact = np.array([np.exp(log_q(s, x0, lq2, prm)) for s in states])
    n = 1_000_000
    xn = batch_run(lq2, x0, n, 1, 1.0, 0.5, False, rng)
    freq = np.bincount(lq2.space.index_of(xn), minlength=4) / n
    assert np.all(np.abs(freq - exact) < three_sigma(exact, n))


def test_dmala_flat_target_uniform(rng):
    space = DiscreteSpace.binary(3)
    m = LogQuadraticModel(space, rng.normal(size=(3, 3)), rng.normal(size=3))
    n = 100_000
    x = batch_run(m, [0, 0, 0], n, 30, 0.0, 1.0, True, rng)
    freq = np.bincount(space.index_of(x), minlength=8) / n
    assert np.all(np.abs(freq - 1 / 8) < three_sigma(1 / 8, n))


def test_dmala_long_run_matches_target(rng, lq2):
    beta, alpha = 0.8, 0.6
    pi = tempered_target(lq2, beta)
    K = exact_local_kernel(lq2, ChainParams(beta, alpha), adjusted=True)
    n_steps = 40
    law = np.linalg.matrix_power(K.matrix, n_steps)[0]
    assert tv(law, pi) < 1e-6  # the independent chains below are effectively stationary
    n = 25_000  # 25k chains x 40 steps = 1e6 steps
    x = batch_run(lq2, [0, 0], n, n_steps, beta, alpha, True, rng)
    freq = np.bincount(lq2.space.index_of(x), minlength=4) / n
    assert np.all(np.abs(freq - pi) < three_sigma(pi, n))


def test_single_chain_time_average(lq2):
    ch = ChainState.start(lq2, [0, 0], ChainParams(1.0, 0.5), seed=7)
    xs = run_chain(ch, lq2, 200_000, adjusted=True)
    freq = np.bincount(lq2.space.index_of(xs), minlength=4) / len(xs)
    assert tv(freq, tempered_target(lq2)) < 0.01
    assert 0 < ch.acceptance_rate <= 1


def test_evaluation_budget(lq2):
    a = ChainState.start(lq2, [0, 0], ChainParams(), seed=0)
    b = ChainState.start(lq2, [0, 0], ChainParams(), seed=0)
    for _ in range(13):
        dula_step(a, lq2)
        dmala_step(b, lq2)
    assert a.n_grad == 13
    assert (b.n_grad, b.n_energy) == (26, 26)


def test_caches_consistent(rng, lq2):
    ch = ChainState.start(lq2, [0, 1], ChainParams(0.7, 0.9), seed=3)
    for _ in range(100):
        dmala_step(ch, lq2)
        assert ch.energy == pytest.approx(float(lq2.energy(ch.state)))
        assert np.allclose(ch.gradient, lq2.gradient(ch.state))


def test_seeded_reproducible(lq2):
    runs = [run_chain(ChainState.start(lq2, [0, 0], ChainParams(), seed=11), lq2, 200) for _ in range(2)]
    assert np.array_equal(*runs)
