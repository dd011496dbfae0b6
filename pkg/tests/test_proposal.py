import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import three_sigma
from ptdlp.energy import LogQuadraticModel
from ptdlp.proposal import (ChainParams, binary_flip_probs, coordinate_weights, log_q, log_weights, propose,
                            proposal_logits, sample_coordinates)
from ptdlp.space import DiscreteSpace, enumerate_states


def test_zero_gradient_flip():
    w = coordinate_weights(0.0, 0, ChainParams(1.0, 0.5), [0, 1])
    assert w[1] == pytest.approx(np.exp(-1) / (np.exp(-1) + 1), abs=1e-12)
    assert w[1] == pytest.approx(0.26894, abs=1e-5)


def test_flat_limit_is_uniform():
    w = coordinate_weights(3.7, 1, ChainParams(0.0, np.inf), np.arange(5))
    assert np.allclose(w, 0.2)


def test_ordinal_weights_high_precision():
    raw = np.exp(np.array([-1.5, 0.0, 0.5], dtype=np.longdouble))
    ref = (raw / raw.sum()).astype(float)
    w = coordinate_weights(2.0, 1, ChainParams(1.0, 1.0, 2.0), [0, 1, 2])
    assert np.allclose(w, ref, atol=1e-14)
    assert np.allclose(w, [0.07770, 0.34821, 0.57410], atol=1e-5)


def test_flip_probs_examples():
    prm = ChainParams(1.0, np.inf)
    assert binary_flip_probs([2.0], [0], prm)[0] == pytest.approx(np.e / (np.e + 1), abs=1e-12)
    assert binary_flip_probs([2.0], [1], prm)[0] == pytest.approx(np.exp(-1) / (np.exp(-1) + 1), abs=1e-12)


def test_flip_probs_match_coordinate_weights(rng):
    prm = ChainParams(0.7, 0.4)
    for _ in range(20):
        g = rng.normal(scale=3, size=6)
        x = rng.integers(0, 2, 6)
        pf = binary_flip_probs(g, x, prm)
        for i in range(6):
            w = coordinate_weights(g[i], x[i], prm, [0, 1])
            assert abs(pf[i] - w[1 - x[i]]) < 1e-14


def test_nonbinary_rejected():
    with pytest.raises(ValueError):
        binary_flip_probs([0.0], [2], ChainParams())


def test_nonfinite_gradient():
    with pytest.raises(ValueError):
        coordinate_weights(np.nan, 0, ChainParams(), [0, 1])


def test_params_validation():
    for bad in [dict(beta=1.5), dict(alpha=0.0), dict(p=0.5), dict(beta=-0.1)]:
        with pytest.raises(ValueError):
            ChainParams(**bad)


def test_flat_proposal_uniform(rng):
    space = DiscreteSpace.binary(4)
    m = LogQuadraticModel(space, rng.normal(size=(4, 4)), rng.normal(size=4))
    n = 100_000
    x = np.zeros((n, 4), dtype=np.int64)
    xn, _ = sample_coordinates(space, x, m.gradient(x), 0.0, np.inf, 2.0, rng.random(x.shape))
    assert np.all(np.abs(xn.mean(0) - 0.5) < three_sigma(0.5, n))


def test_tiny_alpha_stays(rng, lq2):
    prm = ChainParams(1.0, 1e-4)
    for _ in range(200):
        xn, lq = propose(np.array([1, 0]), lq2, prm, rng)
        assert xn.tolist() == [1, 0]
        assert lq == pytest.approx(0.0, abs=1e-12)


def test_d2_proposal_frequencies(rng, lq2):
    prm = ChainParams(1.0, 0.6)
    x0 = np.array([0, 1])
    states = enumerate_states(lq2.space)
    exact = np.array([np.exp(log_q(s, x0, lq2, prm)) for s in states])
    n = 1_000_000
    x = np.broadcast_to(x0, (n, 2))
    xn, _ = sample_coordinates(lq2.space, x, np.broadcast_to(lq2.gradient(x0), (n, 2)), 1.0, 0.6, 2.0,
                               rng.random((n, 2)))
    freq = np.bincount(lq2.space.index_of(xn), minlength=4) / n
    assert np.all(np.abs(freq - exact) < three_sigma(exact, n))


def test_self_proposal_mass(lq2):
    prm = ChainParams(0.8, 0.5)
    x = np.array([1, 1])
    lw = log_weights(lq2.space, x, lq2.gradient(x), 0.8, 0.5)
    assert log_q(x, x, lq2, prm) == pytest.approx(lw[0, 1] + lw[1, 1], abs=1e-14)
    assert np.isfinite(log_q(x, x, lq2, prm))


@pytest.mark.parametrize("space", [DiscreteSpace.binary(3), DiscreteSpace.ordinal(2, 3), DiscreteSpace.one_hot(2, 3)])
def test_log_q_normalizes(space, rng):
    n = space.extended_dim
    m = LogQuadraticModel(space, rng.normal(size=(n, n)), rng.normal(size=n))
    prm = ChainParams(0.6, 0.7, 1.5 if space.kind == "ordinal" else 2.0)
    states = enumerate_states(space)
    for x in states[:: max(1, len(states) // 5)]:
        total = sum(np.exp(log_q(y, x, m, prm)) for y in states)
        assert abs(total - 1.0) < 1e-10


def test_propose_log_q_agrees(rng):
    space = DiscreteSpace.ordinal(3, 4)
    m = LogQuadraticModel(space, rng.normal(size=(3, 3)), rng.normal(size=3))
    prm = ChainParams(0.9, 0.8)
    for _ in range(50):
        x = space.random_state(rng)
        xn, lq = propose(x, m, prm, rng)
        assert lq == log_q(xn, x, m, prm)


def test_one_hot_change_cost():
    space = DiscreteSpace.one_hot(1, 3)
    g = np.zeros((1, 3))
    lg = proposal_logits(space, np.array([1]), g, 1.0, 0.5)
    # any category change costs ||e_i - e_j||^2 / (2 alpha) = 2
    assert np.allclose(lg[0], [-2.0, 0.0, -2.0])


@settings(max_examples=50, deadline=None)
@given(st.floats(-20, 20), st.integers(0, 4), st.floats(0.0, 1.0), st.floats(0.01, 50), st.floats(1, 3),
       st.floats(-100, 100))
def test_normalization_and_shift_invariance(g, theta, beta, alpha, p, shift):
    support = np.arange(5)
    w = coordinate_weights(g, theta, ChainParams(beta, alpha, p), support)
    assert abs(w.sum() - 1.0) < 1e-12
    assert w[theta] > 0
    # adding a constant to every exponent (via a state-independent term) changes nothing
    delta = support - theta
    logits = 0.5 * beta * g * delta - np.abs(delta) ** p / (2 * alpha)
    for lg in (logits, logits + shift):
        v = np.exp(lg - lg.max())
        assert np.allclose(v / v.sum(), w, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 20), st.floats(0.05, 10))
def test_flip_monotone_in_beta(g, alpha):
    betas = np.linspace(0, 1, 21)
    pf = [binary_flip_probs([g], [0], beta=b, alpha=alpha)[0] for b in betas]
    assert np.all(np.diff(pf) >= 0)
