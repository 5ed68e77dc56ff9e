import itertools

import numpy as np
import pytest

from lzspa.filtering import (
    MARKOV_CHANNEL,
    Channel,
    ChannelError,
    FilterConfig,
    HMMTrueSPA,
    LossMatrix,
    MarkovSource,
    bayes_response,
    causal_filter,
    clean_marginal,
    delayed_filter,
    dp_optimal_filter,
    exact_marginal,
    excess_loss_bound,
    kl_estimate_nats,
    lookahead_filter,
    mc_marginal,
    posterior_F,
    run_filter,
    simulate_markov_channel,
    squared_loss_pm1,
)
from lzspa.spa import DirichletSPA
from lzspa.transform import LZTransformSPA


def brute_posteriors(source, channel, zs, config):
    """P(X_t | observation window) by summing the joint law over every clean sequence."""
    n, k = len(zs), source.transition.shape[0]
    post = np.zeros((n, k))
    for xs in itertools.product(range(k), repeat=n):
        prior = source.initial[xs[0]] * np.prod([source.transition[a, b] for a, b in zip(xs, xs[1:])])
        if prior == 0:
            continue
        for t in range(n):
            if config.regime == "causal":
                window = range(t + 1)
            elif config.regime == "delay":
                window = range(max(t - config.lag + 1, 0))
            else:
                window = range(min(n, t + config.lag + 1))
            like = np.prod([channel.pi[xs[s], zs[s]] for s in window])
            post[t, xs[t]] += prior * like
    return post / post.sum(axis=1, keepdims=True)


# -- channel and decisions -------------------------------------------------------


def test_markov_channel_pseudo_inverse_and_c1():
    ch = Channel(MARKOV_CHANNEL)
    np.testing.assert_allclose(ch.inv_t, [[4 / 3, 2 / 3, -2 / 3], [-2 / 3, 2 / 3, 4 / 3]], atol=1e-12)
    assert ch.c1 == pytest.approx(8 / 3, abs=1e-12)
    np.testing.assert_allclose(ch.inv_t @ ch.pi.T, np.eye(2), atol=1e-12)


def test_channel_validation():
    with pytest.raises(ChannelError):
        Channel(np.array([[0.5, 0.6], [0.5, 0.5]]))
    with pytest.raises(ChannelError):
        Channel(np.array([[0.5, 0.5], [0.5, 0.5]]))


def test_bayes_response_basics():
    assert bayes_response([0.9, 0.1], LossMatrix.hamming(2)) == 0
    # symmetric tie between -1 and +1 under squared loss: lowest index wins
    assert bayes_response([0.5, 0.5], LossMatrix.squared([-1.0, 1.0])) == 0


def test_bayes_response_matches_enumeration():
    rng = np.random.default_rng(0)
    lam = np.array([[0.0, 2.0, 5.0, 1.0], [3.0, 0.0, 1.0, 2.5], [1.0, 4.0, 0.0, 2.0]])
    loss = LossMatrix(lam)
    for _ in range(200):
        p = rng.dirichlet(np.ones(3))
        expected = [sum(p[x] * lam[x, xh] for x in range(3)) for xh in range(4)]
        assert bayes_response(p, loss) == int(np.argmin(expected))
        # positive rescaling never changes the decision
        assert bayes_response(p, LossMatrix(7.5 * lam)) == bayes_response(p, loss)


def test_squared_loss_grid_response_is_posterior_mean():
    loss = squared_loss_pm1()
    assert loss.lambda_max == pytest.approx(4.0)
    for p_plus in (0.0, 0.1, 0.37, 0.5, 0.92, 1.0):
        idx = bayes_response([1 - p_plus, p_plus], loss)
        assert loss.recon[idx] == pytest.approx(2 * p_plus - 1, abs=0.005 + 1e-9)


def test_posterior_map_cases():
    post, neg = posterior_F([0.2, 0.5, 0.3], Channel.identity(3), 1)
    np.testing.assert_allclose(post, [0, 1, 0], atol=1e-12)
    post, _ = posterior_F([0.5, 0.5], Channel.bsc(0.1), 0)
    np.testing.assert_allclose(post, [0.9, 0.1], atol=1e-12)
    ch = Channel(MARKOV_CHANNEL)
    post, neg = posterior_F([0.25, 0.5, 0.25], ch, 2)
    np.testing.assert_allclose(post, [0, 1], atol=1e-12)
    assert neg == 0.0
    with pytest.raises(ChannelError):
        posterior_F([0.5, 0.5, 0.0], ch, 2)


def test_posterior_map_reports_clamping():
    # (0.1, 0.1, 0.8) inverts to (-1/3, 1.1): negative mass 1/3
    post, neg = posterior_F([0.1, 0.1, 0.8], Channel(MARKOV_CHANNEL), 1)
    assert neg == pytest.approx(1 / 3, abs=1e-12)
    np.testing.assert_allclose(post, [0, 1], atol=1e-12)


def test_identity_channel_causal_filter_copies_observations():
    rng = np.random.default_rng(1)
    zs = rng.integers(0, 3, 300).tolist()
    res = causal_filter(LZTransformSPA(3, gamma=0.5), Channel.identity(3), LossMatrix.hamming(3), zs)
    assert res.estimates.tolist() == zs


# -- the known-source oracle -------------------------------------------------------


@pytest.mark.parametrize("regime", ["causal", "delay:1", "delay:2", "delay:3", "lookahead:1", "lookahead:2"])
def test_dp_oracle_matches_brute_force(regime):
    rng = np.random.default_rng(2)
    source = MarkovSource(np.array([[0.8, 0.2], [0.3, 0.7]]), np.array([0.6, 0.4]))
    ch = Channel(MARKOV_CHANNEL)
    cfg = FilterConfig.parse(regime)
    for _ in range(3):
        zs = rng.integers(0, 3, 7)
        # drop sequences impossible under the channel
        try:
            brute = brute_posteriors(source, ch, zs, cfg)
        except FloatingPointError:
            continue
        if np.isnan(brute).any():
            continue
        _, _, posts = dp_optimal_filter(source, ch, squared_loss_pm1(), zs, cfg)
        np.testing.assert_allclose(posts, brute, atol=1e-12)


def test_dp_oracle_iid_uniform_source():
    # flip probability 1/2: z = 1 carries no information, so the estimate is 0 with squared error 1
    x, z = simulate_markov_channel(0.5, 5000, seed=3)
    est, _, posts = dp_optimal_filter(MarkovSource.symmetric_binary(0.5), Channel(MARKOV_CHANNEL),
                                      squared_loss_pm1(), z, FilterConfig())
    mid = z == 1
    np.testing.assert_allclose(posts[mid], 0.5, atol=1e-12)
    values = squared_loss_pm1().recon[est]
    assert np.all(values[mid] == 0.0)
    assert np.mean((values[mid] - x[mid]) ** 2) == pytest.approx(1.0)


def test_dp_oracle_frozen_chain_gets_sharp():
    losses = []
    for p in (0.1, 0.01, 0.001):
        x, z = simulate_markov_channel(p, 20000, seed=4)
        _, m, _ = dp_optimal_filter(MarkovSource.symmetric_binary(p), Channel(MARKOV_CHANNEL),
                                    squared_loss_pm1(), z, FilterConfig(), x)
        losses.append(m)
    assert losses[0] > losses[1] > losses[2] and losses[2] < 0.05


def test_lookahead_helps_the_oracle():
    x, z = simulate_markov_channel(0.1, 20000, seed=5)
    src, ch, loss = MarkovSource.symmetric_binary(0.1), Channel(MARKOV_CHANNEL), squared_loss_pm1()
    mses = {r: dp_optimal_filter(src, ch, loss, z, FilterConfig.parse(r), x)[1]
            for r in ("lookahead:2", "causal", "delay:2")}
    assert mses["lookahead:2"] <= mses["causal"] <= mses["delay:2"]


# -- mismatched estimators ---------------------------------------------------------


@pytest.mark.parametrize("regime", ["causal", "lookahead:1", "lookahead:2"])
def test_true_law_reproduces_oracle(regime):
    x, z = simulate_markov_channel(0.1, 1000, seed=6)
    src, ch, loss = MarkovSource.symmetric_binary(0.1), Channel(MARKOV_CHANNEL), squared_loss_pm1()
    cfg = FilterConfig.parse(regime)
    res = run_filter(HMMTrueSPA(src, ch), ch, loss, z.tolist(), cfg)
    est, _, posts = dp_optimal_filter(src, ch, loss, z, cfg)
    np.testing.assert_allclose(res.posteriors, posts, atol=1e-9)
    np.testing.assert_array_equal(res.estimates, est)


def test_lookahead_zero_is_causal():
    rng = np.random.default_rng(7)
    zs = rng.integers(0, 3, 400).tolist()
    ch, loss = Channel(MARKOV_CHANNEL), squared_loss_pm1()
    a = causal_filter(LZTransformSPA(3, gamma=0.5), ch, loss, zs)
    b = lookahead_filter(LZTransformSPA(3, gamma=0.5), ch, loss, zs, 0)
    np.testing.assert_array_equal(a.estimates, b.estimates)
    np.testing.assert_array_equal(a.posteriors, b.posteriors)


def test_delay_one_inverts_the_next_symbol_law():
    rng = np.random.default_rng(8)
    zs = rng.integers(0, 3, 300).tolist()
    ch, loss = Channel(MARKOV_CHANNEL), squared_loss_pm1()
    res = delayed_filter(LZTransformSPA(3, gamma=0.5), ch, loss, zs, 1)
    spa = LZTransformSPA(3, gamma=0.5)
    for t, z in enumerate(zs):
        np.testing.assert_allclose(res.posteriors[t], clean_marginal(spa.next_dist(), ch)[0], atol=1e-12)
        spa.observe(z)


def test_exact_marginal_matches_enumeration():
    rng = np.random.default_rng(9)
    spa = LZTransformSPA(3, gamma=0.5).train([rng.integers(0, 3, 600).tolist()])
    for s in rng.integers(0, 3, 5).tolist():
        spa.observe(s)
    fp = spa.tree.state_fingerprint()
    expected = np.zeros(3)
    for a, b in itertools.product(range(3), repeat=2):
        snap = spa.snapshot()
        w = spa.prob(a)
        spa.observe(a)
        w *= spa.prob(b)
        spa.observe(b)
        expected += w * spa.next_dist()
        spa.restore(snap)
    np.testing.assert_allclose(exact_marginal(spa, 2), expected, atol=1e-12)
    assert spa.tree.state_fingerprint() == fp


def test_monte_carlo_marginal_is_close_to_exact():
    rng = np.random.default_rng(10)
    spa = LZTransformSPA(2, gamma=0.5).train([rng.integers(0, 2, 2000).tolist()])
    exact = exact_marginal(spa, 2)
    approx = mc_marginal(spa, 2, 10**5, np.random.default_rng(0))
    assert 0.5 * np.abs(exact - approx).sum() <= 0.02
    assert approx.sum() == pytest.approx(1.0)


def test_monte_carlo_matches_independent_rollouts_in_distribution():
    # hierarchical multinomial draws have the same mean as plain rollouts
    spa = DirichletSPA(3, 0.5)
    spa.observe(0)
    exact = exact_marginal(spa, 3)
    runs = np.array([mc_marginal(spa, 3, 50, np.random.default_rng(s)) for s in range(400)])
    np.testing.assert_allclose(runs.mean(axis=0), exact, atol=0.01)


def test_delayed_filter_mc_and_exact_agree_roughly():
    x, z = simulate_markov_channel(0.1, 2000, seed=11)
    ch, loss = Channel(MARKOV_CHANNEL), squared_loss_pm1()
    ex = delayed_filter(LZTransformSPA(3, gamma=0.5), ch, loss, z.tolist(), 3, method="exact")
    mc = delayed_filter(LZTransformSPA(3, gamma=0.5), ch, loss, z.tolist(), 3, mc_samples=5000, method="mc")
    assert np.abs(ex.posteriors - mc.posteriors).max() < 0.1


def test_filter_config_parsing():
    assert FilterConfig.parse("delay:2", 100, 3) == FilterConfig("delay", 2, 100, 3)
    assert FilterConfig.parse("causal").label == "causal"
    with pytest.raises(ValueError):
        FilterConfig.parse("smooth:1")


# -- bound and the experiment -------------------------------------------------------


def test_excess_loss_bound_constants():
    ch, loss = Channel(MARKOV_CHANNEL), squared_loss_pm1()
    assert excess_loss_bound(0.0, 100, ch, loss).bound == 0.0
    b = excess_loss_bound(5.0, 100, ch, loss)
    assert b.bound == pytest.approx(np.sqrt(2 * (8 / 3) * 4.0) * np.sqrt(0.05))
    d1 = excess_loss_bound(5.0, 100, ch, loss, FilterConfig("delay", 1))
    d4 = excess_loss_bound(5.0, 100, ch, loss, FilterConfig("delay", 4))
    assert d4.bound / d1.bound == pytest.approx(2.0)
    la = excess_loss_bound(5.0, 100, ch, loss, FilterConfig("lookahead", 3))
    assert la.bound / b.bound == pytest.approx(2.0)


def test_kl_estimate_is_zero_against_itself_and_non_mutating():
    _, z = simulate_markov_channel(0.1, 500, seed=12)
    src, ch = MarkovSource.symmetric_binary(0.1), Channel(MARKOV_CHANNEL)
    assert kl_estimate_nats(z.tolist(), HMMTrueSPA(src, ch), HMMTrueSPA(src, ch)) == pytest.approx(0.0, abs=1e-9)
    model = LZTransformSPA(3, gamma=0.5)
    kl_estimate_nats(z.tolist(), HMMTrueSPA(src, ch), model)
    assert model.tree.phrase_count() == 1


def test_simulation_statistics():
    x, z = simulate_markov_channel(0.1, 10**6, seed=13)
    assert abs(np.mean(x[1:] != x[:-1]) - 0.1) < 0.005
    assert np.all(x[z == 2] == 1) and np.all(x[z == 0] == -1)
    _, z = simulate_markov_channel(0.5, 10**6, seed=14)
    np.testing.assert_allclose(np.bincount(z, minlength=3) / z.size, [0.25, 0.5, 0.25], atol=0.01)
