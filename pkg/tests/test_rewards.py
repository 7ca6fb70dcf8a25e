import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rank_ucr.glm import PROB_EPS, GlmFamily
from rank_ucr.rewards import AggregationSpec, aggregate, expected_list_reward, instant_regret, optimal_slate
from rank_ucr.simenv import Context, Environment, Slate, generate_context, generate_environment

ADD = AggregationSpec.additive()
CTR = AggregationSpec.click_through()

# seeded N=3, K=2, d=2 environment; the reward below was evaluated by hand
# with math.exp on these literal parameters
GOLDEN_ALPHA = [0.12857020276919962, 0.49927786244011496, 0.6014983576233575]
GOLDEN_BETA = [
    [-0.6810038331625402, -0.39763975155196685],
    [-0.41264600782035055, 0.44577617248986967],
    [-0.05352903280650207, 0.713109153250793],
]
GOLDEN_X = [0.3, -0.4]
GOLDEN_ITEMS = (2, 0)
GOLDEN_REWARD = 0.9092896470640566


def all_slates(N, K):
    return itertools.permutations(range(N), K)


# -- aggregate ----------------------------------------------------------------


@pytest.mark.parametrize(
    "spec, mus, items, expected",
    [
        (ADD, [0.2, 0.3], [0, 1], 0.5),
        (CTR, [0.5, 0.5], [0, 1], 0.75),
        (AggregationSpec.revenue([2.0, 10.0]), [0.5, 0.1], [0, 1], 2.0),
        (AggregationSpec.revenue([10.0, 3.0, 2.0]), [0.5, 0.1], [2, 0], 2.0),
    ],
)
def test_aggregate_examples(spec, mus, items, expected):
    assert aggregate(spec, mus, items) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("mu", [[1.0], [-0.1], [np.nan]])
def test_click_through_domain(mu):
    with pytest.raises(ValueError):
        aggregate(CTR, mu, [0])


def test_aggregate_length_mismatch():
    with pytest.raises(ValueError):
        aggregate(ADD, [0.1, 0.2], [0])


@pytest.mark.parametrize(
    "bad",
    [
        lambda: AggregationSpec.revenue([]),
        lambda: AggregationSpec.revenue([1.0, 0.0]),
        lambda: AggregationSpec("click_through", (1.0,)),
        lambda: AggregationSpec.from_dict({"kind": "additive", "extra": 1}),
        lambda: AggregationSpec("watchtime"),
    ],
)
def test_invalid_specs(bad):
    with pytest.raises(ValueError):
        bad()


@pytest.mark.parametrize("spec", [ADD, CTR, AggregationSpec.revenue([1.5, 2.0])])
def test_spec_dict_round_trip(spec):
    assert AggregationSpec.from_dict(spec.to_dict()) == spec


def test_click_through_identity():
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(10_000):
        K = int(rng.integers(1, 8))
        mu = rng.uniform(0, 1 - 1e-6, size=K)
        worst = max(worst, abs(aggregate(CTR, mu, range(K)) - (1 - np.prod(1 - mu))))
    assert worst <= 1e-12


@settings(max_examples=300, deadline=None)
@given(
    st.lists(st.floats(0, 0.99), min_size=1, max_size=5),
    st.data(),
    st.sampled_from(["additive", "revenue", "click_through"]),
)
def test_monotone_in_each_mean(mu, data, kind):
    K = len(mu)
    spec = AggregationSpec.revenue(np.linspace(1, 3, K)) if kind == "revenue" else AggregationSpec(kind)
    k = data.draw(st.integers(0, K - 1))
    bumped = list(mu)
    bumped[k] = data.draw(st.floats(mu[k], 0.99))
    assert aggregate(spec, bumped, range(K)) >= aggregate(spec, mu, range(K))


def test_weights_clamp_click_through():
    w = CTR.weights(np.array([[1.0, 0.0]]))
    assert np.isfinite(w).all()
    assert w[0, 0] == pytest.approx(-math.log(PROB_EPS), rel=1e-6)


# -- expected reward ------------------------------------------------------------


def golden_env():
    return Environment(3, 2, 2, GOLDEN_ALPHA, GOLDEN_BETA, spec=ADD, seed=11)


def test_golden_additive_reward():
    env = golden_env()
    got = expected_list_reward(env, ADD, Context(GOLDEN_X), Slate(GOLDEN_ITEMS, 3))
    assert got == pytest.approx(GOLDEN_REWARD, rel=1e-13)


def test_golden_environment_is_seed_eleven():
    env = generate_environment(11, 3, 2, 2, spec=ADD)
    np.testing.assert_allclose(env.alpha, GOLDEN_ALPHA, rtol=1e-15)
    np.testing.assert_allclose(env.beta, GOLDEN_BETA, rtol=1e-15)


def test_additive_is_plain_sum_and_k1_is_single_item():
    env = golden_env()
    ctx = Context(GOLDEN_X)
    mu = env.true_means(ctx)
    assert expected_list_reward(env, ADD, ctx, Slate((1, 2), 3)) == pytest.approx(mu[1, 0] + mu[2, 1], abs=1e-15)
    env1 = Environment(3, 1, 2, GOLDEN_ALPHA, GOLDEN_BETA, spec=CTR)
    mu1 = env1.true_means(ctx)
    assert expected_list_reward(env1, CTR, ctx, Slate((2,), 3)) == pytest.approx(mu1[2, 0], abs=1e-15)


def test_slate_must_fit_environment():
    env = golden_env()
    with pytest.raises(ValueError):
        expected_list_reward(env, ADD, Context(GOLDEN_X), Slate((0,), 3))


# -- optimal slate and regret -------------------------------------------------


def test_single_item_single_slot():
    env = generate_environment(0, 1, 1, 3)
    slate, value = optimal_slate(env, CTR, Context([0.1, 0.2, 0.3]))
    assert slate.items == (0,)
    assert value == pytest.approx(env.true_means(Context([0.1, 0.2, 0.3]))[0, 0])


@pytest.mark.parametrize("kind", ["additive", "revenue", "click_through"])
def test_optimal_slate_matches_enumeration(kind):
    rng = np.random.default_rng(["additive", "revenue", "click_through"].index(kind))
    for seed in range(200):
        N = int(rng.integers(1, 6))
        K = int(rng.integers(1, min(N, 3) + 1))
        spec = AggregationSpec.revenue(rng.uniform(0.5, 5, N)) if kind == "revenue" else AggregationSpec(kind)
        env = generate_environment(seed, N, K, 3, spec=spec)
        ctx = generate_context(rng, 3)
        slate, value = optimal_slate(env, spec, ctx)
        values = [expected_list_reward(env, spec, ctx, Slate(s, N)) for s in all_slates(N, K)]
        assert value == pytest.approx(max(values), abs=1e-12)
        assert all(value >= v - 1e-12 for v in values)


def test_scaling_additive_weights_keeps_argmax():
    rng = np.random.default_rng(5)
    for seed in range(50):
        base = generate_environment(seed, 5, 3, 4, family=GlmFamily.linear(), spec=ADD)
        doubled = Environment(5, 3, 4, 2 * base.alpha, 2 * base.beta, family=GlmFamily.linear(), spec=ADD)
        ctx = generate_context(rng, 4)
        assert optimal_slate(base, ADD, ctx)[0] == optimal_slate(doubled, ADD, ctx)[0]


def test_regret_zero_at_optimum_and_gap_otherwise():
    env = generate_environment(4, 2, 1, 2)
    ctx = Context([0.5, -0.5])
    best, _ = optimal_slate(env, CTR, ctx)
    worst = Slate((1 - best.items[0],), 2)
    assert instant_regret(env, CTR, ctx, best) == 0.0
    values = [expected_list_reward(env, CTR, ctx, Slate((j,), 2)) for j in range(2)]
    assert instant_regret(env, CTR, ctx, worst) == pytest.approx(max(values) - min(values), abs=1e-15)


def test_regret_invariant_to_relabelling():
    rng = np.random.default_rng(9)
    for seed in range(30):
        env = generate_environment(seed, 5, 3, 3)
        perm = rng.permutation(5)
        relabelled = Environment(5, 3, 3, env.alpha[perm], env.beta[perm])
        inv = np.argsort(perm)
        ctx = generate_context(rng, 3)
        slate = Slate(rng.permutation(5)[:3], 5)
        moved = Slate(inv[list(slate.items)], 5)
        assert instant_regret(relabelled, CTR, ctx, moved) == pytest.approx(instant_regret(env, CTR, ctx, slate), abs=1e-12)
        assert instant_regret(env, CTR, ctx, slate) >= -1e-12
