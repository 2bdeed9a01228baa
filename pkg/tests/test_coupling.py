import math

import numpy as np
import pytest

from ewens_stein.coupling import (
    MAX_CONSTRUCTIVE_N,
    MAX_TABLE_N,
    SquareBiasConfig,
    SquareBiasSampler,
    construct_dagger,
    constructive_square_bias_law,
    index_square_bias_weights,
    make_stein_pair,
    sample_approx_zero_bias,
    sample_prepost,
    sample_zero_bias_batch,
)
from ewens_stein.ewens import EwensParams, constrained_prob, sample_crp_images
from ewens_stein.oracle import exact_square_bias_law
from ewens_stein.permutations import Permutation, cycle_type, reduce_delete
from ewens_stein.statistic import b_value, center, classify, statistic, variance_decomposition


def random_centered(n, theta, seed):
    rng = np.random.default_rng(seed)
    raw = rng.random((n, n))
    return center((raw + raw.T) / 2.0, EwensParams(n=n, theta=theta))


def test_make_stein_pair_consistency():
    n = 7
    A = random_centered(n, 1.0, 1)
    pi = Permutation([3, 1, 2, 5, 4, 7, 6])
    seen = set()
    for t in range(800):
        s = make_stein_pair(A, pi, seed=t)
        assert s.pi_prime == pi
        assert s.pi_double == pi.conjugate_by_transposition(s.i, s.j)
        assert s.y_prime == statistic(A, pi)
        assert s.y_double == pytest.approx(statistic(A, s.pi_double))
        assert 1 <= s.i <= n and 1 <= s.j <= n and s.i != s.j
        seen.add((s.i, s.j))
    # all 42 ordered pairs occur in 800 draws
    assert len(seen) == n * (n - 1)


def test_make_stein_pair_preserves_cycle_type():
    A = random_centered(6, 1.0, 2)
    pi = Permutation.from_cycles(6, [(1, 2, 3), (4, 5)])
    for t in range(50):
        s = make_stein_pair(A, pi, seed=t)
        assert cycle_type(s.pi_double) == cycle_type(pi)


def test_make_stein_pair_size_guard():
    A = random_centered(6, 1.0, 3)
    with pytest.raises(ValueError):
        make_stein_pair(A, Permutation([2, 1, 3]), seed=0)


def test_square_bias_config_validation():
    cfg = SquareBiasConfig(i=1, j=2, r=3, s=4, k=3, l=5, case="A5_2", weight=0.1)
    assert cfg.constraint_map() == {3: 1, 4: 2, 1: 3, 2: 5}
    assert cfg.deleted_labels() == frozenset({1, 2, 3, 4})
    with pytest.raises(ValueError, match="positive weight"):
        SquareBiasConfig(i=1, j=2, r=3, s=4, k=3, l=5, case="A5_2", weight=0.0)
    with pytest.raises(ValueError, match="inconsistent with case"):
        SquareBiasConfig(i=1, j=2, r=3, s=4, k=5, l=6, case="A5_1", weight=0.1)


def test_index_weights_sum_to_ydiff():
    """grand sum of E[b^2] over ordered pairs = n(n-1) E(Y'-Y'')^2."""
    for n, theta in ((6, 0.5), (6, 1.0), (7, 2.0)):
        params = EwensParams(n=n, theta=theta)
        A = random_centered(n, theta, 10 + n)
        W = index_square_bias_weights(A, params)
        assert W.shape == (n, n)
        assert np.all(np.diag(W) == 0.0)
        assert np.all(W >= 0.0)
        dec = variance_decomposition(A, params)
        assert float(W.sum()) / (n * (n - 1)) == pytest.approx(
            dec.e_ydiff_sq, rel=1e-12
        )


def test_index_weights_degenerate():
    params = EwensParams(n=6, theta=1.0)
    A = center(np.zeros((6, 6)), params)
    with pytest.raises(ValueError, match="degenerate square bias"):
        index_square_bias_weights(A, params)


def test_sampler_agrees_between_routes():
    """Closed-form pair weights (large-n route) equal enumerated ones."""
    n = 9
    params = EwensParams(n=n, theta=1.2)
    A = random_centered(n, 1.2, 77)
    sampler = SquareBiasSampler(A, params)
    assert sampler.use_tables  # n = 9 <= MAX_TABLE_N
    clone = SquareBiasSampler(A, params)
    clone.use_tables = False
    W = index_square_bias_weights(A, params)
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            if i == j:
                continue
            total = clone._pair_context(i, j)[6][-1]
            assert total == pytest.approx(W[i - 1, j - 1], rel=1e-12)


def test_sampled_configs_have_positive_exact_weight():
    n = 7
    params = EwensParams(n=n, theta=0.9)
    A = random_centered(n, 0.9, 23)
    sampler = SquareBiasSampler(A, params)
    rng = np.random.default_rng(5)
    for _ in range(400):
        cfg = sampler.sample(rng)
        assert cfg.case in ("A1", "A2", "A3", "A4", "A5_1", "A5_2", "A5_3", "A5_4")
        b = b_value(cfg.i, cfg.j, cfg.r, cfg.s, cfg.k, cfg.l, cfg.case, A)
        w = b * b * constrained_prob(cfg.constraint_map(), params)
        assert w > 0.0
        assert cfg.weight == pytest.approx(w, rel=1e-12)


def test_sequential_route_samples_the_same_law():
    """Bucket frequencies from the sequential sampler match the tables."""
    n = 8
    params = EwensParams(n=n, theta=1.1)
    A = random_centered(n, 1.1, 31)
    tables = SquareBiasSampler(A, params)
    seq = SquareBiasSampler(A, params)
    seq.use_tables = False

    def bucket(cfg):
        return (cfg.case, cfg.r == cfg.l, cfg.s == cfg.k)

    draws = 20_000
    rng1 = np.random.default_rng(9)
    rng2 = np.random.default_rng(10)
    f1, f2 = {}, {}
    for _ in range(draws):
        c1 = tables.sample_config(2, 6, rng1)
        c2 = seq._sample_sequential(2, 6, rng2)
        cfg2 = (c2[0], c2[1], c2[2], c2[3], c2[4])
        f1[bucket(c1)] = f1.get(bucket(c1), 0) + 1
        key2 = (cfg2[0], cfg2[1] == cfg2[4], cfg2[2] == cfg2[3])
        f2[key2] = f2.get(key2, 0) + 1
    for key in set(f1) | set(f2):
        p1 = f1.get(key, 0) / draws
        p2 = f2.get(key, 0) / draws
        se = math.sqrt(max(p1 * (1 - p1), 1e-9) / draws)
        assert abs(p1 - p2) <= 6.0 * se + 1e-3


def test_sample_prepost_matches_pair_conditional():
    n = 6
    params = EwensParams(n=n, theta=1.3)
    A = random_centered(n, 1.3, 41)
    cfg = sample_prepost(2, 5, A, params, seed=0)
    assert (cfg.i, cfg.j) == (2, 5)
    assert cfg.weight > 0


def test_sample_prepost_zero_weight_pair():
    # rows 1 and 2 identical (and equal diagonal) kill every b for (1, 2)
    n = 6
    raw = np.ones((n, n))
    raw[3, 3] = 5.0
    params = EwensParams(n=n, theta=1.0)
    A = center(raw, params)
    with pytest.raises(ValueError, match=r"pair \(1, 2\) carries zero weight"):
        sample_prepost(1, 2, A, params, seed=0)


def test_construct_dagger_realizes_constraints():
    n = 8
    params = EwensParams(n=n, theta=1.4)
    A = random_centered(n, 1.4, 55)
    sampler = SquareBiasSampler(A, params)
    rng = np.random.default_rng(12)
    for _ in range(300):
        img = rng.permutation(np.arange(1, n + 1))
        pi = Permutation(img.tolist())
        cfg = sampler.sample(rng)
        dagger = construct_dagger(pi, cfg)
        assert dagger.inverse(cfg.i) == cfg.r
        assert dagger.inverse(cfg.j) == cfg.s
        assert dagger(cfg.i) == cfg.k
        assert dagger(cfg.j) == cfg.l
        assert classify(cfg.i, cfg.j, dagger) == cfg.case
        # outside the deleted labels the reduced permutation is untouched
        D = cfg.deleted_labels()
        assert reduce_delete(dagger, D) == reduce_delete(pi, D)
        assert sum(1 for x in range(1, n + 1) if dagger(x) != pi(x)) <= 10


def test_construct_dagger_hand_example():
    # pi = (1 2 3 4 5)(6 7 8); force pi(1) = 3 with 2 = pre(1), 4 = pre(5)... :
    # config in case A5_4 with i=1, j=5, r=2, s=4, k=3, l=6
    pi = Permutation.from_cycles(8, [(1, 2, 3, 4, 5), (6, 7, 8)])
    cfg = SquareBiasConfig(i=1, j=5, r=2, s=4, k=3, l=6, case="A5_4", weight=1.0)
    dagger = construct_dagger(pi, cfg)
    assert dagger(2) == 1 and dagger(1) == 3
    assert dagger(4) == 5 and dagger(5) == 6
    # reduction by D = {1, 2, 4, 5} must match: pi reduced there is (3)(6 7 8)
    assert reduce_delete(dagger, {1, 2, 4, 5}) == {3: 3, 6: 7, 7: 8, 8: 6}


def test_constructive_law_matches_oracle():
    """The from-scratch construction has exactly the square-bias law."""
    n = 6
    for theta in (1.0, 2.0):
        params = EwensParams(n=n, theta=theta)
        A = random_centered(n, theta, 61)
        law = constructive_square_bias_law(A, params)
        oracle_law = exact_square_bias_law(A.centered, params)
        assert law.tv_distance(oracle_law) <= 1e-10
    with pytest.raises(ValueError, match="capped at n <= 6"):
        constructive_square_bias_law(random_centered(7, 1.0, 62), EwensParams(n=7, theta=1.0))


def test_sample_approx_zero_bias_invariants():
    n = 7
    params = EwensParams(n=n, theta=1.6)
    A = random_centered(n, 1.6, 71)
    sampler = SquareBiasSampler(A, params)
    limit = 20.0 * A.max_abs
    for t in range(200):
        s = sample_approx_zero_bias(A, params, seed=t, sampler=sampler)
        assert 0.0 <= s.u <= 1.0
        assert s.y_star == pytest.approx(
            s.u * s.y_dagger + (1.0 - s.u) * s.y_ddagger
        )
        assert s.y_prime == pytest.approx(statistic(A, s.pi))
        assert s.y_dagger == pytest.approx(statistic(A, s.pi_dagger))
        assert s.pi_ddagger == s.pi_dagger.conjugate_by_transposition(
            s.config.i, s.config.j
        )
        assert s.y_dagger != s.y_ddagger
        assert abs(s.y_star - s.y_prime) <= limit * (1.0 + 1e-9)
        js = s.to_json()
        assert js["pi"] == s.pi.to_list()
        assert js["case"] == s.config.case


def test_batch_matches_scalar_construction():
    """The vectorized surgery reproduces construct_dagger exactly on a
    shared randomness stream, on both the table and sequential routes."""
    for n, theta in ((8, 1.0), (13, 1.7)):
        params = EwensParams(n=n, theta=theta)
        A = random_centered(n, theta, 80 + n)
        sampler = SquareBiasSampler(A, params)
        assert sampler.use_tables == (n <= MAX_TABLE_N)
        count = 60
        out = sample_zero_bias_batch(
            A, params, count, seed=np.random.default_rng([1, n]), sampler=sampler
        )
        rng = np.random.default_rng([1, n])
        images = sample_crp_images(params, rng, count)
        for t in range(count):
            cfg = sampler.sample(rng)
            u = float(rng.random())
            pi = Permutation([int(v) for v in images[t]])
            dagger = construct_dagger(pi, cfg)
            ddagger = dagger.conjugate_by_transposition(cfg.i, cfg.j)
            assert out["u"][t] == u
            assert out["y_prime"][t] == pytest.approx(statistic(A, pi), abs=1e-12)
            assert out["y_dagger"][t] == pytest.approx(
                statistic(A, dagger), abs=1e-12
            )
            assert out["y_ddagger"][t] == pytest.approx(
                statistic(A, ddagger), abs=1e-12
            )


def test_batch_respects_gap_bound():
    n = 10
    params = EwensParams(n=n, theta=0.5)
    A = random_centered(n, 0.5, 90)
    out = sample_zero_bias_batch(A, params, 5_000, seed=3)
    gaps = np.abs(out["y_star"] - out["y_prime"])
    assert float(gaps.max()) <= 20.0 * A.max_abs * (1.0 + 1e-9)
    assert out["y_prime"].shape == (5_000,)


def test_caps_are_what_they_claim():
    assert MAX_TABLE_N == 12
    assert MAX_CONSTRUCTIVE_N == 6
