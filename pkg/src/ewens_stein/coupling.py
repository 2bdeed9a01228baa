"""Stein pairs, square-bias index/configuration sampling, and the
approximate zero-bias coupling.

The pipeline: an exchangeable pair (Y', Y'') comes from conjugating an
Ewens permutation by a uniformly chosen transposition; reweighting the
pair law by (y'-y'')^2 gives the square-bias pair (Y†, Y‡), realized
constructively by sampling an index pair, then pre/post-image constraints,
then surgically editing the original permutation to satisfy them; finally
Y* = U Y† + (1-U) Y‡ is the approximate zero-bias variable, coupled close
to Y' (within 20 M).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .ewens import (
    EwensParams,
    constrained_prob,
    falling_factorial,
    sample_crp,
    sample_crp_images,
)
from .permutations import Permutation, reduce_delete
from .statistic import (
    ScoreMatrix,
    _case_constraints,
    _distinct_square_sum,
    _pair_power_stats,
    b_value,
    iter_case_configs,
    statistic,
)

__all__ = [
    "SteinPairSample",
    "SquareBiasConfig",
    "CouplingSample",
    "make_stein_pair",
    "index_square_bias_weights",
    "sample_prepost",
    "SquareBiasSampler",
    "construct_dagger",
    "sample_approx_zero_bias",
    "sample_zero_bias_batch",
    "constructive_square_bias_law",
]

# Full per-pair configuration tables are enumerated up to this n (O(n^4)
# configurations per pair); beyond it configurations are drawn coordinate
# by coordinate from closed-form conditional marginals.
MAX_TABLE_N = 12

# Enumerating the sampler's full randomness is only feasible while the
# survivor sets stay tiny.
MAX_CONSTRUCTIVE_N = 6


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


# ---------------------------------------------------------------------------
# Stein pair
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SteinPairSample:
    """One draw of the exchangeable pair: pi_double = tau pi_prime tau."""

    pi_prime: Permutation
    i: int
    j: int
    pi_double: Permutation
    y_prime: float
    y_double: float


def make_stein_pair(A: ScoreMatrix, perm: Permutation, seed=None) -> SteinPairSample:
    """Conjugate perm by a uniformly random transposition (I, J).

    The pair (Y', Y'') built this way is exchangeable with lambda = 4/n:
    E[Y''|Y'] = (1 - 4/n) Y' + R(Y').
    """
    n = A.n
    if n < 6:
        raise ValueError(f"the case analysis requires n >= 6, got n = {n}")
    if perm.n != n:
        raise ValueError(f"permutation of [{perm.n}] vs matrix of size {n}")
    rng = _as_rng(seed)
    i = int(rng.integers(1, n + 1))
    j = int(rng.integers(1, n))
    if j >= i:
        j += 1
    double = perm.conjugate_by_transposition(i, j)
    return SteinPairSample(
        pi_prime=perm,
        i=i,
        j=j,
        pi_double=double,
        y_prime=statistic(A, perm),
        y_double=statistic(A, double),
    )


# ---------------------------------------------------------------------------
# Square-bias configurations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SquareBiasConfig:
    """A sampled index pair with pre/post-image constraints.

    r, s are the required pre-images of i, j; k, l the required images.
    weight is the configuration's unnormalized mass b^2 * P(constraints).
    """

    i: int
    j: int
    r: int
    s: int
    k: int
    l: int
    case: str
    weight: float

    def __post_init__(self) -> None:
        from .statistic import _check_case_args

        _check_case_args(self.case, self.i, self.j, self.r, self.s, self.k, self.l)
        if not self.weight > 0.0:
            raise ValueError(
                f"square-bias configurations carry positive weight; got {self.weight}"
            )

    def constraint_map(self) -> dict[int, int]:
        return _case_constraints(self.i, self.j, self.r, self.s, self.k, self.l)

    def deleted_labels(self) -> frozenset[int]:
        return frozenset((self.i, self.j, self.r, self.s))


def _config_weight(
    A: ScoreMatrix,
    params: EwensParams,
    i: int,
    j: int,
    case: str,
    r: int,
    s: int,
    k: int,
    l: int,
) -> float:
    b = b_value(i, j, r, s, k, l, case, A)
    if b == 0.0:
        return 0.0
    pm = _case_constraints(i, j, r, s, k, l)
    return b * b * constrained_prob(pm, params)


def index_square_bias_weights(A: ScoreMatrix, params: EwensParams) -> np.ndarray:
    """Unnormalized sampling weights for the index pair (I†, J†).

    Entry (i, j), i != j, is E[b^2(i, j, ...)] = sum over configurations of
    b^2 times the constraint probability.  Normalizing the matrix gives the
    index-pair law; the grand sum divided by n(n-1) is E(Y'-Y'')^2.
    """
    n = params.n
    if A.n != n:
        raise ValueError(f"matrix is {A.n}x{A.n} but params.n = {n}")
    if n < 6:
        raise ValueError(f"the case analysis requires n >= 6, got n = {n}")
    W = np.zeros((n, n))
    if n <= MAX_TABLE_N:
        for i in range(1, n + 1):
            for j in range(1, n + 1):
                if i == j:
                    continue
                W[i - 1, j - 1] = math.fsum(
                    _config_weight(A, params, i, j, case, r, s, k, l)
                    for case, r, s, k, l in iter_case_configs(n, i, j)
                )
    else:
        for i in range(1, n + 1):
            for j in range(1, n + 1):
                if i == j:
                    continue
                W[i - 1, j - 1] = math.fsum(
                    w for _, w in _pair_bucket_weights(A, params, i, j)
                )
    if not W.any():
        raise ValueError(
            "degenerate square bias: (Y'-Y'')^2 has zero expectation for this matrix"
        )
    return W


def _pair_bucket_weights(
    A: ScoreMatrix, params: EwensParams, i: int, j: int
) -> list[tuple[str, float]]:
    """Closed-form weight of each sub-case bucket for one ordered pair.

    Bucket keys name the case and, where a case splits, the coincidence
    pattern.  Summing over buckets reproduces the enumerated pair weight.
    """
    n, theta = params.n, params.theta
    m = n - 2
    c, q1, q2 = _pair_power_stats(A.centered, i, j)
    d3 = falling_factorial(theta + n - 1, 3)
    d4 = falling_factorial(theta + n - 1, 4)
    t2 = theta * theta
    s1_cycle = _distinct_square_sum(m, q1, q2, c, (-2.0,))
    s1_chain = _distinct_square_sum(m, q1, q2, c, (-1.0, -1.0))
    s3_chain = _distinct_square_sum(m, q1, q2, 0.0, (1.0, -1.0))
    s51 = _distinct_square_sum(m, q1, q2, 0.0, (2.0, -2.0))
    s52 = _distinct_square_sum(m, q1, q2, 0.0, (2.0, -1.0, -1.0))
    s54_chain = _distinct_square_sum(m, q1, q2, 0.0, (1.0, 0.0, -1.0))
    s54_free = _distinct_square_sum(m, q1, q2, 0.0, (1.0, -1.0, 1.0, -1.0))
    return [
        ("A1:cycle", t2 * s1_cycle / d3),
        ("A1:chain", theta * s1_chain / d3),
        ("A2:cycle", t2 * s1_cycle / d3),
        ("A2:chain", theta * s1_chain / d3),
        ("A3:chain", s3_chain / d3),
        ("A4:chain", s3_chain / d3),
        ("A5_1", t2 * s51 / d4),
        ("A5_2", theta * s52 / d4),
        ("A5_3", theta * s52 / d4),
        ("A5_4:chain_sk", s54_chain / d4),
        ("A5_4:chain_lr", s54_chain / d4),
        ("A5_4:free", s54_free / d4),
    ]


class SquareBiasSampler:
    """Sampler for (I†, J†) and their pre/post-image configuration.

    For n <= MAX_TABLE_N every configuration of every pair is enumerated
    once into per-pair tables (exact inverse-CDF sampling).  For larger n
    the pair and sub-case bucket are drawn from closed-form weights and the
    constrained labels are then drawn one coordinate at a time from their
    exact conditional marginals, each an O(n) vectorized computation.
    """

    def __init__(self, A: ScoreMatrix, params: EwensParams):
        if A.n != params.n:
            raise ValueError(f"matrix is {A.n}x{A.n} but params.n = {params.n}")
        if params.n < 6:
            raise ValueError(
                f"the case analysis requires n >= 6, got n = {params.n}"
            )
        self.A = A
        self.params = params
        self.n = params.n
        self.use_tables = self.n <= MAX_TABLE_N
        W = index_square_bias_weights(A, params)
        self.pair_weights = W
        flat = W.ravel()
        self._pair_cum = np.cumsum(flat)
        self._total = self._pair_cum[-1]
        self._tables: dict[tuple[int, int], tuple] = {}
        self._buckets: dict[tuple[int, int], tuple] = {}
        self._case_id = {case: idx for idx, case in enumerate(
            ("A1", "A2", "A3", "A4", "A5_1", "A5_2", "A5_3", "A5_4")
        )}
        self._id_case = {v: k for k, v in self._case_id.items()}

    # -- pair level --------------------------------------------------------

    def sample_pair(self, rng: np.random.Generator) -> tuple[int, int]:
        pos = int(np.searchsorted(self._pair_cum, rng.random() * self._total, side="right"))
        pos = min(pos, self.n * self.n - 1)
        return pos // self.n + 1, pos % self.n + 1

    # -- table route ---------------------------------------------------------

    def _pair_table(self, i: int, j: int):
        key = (i, j)
        tab = self._tables.get(key)
        if tab is None:
            cases, rs, ss, ks, ls, ws = [], [], [], [], [], []
            for case, r, s, k, l in iter_case_configs(self.n, i, j):
                w = _config_weight(self.A, self.params, i, j, case, r, s, k, l)
                if w > 0.0:
                    cases.append(self._case_id[case])
                    rs.append(r)
                    ss.append(s)
                    ks.append(k)
                    ls.append(l)
                    ws.append(w)
            tab = (
                np.array(cases, dtype=np.int8),
                np.array(rs, dtype=np.int16),
                np.array(ss, dtype=np.int16),
                np.array(ks, dtype=np.int16),
                np.array(ls, dtype=np.int16),
                np.cumsum(np.array(ws)),
            )
            self._tables[key] = tab
        return tab

    # -- sequential route ----------------------------------------------------

    def _pair_context(self, i: int, j: int):
        """u-vector machinery for one pair: pool labels, u values, stats."""
        key = (i, j)
        ctx = self._buckets.get(key)
        if ctx is None:
            n = self.n
            centered = self.A.centered
            pool = np.array(
                [x for x in range(1, n + 1) if x != i and x != j], dtype=np.intp
            )
            u = centered[pool - 1, i - 1] - centered[pool - 1, j - 1]
            c, q1, q2 = _pair_power_stats(centered, i, j)
            buckets = _pair_bucket_weights(self.A, self.params, i, j)
            names = [b[0] for b in buckets]
            cum = np.cumsum(np.array([b[1] for b in buckets]))
            ctx = (pool, u, c, q1, q2, names, cum)
            self._buckets[key] = ctx
        return ctx

    @staticmethod
    def _draw(weights: np.ndarray, rng: np.random.Generator) -> int:
        w = np.clip(weights, 0.0, None)
        cum = np.cumsum(w)
        total = cum[-1]
        if not total > 0.0:
            raise ValueError(
                "degenerate square bias: conditional weights sum to zero"
            )
        pos = int(np.searchsorted(cum, rng.random() * total, side="right"))
        return min(pos, len(w) - 1)

    def _sample_sequential(
        self, i: int, j: int, rng: np.random.Generator
    ) -> tuple[str, int, int, int, int]:
        pool, u, c, q1, q2, names, cum = self._pair_context(i, j)
        m = len(pool)
        total = cum[-1]
        bucket = names[
            min(
                int(np.searchsorted(cum, rng.random() * total, side="right")),
                len(names) - 1,
            )
        ]

        def pick(weights) -> int:
            return self._draw(weights, rng)

        if bucket in ("A1:cycle", "A2:cycle"):
            w = (c - 2.0 * u) ** 2
            x = pick(w)
            lab = int(pool[x])
            if bucket.startswith("A1"):
                return "A1", i, lab, i, lab
            return "A2", lab, j, lab, j
        if bucket in ("A1:chain", "A2:chain"):
            alpha = c - u
            q1e, q2e = q1 - u, q2 - u * u
            w = (m - 1) * alpha**2 - 2.0 * alpha * q1e + q2e
            x = pick(w)
            first = int(pool[x])
            mask = pool != first
            w2 = (c - u[x] - u[mask]) ** 2
            second = int(pool[mask][pick(w2)])
            if bucket.startswith("A1"):
                return "A1", i, first, i, second  # s = first, l = second
            return "A2", first, j, second, j  # r = first, k = second
        if bucket in ("A3:chain", "A4:chain"):
            w = (m - 1) * u**2 - 2.0 * u * (q1 - u) + (q2 - u * u)
            x = pick(w)
            first = int(pool[x])
            mask = pool != first
            w2 = (u[x] - u[mask]) ** 2
            second = int(pool[mask][pick(w2)])
            if bucket.startswith("A3"):
                return "A3", first, i, j, second  # r = first, l = second
            return "A4", j, first, second, i  # s = first, k = second
        if bucket == "A5_1":
            w = (m - 1) * u**2 - 2.0 * u * (q1 - u) + (q2 - u * u)
            x = pick(w)
            r = int(pool[x])
            mask = pool != r
            s = int(pool[mask][pick((u[x] - u[mask]) ** 2)])
            return "A5_1", r, s, r, s
        if bucket in ("A5_2", "A5_3"):
            # |b| = |2u_first - u_second - u_third| with first the 2-cycle label
            alpha = 2.0 * u
            q1e, q2e = q1 - u, q2 - u * u
            w = (
                falling_factorial(m - 1, 2) * alpha**2
                - 4.0 * alpha * (m - 2) * q1e
                + 2.0 * (m - 2) * q2e
                + 2.0 * (q1e * q1e - q2e)
            )
            x = pick(w)
            first = int(pool[x])
            mask = pool != first
            up = u[mask]
            alpha2 = 2.0 * u[x] - up
            q1f, q2f = q1 - u[x] - up, q2 - u[x] ** 2 - up * up
            w2 = (m - 2) * alpha2**2 - 2.0 * alpha2 * q1f + q2f
            y = pick(w2)
            second = int(pool[mask][y])
            mask2 = mask & (pool != second)
            w3 = (2.0 * u[x] - u[pool == second][0] - u[mask2]) ** 2
            third = int(pool[mask2][pick(w3)])
            if bucket == "A5_2":
                return "A5_2", first, second, first, third
            return "A5_3", second, first, third, first
        if bucket in ("A5_4:chain_sk", "A5_4:chain_lr"):
            # squared gap (u_a - u_b)^2 over ordered distinct (a, b), free middle
            w = (m - 1) * u**2 - 2.0 * u * (q1 - u) + (q2 - u * u)
            x = pick(w)
            a = int(pool[x])
            mask = pool != a
            b_lab = int(pool[mask][pick((u[x] - u[mask]) ** 2)])
            rest = pool[(pool != a) & (pool != b_lab)]
            free = int(rest[int(rng.integers(0, len(rest)))])
            if bucket.endswith("chain_sk"):
                # chain r -> i -> k -> j -> l with k free: b = u_r - u_l
                return "A5_4", a, free, free, b_lab
            # chain s -> j -> r -> i -> k with r = l free: b = u_k - u_s
            return "A5_4", free, b_lab, a, free
        # A5_4:free
        alpha = u
        q1e, q2e = q1 - u, q2 - u * u
        w = (
            falling_factorial(m - 1, 3) * alpha**2
            - 2.0 * alpha * falling_factorial(m - 2, 2) * q1e
            + 3.0 * falling_factorial(m - 2, 2) * q2e
            - 2.0 * (m - 3) * (q1e * q1e - q2e)
        )
        x = pick(w)
        r = int(pool[x])
        ur = u[x]
        mask_r = pool != r
        up = u[mask_r]
        alpha2 = ur - up
        q1f, q2f = q1 - ur - up, q2 - ur**2 - up * up
        w2 = (
            falling_factorial(m - 2, 2) * alpha2**2
            + 2.0 * (m - 3) * q2f
            - 2.0 * (q1f * q1f - q2f)
        )
        y = pick(w2)
        s = int(pool[mask_r][y])
        us = u[pool == s][0]
        mask_rs = mask_r & (pool != s)
        uq = u[mask_rs]
        alpha3 = ur + uq - us
        q1g = q1 - ur - us - uq
        q2g = q2 - ur**2 - us**2 - uq * uq
        w3 = (m - 3) * alpha3**2 - 2.0 * alpha3 * q1g + q2g
        z = pick(w3)
        k = int(pool[mask_rs][z])
        uk = u[pool == k][0]
        mask_rsk = mask_rs & (pool != k)
        w4 = (ur + uk - us - u[mask_rsk]) ** 2
        l = int(pool[mask_rsk][pick(w4)])
        return "A5_4", r, s, k, l

    # -- public sampling ----------------------------------------------------

    def sample_config(
        self, i: int, j: int, rng: np.random.Generator
    ) -> SquareBiasConfig:
        if self.use_tables:
            cases, rs, ss, ks, ls, cum = self._pair_table(i, j)
            total = cum[-1]
            pos = int(np.searchsorted(cum, rng.random() * total, side="right"))
            pos = min(pos, len(cum) - 1)
            case = self._id_case[int(cases[pos])]
            r, s, k, l = int(rs[pos]), int(ss[pos]), int(ks[pos]), int(ls[pos])
        else:
            case, r, s, k, l = self._sample_sequential(i, j, rng)
        w = _config_weight(self.A, self.params, i, j, case, r, s, k, l)
        return SquareBiasConfig(i=i, j=j, r=r, s=s, k=k, l=l, case=case, weight=w)

    def sample(self, rng: np.random.Generator) -> SquareBiasConfig:
        i, j = self.sample_pair(rng)
        return self.sample_config(i, j, rng)


def sample_prepost(
    i: int, j: int, A: ScoreMatrix, params: EwensParams, seed=None
) -> SquareBiasConfig:
    """Draw (r, s, k, l) with probability proportional to b^2 times the
    constraint probability, for a fixed index pair.

    Convenience wrapper that builds a sampler per call; hot paths should
    hold a SquareBiasSampler and reuse it.
    """
    sampler = SquareBiasSampler(A, params)
    if not sampler.pair_weights[i - 1, j - 1] > 0.0:
        raise ValueError(
            f"degenerate square bias: pair ({i}, {j}) carries zero weight"
        )
    return sampler.sample_config(i, j, _as_rng(seed))


# ---------------------------------------------------------------------------
# The dagger construction
# ---------------------------------------------------------------------------


def _realize(rho: dict[int, int], C: dict[int, int], n: int) -> Permutation:
    """Insert the constraint map C into the reduced permutation rho.

    rho is a permutation of the survivors [n] minus the deleted labels;
    every deleted label is a source of C.  Components of C that close into
    cycles are inserted as new cycles; components that end at a survivor t
    are spliced in front of t (the survivor previously mapping to t now
    maps to the chain's head).  Chains are processed in sorted-head order;
    their ends are distinct so the insertions commute.
    """
    image = dict(rho)
    values = set(C.values())
    rho_inv = {v: k for k, v in rho.items()}
    visited: set[int] = set()
    for head in sorted(x for x in C if x not in values):
        x = head
        while x in C:
            image[x] = C[x]
            visited.add(x)
            x = C[x]
        image[rho_inv[x]] = head
    for start in sorted(C):
        if start in visited:
            continue
        x = start
        while x not in visited:
            image[x] = C[x]
            visited.add(x)
            x = C[x]
    return Permutation([image[x] for x in range(1, n + 1)])


def construct_dagger(pi: Permutation, config: SquareBiasConfig) -> Permutation:
    """Edit pi to satisfy the sampled constraints, leaving the rest intact.

    The distinct members of D = {i, j, r, s} are deleted from pi's cycle
    representation and reinserted to realize {pi(r)=i, pi(s)=j, pi(i)=k,
    pi(j)=l}; all other elements keep their (reduced) images, so
    reduce_delete(pi, D) == reduce_delete(pi_dagger, D).
    """
    n = pi.n
    D = config.deleted_labels()
    C = config.constraint_map()
    rho = reduce_delete(pi, D)
    dagger = _realize(rho, C, n)
    if (
        dagger(config.r) != config.i
        or dagger(config.s) != config.j
        or dagger(config.i) != config.k
        or dagger(config.j) != config.l
    ):
        raise RuntimeError(f"construction failed to realize constraints {C}")
    if reduce_delete(dagger, D) != rho:
        raise RuntimeError(
            "construction disturbed the permutation outside the deleted labels"
        )
    diffs = sum(1 for x in range(1, n + 1) if dagger(x) != pi(x))
    if diffs > 10:
        raise RuntimeError(
            f"construction changed {diffs} positions; the case bound is 10"
        )
    return dagger


# ---------------------------------------------------------------------------
# The approximate zero-bias coupling
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CouplingSample:
    """One realization of (Y', Y†, Y‡, Y*) with its audit trail."""

    pi: Permutation
    config: SquareBiasConfig
    pi_dagger: Permutation
    pi_ddagger: Permutation
    u: float
    y_prime: float
    y_dagger: float
    y_ddagger: float
    y_star: float

    def to_json(self) -> dict:
        cfg = self.config
        return {
            "pi": self.pi.to_list(),
            "i": cfg.i,
            "j": cfg.j,
            "r": cfg.r,
            "s": cfg.s,
            "k": cfg.k,
            "l": cfg.l,
            "case": cfg.case,
            "u": self.u,
            "y_prime": self.y_prime,
            "y_dagger": self.y_dagger,
            "y_ddagger": self.y_ddagger,
            "y_star": self.y_star,
        }


def sample_approx_zero_bias(
    A: ScoreMatrix,
    params: EwensParams,
    seed=None,
    *,
    sampler: SquareBiasSampler | None = None,
) -> CouplingSample:
    """Draw one coupled sample (pi, config, pi†, pi‡, U, Y', Y†, Y‡, Y*).

    All coupling invariants are enforced: the conjugation relation, the
    interpolation identity, the reduce_delete equality (inside
    construct_dagger), and the 20 M closeness bound.
    """
    rng = _as_rng(seed)
    if sampler is None:
        sampler = SquareBiasSampler(A, params)
    pi = sample_crp(params, rng)
    config = sampler.sample(rng)
    dagger = construct_dagger(pi, config)
    ddagger = dagger.conjugate_by_transposition(config.i, config.j)
    u = float(rng.random())
    y_prime = statistic(A, pi)
    y_dagger = statistic(A, dagger)
    y_ddagger = statistic(A, ddagger)
    y_star = u * y_dagger + (1.0 - u) * y_ddagger
    if y_dagger == y_ddagger:
        raise RuntimeError(
            "square-bias sample produced equal statistics; weight should vanish there"
        )
    gap = abs(y_star - y_prime)
    limit = 20.0 * A.max_abs
    if gap > limit + 1e-9 * max(limit, 1.0):
        raise RuntimeError(
            f"coupling gap {gap} exceeds the 20 M bound {limit}"
        )
    return CouplingSample(
        pi=pi,
        config=config,
        pi_dagger=dagger,
        pi_ddagger=ddagger,
        u=u,
        y_prime=y_prime,
        y_dagger=y_dagger,
        y_ddagger=y_ddagger,
        y_star=y_star,
    )


def sample_zero_bias_batch(
    A: ScoreMatrix,
    params: EwensParams,
    count: int,
    seed=None,
    *,
    sampler: SquareBiasSampler | None = None,
) -> dict[str, np.ndarray]:
    """Vectorized zero-bias sampling returning arrays of the four statistics.

    Identical in law to repeated sample_approx_zero_bias but avoids
    materializing Permutation objects: the permutation surgery touches at
    most 10 positions, so Y† is computed incrementally from Y'.
    """
    rng = _as_rng(seed)
    if sampler is None:
        sampler = SquareBiasSampler(A, params)
    n = params.n
    centered = A.centered
    rows_c = A.row_lists()
    images = sample_crp_images(params, rng, count)
    inverses = np.empty_like(images)
    cols = np.arange(1, n + 1)
    rowidx = np.arange(count)[:, None]
    inverses[rowidx, images - 1] = cols[None, :]
    y_prime = centered[np.arange(n)[None, :], images - 1].sum(axis=1)

    y_dagger = np.empty(count)
    y_ddagger = np.empty(count)
    us = np.empty(count)
    limit = 20.0 * A.max_abs + 1e-9 * max(20.0 * A.max_abs, 1.0)
    for t in range(count):
        img = images[t]
        inv = inverses[t]
        config = sampler.sample(rng)
        D = (config.i, config.j, config.r, config.s)
        Dset = set(D)
        C = _case_constraints(config.i, config.j, config.r, config.s, config.k, config.l)
        change: dict[int, int] = {}
        # survivors that pointed into D now skip through it
        for d in Dset:
            x = int(inv[d - 1])
            if x in Dset:
                continue
            y = int(img[d - 1])
            while y in Dset:
                y = int(img[y - 1])
            change[x] = y
        # chain insertions and cycle closures
        values = set(C.values())
        visited: set[int] = set()
        for head in sorted(x for x in C if x not in values):
            x = head
            while x in C:
                change[x] = C[x]
                visited.add(x)
                x = C[x]
            # back-walk to the survivor that reduces onto the chain's end
            y = int(inv[x - 1])
            while y in Dset:
                y = int(inv[y - 1])
            change[y] = head
        for start in sorted(C):
            if start in visited:
                continue
            x = start
            while x not in visited:
                change[x] = C[x]
                visited.add(x)
                x = C[x]
        yd = float(y_prime[t]) + math.fsum(
            rows_c[x - 1][new - 1] - rows_c[x - 1][img[x - 1] - 1]
            for x, new in change.items()
        )
        b = b_value(
            config.i, config.j, config.r, config.s, config.k, config.l,
            config.case, A,
        )
        u = float(rng.random())
        y_dagger[t] = yd
        y_ddagger[t] = yd - b
        us[t] = u
    y_star = us * y_dagger + (1.0 - us) * y_ddagger
    gaps = np.abs(y_star - y_prime)
    worst = float(gaps.max()) if count else 0.0
    if worst > limit:
        raise RuntimeError(f"coupling gap {worst} exceeds the 20 M bound")
    return {
        "y_prime": y_prime,
        "y_dagger": y_dagger,
        "y_ddagger": y_ddagger,
        "y_star": y_star,
        "u": us,
    }


# ---------------------------------------------------------------------------
# Exact law of the constructive sampler (small n)
# ---------------------------------------------------------------------------


def constructive_square_bias_law(A: ScoreMatrix, params: EwensParams):
    """Exact law of (Y†, Y‡) under the constructive sampler, by enumerating
    all of its randomness: the index pair, the configuration, and the
    reduced permutation left after deleting D.

    The reduced permutation's law is the push-forward of the Ewens measure
    under deletion, tabulated once per deleted-label set.  Comparing the
    result to the direct (y', y'')-reweighted law validates the construction
    end to end.
    """
    from .ewens import ewens_pmf
    from .oracle import DiscreteLaw, enumerate_permutations

    n = params.n
    if n > MAX_CONSTRUCTIVE_N:
        raise ValueError(
            f"constructive enumeration is capped at n <= {MAX_CONSTRUCTIVE_N}; got n = {n}"
        )
    if A.n != n:
        raise ValueError(f"matrix is {A.n}x{A.n} but params.n = {n}")
    all_perms = list(enumerate_permutations(n))
    pmfs = [ewens_pmf(p, params) for p in all_perms]

    reduced_cache: dict[frozenset[int], dict[tuple, float]] = {}

    def reduced_law(D: frozenset[int]) -> dict[tuple, float]:
        law = reduced_cache.get(D)
        if law is None:
            law = {}
            survivors = sorted(x for x in range(1, n + 1) if x not in D)
            for perm, p in zip(all_perms, pmfs):
                rho = reduce_delete(perm, D)
                key = tuple(rho[x] for x in survivors)
                law[key] = law.get(key, 0.0) + p
            reduced_cache[D] = law
        return law

    W = index_square_bias_weights(A, params)
    total = float(W.sum())
    pairs: list[tuple[tuple[float, float], float]] = []
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            if i == j:
                continue
            for case, r, s, k, l in iter_case_configs(n, i, j):
                w = _config_weight(A, params, i, j, case, r, s, k, l)
                if w <= 0.0:
                    continue
                D = frozenset((i, j, r, s))
                survivors = sorted(x for x in range(1, n + 1) if x not in D)
                C = _case_constraints(i, j, r, s, k, l)
                for key, p_rho in reduced_law(D).items():
                    rho = dict(zip(survivors, key))
                    dagger = _realize(rho, C, n)
                    ddagger = dagger.conjugate_by_transposition(i, j)
                    y_d = statistic(A, dagger)
                    y_dd = statistic(A, ddagger)
                    pairs.append(((y_d, y_dd), w / total * p_rho))
    return DiscreteLaw(pairs, normalize=True)
