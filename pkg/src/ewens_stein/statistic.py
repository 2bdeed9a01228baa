"""The combinatorial statistic Y = sum_i a_{i,pi(i)} and its Stein machinery.

Takes a symmetric score matrix through centering, the ten-case partition of
ordered index pairs, the pair-difference values b, the remainder statistic T
(whose conditional expectation is the Stein remainder R), the variance
decomposition of E(Y'-Y'')^2 into case sums, and closed-form bounds on the
remainder moments.

Conventions fixed here and used everywhere downstream:
  * matrices are centered internally (grand mean removed), so all Stein
    formulas may assume mean zero;
  * b = y' - y'' where pi'' = tau pi' tau is the transposition conjugate;
  * only symmetric matrices are accepted.
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
    sample_crp_images,
)
from .permutations import Permutation

__all__ = [
    "ScoreMatrix",
    "CASE_LABELS",
    "Remainder",
    "VarianceDecomposition",
    "grand_mean",
    "center",
    "statistic",
    "classify",
    "b_value",
    "iter_case_configs",
    "t_statistic",
    "exact_remainder",
    "variance_decomposition",
    "remainder_bounds",
]

# The ten-case partition of ordered pairs (i, j), i != j: A0 cases have
# b = 0, A1/A2 fix one of the two labels, A3/A4 map one onto the other,
# A5 subcases have {i, j, pi(i), pi(j)} all distinct and split by the
# cycle lengths |i|, |j|.
CASE_LABELS = (
    "A0_1",
    "A0_2",
    "A1",
    "A2",
    "A3",
    "A4",
    "A5_1",
    "A5_2",
    "A5_3",
    "A5_4",
)

# Direct distinct-tuple summation of the variance decomposition is
# O(n^6); past this size the algebraically identical closed form over
# per-pair power sums takes over.  Both routes are cross-checked in tests.
_DIRECT_BETA_MAX_N = 8

# sigma^2 at or below 1e-12 (n M)^2 is floating-point noise for sums of
# n^2 products and is treated as exactly degenerate.
DEGENERATE_SIGMA_FACTOR = 1e-12


@dataclass(frozen=True)
class ScoreMatrix:
    """A symmetric score matrix together with its centered form.

    ``centered`` is entries - grand_mean, the matrix actually entering every
    statistic; ``max_abs`` is M = max |centered|; ``theta_used`` records the
    Ewens parameter under which the grand mean was taken (it enters the
    diagonal weighting).
    """

    n: int
    entries: np.ndarray
    grand_mean: float
    centered: np.ndarray
    max_abs: float
    theta_used: float
    is_integer: bool

    def row_lists(self) -> list[list[float]]:
        # plain nested lists index faster than ndarray in the hot loops
        return self.centered.tolist()


def _check_square_symmetric(A: np.ndarray) -> np.ndarray:
    a = np.asarray(A, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"score matrix must be square, got shape {a.shape}")
    bad = np.argwhere(a != a.T)
    if bad.size:
        i, j = bad[0]
        raise ValueError(
            f"score matrix is not symmetric: entry ({i + 1}, {j + 1}) = {a[i, j]} "
            f"but ({j + 1}, {i + 1}) = {a[j, i]}"
        )
    return a


def grand_mean(A: np.ndarray, params: EwensParams) -> float:
    """The Ewens-weighted grand mean: (theta * tr A + off-diagonal sum) / (n(theta+n-1)).

    This is exactly E[Y]/n, the constant whose removal centers the statistic.
    """
    a = _check_square_symmetric(A)
    n = params.n
    if a.shape[0] != n:
        raise ValueError(f"matrix is {a.shape[0]}x{a.shape[0]} but params.n = {n}")
    theta = params.theta
    tr = float(np.trace(a))
    off = float(a.sum()) - tr
    return (theta * tr + off) / (n * (theta + n - 1))


def center(A: np.ndarray, params: EwensParams) -> ScoreMatrix:
    """Subtract the grand mean so that E[Y] = 0; idempotent."""
    a = _check_square_symmetric(A)
    mean = grand_mean(a, params)
    centered = a - mean
    is_int = bool(np.all(a == np.round(a)))
    return ScoreMatrix(
        n=params.n,
        entries=a,
        grand_mean=mean,
        centered=centered,
        max_abs=float(np.max(np.abs(centered))),
        theta_used=params.theta,
        is_integer=is_int,
    )


def statistic(A: ScoreMatrix, perm: Permutation) -> float:
    """Y = sum_i a_hat[i, pi(i)] on the centered matrix."""
    if perm.n != A.n:
        raise ValueError(f"permutation of [{perm.n}] vs matrix of size {A.n}")
    c = A.centered
    return math.fsum(c[i, x - 1] for i, x in enumerate(perm.image))


def classify(i: int, j: int, perm: Permutation) -> str:
    """Which of the ten cases the ordered pair (i, j) falls in under pi.

    Decided from pi(i), pi(j) alone except for the A5 split, which also
    needs the cycle lengths of i and j.
    """
    if i == j:
        raise ValueError(f"classify needs distinct labels, got i = j = {i}")
    k, l = perm(i), perm(j)
    if k == i:
        return "A0_1" if l == j else "A1"
    if l == j:
        return "A2"
    if k == j:
        return "A0_2" if l == i else "A3"
    if l == i:
        return "A4"
    # all four of i, j, k, l distinct
    len_i2 = perm.cycle_len(i) == 2
    len_j2 = perm.cycle_len(j) == 2
    if len_i2 and len_j2:
        return "A5_1"
    if len_i2:
        return "A5_2"
    if len_j2:
        return "A5_3"
    return "A5_4"


def _check_case_args(
    case: str, i: int, j: int, r: int, s: int, k: int, l: int
) -> None:
    """Validate that (r, s, k, l) = (pre_i, pre_j, post_i, post_j) is a
    shape some permutation in the given case actually produces."""
    if i == j:
        raise ValueError("labels i and j must be distinct")
    others = {i, j}

    def outside(*labels: int) -> bool:
        return all(x not in others for x in labels)

    ok = False
    if case == "A0_1":
        ok = r == i and k == i and s == j and l == j
    elif case == "A0_2":
        ok = r == j and k == j and s == i and l == i
    elif case == "A1":
        ok = r == i and k == i and outside(s, l)
    elif case == "A2":
        ok = s == j and l == j and outside(r, k)
    elif case == "A3":
        ok = s == i and k == j and outside(r, l)
    elif case == "A4":
        ok = r == j and l == i and outside(s, k)
    elif case in ("A5_1", "A5_2", "A5_3", "A5_4"):
        ok = outside(r, s, k, l) and r != s and k != l
        if ok:
            if case == "A5_1":
                ok = k == r and l == s
            elif case == "A5_2":
                ok = k == r and l != s
            elif case == "A5_3":
                ok = l == s and k != r
            else:
                ok = k != r and l != s
    else:
        raise ValueError(f"unknown case label {case!r}")
    if not ok:
        raise ValueError(
            f"arguments (i={i}, j={j}, pre_i={r}, pre_j={s}, post_i={k}, "
            f"post_j={l}) are inconsistent with case {case}"
        )


def b_value(
    i: int,
    j: int,
    pre_i: int,
    pre_j: int,
    post_i: int,
    post_j: int,
    case: str,
    A: ScoreMatrix,
) -> float:
    """b = Y' - Y'' as a function of the pre/post images of i and j.

    Only the rows/columns touching i and j change under the transposition
    conjugation, so the difference is a short signed sum of matrix entries
    depending on the case."""
    _check_case_args(case, i, j, pre_i, pre_j, post_i, post_j)
    c = A.centered
    r, s, k, l = pre_i - 1, pre_j - 1, post_i - 1, post_j - 1
    ii, jj = i - 1, j - 1
    if case in ("A0_1", "A0_2"):
        return 0.0
    # symmetry forces exact cancellation on the closed patterns (the A3/A4
    # 3-cycles and the A5_4 4-cycle); return a clean zero rather than the
    # roundoff of two differently-ordered sums of the same entries
    if case == "A3" and l == r:
        return 0.0
    if case == "A4" and k == s:
        return 0.0
    if case == "A5_4" and k == s and l == r:
        return 0.0
    if case == "A1":
        return (c[ii, ii] + c[s, jj] + c[jj, l]) - (
            c[jj, jj] + c[s, ii] + c[ii, l]
        )
    if case == "A2":
        return (c[jj, jj] + c[r, ii] + c[ii, k]) - (
            c[ii, ii] + c[r, jj] + c[jj, k]
        )
    if case == "A3":
        return (c[r, ii] + c[ii, jj] + c[jj, l]) - (
            c[r, jj] + c[jj, ii] + c[ii, l]
        )
    if case == "A4":
        return (c[s, jj] + c[jj, ii] + c[ii, k]) - (
            c[s, ii] + c[ii, jj] + c[jj, k]
        )
    # A5 subcases share the eight-term expression
    return (c[r, ii] + c[ii, k] + c[s, jj] + c[jj, l]) - (
        c[r, jj] + c[jj, k] + c[s, ii] + c[ii, l]
    )


def t_statistic(A: ScoreMatrix, perm: Permutation, params: EwensParams) -> float:
    """The remainder statistic T(pi), a four-sum expression in the fixed points.

    With F the fixed-point set and c1 = |F|:
      T = 2(n + c1 - 2(theta+1)) sum_{i in F} a_ii
        + 2(c1 - 2 theta)        sum_{i not in F} a_ii
        - 4 sum_{i,j in F, i != j} a_ij
        - 4 sum_{i in F, j not in F} a_ij
    The Stein remainder is R(Y') = E[T | Y']/(n(n-1)).
    """
    n, theta = params.n, params.theta
    if perm.n != n or A.n != n:
        raise ValueError("size mismatch between matrix, permutation, and params")
    c = A.centered
    fix = np.array([x - 1 for x in perm.fixed_points()], dtype=np.intp)
    c1 = len(fix)
    tr = float(np.trace(c))
    if c1:
        diag_fix = float(c[fix, fix].sum())
        block = float(c[np.ix_(fix, fix)].sum())
        rows_fix = float(c[fix, :].sum())
    else:
        diag_fix = block = rows_fix = 0.0
    diag_rest = tr - diag_fix
    cross_ff = block - diag_fix  # i, j in F, i != j
    cross_fr = rows_fix - block  # i in F, j not in F
    return (
        2.0 * (n + c1 - 2.0 * (theta + 1.0)) * diag_fix
        + 2.0 * (c1 - 2.0 * theta) * diag_rest
        - 4.0 * cross_ff
        - 4.0 * cross_fr
    )


@dataclass(frozen=True)
class Remainder:
    """R(Y') = E[T | Y']/(n(n-1)) in exact-atom form.

    ``atoms`` maps each Y'-value to its conditional remainder; built by
    exact enumeration (small n only).  lam is the Stein pair's lambda = 4/n.
    """

    lam: float
    atoms: dict[float, float]

    def r_of(self, y: float, tol: float = 1e-9) -> float:
        if y in self.atoms:
            return self.atoms[y]
        for value, r in self.atoms.items():
            if abs(value - y) <= tol:
                return r
        raise KeyError(f"no Y' atom within {tol} of {y}")


def exact_remainder(A: ScoreMatrix, params: EwensParams) -> Remainder:
    """Exact conditional-expectation remainder via enumeration (n <= 8)."""
    from .oracle import MAX_MARGINAL_N, enumerate_permutations
    from .ewens import ewens_pmf

    n = params.n
    if n > MAX_MARGINAL_N:
        raise ValueError(
            f"exact remainder needs full enumeration, capped at n <= {MAX_MARGINAL_N}"
        )
    mass: dict[float, float] = {}
    t_mass: dict[float, float] = {}
    for perm in enumerate_permutations(n):
        p = ewens_pmf(perm, params)
        y = statistic(A, perm)
        # exact grouping: identical Y values are bit-identical here
        key = min((v for v in mass if abs(v - y) <= 1e-12), default=y)
        mass[key] = mass.get(key, 0.0) + p
        t_mass[key] = t_mass.get(key, 0.0) + p * t_statistic(A, perm, params)
    scale = 1.0 / (n * (n - 1))
    atoms = {y: scale * t_mass[y] / mass[y] for y in mass}
    return Remainder(lam=4.0 / n, atoms=atoms)


# ---------------------------------------------------------------------------
# Variance decomposition
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VarianceDecomposition:
    """Case-by-case decomposition of E(Y'-Y'')^2 and the assembled variance.

    e_ydiff_sq = 2*beta1 + 2*beta3 + beta51 + 2*beta52 + beta54 and
    sigma_sq = (n/8) e_ydiff_sq + (n/4) e_yr.
    """

    beta1: float
    beta3: float
    beta51: float
    beta52: float
    beta54: float
    e_ydiff_sq: float
    e_yr: float
    e_yr_method: str  # "exact" or "monte-carlo"
    e_yr_ci: float | None  # 95% CI halfwidth, monte-carlo only
    sigma_sq: float


def _case_constraints(
    i: int, j: int, r: int, s: int, k: int, l: int
) -> dict[int, int]:
    """The deduplicated constraint map {pi(r)=i, pi(s)=j, pi(i)=k, pi(j)=l}."""
    pm: dict[int, int] = {}
    for a, b in ((r, i), (s, j), (i, k), (j, l)):
        if a in pm and pm[a] != b:
            raise ValueError(f"inconsistent constraints: {a} -> {pm[a]} and {a} -> {b}")
        pm[a] = b
    return pm


def variance_decomposition(
    A: ScoreMatrix,
    params: EwensParams,
    eyr_method: str = "exact",
    *,
    mc_samples: int = 200_000,
    seed: int = 0,
) -> VarianceDecomposition:
    """Evaluate the five case sums and assemble sigma^2.

    For n <= 8 the case sums run by direct summation over distinct index
    tuples with explicit skip tests; for larger n an algebraically identical
    closed form over per-pair power sums is used (the two agree to 1e-12 on
    overlapping n in the test suite).  E[Y'R] = E[Y'T]/(n(n-1)) comes from
    exact enumeration ("exact", n <= 8) or Monte Carlo ("monte-carlo").
    """
    n, theta = params.n, params.theta
    if A.n != n:
        raise ValueError(f"matrix is {A.n}x{A.n} but params.n = {n}")
    if n < 6:
        raise ValueError(f"the case analysis requires n >= 6, got n = {n}")

    if n <= _DIRECT_BETA_MAX_N:
        sums = _case_sums_direct(A, params)
    else:
        sums = _case_sums_closed(A, params)
    d3 = n * (n - 1) * falling_factorial(theta + n - 1, 3)
    d4 = n * (n - 1) * falling_factorial(theta + n - 1, 4)
    beta1 = sums["A1"] / d3
    beta3 = sums["A3"] / d3
    beta51 = sums["A5_1"] / d4
    beta52 = sums["A5_2"] / d4
    beta54 = sums["A5_4"] / d4
    e_ydiff = (
        sums["A1"] / d3
        + sums["A2"] / d3
        + sums["A3"] / d3
        + sums["A4"] / d3
        + (sums["A5_1"] + sums["A5_2"] + sums["A5_3"] + sums["A5_4"]) / d4
    )

    if eyr_method == "exact":
        e_yr = _e_yr_exact(A, params)
        ci = None
    elif eyr_method == "monte-carlo":
        e_yr, ci = _e_yr_monte_carlo(A, params, mc_samples, seed)
    else:
        raise ValueError(
            f"eyr_method must be 'exact' or 'monte-carlo', got {eyr_method!r}"
        )

    sigma_sq = n / 8.0 * e_ydiff + n / 4.0 * e_yr
    if sigma_sq <= DEGENERATE_SIGMA_FACTOR * (n * A.max_abs) ** 2:
        raise ValueError(
            f"degenerate variance: sigma^2 = {sigma_sq} is at the noise floor"
        )
    return VarianceDecomposition(
        beta1=beta1,
        beta3=beta3,
        beta51=beta51,
        beta52=beta52,
        beta54=beta54,
        e_ydiff_sq=e_ydiff,
        e_yr=e_yr,
        e_yr_method=eyr_method,
        e_yr_ci=ci,
        sigma_sq=sigma_sq,
    )


def _case_sums_direct(A: ScoreMatrix, params: EwensParams) -> dict[str, float]:
    """sum over ordered pairs and configurations of b^2 * theta^{loops},
    per case, by explicit loops with skip tests."""
    n, theta = params.n, params.theta
    sums = {case: 0.0 for case in CASE_LABELS if not case.startswith("A0")}
    pieces: dict[str, list[float]] = {case: [] for case in sums}
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            if i == j:
                continue
            for case, r, s, k, l in iter_case_configs(n, i, j):
                b = b_value(i, j, r, s, k, l, case, A)
                if b == 0.0:
                    continue
                loops = _config_loops(i, j, r, s, k, l)
                pieces[case].append(b * b * theta**loops)
    for case, vals in pieces.items():
        sums[case] = math.fsum(vals)
    return sums


def iter_case_configs(
    n: int, i: int, j: int
) -> Iterator[tuple[str, int, int, int, int]]:
    """All pre/post-image configurations (case, r, s, k, l) for the ordered
    pair (i, j) in the cases that can carry nonzero b.

    r, s are the pre-images of i, j under pi; k, l their images.  A0 cases
    are omitted (b is identically zero there).  Configurations whose b
    happens to vanish for a particular matrix (e.g. the A3 three-cycle under
    symmetry) are still yielded; callers weight by b^2 so they drop out.
    Within A5_4 the stream walks the four coincidence patterns —
    closed 4-cycle (s=k, l=r), the two five-label chains (s=k only, l=r
    only), and all six labels distinct — exactly once each.
    """
    others = [x for x in range(1, n + 1) if x != i and x != j]
    for s in others:
        yield "A1", i, s, i, s
        for l in others:
            if l != s:
                yield "A1", i, s, i, l
    for r in others:
        yield "A2", r, j, r, j
        for k in others:
            if k != r:
                yield "A2", r, j, k, j
    for r in others:
        yield "A3", r, i, j, r
        for l in others:
            if l != r:
                yield "A3", r, i, j, l
    for s in others:
        yield "A4", j, s, s, i
        for k in others:
            if k != s:
                yield "A4", j, s, k, i
    for r in others:
        for s in others:
            if s == r:
                continue
            yield "A5_1", r, s, r, s
            for l in others:
                if l != r and l != s:
                    yield "A5_2", r, s, r, l
            for k in others:
                if k != r and k != s:
                    yield "A5_3", r, s, k, s
    # A5_4 coincidence patterns
    for r in others:
        for k in others:
            if k == r:
                continue
            # 4-cycle: s = k and l = r
            yield "A5_4", r, k, k, r
            for l in others:
                if l != r and l != k:
                    # chain with s = k: r -> i -> k -> j -> l
                    yield "A5_4", r, k, k, l
    for s in others:
        for l in others:
            if l == s:
                continue
            for k in others:
                if k != s and k != l:
                    # chain with l = r: s -> j -> l(=r) -> i -> k
                    yield "A5_4", l, s, k, l
    for r in others:
        for s in others:
            if s == r:
                continue
            for k in others:
                if k == r or k == s:
                    continue
                for l in others:
                    if l == r or l == s or l == k:
                        continue
                    yield "A5_4", r, s, k, l


def _config_loops(i: int, j: int, r: int, s: int, k: int, l: int) -> int:
    """Closed loops in the deduplicated constraint map for this config."""
    pm = _case_constraints(i, j, r, s, k, l)
    loops = 0
    visited: set[int] = set()
    for start in pm:
        if start in visited:
            continue
        x = start
        while x in pm and x not in visited:
            visited.add(x)
            x = pm[x]
        if x == start:
            loops += 1
    return loops


def _pair_power_stats(
    centered: np.ndarray, i: int, j: int
) -> tuple[float, float, float]:
    """(c, q1, q2) for the ordered pair: c = a_ii - a_jj and the first two
    power sums of u_x = a_{x,i} - a_{x,j} over x outside {i, j}."""
    col = centered[:, i - 1] - centered[:, j - 1]
    c = centered[i - 1, i - 1] - centered[j - 1, j - 1]
    q1 = float(col.sum() - col[i - 1] - col[j - 1])
    q2 = float((col * col).sum() - col[i - 1] ** 2 - col[j - 1] ** 2)
    return c, q1, q2


def _distinct_square_sum(
    m: int, q1: float, q2: float, alpha: float, eps: tuple[float, ...]
) -> float:
    """sum over distinct tuples (x_1..x_T) from a pool of m labels of
    (alpha + sum_t eps_t u_{x_t})^2, given the power sums q1, q2 of u.

    Expanding the square, every term reduces by symmetry to q1, q2 and
    counting factors: distinct tuples number m_(T), each fixed coordinate
    ranges with multiplicity (m-1)_(T-1), and unordered coordinate pairs
    with multiplicity (m-2)_(T-2) against (q1^2 - q2).
    """
    T = len(eps)
    if m < T:
        return 0.0
    n_tuples = falling_factorial(m, T)
    per_coord = falling_factorial(m - 1, T - 1)
    per_pair = falling_factorial(m - 2, T - 2) if T >= 2 else 0.0
    sum_eps = sum(eps)
    sum_eps_sq = sum(e * e for e in eps)
    sum_cross = sum_eps * sum_eps - sum_eps_sq  # sum over ordered pairs t != t'
    return (
        n_tuples * alpha * alpha
        + 2.0 * alpha * sum_eps * per_coord * q1
        + sum_eps_sq * per_coord * q2
        + sum_cross * per_pair * (q1 * q1 - q2)
    )


def _case_sums_closed(A: ScoreMatrix, params: EwensParams) -> dict[str, float]:
    """Closed-form evaluation of the per-case sums for symmetric matrices.

    For each ordered pair (i, j) every b reduces to an affine function of
    u_x = a_{x,i} - a_{x,j} (c = a_ii - a_jj):
        A1 chain  (s, l):  c - u_s - u_l      A1 2-cycle: c - 2 u_s
        A2 chain  (r, k): -c + u_r + u_k      (same squares as A1)
        A3 chain  (r, l):  u_r - u_l          (3-cycle value is 0)
        A5_1      (r, s):  2(u_r - u_s)
        A5_2      (r,s,l): 2 u_r - u_s - u_l  (A5_3 mirrored)
        A5_4 free (r,s,k,l): u_r + u_k - u_s - u_l; chains: u_r - u_l and
                  u_k - u_s with a free middle label; 4-cycle value is 0.
    Each case sum is then a polynomial in the power sums (q1, q2) of u.
    """
    n, theta = params.n, params.theta
    m = n - 2
    centered = A.centered
    t2 = theta * theta
    acc = {case: [] for case in CASE_LABELS if not case.startswith("A0")}
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            if i == j:
                continue
            c, q1, q2 = _pair_power_stats(centered, i, j)
            s1_cycle = _distinct_square_sum(m, q1, q2, c, (-2.0,))
            s1_chain = _distinct_square_sum(m, q1, q2, c, (-1.0, -1.0))
            s3_chain = _distinct_square_sum(m, q1, q2, 0.0, (1.0, -1.0))
            s51 = _distinct_square_sum(m, q1, q2, 0.0, (2.0, -2.0))
            s52 = _distinct_square_sum(m, q1, q2, 0.0, (2.0, -1.0, -1.0))
            s54_chain = _distinct_square_sum(m, q1, q2, 0.0, (1.0, 0.0, -1.0))
            s54_free = _distinct_square_sum(
                m, q1, q2, 0.0, (1.0, -1.0, 1.0, -1.0)
            )
            acc["A1"].append(t2 * s1_cycle + theta * s1_chain)
            acc["A2"].append(t2 * s1_cycle + theta * s1_chain)
            acc["A3"].append(s3_chain)
            acc["A4"].append(s3_chain)
            acc["A5_1"].append(t2 * s51)
            acc["A5_2"].append(theta * s52)
            acc["A5_3"].append(theta * s52)
            acc["A5_4"].append(2.0 * s54_chain + s54_free)
    return {case: math.fsum(vals) for case, vals in acc.items()}


def _e_yr_exact(A: ScoreMatrix, params: EwensParams) -> float:
    """E[Y'R] = E[Y' T]/(n(n-1)) by full enumeration."""
    from .oracle import MAX_MARGINAL_N, exact_expectation

    n = params.n
    if n > MAX_MARGINAL_N:
        raise ValueError(
            f"exact E[Y'R] needs enumeration (n <= {MAX_MARGINAL_N}); "
            "use eyr_method='monte-carlo' for larger n"
        )
    scale = 1.0 / (n * (n - 1))
    return exact_expectation(
        lambda perm: statistic(A, perm) * t_statistic(A, perm, params) * scale,
        params,
    )


def _e_yr_monte_carlo(
    A: ScoreMatrix, params: EwensParams, samples: int, seed: int
) -> tuple[float, float]:
    """Chunked Monte Carlo for E[Y'T]/(n(n-1)) with a 95% CI halfwidth.

    Chunks are seeded from a spawned SeedSequence and accumulated in chunk
    order, so the result is identical regardless of worker scheduling.
    """
    from .montecarlo import map_chunks

    n = params.n
    scale = 1.0 / (n * (n - 1))
    centered = A.centered
    rows = np.arange(n)

    def run_chunk(rng: np.random.Generator, count: int) -> tuple[float, float, int]:
        images = sample_crp_images(params, rng, count)
        y = centered[rows[None, :], images - 1].sum(axis=1)
        t = np.empty(count)
        for idx in range(count):
            perm = Permutation(images[idx].tolist())
            t[idx] = t_statistic(A, perm, params)
        prod = y * t * scale
        return float(prod.sum()), float((prod * prod).sum()), count

    parts = map_chunks(samples, run_chunk, seed)
    total = math.fsum(p[0] for p in parts)
    total_sq = math.fsum(p[1] for p in parts)
    count = sum(p[2] for p in parts)
    mean = total / count
    var = max(total_sq / count - mean * mean, 0.0)
    ci = 1.96 * math.sqrt(var / count)
    return mean, ci


def remainder_bounds(
    params: EwensParams, M: float, sigma: float
) -> tuple[float, float]:
    """Closed-form bounds (E|R| bound, |E Y'R| bound) for the remainder.

        E|R|    <= theta M (12n + 8 theta - 10)/((n-1)(theta+n-1))
                   + 2 theta^2 M / (theta+n-1)_(2)
        |E Y'R| <= (10 kappa1 + 4 theta + 4(kappa1(theta+1) + kappa2)/n)
                   * M sigma/(n-1)
    """
    from .bounds import kappa1, kappa2  # deferred: bounds imports this module

    n, theta = params.n, params.theta
    if n < 6:
        raise ValueError(f"the case analysis requires n >= 6, got n = {n}")
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if M < 0:
        raise ValueError(f"M must be nonnegative, got {M}")
    k1, k2 = kappa1(params), kappa2(params)
    e_abs_r = theta * M * (12 * n + 8 * theta - 10) / (
        (n - 1) * (theta + n - 1)
    ) + 2 * theta**2 * M / falling_factorial(theta + n - 1, 2)
    e_yr = (10 * k1 + 4 * theta + 4 * (k1 * (theta + 1) + k2) / n) * M * sigma / (
        n - 1
    )
    return e_abs_r, e_yr
