"""Explicit Berry-Esseen constants for the combinatorial CLT under Ewens
measure, and the generic three-term zero-bias bounds they instantiate.

kappa1/kappa2 are the square roots of the fixed-point count's second and
squared second-factorial moments; alpha1/alpha2 are the closed-form bound
numerators, so that d1 <= alpha1/sigma and d_inf <= alpha2/sigma, with the
integer-matrix lower bound 1/(6*sqrt(3)*sigma + 3) on d_inf.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .distances import DistanceEstimate
from .ewens import EwensParams, falling_factorial

__all__ = [
    "kappa1",
    "kappa2",
    "alpha1",
    "alpha2",
    "generic_zero_bias_bounds",
    "integer_lower_bound",
    "BoundReport",
    "bound_report",
    "CSV_COLUMNS",
]

_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
_SQRT_2PI = math.sqrt(2.0 * math.pi)

# delta/sigma coefficient of the Kolmogorov bound: 1 + 1/sqrt(2 pi) + sqrt(2 pi)/4
KOLMOGOROV_GAP_COEFF = 1.0 + 1.0 / _SQRT_2PI + _SQRT_2PI / 4.0


def kappa1(params: EwensParams) -> float:
    """sqrt of E[c1^2]: sqrt(theta^2 n_(2)/(theta+n-1)_(2) + theta n/(theta+n-1))."""
    n, theta = params.n, params.theta
    if n < 2:
        raise ValueError(f"kappa1 needs n >= 2, got n = {n}")
    return math.sqrt(
        theta * theta * falling_factorial(n, 2) / falling_factorial(theta + n - 1, 2)
        + theta * n / (theta + n - 1)
    )


def kappa2(params: EwensParams) -> float:
    """sqrt of E[c1^2 (c1-1)^2], via factorial moments of the fixed-point count."""
    n, theta = params.n, params.theta
    if n < 4:
        raise ValueError(f"kappa2 needs n >= 4, got n = {n}")
    return math.sqrt(
        theta**4 * falling_factorial(n, 4) / falling_factorial(theta + n - 1, 4)
        + 4.0 * theta**3 * falling_factorial(n, 3) / falling_factorial(theta + n - 1, 3)
        + 2.0 * theta * theta * falling_factorial(n, 2) / falling_factorial(theta + n - 1, 2)
    )


def _check_alpha_args(params: EwensParams, M: float) -> None:
    if params.n < 6:
        raise ValueError(f"the case analysis requires n >= 6, got n = {params.n}")
    if M < 0:
        raise ValueError(f"M must be nonnegative, got {M}")


def alpha1(params: EwensParams, M: float) -> float:
    """Numerator of the L1 bound: d1(L(W), L(Z)) <= alpha1 / sigma."""
    _check_alpha_args(params, M)
    n, theta = params.n, params.theta
    k1, k2 = kappa1(params), kappa2(params)
    return (
        40.0 * M
        + k1 * _SQRT_2_OVER_PI * M * (3.0 + (theta + 1.0) / (n - 1.0))
        + k2 * _SQRT_2_OVER_PI * M / (n - 1.0)
        + theta
        * M
        * (
            1.2 * _SQRT_2_OVER_PI
            + 1.2 * (6.0 * n + 4.0 * theta - 5.0) / (theta + n - 1.0)
            + theta * n / falling_factorial(theta + n - 1, 2)
        )
    )


def alpha2(params: EwensParams, M: float) -> float:
    """Numerator of the Kolmogorov bound: d_inf(L(W), L(Z)) <= alpha2 / sigma."""
    _check_alpha_args(params, M)
    n, theta = params.n, params.theta
    k1, k2 = kappa1(params), kappa2(params)
    return (
        20.0 * KOLMOGOROV_GAP_COEFF * M
        + k1 * M * (3.0 + (theta + 1.0) / (n - 1.0))
        + k2 * M / (n - 1.0)
        + theta
        * M
        * (
            1.2
            + 0.15 * _SQRT_2PI * (6.0 * n + 4.0 * theta - 5.0) / (theta + n - 1.0)
            + 0.125 * _SQRT_2PI * theta * n / falling_factorial(theta + n - 1, 2)
        )
    )


def generic_zero_bias_bounds(
    sigma: float,
    lam: float,
    gap_or_delta: float,
    e_yr: float,
    e_abs_r: float,
    mode: str,
) -> float:
    """Three-term normal-approximation bound from an approximate zero-bias
    coupling with remainder R.

    mode "L1":   (2/sigma) E|Y*-Y'| + sqrt(2/pi) |E Y'R|/(sigma^2 lam)
                 + 2 E|R|/(sigma lam)
    mode "Linf": (1 + 1/sqrt(2 pi) + sqrt(2 pi)/4) delta/sigma
                 + |E Y'R|/(sigma^2 lam) + sqrt(2 pi) E|R|/(4 sigma lam)
    where gap_or_delta is E|Y*-Y'| for L1 and the a.s. bound delta for Linf.
    With both remainder terms zero the classic coupling bounds reappear.
    """
    if not sigma > 0.0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if not 0.0 < lam < 1.0:
        raise ValueError(f"lambda must lie in (0, 1), got {lam}")
    for name, value in (
        ("gap_or_delta", gap_or_delta),
        ("e_yr", e_yr),
        ("e_abs_r", e_abs_r),
    ):
        if value < 0.0:
            raise ValueError(f"{name} must be nonnegative, got {value}")
    if mode == "L1":
        return (
            2.0 / sigma * gap_or_delta
            + _SQRT_2_OVER_PI * e_yr / (sigma * sigma * lam)
            + 2.0 * e_abs_r / (sigma * lam)
        )
    if mode == "Linf":
        return (
            KOLMOGOROV_GAP_COEFF * gap_or_delta / sigma
            + e_yr / (sigma * sigma * lam)
            + _SQRT_2PI * e_abs_r / (4.0 * sigma * lam)
        )
    raise ValueError(f"mode must be 'L1' or 'Linf', got {mode!r}")


def integer_lower_bound(sigma: float) -> float:
    """1/(6 sqrt(3) sigma + 3): no integer-matrix statistic is closer than
    this to the normal in Kolmogorov distance."""
    if not sigma > 0.0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    return 1.0 / (6.0 * math.sqrt(3.0) * sigma + 3.0)


@dataclass(frozen=True)
class BoundReport:
    """Everything the bound pipeline produces for one (A, theta, n)."""

    n: int
    theta: float
    sigma: float
    M: float
    kappa1: float
    kappa2: float
    alpha1: float
    alpha2: float
    d1_upper: float
    dinf_upper: float
    dinf_lower: float | None
    d1_empirical: DistanceEstimate | None
    dinf_empirical: DistanceEstimate | None
    d1_exact: float | None
    dinf_exact: float | None
    provenance: dict

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "theta": self.theta,
            "sigma": self.sigma,
            "M": self.M,
            "kappa1": self.kappa1,
            "kappa2": self.kappa2,
            "alpha1": self.alpha1,
            "alpha2": self.alpha2,
            "d1_upper": self.d1_upper,
            "dinf_upper": self.dinf_upper,
            "dinf_lower": self.dinf_lower,
            "d1_empirical": self.d1_empirical.to_json() if self.d1_empirical else None,
            "dinf_empirical": self.dinf_empirical.to_json() if self.dinf_empirical else None,
            "d1_exact": self.d1_exact,
            "dinf_exact": self.dinf_exact,
            "provenance": self.provenance,
        }

    def to_json_str(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, indent=2)

    def csv_row(self) -> str:
        def fmt(x) -> str:
            if x is None:
                return ""
            if isinstance(x, float):
                return repr(x)
            return str(x)

        return ",".join(
            fmt(x)
            for x in (
                self.n,
                self.theta,
                self.sigma,
                self.M,
                self.kappa1,
                self.kappa2,
                self.alpha1,
                self.alpha2,
                self.d1_upper,
                self.dinf_upper,
                self.dinf_lower,
                self.d1_empirical.d1 if self.d1_empirical else None,
                self.dinf_empirical.d_inf if self.dinf_empirical else None,
                self.provenance.get("samples"),
                self.provenance.get("seed"),
            )
        )


CSV_COLUMNS = (
    "n,theta,sigma,M,kappa1,kappa2,alpha1,alpha2,"
    "d1_upper,dinf_upper,dinf_lower,d1_emp,dinf_emp,samples,seed"
)


def bound_report(
    A,
    params: EwensParams,
    *,
    samples: int = 0,
    seed=0,
    exact: bool = False,
    force_integer_lower_bound: bool = False,
    mc_eyr_samples: int = 200_000,
) -> BoundReport:
    """Full pipeline: center, variance, constants, bounds, and (optionally)
    exact or empirical distances.

    sigma comes from the variance decomposition — exact enumeration when
    feasible, otherwise closed-form case sums plus Monte Carlo for the
    remainder correlation — never from the sample stream used for the
    empirical distances.
    """
    from .oracle import MAX_MARGINAL_N
    from .statistic import center, variance_decomposition
    from . import montecarlo

    exact_feasible = params.n <= MAX_MARGINAL_N
    score = center(A, params)
    decomposition = variance_decomposition(
        score,
        params,
        eyr_method="exact" if exact_feasible else "monte-carlo",
        mc_samples=mc_eyr_samples,
        seed=np.random.SeedSequence([int(0 if seed is None else seed), 1]),
    )
    sigma = math.sqrt(decomposition.sigma_sq)
    M = score.max_abs
    k1, k2 = kappa1(params), kappa2(params)
    a1, a2 = alpha1(params, M), alpha2(params, M)
    is_integer = score.is_integer or force_integer_lower_bound
    lower = integer_lower_bound(sigma) if is_integer else None

    d1_exact = dinf_exact = None
    if exact:
        from .distances import kolmogorov_exact, wasserstein_exact
        from .oracle import exact_statistic_law

        if not exact_feasible:
            raise ValueError(
                f"exact distances need full enumeration, capped at n <= {MAX_MARGINAL_N}; "
                f"got n = {params.n}"
            )
        law = exact_statistic_law(score.centered, params)
        d1_exact = wasserstein_exact(law, 0.0, sigma)
        dinf_exact = kolmogorov_exact(law, 0.0, sigma)

    d1_emp = dinf_emp = None
    if samples:
        from .distances import (
            MIN_EMPIRICAL_SAMPLES,
            kolmogorov_empirical,
            wasserstein_empirical,
        )

        if samples < MIN_EMPIRICAL_SAMPLES:
            raise ValueError(
                f"empirical distances need at least {MIN_EMPIRICAL_SAMPLES} samples; "
                f"got {samples}"
            )
        draws = montecarlo.sample_statistic_batch(
            score, params, samples, np.random.SeedSequence([int(0 if seed is None else seed), 2])
        )
        w = draws / sigma
        d1_emp = wasserstein_empirical(w)
        dinf_emp = kolmogorov_empirical(w)

    provenance = {
        "seed": seed,
        "samples": samples or None,
        "sigma_method": decomposition.e_yr_method,
        "eyr_ci": decomposition.e_yr_ci,
        "mc_eyr_samples": None if exact_feasible else mc_eyr_samples,
    }
    return BoundReport(
        n=params.n,
        theta=params.theta,
        sigma=sigma,
        M=M,
        kappa1=k1,
        kappa2=k2,
        alpha1=a1,
        alpha2=a2,
        d1_upper=a1 / sigma,
        dinf_upper=a2 / sigma,
        dinf_lower=lower,
        d1_empirical=d1_emp,
        dinf_empirical=dinf_emp,
        d1_exact=d1_exact,
        dinf_exact=dinf_exact,
        provenance=provenance,
    )
