"""Kolmogorov (sup) and Wasserstein (L1) distances to the standard normal.

Exact variants take a discrete law plus standardization constants and use
closed-form piecewise integration against Phi; empirical variants take a
sorted sample of already-standardized values.  The Kolmogorov distance is
evaluated from both one-sided limits at every atom, which dominates either
convention for the inequality at jump points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

__all__ = [
    "DistanceEstimate",
    "normal_cdf",
    "normal_pdf",
    "kolmogorov_exact",
    "kolmogorov_empirical",
    "wasserstein_exact",
    "wasserstein_empirical",
]

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
_NORMAL = NormalDist()

MIN_EMPIRICAL_SAMPLES = 1_000


def normal_cdf(x: float) -> float:
    """Phi(x) via the complementary error function; clamped to [0, 1]."""
    v = 0.5 * math.erfc(-x / _SQRT2)
    if v < 0.0:
        return 0.0
    if v > 1.0:
        return 1.0
    return v


def normal_pdf(x: float) -> float:
    return _INV_SQRT_2PI * math.exp(-0.5 * x * x)


def _phi_antiderivative(t: float) -> float:
    """integral of Phi from -inf to t, equal to t*Phi(t) + phi(t)."""
    return t * normal_cdf(t) + normal_pdf(t)


def _upper_tail_integral(t: float) -> float:
    """integral of (1 - Phi) from t to +inf, equal to phi(t) - t*(1-Phi(t))."""
    return normal_pdf(t) - t * (1.0 - normal_cdf(t))


@dataclass(frozen=True)
class DistanceEstimate:
    """A distance measurement; empirical ones carry provenance and a CI.

    Exactly one of d1 / d_inf may be None when only one metric was
    computed.  ci_halfwidth is the DKW 95% halfwidth for empirical d_inf
    and a heuristic piecewise-variance standard error for empirical d1.
    """

    d1: float | None
    d_inf: float | None
    method: str  # "exact" or "empirical"
    samples: int | None = None
    seed: object = None
    ci_halfwidth: float | None = None

    def __post_init__(self) -> None:
        if self.d_inf is not None and not (0.0 <= self.d_inf <= 1.0):
            raise ValueError(f"d_inf must lie in [0, 1], got {self.d_inf}")
        if self.d1 is not None and self.d1 < 0.0:
            raise ValueError(f"d1 must be nonnegative, got {self.d1}")
        if self.method not in ("exact", "empirical"):
            raise ValueError(f"method must be 'exact' or 'empirical', got {self.method!r}")

    def to_json(self) -> dict:
        return {
            "d1": self.d1,
            "d_inf": self.d_inf,
            "method": self.method,
            "samples": self.samples,
            "seed": self.seed,
            "ci_halfwidth": self.ci_halfwidth,
        }


def _standardized_atoms(law, mean: float, sigma: float) -> list[tuple[float, float]]:
    if not sigma > 0.0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    total = law.total_mass()
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"law must be normalized; total mass is {total}")
    return [((v - mean) / sigma, p) for v, p in law.atoms]


def kolmogorov_exact(law, mean: float, sigma: float) -> float:
    """sup_t |P(W < t) - Phi(t)| for the standardized discrete law.

    The supremum over t is attained at an atom from one side or the other,
    so both F(w-) and F(w) are compared against Phi(w) at every atom.
    """
    best = 0.0
    cum = 0.0
    for w, p in _standardized_atoms(law, mean, sigma):
        phi = normal_cdf(w)
        gap = abs(cum - phi)
        if gap > best:
            best = gap
        cum += p
        gap = abs(cum - phi)
        if gap > best:
            best = gap
    return best


def kolmogorov_empirical(samples) -> DistanceEstimate:
    """Empirical Kolmogorov distance of standardized samples to N(0,1).

    The 95% confidence halfwidth comes from the DKW inequality.
    """
    w = np.sort(np.asarray(samples, dtype=float))
    count = len(w)
    if count < MIN_EMPIRICAL_SAMPLES:
        raise ValueError(
            f"empirical distances need at least {MIN_EMPIRICAL_SAMPLES} samples; got {count}"
        )
    phis = 0.5 * np.array([math.erfc(-x / _SQRT2) for x in w])
    hi = np.arange(1, count + 1) / count
    lo = np.arange(0, count) / count
    d_inf = float(np.max(np.maximum(np.abs(hi - phis), np.abs(lo - phis))))
    halfwidth = math.sqrt(math.log(2.0 / 0.05) / (2.0 * count))
    return DistanceEstimate(
        d1=None,
        d_inf=min(d_inf, 1.0),
        method="empirical",
        samples=count,
        ci_halfwidth=halfwidth,
    )


def _piecewise_l1(atoms: list[tuple[float, float]]) -> tuple[float, list[float]]:
    """integral of |F - Phi| for the step CDF through the given atoms.

    Returns the total plus per-piece contributions (tails included), each
    computed in closed form from Phi's antiderivative; pieces straddling
    F = Phi split at Phi^{-1}(c).
    """
    pieces: list[float] = []
    # left tail: F = 0
    first = atoms[0][0]
    pieces.append(_phi_antiderivative(first))

    def level_piece(c: float, a: float, b: float) -> float:
        # integral over (a, b) of |c - Phi|
        phi_a, phi_b = normal_cdf(a), normal_cdf(b)
        ia, ib = _phi_antiderivative(a), _phi_antiderivative(b)
        if phi_b <= c:
            return c * (b - a) - (ib - ia)
        if phi_a >= c:
            return (ib - ia) - c * (b - a)
        z = _NORMAL.inv_cdf(c)
        iz = _phi_antiderivative(z)
        return (c * (z - a) - (iz - ia)) + ((ib - iz) - c * (b - z))

    cum = 0.0
    for idx in range(len(atoms) - 1):
        cum += atoms[idx][1]
        level = min(max(cum, 0.0), 1.0)
        pieces.append(level_piece(level, atoms[idx][0], atoms[idx + 1][0]))
    # right tail: F = 1
    pieces.append(_upper_tail_integral(atoms[-1][0]))
    return math.fsum(pieces), pieces


def wasserstein_exact(law, mean: float, sigma: float) -> float:
    """integral over t of |F_W(t) - Phi(t)| for the standardized law."""
    atoms = _standardized_atoms(law, mean, sigma)
    total, _ = _piecewise_l1(atoms)
    return total


def wasserstein_empirical(samples) -> DistanceEstimate:
    """Empirical L1 distance of standardized samples to N(0,1).

    The empirical CDF (mass 1/N per sorted sample) goes through the exact
    piecewise integral; the reported halfwidth is a heuristic from the
    per-piece contribution variance, not a rigorous confidence bound.
    """
    w = np.sort(np.asarray(samples, dtype=float))
    count = len(w)
    if count < MIN_EMPIRICAL_SAMPLES:
        raise ValueError(
            f"empirical distances need at least {MIN_EMPIRICAL_SAMPLES} samples; got {count}"
        )
    atoms = [(float(x), 1.0 / count) for x in w]
    total, pieces = _piecewise_l1(atoms)
    arr = np.array(pieces)
    halfwidth = float(1.96 * arr.std() * math.sqrt(len(arr)))
    return DistanceEstimate(
        d1=total,
        d_inf=None,
        method="empirical",
        samples=count,
        ci_halfwidth=halfwidth,
    )
