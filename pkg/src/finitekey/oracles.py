"""Exact-enumeration verifiers for the tail bounds.

Failure probabilities are computed by summing exact hypergeometric or
binomial probability mass functions in log space. This makes no use of
the bound derivations, so it checks them independently. Sizes are capped
so that every check stays a plain enumeration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Literal

import numpy as np
from scipy.special import gammaln

from .numerics import DomainError
from .tail_bounds import Deviation

MAX_POPULATION = 2000
MAX_TRIALS = 100_000

# Comparisons against real-valued thresholds count a lattice point as
# reached when it is within this relative distance; this errs on the side
# of reporting more failures.
_THRESHOLD_SLACK = 1e-9


class OracleSizeError(ValueError):
    """The instance is too large to enumerate exactly."""


@dataclass(frozen=True)
class HypergeomInstance:
    population: int
    ones: int
    sample: int

    def __post_init__(self):
        if not 0 <= self.ones <= self.population:
            raise DomainError("need 0 <= ones <= population")
        if not 0 < self.sample < self.population:
            raise DomainError("need 0 < sample < population")
        if self.population > MAX_POPULATION:
            raise OracleSizeError(f"population {self.population} exceeds {MAX_POPULATION}")

    @property
    def rest(self) -> int:
        return self.population - self.sample


@dataclass(frozen=True)
class BinomialInstance:
    trials: int
    p: float

    def __post_init__(self):
        if self.trials < 1:
            raise DomainError("need at least one trial")
        if not 0.0 <= self.p <= 1.0:
            raise DomainError(f"p must lie in [0, 1], got {self.p}")
        if self.trials > MAX_TRIALS:
            raise OracleSizeError(f"{self.trials} trials exceeds {MAX_TRIALS}")

    @property
    def mean(self) -> float:
        return self.trials * self.p


@dataclass(frozen=True)
class CoverageFailure:
    below: float  # Pr[x* < lo(X)]
    above: float  # Pr[x* > hi(X)]

    @property
    def total(self) -> float:
        return self.below + self.above


def log_sum_exp(logs: Iterable[float]) -> float:
    """``ln sum exp(l)`` accumulated from the smallest term up."""
    arr = np.sort(np.asarray(list(logs), dtype=float))
    arr = arr[np.isfinite(arr)]
    if arr.size == 0:
        return -math.inf
    top = arr[-1]
    return float(top + math.log(math.fsum(np.exp(arr - top))))


def _ln_comb(n, j):
    return gammaln(n + 1.0) - gammaln(j + 1.0) - gammaln(n - j + 1.0)


def hypergeom_support(inst: HypergeomInstance) -> np.ndarray:
    """Achievable numbers of ones in the sample."""
    lo = max(0, inst.ones - inst.rest)
    hi = min(inst.sample, inst.ones)
    return np.arange(lo, hi + 1)


def hypergeom_log_pmf(inst: HypergeomInstance) -> tuple[np.ndarray, np.ndarray]:
    """Support and log pmf of the number of ones drawn into the sample."""
    j = hypergeom_support(inst)
    N, M, k = inst.population, inst.ones, inst.sample
    lp = _ln_comb(M, j) + _ln_comb(N - M, k - j) - _ln_comb(N, k)
    return j, lp


def binomial_log_pmf(inst: BinomialInstance) -> tuple[np.ndarray, np.ndarray]:
    j = np.arange(inst.trials + 1)
    if inst.p == 0.0 or inst.p == 1.0:
        lp = np.full(j.shape, -np.inf)
        lp[0 if inst.p == 0.0 else -1] = 0.0
        return j, lp
    lp = (_ln_comb(inst.trials, j) + j * math.log(inst.p)
          + (inst.trials - j) * math.log1p(-inst.p))
    return j, lp


GammaFn = Callable[[float, float, float, float], "Deviation | float"]


def _claim(gamma_fn: GammaFn, n: int, k: int, lam: float, eps: float) -> float:
    """The deviation a bound claims for one observed fraction; inf for no claim.

    A clamped bound (gamma = 1 - lam) or a domain error means the method
    makes no nontrivial statement about this sample.
    """
    try:
        out = gamma_fn(n, k, lam, eps)
    except DomainError:
        return math.inf
    if isinstance(out, Deviation):
        return math.inf if out.clamped else out.width
    return float(out)


def hypergeom_failure_at(inst: HypergeomInstance, gamma_fn: GammaFn, epsilon: float,
                         claims: np.ndarray | None = None) -> float:
    """Exact ``Pr[chi >= lam + gamma(lam)]`` for one fixed population."""
    n, k = inst.rest, inst.sample
    if claims is None:
        claims = np.array([_claim(gamma_fn, n, k, j / k, epsilon) for j in range(k + 1)])
    j, lp = hypergeom_log_pmf(inst)
    lam = j / k
    chi = (inst.ones - j) / n
    threshold = lam + claims[j]
    finite = np.isfinite(threshold)
    fired = np.zeros(j.shape, dtype=bool)
    t = threshold[finite]
    fired[finite] = chi[finite] >= t - _THRESHOLD_SLACK * np.maximum(1.0, t)
    if not fired.any():
        return 0.0
    return math.exp(log_sum_exp(lp[fired]))


def hypergeom_failure_prob(n: int, k: int, gamma_fn: GammaFn, epsilon: float) -> float:
    """Worst case over the number of ones in the full string of the failure probability."""
    population = n + k
    if population > MAX_POPULATION:
        raise OracleSizeError(f"population {population} exceeds {MAX_POPULATION}")
    claims = np.array([_claim(gamma_fn, n, k, j / k, epsilon) for j in range(k + 1)])
    worst = 0.0
    for ones in range(population + 1):
        inst = HypergeomInstance(population, ones, k)
        worst = max(worst, hypergeom_failure_at(inst, gamma_fn, epsilon, claims))
    return worst


def binomial_tail(inst: BinomialInstance, threshold: float,
                  direction: Literal["ge", "le"] = "ge") -> float:
    """Exact ``Pr[X >= t]`` or ``Pr[X <= t]``."""
    j, lp = binomial_log_pmf(inst)
    slack = _THRESHOLD_SLACK * max(1.0, abs(threshold))
    if direction == "ge":
        mask = j >= threshold - slack
    elif direction == "le":
        mask = j <= threshold + slack
    else:
        raise DomainError(f"direction must be 'ge' or 'le', got {direction!r}")
    if not mask.any():
        return 0.0
    return min(1.0, math.exp(log_sum_exp(lp[mask])))


def coverage_failure(inst: BinomialInstance,
                     interval_fn: Callable[[int], tuple[float, float]]) -> CoverageFailure:
    """One-sided miss probabilities of an interval estimate of ``N p``."""
    j, lp = binomial_log_pmf(inst)
    x_star = inst.mean
    below, above = [], []
    for x, l in zip(j, lp):
        # exp(l) is exactly 0.0 in double precision below this
        if not l > -746.0:
            continue
        lo, hi = interval_fn(int(x))
        if x_star < lo:
            below.append(l)
        elif x_star > hi:
            above.append(l)
    return CoverageFailure(
        below=math.exp(log_sum_exp(below)) if below else 0.0,
        above=math.exp(log_sum_exp(above)) if above else 0.0,
    )
