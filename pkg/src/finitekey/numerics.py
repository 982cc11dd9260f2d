"""Scalar numerics shared by every bound.

Binary entropy, real-argument binomial coefficients in log form, the inverse
complementary error function and a safeguarded bracketed root solver.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass
from typing import Callable

from scipy import optimize, special

EPS_MACHINE = sys.float_info.epsilon

# Smallest relative tolerance scipy's brentq accepts.
MIN_REL_TOL = 4.0 * EPS_MACHINE


class DomainError(ValueError):
    """An argument lies outside the domain of the requested function."""


class NumericalError(ArithmeticError):
    """Base class for root-finding failures."""


class NoSignChangeError(NumericalError):
    """The supplied bracket does not enclose a sign change."""


class ConvergenceError(NumericalError):
    """The solver exhausted its iteration budget."""


@dataclass(frozen=True)
class Bracket:
    lo: float
    hi: float
    f_lo: float
    f_hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise DomainError(f"bracket needs lo < hi, got [{self.lo}, {self.hi}]")

    @classmethod
    def from_function(cls, f: Callable[[float], float], lo: float, hi: float) -> "Bracket":
        return cls(lo, hi, f(lo), f(hi))

    @property
    def has_sign_change(self) -> bool:
        return self.f_lo == 0.0 or self.f_hi == 0.0 or (self.f_lo < 0.0) != (self.f_hi < 0.0)


@dataclass(frozen=True)
class RootConfig:
    abs_tol: float = 1e-12
    rel_tol: float = 1e-10
    max_iter: int = 200

    def __post_init__(self):
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise DomainError("root tolerances must be positive")
        if self.max_iter < 1:
            raise DomainError("max_iter must be at least 1")


# Used by the transcendental bound equations, whose plug-back residuals must
# stay below 1e-9 even when the left side is a difference of ~1e5-sized logs.
TIGHT = RootConfig(abs_tol=1e-300, rel_tol=MIN_REL_TOL, max_iter=400)


def binary_entropy(x: float) -> float:
    """Binary Shannon entropy in bits, with 0 log 0 = 0."""
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"binary entropy needs 0 <= x <= 1, got {x}")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


_HALF_LN_2PI = 0.5 * math.log(2.0 * math.pi)
_STIRLING_COEFFS = (1.0 / 12.0, -1.0 / 360.0, 1.0 / 1260.0, -1.0 / 1680.0, 1.0 / 1188.0,
                    -691.0 / 360360.0, 1.0 / 156.0)


def _stirling_remainder(x: float) -> float:
    """``ln Gamma(x + 1) - (x ln x - x + ln(2 pi x) / 2)`` for ``x > 0``."""
    if x < 10.0:
        return math.lgamma(x + 1.0) - (x * math.log(x) - x + _HALF_LN_2PI + 0.5 * math.log(x))
    # asymptotic series; the first omitted term is below 3e-17 at x = 10
    inv2 = 1.0 / (x * x)
    acc = 0.0
    for c in reversed(_STIRLING_COEFFS):
        acc = acc * inv2 + c
    return acc / x


def ln_binomial(n: float, j: float) -> float:
    """Natural log of the binomial coefficient C(n, j) for real arguments.

    Non-integer counts are allowed. For large ``n`` the value is assembled
    from entropy-like terms and Stirling remainders, each about the size of
    the result, instead of as a difference of log-gammas of size ``n ln n``;
    this keeps the absolute error near the rounding of the result itself.
    A choice that overshoots ``[0, n]`` by no more than a few ulps of ``n``
    is treated as a rounding artefact and snapped to the nearest end.
    """
    slack = 8.0 * EPS_MACHINE * max(1.0, abs(n))
    if n < 0 or j < -slack or j > n + slack:
        raise DomainError(f"ln_binomial needs n >= j >= 0, got n={n}, j={j}")
    j = min(max(j, 0.0), n)
    j = min(j, n - j)
    if j == 0.0:
        return 0.0
    if n < 20.0:
        return math.lgamma(n + 1.0) - math.lgamma(j + 1.0) - math.lgamma(n - j + 1.0)
    m = n - j
    # (n ln n - m ln m), split so nothing of size n ln n is ever formed
    tail = -m * math.log1p(-j / n)
    if j < 1.0:
        head = j * math.log(n) + tail - j + 0.5 * math.log(n / m)
        return head + _stirling_remainder(n) - _stirling_remainder(m) - math.lgamma(j + 1.0)
    return (j * math.log(n / j) + tail - _HALF_LN_2PI + 0.5 * (math.log(n / j) - math.log(m))
            + _stirling_remainder(n) - _stirling_remainder(j) - _stirling_remainder(m))


# Abramowitz & Stegun 26.2.23 rational approximation of the upper normal
# quantile, |error| < 4.5e-4; only used as a starting point.
_AS_C = (2.515517, 0.802853, 0.010328)
_AS_D = (1.432788, 0.189269, 0.001308)


def _normal_upper_quantile_guess(p: float) -> float:
    t = math.sqrt(-2.0 * math.log(p))
    num = _AS_C[0] + t * (_AS_C[1] + t * _AS_C[2])
    den = 1.0 + t * (_AS_D[0] + t * (_AS_D[1] + t * _AS_D[2]))
    return t - num / den


def erfc_inv(y: float) -> float:
    """Inverse of the complementary error function on ``(0, 2)``.

    A rational initial guess is polished by Newton steps on ``ln erfc``,
    which stays well conditioned deep in the tail where ``erfc`` itself is
    tiny.
    """
    if not 0.0 < y < 2.0:
        raise DomainError(f"erfc_inv needs 0 < y < 2, got {y}")
    if y == 1.0:
        return 0.0
    if y > 1.0:
        return -erfc_inv(2.0 - y)
    a = _normal_upper_quantile_guess(y / 2.0) / math.sqrt(2.0)
    ln_y = math.log(y)
    for _ in range(50):
        # ln erfc(a) = ln erfcx(a) - a^2; d/da ln erfc(a) = -2/(sqrt(pi) erfcx(a))
        ex = float(special.erfcx(a))
        g = math.log(ex) - a * a - ln_y
        step = g * ex * math.sqrt(math.pi) / 2.0
        a += step
        if abs(step) <= 4.0 * EPS_MACHINE * max(1.0, abs(a)):
            break
    return a


def find_root(f: Callable[[float], float], bracket: Bracket, cfg: RootConfig = RootConfig()) -> float:
    """Root of ``f`` inside ``bracket`` by Brent's method.

    The result always lies in ``[bracket.lo, bracket.hi]``. Raises
    :class:`NoSignChangeError` if the bracket does not straddle a root and
    :class:`ConvergenceError` if ``cfg.max_iter`` is exhausted.
    """
    if bracket.f_lo == 0.0:
        return bracket.lo
    if bracket.f_hi == 0.0:
        return bracket.hi
    if not bracket.has_sign_change:
        raise NoSignChangeError(
            f"f({bracket.lo})={bracket.f_lo} and f({bracket.hi})={bracket.f_hi} have the same sign"
        )
    rtol = max(cfg.rel_tol, MIN_REL_TOL)
    try:
        root, info = optimize.brentq(
            f, bracket.lo, bracket.hi, xtol=cfg.abs_tol, rtol=rtol,
            maxiter=cfg.max_iter, full_output=True, disp=False,
        )
    except ValueError as exc:
        raise NoSignChangeError(str(exc)) from exc
    if not info.converged:
        raise ConvergenceError(f"no convergence after {info.iterations} iterations")
    return min(max(root, bracket.lo), bracket.hi)


def expand_bracket(f: Callable[[float], float], lo: float = EPS_MACHINE, hi: float = 1.0,
                   max_doublings: int = 1100) -> Bracket:
    """Double ``hi`` until ``f`` changes sign on ``[lo, hi]``.

    For roots with no natural upper limit. ``max_doublings`` is large enough
    to walk ``hi`` up to the float overflow threshold.
    """
    f_lo = f(lo)
    f_hi = f(hi)
    for _ in range(max_doublings):
        if f_lo == 0.0 or f_hi == 0.0 or (f_lo < 0.0) != (f_hi < 0.0):
            return Bracket(lo, hi, f_lo, f_hi)
        lo, f_lo = hi, f_hi
        hi *= 2.0
        if math.isinf(hi):
            break
        f_hi = f(hi)
    raise NoSignChangeError(f"no sign change found up to x={hi}")
