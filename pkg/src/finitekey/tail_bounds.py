"""One-sided statistical fluctuation bounds.

Three families, each with an equation-root ("numeric") and a closed-form
("analytic") flavour:

* sampling without replacement: the error fraction ``chi`` of an unseen
  string of size ``n`` exceeds the fraction ``lambda`` seen in a random
  sample of size ``k`` by at most ``gamma``;
* Chernoff: the observed value of a sum of independent Bernoulli variables
  given its expectation ``x_star``;
* variant Chernoff: the expectation given one observed value ``x``.

The legacy methods used for comparison (Serfling, Curty et al., Lim et al.,
Zhang et al. and Gaussian analysis) are implemented alongside.

Every width is absolute: an upper bound is ``center + width`` and a lower
bound ``center - width``, floored at zero (``clamped`` records the floor).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Literal

from .numerics import (
    TIGHT,
    Bracket,
    DomainError,
    binary_entropy,
    erfc_inv,
    expand_bracket,
    find_root,
    ln_binomial,
)


class MethodTag(str, enum.Enum):
    OURS_NUMERIC = "ours_numeric"
    OURS_ANALYTIC = "ours_analytic"
    SERFLING = "serfling"
    CURTY = "curty"
    LIM = "lim"
    ZHANG_NUMERIC = "zhang_numeric"
    ZHANG_ANALYTIC = "zhang_analytic"
    GAUSSIAN = "gaussian"

    @classmethod
    def parse(cls, name: "str | MethodTag") -> "MethodTag":
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).strip().lower().replace("-", "_"))
        except ValueError:
            valid = ", ".join(m.value for m in cls)
            raise ValueError(f"unknown method {name!r}; expected one of {valid}") from None


class Direction(str, enum.Enum):
    UPPER = "upper"
    LOWER = "lower"


Mode = Literal["numeric", "analytic"]


@dataclass(frozen=True)
class SampleSplit:
    """A sampling-without-replacement instance.

    ``n`` is the size of the unseen remainder, ``k`` the sample size and
    ``lam`` the error fraction observed in the sample.
    """

    n: float
    k: float
    lam: float
    epsilon: float

    def __post_init__(self):
        if not (self.n > 0 and self.k > 0):
            raise DomainError(f"sample split needs n, k > 0, got n={self.n}, k={self.k}")
        if not 0.0 <= self.lam <= 1.0:
            raise DomainError(f"error fraction must lie in [0, 1], got {self.lam}")
        _check_epsilon(self.epsilon)


@dataclass(frozen=True)
class Deviation:
    width: float
    direction: Direction
    epsilon: float
    method: MethodTag
    clamped: bool = False
    center: float = 0.0
    note: str = ""

    @property
    def bound(self) -> float:
        if self.direction is Direction.UPPER:
            return self.center + self.width
        return max(self.center - self.width, 0.0)

    @property
    def relative(self) -> float:
        """Width relative to the center (the delta of the Chernoff forms)."""
        if self.center == 0.0:
            return math.inf if self.width > 0 else 0.0
        return self.width / self.center


def _check_epsilon(eps: float) -> None:
    if not 0.0 < eps <= 1.0:
        raise DomainError(f"failure probability must lie in (0, 1], got {eps}")


def _beta(eps: float) -> float:
    _check_epsilon(eps)
    return math.fabs(math.log(eps))  # ln(1/eps), without a -0.0 at eps = 1


def _check_mode(mode: str) -> None:
    if mode not in ("numeric", "analytic"):
        raise DomainError(f"mode must be 'numeric' or 'analytic', got {mode!r}")


def regularized_fraction(lam: float, k: float) -> float:
    """Replace a zero error fraction by half an error in the sample."""
    return 0.5 / k if lam == 0.0 else lam


# --- sampling without replacement ---------------------------------------

def sampling_residual(gamma: float, s: SampleSplit) -> float:
    """Left side minus right side of the binomial-coefficient equation for gamma."""
    n, k, lam = s.n, s.k, s.lam
    return (ln_binomial(k, k * lam) + ln_binomial(n, n * (lam + gamma))
            - ln_binomial(n + k, (n + k) * lam + n * gamma) - math.log(s.epsilon))


def gamma_upper_numeric(s: SampleSplit) -> Deviation:
    """Tightest sampling bound: root in gamma of the binomial-coefficient ratio.

    Solves ``ln C(k, k lam) + ln C(n, n(lam+gamma)) - ln C(n+k, (n+k)lam + n gamma) = ln eps``
    on ``(0, 1 - lam)``. If the ratio never drops to ``eps`` the trivial
    bound ``gamma = 1 - lam`` is returned with ``clamped=True``.
    """
    if s.lam >= 1.0:
        raise DomainError("gamma_upper_numeric needs lam < 1")
    tag = MethodTag.OURS_NUMERIC
    top = 1.0 - s.lam
    f = lambda g: sampling_residual(g, s)  # noqa: E731
    f0 = f(0.0)
    if f0 <= 0.0:
        return Deviation(0.0, Direction.UPPER, s.epsilon, tag, center=s.lam)
    f_top = f(top)
    if f_top > 0.0:
        return Deviation(top, Direction.UPPER, s.epsilon, tag, clamped=True, center=s.lam)
    gamma = find_root(f, Bracket(0.0, top, f0, f_top), TIGHT)
    return Deviation(gamma, Direction.UPPER, s.epsilon, tag, center=s.lam)


def _sampling_G(n: float, k: float, lam: float, eps: float) -> float:
    return (n + k) / (n * k) * (math.log((n + k) / (2.0 * math.pi * n * k * lam * (1.0 - lam)))
                                - 2.0 * math.log(eps))


def gamma_upper_analytic(s: SampleSplit) -> Deviation:
    """Closed-form sampling bound from the quadratic relaxation.

    Valid for ``0 < lam < chi <= 0.5``; ``lam = 0`` is regularized to half
    an error count. Raises :class:`DomainError` for ``lam >= 0.5``. When
    ``eps`` is so large that G <= 0 the bound is its G -> 0 limit, zero.
    """
    n, k = s.n, s.k
    if s.lam >= 0.5:
        raise DomainError(f"analytic sampling bound needs lam < 0.5, got {s.lam}")
    lam = regularized_fraction(s.lam, k)
    big_g = _sampling_G(n, k, lam, s.epsilon)
    if big_g <= 0.0:
        return Deviation(0.0, Direction.UPPER, s.epsilon, MethodTag.OURS_ANALYTIC, center=s.lam,
                         note="G <= 0")
    a = max(n, k)
    ag = a * big_g / (n + k)
    num = (1.0 - 2.0 * lam) * ag + math.sqrt(ag * ag + 4.0 * lam * (1.0 - lam) * big_g)
    den = 2.0 + 2.0 * a * a * big_g / (n + k) ** 2
    return Deviation(num / den, Direction.UPPER, s.epsilon, MethodTag.OURS_ANALYTIC, center=s.lam)


def serfling_gamma(s: SampleSplit) -> Deviation:
    n, k = s.n, s.k
    gamma = math.sqrt((n + k) * (k + 1.0) * _beta(s.epsilon) / (n * k * k))
    return Deviation(gamma, Direction.UPPER, s.epsilon, MethodTag.SERFLING, center=s.lam)


def lim_gamma(s: SampleSplit) -> Deviation:
    """Large-sample entropy approximation of the sampling bound (Lim et al.)."""
    n, k = s.n, s.k
    lam = regularized_fraction(s.lam, k)
    if lam >= 1.0:
        raise DomainError("lim_gamma needs lam < 1")
    var = lam * (1.0 - lam)
    log_term = math.log2((n + k) / (n * k * var)) - 2.0 * math.log2(s.epsilon)
    gamma = math.sqrt((n + k) * var / (n * k * math.log(2.0)) * log_term) if log_term > 0 else 0.0
    return Deviation(gamma, Direction.UPPER, s.epsilon, MethodTag.LIM, center=s.lam)


def zhang_sampling_residual(gamma: float, s: SampleSplit) -> float:
    n, k = s.n, s.k
    lam = regularized_fraction(s.lam, k)
    w = n + k
    lhs = (binary_entropy(min(lam + n * gamma / w, 1.0)) - k / w * binary_entropy(lam)
           - n / w * binary_entropy(min(lam + gamma, 1.0)))
    rhs = (math.log2(w / (n * k * lam * (1.0 - lam))) - 2.0 * math.log2(s.epsilon)) / (2.0 * w)
    return lhs - rhs


def zhang_gamma_numeric(s: SampleSplit) -> Deviation:
    """Entropy-form transcendental sampling bound (Zhang et al.)."""
    lam = regularized_fraction(s.lam, s.k)
    if lam >= 1.0:
        raise DomainError("zhang_gamma_numeric needs lam < 1")
    tag = MethodTag.ZHANG_NUMERIC
    top = 1.0 - lam
    f = lambda g: zhang_sampling_residual(g, s)  # noqa: E731
    f0 = f(0.0)
    if f0 >= 0.0:
        return Deviation(0.0, Direction.UPPER, s.epsilon, tag, center=s.lam)
    f_top = f(top)
    if f_top < 0.0:
        return Deviation(top, Direction.UPPER, s.epsilon, tag, clamped=True, center=s.lam)
    gamma = find_root(f, Bracket(0.0, top, f0, f_top), TIGHT)
    return Deviation(gamma, Direction.UPPER, s.epsilon, tag, center=s.lam)


# --- Chernoff: observed value from a known expectation -------------------

def chernoff_upper_residual(delta: float, x_star: float, eps: float) -> float:
    return x_star * (delta - (1.0 + delta) * math.log1p(delta)) - math.log(eps)


def chernoff_lower_residual(delta: float, x_star: float, eps: float) -> float:
    tail = 0.0 if delta == 1.0 else (1.0 - delta) * math.log1p(-delta)
    return -x_star * (delta + tail) - math.log(eps)


def _tag(mode: Mode) -> MethodTag:
    return MethodTag.OURS_NUMERIC if mode == "numeric" else MethodTag.OURS_ANALYTIC


def chernoff_delta_upper(x_star: float, epsilon: float, mode: Mode = "analytic") -> Deviation:
    """Upper bound on the observed value, ``x_star * (1 + delta)``.

    At ``x_star = 0`` both modes fall back to the additive width ``beta``.
    """
    _check_mode(mode)
    if x_star < 0:
        raise DomainError(f"expected value must be nonnegative, got {x_star}")
    beta = _beta(epsilon)
    tag = _tag(mode)
    if beta == 0.0:
        return Deviation(0.0, Direction.UPPER, epsilon, tag, center=x_star)
    if x_star == 0.0:
        return Deviation(beta, Direction.UPPER, epsilon, tag, center=0.0)
    if mode == "analytic":
        width = beta / 2.0 + math.sqrt(2.0 * beta * x_star + beta * beta / 4.0)
        return Deviation(width, Direction.UPPER, epsilon, tag, center=x_star)
    f = lambda d: chernoff_upper_residual(d, x_star, epsilon)  # noqa: E731
    delta = find_root(f, expand_bracket(f), TIGHT)
    return Deviation(x_star * delta, Direction.UPPER, epsilon, tag, center=x_star)


def chernoff_delta_lower(x_star: float, epsilon: float, mode: Mode = "analytic") -> Deviation:
    """Lower bound on the observed value, ``x_star * (1 - delta)``, floored at 0."""
    _check_mode(mode)
    if x_star < 0:
        raise DomainError(f"expected value must be nonnegative, got {x_star}")
    beta = _beta(epsilon)
    tag = _tag(mode)
    if beta == 0.0:
        return Deviation(0.0, Direction.LOWER, epsilon, tag, center=x_star)
    if mode == "analytic":
        if x_star < 2.0 * beta:
            return Deviation(x_star, Direction.LOWER, epsilon, tag, clamped=True, center=x_star)
        width = math.sqrt(2.0 * beta * x_star)
        return Deviation(width, Direction.LOWER, epsilon, tag, center=x_star)
    # root in (0, 1] exists iff x_star >= beta, since the left side is -x_star at delta = 1
    if x_star < beta:
        return Deviation(x_star, Direction.LOWER, epsilon, tag, clamped=True, center=x_star)
    f = lambda d: chernoff_lower_residual(d, x_star, epsilon)  # noqa: E731
    delta = find_root(f, Bracket.from_function(f, 0.0, 1.0), TIGHT)
    return Deviation(x_star * delta, Direction.LOWER, epsilon, tag, center=x_star)


# --- variant Chernoff: expectation from one observed value ---------------

def variant_upper_residual(width: float, x: float, eps: float) -> float:
    if x == 0.0:
        return -width - math.log(eps)
    return -width + x * math.log1p(width / x) - math.log(eps)


def variant_lower_residual(width: float, x: float, eps: float) -> float:
    return width - (x + width) * math.log1p(width / x) - math.log(eps)


def variant_delta_upper(x: float, epsilon: float, mode: Mode = "analytic") -> Deviation:
    """Upper bound on the expectation, ``x + Delta``."""
    _check_mode(mode)
    if x < 0:
        raise DomainError(f"observed value must be nonnegative, got {x}")
    beta = _beta(epsilon)
    tag = _tag(mode)
    if mode == "analytic":
        width = beta + math.sqrt(2.0 * beta * x + beta * beta)
    elif beta == 0.0 or x == 0.0:
        # the x ln(...) term vanishes as x -> 0, leaving -Delta = ln eps
        width = beta
    else:
        f = lambda d: variant_upper_residual(d, x, epsilon)  # noqa: E731
        width = find_root(f, expand_bracket(f), TIGHT)
    return Deviation(width, Direction.UPPER, epsilon, tag, center=x)


def variant_delta_lower(x: float, epsilon: float, mode: Mode = "analytic") -> Deviation:
    """Lower bound on the expectation, ``x - Delta``, floored at 0."""
    _check_mode(mode)
    if x < 0:
        raise DomainError(f"observed value must be nonnegative, got {x}")
    beta = _beta(epsilon)
    tag = _tag(mode)
    if x == 0.0:
        return Deviation(0.0, Direction.LOWER, epsilon, tag, clamped=True, center=0.0)
    if beta == 0.0:
        return Deviation(0.0, Direction.LOWER, epsilon, tag, center=x)
    if mode == "analytic":
        width = beta / 2.0 + math.sqrt(2.0 * beta * x + beta * beta / 4.0)
    else:
        f = lambda d: variant_lower_residual(d, x, epsilon)  # noqa: E731
        width = find_root(f, expand_bracket(f), TIGHT)
    if width >= x:
        return Deviation(x, Direction.LOWER, epsilon, tag, clamped=True, center=x)
    return Deviation(width, Direction.LOWER, epsilon, tag, center=x)


# --- legacy expectation bounds -------------------------------------------

def _hoeffding_width(total: float, eps: float) -> float:
    return math.sqrt(total / 2.0 * _beta(eps))


def _lower(x: float, width: float, eps: float, tag: MethodTag, note: str = "") -> Deviation:
    if width >= x:
        return Deviation(x, Direction.LOWER, eps, tag, clamped=True, center=x, note=note)
    return Deviation(width, Direction.LOWER, eps, tag, center=x, note=note)


def curty_expected_bounds(x: float, N: float | None, eps1: float, eps2: float | None = None,
                          simplified: bool = False) -> tuple[Deviation, Deviation]:
    """Multiplicative Chernoff bounds on the expectation (Curty et al.).

    The full procedure tests a Hoeffding worst-case lower estimate against
    three thresholds and picks one of six width pairs. ``simplified=True``
    gives the single-epsilon form used for key-rate comparisons, which is
    known not to be rigorous for small ``x``.
    """
    if x < 0:
        raise DomainError(f"observed value must be nonnegative, got {x}")
    eps2 = eps1 if eps2 is None else eps2
    tag = MethodTag.CURTY
    if simplified:
        beta = _beta(eps1)
        note = "not rigorous for small x"
        up = math.sqrt(8.0 * beta * x + 8.0 * x * math.log(2.0))
        low = math.sqrt(3.0 * beta * x)
        return (Deviation(up, Direction.UPPER, eps1, tag, center=x, note=note),
                _lower(x, low, eps2, tag, note))
    if N is None or N < 0 or x > N:
        raise DomainError(f"full Curty procedure needs 0 <= x <= N, got x={x}, N={N}")

    def g(ln_inv_y: float) -> float:
        # g(x, y) = sqrt(2 x ln(1/y)), taking ln(1/y) to avoid underflow in y
        return math.sqrt(2.0 * x * ln_inv_y)

    mu_lower = x - _hoeffding_width(N, min(eps1, eps2))
    test1 = mu_lower >= 32.0 / 9.0 * math.log(2.0 / eps1)
    test2 = mu_lower > 3.0 * math.log(1.0 / eps2)
    test3 = mu_lower > (2.0 / (2.0 * math.e - 1.0)) ** 2 * math.log(1.0 / eps2)
    beta1, beta2 = -math.log(eps1), -math.log(eps2)
    up = g(4.0 * beta1 + math.log(16.0)) if test1 else _hoeffding_width(N, eps1)
    if test2:
        low = g(1.5 * beta2)
    elif test3:
        low = g(2.0 * beta2)
    else:
        low = _hoeffding_width(N, eps2)
    return Deviation(up, Direction.UPPER, eps1, tag, center=x), _lower(x, low, eps2, tag)


def lim_hoeffding(x_total: float, epsilon: float, center: float = 0.0,
                  direction: Direction = Direction.UPPER) -> Deviation:
    """Hoeffding width shared by every intensity, from the summed count ``X``."""
    if x_total < 0:
        raise DomainError(f"summed count must be nonnegative, got {x_total}")
    width = _hoeffding_width(x_total, epsilon)
    if direction is Direction.LOWER:
        return _lower(center, width, epsilon, MethodTag.LIM)
    return Deviation(width, Direction.UPPER, epsilon, MethodTag.LIM, center=center)


def zhang_upper_residual(delta: float, x: float, eps: float) -> float:
    tail = 0.0 if delta == 1.0 else (1.0 - delta) * math.log1p(-delta)
    return x / (1.0 - delta) * (-delta - tail) - math.log(eps)


def zhang_lower_residual(delta: float, x: float, eps: float) -> float:
    return x / (1.0 + delta) * (delta - (1.0 + delta) * math.log1p(delta)) - math.log(eps)


def gaussian_width(x: float, epsilon: float) -> float:
    _check_epsilon(epsilon)
    if epsilon >= 0.5:
        return 0.0
    return erfc_inv(2.0 * epsilon) * math.sqrt(2.0 * x)


def zhang_inverse_deltas(x: float, epsilon: float) -> tuple[float, float]:
    """Roots ``(delta_up, delta_low)`` of the inverse-solution Chernoff equations, ``x > 0``.

    The expectation bounds are ``x / (1 - delta_up)`` and ``x / (1 + delta_low)``.
    """
    if not x > 0:
        raise DomainError(f"inverse Chernoff roots need x > 0, got {x}")
    _check_epsilon(epsilon)
    fu = lambda d: zhang_upper_residual(d, x, epsilon)  # noqa: E731
    top = math.nextafter(1.0, 0.0)
    d_up = find_root(fu, Bracket.from_function(fu, 0.0, top), TIGHT)
    fl = lambda d: zhang_lower_residual(d, x, epsilon)  # noqa: E731
    d_low = find_root(fl, expand_bracket(fl), TIGHT)
    return d_up, d_low


def zhang_expected_bounds(x: float, epsilon: float,
                          mode: Literal["numeric", "analytic", "gaussian"] = "numeric"
                          ) -> tuple[Deviation, Deviation]:
    """Inverse-solution Chernoff bounds (Zhang et al.) or Gaussian analysis.

    Returns ``(upper, lower)`` deviations around ``x``.
    """
    if x < 0:
        raise DomainError(f"observed value must be nonnegative, got {x}")
    beta = _beta(epsilon)
    if mode == "gaussian":
        w = gaussian_width(x, epsilon)
        tag = MethodTag.GAUSSIAN
        return Deviation(w, Direction.UPPER, epsilon, tag, center=x), _lower(x, w, epsilon, tag)
    if mode == "analytic":
        tag = MethodTag.ZHANG_ANALYTIC
        up = 1.5 * beta + math.sqrt(2.0 * beta * x + 2.25 * beta * beta)
        low = math.sqrt(2.0 * beta * x + beta * beta / 4.0) - beta / 2.0
        return Deviation(up, Direction.UPPER, epsilon, tag, center=x), _lower(x, low, epsilon, tag)
    if mode != "numeric":
        raise DomainError(f"unknown mode {mode!r}")
    tag = MethodTag.ZHANG_NUMERIC
    if beta == 0.0:
        return (Deviation(0.0, Direction.UPPER, epsilon, tag, center=x),
                Deviation(0.0, Direction.LOWER, epsilon, tag, center=x))
    if x == 0.0:
        # x/(1 - delta) -> beta as delta -> 1
        return (Deviation(beta, Direction.UPPER, epsilon, tag, center=0.0),
                Deviation(0.0, Direction.LOWER, epsilon, tag, clamped=True, center=0.0))
    d_up, d_low = zhang_inverse_deltas(x, epsilon)
    # x/(1 - d) - x and x - x/(1 + d), written without cancellation
    upper = Deviation(x * d_up / (1.0 - d_up), Direction.UPPER, epsilon, tag, center=x)
    lower = Deviation(x * d_low / (1.0 + d_low), Direction.LOWER, epsilon, tag, center=x)
    return upper, lower


# --- dispatch by method tag ----------------------------------------------

def sampling_gamma(method: MethodTag | str, s: SampleSplit) -> Deviation:
    """Sampling bound of the given method (``curty`` maps to Serfling)."""
    method = MethodTag.parse(method)
    if method is MethodTag.OURS_NUMERIC:
        return gamma_upper_numeric(s)
    if method is MethodTag.OURS_ANALYTIC:
        return gamma_upper_analytic(s)
    if method in (MethodTag.SERFLING, MethodTag.CURTY):
        return serfling_gamma(s)
    if method is MethodTag.LIM:
        return lim_gamma(s)
    return zhang_gamma_numeric(s)


def expected_lower(method: MethodTag | str, x: float, epsilon: float) -> Deviation:
    """Lower bound on the expectation of ``x`` for the single-count methods."""
    method = MethodTag.parse(method)
    if method is MethodTag.OURS_NUMERIC:
        return variant_delta_lower(x, epsilon, "numeric")
    if method is MethodTag.OURS_ANALYTIC:
        return variant_delta_lower(x, epsilon, "analytic")
    if method is MethodTag.ZHANG_NUMERIC:
        return zhang_expected_bounds(x, epsilon, "numeric")[1]
    if method is MethodTag.ZHANG_ANALYTIC:
        return zhang_expected_bounds(x, epsilon, "analytic")[1]
    if method is MethodTag.GAUSSIAN:
        return zhang_expected_bounds(x, epsilon, "gaussian")[1]
    if method is MethodTag.CURTY:
        return curty_expected_bounds(x, None, epsilon, simplified=True)[1]
    raise DomainError(f"method {method.value} has no single-count expectation bound")
