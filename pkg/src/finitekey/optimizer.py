"""Key-rate maximization over the free protocol parameters.

The six free variables (mu, nu, p_mu, p_nu, p_z, q_z) are mapped from an
unconstrained vector through logistic and softmax transforms, so every
candidate the simplex search visits is a valid parameter set. Each search
starts from the best points of a coarse grid over that vector.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from .channel import ChannelModel, simulate_counts
from .decoy import KeyRateReport, ProtocolParams, SecurityBudget, _pipeline_method, evaluate
from .numerics import DomainError


@dataclass(frozen=True)
class OptimizationSpace:
    mu: tuple[float, float] = (0.05, 1.0)
    nu_min: float = 0.001
    nu_gap: float = 0.001  # nu <= mu - nu_gap
    prob_min: float = 0.001
    prob_max: float = 0.999

    def __post_init__(self):
        lo, hi = self.mu
        if not 0.0 < lo < hi:
            raise DomainError(f"bad mu range {self.mu}")
        if not self.nu_min + self.nu_gap < lo:
            raise DomainError("nu range is empty at the smallest mu")
        if not 0.0 < self.prob_min < self.prob_max < 1.0 or 3 * self.prob_min >= 1.0:
            raise DomainError("bad probability limits")


@dataclass(frozen=True)
class OptimizerConfig:
    starts: int = 8
    max_evals: int = 2000
    rel_tol: float = 1e-6
    seed: int = 0
    grid_points: int = 4

    def __post_init__(self):
        if self.starts < 1 or self.max_evals < 1 or self.grid_points < 1:
            raise DomainError("optimizer counts must be positive")
        if self.rel_tol <= 0:
            raise DomainError("rel_tol must be positive")


def _sigmoid(u: float) -> float:
    if u >= 0:
        return 1.0 / (1.0 + math.exp(-u))
    e = math.exp(u)
    return e / (1.0 + e)


def _logit(p: float) -> float:
    return math.log(p / (1.0 - p))


def from_unconstrained(u: Sequence[float], template: ProtocolParams,
                       space: OptimizationSpace) -> ProtocolParams:
    """Map an unconstrained 6-vector onto a valid parameter set."""
    lo, hi = space.mu
    mu = lo + (hi - lo) * _sigmoid(u[0])
    nu = space.nu_min + (mu - space.nu_gap - space.nu_min) * _sigmoid(u[1])
    # softmax over (mu, nu, vacuum) with the vacuum logit pinned at 0
    m = max(u[2], u[3], 0.0)
    w = (math.exp(u[2] - m), math.exp(u[3] - m), math.exp(-m))
    total = sum(w)
    spread = 1.0 - 3.0 * space.prob_min
    p_mu = space.prob_min + spread * w[0] / total
    p_nu = space.prob_min + spread * w[1] / total
    width = space.prob_max - space.prob_min
    p_z = space.prob_min + width * _sigmoid(u[4])
    q_z = space.prob_min + width * _sigmoid(u[5])
    return replace(template, mu=mu, nu=nu, p_mu=p_mu, p_nu=p_nu, p_z=p_z, q_z=q_z)


def to_unconstrained(params: ProtocolParams, space: OptimizationSpace) -> np.ndarray:
    """Inverse of :func:`from_unconstrained`, for warm starts."""
    def clip(t: float) -> float:
        return min(max(t, 1e-12), 1.0 - 1e-12)

    lo, hi = space.mu
    u0 = _logit(clip((params.mu - lo) / (hi - lo)))
    u1 = _logit(clip((params.nu - space.nu_min) / (params.mu - space.nu_gap - space.nu_min)))
    spread = 1.0 - 3.0 * space.prob_min
    w_mu = max((params.p_mu - space.prob_min) / spread, 1e-300)
    w_nu = max((params.p_nu - space.prob_min) / spread, 1e-300)
    w_0 = max((params.p_vac - space.prob_min) / spread, 1e-300)
    width = space.prob_max - space.prob_min
    u4 = _logit(clip((params.p_z - space.prob_min) / width))
    u5 = _logit(clip((params.q_z - space.prob_min) / width))
    return np.array([u0, u1, math.log(w_mu / w_0), math.log(w_nu / w_0), u4, u5])


def keyrate_report(model: ChannelModel, params: ProtocolParams, budget: SecurityBudget,
                   method) -> KeyRateReport:
    return evaluate(simulate_counts(model, params), params, budget, method)


def _score(report: KeyRateReport) -> float:
    # the unfloored length keeps the objective informative where no key survives
    if report.aborted:
        return min(report.raw_ell, 0.0) / report.N - 1.0
    return report.raw_ell / report.N


_GRID_LEVELS = {1: (0.0,), 2: (-1.5, 1.5), 3: (-3.0, 0.0, 3.0), 4: (-3.0, -1.0, 1.0, 3.0)}


def _grid(points: int) -> list[np.ndarray]:
    levels = _GRID_LEVELS.get(points) or tuple(np.linspace(-3.0, 3.0, points))
    return [np.array(u) for u in itertools.product(levels, repeat=6)]


def optimize_keyrate(model: ChannelModel, budget: SecurityBudget, method,
                     template: ProtocolParams, space: OptimizationSpace = OptimizationSpace(),
                     cfg: OptimizerConfig = OptimizerConfig(),
                     warm_starts: Sequence[ProtocolParams] = ()) -> tuple[ProtocolParams, KeyRateReport]:
    """Maximize the key rate over mu, nu, p_mu, p_nu, p_z and q_z.

    ``template`` supplies the fixed fields (N, zeta, phi_tol). The result is
    deterministic for a given ``cfg.seed``. If no candidate yields a key,
    the best zero-key report is returned.
    """
    method = _pipeline_method(method)
    cache: dict[tuple, tuple[float, ProtocolParams, KeyRateReport]] = {}

    def run(u: np.ndarray) -> tuple[float, ProtocolParams, KeyRateReport]:
        key = tuple(np.round(u, 12))
        hit = cache.get(key)
        if hit is None:
            params = from_unconstrained(u, template, space)
            report = keyrate_report(model, params, budget, method)
            hit = (_score(report), params, report)
            cache[key] = hit
        return hit

    # warm starts are scored exactly as given, so the result never trails them
    finals = []
    for params in warm_starts:
        params = replace(template, mu=params.mu, nu=params.nu, p_mu=params.p_mu,
                         p_nu=params.p_nu, p_z=params.p_z, q_z=params.q_z)
        report = keyrate_report(model, params, budget, method)
        finals.append((_score(report), params, report))

    scored = sorted(((run(u)[0], i, u) for i, u in enumerate(_grid(cfg.grid_points))),
                    key=lambda t: (-t[0], t[1]))
    starts = [to_unconstrained(p, space) for p in warm_starts]
    starts += [u for _, _, u in scored[:cfg.starts]]
    rng = np.random.default_rng(cfg.seed)
    # normalizing by the best grid score makes fatol a relative tolerance
    scale = max(abs(scored[0][0]), 1e-300)
    for u0 in starts:
        u0 = u0 + rng.normal(scale=0.05, size=6)
        minimize(lambda u: -run(u)[0] / scale, u0, method="Nelder-Mead",
                 options={"maxfev": cfg.max_evals, "xatol": 1e-6,
                          "fatol": cfg.rel_tol, "adaptive": True})
    # best of everything evaluated, so the result never trails the grid seeds;
    # max keeps the first of equal scores, and dicts keep insertion order
    _, params, report = max(finals + list(cache.values()), key=lambda t: t[0])
    return params, report


def max_secure_distance(model: ChannelModel, budget: SecurityBudget, method,
                        template: ProtocolParams, space: OptimizationSpace = OptimizationSpace(),
                        cfg: OptimizerConfig = OptimizerConfig(), L_max: float = 400.0,
                        step: float = 20.0, tol: float = 0.5) -> float:
    """Largest fiber length (km) at which the optimized key rate is positive."""
    def positive(L: float) -> bool:
        return optimize_keyrate(model.at(L), budget, method, template, space, cfg)[1].key_rate > 0

    if not positive(0.0):
        return 0.0
    lo = 0.0
    hi = step
    while hi <= L_max and positive(hi):
        lo, hi = hi, hi + step
    if hi > L_max:
        return L_max
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if positive(mid):
            lo = mid
        else:
            hi = mid
    return lo
