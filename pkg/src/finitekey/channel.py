"""Asymptotic count model of a lossy-fiber BB84 link with dark counts."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .decoy import BASES, INTENSITIES, ObservedCounts, ProtocolParams
from .numerics import DomainError


@dataclass(frozen=True)
class ChannelModel:
    """Detector and fiber parameters; defaults are the usual practical values."""

    eta_d: float = 0.045
    Y0: float = 1.7e-6
    e_d: float = 0.033
    alpha: float = 0.21  # dB/km
    L: float = 0.0  # km
    e0: float = 0.5

    def __post_init__(self):
        for name in ("eta_d", "Y0", "e_d", "e0"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise DomainError(f"{name} must lie in [0, 1], got {getattr(self, name)}")
        if self.alpha <= 0:
            raise DomainError(f"attenuation must be positive, got {self.alpha}")
        if self.L < 0:
            raise DomainError(f"fiber length must be nonnegative, got {self.L}")

    @property
    def eta(self) -> float:
        """Overall transmittance of fiber and detector."""
        return self.eta_d * 10.0 ** (-self.alpha * self.L / 10.0)

    def at(self, L: float) -> "ChannelModel":
        return replace(self, L=L)


def gains_and_errors(model: ChannelModel, k: float) -> tuple[float, float]:
    """Gain ``Q_k`` and error gain ``E_k Q_k`` for intensity ``k`` (same in both bases)."""
    if k < 0:
        raise DomainError(f"intensity must be nonnegative, got {k}")
    q = 1.0 - (1.0 - model.Y0) * math.exp(-k * model.eta)
    eq = model.e_d * q + (model.e0 - model.e_d) * model.Y0
    return q, eq


def _trial_weight(params: ProtocolParams, k: str, basis: str) -> float:
    alice = params.p_z if basis == "Z" else params.p_x
    bob = params.q_z if basis == "Z" else params.q_x
    # the vacuum carries no basis, so only Bob's choice sorts it
    if k == "vac":
        return params.p_vac * bob
    return params.probability(k) * alice * bob


def simulate_counts(model: ChannelModel, params: ProtocolParams,
                    rng: np.random.Generator | None = None, rounding: bool = False) -> ObservedCounts:
    """Counts of each (intensity, basis) set.

    By default these are the deterministic expected counts. Passing ``rng``
    draws binomial counts instead, and ``rounding`` rounds the expected
    counts to integers.
    """
    n: dict = {k: {} for k in INTENSITIES}
    m: dict = {k: {} for k in INTENSITIES}
    for k in INTENSITIES:
        q, eq = gains_and_errors(model, params.intensity(k))
        err = eq / q if q > 0 else 0.0
        for b in BASES:
            w = _trial_weight(params, k, b)
            if rng is not None:
                nk = float(rng.binomial(int(params.N), w * q))
                mk = float(rng.binomial(int(nk), min(err, 1.0)))
            else:
                nk = params.N * w * q
                mk = min(params.N * w * eq, nk)
                if rounding:
                    nk, mk = float(round(nk)), float(round(mk))
            n[k][b], m[k][b] = nk, mk
    return ObservedCounts(n, m)
