"""Finite-key secret key length for decoy-state BB84 with vacuum and weak decoys.

The pipeline runs

    observed counts -> expectation bounds (variant Chernoff)
                    -> decoy linear combinations for s0, s1 and t1
                    -> observed-value bounds (Chernoff)
                    -> phase error bound (sampling without replacement)
                    -> key length

and every statistical estimate spends ``eps_sec / 23`` of the secrecy budget.
The comparison methods swap in their own estimates at each stage.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

from .numerics import DomainError, binary_entropy
from .tail_bounds import (
    Deviation,
    Direction,
    MethodTag,
    SampleSplit,
    chernoff_delta_lower,
    chernoff_delta_upper,
    curty_expected_bounds,
    lim_hoeffding,
    sampling_gamma,
    variant_delta_lower,
    variant_delta_upper,
    zhang_expected_bounds,
)

INTENSITIES = ("mu", "nu", "vac")
BASES = ("Z", "X")

# Number of equal shares the secrecy parameter is split into.
EPS_SHARES = 23

PIPELINE_METHODS = (
    MethodTag.OURS_NUMERIC,
    MethodTag.OURS_ANALYTIC,
    MethodTag.CURTY,
    MethodTag.LIM,
    MethodTag.ZHANG_NUMERIC,
    MethodTag.ZHANG_ANALYTIC,
    MethodTag.GAUSSIAN,
)


class AbortSignal(Exception):
    """No single-photon statistics survive; the protocol run yields no key."""


@dataclass(frozen=True)
class ProtocolParams:
    mu: float
    nu: float
    p_mu: float
    p_nu: float
    p_z: float
    q_z: float
    N: float = 1e10
    zeta: float = 1.22
    phi_tol: float = 0.25
    vacuum_weighting: str = "basis"

    def __post_init__(self):
        if not self.mu > self.nu > 0.0:
            raise DomainError(f"need mu > nu > 0, got mu={self.mu}, nu={self.nu}")
        for name in ("p_mu", "p_nu"):
            if not 0.0 < getattr(self, name) < 1.0:
                raise DomainError(f"{name} must lie in (0, 1), got {getattr(self, name)}")
        if not self.p_mu + self.p_nu < 1.0:
            raise DomainError("need p_mu + p_nu < 1 so the vacuum is sent")
        for name in ("p_z", "q_z"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise DomainError(f"{name} must lie in [0, 1], got {getattr(self, name)}")
        if self.N < 0:
            raise DomainError(f"pulse count must be nonnegative, got {self.N}")
        if self.zeta <= 0:
            raise DomainError(f"error-correction efficiency must be positive, got {self.zeta}")
        if not 0.0 < self.phi_tol <= 0.5:
            raise DomainError(f"phi_tol must lie in (0, 0.5], got {self.phi_tol}")
        if self.vacuum_weighting not in ("basis", "printed"):
            raise DomainError(f"vacuum_weighting must be 'basis' or 'printed', got {self.vacuum_weighting!r}")

    @property
    def p_vac(self) -> float:
        return 1.0 - self.p_mu - self.p_nu

    @property
    def p_x(self) -> float:
        return 1.0 - self.p_z

    @property
    def q_x(self) -> float:
        return 1.0 - self.q_z

    def intensity(self, k: str) -> float:
        return {"mu": self.mu, "nu": self.nu, "vac": 0.0}[k]

    def probability(self, k: str) -> float:
        return {"mu": self.p_mu, "nu": self.p_nu, "vac": self.p_vac}[k]


@dataclass(frozen=True)
class SecurityBudget:
    eps_sec: float = 1e-10
    eps_cor: float = 1e-15

    def __post_init__(self):
        for name in ("eps_sec", "eps_cor"):
            if not 0.0 < getattr(self, name) < 1.0:
                raise DomainError(f"{name} must lie in (0, 1), got {getattr(self, name)}")

    @property
    def per_use(self) -> float:
        return self.eps_sec / EPS_SHARES


@dataclass(frozen=True)
class ObservedCounts:
    """Detections ``n[k][b]`` and bit errors ``m[k][b]`` per intensity and basis."""

    n: dict
    m: dict

    def __post_init__(self):
        for k in INTENSITIES:
            for b in BASES:
                nk, mk = self.n[k][b], self.m[k][b]
                if not (math.isfinite(nk) and math.isfinite(mk)) or nk < 0 or mk < 0:
                    raise DomainError(f"counts for ({k}, {b}) must be finite and nonnegative")
                if mk > nk * (1.0 + 1e-12):
                    raise DomainError(f"errors exceed detections for ({k}, {b}): {mk} > {nk}")

    @property
    def n_key(self) -> float:
        """Size of the raw key, the Z detections of the two nonzero intensities."""
        return self.n["mu"]["Z"] + self.n["nu"]["Z"]

    @property
    def error_rate_key(self) -> float:
        n = self.n_key
        return (self.m["mu"]["Z"] + self.m["nu"]["Z"]) / n if n > 0 else 0.0

    def as_dict(self) -> dict:
        return {"n": {k: dict(v) for k, v in self.n.items()},
                "m": {k: dict(v) for k, v in self.m.items()}}


@dataclass(frozen=True)
class AuditEntry:
    quantity: str
    stage: str
    method: str
    epsilon: float
    value: Optional[float]


@dataclass(frozen=True)
class ExpectedBounds:
    n0Z_lo: float
    nnuZ_lo: float
    nmuZ_hi: float
    n0Z_hi: float
    n0X_lo: float
    nnuX_lo: float
    nmuX_hi: float
    n0X_hi: float
    mnuX_hi: float


@dataclass(frozen=True)
class DecoyBounds:
    s0Z: float
    s1Z: float
    s1X: float
    t1X: float


@dataclass(frozen=True)
class KeyRateReport:
    method: str
    s0_lower: float
    s1_lower: float
    s1x_lower: float
    t1x_upper: float
    phi1_upper: float
    lambda_ec: float
    ell: float
    raw_ell: float
    key_rate: float
    aborted: bool
    N: float
    expected: Optional[ExpectedBounds] = None
    starred: Optional[DecoyBounds] = None
    audit: tuple = field(default_factory=tuple)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["audit"] = [asdict(a) for a in self.audit]
        return out


def _chernoff_mode(method: MethodTag) -> str:
    return "numeric" if method is MethodTag.OURS_NUMERIC else "analytic"


def _sampling_method(method: MethodTag) -> MethodTag:
    if method in (MethodTag.ZHANG_NUMERIC, MethodTag.ZHANG_ANALYTIC, MethodTag.GAUSSIAN):
        return MethodTag.ZHANG_NUMERIC
    if method is MethodTag.CURTY:
        return MethodTag.SERFLING
    return method


def _pipeline_method(method) -> MethodTag:
    method = MethodTag.parse(method)
    if method is MethodTag.SERFLING:
        method = MethodTag.CURTY
    if method not in PIPELINE_METHODS:
        raise DomainError(f"method {method.value} cannot drive the key-rate pipeline")
    return method


def _expected_pair(x: float, eps: float, method: MethodTag, group_total: float,
                   curty_trials: float | None) -> tuple[Deviation, Deviation]:
    if method is MethodTag.OURS_NUMERIC:
        return variant_delta_upper(x, eps, "numeric"), variant_delta_lower(x, eps, "numeric")
    if method is MethodTag.OURS_ANALYTIC:
        return variant_delta_upper(x, eps, "analytic"), variant_delta_lower(x, eps, "analytic")
    if method is MethodTag.ZHANG_NUMERIC:
        return zhang_expected_bounds(x, eps, "numeric")
    if method is MethodTag.ZHANG_ANALYTIC:
        return zhang_expected_bounds(x, eps, "analytic")
    if method is MethodTag.GAUSSIAN:
        return zhang_expected_bounds(x, eps, "gaussian")
    if method is MethodTag.LIM:
        return (lim_hoeffding(group_total, eps, center=x),
                lim_hoeffding(group_total, eps, center=x, direction=Direction.LOWER))
    if curty_trials is None:
        return curty_expected_bounds(x, None, eps, simplified=True)
    return curty_expected_bounds(x, max(curty_trials, x), eps)


# (name, intensity, basis, count kind, direction)
_EXPECTED_PLAN = (
    ("n0Z_lo", "vac", "Z", "n", Direction.LOWER),
    ("nnuZ_lo", "nu", "Z", "n", Direction.LOWER),
    ("nmuZ_hi", "mu", "Z", "n", Direction.UPPER),
    ("n0Z_hi", "vac", "Z", "n", Direction.UPPER),
    ("n0X_lo", "vac", "X", "n", Direction.LOWER),
    ("nnuX_lo", "nu", "X", "n", Direction.LOWER),
    ("nmuX_hi", "mu", "X", "n", Direction.UPPER),
    ("n0X_hi", "vac", "X", "n", Direction.UPPER),
    ("mnuX_hi", "nu", "X", "m", Direction.UPPER),
)


def expected_bounds(counts: ObservedCounts, budget: SecurityBudget, method,
                    audit: list | None = None, curty_trials: float | None = None) -> ExpectedBounds:
    """The nine expectation bounds feeding the decoy linear combinations.

    For ``lim`` the Hoeffding width uses the count summed over intensities
    for the same basis and count kind. ``curty_trials`` switches Curty's
    method from the simplified form to the full six-case procedure.
    """
    method = _pipeline_method(method)
    eps = budget.per_use
    values = {}
    for name, k, b, kind, direction in _EXPECTED_PLAN:
        table = counts.n if kind == "n" else counts.m
        x = table[k][b]
        total = sum(table[i][b] for i in INTENSITIES)
        upper, lower = _expected_pair(x, eps, method, total, curty_trials)
        values[name] = upper.bound if direction is Direction.UPPER else lower.bound
        if audit is not None:
            audit.append(AuditEntry(name, "expected", method.value, eps, values[name]))
    return ExpectedBounds(**values)


def vacuum_single_bounds(starred: ExpectedBounds, params: ProtocolParams) -> DecoyBounds:
    """Decoy linear combinations for the expected s0, s1 (Z and X) and t1 (X).

    Vacuum pulses carry no basis, so their sets count every vacuum pulse
    Bob measured in that basis. With ``vacuum_weighting="basis"`` each
    vacuum term is scaled by Alice's probability of the matching basis,
    putting it on the same footing as the signal sets. ``"printed"``
    divides by the vacuum probability alone. Negative combinations are
    floored at zero.
    """
    mu, nu = params.mu, params.nu
    p_mu, p_nu = params.p_mu, params.p_nu
    if not (mu > nu > 0.0) or min(p_mu, p_nu, params.p_vac) <= 0.0:
        raise DomainError("decoy combinations need mu > nu > 0 and nonzero intensity probabilities")
    emu, enu = math.exp(-mu), math.exp(-nu)
    if params.vacuum_weighting == "basis":
        p_0z, p_0x = params.p_vac / params.p_z, params.p_vac / params.p_x
    else:
        p_0z = p_0x = params.p_vac

    s0 = (emu * p_mu + enu * p_nu) * starred.n0Z_lo / p_0z

    pref = (mu * mu * emu * p_mu + mu * nu * enu * p_nu) / (mu * nu - nu * nu)
    r2 = nu * nu / (mu * mu)
    r0 = (mu * mu - nu * nu) / (mu * mu)

    def single(n_nu_lo: float, n_mu_hi: float, n_0_hi: float, p_0: float) -> float:
        return pref * (n_nu_lo / (enu * p_nu) - r2 * n_mu_hi / (emu * p_mu) - r0 * n_0_hi / p_0)

    s1z = single(starred.nnuZ_lo, starred.nmuZ_hi, starred.n0Z_hi, p_0z)
    s1x = single(starred.nnuX_lo, starred.nmuX_hi, starred.n0X_hi, p_0x)
    # vacuum detections carry errors with probability 1/2 in expectation
    t1x = (mu * emu * p_mu + nu * enu * p_nu) / nu * (
        starred.mnuX_hi / (enu * p_nu) - starred.n0X_lo / (2.0 * p_0x))
    return DecoyBounds(max(s0, 0.0), max(s1z, 0.0), max(s1x, 0.0), max(t1x, 0.0))


def observed_from_expected(starred: DecoyBounds, budget: SecurityBudget, method,
                           audit: list | None = None) -> DecoyBounds:
    """Chernoff step from the expected decoy bounds back to observed values."""
    method = _pipeline_method(method)
    mode = _chernoff_mode(method)
    eps = budget.per_use
    out = {
        "s0Z": chernoff_delta_lower(starred.s0Z, eps, mode).bound,
        "s1Z": chernoff_delta_lower(starred.s1Z, eps, mode).bound,
        "s1X": chernoff_delta_lower(starred.s1X, eps, mode).bound,
        "t1X": chernoff_delta_upper(starred.t1X, eps, mode).bound,
    }
    if audit is not None:
        for name, value in out.items():
            audit.append(AuditEntry(name, "observed", f"chernoff_{mode}", eps, value))
    return DecoyBounds(**out)


def phase_error_upper(s1z: float, s1x: float, t1x: float, budget: SecurityBudget,
                      method=MethodTag.OURS_ANALYTIC, audit: list | None = None) -> float:
    """Upper bound on the single-photon phase error rate of the raw key, capped at 1/2.

    Raises :class:`AbortSignal` when either single-photon count is zero.
    """
    method = _pipeline_method(method)
    eps = budget.per_use
    sampler = _sampling_method(method)
    if s1x <= 0.0 or s1z <= 0.0:
        if audit is not None:
            audit.append(AuditEntry("gamma", "sampling", sampler.value, eps, None))
        raise AbortSignal("no single-photon detections in one of the bases")
    ratio = t1x / s1x
    if ratio >= 0.5:
        if audit is not None:
            audit.append(AuditEntry("gamma", "sampling", sampler.value, eps, None))
        return 0.5
    dev = sampling_gamma(sampler, SampleSplit(s1z, s1x, ratio, eps))
    if audit is not None:
        audit.append(AuditEntry("gamma", "sampling", sampler.value, eps, dev.width))
    return min(ratio + dev.width, 0.5)


def key_length(observed: DecoyBounds, phi: float, counts: ObservedCounts,
               params: ProtocolParams, budget: SecurityBudget) -> tuple[float, float]:
    """Unfloored key length and the error-correction leakage."""
    n_key = counts.n_key
    lambda_ec = n_key * params.zeta * binary_entropy(min(counts.error_rate_key, 1.0))
    ell = (observed.s0Z + observed.s1Z * (1.0 - binary_entropy(phi)) - lambda_ec
           - math.log2(2.0 / budget.eps_cor) - 6.0 * math.log2(EPS_SHARES / budget.eps_sec))
    return ell, lambda_ec


def evaluate(counts: ObservedCounts, params: ProtocolParams, budget: SecurityBudget,
             method=MethodTag.OURS_ANALYTIC, curty_trials: float | None = None) -> KeyRateReport:
    """Run the whole pipeline on one set of observed counts."""
    method = _pipeline_method(method)
    audit: list[AuditEntry] = []
    expected = expected_bounds(counts, budget, method, audit, curty_trials)
    starred = vacuum_single_bounds(expected, params)
    observed = observed_from_expected(starred, budget, method, audit)
    aborted = False
    try:
        phi = phase_error_upper(observed.s1Z, observed.s1X, observed.t1X, budget, method, audit)
    except AbortSignal:
        phi, aborted = 0.5, True
    raw_ell, lambda_ec = key_length(observed, phi, counts, params, budget)
    aborted = aborted or phi > params.phi_tol
    ell = 0.0 if aborted else max(raw_ell, 0.0)
    return KeyRateReport(
        method=method.value,
        s0_lower=observed.s0Z,
        s1_lower=observed.s1Z,
        s1x_lower=observed.s1X,
        t1x_upper=observed.t1X,
        phi1_upper=phi,
        lambda_ec=lambda_ec,
        ell=ell,
        raw_ell=raw_ell,
        key_rate=ell / params.N if params.N > 0 else 0.0,
        aborted=aborted,
        N=params.N,
        expected=expected,
        starred=starred,
        audit=tuple(audit),
    )
