import math
from dataclasses import replace

import pytest

from finitekey.channel import ChannelModel, simulate_counts
from finitekey.decoy import (
    EPS_SHARES,
    AbortSignal,
    DecoyBounds,
    ExpectedBounds,
    ObservedCounts,
    ProtocolParams,
    SecurityBudget,
    evaluate,
    expected_bounds,
    key_length,
    observed_from_expected,
    phase_error_upper,
    vacuum_single_bounds,
)
from finitekey.numerics import DomainError, binary_entropy
from finitekey.tail_bounds import SampleSplit, chernoff_delta_upper, gamma_upper_analytic

PARAMS = ProtocolParams(mu=0.45, nu=0.1, p_mu=0.75, p_nu=0.2, p_z=0.9, q_z=0.9)
BUDGET = SecurityBudget()
BETA_SHARE = math.log(EPS_SHARES / BUDGET.eps_sec)


def flat_counts(n_value: float, m_value: float = 0.0) -> ObservedCounts:
    n = {k: {"Z": n_value, "X": n_value} for k in ("mu", "nu", "vac")}
    m = {k: {"Z": m_value, "X": m_value} for k in ("mu", "nu", "vac")}
    return ObservedCounts(n, m)


class TestTypes:
    def test_per_use(self):
        assert BUDGET.per_use == BUDGET.eps_sec / 23

    @pytest.mark.parametrize("kw", [dict(mu=0.1, nu=0.1), dict(nu=0.0), dict(p_mu=0.6, p_nu=0.4),
                                    dict(p_z=1.5), dict(phi_tol=0.6), dict(vacuum_weighting="x")])
    def test_protocol_validation(self, kw):
        with pytest.raises(DomainError):
            replace(PARAMS, **kw)

    def test_budget_validation(self):
        with pytest.raises(DomainError):
            SecurityBudget(eps_sec=0.0)

    def test_counts_validation(self):
        with pytest.raises(DomainError):
            flat_counts(1.0, 2.0)
        with pytest.raises(DomainError):
            flat_counts(-1.0)


class TestExpectedBounds:
    def test_ours_analytic_formula(self):
        counts = flat_counts(1e6)
        eb = expected_bounds(counts, BUDGET, "ours_analytic")
        b = BETA_SHARE
        assert eb.nnuZ_lo == pytest.approx(1e6 - (b / 2 + math.sqrt(2 * b * 1e6 + b * b / 4)),
                                           rel=1e-12)
        assert eb.nmuZ_hi == pytest.approx(1e6 + b + math.sqrt(2 * b * 1e6 + b * b), rel=1e-12)

    def test_zero_counts_clamp(self):
        eb = expected_bounds(flat_counts(0.0), BUDGET, "ours_numeric")
        assert eb.n0Z_lo == eb.nnuZ_lo == eb.n0X_lo == eb.nnuX_lo == 0.0

    def test_lim_shares_width(self):
        counts = simulate_counts(ChannelModel(), PARAMS)
        eb = expected_bounds(counts, BUDGET, "lim")
        total_z = sum(counts.n[k]["Z"] for k in ("mu", "nu", "vac"))
        width = math.sqrt(total_z / 2 * BETA_SHARE)
        assert eb.nmuZ_hi - counts.n["mu"]["Z"] == pytest.approx(width, rel=1e-12)
        assert counts.n["nu"]["Z"] - eb.nnuZ_lo == pytest.approx(width, rel=1e-12)

    def test_rejects_unknown_method(self):
        with pytest.raises(ValueError):
            expected_bounds(flat_counts(1.0), BUDGET, "ours")


class TestDecoyCombinations:
    def test_zero_inputs(self):
        zero = ExpectedBounds(*([0.0] * 9))
        assert vacuum_single_bounds(zero, PARAMS) == DecoyBounds(0.0, 0.0, 0.0, 0.0)

    def test_hand_evaluated(self):
        counts = simulate_counts(ChannelModel(L=20.0), PARAMS)
        eb = expected_bounds(counts, BUDGET, "ours_analytic")
        mu, nu, pm, pn, p0 = 0.45, 0.1, 0.75, 0.2, 0.05
        p0z, p0x = p0 / 0.9, p0 / 0.1
        a = (mu ** 2 * math.exp(-mu) * pm + mu * nu * math.exp(-nu) * pn) / (mu * nu - nu ** 2)
        s1z = a * (math.exp(nu) * eb.nnuZ_lo / pn - nu ** 2 / mu ** 2 * math.exp(mu) * eb.nmuZ_hi / pm
                   - (mu ** 2 - nu ** 2) / mu ** 2 * eb.n0Z_hi / p0z)
        s1x = a * (math.exp(nu) * eb.nnuX_lo / pn - nu ** 2 / mu ** 2 * math.exp(mu) * eb.nmuX_hi / pm
                   - (mu ** 2 - nu ** 2) / mu ** 2 * eb.n0X_hi / p0x)
        t1x = ((mu * math.exp(-mu) * pm + nu * math.exp(-nu) * pn) / nu
               * (math.exp(nu) * eb.mnuX_hi / pn - eb.n0X_lo / (2 * p0x)))
        s0 = (math.exp(-mu) * pm + math.exp(-nu) * pn) * eb.n0Z_lo / p0z
        got = vacuum_single_bounds(eb, PARAMS)
        assert got.s0Z == pytest.approx(s0, rel=1e-12)
        assert got.s1Z == pytest.approx(s1z, rel=1e-12)
        assert got.s1X == pytest.approx(s1x, rel=1e-12)
        assert got.t1X == pytest.approx(t1x, rel=1e-12)
        # regression snapshot of the same quantities
        assert got.s1Z == pytest.approx(3.124469066e7, rel=1e-8)

    def test_printed_weighting_divides_by_vacuum_probability(self):
        counts = simulate_counts(ChannelModel(L=20.0), PARAMS)
        eb = expected_bounds(counts, BUDGET, "ours_analytic")
        printed = replace(PARAMS, vacuum_weighting="printed")
        s0 = ((math.exp(-0.45) * 0.75 + math.exp(-0.1) * 0.2) * eb.n0Z_lo / 0.05)
        assert vacuum_single_bounds(eb, printed).s0Z == pytest.approx(s0, rel=1e-12)

    def test_recovers_true_single_photon_yield(self):
        # with no fluctuation terms the combination is a lower bound on the true count
        model = ChannelModel(L=20.0)
        counts = simulate_counts(model, PARAMS)
        eb = ExpectedBounds(counts.n["vac"]["Z"], counts.n["nu"]["Z"], counts.n["mu"]["Z"],
                            counts.n["vac"]["Z"], counts.n["vac"]["X"], counts.n["nu"]["X"],
                            counts.n["mu"]["X"], counts.n["vac"]["X"], counts.m["nu"]["X"])
        got = vacuum_single_bounds(eb, PARAMS)
        y1 = model.Y0 + model.eta - model.Y0 * model.eta
        true_s1z = PARAMS.N * PARAMS.p_z * PARAMS.q_z * y1 * (
            0.45 * math.exp(-0.45) * 0.75 + 0.1 * math.exp(-0.1) * 0.2)
        assert 0.9 * true_s1z < got.s1Z <= true_s1z * (1 + 1e-9)
        e1 = (model.e_d * y1 + (model.e0 - model.e_d) * model.Y0) / y1
        # the phase error estimate must not undercut the true single-photon error rate
        assert got.t1X / got.s1X >= e1 * (1 - 1e-9)

    def test_printed_weighting_undercuts_true_error_rate(self):
        # the reason basis weighting is the default
        model = ChannelModel(L=80.0)
        params = replace(PARAMS, vacuum_weighting="printed")
        counts = simulate_counts(model, params)
        eb = ExpectedBounds(counts.n["vac"]["Z"], counts.n["nu"]["Z"], counts.n["mu"]["Z"],
                            counts.n["vac"]["Z"], counts.n["vac"]["X"], counts.n["nu"]["X"],
                            counts.n["mu"]["X"], counts.n["vac"]["X"], counts.m["nu"]["X"])
        got = vacuum_single_bounds(eb, params)
        y1 = model.Y0 + model.eta - model.Y0 * model.eta
        e1 = (model.e_d * y1 + (model.e0 - model.e_d) * model.Y0) / y1
        assert got.t1X / got.s1X < e1
        assert got.t1X == 0.0

    def test_guard(self):
        with pytest.raises(DomainError):
            replace(PARAMS, nu=0.0)


class TestObservedAndPhase:
    def test_observed_formula(self):
        starred = DecoyBounds(0.0, 1e6, 1e6, 50.0)
        obs = observed_from_expected(starred, BUDGET, "ours_analytic")
        assert obs.s0Z == 0.0
        assert obs.s1Z == pytest.approx(1e6 * (1 - math.sqrt(2 * BETA_SHARE / 1e6)), rel=1e-12)
        assert obs.t1X == pytest.approx(chernoff_delta_upper(50.0, BUDGET.per_use).bound)

    def test_phase_error(self):
        phi = phase_error_upper(1e5, 1e5, 1e3, BUDGET, "ours_analytic")
        gamma = gamma_upper_analytic(SampleSplit(1e5, 1e5, 0.01, BUDGET.per_use)).width
        assert phi == pytest.approx(0.01 + gamma, rel=1e-12)
        assert phi == pytest.approx(0.01 + 2.9e-3, abs=3e-4)

    def test_phase_error_zero_ratio(self):
        phi = phase_error_upper(1e5, 1e5, 0.0, BUDGET, "ours_analytic")
        assert phi == gamma_upper_analytic(SampleSplit(1e5, 1e5, 0.0, BUDGET.per_use)).width
        assert phi > 0

    def test_phase_error_clamps(self):
        assert phase_error_upper(1e5, 1e3, 600.0, BUDGET) == 0.5

    def test_abort(self):
        with pytest.raises(AbortSignal):
            phase_error_upper(0.0, 1e3, 1.0, BUDGET)


class TestKeyLength:
    def test_all_zero(self):
        report = evaluate(flat_counts(0.0), PARAMS, BUDGET, "ours_analytic")
        assert report.ell == 0.0 and report.aborted

    def test_zero_pulses(self):
        params = replace(PARAMS, N=0.0)
        report = evaluate(simulate_counts(ChannelModel(), params), params, BUDGET)
        assert report.ell == 0.0 and report.key_rate == 0.0

    def test_half_phase_error_kills_single_photon_term(self):
        counts = flat_counts(1e6, 1e4)
        obs = DecoyBounds(10.0, 1e6, 1e6, 1e6)
        ell, leak = key_length(obs, 0.5, counts, PARAMS, BUDGET)
        expected = (10.0 - leak - math.log2(2 / BUDGET.eps_cor) - 6 * math.log2(23 / BUDGET.eps_sec))
        assert ell == pytest.approx(expected)
        assert leak == pytest.approx(2e6 * 1.22 * binary_entropy(0.01))

    def test_audit_trail(self):
        report = evaluate(simulate_counts(ChannelModel(), PARAMS), PARAMS, BUDGET, "ours_numeric")
        assert len(report.audit) == 14
        assert all(a.epsilon == BUDGET.per_use for a in report.audit)
        assert [a.stage for a in report.audit] == ["expected"] * 9 + ["observed"] * 4 + ["sampling"]

    @pytest.mark.parametrize("method", ["ours_numeric", "ours_analytic", "curty", "lim",
                                        "zhang_numeric", "zhang_analytic", "gaussian"])
    def test_invariants(self, method):
        for L in (0.0, 60.0, 200.0):
            report = evaluate(simulate_counts(ChannelModel(L=L), PARAMS), PARAMS, BUDGET, method)
            assert report.ell >= 0.0
            assert 0.0 <= report.phi1_upper <= 0.5
            assert report.aborted == (report.phi1_upper > PARAMS.phi_tol) or report.ell == 0.0
            assert report.to_dict()["method"] == method

    def test_snapshot_at_zero_length(self):
        counts = simulate_counts(ChannelModel(), PARAMS)
        assert evaluate(counts, PARAMS, BUDGET, "ours_numeric").key_rate == pytest.approx(
            2.6649953501e-3, rel=1e-8)
        assert evaluate(counts, PARAMS, BUDGET, "ours_analytic").key_rate == pytest.approx(
            2.6592024162e-3, rel=1e-8)

    def test_numeric_beats_analytic_pointwise(self):
        for L in (0.0, 50.0, 100.0):
            counts = simulate_counts(ChannelModel(L=L), PARAMS)
            num = evaluate(counts, PARAMS, BUDGET, "ours_numeric").raw_ell
            ana = evaluate(counts, PARAMS, BUDGET, "ours_analytic").raw_ell
            assert num >= ana
