from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import stats as sstats

from selfportrait.semantic import DimensionMismatch
from selfportrait.stats import (
    DegenerateGroup,
    Group,
    GroupAssignment,
    NonPositiveMSE,
    RankDeficient,
    SlopesHeterogeneityWarning,
    ancova,
    anova_oneway,
    assign_groups,
    effect_band,
    fit_ols,
    format_p,
    significance_stars,
    studentized_range_cdf,
    studentized_range_sf,
    tukey_hsd,
)

GROUPS3 = (Group.REFLECTED, Group.INTERACTED, Group.COLLABORATED)


def make_groups(sizes=(8, 8, 8)):
    assignments = []
    for group, size in zip(GROUPS3, sizes):
        for i in range(size):
            assignments.append(GroupAssignment(f"{group.value[:3]}{i:02d}", group))
    return assignments


def synth(assignments, offsets, slope=0.5, intercept=1.0, noise=0.0, seed=0):
    rng = np.random.default_rng(seed)
    outcome, covariate = {}, {}
    for a in assignments:
        x = float(rng.normal(10, 3))
        eps = float(rng.normal(0, noise)) if noise else 0.0
        covariate[a.user_id] = x
        outcome[a.user_id] = intercept + slope * x + offsets[a.group] + eps
    return outcome, covariate


class TestFitOls:
    def test_constant_response(self):
        X = np.ones((5, 1))
        beta, rss, df = fit_ols(X, np.full(5, 3.25))
        assert beta[0] == pytest.approx(3.25, abs=1e-12)
        assert rss == pytest.approx(0.0, abs=1e-18)
        assert df == 4

    def test_exact_line_recovered(self):
        x = np.arange(10, dtype=float)
        X = np.column_stack([np.ones(10), x])
        y = 2.0 + 0.75 * x
        beta, rss, _ = fit_ols(X, y)
        assert beta[1] == pytest.approx(0.75, abs=1e-10)
        assert rss < 1e-18

    def test_matches_normal_equations_oracle(self):
        rng = np.random.default_rng(4)
        X = rng.standard_normal((50, 3))
        y = rng.standard_normal(50)
        beta, rss, df = fit_ols(X, y)
        oracle = np.linalg.solve(X.T @ X, X.T @ y)
        assert np.allclose(beta, oracle, atol=1e-8)
        assert rss == pytest.approx(float(np.sum((y - X @ oracle) ** 2)), abs=1e-8)
        assert df == 47

    def test_rank_deficient(self):
        X = np.column_stack([np.ones(6), np.ones(6)])
        with pytest.raises(RankDeficient):
            fit_ols(X, np.arange(6, dtype=float))

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            fit_ols(np.ones((5, 2)), np.ones(4))


class TestStudentizedRange:
    def test_tabulated_critical_value(self):
        # published upper-5% point for k=3, df=inf is ~3.314
        assert studentized_range_sf(3.314, 3, math.inf) == pytest.approx(
            0.05, abs=2e-3
        )

    def test_matches_scipy_oracle(self):
        for q, k, df in [(2.0, 3, 10), (3.5, 3, 30), (4.5, 4, 12), (1.2, 2, 6),
                         (5.5, 5, 100), (3.314, 3, 2000)]:
            assert studentized_range_sf(q, k, df) == pytest.approx(
                float(sstats.studentized_range.sf(q, k, df)), abs=1e-8
            )

    def test_cdf_bounds_and_monotonicity(self):
        values = [studentized_range_cdf(q, 3, 24) for q in (0.5, 1, 2, 3, 4, 6)]
        assert all(0.0 <= v <= 1.0 for v in values)
        assert values == sorted(values)

    def test_nonpositive_q(self):
        assert studentized_range_cdf(0.0, 3, 10) == 0.0
        assert studentized_range_sf(-1.0, 3, 10) == 1.0


class TestTukeyHsd:
    def test_equal_means_p_one(self):
        means = {Group.REFLECTED: 2.0, Group.INTERACTED: 2.0}
        out = tukey_hsd(means, mse=1.0, group_sizes={g: 5 for g in means}, df_error=8)
        assert out[0].q_statistic == 0.0
        assert out[0].p_adjusted == pytest.approx(1.0, abs=1e-12)

    def test_critical_q_gives_alpha(self):
        means = {Group.REFLECTED: 0.0, Group.INTERACTED: 3.314, Group.COLLABORATED: 0.0}
        sizes = {g: 10 for g in means}
        # se = sqrt(mse/2*(1/10+1/10)) = sqrt(mse/10); pick mse = 10 -> se = 1
        out = tukey_hsd(means, mse=10.0, group_sizes=sizes, df_error=10**8)
        ref_int = next(c for c in out if c.group_b is Group.INTERACTED)
        assert ref_int.q_statistic == pytest.approx(3.314, abs=1e-12)
        assert ref_int.p_adjusted == pytest.approx(0.05, abs=2e-3)

    def test_outlier_group_smaller_p(self):
        means = {Group.REFLECTED: 0.0, Group.INTERACTED: 0.1, Group.COLLABORATED: 5.0}
        sizes = {g: 6 for g in means}
        out = tukey_hsd(means, mse=1.0, group_sizes=sizes, df_error=15)
        by_pair = {(c.group_a, c.group_b): c.p_adjusted for c in out}
        assert by_pair[(Group.REFLECTED, Group.COLLABORATED)] < by_pair[
            (Group.REFLECTED, Group.INTERACTED)
        ]
        assert by_pair[(Group.INTERACTED, Group.COLLABORATED)] < by_pair[
            (Group.REFLECTED, Group.INTERACTED)
        ]

    def test_p_decreases_as_mean_moves_away(self):
        sizes = {Group.REFLECTED: 6, Group.INTERACTED: 6}
        previous = 1.1
        for shift in (0.0, 0.5, 1.0, 2.0, 4.0):
            means = {Group.REFLECTED: 0.0, Group.INTERACTED: shift}
            (pair,) = tukey_hsd(means, mse=1.0, group_sizes=sizes, df_error=10)
            assert pair.p_adjusted <= previous + 1e-12
            previous = pair.p_adjusted

    def test_nonpositive_mse(self):
        with pytest.raises(NonPositiveMSE):
            tukey_hsd({Group.REFLECTED: 0, Group.INTERACTED: 1}, 0.0, {Group.REFLECTED: 3, Group.INTERACTED: 3}, 4)


class TestAnovaOneway:
    def test_all_equal_f_zero_p_one(self):
        groups = make_groups((3, 3, 3))
        outcome = {a.user_id: 2.5 for a in groups}
        res = anova_oneway(outcome, groups)
        assert res.f_statistic == 0.0
        assert res.p_value == 1.0

    def test_textbook_dataset(self):
        # A=[1,2,3], B=[2,3,4], C=[4,5,6]: SSB=14, SSW=6, F=(14/2)/(6/6)=7
        groups = make_groups((3, 3, 3))
        values = [1, 2, 3, 2, 3, 4, 4, 5, 6]
        outcome = {a.user_id: float(v) for a, v in zip(groups, values)}
        res = anova_oneway(outcome, groups)
        assert res.f_statistic == pytest.approx(7.0, abs=1e-9)
        assert res.p_value == pytest.approx(
            float(sstats.f.sf(7.0, 2, 6)), abs=1e-12
        )

    def test_two_groups_f_equals_t_squared(self):
        rng = np.random.default_rng(8)
        groups = [GroupAssignment(f"r{i}", Group.REFLECTED) for i in range(9)]
        groups += [GroupAssignment(f"i{i}", Group.INTERACTED) for i in range(7)]
        outcome = {a.user_id: float(rng.normal(3 if a.group is Group.REFLECTED else 4, 2)) for a in groups}
        res = anova_oneway(outcome, groups)
        a = [outcome[g.user_id] for g in groups if g.group is Group.REFLECTED]
        b = [outcome[g.user_id] for g in groups if g.group is Group.INTERACTED]
        t_stat, _ = sstats.ttest_ind(a, b, equal_var=True)
        assert res.f_statistic == pytest.approx(t_stat**2, abs=1e-9)

    def test_degenerate_single_member_group(self):
        groups = make_groups((3, 1, 3))
        outcome = {a.user_id: 1.0 for a in groups}
        with pytest.raises(DegenerateGroup):
            anova_oneway(outcome, groups)

    def test_scipy_oracle_on_random_data(self):
        rng = np.random.default_rng(13)
        groups = make_groups((10, 12, 9))
        outcome = {a.user_id: float(rng.normal(2, 1)) for a in groups}
        res = anova_oneway(outcome, groups)
        samples = [
            [outcome[a.user_id] for a in groups if a.group is g] for g in GROUPS3
        ]
        ref = sstats.f_oneway(*samples)
        assert res.f_statistic == pytest.approx(ref.statistic, abs=1e-9)
        assert res.p_value == pytest.approx(ref.pvalue, abs=1e-9)


class TestAncova:
    def test_no_group_effect_when_covariate_explains_all(self):
        groups = make_groups((5, 5, 5))
        rng = np.random.default_rng(2)
        outcome = {a.user_id: float(rng.normal(0, 1)) for a in groups}
        covariate = dict(outcome)  # covariate == outcome
        res = ancova(outcome, covariate, groups)
        assert res.f_statistic == pytest.approx(0.0, abs=1e-9)
        assert res.eta_squared == pytest.approx(0.0, abs=1e-9)

    def test_recovers_injected_offsets(self):
        groups = make_groups((8, 8, 8))
        offsets = {Group.REFLECTED: 0.0, Group.INTERACTED: 2.5, Group.COLLABORATED: -1.25}
        outcome, covariate = synth(groups, offsets)
        res = ancova(outcome, covariate, groups)
        means = res.adjusted_group_means
        assert means[Group.INTERACTED] - means[Group.REFLECTED] == pytest.approx(
            2.5, abs=1e-6
        )
        assert means[Group.COLLABORATED] - means[Group.REFLECTED] == pytest.approx(
            -1.25, abs=1e-6
        )

    def test_eta_band_small(self):
        assert effect_band(0.021) == "small"
        assert effect_band(0.005) == "negligible"
        assert effect_band(0.08) == "medium"
        assert effect_band(0.2) == "large"

    def test_scaling_invariance(self):
        groups = make_groups((7, 7, 7))
        offsets = {Group.REFLECTED: 0.0, Group.INTERACTED: 1.0, Group.COLLABORATED: 0.5}
        outcome, covariate = synth(groups, offsets, noise=1.0, seed=5)
        res1 = ancova(outcome, covariate, groups)
        scaled = {u: 7.25 * v for u, v in outcome.items()}
        res2 = ancova(scaled, covariate, groups)
        assert res2.f_statistic == pytest.approx(res1.f_statistic, rel=1e-9)
        assert res2.p_value == pytest.approx(res1.p_value, abs=1e-9)
        assert res2.eta_squared == pytest.approx(res1.eta_squared, abs=1e-9)
        d1 = (
            res1.adjusted_group_means[Group.INTERACTED]
            - res1.adjusted_group_means[Group.REFLECTED]
        )
        d2 = (
            res2.adjusted_group_means[Group.INTERACTED]
            - res2.adjusted_group_means[Group.REFLECTED]
        )
        assert d2 == pytest.approx(7.25 * d1, rel=1e-9)

    def test_zero_variance_covariate_reduces_to_anova(self):
        groups = make_groups((6, 6, 6))
        rng = np.random.default_rng(10)
        outcome = {a.user_id: float(rng.normal(1, 2)) for a in groups}
        covariate = {a.user_id: 3.0 for a in groups}
        res_ancova = ancova(outcome, covariate, groups)
        res_anova = anova_oneway(outcome, groups)
        assert res_ancova.f_statistic == pytest.approx(
            res_anova.f_statistic, abs=1e-9
        )
        assert res_ancova.p_value == pytest.approx(res_anova.p_value, abs=1e-9)

    def test_eta_monotone_in_effect_size(self):
        groups = make_groups((10, 10, 10))
        previous = -1.0
        for magnitude in (0.0, 0.5, 1.0, 2.0, 4.0):
            offsets = {
                Group.REFLECTED: 0.0,
                Group.INTERACTED: magnitude,
                Group.COLLABORATED: -magnitude,
            }
            outcome, covariate = synth(groups, offsets, noise=1.0, seed=3)
            res = ancova(outcome, covariate, groups)
            assert 0.0 <= res.eta_squared <= 1.0
            assert res.eta_squared >= previous - 1e-12
            previous = res.eta_squared

    def test_heterogeneous_slopes_warn(self):
        groups = make_groups((8, 8, 8))
        rng = np.random.default_rng(6)
        outcome, covariate = {}, {}
        slopes = {Group.REFLECTED: 0.2, Group.INTERACTED: 2.0, Group.COLLABORATED: -1.0}
        for a in groups:
            x = float(rng.normal(10, 3))
            covariate[a.user_id] = x
            outcome[a.user_id] = slopes[a.group] * x + float(rng.normal(0, 0.1))
        with pytest.warns(SlopesHeterogeneityWarning):
            ancova(outcome, covariate, groups)

    @pytest.mark.filterwarnings("ignore::selfportrait.stats.SlopesHeterogeneityWarning")
    def test_statsmodels_style_oracle(self):
        # independent check of the ANCOVA F: explicit projection matrices
        groups = make_groups((9, 7, 11))
        offsets = {Group.REFLECTED: 0.0, Group.INTERACTED: 0.7, Group.COLLABORATED: 0.2}
        outcome, covariate = synth(groups, offsets, noise=2.0, seed=9)
        res = ancova(outcome, covariate, groups)

        ordered = sorted(groups, key=lambda a: a.user_id)
        y = np.array([outcome[a.user_id] for a in ordered])
        x = np.array([covariate[a.user_id] for a in ordered])
        d_int = np.array([1.0 if a.group is Group.INTERACTED else 0.0 for a in ordered])
        d_col = np.array([1.0 if a.group is Group.COLLABORATED else 0.0 for a in ordered])
        X_f = np.column_stack([np.ones(len(y)), x, d_int, d_col])
        X_r = np.column_stack([np.ones(len(y)), x])

        def rss(X):
            beta = np.linalg.solve(X.T @ X, X.T @ y)
            return float(np.sum((y - X @ beta) ** 2))

        rss_f, rss_r = rss(X_f), rss(X_r)
        df_f = len(y) - X_f.shape[1]
        f_ref = ((rss_r - rss_f) / 2) / (rss_f / df_f)
        assert res.f_statistic == pytest.approx(f_ref, rel=1e-9)
        assert res.eta_squared == pytest.approx((rss_r - rss_f) / rss_r, rel=1e-9)


class TestAssignGroups:
    def test_thresholds(self):
        groups = assign_groups({"a": 0, "b": 1, "c": 2, "d": 7})
        by_user = {a.user_id: a.group for a in groups}
        assert by_user == {
            "a": Group.REFLECTED,
            "b": Group.INTERACTED,
            "c": Group.COLLABORATED,
            "d": Group.COLLABORATED,
        }


def test_stars():
    assert significance_stars(0.2) == ""
    assert significance_stars(0.04) == "*"
    assert significance_stars(0.009) == "**"
    assert significance_stars(0.0005) == "***"
    assert format_p(0.00031) == "0.0003***"
