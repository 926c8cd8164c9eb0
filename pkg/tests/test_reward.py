import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oasense.reward import (DISMISS, FOLLOW_UP, RewardParams, ScenarioClass,
                            classify, delta_utility, mlac_cost, reward, tau)

from oracles import reward_case_oracle

DEFAULTS = RewardParams()


class TestMlacCost:
    def test_paper_anchor(self):
        assert mlac_cost(10_000.0, 5.0) == 2000.0
        assert mlac_cost(10_000.0, 5.0) / 1000.0 == 2.0  # scaled value used everywhere

    def test_direct(self):
        assert mlac_cost(12.0, 6.0) == 2.0

    def test_zero_numerator(self):
        assert mlac_cost(0.0, 5.0) == 0.0

    def test_zero_denominator(self):
        with pytest.raises(ValueError):
            mlac_cost(10_000.0, 0.0)


class TestDeltaUtility:
    def test_above_gate(self):
        assert delta_utility(1.0, DEFAULTS) == 2.0  # 2.0 >= 1.4

    def test_below_gate(self):
        assert delta_utility(0.2, DEFAULTS) == 0.0  # 0.4 < 1.4

    def test_zero(self):
        assert delta_utility(0.0, DEFAULTS) == 0.0

    @given(st.floats(min_value=0.0, max_value=10.0, allow_nan=False))
    def test_gate_property(self, d):
        value = delta_utility(d, DEFAULTS)
        if d < DEFAULTS.kappa:
            assert value == 0.0
        else:
            assert value == DEFAULTS.c * d


class TestTau:
    def test_timely(self):
        assert tau(1, 2, 4) == 0.0

    def test_late_by_two(self):
        assert tau(2, 1, 4) == 0.5

    def test_no_event_cap(self):
        assert tau(1, math.inf, 4) == 1.0


class TestClassify:
    def test_equality_branch(self):
        assert classify(FOLLOW_UP, 1, 2) is ScenarioClass.TIMELY_VISIT

    def test_dismiss_at_event_is_false_dismissal(self):
        assert classify(DISMISS, 1, 2) is ScenarioClass.FALSE_DISMISSAL

    def test_strict_true_dismissal(self):
        assert classify(DISMISS, 0, 3) is ScenarioClass.TRUE_DISMISSAL

    def test_exactly_one_scenario_fires(self):
        for t in range(4):
            for t_p in [1.0, 2.0, 3.0, 4.0, math.inf]:
                follow = classify(FOLLOW_UP, t, t_p)
                dismiss = classify(DISMISS, t, t_p)
                assert follow in (ScenarioClass.EARLY_VISIT, ScenarioClass.TIMELY_VISIT,
                                  ScenarioClass.LATE_VISIT)
                assert dismiss in (ScenarioClass.TRUE_DISMISSAL,
                                   ScenarioClass.FALSE_DISMISSAL)


class TestRewardExamples:
    """The worked numbers for the default parameterization."""

    def test_timely_visit(self):
        bd = reward(FOLLOW_UP, 1, 0, 2.0, 1.0, 1.0, DEFAULTS)
        assert bd.scenario is ScenarioClass.TIMELY_VISIT
        assert bd.total == pytest.approx(1.5, abs=1e-12)

    def test_early_visit(self):
        bd = reward(FOLLOW_UP, 1, 0, 3.0, 0.8, 0.9, DEFAULTS)
        assert bd.scenario is ScenarioClass.EARLY_VISIT
        assert bd.total == pytest.approx(math.exp(-0.25) * 1.6 - 0.5, abs=1e-12)
        assert bd.total == pytest.approx(0.7460, abs=1e-4)

    def test_late_visit(self):
        bd = reward(FOLLOW_UP, 2, 0, 1.0, 0.9, 0.9, DEFAULTS)
        assert bd.scenario is ScenarioClass.LATE_VISIT
        assert bd.total == pytest.approx(-0.5 * math.exp(0.5) * 1.8 - 0.5, abs=1e-12)
        assert bd.total == pytest.approx(-1.9838, abs=1e-4)

    def test_true_dismissal(self):
        bd = reward(DISMISS, 0, 0, 3.0, 0.0, 0.0, DEFAULTS)
        assert bd.scenario is ScenarioClass.TRUE_DISMISSAL
        assert bd.total == 0.6  # beta = 0.3c with c = 2

    def test_false_dismissal_at_event(self):
        bd = reward(DISMISS, 1, 0, 2.0, 1.0, 1.0, DEFAULTS)
        assert bd.scenario is ScenarioClass.FALSE_DISMISSAL
        assert bd.total == pytest.approx(-2.0, abs=1e-12)


class TestRewardParams:
    def test_beta_constraint_enforced(self):
        with pytest.raises(ValueError):
            RewardParams(beta=1.4)  # c*kappa = 1.4 exactly
        assert DEFAULTS.beta < DEFAULTS.c * DEFAULTS.kappa

    def test_alpha_boundary(self):
        with pytest.raises(ValueError):
            RewardParams(alpha=1.0)
        RewardParams(alpha=1.0, allow_boundary=True)

    def test_beta_fraction_constructor(self):
        params = RewardParams.with_beta_fraction(0.3, c=2.0)
        assert params.beta == 0.6


class TestRewardProperties:
    @given(st.integers(0, 3), st.sampled_from([1.0, 2.0, 3.0, 4.0, math.inf]),
           st.floats(0.0, 3.0), st.floats(0.0, 3.0))
    def test_matches_case_oracle(self, t, t_p, d_obs, d_event):
        for action in (DISMISS, FOLLOW_UP):
            expected = reward_case_oracle(
                action, t, 0, t_p, d_obs, d_event, DEFAULTS.lam, DEFAULTS.c,
                DEFAULTS.kappa, DEFAULTS.alpha, DEFAULTS.beta, DEFAULTS.horizon)
            assert reward(action, t, 0, t_p, d_obs, d_event, DEFAULTS).total == \
                pytest.approx(expected, abs=1e-12)

    def test_late_visit_is_discounted_false_dismissal(self):
        for t, t_p in [(1, 1.0), (2, 1.0), (3, 2.0)]:
            for d in (0.0, 0.7, 1.3):
                late = reward(FOLLOW_UP, t, 0, t_p, d, d, DEFAULTS).total
                false = reward(DISMISS, t, 0, t_p, d, d, DEFAULTS).total
                assert late == pytest.approx(DEFAULTS.alpha * false - DEFAULTS.lam, abs=1e-12)

    def test_timely_beats_early_for_significant_worsening(self):
        d = 1.0
        timely = reward(FOLLOW_UP, 1, 0, 2.0, d, d, DEFAULTS).total
        for t_p in (3.0, 4.0, math.inf):
            early = reward(FOLLOW_UP, 1, 0, t_p, d, d, DEFAULTS).total
            assert timely > early

    @given(st.integers(0, 3), st.sampled_from([1.0, 2.0, 3.0, 4.0, math.inf]),
           st.floats(0.0, 5.0))
    def test_rewards_bounded(self, t, t_p, d):
        bound = DEFAULTS.c * 5.0 * math.e + DEFAULTS.lam
        for action in (DISMISS, FOLLOW_UP):
            total = reward(action, t, 0, t_p, d, d, DEFAULTS).total
            assert math.isfinite(total)
            assert abs(total) <= bound

    def test_breakdown_consistency(self):
        bd = reward(FOLLOW_UP, 0, 0, 1.0, 1.2, 1.2, DEFAULTS)
        assert bd.total == bd.utility_term - bd.penalty_term
