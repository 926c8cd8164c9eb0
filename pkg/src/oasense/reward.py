"""Monetary reward calculus for follow-up scheduling decisions.

Structural change is priced through the per-millimetre cartilage cost ``c``
and gated at the minimum detectable change ``kappa``; each decision falls
into exactly one of five scenarios (early/timely/late visit, true/false
dismissal) whose rewards trade detection utility against acquisition cost.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

DISMISS = 0
FOLLOW_UP = 1


class ScenarioClass(enum.Enum):
    EARLY_VISIT = "early_visit"
    TIMELY_VISIT = "timely_visit"
    LATE_VISIT = "late_visit"
    TRUE_DISMISSAL = "true_dismissal"
    FALSE_DISMISSAL = "false_dismissal"


@dataclass(frozen=True)
class RewardParams:
    """Economic/clinical constants, all monetary values scaled by 1e-3.

    ``allow_boundary`` admits alpha = 1 for ablation grids that include the
    boundary; the default keeps the strict alpha in [0, 1) constraint.
    """

    lam: float = 0.5          # fixed cost of one data acquisition (k$)
    c: float = 2.0            # monetary loss per mm of cartilage (k$/mm)
    kappa: float = 0.7        # minimum detectable significant change (mm)
    alpha: float = 0.5        # late-visit penalty discount
    beta: float = 0.6         # true-dismissal reward (k$), must stay < c*kappa
    horizon: int = 4          # number of annual follow-up decisions T
    gamma: float = 1.0        # return discount factor
    allow_boundary: bool = field(default=False, compare=False)

    def __post_init__(self):
        if self.lam < 0.0:
            raise ValueError("lam must be >= 0")
        if self.c <= 0.0:
            raise ValueError("c must be > 0")
        if self.kappa <= 0.0:
            raise ValueError("kappa must be > 0")
        alpha_max = 1.0 if self.allow_boundary else 1.0 - 1e-12
        if not 0.0 <= self.alpha <= alpha_max:
            raise ValueError(f"alpha must lie in [0,1), got {self.alpha}")
        if not self.beta < self.c * self.kappa:
            raise ValueError(f"beta must be < c*kappa = {self.c * self.kappa}, got {self.beta}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0,1]")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")

    @classmethod
    def defaults(cls, **overrides) -> "RewardParams":
        return cls(**overrides)

    @classmethod
    def with_beta_fraction(cls, beta_fraction_of_c: float = 0.3, **overrides) -> "RewardParams":
        c = overrides.pop("c", 2.0)
        return cls(c=c, beta=beta_fraction_of_c * c, **overrides)


@dataclass(frozen=True)
class RewardBreakdown:
    """Diagnostic split of a reward: total = utility_term - penalty_term."""

    scenario: ScenarioClass
    utility_term: float
    penalty_term: float

    @property
    def total(self) -> float:
        return self.utility_term - self.penalty_term


def mlac_cost(tkr_cost: float, mean_healthy_jsw: float) -> float:
    """Monetary loss of 1 mm of articular cartilage: TKR cost / healthy JSW."""
    if mean_healthy_jsw <= 0.0:
        raise ValueError("mean_healthy_jsw must be positive")
    if tkr_cost < 0.0:
        raise ValueError("tkr_cost must be >= 0")
    return tkr_cost / mean_healthy_jsw


def delta_utility(d: float, params: RewardParams) -> float:
    """Priced worsening c*d, zeroed below the significance gate c*kappa."""
    if d < 0.0:
        raise ValueError("worsening must be >= 0")
    delta = params.c * d
    return delta if delta >= params.c * params.kappa else 0.0


def tau(t: int, t_p: float, horizon: int) -> float:
    """Timing mismatch |t+1 - t_p| / T, capped at 1 when no event exists."""
    if math.isinf(t_p):
        return 1.0
    return abs(t + 1 - t_p) / horizon


def classify(action: int, t: int, t_p: float) -> ScenarioClass:
    """Map a decision at time t against the next event time to its scenario."""
    if action == FOLLOW_UP:
        if t + 1 < t_p:
            return ScenarioClass.EARLY_VISIT
        if t + 1 == t_p:
            return ScenarioClass.TIMELY_VISIT
        return ScenarioClass.LATE_VISIT
    if action == DISMISS:
        if t + 1 < t_p:
            return ScenarioClass.TRUE_DISMISSAL
        return ScenarioClass.FALSE_DISMISSAL
    raise ValueError(f"action must be {DISMISS} or {FOLLOW_UP}, got {action!r}")


def reward(action: int, t: int, t_r: int, t_p: float,
           observed_worsening: float, true_worsening_at_event: float,
           params: RewardParams) -> RewardBreakdown:
    """Reward for one decision.

    ``observed_worsening`` is d(t_r, t+1), what a visit at t+1 would measure;
    ``true_worsening_at_event`` is d(t_r, t_p), the change accrued by the
    pending event (used by late visits and false dismissals).
    """
    if not 0 <= t < params.horizon:
        raise ValueError(f"t must lie in [0, T), got {t}")
    if t_r > t:
        raise ValueError("t_r must not exceed t")
    if observed_worsening < 0.0 or true_worsening_at_event < 0.0:
        raise ValueError("worsening values must be >= 0")
    scenario = classify(action, t, t_p)
    tau_t = tau(t, t_p, params.horizon)
    if scenario is ScenarioClass.EARLY_VISIT:
        utility = math.exp(-tau_t) * delta_utility(observed_worsening, params)
        penalty = params.lam
    elif scenario is ScenarioClass.TIMELY_VISIT:
        utility = delta_utility(observed_worsening, params)
        penalty = params.lam
    elif scenario is ScenarioClass.LATE_VISIT:
        utility = -params.alpha * math.exp(tau_t) * delta_utility(true_worsening_at_event, params)
        penalty = params.lam
    elif scenario is ScenarioClass.TRUE_DISMISSAL:
        utility = params.beta
        penalty = 0.0
    else:  # FALSE_DISMISSAL
        utility = -math.exp(tau_t) * delta_utility(true_worsening_at_event, params)
        penalty = 0.0
    return RewardBreakdown(scenario=scenario, utility_term=utility, penalty_term=penalty)
