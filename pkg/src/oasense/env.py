"""Episodic replay environment: one subject's study participation per episode.

At each decision time t the agent either requests a follow-up at year t+1 or
skips it.  Rewards are computed against the subject's true trajectory and the
precomputed progression events; the observable state always reflects the data
acquired at the latest visit.

``CompiledCohort`` is the vectorized twin of the step environment: every
reachable (decision-time, last-visit) pair is tabulated per subject so that
training and evaluation can run as array programs.  Equality with the scalar
environment is exact and covered by tests.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np

from .cohort import CohortDataset, NormalizationStats, SubjectRecord, layout_for, make_state
from .labeling import ProgressionSet, worsening_between
from .reward import DISMISS, FOLLOW_UP, RewardParams, ScenarioClass, classify, reward

SCENARIO_ORDER = (
    ScenarioClass.EARLY_VISIT,
    ScenarioClass.TIMELY_VISIT,
    ScenarioClass.LATE_VISIT,
    ScenarioClass.TRUE_DISMISSAL,
    ScenarioClass.FALSE_DISMISSAL,
)
SCENARIO_CODES = {s: i for i, s in enumerate(SCENARIO_ORDER)}


@dataclass(frozen=True)
class EpisodeState:
    subject: SubjectRecord
    labels: ProgressionSet
    t: int
    t_r: int
    pending_t_p: float
    done: bool


@dataclass(frozen=True)
class Transition:
    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    done: bool
    scenario: ScenarioClass


@dataclass(frozen=True)
class EpisodeTrace:
    subject_id: str
    transitions: tuple[Transition, ...]

    @property
    def total_reward(self) -> float:
        return sum(tr.reward for tr in self.transitions)

    @property
    def n_follow_ups(self) -> int:
        return sum(1 for tr in self.transitions if tr.action == FOLLOW_UP)


class SensingEnv:
    """Replay environment bound to one reward parameterization and state view."""

    def __init__(self, params: RewardParams, level: str = "patient",
                 feature_mode: str = "full", stats: NormalizationStats | None = None):
        self.params = params
        self.level = level
        self.layout = layout_for(level)
        self.feature_mode = feature_mode
        self.stats = stats

    @classmethod
    def for_dataset(cls, dataset: CohortDataset, params: RewardParams,
                    level: str = "patient", feature_mode: str = "full") -> "SensingEnv":
        if dataset.horizon != params.horizon:
            raise ValueError(f"dataset horizon {dataset.horizon} != params horizon {params.horizon}")
        return cls(params, level=level, feature_mode=feature_mode,
                   stats=dataset.normalization_stats)

    def _state(self, subject: SubjectRecord, t_r: int, now: int) -> np.ndarray:
        return make_state(subject, t_r, now, layout=self.layout,
                          feature_mode=self.feature_mode, stats=self.stats)

    def reset(self, subject: SubjectRecord, labels: ProgressionSet
              ) -> tuple[EpisodeState, np.ndarray]:
        """Start an episode at baseline; the baseline exam is always acquired."""
        if subject.horizon != self.params.horizon:
            raise ValueError(f"subject horizon {subject.horizon} != T={self.params.horizon}")
        if labels.level != self.level:
            raise ValueError(f"labels computed at level {labels.level!r}, env runs {self.level!r}")
        if labels.kappa != self.params.kappa:
            raise ValueError(f"labels use kappa={labels.kappa}, params use {self.params.kappa}")
        es = EpisodeState(subject=subject, labels=labels, t=0, t_r=0,
                          pending_t_p=labels.next_event_after(0), done=False)
        return es, self._state(subject, 0, 0)

    def step(self, es: EpisodeState, action: int) -> tuple[Transition, EpisodeState]:
        """Apply one decision; on follow-up the reference moves to year t+1."""
        if es.done:
            raise RuntimeError("step() called on a finished episode")
        subject, t, t_r, t_p = es.subject, es.t, es.t_r, es.pending_t_p
        observed = worsening_between(subject, self.level, t_r, t + 1)
        event_w = 0.0
        if math.isfinite(t_p):
            event_w = worsening_between(subject, self.level, t_r, int(t_p))
        breakdown = reward(action, t, t_r, t_p, observed, event_w, self.params)

        new_t_r = t + 1 if action == FOLLOW_UP else t_r
        next_es = EpisodeState(
            subject=subject, labels=es.labels, t=t + 1, t_r=new_t_r,
            pending_t_p=es.labels.next_event_after(new_t_r),
            done=(t + 1 == self.params.horizon),
        )
        transition = Transition(
            state=self._state(subject, t_r, t),
            action=action,
            reward=breakdown.total,
            next_state=self._state(subject, new_t_r, t + 1),
            done=next_es.done,
            scenario=breakdown.scenario,
        )
        return transition, next_es

    def rollout(self, subject: SubjectRecord, labels: ProgressionSet, policy) -> EpisodeTrace:
        """Run a full episode under ``policy(state, t) -> action``."""
        es, state = self.reset(subject, labels)
        transitions = []
        while not es.done:
            action = policy(state, es.t)
            transition, es = self.step(es, action)
            transitions.append(transition)
            state = transition.next_state
        return EpisodeTrace(subject_id=subject.subject_id, transitions=tuple(transitions))

    def rollout_all(self, dataset: CohortDataset, labels: list[ProgressionSet],
                    policy) -> list[EpisodeTrace]:
        return [self.rollout(s, lab, policy) for s, lab in zip(dataset.subjects, labels)]


def export_traces_jsonl(traces, path) -> None:
    """Audit export: one line per decision with scenario and reward."""
    with open(path, "w", encoding="utf-8") as fh:
        for trace in traces:
            for t, tr in enumerate(trace.transitions):
                fh.write(json.dumps({
                    "subject_id": trace.subject_id,
                    "t": t,
                    "action": tr.action,
                    "scenario": tr.scenario.value,
                    "reward": tr.reward,
                }) + "\n")


# ---------------------------------------------------------------------------
# Compiled (vectorized) cohort
# ---------------------------------------------------------------------------

def pair_id(now: int, last: int) -> int:
    """Index of the (now, last) pair in the triangular enumeration."""
    return now * (now + 1) // 2 + last


@dataclass
class CompiledCohort:
    """Per-subject tables over all reachable (now, last-visit) pairs.

    ``states[n, pair_id(now, last)]`` equals ``make_state`` for that triple;
    reward/scenario/next-pair tables cover the decision pairs (now < T).
    """

    level: str
    feature_mode: str
    horizon: int
    subject_ids: list[str]
    states: np.ndarray        # (N, n_pairs, D)
    rewards: np.ndarray       # (N, n_decision_pairs, 2)
    scenarios: np.ndarray     # (N, n_decision_pairs, 2) uint8 codes
    next_pair: np.ndarray     # (n_decision_pairs, 2)
    done: np.ndarray          # (n_decision_pairs, 2) bool
    pending: np.ndarray       # (N, T) next event strictly after t_r (inf if none)

    @property
    def n_subjects(self) -> int:
        return self.states.shape[0]

    @property
    def state_dim(self) -> int:
        return self.states.shape[2]

    def rollout_actions(self, actions: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Replay fixed action matrices (N, T); returns rewards and scenario codes."""
        n, t_len = actions.shape
        rewards = np.empty((n, t_len))
        scen = np.empty((n, t_len), dtype=np.uint8)
        rows = np.arange(n)
        cur = np.zeros(n, dtype=np.int64)
        for t in range(t_len):
            a = actions[:, t]
            rewards[:, t] = self.rewards[rows, cur, a]
            scen[:, t] = self.scenarios[rows, cur, a]
            cur = self.next_pair[cur, a]
        return rewards, scen


def compile_cohort(dataset: CohortDataset, labels: list[ProgressionSet],
                   params: RewardParams, level: str = "patient",
                   feature_mode: str = "full") -> CompiledCohort:
    """Tabulate states, rewards and transitions for every subject."""
    horizon = dataset.horizon
    if horizon != params.horizon:
        raise ValueError(f"dataset horizon {horizon} != params horizon {params.horizon}")
    if len(labels) != len(dataset):
        raise ValueError("labels must align with dataset.subjects")
    layout = layout_for(level)
    n = len(dataset)
    n_pairs = (horizon + 1) * (horizon + 2) // 2
    n_decision = horizon * (horizon + 1) // 2

    # Raw per-knee drops d[n, r, z] = max(0, fjsw[r] - fjsw[z]).
    left = np.stack([s.fjsw("left") for s in dataset.subjects])
    right = np.stack([s.fjsw("right") for s in dataset.subjects])
    drop_l = np.maximum(0.0, left[:, :, None] - left[:, None, :])
    drop_r = np.maximum(0.0, right[:, :, None] - right[:, None, :])
    if level == "patient":
        worsening = np.maximum(drop_l, drop_r)
    elif level == "knee_left":
        worsening = drop_l
    else:
        worsening = drop_r

    pending = np.full((n, horizon), np.inf)
    for i, label in enumerate(labels):
        for t_r in range(horizon):
            pending[i, t_r] = label.next_event_after(t_r)

    # States for all pairs, identical floats to make_state by construction.
    mean, std = (None, None)
    if dataset.normalization_stats is not None:
        mean, std = dataset.normalization_stats.for_layout(layout)
    keep = layout.klg_mask
    t_last_idx, t_now_idx = layout.time_indices
    base = np.stack([
        [make_state(s, v, v, layout=layout, feature_mode=feature_mode, stats=None)
         for v in range(horizon + 1)]
        for s in dataset.subjects
    ])  # (N, T+1, D) raw rows with time entries (v, v)
    states = np.empty((n, n_pairs, layout.size))
    for now in range(horizon + 1):
        for last in range(now + 1):
            row = base[:, last, :].copy()
            row[:, t_last_idx] = float(last)
            row[:, t_now_idx] = float(now)
            if mean is not None:
                row = np.where(keep, row, (row - mean) / std)
            states[:, pair_id(now, last), :] = row

    # Reward, scenario and transition tables for decision pairs.
    rewards = np.empty((n, n_decision, 2))
    scen = np.empty((n, n_decision, 2), dtype=np.uint8)
    next_pair = np.empty((n_decision, 2), dtype=np.int64)
    done = np.empty((n_decision, 2), dtype=bool)
    c, kappa, lam = params.c, params.kappa, params.lam
    gate = c * kappa
    # exp factors evaluated with math.exp so scalar and compiled paths agree exactly
    exp_neg = np.array([math.exp(-(m / horizon)) for m in range(horizon + 1)])
    exp_pos = np.array([math.exp(m / horizon) for m in range(horizon + 1)])
    rows = np.arange(n)
    for t in range(horizon):
        for t_r in range(t + 1):
            pid = pair_id(t, t_r)
            t_p = pending[:, t_r]
            no_event = np.isinf(t_p)
            m_idx = np.where(no_event, horizon, np.abs(t + 1 - np.where(no_event, 0.0, t_p))
                             ).astype(np.int64)
            ev_year = np.where(no_event, t + 1, t_p).astype(np.int64)
            obs = worsening[:, t_r, t + 1]
            delta_obs = np.where(c * obs >= gate, c * obs, 0.0)
            ev = np.where(no_event, 0.0, worsening[rows, t_r, ev_year])
            delta_ev = np.where(c * ev >= gate, c * ev, 0.0)

            early = (t + 1) < t_p
            timely = (t + 1) == t_p
            r_follow = np.where(
                early, exp_neg[m_idx] * delta_obs - lam,
                np.where(timely, delta_obs - lam,
                         (-params.alpha * exp_pos[m_idx]) * delta_ev - lam))
            r_dismiss = np.where(early, np.full(n, params.beta), (-exp_pos[m_idx]) * delta_ev)
            rewards[:, pid, FOLLOW_UP] = r_follow
            rewards[:, pid, DISMISS] = r_dismiss

            code_follow = np.where(
                early, SCENARIO_CODES[ScenarioClass.EARLY_VISIT],
                np.where(timely, SCENARIO_CODES[ScenarioClass.TIMELY_VISIT],
                         SCENARIO_CODES[ScenarioClass.LATE_VISIT]))
            code_dismiss = np.where(early, SCENARIO_CODES[ScenarioClass.TRUE_DISMISSAL],
                                    SCENARIO_CODES[ScenarioClass.FALSE_DISMISSAL])
            scen[:, pid, FOLLOW_UP] = code_follow
            scen[:, pid, DISMISS] = code_dismiss

            next_pair[pid, FOLLOW_UP] = pair_id(t + 1, t + 1)
            next_pair[pid, DISMISS] = pair_id(t + 1, t_r)
            done[pid, :] = (t + 1 == horizon)

    return CompiledCohort(
        level=level, feature_mode=feature_mode, horizon=horizon,
        subject_ids=dataset.subject_ids, states=states, rewards=rewards,
        scenarios=scen, next_pair=next_pair, done=done, pending=pending,
    )
