import json
import math

import numpy as np
import pytest

from oasense.cohort import generate_synthetic_cohort, make_state, layout_for
from oasense.env import (SCENARIO_ORDER, SensingEnv, compile_cohort,
                         export_traces_jsonl, pair_id)
from oasense.labeling import label_cohort, label_progressions
from oasense.reward import DISMISS, FOLLOW_UP, RewardParams, ScenarioClass

from helpers import make_dataset, make_subject

PARAMS = RewardParams()


def _env(stats=None, level="patient"):
    return SensingEnv(PARAMS, level=level, stats=stats)


def _labeled(subject):
    return label_progressions(subject, PARAMS.kappa, "patient")


class TestReset:
    def test_initial_pending_event(self):
        subject = make_subject([5.0, 4.7, 4.0, 4.0, 4.0])  # event at year 2
        es, state = _env().reset(subject, _labeled(subject))
        assert (es.t, es.t_r, es.pending_t_p, es.done) == (0, 0, 2.0, False)
        assert (state[20], state[21]) == (0.0, 0.0)

    def test_no_event_sentinel(self):
        subject = make_subject([5.0] * 5)
        es, _ = _env().reset(subject, _labeled(subject))
        assert math.isinf(es.pending_t_p)

    def test_reset_deterministic(self):
        subject = make_subject([5.0, 4.0, 4.0, 4.0, 4.0])
        env = _env()
        es1, s1 = env.reset(subject, _labeled(subject))
        es2, s2 = env.reset(subject, _labeled(subject))
        assert es1 == es2
        np.testing.assert_array_equal(s1, s2)

    def test_level_mismatch_rejected(self):
        subject = make_subject([5.0] * 5)
        labels = label_progressions(subject, PARAMS.kappa, "knee_left")
        with pytest.raises(ValueError):
            _env().reset(subject, labels)

    def test_kappa_mismatch_rejected(self):
        subject = make_subject([5.0] * 5)
        labels = label_progressions(subject, 0.5, "patient")
        with pytest.raises(ValueError):
            _env().reset(subject, labels)

    def test_horizon_mismatch_rejected(self):
        subject = make_subject([5.0] * 4)  # T = 3
        with pytest.raises(ValueError):
            _env().reset(subject, label_progressions(subject, PARAMS.kappa, "patient"))


class TestStep:
    def test_timely_follow_up(self):
        subject = make_subject([5.0, 4.7, 4.0, 4.0, 4.0])  # d(0,2) = 1.0
        env = _env()
        es, _ = env.reset(subject, _labeled(subject))
        tr, es = env.step(es, DISMISS)
        assert tr.scenario is ScenarioClass.TRUE_DISMISSAL
        assert tr.reward == PARAMS.beta
        assert es.t_r == 0
        tr, es = env.step(es, FOLLOW_UP)
        assert tr.scenario is ScenarioClass.TIMELY_VISIT
        assert tr.reward == pytest.approx(1.5, abs=1e-12)
        assert es.t_r == 2
        assert math.isinf(es.pending_t_p)

    def test_full_dismiss_sequence(self):
        subject = make_subject([5.0, 4.8, 4.0, 4.0, 4.0])  # single event, d(0,2) = 1.0
        env = _env()
        es, _ = env.reset(subject, _labeled(subject))
        rewards = []
        while not es.done:
            tr, es = env.step(es, DISMISS)
            rewards.append(tr.reward)
        expected = [PARAMS.beta, -2.0, -math.exp(0.25) * 2.0, -math.exp(0.5) * 2.0]
        assert rewards == pytest.approx(expected, abs=1e-12)
        assert rewards[2] == pytest.approx(-2.568, abs=1e-3)
        assert rewards[3] == pytest.approx(-3.297, abs=1e-3)

    def test_late_visit_consumes_event(self):
        subject = make_subject([5.0, 4.0, 4.0, 4.0, 4.0])  # event at year 1
        env = _env()
        es, _ = env.reset(subject, _labeled(subject))
        tr, es = env.step(es, DISMISS)
        assert tr.scenario is ScenarioClass.FALSE_DISMISSAL
        tr, es = env.step(es, FOLLOW_UP)
        assert tr.scenario is ScenarioClass.LATE_VISIT
        assert es.t_r == 2
        assert math.isinf(es.pending_t_p)  # the late visit captured the event

    def test_early_visit_keeps_event_pending(self):
        subject = make_subject([5.0, 5.0, 5.0, 4.0, 4.0])  # event at year 3
        env = _env()
        es, _ = env.reset(subject, _labeled(subject))
        tr, es = env.step(es, FOLLOW_UP)
        assert tr.scenario is ScenarioClass.EARLY_VISIT
        assert es.t_r == 1
        assert es.pending_t_p == 3.0

    def test_step_after_done_rejected(self):
        subject = make_subject([5.0] * 5)
        env = _env()
        es, _ = env.reset(subject, _labeled(subject))
        for _ in range(4):
            _, es = env.step(es, DISMISS)
        assert es.done
        with pytest.raises(RuntimeError):
            env.step(es, DISMISS)

    def test_replay_reproduces_transitions(self):
        subject = make_subject([5.0, 4.4, 3.9, 3.9, 3.2])
        env = _env()
        actions = [1, 0, 0, 1]

        def run():
            es, _ = env.reset(subject, _labeled(subject))
            out = []
            for a in actions:
                tr, es = env.step(es, a)
                out.append(tr)
            return out

        first, second = run(), run()
        for a, b in zip(first, second):
            assert a.reward == b.reward and a.scenario == b.scenario
            np.testing.assert_array_equal(a.state, b.state)
            np.testing.assert_array_equal(a.next_state, b.next_state)


class TestRollout:
    def test_always_dismiss(self):
        subject = make_subject([5.0, 4.0, 4.0, 4.0, 4.0])
        trace = _env().rollout(subject, _labeled(subject), lambda s, t: DISMISS)
        assert trace.n_follow_ups == 0
        assert len(trace.transitions) == 4

    def test_always_follow_up_updates_reference_every_step(self):
        subject = make_subject([5.0, 4.0, 4.0, 4.0, 4.0])
        env = _env()
        es, _ = env.reset(subject, _labeled(subject))
        for t in range(4):
            tr, es = env.step(es, FOLLOW_UP)
            assert es.t_r == t + 1

    def test_return_is_reward_sum(self):
        subject = make_subject([5.0, 4.1, 3.6, 3.6, 3.0])
        trace = _env().rollout(subject, _labeled(subject), lambda s, t: (t + 1) % 2)
        assert trace.total_reward == pytest.approx(
            sum(tr.reward for tr in trace.transitions), abs=1e-12)

    def test_follow_up_count_equals_reference_updates(self):
        rng = np.random.default_rng(4)
        env = _env()
        for _ in range(50):
            values = np.clip(5.0 - np.cumsum(rng.uniform(0, 1, 5)), 0.3, None)
            subject = make_subject(values.tolist())
            actions = rng.integers(0, 2, 4)
            es, _ = env.reset(subject, _labeled(subject))
            refs = {es.t_r}
            for a in actions:
                _, es = env.step(es, int(a))
                refs.add(es.t_r)
            assert len(refs) - 1 == int(actions.sum())

    def test_jsonl_export(self, tmp_path):
        subject = make_subject([5.0, 4.0, 4.0, 4.0, 4.0])
        trace = _env().rollout(subject, _labeled(subject), lambda s, t: DISMISS)
        path = tmp_path / "traces.jsonl"
        export_traces_jsonl([trace], path)
        lines = [json.loads(l) for l in path.read_text().splitlines()]
        assert [l["t"] for l in lines] == [0, 1, 2, 3]
        assert all(l["scenario"] == "false_dismissal" for l in lines)  # event at year 1
        assert lines[0]["reward"] == -2.0


class TestCompiledCohort:
    """The vectorized tables must agree exactly with the scalar environment."""

    def setup_method(self):
        self.dataset = generate_synthetic_cohort(60, 4, 21)
        self.labels = label_cohort(self.dataset, PARAMS.kappa, "patient")
        self.compiled = compile_cohort(self.dataset, self.labels, PARAMS)

    def test_states_match_make_state(self):
        stats = self.dataset.normalization_stats
        layout = layout_for("patient")
        for i in (0, 13, 59):
            subject = self.dataset.subjects[i]
            for now in range(5):
                for last in range(now + 1):
                    expected = make_state(subject, last, now, layout=layout, stats=stats)
                    np.testing.assert_array_equal(
                        self.compiled.states[i, pair_id(now, last)], expected)

    def test_rewards_and_scenarios_match_env(self):
        env = SensingEnv.for_dataset(self.dataset, PARAMS)
        rng = np.random.default_rng(0)
        for i, (subject, label) in enumerate(zip(self.dataset.subjects, self.labels)):
            actions = rng.integers(0, 2, 4)
            es, _ = env.reset(subject, label)
            cur = 0
            for a in actions:
                tr, es = env.step(es, int(a))
                assert self.compiled.rewards[i, cur, a] == tr.reward
                assert SCENARIO_ORDER[self.compiled.scenarios[i, cur, a]] == tr.scenario
                cur = self.compiled.next_pair[cur, a]

    def test_rollout_actions_matches_env(self):
        env = SensingEnv.for_dataset(self.dataset, PARAMS)
        rng = np.random.default_rng(1)
        actions = rng.integers(0, 2, size=(len(self.dataset), 4))
        compiled_rewards, _ = self.compiled.rollout_actions(actions)
        for i, (subject, label) in enumerate(zip(self.dataset.subjects, self.labels)):
            seq = iter(actions[i])
            trace = env.rollout(subject, label, lambda s, t: int(next(seq)))
            np.testing.assert_array_equal(compiled_rewards[i],
                                          [tr.reward for tr in trace.transitions])

    def test_knee_level_compile(self):
        labels = label_cohort(self.dataset, PARAMS.kappa, "knee_left")
        compiled = compile_cohort(self.dataset, labels, PARAMS, level="knee_left")
        env = SensingEnv.for_dataset(self.dataset, PARAMS, level="knee_left")
        subject, label = self.dataset.subjects[3], labels[3]
        es, _ = env.reset(subject, label)
        cur = 0
        for a in (1, 0, 1, 0):
            tr, es = env.step(es, a)
            assert compiled.rewards[3, cur, a] == tr.reward
            cur = compiled.next_pair[cur, a]
        assert compiled.state_dim == 14
