"""Shared factories for hand-constructed subjects and cohorts."""

import numpy as np

from oasense.cohort import (SubjectRecord, VisitRecord, build_dataset)


def onehot_probs(grade: int) -> tuple:
    probs = [0.0] * 5
    probs[grade] = 1.0
    return tuple(probs)


def make_subject(fjsw_left, fjsw_right=None, subject_id="S1", age=60.0, sex="female",
                 bmi=28.0, klg_left=1, klg_right=1, womac_left=5.0, womac_right=4.0,
                 sf12=45.0, injury=(False, False), surgery=(False, False)):
    """Subject with hand-set fJSW trajectories; other features held constant."""
    fjsw_left = list(fjsw_left)
    fjsw_right = list(fjsw_right) if fjsw_right is not None else [5.0] * len(fjsw_left)
    visits = tuple(
        VisitRecord(
            time_index=t,
            fjsw_left=fjsw_left[t],
            fjsw_right=fjsw_right[t],
            klg_probs_left=onehot_probs(klg_left),
            klg_probs_right=onehot_probs(klg_right),
            womac_left=womac_left,
            womac_right=womac_right,
            sf12_physical=sf12,
            injury_left=injury[0],
            injury_right=injury[1],
            surgery_left=surgery[0],
            surgery_right=surgery[1],
        )
        for t in range(len(fjsw_left))
    )
    return SubjectRecord(subject_id=subject_id, age=age, sex=sex, bmi=bmi, visits=visits)


def make_dataset(subjects):
    return build_dataset(subjects, horizon=subjects[0].horizon)


def random_trajectory(rng: np.random.Generator, horizon: int = 4):
    """A positive, noisy, loosely decreasing fJSW trajectory."""
    base = rng.uniform(2.0, 6.0)
    values = [base]
    for _ in range(horizon):
        step = rng.choice([0.0, rng.uniform(0.0, 1.5)])
        values.append(max(0.2, values[-1] - step + rng.normal(0.0, 0.15)))
    return [max(0.05, v) for v in values]


def toy_convergence_cohort():
    """Two separable subjects: one progresses at year 1, one never does."""
    progressor = make_subject(
        [5.0, 4.0, 4.0, 4.0, 4.0], [5.0, 4.0, 4.0, 4.0, 4.0],
        subject_id="PROG", klg_left=3, klg_right=3, age=70.0, bmi=33.0,
        womac_left=20.0, womac_right=18.0, sf12=35.0)
    healthy = make_subject(
        [5.0, 5.0, 5.0, 5.0, 5.0], [5.0, 5.0, 5.0, 5.0, 5.0],
        subject_id="CLEAN", klg_left=0, klg_right=0, age=50.0, bmi=23.0,
        womac_left=0.0, womac_right=0.0, sf12=55.0)
    return make_dataset([progressor, healthy])
