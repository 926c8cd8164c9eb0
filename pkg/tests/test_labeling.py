import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oasense.labeling import (ProgressionSet, knee_drop, label_cohort,
                              label_progressions, patient_worsening,
                              worsening_between, export_labels_csv)

from helpers import make_dataset, make_subject, random_trajectory
from oracles import scan_oracle


class TestKneeDrop:
    def test_decrease(self):
        assert knee_drop(5.0, 4.2) == pytest.approx(0.8, abs=1e-12)

    def test_clamps_increase(self):
        assert knee_drop(4.0, 4.3) == 0.0

    def test_identity(self):
        assert knee_drop(5.0, 5.0) == 0.0


class TestPatientWorsening:
    def test_max(self):
        assert patient_worsening(0.5, 0.8) == 0.8

    def test_zero(self):
        assert patient_worsening(0.0, 0.0) == 0.0

    def test_symmetry(self):
        assert patient_worsening(0.8, 0.5) == 0.8


class TestLabelProgressions:
    def test_single_event_resets_reference(self):
        subject = make_subject([5.0, 4.6, 4.2, 4.0, 3.9])
        labels = label_progressions(subject, 0.7)
        assert labels.events == (2,)  # cumulative 0.8 at year 2; later drops vs year 2 < 0.7

    def test_two_consecutive_events(self):
        subject = make_subject([5.0, 4.2, 3.4, 3.4, 3.3])
        labels = label_progressions(subject, 0.7)
        assert labels.events == (1, 2)

    def test_unreachable_threshold(self):
        subject = make_subject([5.0, 4.2, 3.4, 3.4, 3.3])
        assert label_progressions(subject, math.inf).events == ()

    def test_right_knee_contributes(self):
        subject = make_subject([5.0] * 5, [5.0, 5.0, 4.1, 4.1, 4.1])
        assert label_progressions(subject, 0.7).events == (2,)
        assert label_progressions(subject, 0.7, "knee_left").events == ()
        assert label_progressions(subject, 0.7, "knee_right").events == (2,)

    def test_kappa_positive_required(self):
        subject = make_subject([5.0] * 5)
        with pytest.raises(ValueError):
            label_progressions(subject, 0.0)

    def test_events_strictly_increasing_invariant(self):
        with pytest.raises(ValueError):
            ProgressionSet(events=(2, 2), level="patient", kappa=0.7)


class TestScanOracle:
    def test_agrees_on_random_trajectories(self):
        rng = np.random.default_rng(202)
        for i in range(10_000):
            left = random_trajectory(rng)
            right = random_trajectory(rng)
            subject = make_subject(left, right, subject_id=f"T{i}")
            assert label_progressions(subject, 0.7).events == \
                scan_oracle(left, right, 0.7)

    def test_knee_level_agrees(self):
        rng = np.random.default_rng(7)
        for i in range(500):
            left = random_trajectory(rng)
            right = random_trajectory(rng)
            subject = make_subject(left, right, subject_id=f"K{i}")
            for level in ("knee_left", "knee_right"):
                assert label_progressions(subject, 0.7, level).events == \
                    scan_oracle(left, right, 0.7, level)


@st.composite
def trajectories(draw):
    values = draw(st.lists(st.floats(0.3, 6.0), min_size=5, max_size=5))
    return values


class TestProperties:
    @settings(max_examples=200)
    @given(trajectories(), trajectories(), st.floats(0.1, 1.5), st.floats(0.1, 1.5))
    def test_monotone_in_kappa(self, left, right, k1, k2):
        lo, hi = sorted((k1, k2))
        subject = make_subject(left, right)
        assert len(label_progressions(subject, lo).events) >= \
            len(label_progressions(subject, hi).events)

    @settings(max_examples=200)
    @given(trajectories(), trajectories())
    def test_patient_dominates_knees_on_shared_chain(self, left, right):
        subject = make_subject(left, right)
        events = label_progressions(subject, 0.7).events
        # every patient event is a supra-threshold drop of at least one knee
        # when measured along the patient-level reference chain
        ref = 0
        for event in events:
            d_l = worsening_between(subject, "knee_left", ref, event)
            d_r = worsening_between(subject, "knee_right", ref, event)
            assert max(d_l, d_r) >= 0.7
            assert worsening_between(subject, "patient", ref, event) == max(d_l, d_r)
            ref = event

    @settings(max_examples=200)
    @given(st.lists(st.floats(0.0, 0.6), min_size=4, max_size=4))
    def test_small_total_drop_never_labels(self, drops):
        total = sum(drops)
        if total >= 0.7:
            return
        values = [5.0]
        for d in drops:
            values.append(values[-1] - d / 4.0)
        subject = make_subject(values, [5.0] * 5)
        assert label_progressions(subject, 0.7).events == ()


class TestCohortHelpers:
    def test_label_cohort_caches(self):
        dataset = make_dataset([make_subject([5.0, 4.0, 4.0, 4.0, 4.0]),
                                make_subject([5.0] * 5, subject_id="S2")])
        first = label_cohort(dataset, 0.7, "patient")
        assert label_cohort(dataset, 0.7, "patient") is first
        assert first[0].events == (1,)
        assert first[1].events == ()

    def test_export(self, tmp_path):
        dataset = make_dataset([make_subject([5.0, 4.0, 3.0, 3.0, 3.0])])
        labels = label_cohort(dataset, 0.7, "patient")
        path = tmp_path / "labels.csv"
        export_labels_csv(dataset, labels, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "subject_id,level,event_year"
        assert lines[1:] == ["S1,patient,1", "S1,patient,2"]
