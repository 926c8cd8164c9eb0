"""Ground-truth progression events from joint-space-width trajectories.

A progression event is recorded whenever the worst-knee (or single-knee)
drop in fJSW since the last recorded event exceeds a threshold ``kappa``;
the reference time then jumps to the event year and the scan continues.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

from .cohort import CohortDataset, SubjectRecord

LEVELS = ("patient", "knee_left", "knee_right")


def knee_drop(phi_ref: float, phi_now: float) -> float:
    """Non-negative fJSW decrease from the reference measurement (mm)."""
    return max(0.0, phi_ref - phi_now)


def patient_worsening(d_left: float, d_right: float) -> float:
    """Patient-level worsening: the larger of the two knee drops (mm)."""
    return max(d_left, d_right)


def worsening_between(subject: SubjectRecord, level: str, ref: int, now: int) -> float:
    """Worsening observed at ``now`` relative to the visit at ``ref`` (mm)."""
    if level == "patient":
        return patient_worsening(
            knee_drop(subject.visits[ref].fjsw_left, subject.visits[now].fjsw_left),
            knee_drop(subject.visits[ref].fjsw_right, subject.visits[now].fjsw_right),
        )
    if level == "knee_left":
        return knee_drop(subject.visits[ref].fjsw_left, subject.visits[now].fjsw_left)
    if level == "knee_right":
        return knee_drop(subject.visits[ref].fjsw_right, subject.visits[now].fjsw_right)
    raise ValueError(f"unknown level {level!r}, expected one of {LEVELS}")


@dataclass(frozen=True)
class ProgressionSet:
    """Ordered ground-truth event years for one subject at one level."""

    events: tuple[int, ...]
    level: str
    kappa: float

    def __post_init__(self):
        if list(self.events) != sorted(set(self.events)):
            raise ValueError("events must be strictly increasing")

    def next_event_after(self, t_r: int) -> float:
        """First event strictly after ``t_r``, or +inf when none remains."""
        for e in self.events:
            if e > t_r:
                return float(e)
        return math.inf


def label_progressions(subject: SubjectRecord, kappa: float,
                       level: str = "patient") -> ProgressionSet:
    """Reference-update scan: record a year whenever worsening >= kappa.

    The reference starts at baseline and moves to each recorded event, so
    consecutive events measure change since the previous one.
    """
    if kappa <= 0.0:
        raise ValueError("kappa must be positive")
    events = []
    ref = 0
    for year in range(1, subject.horizon + 1):
        if worsening_between(subject, level, ref, year) >= kappa:
            events.append(year)
            ref = year
    return ProgressionSet(events=tuple(events), level=level, kappa=kappa)


def label_cohort(dataset: CohortDataset, kappa: float,
                 level: str = "patient") -> list[ProgressionSet]:
    """Label every subject once; cached on the dataset (labels are static)."""
    key = (round(kappa, 12), level)
    cached = dataset._label_cache.get(key)
    if cached is None:
        cached = [label_progressions(s, kappa, level) for s in dataset.subjects]
        dataset._label_cache[key] = cached
    return cached


def export_labels_csv(dataset: CohortDataset, labels: list[ProgressionSet], path) -> None:
    """One row per (subject, event): subject_id, level, event_year."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["subject_id", "level", "event_year"])
        for subject, label in zip(dataset.subjects, labels):
            for year in label.events:
                writer.writerow([subject.subject_id, label.level, year])
