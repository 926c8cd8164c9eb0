"""Longitudinal cohort data model: CSV ingestion, synthetic generation, state vectors.

A cohort is a set of subjects observed at baseline plus ``horizon`` annual
follow-ups.  Every visit carries bilateral joint-space-width measurements,
per-knee severity-grade probability vectors and clinical covariates.  Agent
state vectors are built from the most recently acquired visit (stale data on
skipped years) and z-normalized with statistics frozen on the training split.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)

SEX_CODES = {"male": 0.0, "female": 1.0}

FEATURE_MODES = ("full", "no_imaging", "klg_onehot", "klg_probs")


class CohortError(ValueError):
    """Base class for cohort ingestion/validation failures."""


class CohortSchemaError(CohortError):
    """CSV header does not match the cohort schema."""


class CohortParseError(CohortError):
    """A CSV row could not be parsed."""


class CohortValidationError(CohortError):
    """A record violates a domain invariant (probabilities, positivity...)."""


class EmptyCohortError(CohortError):
    """Requested or resulting cohort has no subjects."""


class OutOfHorizonError(CohortError):
    """A time index beyond the cohort horizon was requested."""


# ---------------------------------------------------------------------------
# Records
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VisitRecord:
    """One observation of a subject at an integer year ``time_index``."""

    time_index: int
    fjsw_left: float
    fjsw_right: float
    klg_probs_left: tuple[float, ...]
    klg_probs_right: tuple[float, ...]
    womac_left: float
    womac_right: float
    sf12_physical: float
    injury_left: bool
    injury_right: bool
    surgery_left: bool
    surgery_right: bool

    def __post_init__(self):
        for side, probs in (("left", self.klg_probs_left), ("right", self.klg_probs_right)):
            if len(probs) != 5:
                raise CohortValidationError(f"klg_probs_{side} must have 5 entries")
            if any(p < 0.0 or p > 1.0 for p in probs):
                raise CohortValidationError(f"klg_probs_{side} entries must lie in [0,1]")
            if abs(sum(probs) - 1.0) > 1e-6:
                raise CohortValidationError(f"klg_probs_{side} must sum to 1 (got {sum(probs)!r})")
        if self.fjsw_left <= 0.0 or self.fjsw_right <= 0.0:
            raise CohortValidationError("fjsw values must be strictly positive")
        if self.womac_left < 0.0 or self.womac_right < 0.0:
            raise CohortValidationError("womac scores must be non-negative")


@dataclass(frozen=True)
class SubjectRecord:
    """A subject with complete visits at time indices 0..T."""

    subject_id: str
    age: float
    sex: str
    bmi: float
    visits: tuple[VisitRecord, ...]

    def __post_init__(self):
        if self.age <= 0.0 or self.bmi <= 0.0:
            raise CohortValidationError(f"subject {self.subject_id}: age and bmi must be positive")
        if self.sex not in SEX_CODES:
            raise CohortValidationError(f"subject {self.subject_id}: sex must be male/female")
        indices = [v.time_index for v in self.visits]
        if indices != list(range(len(self.visits))):
            raise CohortValidationError(
                f"subject {self.subject_id}: visits must cover 0..T without gaps, got {indices}"
            )

    @property
    def horizon(self) -> int:
        return len(self.visits) - 1

    def fjsw(self, side: str) -> np.ndarray:
        key = f"fjsw_{side}"
        return np.array([getattr(v, key) for v in self.visits])


# ---------------------------------------------------------------------------
# State layouts
# ---------------------------------------------------------------------------

PATIENT_FEATURES = (
    ["klg_left_" + str(g) for g in range(5)]
    + ["klg_right_" + str(g) for g in range(5)]
    + ["age", "sex", "bmi", "sf12_physical",
       "womac_left", "womac_right",
       "injury_left", "injury_right",
       "surgery_left", "surgery_right",
       "t_last", "t_now"]
)


@dataclass(frozen=True)
class StateLayout:
    """Feature layout of an agent state vector.

    Knee-level layouts are index views into the patient layout, so a knee
    state is always an exact sub-vector of the patient state built from the
    same (subject, last_visit, now) triple.
    """

    level: str
    patient_indices: tuple[int, ...]

    @property
    def size(self) -> int:
        return len(self.patient_indices)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(PATIENT_FEATURES[i] for i in self.patient_indices)

    @property
    def klg_mask(self) -> np.ndarray:
        """True for grade-probability entries (kept out of z-normalization)."""
        return np.array([n.startswith("klg_") for n in self.names])

    @property
    def time_indices(self) -> tuple[int, int]:
        names = self.names
        return names.index("t_last"), names.index("t_now")


PATIENT_LAYOUT = StateLayout("patient", tuple(range(22)))
KNEE_LEFT_LAYOUT = StateLayout("knee_left", (0, 1, 2, 3, 4, 10, 11, 12, 13, 14, 16, 18, 20, 21))
KNEE_RIGHT_LAYOUT = StateLayout("knee_right", (5, 6, 7, 8, 9, 10, 11, 12, 13, 15, 17, 19, 20, 21))

LAYOUTS = {
    "patient": PATIENT_LAYOUT,
    "knee_left": KNEE_LEFT_LAYOUT,
    "knee_right": KNEE_RIGHT_LAYOUT,
}


def layout_for(level: str) -> StateLayout:
    try:
        return LAYOUTS[level]
    except KeyError:
        raise ValueError(f"unknown level {level!r}, expected one of {sorted(LAYOUTS)}") from None


@dataclass(frozen=True)
class NormalizationStats:
    """Per-feature mean/std over the patient layout, frozen on the train split.

    Grade-probability entries carry (0, 1) placeholders and are never applied.
    Constant features get std 1 so normalization maps them to exactly 0.
    """

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        if not (np.all(np.isfinite(self.mean)) and np.all(np.isfinite(self.std))):
            raise CohortValidationError("normalization stats must be finite")
        if np.any(self.std <= 0.0):
            raise CohortValidationError("normalization stds must be positive")

    def for_layout(self, layout: StateLayout) -> tuple[np.ndarray, np.ndarray]:
        idx = np.asarray(layout.patient_indices)
        return self.mean[idx], self.std[idx]


# ---------------------------------------------------------------------------
# Dataset
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class CohortDataset:
    """Immutable collection of complete subjects sharing one horizon."""

    subjects: tuple[SubjectRecord, ...]
    horizon: int
    normalization_stats: NormalizationStats
    n_excluded: int = 0
    _label_cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self.subjects:
            raise EmptyCohortError("cohort has no subjects")
        for s in self.subjects:
            if s.horizon != self.horizon:
                raise CohortValidationError(
                    f"subject {s.subject_id} has horizon {s.horizon}, expected {self.horizon}"
                )

    def __eq__(self, other):
        return (
            isinstance(other, CohortDataset)
            and self.horizon == other.horizon
            and self.subjects == other.subjects
        )

    def __len__(self) -> int:
        return len(self.subjects)

    @property
    def subject_ids(self) -> list[str]:
        return [s.subject_id for s in self.subjects]


def build_dataset(subjects, horizon: int, stats: NormalizationStats | None = None,
                  n_excluded: int = 0) -> CohortDataset:
    """Assemble a dataset, computing normalization stats on it unless given."""
    subjects = tuple(subjects)
    if stats is None:
        if not subjects:
            raise EmptyCohortError("cannot compute stats for an empty cohort")
        stats = compute_normalization_stats(subjects, horizon)
    return CohortDataset(subjects=subjects, horizon=horizon,
                         normalization_stats=stats, n_excluded=n_excluded)


# ---------------------------------------------------------------------------
# State construction
# ---------------------------------------------------------------------------

def _klg_block(probs: tuple[float, ...], feature_mode: str) -> np.ndarray:
    if feature_mode in ("full", "klg_probs"):
        return np.asarray(probs, dtype=float)
    if feature_mode == "no_imaging":
        return np.zeros(5)
    if feature_mode == "klg_onehot":
        block = np.zeros(5)
        block[int(np.argmax(probs))] = 1.0
        return block
    raise ValueError(f"unknown feature_mode {feature_mode!r}, expected one of {FEATURE_MODES}")


def _patient_row(subject: SubjectRecord, last_visit: int, now: int, feature_mode: str) -> np.ndarray:
    visit = subject.visits[last_visit]
    row = np.empty(22)
    row[0:5] = _klg_block(visit.klg_probs_left, feature_mode)
    row[5:10] = _klg_block(visit.klg_probs_right, feature_mode)
    # Observations freeze at acquisition time: age advances only to last_visit.
    row[10] = subject.age + last_visit
    row[11] = SEX_CODES[subject.sex]
    row[12] = subject.bmi
    row[13] = visit.sf12_physical
    row[14] = visit.womac_left
    row[15] = visit.womac_right
    row[16] = float(visit.injury_left)
    row[17] = float(visit.injury_right)
    row[18] = float(visit.surgery_left)
    row[19] = float(visit.surgery_right)
    row[20] = float(last_visit)
    row[21] = float(now)
    return row


def make_state(subject: SubjectRecord, last_visit: int, now: int,
               layout: StateLayout = PATIENT_LAYOUT, feature_mode: str = "full",
               stats: NormalizationStats | None = None) -> np.ndarray:
    """Agent state at decision time ``now`` given data acquired at ``last_visit``.

    All clinical and imaging entries come from the visit at ``last_visit``;
    the two trailing time entries encode (last_visit, now).  When ``stats``
    is given, every non-grade entry is z-normalized.
    """
    if now > subject.horizon:
        raise OutOfHorizonError(f"now={now} exceeds horizon T={subject.horizon}")
    if not 0 <= last_visit <= now:
        raise ValueError(f"need 0 <= last_visit <= now, got ({last_visit}, {now})")
    row = _patient_row(subject, last_visit, now, feature_mode)
    state = row[np.asarray(layout.patient_indices)]
    if stats is not None:
        mean, std = stats.for_layout(layout)
        keep = layout.klg_mask
        state = np.where(keep, state, (state - mean) / std)
    return state


def compute_normalization_stats(subjects, horizon: int) -> NormalizationStats:
    """Per-feature mean/std over every (subject, visit) pair, full patient layout."""
    rows = np.stack([
        _patient_row(s, v, v, "full")
        for s in subjects
        for v in range(horizon + 1)
    ])
    mean = rows.mean(axis=0)
    std = rows.std(axis=0)
    klg = PATIENT_LAYOUT.klg_mask
    mean[klg] = 0.0
    std[klg] = 1.0
    std[std < 1e-12] = 1.0  # constant feature: normalize to exactly zero
    return NormalizationStats(mean=mean, std=std)


# ---------------------------------------------------------------------------
# CSV ingestion / export
# ---------------------------------------------------------------------------

CSV_COLUMNS = (
    ["subject_id", "time_index", "age_baseline", "sex", "bmi", "sf12_physical",
     "womac_left", "womac_right", "injury_left", "injury_right",
     "surgery_left", "surgery_right", "fjsw_left", "fjsw_right"]
    + [f"klg{g}_l" for g in range(5)]
    + [f"klg{g}_r" for g in range(5)]
)


def _parse_float(raw: str, column: str, line: int) -> float:
    try:
        return float(raw)
    except ValueError:
        raise CohortParseError(f"line {line}: column {column!r} is not a number: {raw!r}") from None


def _parse_flag(raw: str, column: str, line: int) -> bool:
    token = raw.strip().lower()
    if token in ("1", "true"):
        return True
    if token in ("0", "false"):
        return False
    raise CohortParseError(f"line {line}: column {column!r} is not a 0/1 flag: {raw!r}")


def _parse_sex(raw: str, line: int) -> str:
    token = raw.strip().lower()
    if token in SEX_CODES:
        return token
    if token in ("0", "1"):
        return "male" if token == "0" else "female"
    raise CohortParseError(f"line {line}: column 'sex' must be male/female, got {raw!r}")


def _parse_probs(record: dict, suffix: str, line: int) -> tuple[float, ...]:
    probs = tuple(_parse_float(record[f"klg{g}_{suffix}"], f"klg{g}_{suffix}", line) for g in range(5))
    if any(p < -1e-12 or p > 1.0 + 1e-12 for p in probs):
        raise CohortValidationError(f"line {line}: klg probabilities must lie in [0,1]")
    total = sum(probs)
    if abs(total - 1.0) > 1e-3:
        raise CohortValidationError(f"line {line}: klg probabilities sum to {total}, not 1")
    if abs(total - 1.0) > 1e-9:
        probs = tuple(p / total for p in probs)
    return probs


def load_cohort_csv(path, horizon: int) -> CohortDataset:
    """Load a cohort CSV, keeping only subjects with complete visits 0..T.

    Incomplete subjects are counted on ``dataset.n_excluded`` and logged.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise CohortSchemaError(f"{path}: empty file, header row is mandatory")
        missing = set(CSV_COLUMNS) - set(reader.fieldnames)
        extra = set(reader.fieldnames) - set(CSV_COLUMNS)
        if missing or extra:
            raise CohortSchemaError(
                f"{path}: header mismatch (missing: {sorted(missing)}, unexpected: {sorted(extra)})"
            )
        per_subject: dict[str, dict[int, dict]] = {}
        order: list[str] = []
        for line, record in enumerate(reader, start=2):
            if any(v is None for v in record.values()):
                raise CohortParseError(f"line {line}: wrong number of fields")
            sid = record["subject_id"]
            t = record["time_index"]
            try:
                t = int(t)
            except ValueError:
                raise CohortParseError(f"line {line}: time_index is not an integer: {t!r}") from None
            if sid not in per_subject:
                per_subject[sid] = {}
                order.append(sid)
            if t in per_subject[sid]:
                raise CohortParseError(f"line {line}: duplicate visit (subject {sid}, year {t})")
            record["_line"] = line
            per_subject[sid][t] = record

    subjects = []
    n_excluded = 0
    for sid in order:
        visits_raw = per_subject[sid]
        if sorted(visits_raw) != list(range(horizon + 1)):
            n_excluded += 1
            continue
        base = visits_raw[0]
        line0 = base["_line"]
        visits = []
        for t in range(horizon + 1):
            rec = visits_raw[t]
            line = rec["_line"]
            # demographics repeat on every row; parse them all so a malformed
            # row fails even when only the baseline values are kept
            _parse_float(rec["age_baseline"], "age_baseline", line)
            _parse_float(rec["bmi"], "bmi", line)
            _parse_sex(rec["sex"], line)
            try:
                visits.append(VisitRecord(
                    time_index=t,
                    fjsw_left=_parse_float(rec["fjsw_left"], "fjsw_left", line),
                    fjsw_right=_parse_float(rec["fjsw_right"], "fjsw_right", line),
                    klg_probs_left=_parse_probs(rec, "l", line),
                    klg_probs_right=_parse_probs(rec, "r", line),
                    womac_left=_parse_float(rec["womac_left"], "womac_left", line),
                    womac_right=_parse_float(rec["womac_right"], "womac_right", line),
                    sf12_physical=_parse_float(rec["sf12_physical"], "sf12_physical", line),
                    injury_left=_parse_flag(rec["injury_left"], "injury_left", line),
                    injury_right=_parse_flag(rec["injury_right"], "injury_right", line),
                    surgery_left=_parse_flag(rec["surgery_left"], "surgery_left", line),
                    surgery_right=_parse_flag(rec["surgery_right"], "surgery_right", line),
                ))
            except CohortValidationError as exc:
                raise CohortValidationError(f"line {line}: {exc}") from None
        try:
            subjects.append(SubjectRecord(
                subject_id=sid,
                age=_parse_float(base["age_baseline"], "age_baseline", line0),
                sex=_parse_sex(base["sex"], line0),
                bmi=_parse_float(base["bmi"], "bmi", line0),
                visits=tuple(visits),
            ))
        except CohortValidationError as exc:
            raise CohortValidationError(f"line {line0}: {exc}") from None
    if not subjects:
        raise EmptyCohortError(f"{path}: no subject has complete visits 0..{horizon}")
    if n_excluded:
        logger.info("load_cohort_csv: excluded %d incomplete subject(s)", n_excluded)
    return build_dataset(subjects, horizon, n_excluded=n_excluded)


def save_cohort_csv(dataset: CohortDataset, path) -> None:
    """Write a dataset in the cohort CSV schema (lossless float round-trip)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for s in dataset.subjects:
            for v in s.visits:
                writer.writerow(
                    [s.subject_id, v.time_index, repr(s.age), s.sex, repr(s.bmi),
                     repr(v.sf12_physical), repr(v.womac_left), repr(v.womac_right),
                     int(v.injury_left), int(v.injury_right),
                     int(v.surgery_left), int(v.surgery_right),
                     repr(v.fjsw_left), repr(v.fjsw_right)]
                    + [repr(p) for p in v.klg_probs_left]
                    + [repr(p) for p in v.klg_probs_right]
                )


# ---------------------------------------------------------------------------
# Synthetic cohort generation
# ---------------------------------------------------------------------------

# Baseline severity mix (Healthy / Mild / Moderate / Severe by worst knee).
SEVERITY_PROPORTIONS = (0.29, 0.40, 0.26, 0.05)

# Mean baseline fJSW (mm) per severity grade 0..4.
FJSW_MEANS = (5.0, 4.8, 4.2, 3.3, 2.2)
FJSW_BASELINE_SD = 0.4
FJSW_FLOOR = 0.5
MEASUREMENT_NOISE_SD = 0.1
MEASUREMENT_NOISE_AMPLITUDE = 0.3

# Annual per-knee progression hazard: logistic in current grade, BMI and age.
# Coefficients calibrated by simulation so labeled patient-level progression
# lands in the 10-22% per-year target band.
HAZARD_INTERCEPT = -3.55
HAZARD_PER_GRADE = 0.70
HAZARD_PER_BMI = 0.040
HAZARD_PER_YEAR_AGE = 0.030

_AGE_BANDS = ((45, 55), (55, 65), (65, 75), (75, 86))
_AGE_BAND_WEIGHTS = (0.28, 0.33, 0.31, 0.08)


def _sample_baseline_grades(rng: np.random.Generator) -> tuple[int, int]:
    severity = rng.choice(4, p=SEVERITY_PROPORTIONS)
    if severity == 0:
        pair = (int(rng.choice(2, p=(0.6, 0.4))), int(rng.choice(2, p=(0.6, 0.4))))
    else:
        worst = severity + 1  # grade 2, 3 or 4
        other_weights = {
            2: (0.30, 0.40, 0.30),
            3: (0.20, 0.30, 0.30, 0.20),
            4: (0.10, 0.20, 0.30, 0.30, 0.10),
        }[worst]
        other = int(rng.choice(worst + 1, p=other_weights))
        pair = (worst, other) if rng.random() < 0.5 else (other, worst)
    return pair


def _grade_probs(grade: int, rng: np.random.Generator) -> tuple[float, ...]:
    base = np.full(5, 0.02)
    base[grade] = 0.74
    if grade > 0:
        base[grade - 1] = 0.11
    if grade < 4:
        base[grade + 1] = 0.11
    jitter = rng.dirichlet(np.full(5, 4.0))
    probs = 0.85 * base / base.sum() + 0.15 * jitter
    probs = probs / probs.sum()
    return tuple(float(p) for p in probs)


def _hazard(grade: int, bmi: float, age: float) -> float:
    z = (HAZARD_INTERCEPT + HAZARD_PER_GRADE * grade
         + HAZARD_PER_BMI * (bmi - 28.0) + HAZARD_PER_YEAR_AGE * (age - 62.0))
    return 1.0 / (1.0 + np.exp(-z))


def generate_synthetic_cohort(n_subjects: int, horizon: int, seed: int) -> CohortDataset:
    """Generate a schema-compatible synthetic cohort, deterministic per seed.

    Progression follows a per-knee annual hazard increasing with current
    severity grade, BMI and age; cartilage loss is monotone underneath a
    bounded measurement noise of amplitude <= 0.3 mm.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if n_subjects < 1:
        raise EmptyCohortError("n_subjects must be >= 1")
    rng = np.random.default_rng(seed)
    subjects = []
    for i in range(n_subjects):
        grades = list(_sample_baseline_grades(rng))
        band = rng.choice(len(_AGE_BANDS), p=_AGE_BAND_WEIGHTS)
        age = float(rng.integers(_AGE_BANDS[band][0], _AGE_BANDS[band][1]))
        sex = "male" if rng.random() < 0.41 else "female"
        bmi = float(np.clip(rng.normal(28.6, 4.8), 17.0, 45.0))

        worst = max(grades)
        asympt_prob = {0: 0.30, 1: 0.30, 2: 0.12, 3: 0.06, 4: 0.03}[worst]
        asymptomatic = rng.random() < asympt_prob
        womac = [0.0, 0.0]
        if not asymptomatic:
            for k in range(2):
                womac[k] = float(np.clip(rng.gamma(1.5, 2.5) + 1.6 * grades[k], 0.25, 48.0))
        sf12 = float(np.clip(52.0 - 2.2 * worst - 0.12 * (bmi - 25.0) + rng.normal(0.0, 6.0),
                             15.0, 65.0))
        injury = [rng.random() < 0.06 + 0.03 * (grades[k] >= 2) for k in range(2)]
        surgery = [rng.random() < 0.02 + 0.02 * (grades[k] >= 3) for k in range(2)]

        underlying = [max(FJSW_FLOOR, float(rng.normal(FJSW_MEANS[g], FJSW_BASELINE_SD)))
                      for g in grades]
        visits = []
        for t in range(horizon + 1):
            if t > 0:
                for k in range(2):
                    h = _hazard(grades[k], bmi, age)
                    if rng.random() < h:
                        drop = float(rng.uniform(0.8, 1.8))
                        underlying[k] = max(FJSW_FLOOR, underlying[k] - drop)
                        grades[k] = min(4, grades[k] + 1)
                        womac[k] = min(60.0, womac[k] + float(rng.uniform(0.5, 3.0)))
                sf12 = float(np.clip(sf12 + rng.normal(0.0, 1.0), 15.0, 65.0))
                for k in range(2):
                    if rng.random() < 0.015:
                        injury[k] = True
                    if grades[k] >= 2 and rng.random() < 0.008:
                        surgery[k] = True
            noise = np.clip(rng.normal(0.0, MEASUREMENT_NOISE_SD, size=2),
                            -MEASUREMENT_NOISE_AMPLITUDE, MEASUREMENT_NOISE_AMPLITUDE)
            measured = [underlying[k] + float(noise[k]) for k in range(2)]
            visits.append(VisitRecord(
                time_index=t,
                fjsw_left=measured[0],
                fjsw_right=measured[1],
                klg_probs_left=_grade_probs(grades[0], rng),
                klg_probs_right=_grade_probs(grades[1], rng),
                womac_left=womac[0],
                womac_right=womac[1],
                sf12_physical=sf12,
                injury_left=injury[0],
                injury_right=injury[1],
                surgery_left=surgery[0],
                surgery_right=surgery[1],
            ))
        subjects.append(SubjectRecord(
            subject_id=f"SYN{i:05d}", age=age, sex=sex, bmi=bmi, visits=tuple(visits)
        ))
    return build_dataset(subjects, horizon)


# ---------------------------------------------------------------------------
# Train/test split
# ---------------------------------------------------------------------------

def split_train_test(dataset: CohortDataset, test_fraction: float, seed: int
                     ) -> tuple[CohortDataset, CohortDataset]:
    """Seeded subject-level split; test reuses the train normalization stats."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie strictly between 0 and 1")
    n = len(dataset)
    n_test = int(round(n * test_fraction))
    if n_test == 0 or n_test == n:
        raise EmptyCohortError(f"split of {n} subjects at fraction {test_fraction} "
                               "produces an empty partition")
    perm = np.random.default_rng(seed).permutation(n)
    test_idx = set(perm[:n_test].tolist())
    train_subjects = [s for i, s in enumerate(dataset.subjects) if i not in test_idx]
    test_subjects = [s for i, s in enumerate(dataset.subjects) if i in test_idx]
    train = build_dataset(train_subjects, dataset.horizon)
    test = build_dataset(test_subjects, dataset.horizon, stats=train.normalization_stats)
    return train, test
