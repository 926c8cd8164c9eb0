"""Cost-aware active sensing for longitudinal knee-OA follow-up scheduling."""

from .cohort import (CohortDataset, SubjectRecord, VisitRecord, StateLayout,
                     NormalizationStats, PATIENT_LAYOUT, KNEE_LEFT_LAYOUT,
                     KNEE_RIGHT_LAYOUT, generate_synthetic_cohort, load_cohort_csv,
                     save_cohort_csv, split_train_test, make_state, layout_for)
from .labeling import (ProgressionSet, knee_drop, patient_worsening,
                       label_progressions, label_cohort, worsening_between)
from .reward import (DISMISS, FOLLOW_UP, RewardParams, RewardBreakdown, ScenarioClass,
                     mlac_cost, delta_utility, tau, classify, reward)
from .env import (SensingEnv, EpisodeState, Transition, EpisodeTrace,
                  CompiledCohort, compile_cohort, export_traces_jsonl)
from .qlearn import (QNetwork, ReplayBuffer, AdamState, TrainConfig, forward,
                     td_loss, adam_step, select_action, decay_epsilon, train,
                     evaluate_greedy_rpp, save_checkpoint, load_checkpoint)
from .policies import (RandomPolicy, RoutinePolicy, GreedyQPolicy, CombinedKneePolicy,
                       LogisticModel, LogisticPolicy, random_policy, routine_policy,
                       fit_logistic)
from .metrics import (MetricReport, rpp, acquisition_cost, confusion, recall,
                      balanced_accuracy, recall_over_cost, raw_recall_over_cost,
                      normalized_recall_over_cost, build_report)

__version__ = "0.1.0"
