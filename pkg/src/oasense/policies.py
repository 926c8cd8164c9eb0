"""Reference sensing policies sharing one rollout interface.

A policy is a callable ``policy(state, t) -> action`` where ``state`` is the
(possibly normalized) agent state vector and ``t`` the decision time index.
Routine policies ignore the state; learned policies ignore ``t`` (the time
indices are part of the state).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .cohort import CohortDataset, layout_for, make_state
from .labeling import ProgressionSet
from .qlearn import QNetwork, forward, greedy_action
from .reward import DISMISS, FOLLOW_UP

logger = logging.getLogger(__name__)

ROUTINE_KINDS = ("nos", "ans", "bans")


class RandomPolicy:
    """Follows up with probability p at every decision, independently."""

    def __init__(self, p: float, seed: int):
        if not 0.0 <= p <= 1.0:
            raise ValueError("p must lie in [0,1]")
        self.p = p
        self.seed = seed
        self.name = f"random_{p:g}"
        self._rng = np.random.default_rng(seed)

    def __call__(self, state, t) -> int:
        return FOLLOW_UP if self._rng.random() < self.p else DISMISS


class RoutinePolicy:
    """NOS (never), ANS (annually) or BANS (biannually, even years)."""

    def __init__(self, kind: str):
        if kind not in ROUTINE_KINDS:
            raise ValueError(f"kind must be one of {ROUTINE_KINDS}, got {kind!r}")
        self.kind = kind
        self.name = kind

    def __call__(self, state, t) -> int:
        if self.kind == "nos":
            return DISMISS
        if self.kind == "ans":
            return FOLLOW_UP
        return FOLLOW_UP if (t + 1) % 2 == 0 else DISMISS


def random_policy(p: float, seed: int) -> RandomPolicy:
    return RandomPolicy(p, seed)


def routine_policy(kind: str) -> RoutinePolicy:
    return RoutinePolicy(kind)


class GreedyQPolicy:
    """Deterministic argmax policy over a trained Q-network."""

    def __init__(self, net: QNetwork, name: str = "rl"):
        self.net = net
        self.name = name

    def __call__(self, state, t) -> int:
        return greedy_action(forward(self.net, state, "eval"))


class CombinedKneePolicy:
    """OR-combination of two knee-level agents acting on the patient state.

    Each knee state is an exact sub-vector of the patient state, so the two
    nets can be queried by index selection; a follow-up fires when either
    agent requests one (a visit images both knees).
    """

    def __init__(self, left_net: QNetwork, right_net: QNetwork, name: str = "rl_knee_or"):
        self.left_net = left_net
        self.right_net = right_net
        self.name = name
        self._left_idx = np.asarray(layout_for("knee_left").patient_indices)
        self._right_idx = np.asarray(layout_for("knee_right").patient_indices)

    def __call__(self, state, t) -> int:
        state = np.asarray(state)
        a_left = greedy_action(forward(self.left_net, state[self._left_idx], "eval"))
        a_right = greedy_action(forward(self.right_net, state[self._right_idx], "eval"))
        return FOLLOW_UP if (a_left == FOLLOW_UP or a_right == FOLLOW_UP) else DISMISS


# ---------------------------------------------------------------------------
# Logistic-regression policy
# ---------------------------------------------------------------------------

def _sigmoid(z):
    return np.where(z >= 0, 1.0 / (1.0 + np.exp(-np.abs(z))),
                    np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))))


def logistic_loss_grad(w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray,
                       l2: float):
    """Mean cross-entropy with L2 on the weights (bias unregularized)."""
    z = X @ w + b
    # softplus(z) - y*z, computed stably
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 * np.dot(w, w))
    p = _sigmoid(z)
    resid = (p - y) / X.shape[0]
    return loss, X.T @ resid + l2 * w, float(resid.sum())


@dataclass
class LogisticModel:
    weights: np.ndarray
    bias: float
    threshold: float = 0.5
    l2: float = 1e-3

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return _sigmoid(np.atleast_2d(X) @ self.weights + self.bias)

    def to_payload(self) -> dict:
        return {"weights": self.weights.tolist(), "bias": self.bias,
                "threshold": self.threshold, "l2": self.l2}

    @classmethod
    def from_payload(cls, payload: dict) -> "LogisticModel":
        return cls(weights=np.asarray(payload["weights"], dtype=float),
                   bias=float(payload["bias"]),
                   threshold=float(payload.get("threshold", 0.5)),
                   l2=float(payload.get("l2", 1e-3)))


class LogisticPolicy:
    """Follows up when the predicted pending-progression probability >= threshold."""

    def __init__(self, model: LogisticModel, name: str = "lr"):
        self.model = model
        self.name = name

    def __call__(self, state, t) -> int:
        p = float(self.model.predict_proba(np.asarray(state))[0])
        return FOLLOW_UP if p >= self.model.threshold else DISMISS


def unroll_states(dataset: CohortDataset, labels: list[ProgressionSet],
                  level: str = "patient", feature_mode: str = "full"):
    """All (subject, last_visit, now) decision states with pending-event targets.

    Target is 1 when an event not yet captured at ``last_visit`` exists at or
    before ``now + 1``.
    """
    layout = layout_for(level)
    stats = dataset.normalization_stats
    X, y = [], []
    for subject, label in zip(dataset.subjects, labels):
        for now in range(dataset.horizon):
            for last in range(now + 1):
                X.append(make_state(subject, last, now, layout=layout,
                                    feature_mode=feature_mode, stats=stats))
                y.append(float(label.next_event_after(last) <= now + 1))
    return np.stack(X), np.asarray(y)


def _fit_logistic_gd(X: np.ndarray, y: np.ndarray, l2: float,
                     iters: int = 500) -> LogisticModel:
    n, d = X.shape
    w = np.zeros(d)
    b = 0.0
    # 1/L step size from the logistic-Hessian bound 0.25*lam_max(X^T X / n) + l2
    lam_max = float(np.linalg.eigvalsh(X.T @ X / n).max())
    lr = 1.0 / (0.25 * lam_max + l2 + 1e-12)
    for _ in range(iters):
        _, gw, gb = logistic_loss_grad(w, b, X, y, l2)
        w -= lr * gw
        b -= lr * gb
        if np.abs(gw).max() < 1e-9 and abs(gb) < 1e-9:
            break
    return LogisticModel(weights=w, bias=b, l2=l2)


def _balanced_accuracy(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    pos = y_true == 1
    neg = ~pos
    sens = (y_pred[pos] == 1).mean() if pos.any() else np.nan
    spec = (y_pred[neg] == 0).mean() if neg.any() else np.nan
    return float(np.nanmean([sens, spec]))


def fit_logistic(dataset: CohortDataset, labels: list[ProgressionSet],
                 feature_mode: str = "full", level: str = "patient",
                 l2: float = 1e-3, l2_grid=None, iters: int = 500) -> LogisticPolicy:
    """L2-regularized logistic policy fit on the unrolled decision states.

    When ``l2_grid`` is given, each strength is fit and the one with the
    best balanced accuracy on the training unroll wins.
    """
    X, y = unroll_states(dataset, labels, level=level, feature_mode=feature_mode)
    if len(np.unique(y)) < 2:
        logger.warning("fit_logistic: single-class targets, returning constant policy")
        constant = LogisticModel(weights=np.zeros(X.shape[1]),
                                 bias=50.0 if y[0] == 1.0 else -50.0, l2=l2)
        return LogisticPolicy(constant)
    strengths = list(l2_grid) if l2_grid is not None else [l2]
    best_model, best_score = None, -np.inf
    for strength in strengths:
        model = _fit_logistic_gd(X, y, strength, iters=iters)
        preds = (model.predict_proba(X) >= model.threshold).astype(float)
        score = _balanced_accuracy(y, preds)
        if score > best_score:
            best_model, best_score = model, score
    return LogisticPolicy(best_model)
