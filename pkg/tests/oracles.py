"""Independent reference implementations used only to check the library.

These transcribe the defining formulas directly (explicit case analysis,
matrix-based scans) and deliberately share no code with the package.
"""

import math

import numpy as np


def reward_case_oracle(action, t, t_r, t_p, d_obs, d_event, lam, c, kappa, alpha,
                       beta, horizon):
    """Literal case table for the five-scenario reward."""
    def gate(d):
        priced = c * d
        return priced if priced >= c * kappa else 0.0

    if math.isinf(t_p):
        tau = 1.0
    else:
        tau = abs(t + 1 - t_p) / horizon

    if action == 1:
        if t + 1 < t_p:  # early visit
            return math.exp(-tau) * gate(d_obs) - lam
        if t + 1 == t_p:  # timely visit
            return gate(d_obs) - lam
        return -alpha * math.exp(tau) * gate(d_event) - lam  # late visit
    if t + 1 < t_p:  # true dismissal
        return beta
    return -math.exp(tau) * gate(d_event)  # false dismissal


def scan_oracle(phi_left, phi_right, kappa, level="patient"):
    """Chain re-scan over precomputed drop matrices."""
    phi_left = np.asarray(phi_left, dtype=float)
    phi_right = np.asarray(phi_right, dtype=float)
    horizon = len(phi_left) - 1
    drops_l = np.maximum(0.0, phi_left[:, None] - phi_left[None, :])
    drops_r = np.maximum(0.0, phi_right[:, None] - phi_right[None, :])
    if level == "patient":
        matrix = np.maximum(drops_l, drops_r)
    elif level == "knee_left":
        matrix = drops_l
    else:
        matrix = drops_r
    events = []
    ref = 0
    for year in range(1, horizon + 1):
        if matrix[ref, year] >= kappa:
            events.append(year)
            ref = year
    return tuple(events)


def episode_reward_oracle(actions, events, phi_left, phi_right, lam, c, kappa,
                          alpha, beta, horizon, level="patient"):
    """Recompute an episode's rewards from actions, labels and raw fJSW alone."""
    phi_left = np.asarray(phi_left, dtype=float)
    phi_right = np.asarray(phi_right, dtype=float)

    def worsening(r, z):
        d_l = max(0.0, phi_left[r] - phi_left[z])
        d_r = max(0.0, phi_right[r] - phi_right[z])
        if level == "patient":
            return max(d_l, d_r)
        return d_l if level == "knee_left" else d_r

    def next_event(after):
        remaining = [e for e in events if e > after]
        return float(remaining[0]) if remaining else math.inf

    rewards = []
    t_r = 0
    for t, action in enumerate(actions):
        t_p = next_event(t_r)
        d_obs = worsening(t_r, t + 1)
        d_event = worsening(t_r, int(t_p)) if math.isfinite(t_p) else 0.0
        rewards.append(reward_case_oracle(action, t, t_r, t_p, d_obs, d_event,
                                          lam, c, kappa, alpha, beta, horizon))
        if action == 1:
            t_r = t + 1
    return rewards
