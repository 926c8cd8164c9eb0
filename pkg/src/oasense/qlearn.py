"""From-scratch Q-learning: network, replay buffer, Adam, TD training loop.

The action-value network is deliberately small (input batch-norm, one
sigmoid hidden layer with dropout, two linear output heads) and all of its
machinery - forward/backward passes, the optimizer, the replay buffer and
the epsilon schedule - is implemented directly on numpy arrays so every
piece can be checked against closed forms and finite differences.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .cohort import CohortDataset, layout_for
from .env import CompiledCohort, compile_cohort
from .labeling import ProgressionSet
from .reward import RewardParams

EPSILON_CONVENTIONS = ("intent", "literal")


def sigmoid(x: np.ndarray) -> np.ndarray:
    # overflow of exp(-x) saturates to the correct limit 0.0
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-x))


# ---------------------------------------------------------------------------
# Network
# ---------------------------------------------------------------------------

@dataclass
class QNetwork:
    """Two-action value network with input batch-norm and one hidden layer."""

    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    bn_mean: np.ndarray
    bn_var: np.ndarray
    dropout_rate: float = 0.2
    bn_momentum: float = 0.1
    bn_eps: float = 1e-5

    @classmethod
    def init(cls, input_dim: int, hidden_width: int, rng: np.random.Generator,
             dropout_rate: float = 0.2) -> "QNetwork":
        lim1 = math.sqrt(6.0 / (input_dim + hidden_width))
        lim2 = math.sqrt(6.0 / (hidden_width + 2))
        return cls(
            W1=rng.uniform(-lim1, lim1, size=(input_dim, hidden_width)),
            b1=np.zeros(hidden_width),
            W2=rng.uniform(-lim2, lim2, size=(hidden_width, 2)),
            b2=np.zeros(2),
            bn_mean=np.zeros(input_dim),
            bn_var=np.ones(input_dim),
            dropout_rate=dropout_rate,
        )

    @property
    def input_dim(self) -> int:
        return self.W1.shape[0]

    @property
    def hidden_width(self) -> int:
        return self.W1.shape[1]

    def params(self) -> dict[str, np.ndarray]:
        """Live views of the trainable arrays (batch-norm stats excluded)."""
        return {"W1": self.W1, "b1": self.b1, "W2": self.W2, "b2": self.b2}

    def copy(self) -> "QNetwork":
        return QNetwork(
            W1=self.W1.copy(), b1=self.b1.copy(),
            W2=self.W2.copy(), b2=self.b2.copy(),
            bn_mean=self.bn_mean.copy(), bn_var=self.bn_var.copy(),
            dropout_rate=self.dropout_rate, bn_momentum=self.bn_momentum,
            bn_eps=self.bn_eps,
        )


def _forward(net: QNetwork, x: np.ndarray, mode: str, dropout_rng=None,
             update_stats: bool = False):
    if x.shape[-1] != net.input_dim:
        raise ValueError(f"state dimension {x.shape[-1]} != network input {net.input_dim}")
    single = x.ndim == 1
    X = np.atleast_2d(x)
    if mode == "train":
        mu = X.mean(axis=0)
        var = X.var(axis=0)
        if update_stats:
            m = net.bn_momentum
            net.bn_mean = (1.0 - m) * net.bn_mean + m * mu
            net.bn_var = (1.0 - m) * net.bn_var + m * var
    elif mode == "eval":
        mu, var = net.bn_mean, net.bn_var
    else:
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    xn = (X - mu) / np.sqrt(var + net.bn_eps)
    z1 = xn @ net.W1 + net.b1
    h = sigmoid(z1)
    mask = None
    hd = h
    if mode == "train" and dropout_rng is not None and net.dropout_rate > 0.0:
        mask = (dropout_rng.random(h.shape) >= net.dropout_rate) / (1.0 - net.dropout_rate)
        hd = h * mask
    q = hd @ net.W2 + net.b2
    cache = {"xn": xn, "h": h, "hd": hd, "mask": mask}
    return (q[0] if single else q), cache


def forward(net: QNetwork, state: np.ndarray, mode: str = "eval",
            dropout_rng=None) -> np.ndarray:
    """Q-values for one state or a batch; eval mode is deterministic."""
    q, _ = _forward(net, np.asarray(state, dtype=float), mode, dropout_rng)
    return q


def _backward(net: QNetwork, cache: dict, dq: np.ndarray) -> dict[str, np.ndarray]:
    hd, h, xn, mask = cache["hd"], cache["h"], cache["xn"], cache["mask"]
    grads = {
        "W2": hd.T @ dq,
        "b2": dq.sum(axis=0),
    }
    dhd = dq @ net.W2.T
    dh = dhd * mask if mask is not None else dhd
    dz1 = dh * h * (1.0 - h)
    grads["W1"] = xn.T @ dz1
    grads["b1"] = dz1.sum(axis=0)
    return grads


def td_loss(batch: dict, net: QNetwork, target_net: QNetwork, gamma: float,
            dropout_rng=None, update_stats: bool = False):
    """Mean-squared TD error and its gradients w.r.t. the local network.

    Targets come from the frozen target network; terminal transitions
    bootstrap from the reward alone.  Passing ``dropout_rng`` switches the
    local forward pass to train mode (batch statistics + dropout).
    """
    states = np.atleast_2d(batch["state"])
    actions = np.asarray(batch["action"], dtype=np.int64)
    rewards = np.asarray(batch["reward"], dtype=float)
    next_states = np.atleast_2d(batch["next_state"])
    dones = np.asarray(batch["done"], dtype=bool)
    if states.shape[0] == 0:
        raise ValueError("td_loss requires a nonempty batch")

    q_next, _ = _forward(target_net, next_states, "eval")
    targets = rewards + gamma * q_next.max(axis=1) * (~dones)

    mode = "train" if dropout_rng is not None else "eval"
    q, cache = _forward(net, states, mode, dropout_rng, update_stats=update_stats)
    rows = np.arange(states.shape[0])
    err = q[rows, actions] - targets
    loss = float(np.mean(err ** 2))
    dq = np.zeros_like(q)
    dq[rows, actions] = 2.0 * err / states.shape[0]
    return loss, _backward(net, cache, dq)


# ---------------------------------------------------------------------------
# Replay buffer
# ---------------------------------------------------------------------------

class ReplayBuffer:
    """Fixed-capacity ring of transitions, oldest evicted first."""

    def __init__(self, capacity: int, state_dim: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.states = np.empty((capacity, state_dim))
        self.actions = np.empty(capacity, dtype=np.int64)
        self.rewards = np.empty(capacity)
        self.next_states = np.empty((capacity, state_dim))
        self.dones = np.empty(capacity, dtype=bool)
        self.size = 0
        self._head = 0

    def __len__(self) -> int:
        return self.size

    def push(self, state, action, reward, next_state, done) -> None:
        i = self._head
        self.states[i] = state
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_states[i] = next_state
        self.dones[i] = done
        self._head = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def push_batch(self, states, actions, rewards, next_states, dones) -> None:
        k = len(actions)
        idx = (self._head + np.arange(k)) % self.capacity
        self.states[idx] = states
        self.actions[idx] = actions
        self.rewards[idx] = rewards
        self.next_states[idx] = next_states
        self.dones[idx] = dones
        self._head = (self._head + k) % self.capacity
        self.size = min(self.size + k, self.capacity)

    def _ordered_indices(self) -> np.ndarray:
        start = (self._head - self.size) % self.capacity
        return (start + np.arange(self.size)) % self.capacity

    def contents(self) -> dict[str, np.ndarray]:
        """Stored transitions, oldest first."""
        idx = self._ordered_indices()
        return {
            "state": self.states[idx], "action": self.actions[idx],
            "reward": self.rewards[idx], "next_state": self.next_states[idx],
            "done": self.dones[idx],
        }

    def sample(self, batch_size: int, rng: np.random.Generator) -> dict[str, np.ndarray]:
        if self.size == 0:
            raise ValueError("cannot sample from an empty buffer")
        idx = rng.choice(self.size, size=min(batch_size, self.size), replace=False)
        idx = self._ordered_indices()[idx]
        return {
            "state": self.states[idx], "action": self.actions[idx],
            "reward": self.rewards[idx], "next_state": self.next_states[idx],
            "done": self.dones[idx],
        }


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------

@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def init(cls, params: dict[str, np.ndarray]) -> "AdamState":
        return cls(m={k: np.zeros_like(p) for k, p in params.items()},
                   v={k: np.zeros_like(p) for k, p in params.items()})


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
              opt: AdamState, lr: float) -> None:
    """One bias-corrected Adam update, in place."""
    opt.step += 1
    t = opt.step
    for name, p in params.items():
        g = grads[name]
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient for parameter {name!r} "
                                     f"at step {t}")
        opt.m[name] = opt.beta1 * opt.m[name] + (1.0 - opt.beta1) * g
        opt.v[name] = opt.beta2 * opt.v[name] + (1.0 - opt.beta2) * g ** 2
        m_hat = opt.m[name] / (1.0 - opt.beta1 ** t)
        v_hat = opt.v[name] / (1.0 - opt.beta2 ** t)
        p -= lr * m_hat / (np.sqrt(v_hat) + opt.eps)


# ---------------------------------------------------------------------------
# Exploration
# ---------------------------------------------------------------------------

def greedy_action(q: np.ndarray) -> int:
    """Argmax with ties broken toward dismissal."""
    return int(q[1] > q[0])


def select_action(net: QNetwork, state: np.ndarray, epsilon: float,
                  rng: np.random.Generator, convention: str = "intent") -> int:
    """Epsilon-greedy action selection.

    ``intent``: explore (random action) with probability epsilon, so a
    decaying epsilon moves from exploration to exploitation.  ``literal``:
    the inverted rule (greedy when the uniform draw falls below epsilon),
    kept selectable for replication.
    """
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0,1]")
    q = forward(net, state, "eval")
    n_r = rng.random()
    if convention == "intent":
        exploring = n_r < epsilon
    elif convention == "literal":
        exploring = not (n_r < epsilon)
    else:
        raise ValueError(f"unknown epsilon convention {convention!r}")
    if exploring:
        return int(rng.integers(0, 2))
    return greedy_action(q)


def decay_epsilon(epsilon: float, d_eps: float) -> float:
    """Multiplicative decay epsilon <- (1 - d_eps) * epsilon."""
    if not 0.0 < epsilon <= 1.0:
        raise ValueError("epsilon must lie in (0,1]")
    if not 0.0 <= d_eps < 1.0:
        raise ValueError("d_eps must lie in [0,1)")
    return (1.0 - d_eps) * epsilon


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 1000
    train_interval: int = 50     # episodes between gradient steps
    batch_size: int = 256
    learning_rate: float = 5e-4
    epsilon_init: float = 1.0
    epsilon_decay: float = 5e-3  # per-epoch multiplicative decay
    gamma: float = 1.0
    target_sync_period: int = 100  # gradient steps between target syncs
    hidden_width: int = 64
    seed: int = 0
    epsilon_convention: str = "intent"
    buffer_capacity: int = 10_000
    eval_period: int = 1         # epochs between greedy evaluations (0 = never)

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        for name in ("train_interval", "batch_size", "target_sync_period",
                     "hidden_width", "buffer_capacity"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.learning_rate <= 0.0:
            raise ValueError("learning_rate must be positive")
        if not 0.0 < self.epsilon_init <= 1.0:
            raise ValueError("epsilon_init must lie in (0,1]")
        if not 0.0 < self.epsilon_decay < 1.0:
            raise ValueError("epsilon_decay must lie in (0,1)")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0,1]")
        if self.epsilon_convention not in EPSILON_CONVENTIONS:
            raise ValueError(f"epsilon_convention must be one of {EPSILON_CONVENTIONS}")
        if self.eval_period < 0:
            raise ValueError("eval_period must be >= 0")


def greedy_actions_batch(net: QNetwork, states: np.ndarray) -> np.ndarray:
    q = forward(net, states, "eval")
    return (q[:, 1] > q[:, 0]).astype(np.int64)


def evaluate_greedy_rpp(compiled: CompiledCohort, net: QNetwork) -> float:
    """Mean episode return of the greedy policy over a compiled cohort."""
    n = compiled.n_subjects
    rows = np.arange(n)
    cur = np.zeros(n, dtype=np.int64)
    total = np.zeros(n)
    for _ in range(compiled.horizon):
        a = greedy_actions_batch(net, compiled.states[rows, cur])
        total += compiled.rewards[rows, cur, a]
        cur = compiled.next_pair[cur, a]
    return float(total.mean())


def train(dataset: CohortDataset, labels: list[ProgressionSet], params: RewardParams,
          cfg: TrainConfig, level: str = "patient", feature_mode: str = "full",
          eval_dataset: CohortDataset | None = None,
          eval_labels: list[ProgressionSet] | None = None,
          compiled: CompiledCohort | None = None):
    """Train a Q-network on one-subject episodes; returns (net, learning curve).

    Every epoch shuffles the subjects and replays each as one episode under
    the epsilon-greedy behaviour policy.  Episodes are rolled out in blocks
    of ``train_interval``; each completed block of that many episodes
    triggers one TD gradient step on a replay batch, and the target network
    is hard-synced every ``target_sync_period`` steps.  Epsilon decays once
    per epoch.  Curve rows: epoch, epsilon (post-decay), train_rpp
    (behaviour policy), eval_rpp (greedy).
    """
    if len(dataset) == 0:
        raise ValueError("dataset is empty")
    if compiled is None:
        compiled = compile_cohort(dataset, labels, params, level, feature_mode)
    eval_compiled = compiled
    if eval_dataset is not None:
        if eval_labels is None:
            raise ValueError("eval_dataset requires eval_labels")
        eval_compiled = compile_cohort(eval_dataset, eval_labels, params, level, feature_mode)

    n = compiled.n_subjects
    dim = compiled.state_dim
    horizon = compiled.horizon
    ss = np.random.SeedSequence(cfg.seed)
    rng_init, rng_explore, rng_buffer, rng_dropout = map(np.random.default_rng, ss.spawn(4))

    net = QNetwork.init(dim, cfg.hidden_width, rng_init)
    if layout_for(level).size != dim:
        raise ValueError("layout size does not match compiled state dimension")
    target = net.copy()
    adam = AdamState.init(net.params())
    buffer = ReplayBuffer(cfg.buffer_capacity, dim)

    epsilon = cfg.epsilon_init
    episodes_pending = 0
    grad_steps = 0
    curve: list[dict] = []

    for epoch in range(1, cfg.epochs + 1):
        order = rng_explore.permutation(n)
        epoch_return = 0.0
        for start in range(0, n, cfg.train_interval):
            idx = order[start:start + cfg.train_interval]
            k = len(idx)
            cur = np.zeros(k, dtype=np.int64)
            for _ in range(horizon):
                states_t = compiled.states[idx, cur]
                greedy = greedy_actions_batch(net, states_t)
                n_r = rng_explore.random(k)
                rand_a = rng_explore.integers(0, 2, size=k)
                if cfg.epsilon_convention == "intent":
                    actions = np.where(n_r < epsilon, rand_a, greedy)
                else:
                    actions = np.where(n_r < epsilon, greedy, rand_a)
                rewards_t = compiled.rewards[idx, cur, actions]
                next_cur = compiled.next_pair[cur, actions]
                dones_t = compiled.done[cur, actions]
                buffer.push_batch(states_t, actions, rewards_t,
                                  compiled.states[idx, next_cur], dones_t)
                epoch_return += float(rewards_t.sum())
                cur = next_cur
            episodes_pending += k
            while episodes_pending >= cfg.train_interval:
                episodes_pending -= cfg.train_interval
                if len(buffer) == 0:
                    continue
                batch = buffer.sample(cfg.batch_size, rng_buffer)
                _, grads = td_loss(batch, net, target, cfg.gamma,
                                   dropout_rng=rng_dropout, update_stats=True)
                adam_step(net.params(), grads, adam, cfg.learning_rate)
                grad_steps += 1
                if grad_steps % cfg.target_sync_period == 0:
                    target = net.copy()
        epsilon = decay_epsilon(epsilon, cfg.epsilon_decay)
        eval_rpp = math.nan
        if cfg.eval_period and epoch % cfg.eval_period == 0:
            eval_rpp = evaluate_greedy_rpp(eval_compiled, net)
        curve.append({
            "epoch": epoch,
            "epsilon": epsilon,
            "train_rpp": epoch_return / n,
            "eval_rpp": eval_rpp,
        })
    return net, curve


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

def net_to_payload(net: QNetwork) -> dict:
    return {
        "shapes": {k: list(v.shape) for k, v in net.params().items()},
        "weights": {k: v.ravel().tolist() for k, v in net.params().items()},
        "bn_mean": net.bn_mean.tolist(),
        "bn_var": net.bn_var.tolist(),
        "dropout_rate": net.dropout_rate,
        "bn_momentum": net.bn_momentum,
        "bn_eps": net.bn_eps,
    }


def net_from_payload(payload: dict) -> QNetwork:
    shapes = payload["shapes"]
    weights = {}
    for name, shape in shapes.items():
        flat = np.asarray(payload["weights"][name], dtype=float)
        if flat.size != int(np.prod(shape)):
            raise ValueError(f"checkpoint weight {name!r} has {flat.size} values, "
                             f"shape {shape} needs {int(np.prod(shape))}")
        weights[name] = flat.reshape(shape)
    if weights["W1"].shape[1] != weights["W2"].shape[0]:
        raise ValueError("checkpoint layer shapes are inconsistent")
    return QNetwork(
        W1=weights["W1"], b1=weights["b1"], W2=weights["W2"], b2=weights["b2"],
        bn_mean=np.asarray(payload["bn_mean"], dtype=float),
        bn_var=np.asarray(payload["bn_var"], dtype=float),
        dropout_rate=payload["dropout_rate"],
        bn_momentum=payload.get("bn_momentum", 0.1),
        bn_eps=payload.get("bn_eps", 1e-5),
    )


def save_checkpoint(path, kind: str, payload: dict, *, level: str, feature_mode: str,
                    cfg: TrainConfig | None, params: RewardParams | None,
                    seed: int, epochs_trained: int) -> None:
    """Uniform JSON envelope for trained policies (kind tag distinguishes)."""
    doc = {
        "kind": kind,
        "level": level,
        "feature_mode": feature_mode,
        "train_config": asdict(cfg) if cfg is not None else None,
        "reward_params": asdict(params) if params is not None else None,
        "seed": seed,
        "epochs_trained": epochs_trained,
        "payload": payload,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_checkpoint(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if "kind" not in doc or "payload" not in doc:
        raise ValueError(f"{path}: not a policy checkpoint")
    return doc
