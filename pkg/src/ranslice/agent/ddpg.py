"""Deep deterministic policy gradient for a scalar bandwidth action."""

from dataclasses import dataclass, asdict, fields

import numpy as np

from .nn import ACT_HIGH, ACT_LOW, Adam, Mlp, load_mlp, mlp_backward, mlp_forward, save_mlp


@dataclass
class DdpgConfig:
    gamma: float = 0.99
    tau: float = 0.005
    lr_actor: float = 1e-4
    lr_critic: float = 1e-3
    batch_size: int = 64
    buffer_capacity: int = 100_000
    warmup: int = 1000                  # transitions before the first update
    noise_sigma_start: float = 0.2
    noise_sigma_end: float = 0.02
    noise_decay_episodes: int = 1000
    hidden_dims: tuple = (64, 64)
    # episode ends are time limits, not terminal states
    bootstrap_on_done: bool = True

    def __post_init__(self):
        self.hidden_dims = tuple(int(h) for h in self.hidden_dims)
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError("tau must lie in (0, 1]")
        for name in ("lr_actor", "lr_critic", "batch_size", "buffer_capacity",
                     "noise_decay_episodes"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.noise_sigma_start < 0 or self.noise_sigma_end < 0 or self.warmup < 0:
            raise ValueError("noise levels and warmup must be non-negative")
        if any(h <= 0 for h in self.hidden_dims):
            raise ValueError("hidden layer sizes must be positive")

    def noise_sigma(self, episode):
        frac = min(max(episode, 0) / self.noise_decay_episodes, 1.0)
        return self.noise_sigma_start + frac * (self.noise_sigma_end - self.noise_sigma_start)

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise KeyError(f"unknown DdpgConfig keys: {', '.join(unknown)}")
        return cls(**d)

    def to_dict(self):
        d = asdict(self)
        d["hidden_dims"] = list(self.hidden_dims)
        return d


@dataclass
class Transition:
    state: np.ndarray
    action: float
    reward: float
    next_state: np.ndarray
    done: bool = False


class ReplayBuffer:
    """Fixed-capacity ring of transitions; the oldest is overwritten first."""

    def __init__(self, capacity, state_dim):
        self.capacity = int(capacity)
        self.states = np.zeros((self.capacity, state_dim))
        self.actions = np.zeros(self.capacity)
        self.rewards = np.zeros(self.capacity)
        self.next_states = np.zeros((self.capacity, state_dim))
        self.dones = np.zeros(self.capacity, dtype=bool)
        self.size = 0
        self._next = 0

    def __len__(self):
        return self.size

    def push(self, t: Transition):
        i = self._next
        self.states[i] = t.state
        self.actions[i] = t.action
        self.rewards[i] = t.reward
        self.next_states[i] = t.next_state
        self.dones[i] = t.done
        self._next = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def __iter__(self):
        """Stored transitions, oldest first."""
        start = self._next if self.size == self.capacity else 0
        for k in range(self.size):
            i = (start + k) % self.capacity
            yield Transition(self.states[i].copy(), float(self.actions[i]),
                             float(self.rewards[i]), self.next_states[i].copy(),
                             bool(self.dones[i]))

    def sample(self, batch_size, rng):
        idx = rng.choice(self.size, size=batch_size, replace=False)
        return (self.states[idx], self.actions[idx], self.rewards[idx],
                self.next_states[idx], self.dones[idx])


def actor_act(actor: Mlp, state, noise_sigma, rng):
    b = float(actor(state)[0])
    if noise_sigma > 0:
        b += noise_sigma * float(rng.standard_normal())
    return min(max(b, ACT_LOW), ACT_HIGH)


def critic_input(states, actions):
    states = np.atleast_2d(states)
    return np.hstack([states, np.asarray(actions, dtype=float).reshape(-1, 1)])


def bellman_target(reward, next_state, done, target_actor, target_critic, gamma):
    """``reward + gamma * Q'(s', mu'(s'))`` with the bootstrap cut where ``done``."""
    reward = np.asarray(reward, dtype=float)
    next_state = np.atleast_2d(next_state)
    a_next = target_actor(next_state).reshape(-1)
    q_next = target_critic(critic_input(next_state, a_next)).reshape(-1)
    cont = 1.0 - np.asarray(done, dtype=float)
    y = reward + gamma * cont * q_next
    return float(y[0]) if y.size == 1 and reward.ndim == 0 else y


def soft_update(target: Mlp, online: Mlp, tau):
    if target.layer_dims != online.layer_dims or target.head != online.head:
        raise ValueError("target and online networks differ in architecture")
    for t, o in zip(target.params(), online.params()):
        t *= 1.0 - tau
        t += tau * o


def critic_loss_and_grads(critic, states, actions, targets):
    q, cache = mlp_forward(critic, critic_input(states, actions))
    err = q.reshape(-1) - targets
    loss = float(np.mean(err ** 2))
    grads, _ = mlp_backward(critic, cache, (2.0 * err / err.size).reshape(-1, 1))
    return loss, grads


def actor_objective_and_grads(actor, critic, states):
    """Mean critic value of the actor's own actions and its gradient w.r.t. actor params."""
    a, a_cache = mlp_forward(actor, states)
    q, q_cache = mlp_forward(critic, critic_input(states, a))
    n = q.shape[0]
    _, dq_dx = mlp_backward(critic, q_cache, np.full((n, 1), 1.0 / n))
    dq_da = dq_dx[:, -1:]
    grads, _ = mlp_backward(actor, a_cache, dq_da)
    return float(q.mean()), grads


class DdpgAgent:
    def __init__(self, state_dim=7, cfg: DdpgConfig = None, seed=0):
        self.cfg = cfg or DdpgConfig()
        self.state_dim = state_dim
        init_ss, noise_ss, sample_ss = np.random.SeedSequence(seed).spawn(3)
        init_rng = np.random.default_rng(init_ss)
        # exploration and replay sampling draw from separate streams
        self.noise_rng = np.random.default_rng(noise_ss)
        self.sample_rng = np.random.default_rng(sample_ss)
        hid = list(self.cfg.hidden_dims)
        self.actor = Mlp([state_dim, *hid, 1], head="squash", rng=init_rng)
        self.critic = Mlp([state_dim + 1, *hid, 1], head="linear", rng=init_rng)
        self.target_actor = self.actor.copy()
        self.target_critic = self.critic.copy()
        self.actor_opt = Adam(self.actor.params(), lr=self.cfg.lr_actor)
        self.critic_opt = Adam(self.critic.params(), lr=self.cfg.lr_critic)
        self.buffer = ReplayBuffer(self.cfg.buffer_capacity, state_dim)

    def act(self, state, noise_sigma=0.0):
        return actor_act(self.actor, state, noise_sigma, self.noise_rng)

    def remember(self, transition: Transition):
        self.buffer.push(transition)

    def ready(self):
        return len(self.buffer) >= max(self.cfg.batch_size, self.cfg.warmup)

    def train_step(self, batch=None):
        """One critic and one actor update followed by target soft updates.

        Returns (critic_loss, actor_objective), or ``None`` when the buffer
        cannot fill a batch yet.
        """
        cfg = self.cfg
        if batch is None:
            if not self.ready():
                return None
            batch = self.buffer.sample(cfg.batch_size, self.sample_rng)
        s, a, r, s2, done = batch
        terminal = np.zeros_like(done, dtype=bool) if cfg.bootstrap_on_done else done
        y = bellman_target(r, s2, terminal, self.target_actor, self.target_critic, cfg.gamma)

        critic_loss, c_grads = critic_loss_and_grads(self.critic, s, a, y)
        self.critic_opt.step(self.critic.params(), c_grads)

        objective, a_grads = actor_objective_and_grads(self.actor, self.critic, s)
        # ascend the objective
        self.actor_opt.step(self.actor.params(), [-g for g in a_grads])

        soft_update(self.target_critic, self.critic, cfg.tau)
        soft_update(self.target_actor, self.actor, cfg.tau)
        return critic_loss, objective

    # -- checkpoints ------------------------------------------------------------
    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            save_mlp(self.actor, fh)
            save_mlp(self.critic, fh)

    @classmethod
    def load(cls, path, cfg: DdpgConfig = None):
        with open(path, encoding="utf-8") as fh:
            actor = load_mlp(fh)
            critic = load_mlp(fh)
        cfg = cfg or DdpgConfig(hidden_dims=tuple(actor.layer_dims[1:-1]))
        agent = cls(state_dim=actor.layer_dims[0], cfg=cfg)
        agent.actor, agent.critic = actor, critic
        agent.target_actor, agent.target_critic = actor.copy(), critic.copy()
        agent.actor_opt = Adam(agent.actor.params(), lr=cfg.lr_actor)
        agent.critic_opt = Adam(agent.critic.params(), lr=cfg.lr_critic)
        return agent
