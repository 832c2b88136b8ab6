"""Experiment driver: seeding, episode loop, training, evaluation and sweeps."""

import csv
import json
import logging
import math
import os
from dataclasses import dataclass, field, fields

import numpy as np

from .agent.ddpg import DdpgAgent, DdpgConfig, Transition
from .baselines import (B_MAX, B_MIN, FixedPolicy, HeuristicPolicy, OraclePolicy, PolicySpec,
                        ScaledPolicy)
from .broker import Observation, SliceBroker
from .sim.config import SimConfig
from .sim.env import SliceEnv
from .sim.mobility import synth_trace

log = logging.getLogger(__name__)

TRAIN, EVAL, AGENT = 0, 1, 2
HIST_BIN = 0.02


@dataclass
class EpisodeMetrics:
    episode_index: int
    mean_b: float
    qos_availability: float
    mean_reward: float
    n_aps: int
    actions: list = field(default_factory=list, repr=False)


@dataclass
class RunConfig:
    sim: SimConfig = field(default_factory=SimConfig)
    agent: DdpgConfig = field(default_factory=DdpgConfig)
    policy: PolicySpec = field(default_factory=lambda: PolicySpec("ddpg"))
    episodes: int = 2000
    aps_per_episode: int = 100
    eval_runs: int = 200
    reward_window: int = 100
    output_dir: str = "runs"
    seed: int = 0

    def __post_init__(self):
        for name in ("episodes", "aps_per_episode", "eval_runs", "reward_window"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise KeyError(f"unknown run config keys: {', '.join(unknown)}")
        d = dict(d)
        if "sim" in d:
            d["sim"] = SimConfig.from_dict(d["sim"])
        if "agent" in d:
            d["agent"] = DdpgConfig.from_dict(d["agent"])
        if "policy" in d:
            d["policy"] = PolicySpec.from_dict(d["policy"])
        return cls(**d)

    def to_dict(self):
        return {"sim": self.sim.to_dict(), "agent": self.agent.to_dict(),
                "policy": self.policy.to_dict(), "episodes": self.episodes,
                "aps_per_episode": self.aps_per_episode, "eval_runs": self.eval_runs,
                "reward_window": self.reward_window, "output_dir": self.output_dir,
                "seed": self.seed}


def load_run_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return RunConfig.from_dict(json.load(fh))


def derive_seed(master, split, index=0) -> int:
    ss = np.random.SeedSequence(entropy=int(master), spawn_key=(split, index))
    return int(ss.generate_state(1, np.uint64)[0])


def episode_seeds(master, split, n):
    return [derive_seed(master, split, i) for i in range(n)]


def check_disjoint(train_seeds, eval_seeds):
    overlap = set(train_seeds) & set(eval_seeds)
    if overlap:
        raise RuntimeError(f"{len(overlap)} trace seeds shared by training and evaluation")
    log.info("train/eval trace seeds disjoint (%d train, %d eval)",
             len(set(train_seeds)), len(set(eval_seeds)))


def make_env(sim: SimConfig, seed, n_aps) -> SliceEnv:
    # one extra period: the tenant observes a period before its first request
    trace = synth_trace(sim.n_vehicles_mean, (n_aps + 1) * sim.ap_duration, sim.vehicle_speed,
                        seed, radius=sim.cell_radius, dt=sim.ap_duration)
    return SliceEnv(sim, trace=trace, seed=seed)


class DdpgPolicy:
    """Acts on the observation vector only."""

    kind = "ddpg"

    def __init__(self, agent: DdpgAgent, noise_sigma=0.0, learn=False):
        self.agent = agent
        self.noise_sigma = noise_sigma
        self.learn = learn

    def act(self, observation, env=None):
        return self.agent.act(observation.to_vector(), self.noise_sigma)

    def observe(self, obs, b, reward, next_obs, done):
        if not self.learn:
            return
        self.agent.remember(Transition(obs.to_vector(), b, reward, next_obs.to_vector(), done))
        self.agent.train_step()


def run_episode(policy, env: SliceEnv, n_aps, episode_index=0) -> EpisodeMetrics:
    """One warm-up period at the maximum request, then ``n_aps`` policy-driven APs."""
    broker = SliceBroker(env)
    obs, _, _ = broker.step(B_MAX)
    actions, rewards, oks = [], [], []
    for k in range(n_aps):
        b = float(policy.act(obs, env))
        next_obs, report, reward = broker.step(b)
        if hasattr(policy, "observe"):
            policy.observe(obs, b, reward, next_obs, k == n_aps - 1)
        actions.append(b)
        rewards.append(reward)
        oks.append(report.qos_ok)
        obs = next_obs
    return EpisodeMetrics(episode_index, float(np.mean(actions)), float(np.mean(oks)),
                          float(np.mean(rewards)), n_aps, actions)


def build_policy(spec: PolicySpec, cfg: RunConfig, checkpoint=None):
    p = spec.params
    if spec.kind == "fixed":
        return FixedPolicy(p.get("b0", 0.9))
    if spec.kind == "heuristic":
        return HeuristicPolicy(p.get("weight", 1.0), p.get("t_ref"))
    if spec.kind == "oracle":
        return OraclePolicy(p.get("grid_step", 0.01))
    path = checkpoint or p.get("checkpoint")
    if not path or not os.path.exists(path):
        raise FileNotFoundError(f"DDPG checkpoint not found: {path!r}")
    return DdpgPolicy(DdpgAgent.load(path, cfg.agent))


# --- CSV helpers ----------------------------------------------------------------

def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def running_average(values, window):
    out, acc = [], 0.0
    for i, v in enumerate(values):
        acc += v
        if i >= window:
            acc -= values[i - window]
        out.append(acc / min(i + 1, window))
    return out


# --- training -------------------------------------------------------------------

def train(cfg: RunConfig, out_dir=None, progress_every=50):
    """Train a DDPG tenant; writes reward_curve.csv, train_metrics.csv and checkpoints."""
    out_dir = out_dir or cfg.output_dir
    os.makedirs(out_dir, exist_ok=True)
    train_seeds = episode_seeds(cfg.seed, TRAIN, cfg.episodes)
    check_disjoint(train_seeds, episode_seeds(cfg.seed, EVAL, cfg.eval_runs))
    agent = DdpgAgent(state_dim=2 + cfg.sim.n_worst_cqi, cfg=cfg.agent,
                      seed=derive_seed(cfg.seed, AGENT))
    policy = DdpgPolicy(agent, learn=True)
    history, rewards = [], []
    best = -math.inf
    best_path = os.path.join(out_dir, "checkpoint_best.txt")
    for e, seed in enumerate(train_seeds):
        policy.noise_sigma = cfg.agent.noise_sigma(e)
        env = make_env(cfg.sim, seed, cfg.aps_per_episode)
        m = run_episode(policy, env, cfg.aps_per_episode, e)
        history.append(m)
        rewards.append(m.mean_reward)
        avg = running_average(rewards[-cfg.reward_window:], cfg.reward_window)[-1]
        if avg > best:
            best = avg
            agent.save(best_path)
        if progress_every and (e + 1) % progress_every == 0:
            log.info("episode %d: reward %.3f avg %.3f mean_b %.3f avail %.2f",
                     e + 1, m.mean_reward, avg, m.mean_b, m.qos_availability)
    agent.save(os.path.join(out_dir, "checkpoint_final.txt"))
    avgs = running_average(rewards, cfg.reward_window)
    _write_csv(os.path.join(out_dir, "reward_curve.csv"), ["episode", "reward", "running_avg"],
               [(m.episode_index, m.mean_reward, a) for m, a in zip(history, avgs)])
    _write_csv(os.path.join(out_dir, "train_metrics.csv"),
               ["episode", "mean_b", "qos_availability", "mean_reward", "noise_sigma"],
               [(m.episode_index, m.mean_b, m.qos_availability, m.mean_reward,
                 cfg.agent.noise_sigma(m.episode_index)) for m in history])
    return agent, history


# --- evaluation -----------------------------------------------------------------

def evaluate_policy(policy, cfg: RunConfig, n_runs=None):
    """Frozen-policy runs over the evaluation trace seeds."""
    n_runs = n_runs or cfg.eval_runs
    return [run_episode(policy, make_env(cfg.sim, seed, cfg.aps_per_episode),
                        cfg.aps_per_episode, r)
            for r, seed in enumerate(episode_seeds(cfg.seed, EVAL, n_runs))]


def action_histogram(actions, width=HIST_BIN):
    n_bins = int(round((B_MAX - B_MIN) / width))
    counts = np.zeros(n_bins)
    for b in actions:
        counts[min(max(int(math.floor((b - B_MIN) / width + 1e-9)), 0), n_bins - 1)] += 1
    mass = counts / counts.sum() if counts.sum() else counts
    return [(round(B_MIN + i * width, 10), round(B_MIN + (i + 1) * width, 10), float(mass[i]))
            for i in range(n_bins)]


def summarize(runs):
    return (float(np.mean([m.mean_b for m in runs])),
            float(np.mean([m.qos_availability for m in runs])))


def evaluate(cfg: RunConfig, n_runs=None, out_dir=None, checkpoint=None, policy=None):
    """Writes eval.csv and action_hist.csv; returns the per-run metrics."""
    out_dir = out_dir or cfg.output_dir
    os.makedirs(out_dir, exist_ok=True)
    policy = policy or build_policy(cfg.policy, cfg, checkpoint)
    runs = evaluate_policy(policy, cfg, n_runs)
    _write_csv(os.path.join(out_dir, "eval.csv"),
               ["run", "mean_b", "qos_availability", "mean_reward"],
               [(m.episode_index, m.mean_b, m.qos_availability, m.mean_reward) for m in runs])
    _write_csv(os.path.join(out_dir, "action_hist.csv"), ["bin_lo", "bin_hi", "density"],
               action_histogram([b for m in runs for b in m.actions]))
    return runs


def sweep_availability(cfg: RunConfig, policies, n_runs=None, out_dir=None):
    """Availability curves.

    ``policies`` maps a policy name to ``(make_policy, weights)`` where
    ``make_policy(w)`` builds the policy for sweep weight ``w``.  Writes
    sweep.csv and returns its rows.
    """
    rows = []
    for name, (make_policy, weights) in policies.items():
        for w in weights:
            mean_b, avail = summarize(evaluate_policy(make_policy(w), cfg, n_runs))
            rows.append((name, float(w), mean_b, avail))
            log.info("sweep %s w=%.3f mean_b=%.4f availability=%.4f", name, w, mean_b, avail)
    if out_dir or cfg.output_dir:
        out_dir = out_dir or cfg.output_dir
        os.makedirs(out_dir, exist_ok=True)
        _write_csv(os.path.join(out_dir, "sweep.csv"),
                   ["policy", "weight", "mean_b", "qos_availability"], rows)
    return rows


def standard_sweep(cfg: RunConfig, checkpoint, *, ddpg_weights, heuristic_weights,
                   fixed_b0, include_oracle=True):
    agent = DdpgAgent.load(checkpoint, cfg.agent)
    t_ref = cfg.policy.params.get("t_ref") if cfg.policy.kind == "heuristic" else None
    policies = {
        "ddpg": (lambda w: ScaledPolicy(DdpgPolicy(agent), w), ddpg_weights),
        "heuristic": (lambda w: HeuristicPolicy(w, t_ref), heuristic_weights),
        "fixed": (lambda w: FixedPolicy(w), fixed_b0),
    }
    if include_oracle:
        policies["oracle"] = (lambda w: OraclePolicy(), [1.0])
    return policies


def mean_b_at_availability(points, target):
    """Interpolated mean bandwidth where a (mean_b, availability) curve first reaches ``target``.

    Points are ordered by increasing mean_b; returns ``None`` if the target is
    never reached.
    """
    pts = sorted(points)
    prev = None
    for b, a in pts:
        if a >= target:
            if prev is None or prev[1] >= a:
                return b
            b0, a0 = prev
            return b0 + (target - a0) * (b - b0) / (a - a0)
        prev = (b, a)
    return None
