"""Command line entry point: ``ranslice {trace-gen,train,eval,sweep,oracle}``."""

import argparse
import logging
import os
import sys

from .baselines import PolicySpec
from .harness import (RunConfig, build_policy, evaluate, load_run_config, standard_sweep,
                      summarize, sweep_availability, train)
from .sim.mobility import save_mobility_trace, synth_trace


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _run_config(args) -> RunConfig:
    cfg = load_run_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg.seed = args.seed
        cfg.sim.seed = args.seed
    if args.out:
        cfg.output_dir = args.out
    for name in ("episodes", "aps_per_episode", "eval_runs"):
        value = getattr(args, name, None)
        if value is not None:
            setattr(cfg, name, value)
    return cfg


def cmd_trace_gen(args):
    cfg = _run_config(args)
    trace = synth_trace(args.vehicles or cfg.sim.n_vehicles_mean, args.horizon,
                        cfg.sim.vehicle_speed if args.speed is None else args.speed,
                        cfg.seed, radius=cfg.sim.cell_radius)
    os.makedirs(cfg.output_dir, exist_ok=True)
    path = os.path.join(cfg.output_dir, "trace.csv")
    save_mobility_trace(trace, path)
    print(f"wrote {path} ({len(trace.samples)} samples, mean "
          f"{trace.attached_counts().mean():.1f} vehicles)")


def cmd_train(args):
    cfg = _run_config(args)
    _, history = train(cfg)
    print(f"trained {len(history)} episodes -> {cfg.output_dir}")


def _policy_from_args(args, cfg):
    if args.policy:
        params = {}
        if args.policy == "fixed":
            params["b0"] = args.b0
        elif args.policy == "heuristic":
            params["weight"] = args.weight
        cfg.policy = PolicySpec(args.policy, params)
    return build_policy(cfg.policy, cfg, args.checkpoint)


def cmd_eval(args):
    cfg = _run_config(args)
    policy = _policy_from_args(args, cfg)
    runs = evaluate(cfg, out_dir=cfg.output_dir, policy=policy)
    mean_b, avail = summarize(runs)
    print(f"{policy.kind}: mean_b={mean_b:.4f} qos_availability={avail:.4f} over {len(runs)} runs")


def cmd_oracle(args):
    cfg = _run_config(args)
    cfg.policy = PolicySpec("oracle", {"grid_step": args.grid_step})
    runs = evaluate(cfg, out_dir=cfg.output_dir)
    mean_b, avail = summarize(runs)
    print(f"oracle: mean_b={mean_b:.4f} qos_availability={avail:.4f} over {len(runs)} runs")


def cmd_sweep(args):
    cfg = _run_config(args)
    policies = standard_sweep(cfg, args.checkpoint, ddpg_weights=_floats(args.ddpg_weights),
                              heuristic_weights=_floats(args.heuristic_weights),
                              fixed_b0=_floats(args.fixed_b0), include_oracle=args.oracle)
    rows = sweep_availability(cfg, policies, out_dir=cfg.output_dir)
    for name, w, mean_b, avail in rows:
        print(f"{name:9s} w={w:.3f} mean_b={mean_b:.4f} availability={avail:.4f}")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run configuration JSON")
    common.add_argument("--seed", type=int, help="master seed (u64)")
    common.add_argument("--out", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="ranslice", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("trace-gen", parents=[common], help="write a synthetic mobility trace")
    s.add_argument("--vehicles", type=float, help="mean attached vehicles")
    s.add_argument("--horizon", type=float, default=100.0, help="seconds")
    s.add_argument("--speed", type=float, help="m/s")
    s.set_defaults(func=cmd_trace_gen)

    s = sub.add_parser("train", parents=[common], help="train the DDPG tenant")
    s.add_argument("--episodes", type=int)
    s.add_argument("--aps-per-episode", dest="aps_per_episode", type=int)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", parents=[common], help="evaluate a frozen policy")
    s.add_argument("--policy", choices=["fixed", "heuristic", "ddpg", "oracle"])
    s.add_argument("--checkpoint")
    s.add_argument("--b0", type=float, default=0.9)
    s.add_argument("--weight", type=float, default=1.0)
    s.add_argument("--runs", dest="eval_runs", type=int)
    s.add_argument("--aps-per-episode", dest="aps_per_episode", type=int)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("sweep", parents=[common], help="QoS-availability curves")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--ddpg-weights", default="0.8,0.9,1.0,1.1,1.2,1.4")
    s.add_argument("--heuristic-weights", default="2,3,4,5,6")
    s.add_argument("--fixed-b0", default="0.3,0.35,0.4,0.45,0.5,0.6")
    s.add_argument("--no-oracle", dest="oracle", action="store_false")
    s.add_argument("--runs", dest="eval_runs", type=int)
    s.add_argument("--aps-per-episode", dest="aps_per_episode", type=int)
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("oracle", parents=[common], help="evaluate the per-AP oracle")
    s.add_argument("--grid-step", type=float, default=0.01)
    s.add_argument("--runs", dest="eval_runs", type=int)
    s.add_argument("--aps-per-episode", dest="aps_per_episode", type=int)
    s.set_defaults(func=cmd_oracle)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    args.func(args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
