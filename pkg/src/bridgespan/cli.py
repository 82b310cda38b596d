"""``bridgespan`` command line: analyze, train, eval, oracle.

Exit codes: 0 success, 1 usage or config error, 2 runtime or format error.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import io
import logging
import sys
from pathlib import Path

import numpy as np

from bridgespan.config import ConfigError, RunConfig, load_config
from bridgespan.cost_model import economic_span_closed_form, economic_span_numeric
from bridgespan.dqn_agent import (
    endpoint_coverage,
    follow_policy,
    greedy_policy,
    normalized_images,
    train,
    value_iteration_oracle,
)
from bridgespan.environment import Action, BridgeSpanEnv, write_ppm
from bridgespan.neural import CheckpointFormatError, NetworkSpec, load_checkpoint, save_checkpoint

log = logging.getLogger("bridgespan")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2

CHECKPOINT_NAME = "checkpoint.bsqn"
METRICS_NAME = "metrics.csv"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _output_dir(config: RunConfig, name: str | None) -> Path:
    name = name or config.name or datetime.datetime.now().strftime("%Y%m%d-%H%M%S")
    return Path(config.output_dir) / name


def _network_spec(env: BridgeSpanEnv) -> NetworkSpec:
    cfg = env.config
    return NetworkSpec.q_network(cfg.cell_pixels, cfg.num_materials, env.num_columns, env.num_actions)


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    path.write_text(buf.getvalue())


# commands ----------------------------------------------------------------------


def cmd_analyze(config: RunConfig, out: Path | None = None) -> int:
    env = BridgeSpanEnv(config.env)
    lo, hi = config.env.min_span / 10, config.env.max_span * 2
    rows = []
    print(f"{'material':<10} {'closed (m)':>11} {'numeric (m)':>12} {'cost (yuan/m2)':>15} {'balance':>8}")
    for p in config.env.materials:
        closed = economic_span_closed_form(p)
        numeric = economic_span_numeric(p, lo, hi, 1e-6)
        rows.append([p.name, closed.span_star, numeric.span_star, closed.unit_cost_star, closed.balance_ratio_star])
        print(f"{p.name:<10} {closed.span_star:>11.4f} {numeric.span_star:>12.4f} "
              f"{closed.unit_cost_star:>15.1f} {closed.balance_ratio_star:>8.4f}")
    best = min(rows, key=lambda r: r[3])
    print(f"winner: {best[0]}, {best[1]:.1f} m, {best[3]:.0f} yuan/m2")
    opt = env.optimal_state()
    row, span = env.state_to_grid(opt)
    print(f"grid winner: {config.env.materials[row].name}, {span} m, state {opt} "
          f"(row {row}, column {opt % env.num_columns}), {env.cost(opt):.1f} yuan/m2")
    if out is not None:
        from bridgespan.plotting import plot_cost_curves

        out.mkdir(parents=True, exist_ok=True)
        _write_csv(out / "analysis.csv",
                   ["material", "span_closed_form", "span_numeric", "unit_cost", "balance_ratio"],
                   [[r[0]] + [f"{v:.10g}" for v in r[1:]] for r in rows])
        plot_cost_curves(config.env.materials, out / "cost_curves.png",
                         np.linspace(config.env.min_span, min(config.env.max_span, 200), 400))
        print(f"wrote {out / 'analysis.csv'} and {out / 'cost_curves.png'}")
    return EXIT_OK


def cmd_train(config: RunConfig, name: str | None = None) -> int:
    from bridgespan.plotting import plot_loss_curve

    out = _output_dir(config, name)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise RuntimeError(f"cannot create output directory {out}: {exc.strerror}") from None
    result = train(config.env, config.train, progress=True)
    save_checkpoint(result.params, out / CHECKPOINT_NAME)
    result.metrics.write_csv(out / METRICS_NAME)
    plot_loss_curve(result.metrics, out / "loss_curve.png")

    env = BridgeSpanEnv(config.env)
    policy = greedy_policy(result.params, normalized_images(env))
    _, coverage = endpoint_coverage(policy, env)
    hits = round(coverage * env.num_states)
    print(f"wrote {out / CHECKPOINT_NAME}, {out / METRICS_NAME}, {out / 'loss_curve.png'}")
    print(f"trained {len(result.metrics)} episodes in {result.seconds:.1f} s; "
          f"greedy endpoint = optimal state {env.optimal_state()} from {hits}/{env.num_states} "
          f"starts ({coverage:.3f})")
    return EXIT_OK


def cmd_eval(config: RunConfig, checkpoint: Path, start: int | None = None, out: Path | None = None) -> int:
    from bridgespan.plotting import plot_trajectories

    env = BridgeSpanEnv(config.env)
    if start is not None:
        env.state_to_grid(start)
    params = load_checkpoint(checkpoint, _network_spec(env))
    policy = greedy_policy(params, normalized_images(env))
    next_state, _ = env.transition_table()
    goal = env.optimal_state()
    out = out or checkpoint.parent / "eval"
    traj_dir = out / "trajectories"
    traj_dir.mkdir(parents=True, exist_ok=True)

    starts = [start] if start is not None else list(range(env.num_states))
    rows, images, labels = [], [], []
    for s in starts:
        trace = follow_policy(policy, next_state, s, env.config.max_steps)
        # drop the repeated tail once the agent stops moving
        while len(trace) > 1 and trace[-1] == trace[-2]:
            trace.pop()
        image = env.render_trajectory(trace)
        write_ppm(image, traj_dir / f"start_{s:03d}.ppm")
        rows.append([s, trace[-1], len(trace) - 1, int(trace[-1] == goal)])
        if len(starts) <= 8 or s % (env.num_states // 8) == 0:
            images.append(image)
            labels.append(str(s))
    _write_csv(out / "endpoints.csv", ["start", "endpoint", "moves", "reached_optimum"], rows)
    plot_trajectories(images, labels, out / "policy_test.png")

    hits = sum(r[3] for r in rows)
    for r in rows:
        print(f"start {r[0]:3d} -> endpoint {r[1]:3d} in {r[2]:3d} moves")
    holds = next_state[goal, policy[goal]] == goal
    print(f"endpoint = optimal state {goal} from {hits}/{len(rows)} starts"
          f"{'' if holds else ' (policy does not hold the optimum)'}")
    print(f"wrote {len(rows)} trajectory images to {traj_dir}")
    return EXIT_OK


def cmd_oracle(config: RunConfig) -> int:
    env = BridgeSpanEnv(config.env)
    oracle = value_iteration_oracle(env, config.train.gamma, config.oracle_tol, config.train.reward_scale)
    goal = env.optimal_state()
    row, span = env.state_to_grid(goal)
    _, coverage = endpoint_coverage(oracle.policy, env, goal)
    hits = round(coverage * env.num_states)
    print(f"optimal state: {goal} ({config.env.materials[row].name}, {span} m), "
          f"cost {env.cost(goal):.1f} yuan/m2")
    print(f"V({goal}) = {oracle.values[goal]:.6f} (gamma {config.train.gamma}, "
          f"reward scale {config.train.reward_scale:g}, {oracle.iterations} sweeps)")
    print(f"greedy action at optimum: {Action(int(oracle.policy[goal])).name}")
    print(f"oracle policy endpoint coverage: {hits}/{env.num_states}")
    return EXIT_OK


# entry point -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bridgespan", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("analyze", help="closed-form and numeric economic spans")
    p.add_argument("--config", type=Path)
    p.add_argument("--out", type=Path, help="also write analysis.csv and cost_curves.png here")

    p = sub.add_parser("train", help="train the DQN agent")
    p.add_argument("--config", type=Path)
    p.add_argument("--name", help="output subdirectory name (default: timestamp)")

    p = sub.add_parser("eval", help="greedy rollouts of a trained checkpoint")
    p.add_argument("--config", type=Path)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--start", type=int, help="single start state (default: all)")
    p.add_argument("--out", type=Path, help="output directory (default: <checkpoint dir>/eval)")

    p = sub.add_parser("oracle", help="value-iteration ground truth")
    p.add_argument("--config", type=Path)
    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        config = load_config(args.config)
        if args.command in ("train", "eval"):
            env = BridgeSpanEnv(config.env)
            _network_spec(env)
            if args.command == "eval" and args.start is not None:
                env.state_to_grid(args.start)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except (UsageError, ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    logging.basicConfig(level=logging.INFO if args.verbose or args.command == "train" else logging.WARNING,
                        format="%(message)s", stream=sys.stderr)
    try:
        if args.command == "analyze":
            return cmd_analyze(config, args.out)
        if args.command == "train":
            return cmd_train(config, args.name)
        if args.command == "eval":
            return cmd_eval(config, args.checkpoint, args.start, args.out)
        return cmd_oracle(config)
    except (CheckpointFormatError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
