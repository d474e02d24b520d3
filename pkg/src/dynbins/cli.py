"""Command-line interface.

Subcommands: run / sweep (experiment from a JSON config), couple (stone-game
coupling verification), attack-greedy, attack-reinsertion, marble, and
dist-check (exact selection-distribution oracle over random load vectors).
Exits nonzero iff an assertion-class invariant fails.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from fractions import Fraction

from . import engine, harness, scripts, stonegame
from .adversaries import greedy_attack, marbles, reinsertion
from .rng import child_rng, child_seed
from .strategies import selection_distribution


def _cmd_run(args) -> int:
    with open(args.config) as fh:
        config = harness.ExperimentConfig.from_json(fh.read())
    if args.out_dir:
        config.out_dir = args.out_dir
    result = harness.run_experiment(config)
    print(json.dumps(result, indent=2, sort_keys=True))
    return 0


def _cmd_couple(args) -> int:
    ok = True
    for idx in range(args.scripts):
        script_seed = child_seed(args.seed, "couple", idx)
        script = scripts.sawtooth_script(
            m_cap=args.m, total_ops=args.ops, amplitude=max(1, args.m // 8), script_seed=script_seed
        )
        rng = child_rng(args.seed, "couple", idx, "draws")
        Q = math.ceil(args.m / args.n + 4 * math.log(args.m))
        for variant, kw in (("fixed", {"Q": Q}), ("generalized", {"delta": Q})):
            trace = stonegame.coupled_run(script, args.n, args.m, variant, rng, **kw)
            status = "ok" if trace.ok else f"VIOLATION {trace.violations[0]}"
            print(f"script {idx} {variant}: steps={trace.steps} halted={trace.halted} {status}")
            ok = ok and trace.ok
    return 0 if ok else 1


def _cmd_attack_greedy(args) -> int:
    config = harness.ExperimentConfig(
        name=f"attack_greedy_{args.mode}",
        strategy={"name": args.strategy},
        script={"generator": "greedy_attack", "params": {"mode": args.mode, "n": args.n}},
        n=args.n,
        m=[args.m],
        trials=args.trials,
        root_seed=args.seed,
        overload_metric="cap",
        out_dir=args.out_dir,
    )
    result = harness.run_experiment(config)
    print(json.dumps(result, indent=2, sort_keys=True))
    return 0


def _cmd_attack_reinsertion(args) -> int:
    params = reinsertion.ReinsertionAttackParams(k=args.k, m=args.m, c_t=args.c_t, q=args.q)
    report = reinsertion.reinsertion_attack_full(params, args.seed)
    legal = report.hash_stable and report.capacity_ok and report.bag_invariants_ok
    print(
        json.dumps(
            {
                "k": args.k,
                "m": args.m,
                "steps": report.steps,
                "blocks": report.blocks,
                "mean_vab": (sum(report.vab_after_insert) / len(report.vab_after_insert)) if report.vab_after_insert else None,
                "max_overload_cap": report.max_overload_cap,
                "corrupted": report.corrupted,
                "legal": legal,
            },
            indent=2,
        )
    )
    return 0 if legal else 1


def _cmd_marble(args) -> int:
    bob = marbles.minimal_slack_bob()
    report = marbles.replay_alice(args.R, args.c, bob)
    print(
        json.dumps(
            {
                "R": args.R,
                "c": args.c,
                "inserts": report.inserts,
                "splits": report.splits,
                "max_value": report.max_value,
                "exceeded_one": report.exceeded_one,
                "final_potential": report.final_potential,
                "min_split_delta": report.min_split_delta,
            },
            indent=2,
        )
    )
    return 0


def _cmd_dist_check(args) -> int:
    rng = child_rng(args.seed, "dist-check")
    for i in range(args.vectors):
        n = rng.choice([2, 4, 8, 16])
        loads = [rng.randrange(20) for _ in range(n)]
        T = Fraction(max(loads) - min(loads)) + Fraction(rng.randrange(1, 40), rng.randrange(1, 8))
        dist = selection_distribution(loads, T)
        assert sum(dist) == 1
    print(f"dist-check: {args.vectors} load vectors, dual-method exact equality held")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="dynbins", description="Dynamic balls-and-bins simulation laboratory")
    sub = parser.add_subparsers(dest="command", required=True)

    for name in ("run", "sweep"):
        p = sub.add_parser(name, help="run an experiment from a JSON config")
        p.add_argument("config")
        p.add_argument("--out-dir")
        p.set_defaults(func=_cmd_run)

    p = sub.add_parser("couple", help="verify the stone-game coupling")
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--m", type=int, default=1024)
    p.add_argument("--ops", type=int, default=100_000)
    p.add_argument("--scripts", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_couple)

    p = sub.add_parser("attack-greedy", help="run the anti-Greedy attack")
    p.add_argument("--mode", choices=["warmup_quarter", "full_half", "general_n"], default="warmup_quarter")
    p.add_argument("--strategy", default="greedy")
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--m", type=int, default=4096)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir")
    p.set_defaults(func=_cmd_attack_greedy)

    p = sub.add_parser("attack-reinsertion", help="run the compiled reinsertion attack")
    p.add_argument("--k", type=int, default=64)
    p.add_argument("--m", type=int, default=2**17)
    p.add_argument("--c-t", type=float, default=1.0)
    p.add_argument("--q", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_attack_reinsertion)

    p = sub.add_parser("marble", help="replay Alice's marble schedule")
    p.add_argument("--R", type=int, default=16)
    p.add_argument("--c", type=int, default=2)
    p.set_defaults(func=_cmd_marble)

    p = sub.add_parser("dist-check", help="exact selection-distribution oracle")
    p.add_argument("--vectors", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_dist_check)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except AssertionError as exc:
        print(f"invariant violated: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
