"""Command-line entry points: move inspection, training, evaluation,
serving, and a numerics self-check."""

from __future__ import annotations

import argparse
import asyncio
import json
import random
import sys

import numpy as np


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="guandan",
        description="GuanDan engine, trainers, arena and table server",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("moves", help="list legal actions for a hand")
    p.add_argument("--hand", required=True,
                   help='space-separated card tokens, e.g. "H2 S3 S3 RJ"')
    p.add_argument("--level", type=int, default=0,
                   help="level rank 0..12 (0 means twos are the level)")
    p.add_argument("--beat", default=None,
                   help='combo to beat, e.g. "Pair:KK" (omit when leading)')
    p.add_argument("--oracle", action="store_true",
                   help="cross-check against the brute-force enumerator")
    p.set_defaults(func=cmd_moves)

    p = sub.add_parser("deal", help="deal a seeded round and report hands")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--level", type=int, default=0)
    p.set_defaults(func=cmd_deal)

    p = sub.add_parser("train-dmc", help="train the Q network by self-play")
    p.add_argument("--config", default=None, help="YAML config path")
    _train_overrides(p)
    p.set_defaults(func=cmd_train_dmc)

    p = sub.add_parser("train-ppo",
                       help="train the candidate policy from a Q checkpoint")
    p.add_argument("--config", default=None)
    p.add_argument("--dmc-ckpt", "--dmc-checkpoint", dest="dmc_checkpoint",
                   default=None,
                   help="frozen Q checkpoint that shortlists candidates")
    p.add_argument("--k", type=int, default=None,
                   help="candidate count (overrides the config)")
    _train_overrides(p)
    p.set_defaults(func=cmd_train_ppo)

    p = sub.add_parser("eval", help="team-vs-team match")
    p.add_argument("--team-a", required=True, help="agent spec")
    p.add_argument("--team-b", required=True, help="agent spec")
    p.add_argument("--games", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="write the JSON report here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("rollout",
                       help="play one logged episode between agents")
    p.add_argument("--seats", default="greedy",
                   help="one agent spec for all seats or four comma-separated")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-rounds", type=int, default=50)
    p.add_argument("--out", default=None,
                   help="episode log path (default stdout)")
    p.set_defaults(func=cmd_rollout)

    p = sub.add_parser("case-study",
                       help="inspect one decision of a recorded episode")
    p.add_argument("--log", required=True, help="episode log file")
    p.add_argument("--decision", type=int, required=True)
    p.add_argument("--agent", default="greedy", help="agent spec to consult")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="write the panel JSON here")
    p.set_defaults(func=cmd_case_study)

    p = sub.add_parser("serve", help="host a live table")
    p.add_argument("--bind", default="127.0.0.1:8765")
    p.add_argument("--seats", required=True,
                   help="comma-separated seat specs, e.g. "
                        "human,dmc:q.dzck,human,dmc:q.dzck")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--static", default=None, help="static files directory")
    p.add_argument("--games", type=int, default=None)
    p.add_argument("--act-timeout", type=float, default=None,
                   help="seconds before a silent human seat falls back to a bot")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("serve-learner", help="learner process over TCP")
    p.add_argument("--config", required=True)
    p.add_argument("--tcp", required=True, help="host:port to bind")
    p.add_argument("--total-batches", type=int, required=True)
    p.set_defaults(func=cmd_serve_learner)

    p = sub.add_parser("serve-actors", help="actor workers over TCP")
    p.add_argument("--config", required=True)
    p.add_argument("--tcp", required=True, help="learner host:port")
    p.set_defaults(func=cmd_serve_actors)

    p = sub.add_parser("selfcheck",
                       help="quick numerics and checkpoint round-trip check")
    p.set_defaults(func=cmd_selfcheck)

    args = parser.parse_args(argv)
    return args.func(args)


def _train_overrides(p):
    p.add_argument("--actors", type=int, default=None)
    p.add_argument("--episodes", type=int, default=None,
                   help="episodes per actor")
    p.add_argument("--out", default=None, help="checkpoint directory")
    p.add_argument("--metrics", default=None, help="metrics JSONL path")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threaded", action="store_true",
                   help="free-running actor threads instead of the "
                        "deterministic round-robin driver")


def _load_runtime_config(args, algo):
    from .config import config_from_dict, load_config
    cfg = load_config(args.config) if args.config else config_from_dict({})
    cfg.algo = algo
    if args.actors is not None:
        cfg.n_actors = args.actors
    if args.episodes is not None:
        cfg.episodes_per_actor = args.episodes
    if args.out is not None:
        cfg.checkpoint_dir = args.out
    if args.metrics is not None:
        cfg.metrics_path = args.metrics
    if args.seed is not None:
        cfg.seed = args.seed
        cfg.dmc.seed = args.seed
        cfg.ppo.seed = args.seed
    if args.threaded:
        cfg.sync = False
    return cfg


def cmd_moves(args) -> int:
    from .cards import CardSet, combo_str_full, parse_combo
    from .movegen import legal_actions, oracle_legal_actions

    hand = CardSet.from_tokens(args.hand)
    beat = parse_combo(args.beat, args.level) if args.beat else None
    moves = legal_actions(hand, beat, args.level)
    for c in moves:
        print(combo_str_full(c))
    print(f"-- {len(moves)} legal actions", file=sys.stderr)
    if args.oracle:
        oracle = oracle_legal_actions(hand, beat, args.level)
        fast = {c.identity() for c in moves}
        slow = {c.identity() for c in oracle}
        if fast != slow:
            print("MISMATCH with oracle", file=sys.stderr)
            return 1
        print("oracle agrees", file=sys.stderr)
    return 0


def cmd_deal(args) -> int:
    from .cards import card_str
    from .engine import deal
    from .movegen import legal_leads

    state = deal(random.Random(args.seed), args.level)
    for seat, hand in enumerate(state.hands):
        tokens = " ".join(card_str(i) for i in hand.indices())
        n = len(legal_leads(hand, args.level))
        print(f"seat {seat} ({n} opening actions): {tokens}")
    return 0


def cmd_train_dmc(args) -> int:
    from .runtime import run_training

    cfg = _load_runtime_config(args, "dmc")
    stats = run_training(cfg)
    print(json.dumps({
        "episodes": stats.episodes, "updates": stats.updates,
        "receptions": stats.receptions,
        "checkpoints": stats.checkpoints,
        "wall_seconds": round(stats.wall_seconds, 1),
    }, indent=2))
    return 0


def cmd_train_ppo(args) -> int:
    from .runtime import run_training

    cfg = _load_runtime_config(args, "ppo")
    if args.dmc_checkpoint is not None:
        cfg.dmc_checkpoint = args.dmc_checkpoint
    if args.k is not None:
        cfg.ppo.k = args.k
    if cfg.dmc_checkpoint is None:
        print("train-ppo needs --dmc-ckpt (or dmc_checkpoint in the config)",
              file=sys.stderr)
        return 2
    stats = run_training(cfg)
    print(json.dumps({
        "episodes": stats.episodes, "updates": stats.updates,
        "receptions": stats.receptions,
        "checkpoints": stats.checkpoints,
        "wall_seconds": round(stats.wall_seconds, 1),
    }, indent=2))
    return 0


def cmd_eval(args) -> int:
    from .agents import parse_agent_spec
    from .arena import play_match

    team_a = [parse_agent_spec(args.team_a, seed=args.seed + 1),
              parse_agent_spec(args.team_a, seed=args.seed + 2)]
    team_b = [parse_agent_spec(args.team_b, seed=args.seed + 3),
              parse_agent_spec(args.team_b, seed=args.seed + 4)]
    report = play_match(team_a, team_b, args.games, seed=args.seed)
    text = json.dumps(report.to_json(), indent=2)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(text + "\n")
    print(text)
    return 0


def cmd_rollout(args) -> int:
    from . import features
    from .agents import parse_agent_spec
    from .engine import Episode

    specs = args.seats.split(",")
    if len(specs) == 1:
        specs = specs * 4
    if len(specs) != 4:
        print("--seats wants one agent spec or four", file=sys.stderr)
        return 2
    agents = [parse_agent_spec(s, seed=args.seed * 7 + i)
              for i, s in enumerate(specs)]
    ep = Episode(seed=args.seed, max_rounds=args.max_rounds, record_log=True)
    while not ep.over:
        view = features.view_for(ep.seat_to_act, ep.round, ep.episode)
        ep.play(agents[ep.seat_to_act].decide(view, ep.legal_actions()))
    text = "\n".join(json.dumps(e) for e in ep.log)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(text + "\n")
        print(f"{len(ep.log)} events over {len(ep.round_records)} rounds "
              f"-> {args.out}", file=sys.stderr)
    else:
        print(text)
    return 0


def cmd_case_study(args) -> int:
    from .agents import parse_agent_spec
    from .arena import dump_case_study

    with open(args.log, "r", encoding="utf-8") as f:
        log_text = f.read()
    agent = parse_agent_spec(args.agent, seed=args.seed)
    panel = dump_case_study(log_text, agent, args.decision)
    text = json.dumps(panel, indent=2)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(text + "\n")
    print(text)
    return 0


def cmd_serve(args) -> int:
    from .table_service import host_table

    host, _, port = args.bind.rpartition(":")
    seats = args.seats.split(",")
    print(f"table on {args.bind}: seats {seats}", file=sys.stderr)
    asyncio.run(host_table(
        seats, host=host or "127.0.0.1", port=int(port), seed=args.seed,
        static_dir=args.static, n_games=args.games,
        act_timeout=args.act_timeout))
    return 0


def cmd_serve_learner(args) -> int:
    from .config import load_config
    from .runtime import serve_learner

    cfg = load_config(args.config)
    stats = serve_learner(cfg, args.tcp, total_batches=args.total_batches)
    print(json.dumps({"updates": stats.updates,
                      "trajectories": stats.trajectories_received,
                      "checkpoints": stats.checkpoints}, indent=2))
    return 0


def cmd_serve_actors(args) -> int:
    from .config import load_config
    from .runtime import serve_actors

    cfg = load_config(args.config)
    serve_actors(cfg, args.tcp)
    return 0


def cmd_selfcheck(args) -> int:
    import tempfile

    from .net import Mlp, MlpSpec, RmsProp, load_checkpoint, save_checkpoint

    rng = np.random.default_rng(0)
    spec = MlpSpec(input_dim=7, hidden=(6, 5), heads=(1,), kind="q")
    net = Mlp(spec, seed=1, dtype=np.float64)
    X = rng.normal(size=(4, 7))
    targets = rng.normal(size=4)

    def loss():
        outs, _ = net.forward(X)
        e = outs[0][:, 0] - targets
        return float(np.mean(e * e))

    outs, acts = net.forward(X)
    e = outs[0][:, 0] - targets
    grads = net.backward(acts, [(2.0 / len(e)) * e[:, None]])
    worst = 0.0
    for li, g in enumerate(grads):
        flat = net.params[li].ravel()
        for j in range(flat.size):
            h = 1e-6
            orig = flat[j]
            flat[j] = orig + h
            lp = loss()
            flat[j] = orig - h
            lm = loss()
            flat[j] = orig
            num = (lp - lm) / (2 * h)
            worst = max(worst, abs(num - g.ravel()[j]) /
                        max(abs(num), abs(g.ravel()[j]), 1e-8))
    ok = worst < 1e-4
    print(f"gradient check: worst rel err {worst:.2e} "
          f"{'OK' if ok else 'FAIL'}")

    net32 = Mlp(spec, seed=2)
    opt = RmsProp(net32.params, lr=1e-3)
    with tempfile.TemporaryDirectory() as td:
        path = f"{td}/ck.dzck"
        save_checkpoint(path, net32, opt, step=3)
        loaded, lopt, meta = load_checkpoint(path, expect_kind="q")
        same = all(np.array_equal(a, b)
                   for a, b in zip(net32.params, loaded.params))
    print(f"checkpoint round-trip: {'OK' if same else 'FAIL'}")
    return 0 if ok and same else 1


def nn_main(argv=None) -> int:
    """`nn selfcheck`: the numerics check under its own entry point."""
    argv = sys.argv[1:] if argv is None else list(argv)
    if argv == ["selfcheck"]:
        return main(["selfcheck"])
    print("usage: nn selfcheck", file=sys.stderr)
    return 2


if __name__ == "__main__":
    sys.exit(main())
