"""Command-line pipeline: world -> corpus -> pretrain -> train -> evaluate.

Each command writes its artifacts plus a manifest into one output directory.
Outputs default to subdirectories of the artifact root (env var MADPL_LAB_DIR,
else ./madpl-lab); `rerun --manifest` replays a recorded command. Exit codes:
0 ok, 2 bad config or arguments, 3 missing upstream artifact, 4 malformed
metrics CSV.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from os import environ
from pathlib import Path

import numpy as np

from .corpus import read_corpus
from .errors import (
    MadplLabError,
    MalformedCsv,
    MissingArtifact,
    ParseError,
    SchemaError,
)
from .manifest import (
    RunManifest,
    describe_tree,
    read_manifest,
    utc_now,
    write_manifest,
)
from .metrics import format_report_table, report_csv, summarize
from .nets import load_nets, save_nets
from .ontology import goal_weights_for, sample_goal
from .policy import DialogPolicy, pretrain
from .rule_agents import RuleSystemAgent, RuleUserAgent, generate_corpus
from .session import PolicySystemAgent, PolicyUserAgent, rollout_records
from .trainer import ALGOS, HISTORY_COLUMNS, TrainConfig, history_csv, train
from .world import (
    DEFAULT_CONFIG,
    load_world,
    read_goals,
    world_from_config,
    write_goals,
    write_world_files,
)

EVAL_GOALS_FILE = "eval-goals.jsonl"
RULE_USER_NAMES = ("rule", "rule-user")
RULE_SYS_NAMES = ("rule", "rule-sys", "rule-system")


def artifact_root():
    return Path(environ.get("MADPL_LAB_DIR", "madpl-lab"))


def _slug(text):
    return re.sub(r"[^A-Za-z0-9._-]+", "-", text).strip("-") or "run"


def resolve_out(command, opts):
    """Output directory for a command: --out, else a root subdirectory."""
    if opts.get("out"):
        return Path(opts["out"])
    root = artifact_root()
    if command == "train":
        return root / f"train-{opts['algo']}-seed{opts['seed']}"
    if command == "evaluate":
        return root / ("eval-" + _slug(opts["pair"]))
    return root / {
        "gen-world": "world",
        "gen-corpus": "corpus",
        "pretrain": "pretrain",
        "report": "report",
    }[command]


def _finish(command, opts, seed, started, out_dir, outputs):
    manifest = RunManifest(
        command=command,
        options=opts,
        seed=int(seed),
        git_describe=describe_tree(),
        created_at=started,
        finished_at=utc_now(),
        outputs=list(outputs),
    )
    write_manifest(out_dir, manifest)


def _load_world_checked(world_dir):
    world_dir = Path(world_dir)
    if not (world_dir / "world-config.json").is_file():
        raise MissingArtifact(
            f"no world at {world_dir} (expected world-config.json; "
            "run gen-world first)"
        )
    return load_world(world_dir)


def _require_workers_one(opts):
    if opts.get("workers", 1) != 1:
        raise SchemaError("only --workers 1 is implemented")


def _fresh_policies(layout, seed):
    user = DialogPolicy("user", layout.user_space, layout.user_dim,
                        rng=np.random.default_rng([seed, 6]))
    system = DialogPolicy("system", layout.sys_space, layout.sys_dim,
                          rng=np.random.default_rng([seed, 7]))
    return user, system


def _load_policy_net(ckpt_path, role, policy):
    """Replace a policy's net with the named net from a checkpoint."""
    ckpt_path = Path(ckpt_path)
    if not ckpt_path.is_file():
        raise MissingArtifact(f"no checkpoint at {ckpt_path}")
    nets, _ = load_nets(ckpt_path)
    if role not in nets:
        raise SchemaError(
            f"{ckpt_path} has no '{role}' net (found: {sorted(nets)})"
        )
    net = nets[role]
    if net.in_dim != policy.net.in_dim or net.out_dim != policy.net.out_dim:
        raise SchemaError(
            f"{ckpt_path} '{role}' net is {net.in_dim}->{net.out_dim}, "
            f"world needs {policy.net.in_dim}->{policy.net.out_dim}"
        )
    policy.net = net


def _critic_nets(algo, critic):
    """Name a train result's critic net(s) for checkpointing."""
    if algo == "madpl":
        return {f"critic.{name}": getattr(critic, name)
                for name in type(critic).NET_NAMES}
    if algo == "iterdpl":
        return {f"critic.{role}": critic[role] for role in ("user", "system")}
    return {"critic.value": critic}


def cmd_gen_world(opts):
    started = utc_now()
    if opts.get("config"):
        config_path = Path(opts["config"])
        if not config_path.is_file():
            raise SchemaError(f"config file not found: {config_path}")
        try:
            config = json.loads(config_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ParseError(f"config {config_path}: {exc}") from exc
    else:
        config = json.loads(json.dumps(DEFAULT_CONFIG))
    if opts.get("seed") is not None:
        config["seed"] = opts["seed"]
    world = world_from_config(config)
    out = Path(opts["out"])
    write_world_files(world, out)
    rng = np.random.default_rng([world.seed, 0xE7A1])
    weights = goal_weights_for(world.ontology)
    goals = [sample_goal(world.ontology, world.db, rng, weights)
             for _ in range(opts["eval_goals"])]
    write_goals(out / EVAL_GOALS_FILE, goals)
    _finish("gen-world", opts, world.seed, started, out,
            ["world-config.json", "db.jsonl", "state-layout.txt",
             EVAL_GOALS_FILE])
    print(f"world written to {out} "
          f"(sys_dim={world.layout.sys_dim}, user_dim={world.layout.user_dim}, "
          f"{len(goals)} eval goals)")
    return 0


def cmd_gen_corpus(opts):
    started = utc_now()
    world = _load_world_checked(opts["world"])
    out = Path(opts["out"])
    out.mkdir(parents=True, exist_ok=True)
    path = out / "corpus.txt"
    _, success, _ = generate_corpus(
        world, opts["n_dialogs"], opts["seed"], path=path,
        max_turns=opts["max_turns"],
    )
    _finish("gen-corpus", opts, opts["seed"], started, out, ["corpus.txt"])
    rate = sum(success.values()) / len(success) if success else 0.0
    print(f"{opts['n_dialogs']} dialogs written to {path} "
          f"(rule-pair success {rate:.3f})")
    return 0


def cmd_pretrain(opts):
    started = utc_now()
    world = _load_world_checked(opts["world"])
    corpus_path = Path(opts["corpus"])
    if not corpus_path.is_file():
        raise MissingArtifact(f"no corpus at {corpus_path}")
    corpus = read_corpus(corpus_path)
    layout = world.layout
    if (corpus.user.states.shape[1] != layout.user_dim
            or corpus.system.states.shape[1] != layout.sys_dim):
        raise SchemaError(
            f"corpus state dims ({corpus.system.states.shape[1]} sys, "
            f"{corpus.user.states.shape[1]} user) do not match the world "
            f"({layout.sys_dim} sys, {layout.user_dim} user)"
        )
    user, system = _fresh_policies(layout, opts["seed"])
    rep_u = pretrain(user, corpus.user, opts["epochs"],
                     batch_size=opts["batch"], lr=opts["lr"],
                     beta=opts["beta_user"], seed=opts["seed"])
    rep_s = pretrain(system, corpus.system, opts["epochs"],
                     batch_size=opts["batch"], lr=opts["lr"],
                     beta=opts["beta_sys"], seed=opts["seed"])
    out = Path(opts["out"])
    out.mkdir(parents=True, exist_ok=True)
    save_nets(out / "policies.bin", {"user": user.net, "system": system.net},
              meta={"kind": "sl", "world_seed": world.seed,
                    "user_f1": rep_u.final_f1, "sys_f1": rep_s.final_f1})
    lines = ["epoch,user_f1,sys_f1,user_loss,sys_loss"]
    for i in range(opts["epochs"]):
        lines.append(
            f"{i + 1},{rep_u.heldout_f1[i]:.6g},{rep_s.heldout_f1[i]:.6g},"
            f"{rep_u.train_loss[i]:.6g},{rep_s.train_loss[i]:.6g}"
        )
    (out / "pretrain-history.csv").write_text("\n".join(lines) + "\n")
    _finish("pretrain", opts, opts["seed"], started, out,
            ["policies.bin", "pretrain-history.csv"])
    print(f"pretrained policies written to {out} "
          f"(held-out F1 user {rep_u.final_f1:.3f}, "
          f"system {rep_s.final_f1:.3f})")
    return 0


def cmd_train(opts):
    started = utc_now()
    _require_workers_one(opts)
    world = _load_world_checked(opts["world"])
    seed = opts["seed"]
    user, system = _fresh_policies(world.layout, seed)
    if opts.get("init"):
        _load_policy_net(opts["init"], "user", user)
        _load_policy_net(opts["init"], "system", system)
    config = TrainConfig(
        gamma=opts["gamma"], batch_size=opts["batch"],
        lr_value=opts["lr_value"], lr_sys=opts["lr_sys"],
        lr_user=opts["lr_user"], target_sync_every=opts["target_sync"],
        window=opts["window"], max_turns=opts["max_turns"],
        eval_every=opts["eval_every"], eval_goals=opts["eval_goals"],
        phase_len=opts["phase_len"],
    )
    out = Path(opts["out"])
    ckpt_dir = out / "checkpoints"
    ckpt_dir.mkdir(parents=True, exist_ok=True)

    def checkpoint(iteration):
        save_nets(ckpt_dir / f"ckpt-{iteration:06d}.bin",
                  {"user": user.net, "system": system.net},
                  meta={"algo": opts["algo"], "iteration": iteration})

    result = train(world, opts["algo"], user, system,
                   episodes=opts["episodes"], seed=seed, config=config,
                   verbose=opts["verbose"], checkpoint=checkpoint)
    (out / "metrics.csv").write_text(history_csv(result.history))
    save_nets(out / "policies.bin",
              {"user": user.net, "system": system.net,
               **_critic_nets(result.algo, result.critic)},
              meta={"kind": "rl", "algo": result.algo, "seed": seed,
                    "episodes": result.episodes, "world_seed": world.seed})
    _finish("train", opts, seed, started, out, ["metrics.csv", "policies.bin"])
    final = result.history[-1]
    print(f"{result.algo}: {result.episodes} episodes, final greedy success "
          f"{final['success']:.3f} (inform F1 {final['inform_f1']:.3f}, "
          f"match {final['match']:.3f}); artifacts in {out}")
    return 0


def _agent_pair(pair, world):
    if ":" not in pair:
        raise SchemaError(
            f"--pair must look like USER:SYSTEM, got {pair!r} "
            "(each side 'rule' or a checkpoint path)"
        )
    user_part, sys_part = pair.split(":", 1)
    layout = world.layout
    if user_part in RULE_USER_NAMES:
        user_agent = RuleUserAgent(world.db)
    else:
        policy = DialogPolicy("user", layout.user_space, layout.user_dim)
        _load_policy_net(user_part, "user", policy)
        user_agent = PolicyUserAgent(policy, "greedy")
    if sys_part in RULE_SYS_NAMES:
        sys_agent = RuleSystemAgent(world)
    else:
        policy = DialogPolicy("system", layout.sys_space, layout.sys_dim)
        _load_policy_net(sys_part, "system", policy)
        sys_agent = PolicySystemAgent(policy, "greedy")
    return user_agent, sys_agent


def cmd_evaluate(opts):
    started = utc_now()
    _require_workers_one(opts)
    world = _load_world_checked(opts["world"])
    goals_path = (Path(opts["goals"]) if opts.get("goals")
                  else Path(opts["world"]) / EVAL_GOALS_FILE)
    if not goals_path.is_file():
        raise MissingArtifact(f"no goal file at {goals_path}")
    goals = read_goals(goals_path)
    if opts.get("n_goals"):
        goals = goals[:opts["n_goals"]]
    if not goals:
        raise SchemaError(f"{goals_path} holds no goals")
    user_agent, sys_agent = _agent_pair(opts["pair"], world)
    records = rollout_records(world, goals, user_agent, sys_agent,
                              max_turns=opts["max_turns"])
    report = summarize(records, world)
    named = {opts["pair"]: report}
    out = Path(opts["out"])
    out.mkdir(parents=True, exist_ok=True)
    (out / "eval-report.csv").write_text(report_csv(named))
    table = format_report_table(named)
    (out / "eval-report.txt").write_text(table)
    _finish("evaluate", opts, 0, started, out,
            ["eval-report.csv", "eval-report.txt"])
    print(table, end="")
    return 0


def read_metrics_csv(path):
    """Parse a training metrics CSV into row dicts; strict about shape."""
    path = Path(path)
    if not path.is_file():
        raise MissingArtifact(f"no metrics CSV at {path}")
    lines = path.read_text(encoding="utf-8").strip().split("\n")
    if lines[0].split(",") != list(HISTORY_COLUMNS):
        raise MalformedCsv(f"{path}: unexpected header {lines[0]!r}")
    rows = []
    for line in lines[1:]:
        cells = line.split(",")
        if len(cells) != len(HISTORY_COLUMNS):
            raise MalformedCsv(f"{path}: row has {len(cells)} cells: {line!r}")
        try:
            rows.append({c: float(v) for c, v in zip(HISTORY_COLUMNS, cells)})
        except ValueError as exc:
            raise MalformedCsv(f"{path}: non-numeric cell in {line!r}") from exc
    if not rows:
        raise MalformedCsv(f"{path}: no data rows")
    return rows


def merge_curves(run_rows):
    """Per-iteration mean and std across runs (population std; one run -> 0)."""
    grids = [tuple(row["iteration"] for row in rows) for rows in run_rows]
    if len(set(grids)) > 1:
        detail = "; ".join(
            f"run {i}: {len(g)} rows ending at {g[-1]:g}"
            for i, g in enumerate(grids)
        )
        raise MalformedCsv(f"iteration grids differ between runs ({detail})")
    metrics = HISTORY_COLUMNS[2:]
    header = ["iteration", "episodes"]
    for m in metrics:
        header += [f"{m}_mean", f"{m}_std"]
    lines = [",".join(header)]
    for i, _ in enumerate(grids[0]):
        at = [rows[i] for rows in run_rows]
        cells = [f"{at[0]['iteration']:g}", f"{at[0]['episodes']:g}"]
        for m in metrics:
            vals = np.array([row[m] for row in at])
            cells += [f"{vals.mean():.6g}", f"{vals.std():.6g}"]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def runs_table(labels, finals):
    """Final-row comparison table, one line per training run."""
    width = max(len(label) for label in labels)
    header = (f"{'run':<{width}} {'episodes':>9} {'success':>8} "
              f"{'inform F1':>10} {'match':>7} {'turns':>7}")
    lines = [header, "-" * len(header)]
    for label, row in zip(labels, finals):
        lines.append(
            f"{label:<{width}} {row['episodes']:>9g} {row['success']:>8.3f} "
            f"{row['inform_f1']:>10.3f} {row['match']:>7.3f} "
            f"{row['avg_turns']:>7.2f}"
        )
    return "\n".join(lines) + "\n"


def cmd_report(opts):
    started = utc_now()
    runs = [Path(r) for r in opts["runs"]]
    run_rows = [read_metrics_csv(run / "metrics.csv") for run in runs]
    names = [run.name for run in runs]
    labels = [name if names.count(name) == 1 else str(run)
              for name, run in zip(names, runs)]
    out = Path(opts["out"])
    out.mkdir(parents=True, exist_ok=True)
    (out / "curves.csv").write_text(merge_curves(run_rows))
    table = runs_table(labels, [rows[-1] for rows in run_rows])
    (out / "summary.txt").write_text(table)
    _finish("report", opts, 0, started, out, ["curves.csv", "summary.txt"])
    print(table, end="")
    return 0


DISPATCH = {
    "gen-world": cmd_gen_world,
    "gen-corpus": cmd_gen_corpus,
    "pretrain": cmd_pretrain,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "report": cmd_report,
}


def cmd_rerun(opts):
    manifest = read_manifest(Path(opts["manifest"]))
    if manifest.command not in DISPATCH:
        raise SchemaError(f"manifest records unknown command "
                          f"{manifest.command!r}")
    replay = dict(manifest.options)
    if opts.get("out"):
        replay["out"] = opts["out"]
    return DISPATCH[manifest.command](replay)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="madpl-lab",
        description="two-agent dialog policy learning on a synthetic world",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-world",
                       help="generate ontology, database, and eval goals")
    p.add_argument("--config", help="world config JSON file "
                                    "(default: built-in three-domain world)")
    p.add_argument("--seed", type=int, default=None,
                   help="override the config seed")
    p.add_argument("--eval-goals", type=int, default=200, dest="eval_goals",
                   help="size of the fixed evaluation goal set")
    p.add_argument("--out", help="output directory")

    p = sub.add_parser("gen-corpus",
                       help="roll out the rule agents into a state-act corpus")
    p.add_argument("--world", required=True, help="world directory")
    p.add_argument("--n-dialogs", type=int, default=500, dest="n_dialogs")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-turns", type=int, default=20, dest="max_turns")
    p.add_argument("--out", help="output directory")

    p = sub.add_parser("pretrain",
                       help="behavior-clone both policies from a corpus")
    p.add_argument("--world", required=True, help="world directory")
    p.add_argument("--corpus", required=True, help="corpus file")
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--beta-sys", type=float, default=2.5, dest="beta_sys",
                   help="positive-label weight for the system policy")
    p.add_argument("--beta-user", type=float, default=4.0, dest="beta_user",
                   help="positive-label weight for the user policy")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output directory")

    p = sub.add_parser("train", help="run a training algorithm")
    p.add_argument("--algo", required=True, choices=ALGOS)
    p.add_argument("--world", required=True, help="world directory")
    p.add_argument("--init", help="checkpoint holding user+system nets "
                                  "to start from (default: random init)")
    p.add_argument("--episodes", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--gamma", type=float, default=0.99)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--lr-value", type=float, default=3e-5, dest="lr_value")
    p.add_argument("--lr-sys", type=float, default=1e-4, dest="lr_sys")
    p.add_argument("--lr-user", type=float, default=5e-5, dest="lr_user")
    p.add_argument("--target-sync", type=int, default=400, dest="target_sync",
                   help="critic updates between target syncs")
    p.add_argument("--window", type=int, default=96,
                   help="transition window the critic samples from")
    p.add_argument("--max-turns", type=int, default=20, dest="max_turns")
    p.add_argument("--eval-every", type=int, default=200, dest="eval_every",
                   help="episodes between greedy evals (0: final only)")
    p.add_argument("--eval-goals", type=int, default=50, dest="eval_goals")
    p.add_argument("--phase-len", type=int, default=500, dest="phase_len",
                   help="episodes per role phase (iterdpl)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--verbose", action="store_true")
    p.add_argument("--out", help="output directory")

    p = sub.add_parser("evaluate", help="greedy rollouts for an agent pair")
    p.add_argument("--pair", required=True,
                   help="USER:SYSTEM; each side 'rule' or a checkpoint path")
    p.add_argument("--world", required=True, help="world directory")
    p.add_argument("--goals", help="goal file "
                                   "(default: eval-goals.jsonl in the world)")
    p.add_argument("--n-goals", type=int, default=None, dest="n_goals",
                   help="evaluate only the first N goals")
    p.add_argument("--max-turns", type=int, default=20, dest="max_turns")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", help="output directory")

    p = sub.add_parser("report",
                       help="merge training runs into curves and a table")
    p.add_argument("--runs", nargs="+", required=True,
                   help="train output directories")
    p.add_argument("--out", help="output directory")

    p = sub.add_parser("rerun", help="replay a command from its manifest")
    p.add_argument("--manifest", required=True,
                   help="manifest file or directory containing one")
    p.add_argument("--out", help="write outputs here instead of the "
                                 "recorded directory")

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    opts = {k: v for k, v in vars(args).items() if k != "command"}
    try:
        if args.command == "rerun":
            return cmd_rerun(opts)
        opts["out"] = str(resolve_out(args.command, opts))
        return DISPATCH[args.command](opts)
    except MissingArtifact as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except MalformedCsv as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except (MadplLabError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
