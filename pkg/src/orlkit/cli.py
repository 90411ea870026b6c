"""Command-line front end: collect, mix, fit-behavior, train, eval, sweep.

Run configurations are JSON files validated against the published schema
(config_schema.json) with all defaults pre-filled; metrics are emitted as
line-delimited JSON, one record per logging interval. Exit codes: 0 on
success, 1 on usage/config errors, 2 on runtime/divergence errors.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import copy
import json
import os
import sys
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .agents import (DeterministicPolicy, Td3Agent, Td3Hyperparams,
                     load_policy, save_agent, train, train_bc_only)
from .behavior import (WeightConfig, calibrate_weights, compute_lambda,
                       fit_behavior, load_behavior, save_behavior)
from .data import (NormStats, load_dataset, mix_datasets, normalize_state,
                   save_dataset)
from .envs import (POLICY_KINDS, collect_dataset, ensure_reference_returns,
                   evaluate_policy, make_env)
from .nets import MlpNet, TrainingDiverged, load_net, make_rng, save_net
from .regularizers import RegularizerSpec, StochasticPolicy

EVAL_SEED_OFFSET = 1_000_000

AGENT_REGULARIZER = {
    "td3rkl": "rkl-contrastive",
    "td3bc": "mse-bc",
    "bc-mse": "mse-bc",
    "bc-rkl": "rkl-contrastive",
    "bc-fkl": "forward-kl",
    "bc-rklstoch": "reverse-kl-stochastic",
}

_NEEDS_BEHAVIOR = ("td3rkl", "bc-rklstoch")


class UsageError(Exception):
    """Bad command line or unusable arguments (exit code 1)."""


class ConfigError(Exception):
    """Invalid run configuration; message lists every problem (exit 1)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def load_schema() -> dict:
    with resources.files("orlkit").joinpath("config_schema.json").open() as fh:
        return json.load(fh)


def default_config() -> dict:
    return {
        "seed": 0,
        "behavior": None,
        "registry": None,
        "hyperparams": Td3Hyperparams().to_dict(),
        "bc": {"epochs": 50, "batch_size": 256, "lr": 3e-4,
               "eval_every_epochs": 1},
        "weights": {"zeta1": 10.0, "zeta2": 5.0},
        "regularizer": {"alpha": 1.0, "mc_samples": 10},
    }


def _fill_defaults(cfg: dict) -> dict:
    filled = default_config()
    for key, value in cfg.items():
        if isinstance(value, dict) and isinstance(filled.get(key), dict):
            merged = filled[key].copy()
            merged.update(value)
            filled[key] = merged
        else:
            filled[key] = value
    reg = filled.setdefault("regularizer", {})
    if "kind" not in reg and filled.get("agent") in AGENT_REGULARIZER:
        reg["kind"] = AGENT_REGULARIZER[filled["agent"]]
    return filled


def validate_config(cfg: dict) -> dict:
    """Fill defaults and enumerate every schema/semantic problem at once."""
    filled = _fill_defaults(copy.deepcopy(cfg))
    validator = jsonschema.Draft202012Validator(load_schema())
    problems = [
        f"config{'/' + '/'.join(str(p) for p in err.path) if err.path else ''}:"
        f" {err.message}"
        for err in sorted(validator.iter_errors(filled), key=str)
    ]
    agent = filled.get("agent")
    reg = filled.get("regularizer")
    if agent in AGENT_REGULARIZER and isinstance(reg, dict):
        expected = AGENT_REGULARIZER[agent]
        if isinstance(reg.get("kind"), str) and reg["kind"] != expected:
            problems.append(
                f"agent {agent!r} requires regularizer kind {expected!r}, "
                f"got {reg['kind']!r}"
            )
    if isinstance(filled.get("datasets"), list):
        for p in filled["datasets"]:
            if isinstance(p, str) and not Path(p).exists():
                problems.append(f"dataset path does not exist: {p}")
    if agent in _NEEDS_BEHAVIOR:
        if not filled.get("behavior"):
            problems.append(
                f"agent {agent!r} requires a fitted behavior checkpoint"
            )
        elif not Path(filled["behavior"]).exists():
            problems.append(
                f"behavior checkpoint does not exist: {filled['behavior']}"
            )
    if problems:
        raise ConfigError("\n".join(problems))
    if "ORL_SEED" in os.environ:
        filled["seed"] = int(os.environ["ORL_SEED"])
    return filled


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return validate_config(raw)


def _record_to_json(rec) -> dict:
    evals = None
    if rec.eval_return is not None:
        evals = {
            "mean_return": rec.eval_return,
            "std_return": rec.eval_return_std,
            "normalized_score": rec.normalized_score,
        }
    return {
        "step": rec.step,
        "metrics": {
            "critic_loss": rec.critic_loss,
            "actor_loss": rec.actor_loss,
            "mean_lambda": rec.mean_lambda,
            "mean_abs_q": rec.mean_abs_q,
        },
        "eval": evals,
    }


def write_metrics(log, path) -> None:
    with open(path, "w") as fh:
        for rec in log.records:
            fh.write(json.dumps(_record_to_json(rec)) + "\n")


def _load_datasets(paths):
    parts = [load_dataset(p) for p in paths]
    mixed = parts[0]
    for part in parts[1:]:
        mixed = mix_datasets(mixed, part)
    return mixed


def run_config(cfg: dict) -> dict:
    """Execute one validated training run; returns the summary dict."""
    out_dir = Path(cfg["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "config.json", "w") as fh:
        json.dump(cfg, fh, indent=2, sort_keys=True)
        fh.write("\n")
    dataset = _load_datasets(cfg["datasets"])
    env = make_env(cfg["env"])
    if dataset.manifest.env != env.name:
        raise ConfigError(
            f"dataset was collected on {dataset.manifest.env!r}, "
            f"config names {env.name!r}"
        )
    spec = ensure_reference_returns(env, cfg.get("registry"))
    seed = cfg["seed"]
    hp = Td3Hyperparams.from_dict(cfg["hyperparams"])

    def eval_hook(policy):
        return evaluate_policy(env, policy, hp.eval_episodes,
                               seed + EVAL_SEED_OFFSET)

    agent_kind = cfg["agent"]
    reg = RegularizerSpec.from_dict(cfg["regularizer"])
    behavior = load_behavior(cfg["behavior"]) if cfg.get("behavior") else None
    ckpt_dir = out_dir / "checkpoint"
    if agent_kind in ("td3rkl", "td3bc"):
        weights = (WeightConfig(**cfg["weights"])
                   if agent_kind == "td3rkl" else None)
        agent = Td3Agent(
            obs_dim=dataset.obs_dim, act_dim=dataset.act_dim,
            stats=dataset.stats, hp=hp, reg=reg,
            behavior=behavior if agent_kind == "td3rkl" else None,
            weights=weights, seed=seed,
        )
        log = train(agent, dataset, eval_hook=eval_hook)
        save_agent(agent, ckpt_dir)
    else:
        bc = cfg["bc"]
        sizes = [dataset.obs_dim, *hp.hidden, dataset.act_dim]
        if agent_kind in ("bc-mse", "bc-rkl"):
            policy = DeterministicPolicy(
                net=MlpNet(sizes, head="tanh", out_bound=1.0,
                           rng=make_rng(seed, 1)),
                stats=dataset.stats, bound=1.0,
            )
        else:
            policy = StochasticPolicy(
                MlpNet(sizes, head="linear", rng=make_rng(seed, 1)),
                MlpNet(sizes, head="linear", rng=make_rng(seed, 2)),
                stats=dataset.stats, bound=1.0,
            )
        log = train_bc_only(
            policy, dataset, reg, epochs=bc["epochs"], rng=make_rng(seed, 4),
            behavior=behavior, batch_size=bc["batch_size"], lr=bc["lr"],
            eval_hook=eval_hook, eval_every_epochs=bc["eval_every_epochs"],
        )
        _save_bc_checkpoint(policy, dataset, ckpt_dir)
    write_metrics(log, out_dir / "metrics.jsonl")
    summary = {
        "agent": agent_kind,
        "env": env.name,
        "seed": seed,
        "final_normalized_score": log.final_score(),
        "final_return": log.final_return(),
        "anchors": {"j_rand": spec.j_rand, "j_exp": spec.j_exp},
        "config": cfg,
    }
    with open(out_dir / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary


def _save_bc_checkpoint(policy, dataset, ckpt_dir: Path) -> None:
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    stochastic = isinstance(policy, StochasticPolicy)
    if stochastic:
        save_net(policy.mean_net, ckpt_dir / "actor.orlw")
        save_net(policy.logstd_net, ckpt_dir / "logstd.orlw")
    else:
        save_net(policy.net, ckpt_dir / "actor.orlw")
    meta = {
        "policy_type": "stochastic" if stochastic else "deterministic",
        "action_bound": 1.0,
        "norm_mean": dataset.stats.mean.tolist(),
        "norm_std": dataset.stats.std.tolist(),
    }
    with open(ckpt_dir / "agent.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_collect(args) -> int:
    env = make_env(args.env)
    if args.policy not in POLICY_KINDS:
        raise UsageError(
            f"unknown policy {args.policy!r}; choose from {POLICY_KINDS}"
        )
    if args.n < 1:
        raise UsageError("--n must be >= 1")
    dataset = collect_dataset(env, args.policy, args.n, args.seed)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    save_dataset(dataset, args.out)
    print(f"wrote {len(dataset)} transitions to {args.out}")
    print(json.dumps(dataset.manifest.to_dict()))
    return 0


def cmd_mix(args) -> int:
    if len(args.inputs) < 2:
        raise UsageError("mix needs at least two input datasets")
    mixed = _load_datasets(args.inputs)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    save_dataset(mixed, args.out)
    print(f"wrote {len(mixed)} transitions to {args.out}")
    print(json.dumps(mixed.manifest.to_dict()))
    return 0


def cmd_fit_behavior(args) -> int:
    dataset = load_dataset(args.dataset)
    hidden = tuple(int(h) for h in args.hidden.split(","))
    model = fit_behavior(dataset, epochs=args.epochs,
                         rng=make_rng(args.seed), batch_size=args.batch_size,
                         lr=args.lr, hidden=hidden)
    out = Path(args.out)
    save_behavior(model, out)
    states = normalize_state(dataset.stats, dataset.states)
    if args.calibrate:
        cfg = calibrate_weights(model, states, zeta1=args.zeta1)
    else:
        cfg = WeightConfig(zeta1=args.zeta1, zeta2=args.zeta2)
    beta = model.beta_hat(states)
    lam = compute_lambda(cfg, beta)
    report_path = Path(args.report) if args.report else out / "weight_report.jsonl"
    with open(report_path, "w") as fh:
        for src, rows in dataset.source_slices():
            for i in range(rows.start, rows.stop):
                fh.write(json.dumps({
                    "source": src.policy,
                    "state": dataset.states[i].tolist(),
                    "beta_hat": float(beta[i]),
                    "lambda": float(lam[i]),
                }) + "\n")
    edges = np.linspace(0.0, 1.0, 51)
    summary = {
        "zeta1": cfg.zeta1, "zeta2": cfg.zeta2, "count": len(dataset),
        "final_nll": model.nll_history[-1],
        "bin_edges": edges.tolist(),
        "bin_counts": {}, "mean_lambda": {}, "mean_beta": {},
    }
    for src, rows in dataset.source_slices():
        counts, _ = np.histogram(lam[rows], bins=edges)
        summary["bin_counts"][src.policy] = counts.tolist()
        summary["mean_lambda"][src.policy] = float(np.mean(lam[rows]))
        summary["mean_beta"][src.policy] = float(np.mean(beta[rows]))
    with open(out / "weight_summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"behavior model saved to {out}; report at {report_path}")
    for policy, mean_lam in summary["mean_lambda"].items():
        print(f"  source {policy}: mean lambda {mean_lam:.4f}, "
              f"mean beta {summary['mean_beta'][policy]:.4f}")
    return 0


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    summary = run_config(cfg)
    score = summary["final_normalized_score"]
    print(f"run complete: agent={summary['agent']} seed={summary['seed']} "
          f"normalized_score={score if score is None else round(score, 3)}")
    return 0


def cmd_eval(args) -> int:
    env = make_env(args.env)
    ckpt = Path(args.checkpoint)
    with open(ckpt / "agent.json") as fh:
        meta = json.load(fh)
    if meta.get("policy_type") == "stochastic":
        policy = StochasticPolicy(
            load_net(ckpt / "actor.orlw"), load_net(ckpt / "logstd.orlw"),
            stats=NormStats(mean=np.array(meta["norm_mean"]),
                            std=np.array(meta["norm_std"])),
            bound=float(meta["action_bound"]),
        )
    else:
        policy = load_policy(ckpt)
    result = evaluate_policy(env, policy, args.episodes, args.seed,
                             registry_path=args.registry)
    print(json.dumps({
        "mean_return": result.mean_return,
        "std_return": result.std_return,
        "normalized_score": result.normalized_score,
        "episodes": result.episodes,
    }))
    return 0


def _sweep_worker(cfg: dict):
    summary = run_config(cfg)
    return cfg["seed"], summary["final_normalized_score"]


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    if not args.seeds:
        raise UsageError("sweep needs at least one seed")
    base_out = Path(cfg["out_dir"])
    jobs = []
    for seed in args.seeds:
        job = copy.deepcopy(cfg)
        job["seed"] = seed
        job["out_dir"] = str(base_out / f"seed_{seed}")
        jobs.append(job)
    scores, failures = {}, {}
    if args.workers > 1:
        with concurrent.futures.ProcessPoolExecutor(args.workers) as pool:
            futures = {pool.submit(_sweep_worker, job): job["seed"]
                       for job in jobs}
            for fut in concurrent.futures.as_completed(futures):
                seed = futures[fut]
                try:
                    _, score = fut.result()
                    scores[seed] = score
                except Exception as exc:
                    failures[seed] = str(exc)
    else:
        for job in jobs:
            try:
                _, score = _sweep_worker(job)
                scores[job["seed"]] = score
            except Exception as exc:
                failures[job["seed"]] = str(exc)
    vals = np.array([scores[s] for s in sorted(scores)])
    summary = {
        "seeds": sorted(args.seeds),
        "scores": {str(k): v for k, v in sorted(scores.items())},
        "mean": float(vals.mean()) if len(vals) else None,
        "std": float(vals.std()) if len(vals) else None,
        "failed": {str(k): v for k, v in sorted(failures.items())},
        "partial": bool(failures),
    }
    base_out.mkdir(parents=True, exist_ok=True)
    with open(base_out / "sweep_summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if summary["mean"] is not None:
        print(f"sweep over {len(scores)} seeds: "
              f"{summary['mean']:.3f} +- {summary['std']:.3f}")
    for seed, msg in sorted(failures.items()):
        print(f"seed {seed} FAILED: {msg}", file=sys.stderr)
    return 2 if failures else 0


def build_parser() -> _Parser:
    parser = _Parser(prog="orl", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("collect", help="roll out a scripted policy tier")
    p.add_argument("--env", required=True)
    p.add_argument("--policy", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_collect)

    p = sub.add_parser("mix", help="concatenate datasets, merge manifests")
    p.add_argument("--out", required=True)
    p.add_argument("inputs", nargs="+")
    p.set_defaults(func=cmd_mix)

    p = sub.add_parser("fit-behavior",
                       help="clone the behavior policy, report weights")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--batch-size", type=int, default=256)
    p.add_argument("--lr", type=float, default=3e-4)
    p.add_argument("--hidden", default="256,256")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--zeta1", type=float, default=10.0)
    p.add_argument("--zeta2", type=float, default=5.0)
    p.add_argument("--calibrate", action="store_true",
                   help="set zeta2 from the median estimated log-variance")
    p.add_argument("--report", default=None)
    p.set_defaults(func=cmd_fit_behavior)

    p = sub.add_parser("train", help="run one training configuration")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a saved policy checkpoint")
    p.add_argument("--env", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--episodes", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--registry", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="run one config across seeds")
    p.add_argument("--config", required=True)
    p.add_argument("--seeds", type=int, nargs="+", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except TrainingDiverged as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main())
