"""Command-line entry point.

Subcommands: gen-demos, train, eval, metrics, serve, selfcheck. Progress
goes to stderr; machine-readable artifacts go to files under a run
directory (override the root with COPOLICY_RUN_ROOT). Exit codes: 0 ok,
1 validation error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import config as cfgmod
from .config import ConfigError


def _err(msg: str) -> None:
    print(f"error: {msg}", file=sys.stderr)


def _progress(msg: str) -> None:
    print(msg, file=sys.stderr, flush=True)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="copolicy",
        description="Two-agent table-carrying co-policy pipeline",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", type=Path, default=None,
                        help="TOML config file (defaults built in)")
        sp.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY.PATH=VALUE",
                        help="override a config value (beats the file)")
        sp.add_argument("--out", type=Path, default=None,
                        help="output directory (default: a fresh run dir)")
        sp.add_argument("--seed", type=int, default=None, help="global seed override")

    sp = sub.add_parser("gen-demos", help="generate the synthetic demonstration corpus")
    common(sp)
    sp.add_argument("--n-per-mode", type=int, default=None)

    sp = sub.add_parser("train", help="train a policy variant")
    common(sp)
    sp.add_argument("--dataset", type=Path, required=True, help="demos .ndjson file")
    sp.add_argument("--variant", choices=["codp-h", "codp", "bc"], default="codp-h")
    sp.add_argument("--steps", type=int, default=None)

    sp = sub.add_parser("eval", help="evaluate checkpoints in the simulator")
    common(sp)
    sp.add_argument("--mode", choices=["coplan", "scripted"], required=True)
    sp.add_argument("--checkpoint", type=Path, action="append", required=True,
                    help="checkpoint file (repeatable)")
    sp.add_argument("--splits", default="holdout,unseen",
                    help="comma-separated map splits (coplan mode)")
    sp.add_argument("--partners", default="stubborn_above,stubborn_below,compliant",
                    help="comma-separated scripted partners (scripted mode)")
    sp.add_argument("--base-split", default="holdout",
                    help="map split used for scripted-partner evaluation")

    sp = sub.add_parser("metrics", help="compute metrics from recorded episodes")
    common(sp)
    sp.add_argument("action", choices=["force-bins", "heatmap", "tables"])
    sp.add_argument("--episodes", type=Path, default=None,
                    help="episodes .ndjson (force-bins, heatmap)")
    sp.add_argument("--results", type=Path, default=None,
                    help="episodes.csv from eval (tables)")

    sp = sub.add_parser("serve", help="run the human-in-the-loop server")
    common(sp)
    sp.add_argument("--checkpoint", type=Path, required=True)
    sp.add_argument("--host", default=None)
    sp.add_argument("--port", type=int, default=None)

    sp = sub.add_parser("selfcheck", help="run the property suites")
    common(sp)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code == 0 else 1
    try:
        cfg = cfgmod.load_config(args.config, args.overrides)
        if args.seed is not None:
            cfg = _patched(cfg, None, "seed", args.seed)
    except (ConfigError, FileNotFoundError) as e:
        _err(str(e))
        return 1
    try:
        handler = {
            "gen-demos": cmd_gen_demos,
            "train": cmd_train,
            "eval": cmd_eval,
            "metrics": cmd_metrics,
            "serve": cmd_serve,
            "selfcheck": cmd_selfcheck,
        }[args.command]
        return handler(args, cfg)
    except ValidationFailure as e:
        _err(str(e))
        return 1
    except Exception as e:  # runtime failure contract
        _err(f"{type(e).__name__}: {e}")
        return 2


class ValidationFailure(Exception):
    pass


def _patched(cfg: dict, section: str | None, key: str, value) -> dict:
    out = {k: (dict(v) if isinstance(v, dict) else v) for k, v in cfg.items()}
    if section is None:
        out[key] = value
    else:
        out[section][key] = value
    return out


def _run_dir(args, cfg, label: str) -> Path:
    if args.out is not None:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "resolved.toml").write_text(cfgmod.dump_toml(cfg))
        return out
    return cfgmod.make_run_dir(cfg, label)


def cmd_gen_demos(args, cfg) -> int:
    from .dataset import save_dataset
    from .demos import generate_demos
    from .maps import all_splits, save_suite

    if args.n_per_mode is not None:
        cfg = _patched(cfg, "dataset", "n_per_mode", args.n_per_mode)
    params = cfgmod.physics_params(cfg)
    out = _run_dir(args, cfg, "demos")
    splits = all_splits()
    for name, maps in splits.items():
        save_suite(out / f"maps_{name}.json", maps)
    _progress(f"generating demos on {len(splits['train'])} train maps ...")
    episodes = generate_demos(splits["train"], cfg["dataset"]["n_per_mode"],
                              cfg["seed"], params)
    save_dataset(out / "demos.ndjson", episodes, params, generator_seed=cfg["seed"])
    _progress(f"wrote {len(episodes)} episodes "
              f"({sum(e.n_ticks for e in episodes)} ticks) to {out / 'demos.ndjson'}")
    return 0


def cmd_train(args, cfg) -> int:
    from .dataset import load_dataset
    from .training import train_bc, train_denoiser

    if args.steps is not None:
        cfg = _patched(cfg, "train", "steps", args.steps)
    if not args.dataset.exists():
        raise ValidationFailure(f"dataset file not found: {args.dataset}")
    episodes, params, _ = load_dataset(args.dataset)
    variant = args.variant.replace("-", "_")
    out = _run_dir(args, cfg, f"train-{variant}")
    mcfg = cfgmod.model_config(cfg, variant)
    tcfg = cfgmod.train_config(cfg, variant)
    ckpt = out / "checkpoint.ckpt"
    log = out / "train_log.csv"
    if variant != "bc":
        from .schedule import dump_schedule_csv, make_schedule
        dump_schedule_csv(out / "schedule.csv",
                          make_schedule(mcfg.diffusion_steps, tcfg.schedule_kind))
    _progress(f"training {variant} for {tcfg.steps} steps on {len(episodes)} episodes ...")
    if variant == "bc":
        _, res = train_bc(episodes, params, mcfg, tcfg, checkpoint_path=ckpt, log_path=log)
    else:
        _, res = train_denoiser(
            episodes, params, mcfg, tcfg, checkpoint_path=ckpt, log_path=log,
            progress=lambda s, l: _progress(f"  step {s}: loss {l:.4f}"))
    _progress(f"final loss {res.final_loss:.4f}; checkpoint at {ckpt}")
    return 0


def cmd_eval(args, cfg) -> int:
    from .maps import builtin_suite
    from .runtime import (RuntimeConfig, evaluate_suite, format_summary_table,
                          write_eval_csv, write_summary_csv)
    from .training import load_policy

    methods = {}
    for path in args.checkpoint:
        if not path.exists():
            raise ValidationFailure(f"checkpoint file not found: {path}")
        model, stats, meta = load_policy(path)
        methods[meta["variant"]] = (model, stats)
    out = _run_dir(args, cfg, f"eval-{args.mode}")
    rt = cfg["runtime"]
    if args.mode == "coplan":
        suites = {s: builtin_suite(s) for s in args.splits.split(",") if s}
        runtime_for = lambda m: RuntimeConfig.coplan(
            n_inference_steps=rt["coplan_inference_steps"],
            timeout_ticks=rt["timeout_ticks"])
    else:
        base = builtin_suite(args.base_split)
        suites = {p: base for p in args.partners.split(",") if p}
        runtime_for = None  # per-split partner; handled below

    if args.mode == "coplan":
        rows, summary = evaluate_suite(
            methods, suites, runtime_for, rt["seeds_per_map"],
            params=cfgmod.physics_params(cfg), base_seed=cfg["seed"],
            batched=rt["batched"],
            progress=lambda m, s, _: _progress(f"  evaluated {m} on {s}"))
    else:
        all_rows = []
        for partner, maps in suites.items():
            runtime = RuntimeConfig.reactive(
                f"scripted:{partner}",
                n_inference_steps=rt["reactive_inference_steps"],
                timeout_ticks=rt["timeout_ticks"])
            rows_p, _ = evaluate_suite(
                methods, {partner: maps}, lambda m: runtime, rt["seeds_per_map"],
                params=cfgmod.physics_params(cfg), base_seed=cfg["seed"],
                batched=rt["batched"],
                progress=lambda m, s, _: _progress(f"  evaluated {m} vs {s}"))
            all_rows.extend(rows_p)
        from .runtime import summarize
        rows, summary = all_rows, summarize(all_rows)

    write_eval_csv(out / "episodes.csv", rows)
    write_summary_csv(out / "summary.csv", summary)
    table = format_summary_table(summary)
    (out / "summary.txt").write_text(table + "\n")
    _progress(table)
    return 0


def cmd_metrics(args, cfg) -> int:
    from .metrics import (bin_interaction_forces, dump_grid_csv, dump_summary_json,
                          global_bin_fractions, render_heatmap, visitation_heatmap)

    out = _run_dir(args, cfg, f"metrics-{args.action}")
    nx, ny = cfg["metrics"]["grid_nx"], cfg["metrics"]["grid_ny"]
    if args.action == "tables":
        if args.results is None or not args.results.exists():
            raise ValidationFailure("metrics tables needs --results episodes.csv")
        from .runtime import EvalRow, format_summary_table, summarize, write_summary_csv
        with open(args.results) as f:
            rows = [EvalRow(r["method"], r["split"], r["map_id"], int(r["seed"]),
                            r["outcome"], float(r["duration_s"]),
                            float(r["mean_plan_ms"]))
                    for r in csv.DictReader(f)]
        summary = summarize(rows)
        write_summary_csv(out / "summary.csv", summary)
        table = format_summary_table(summary)
        (out / "summary.txt").write_text(table + "\n")
        _progress(table)
        return 0

    if args.episodes is None or not args.episodes.exists():
        raise ValidationFailure(f"metrics {args.action} needs --episodes <demos.ndjson>")
    from .dataset import load_dataset
    episodes, params, _ = load_dataset(args.episodes)
    map_cfg = episodes[0].map if episodes else None
    if args.action == "force-bins":
        grid = bin_interaction_forces(episodes, params, nx, ny)
        dump_grid_csv(out / "force_bins.csv", grid)
        render_heatmap(out / "force_bins.png", grid, map_cfg, "interaction-force bins")
        fractions = global_bin_fractions(episodes, params)
        dump_summary_json(out / "force_bins.json", {"fractions": fractions})
        _progress(json.dumps(fractions))
    else:
        grid = visitation_heatmap(episodes, params, nx, ny)
        dump_grid_csv(out / "visitation.csv", grid)
        render_heatmap(out / "visitation.png", grid, map_cfg, "state visitation")
        _progress(f"wrote {out / 'visitation.png'}")
    return 0


def cmd_serve(args, cfg) -> int:
    if not args.checkpoint.exists():
        raise ValidationFailure(f"checkpoint file not found: {args.checkpoint}")
    if args.host:
        cfg = _patched(cfg, "server", "host", args.host)
    if args.port:
        cfg = _patched(cfg, "server", "port", args.port)
    from .server import serve_forever

    serve_forever(args.checkpoint, cfg)
    return 0


def cmd_selfcheck(args, cfg) -> int:
    from .selfcheck import run_selfcheck

    ok = run_selfcheck(out=lambda line: print(line))
    return 0 if ok else 2


if __name__ == "__main__":
    sys.exit(main())
