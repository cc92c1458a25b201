# remede/main.py
"""
Command-line entry point.

    python -m remede generate --task poc1 --seed 7 --out runs/poc1
    python -m remede search   --data runs/poc1/dataset.jsonl --out runs/poc1
    python -m remede train    --config runs/poc1/best_config.json --data runs/poc1/dataset.jsonl
    python -m remede evaluate --checkpoint runs/poc1/checkpoint.json --data runs/poc1/dataset.jsonl
    python -m remede export   --checkpoint runs/poc1/checkpoint.json --data runs/poc1/dataset.jsonl --format dot
    python -m remede trials   --task poc3 --parallel-trials 5

Every command writes run.json (resolved config, seed, input and artifact
hashes) next to its outputs. Outputs are staged and only moved into place
when the command succeeds.
"""
import argparse
import sys
from pathlib import Path
from typing import List, Optional

import pandas as pd

from remede.cell import load_checkpoint, save_checkpoint
from remede.data import generate_dataset, read_jsonl, split_dataset, write_jsonl
from remede.schemas import ExperimentConfig, RunManifest, TaskId, TrialReport
from remede.scoring import (
    evaluate_model,
    format_table,
    full_report,
    naive_baseline,
    random_guess_baseline,
    write_report_csv,
)
from remede.training import fit, init_cell, lr_search, split_for_training
from remede.tree import export_graph, prune, tree_size
from remede.utils import StagedOutputs, get_logger, sha256_file

logger = get_logger("remede.cli")


# ------------------------------------------------------------------ config

def load_config(args: argparse.Namespace) -> ExperimentConfig:
    """Config file first, then explicit flags on top."""
    if args.config:
        cfg = ExperimentConfig.model_validate_json(Path(args.config).read_text(encoding="utf-8"))
    else:
        cfg = ExperimentConfig()
    data = cfg.model_dump()
    overrides = {
        ("task",): args.task,
        ("seed",): args.seed,
        ("out_dir",): args.out,
        ("n_trials",): args.trials,
        ("parallel_trials",): args.parallel_trials,
        ("search_trials",): args.search_trials,
        ("train", "depth"): args.depth,
        ("train", "n_m"): args.memory_dim,
        ("train", "learning_rate"): args.lr,
        ("train", "max_epochs"): args.epochs,
        ("gen", "n_sequences"): args.n_sequences,
    }
    for keys, value in overrides.items():
        if value is None:
            continue
        target = data
        for k in keys[:-1]:
            target = target[k]
        target[keys[-1]] = value
    return ExperimentConfig.model_validate(data)


def _load_dataset(args, cfg: ExperimentConfig):
    if args.data:
        return read_jsonl(args.data), [args.data]
    return generate_dataset(cfg.task, cfg.gen), []


def _write_manifest(out: StagedOutputs, out_dir: Path, command: str, cfg: ExperimentConfig,
                    inputs: List[str]) -> None:
    manifest = RunManifest(
        command=command,
        seed=cfg.seed,
        config=cfg.model_dump(mode="json"),
        inputs=[{"path": str(p), "sha256": sha256_file(Path(p))} for p in inputs],
        artifacts=out.hashes(),
    )
    out.path(out_dir / "run.json").write_text(manifest.model_dump_json(indent=2) + "\n", encoding="utf-8")


# ---------------------------------------------------------------- commands

def cmd_generate(args, cfg: ExperimentConfig) -> None:
    out_dir = Path(cfg.out_dir)
    data = generate_dataset(cfg.task, cfg.gen)
    with StagedOutputs(out_dir) as out:
        write_jsonl(out.path(out_dir / "dataset.jsonl"), data)
        _write_manifest(out, out_dir, "generate", cfg, [])
    logger.info("wrote %s", out_dir / "dataset.jsonl")


def cmd_train(args, cfg: ExperimentConfig) -> None:
    out_dir = Path(cfg.out_dir)
    data, inputs = _load_dataset(args, cfg)
    train, valid, _ = split_for_training(data, cfg, cfg.seed)
    cell = init_cell(cfg.train, data[0].n_x, train, cfg.seed)
    cell, history = fit(cell, train, valid, cfg.train)
    with StagedOutputs(out_dir) as out:
        save_checkpoint(cell, out.path(out_dir / "checkpoint.json"), seed=cfg.seed, task_id=cfg.task.value)
        pd.DataFrame([h.model_dump() for h in history]).to_csv(out.path(out_dir / "history.csv"), index=False)
        _write_manifest(out, out_dir, "train", cfg, inputs)
    logger.info("trained %d epochs, best validation accuracy %.4f", len(history),
                history[-1].best_val_accuracy if history else float("nan"))


def cmd_search(args, cfg: ExperimentConfig) -> None:
    out_dir = Path(cfg.out_dir)
    data, inputs = _load_dataset(args, cfg)
    lr, log = lr_search(cfg.task, cfg, data=data)
    best = cfg.model_copy(update={"train": cfg.train.model_copy(update={"learning_rate": lr})})
    with StagedOutputs(out_dir) as out:
        pd.DataFrame([t.model_dump() for t in log]).to_csv(out.path(out_dir / "search_trials.csv"), index=False)
        out.path(out_dir / "best_config.json").write_text(best.model_dump_json(indent=2) + "\n", encoding="utf-8")
        _write_manifest(out, out_dir, "search", best, inputs)
    print(f"best learning rate: {lr:.6g}")


def cmd_evaluate(args, cfg: ExperimentConfig) -> None:
    out_dir = Path(cfg.out_dir)
    cell, _ = load_checkpoint(args.checkpoint)
    data, inputs = _load_dataset(args, cfg)
    train, test = split_dataset(data, cfg.split_fraction, cfg.seed)
    if not train or not test:
        raise ValueError(f"{len(data)} sequences leave an empty train or test split; evaluate needs both")
    acc = evaluate_model(cell, test)
    size = tree_size(prune(cell.tree, train, cell))
    report = TrialReport(
        task_id=data[0].task_id.value,
        accuracies=[acc],
        mean=acc,
        std=0.0,
        sizes=[size],
        mean_size=float(size),
        learning_rate=cfg.train.learning_rate,
        random_guess=[random_guess_baseline(test, cfg.seed)],
        naive=[naive_baseline(train, test)],
    )
    table = format_table([report])
    with StagedOutputs(out_dir) as out:
        write_report_csv([report], out.path(out_dir / "report.csv"))
        out.path(out_dir / "report.txt").write_text(table, encoding="utf-8")
        _write_manifest(out, out_dir, "evaluate", cfg, [args.checkpoint, *inputs])
    print(table, end="")


def cmd_export(args, cfg: ExperimentConfig) -> None:
    out_dir = Path(cfg.out_dir)
    cell, _ = load_checkpoint(args.checkpoint)
    data, inputs = _load_dataset(args, cfg)
    text = export_graph(prune(cell.tree, data, cell), args.format)
    with StagedOutputs(out_dir) as out:
        out.path(out_dir / f"tree.{args.format}").write_text(text, encoding="utf-8")
        _write_manifest(out, out_dir, "export", cfg, [args.checkpoint, *inputs])
    logger.info("wrote %s", out_dir / f"tree.{args.format}")


def cmd_trials(args, cfg: ExperimentConfig) -> None:
    out_dir = Path(cfg.out_dir)
    data, inputs = _load_dataset(args, cfg)
    report = full_report(cfg.task, cfg, search=not args.skip_search, data=data)
    table = format_table([report])
    with StagedOutputs(out_dir) as out:
        write_report_csv([report], out.path(out_dir / "report.csv"))
        if report.search_trials:
            pd.DataFrame([t.model_dump() for t in report.search_trials]).to_csv(
                out.path(out_dir / "search_trials.csv"), index=False)
        out.path(out_dir / "report.txt").write_text(table, encoding="utf-8")
        out.path(out_dir / "trial_report.json").write_text(report.model_dump_json(indent=2) + "\n",
                                                           encoding="utf-8")
        _write_manifest(out, out_dir, "trials", cfg, inputs)
    print(table, end="")


COMMANDS = {
    "generate": cmd_generate,
    "train": cmd_train,
    "search": cmd_search,
    "evaluate": cmd_evaluate,
    "export": cmd_export,
    "trials": cmd_trials,
}


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, default=None, help="ExperimentConfig JSON file")
    common.add_argument("--task", type=str, default=None, choices=[t.value for t in TaskId])
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--depth", type=int, default=None)
    common.add_argument("--memory-dim", type=int, default=None, dest="memory_dim")
    common.add_argument("--lr", type=float, default=None)
    common.add_argument("--trials", type=int, default=None)
    common.add_argument("--search-trials", type=int, default=None, dest="search_trials")
    common.add_argument("--epochs", type=int, default=None, help="max training epochs")
    common.add_argument("--n-sequences", type=int, default=None, dest="n_sequences")
    common.add_argument("--parallel-trials", type=int, default=None, dest="parallel_trials")
    common.add_argument("--out", type=str, default=None, help="output directory")
    common.add_argument("--data", type=str, default=None, help="JSONL dataset (generated from the config if omitted)")

    parser = argparse.ArgumentParser(prog="remede", description="Recurrent memory decision trees")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("generate", parents=[common], help="write a synthetic dataset")
    sub.add_parser("train", parents=[common], help="train one model")
    sub.add_parser("search", parents=[common], help="learning-rate random search")
    p = sub.add_parser("evaluate", parents=[common], help="accuracy, baselines and tree size")
    p.add_argument("--checkpoint", type=str, required=True)
    p = sub.add_parser("export", parents=[common], help="prune and export the tree")
    p.add_argument("--checkpoint", type=str, required=True)
    p.add_argument("--format", type=str, default="dot", choices=["dot", "json"])
    p = sub.add_parser("trials", parents=[common], help="independent trials with baselines")
    p.add_argument("--skip-search", action="store_true", help="use --lr / the config rate as is")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        cfg = load_config(args)
        logger.info("%s: task=%s seed=%d out=%s", args.command, cfg.task.value, cfg.seed, cfg.out_dir)
        COMMANDS[args.command](args, cfg)
    except Exception as e:  # noqa: BLE001
        msg = " ".join(str(e).split()) or type(e).__name__
        logger.error("%s failed: %s", args.command, msg)
        print(f"error: {type(e).__name__}: {msg}", file=sys.stderr)
        return 1
    logger.info("%s finished", args.command)
    return 0


if __name__ == "__main__":
    sys.exit(main())
