# remede/scoring.py
from collections import defaultdict
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from remede.data.generators import CLASS_VALUES, SequenceExample
from remede.errors import ShapeError
from remede.schemas import ExperimentConfig, TaskId, TrialReport
from remede.utils import derive_rng, format_mean_std, get_logger, mean_std

logger = get_logger("remede.scoring")

RANDOM_GUESS_STREAM = 7


def elementwise_accuracy(pred, target) -> float:
    pred = np.asarray(pred).reshape(-1)
    target = np.asarray(target).reshape(-1)
    if pred.shape != target.shape:
        raise ShapeError(f"prediction length {pred.size} != target length {target.size}")
    if target.size == 0:
        return 0.0
    return float(np.mean(pred == target))


def dataset_accuracy(preds: Sequence, targets: Sequence) -> float:
    """Correct timesteps over all timesteps (micro-averaged)."""
    if len(preds) != len(targets):
        raise ShapeError(f"{len(preds)} predictions for {len(targets)} sequences")
    correct = total = 0
    for p, t in zip(preds, targets):
        p, t = np.asarray(p).reshape(-1), np.asarray(t).reshape(-1)
        if p.shape != t.shape:
            raise ShapeError(f"prediction length {p.size} != target length {t.size}")
        correct += int(np.sum(p == t))
        total += t.size
    return correct / total if total else 0.0


def random_guess_baseline(dataset: Sequence[SequenceExample], seed: int) -> float:
    """Uniform guess over the three classes at every timestep."""
    rng = derive_rng(seed, RANDOM_GUESS_STREAM)
    preds = [rng.integers(0, len(CLASS_VALUES), size=seq.length) for seq in dataset]
    return dataset_accuracy(preds, [seq.classes for seq in dataset])


def majority_per_position(train: Sequence[SequenceExample]) -> np.ndarray:
    """Most frequent class index at every position; ties go to the larger class."""
    lengths = {seq.length for seq in train}
    if len(lengths) != 1:
        raise ValueError(f"naive baseline needs equal sequence lengths, got {sorted(lengths)}")
    classes = np.stack([seq.classes for seq in train])  # [N, L]
    n_cls = len(CLASS_VALUES)
    counts = np.stack([(classes == c).sum(axis=0) for c in range(n_cls)], axis=1)  # [L, C]
    return n_cls - 1 - np.argmax(counts[:, ::-1], axis=1)


def naive_baseline(train: Sequence[SequenceExample], test: Sequence[SequenceExample]) -> float:
    if not train or not test:
        raise ValueError("naive baseline needs non-empty train and test sets")
    majority = majority_per_position(train)
    bad = {seq.length for seq in test} - {majority.size}
    if bad:
        raise ValueError(f"test lengths {sorted(bad)} differ from training length {majority.size}")
    return dataset_accuracy([majority] * len(test), [seq.classes for seq in test])


def predict_dense(cell, data: Sequence[SequenceExample]) -> List[np.ndarray]:
    """Dense-form predictions, batched by sequence length."""
    by_len: Dict[int, List[int]] = defaultdict(list)
    for i, seq in enumerate(data):
        by_len[seq.length].append(i)
    out: List[Optional[np.ndarray]] = [None] * len(data)
    for idx in by_len.values():
        preds = cell.predict_batch(np.stack([data[i].inputs for i in idx]))
        for i, p in zip(idx, preds):
            out[i] = p
    return out


def evaluate_dense(cell, data: Sequence[SequenceExample]) -> float:
    return dataset_accuracy(predict_dense(cell, data), [seq.classes for seq in data])


def dense_metrics(cell, data: Sequence[SequenceExample]) -> Tuple[float, float]:
    """(per-timestep accuracy, mean per-sequence cross-entropy) from one dense pass."""
    by_len: Dict[int, List[int]] = defaultdict(list)
    for i, seq in enumerate(data):
        by_len[seq.length].append(i)
    preds: List[Optional[np.ndarray]] = [None] * len(data)
    losses = np.zeros(len(data))
    for idx in by_len.values():
        logits = cell.logits_batch(np.stack([data[i].inputs for i in idx]))  # [B, L, C]
        targets = np.stack([data[i].classes for i in idx])
        shifted = logits - logits.max(axis=-1, keepdims=True)
        log_probs = shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
        nll = -np.take_along_axis(log_probs, targets[..., None], axis=-1)[..., 0]
        for k, i in enumerate(idx):
            preds[i] = np.argmax(logits[k], axis=-1)
            losses[i] = nll[k].mean()
    acc = dataset_accuracy(preds, [seq.classes for seq in data])
    return acc, float(losses.mean()) if len(data) else 0.0


def evaluate_model(cell, test: Sequence[SequenceExample]) -> float:
    """Per-timestep accuracy of hard root-to-leaf inference."""
    return dataset_accuracy([cell.predict(seq.inputs) for seq in test], [seq.classes for seq in test])


def full_report(task: TaskId, cfg: ExperimentConfig, search: bool = True,
                data: Optional[List[SequenceExample]] = None) -> TrialReport:
    """
    Optional learning-rate search, then independent trials at the chosen rate.
    The search log travels with the report in `search_trials`.
    """
    from remede.training import lr_search, run_trials

    log = []
    if search:
        lr, log = lr_search(task, cfg, data=data)
        cfg = cfg.model_copy(update={"train": cfg.train.model_copy(update={"learning_rate": lr})})
    report = run_trials(task, cfg, data=data).model_copy(update={"search_trials": log})
    logger.info(
        "%s: accuracy %s, tree size %.1f (random %s, naive %s)",
        report.task_id, format_mean_std(report.mean, report.std), report.mean_size or float("nan"),
        format_mean_std(**mean_std(report.random_guess)), format_mean_std(**mean_std(report.naive)),
    )
    return report


# ----------------------------------------------------------------- reports

def report_frame(reports: Sequence[TrialReport]) -> pd.DataFrame:
    """One row per trial."""
    rows = []
    for r in reports:
        for t, acc in enumerate(r.accuracies):
            rows.append({
                "task": r.task_id,
                "trial": t,
                "accuracy": acc,
                "tree_size": r.sizes[t] if t < len(r.sizes) else None,
                "random_guess": r.random_guess[t] if t < len(r.random_guess) else None,
                "naive": r.naive[t] if t < len(r.naive) else None,
                "learning_rate": r.learning_rate,
            })
    return pd.DataFrame(rows, columns=["task", "trial", "accuracy", "tree_size",
                                       "random_guess", "naive", "learning_rate"])


def write_report_csv(reports: Sequence[TrialReport], path: Path) -> None:
    report_frame(reports).to_csv(path, index=False)


def format_table(reports: Sequence[TrialReport]) -> str:
    """Accuracy table (mean ± std, three decimals) followed by the tree-size table."""
    acc = pd.DataFrame({
        "Task": [r.task_id for r in reports],
        "ReMeDe": [format_mean_std(r.mean, r.std) for r in reports],
        "Random guess": [format_mean_std(**mean_std(r.random_guess)) if r.random_guess else "-" for r in reports],
        "Naive": [format_mean_std(**mean_std(r.naive)) if r.naive else "-" for r in reports],
    })
    sizes = [r.mean_size for r in reports if r.mean_size is not None]
    size = pd.DataFrame({
        "Task": [r.task_id for r in reports] + (["mean"] if sizes else []),
        "Tree size": [f"{r.mean_size:.1f}" if r.mean_size is not None else "-" for r in reports]
                     + ([f"{np.mean(sizes):.1f}"] if sizes else []),
    })
    return "Test accuracy\n" + acc.to_string(index=False) + "\n\nPruned tree size\n" + size.to_string(index=False) + "\n"
