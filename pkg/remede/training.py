# remede/training.py
"""
Adam, the mini-batch BPTT loop with early stopping, learning-rate search
and repeated independent trials.
"""
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from remede.autodiff import Tape, Tensor, add, backward, cross_entropy, reduce_sum, reshape, scale, soft_mode
from remede.cell import RemedeCell
from remede.data.generators import SequenceExample, generate_dataset
from remede.data.io import split_dataset
from remede.errors import DivergenceError, GradientError
from remede.schemas import ExperimentConfig, HistoryRow, SearchTrial, TaskId, TrainConfig, TrialReport
from remede.scoring import dense_metrics, evaluate_model, naive_baseline, random_guess_baseline
from remede.tree.prune import prune, tree_size
from remede.utils import derive_rng, derive_seed, get_logger, mean_std

logger = get_logger("remede.training")

# seed stream keys
SHUFFLE_STREAM = 1
INIT_STREAM = 3
SEARCH_STREAM = 4
TRIAL_STREAM = 5
VALID_STREAM = 6


# --------------------------------------------------------------- optimizer

@dataclass
class OptimizerState:
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0

    @classmethod
    def init(cls, params: Dict[str, Tensor]) -> "OptimizerState":
        return cls(
            m={k: np.zeros_like(p.data) for k, p in params.items()},
            v={k: np.zeros_like(p.data) for k, p in params.items()},
        )


def adam_step(params: Dict[str, Tensor], grads: Dict[str, np.ndarray], state: OptimizerState, lr: float,
              betas: Tuple[float, float] = (0.9, 0.999), eps: float = 1e-8) -> OptimizerState:
    """Bias-corrected Adam update, applied in place to every parameter."""
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise GradientError(f"non-finite gradient for parameter {name!r}")
        if g.shape != params[name].shape:
            raise GradientError(f"gradient for {name!r} has shape {g.shape}, parameter {params[name].shape}")
    beta1, beta2 = betas
    state.step += 1
    bias_correction1 = 1 - beta1 ** state.step
    bias_correction2 = 1 - beta2 ** state.step
    step_size = lr * np.sqrt(bias_correction2) / bias_correction1
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            continue
        m = state.m.setdefault(name, np.zeros_like(p.data))
        v = state.v.setdefault(name, np.zeros_like(p.data))
        m *= beta1
        m += (1 - beta1) * g
        v *= beta2
        v += (1 - beta2) * g * g
        p.data -= step_size * m / (np.sqrt(v) + eps)
    return state


def clip_grad_norm(grads: Dict[str, np.ndarray], max_norm: Optional[float]) -> Tuple[float, bool]:
    """Scales all gradients in place so their global L2 norm is at most max_norm."""
    total = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))
    if max_norm is None or total <= max_norm or not np.isfinite(total):
        return total, False
    factor = max_norm / total
    for g in grads.values():
        g *= factor
    logger.debug("clipped gradient norm %.4g -> %.4g", total, max_norm)
    return total, True


class NormTracker:
    """
    Running mean of recent gradient norms. After `warmup` batches the clip
    ceiling becomes `factor` times that mean (or the fixed clip, if lower).
    """

    def __init__(self, factor: Optional[float], decay: float = 0.98, warmup: int = 10):
        self.factor = factor
        self.decay = decay
        self.warmup = warmup
        self.mean: Optional[float] = None
        self.seen = 0

    def ceiling(self, max_norm: Optional[float]) -> Optional[float]:
        if self.factor is None or self.seen < self.warmup or not self.mean:
            return max_norm
        cap = self.factor * self.mean
        return cap if max_norm is None else min(max_norm, cap)

    def update(self, norm: float) -> None:
        if not np.isfinite(norm):
            return
        self.seen += 1
        self.mean = norm if self.mean is None else self.decay * self.mean + (1 - self.decay) * norm


# ------------------------------------------------------------------ losses

def minibatch_loss(cell: RemedeCell, batch: Sequence[SequenceExample]) -> Tensor:
    """Mean over the batch of per-sequence mean cross-entropy; ragged batches are split by length."""
    by_len: Dict[int, List[SequenceExample]] = defaultdict(list)
    for seq in batch:
        by_len[seq.length].append(seq)
    total = None
    for L, group in sorted(by_len.items()):
        inputs = np.stack([s.inputs for s in group])
        targets = np.stack([s.classes for s in group])
        logits, _ = cell.unroll_batch(inputs)
        ce = cross_entropy(reshape(logits, (len(group) * L, cell.n_classes)), targets.reshape(-1))
        part = scale(reduce_sum(ce), 1.0 / (L * len(batch)))
        total = part if total is None else add(total, part)
    return total


class EarlyStopping:
    """
    Keeps the best validation accuracy, lower loss breaking ties. Stops after
    `patience` epochs in which neither the accuracy nor the loss improved.
    """

    def __init__(self, patience: int, min_rel_delta: float = 1e-3):
        self.patience = patience
        self.min_rel_delta = min_rel_delta
        self.best: Optional[float] = None
        self.best_loss: Optional[float] = None
        self.lowest_loss: Optional[float] = None
        self.bad_epochs = 0

    def step(self, metric: float, loss: Optional[float] = None) -> bool:
        """Returns True when (metric, loss) is the new best."""
        improved = self.best is None or metric > self.best or (
            metric == self.best and loss is not None and self.best_loss is not None and loss < self.best_loss
        )
        lower = loss is not None and (
            self.lowest_loss is None or loss < self.lowest_loss * (1 - self.min_rel_delta)
        )
        if loss is not None and (self.lowest_loss is None or loss < self.lowest_loss):
            self.lowest_loss = loss
        if improved:
            self.best, self.best_loss = metric, loss
        self.bad_epochs = 0 if improved or lower else self.bad_epochs + 1
        return improved

    @property
    def should_stop(self) -> bool:
        return self.bad_epochs >= self.patience or self.best == 1.0


# --------------------------------------------------------------------- fit

def fit(cell: RemedeCell, train: Sequence[SequenceExample], valid: Sequence[SequenceExample],
        cfg: TrainConfig, on_epoch: Optional[Callable[[HistoryRow], None]] = None
        ) -> Tuple[RemedeCell, List[HistoryRow]]:
    """
    Mini-batch training with per-epoch seeded shuffling. The parameters with
    the best validation accuracy (lower validation loss on ties) are restored
    before returning.
    """
    if len(train) == 0 or len(valid) == 0:
        raise ValueError("fit needs non-empty training and validation sets")
    params = cell.named_parameters()
    state = OptimizerState.init(params)
    shuffle_rng = derive_rng(cfg.seed, SHUFFLE_STREAM)
    stopper = EarlyStopping(cfg.patience)
    tracker = NormTracker(cfg.spike_factor)
    best = cell.tree.snapshot()
    history: List[HistoryRow] = []

    for epoch in range(1, cfg.max_epochs + 1):
        order = shuffle_rng.permutation(len(train))
        losses, n_clipped = [], 0
        for start in range(0, len(order), cfg.batch_size):
            batch = [train[i] for i in order[start:start + cfg.batch_size]]
            with soft_mode(cfg.soft_mode), Tape() as tape:
                loss = minibatch_loss(cell, batch)
            if not np.isfinite(loss.item()):
                raise DivergenceError(
                    f"non-finite loss at epoch {epoch}, batch {start // cfg.batch_size} (lr={cfg.learning_rate:g})"
                )
            raw = backward(tape, loss, params.values())
            grads = {name: raw[p] for name, p in params.items()}
            ceiling = tracker.ceiling(cfg.clip_norm)
            norm, clipped = clip_grad_norm(grads, ceiling)
            tracker.update(norm if ceiling is None else min(norm, ceiling))
            n_clipped += int(clipped)
            adam_step(params, grads, state, cfg.learning_rate)
            losses.append(loss.item())

        val_acc, val_loss = dense_metrics(cell, valid)
        if stopper.step(val_acc, val_loss):
            best = cell.tree.snapshot()
        row = HistoryRow(epoch=epoch, train_loss=float(np.mean(losses)), val_accuracy=val_acc,
                         val_loss=val_loss, best_val_accuracy=stopper.best)
        history.append(row)
        if on_epoch is not None:
            on_epoch(row)
        if n_clipped:
            logger.info("epoch %d: gradient clipped in %d batches", epoch, n_clipped)
        logger.debug("epoch %d: loss=%.5f val_acc=%.4f val_loss=%.5f best=%.4f",
                     epoch, row.train_loss, val_acc, val_loss, stopper.best)
        if stopper.should_stop:
            break

    cell.tree.restore(best)
    logger.info("fit finished after %d epochs, best validation accuracy %.4f", len(history), stopper.best)
    return cell, history


# ------------------------------------------------------------- experiments

def split_for_training(data: Sequence[SequenceExample], cfg: ExperimentConfig, seed: int):
    """(train, valid, test) with train + valid forming the training set."""
    train_full, test = split_dataset(data, cfg.split_fraction, seed)
    train, valid = split_dataset(train_full, 1.0 - cfg.train.valid_fraction, derive_seed(seed, VALID_STREAM))
    return train, valid, test


def init_cell(cfg: TrainConfig, n_x: int, train: Sequence[SequenceExample], seed: int) -> RemedeCell:
    """Warm-up batch: the first batch_size training sequences sharing the first one's length."""
    L = train[0].length
    warmup = np.stack([s.inputs for s in train if s.length == L][:cfg.batch_size])
    return RemedeCell.init(derive_rng(seed, INIT_STREAM), n_x=n_x, n_m=cfg.n_m,
                           n_classes=cfg.n_classes, depth=cfg.depth, warmup=warmup)


def _map(fn, jobs: list, workers: int) -> list:
    if workers <= 1 or len(jobs) <= 1:
        return [fn(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(fn, jobs))


def _search_job(job) -> SearchTrial:
    trial, lr, train, valid, cfg = job
    tcfg = cfg.train.model_copy(update={"learning_rate": lr, "max_epochs": cfg.train.search_epochs})
    cell = init_cell(tcfg, train[0].n_x, train, cfg.seed)
    _, history = fit(cell, train, valid, tcfg)
    return SearchTrial(trial=trial, lr=lr, val_accuracy=history[-1].best_val_accuracy, epochs_run=len(history))


def lr_search(task: TaskId, cfg: ExperimentConfig, n_trials: Optional[int] = None,
              lr_range: Optional[Tuple[float, float]] = None,
              data: Optional[List[SequenceExample]] = None) -> Tuple[float, List[SearchTrial]]:
    """
    Seeded log-uniform random search over the learning rate. Each trial
    starts from the same initialisation and runs a shortened fit; the best
    validation accuracy wins, ties going to the lower rate.
    """
    n_trials = cfg.search_trials if n_trials is None else n_trials
    if n_trials < 1:
        raise ValueError("lr_search needs at least one trial")
    lo, hi = lr_range or cfg.lr_range
    if not 0 < lo <= hi:
        raise ValueError(f"lr_range must satisfy 0 < low <= high, got {(lo, hi)}")
    if data is None:
        data = generate_dataset(task, cfg.gen)
    train, valid, _ = split_for_training(data, cfg, cfg.seed)
    rng = derive_rng(cfg.seed, SEARCH_STREAM)
    lrs = np.exp(rng.uniform(np.log(lo), np.log(hi), size=n_trials))
    jobs = [(t, float(lr), train, valid, cfg) for t, lr in enumerate(lrs)]
    log = _map(_search_job, jobs, cfg.parallel_trials)
    for t in log:
        logger.info("search trial %d: lr=%.3g val_acc=%.4f epochs=%d", t.trial, t.lr, t.val_accuracy, t.epochs_run)
    best = min(log, key=lambda t: (-t.val_accuracy, t.lr))
    logger.info("selected lr=%.3g (val_acc=%.4f)", best.lr, best.val_accuracy)
    return best.lr, log


@dataclass
class TrialOutcome:
    trial: int
    seed: int
    accuracy: float
    tree_size: int
    random_guess: float
    naive: float
    epochs_run: int


def _trial_job(job) -> TrialOutcome:
    trial, data, cfg = job
    seed = derive_seed(cfg.seed, TRIAL_STREAM, trial)
    train, valid, test = split_for_training(data, cfg, seed)
    tcfg = cfg.train.model_copy(update={"seed": seed})
    cell = init_cell(tcfg, data[0].n_x, train, seed)
    cell, history = fit(cell, train, valid, tcfg)
    acc = evaluate_model(cell, test)
    train_full = list(train) + list(valid)
    size = tree_size(prune(cell.tree, train_full, cell))
    outcome = TrialOutcome(
        trial=trial, seed=seed, accuracy=acc, tree_size=size,
        random_guess=random_guess_baseline(test, seed),
        naive=naive_baseline(train_full, test),
        epochs_run=len(history),
    )
    logger.info("trial %d: test accuracy %.4f, pruned size %d", trial, acc, size)
    return outcome


def run_trials(task: TaskId, cfg: ExperimentConfig, n_trials: Optional[int] = None,
               data: Optional[List[SequenceExample]] = None) -> TrialReport:
    """Independent split, initialisation and shuffling per trial; one shared dataset."""
    task = TaskId(task)
    n_trials = cfg.n_trials if n_trials is None else n_trials
    if data is None:
        data = generate_dataset(task, cfg.gen)
    outcomes = _map(_trial_job, [(t, data, cfg) for t in range(n_trials)], cfg.parallel_trials)
    accs = [o.accuracy for o in outcomes]
    sizes = [o.tree_size for o in outcomes]
    stats = mean_std(accs)
    return TrialReport(
        task_id=task.value,
        accuracies=accs,
        mean=stats["mean"],
        std=stats["std"],
        sizes=sizes,
        mean_size=float(np.mean(sizes)),
        learning_rate=cfg.train.learning_rate,
        random_guess=[o.random_guess for o in outcomes],
        naive=[o.naive for o in outcomes],
    )
