# remede/data/generators.py
"""
Synthetic delayed-recall tasks.

poc1  sign of the first value, fixed delay, one channel (trigger in the same channel)
poc2  as poc1, trigger on a second channel
poc3  variable delay in [d_min, d_max], fixed length d_max + 2, one channel
poc4  as poc3, trigger on a second channel
poc5  alternating +-1 blocks separated by zero blocks; echo the previous block
"""
from dataclasses import dataclass
from typing import Callable, Dict, List

import numpy as np

from remede.schemas import GenConfig, TaskId
from remede.utils import get_logger

logger = get_logger("remede.data")

TRIGGER = 1.0
CLASS_VALUES = (-1, 0, 1)


def encode_targets(values) -> np.ndarray:
    """{-1, 0, 1} -> class indices {0, 1, 2}."""
    return np.asarray(values, dtype=np.int64) + 1


@dataclass
class SequenceExample:
    inputs: np.ndarray   # [L, n_x]
    targets: np.ndarray  # [L], values in {-1, 0, 1}
    task_id: TaskId

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        self.targets = np.asarray(self.targets, dtype=np.int64)
        if self.inputs.ndim != 2 or self.inputs.shape[0] != self.targets.shape[0]:
            raise ValueError(f"inputs {self.inputs.shape} do not match targets {self.targets.shape}")
        self.task_id = TaskId(self.task_id)

    @property
    def length(self) -> int:
        return self.inputs.shape[0]

    @property
    def n_x(self) -> int:
        return self.inputs.shape[1]

    @property
    def classes(self) -> np.ndarray:
        return encode_targets(self.targets)


def sign(x: float) -> int:
    return 1 if x >= 0 else -1


def add_noise(seq: SequenceExample, cfg: GenConfig, rng: np.random.Generator) -> SequenceExample:
    """N(noise_mean, noise_std) on every zero-valued input position; other entries untouched."""
    inputs = seq.inputs.copy()
    mask = inputs == 0.0
    if cfg.noise_std > 0:
        noise = rng.normal(cfg.noise_mean, cfg.noise_std, size=inputs.shape)
    else:
        noise = np.full(inputs.shape, cfg.noise_mean)
    inputs[mask] = inputs[mask] + noise[mask]
    return SequenceExample(inputs=inputs, targets=seq.targets.copy(), task_id=seq.task_id)


def _fixed_delay(cfg: GenConfig, rng: np.random.Generator, n_x: int, task: TaskId) -> SequenceExample:
    L = cfg.d + 2
    x0 = rng.uniform(-cfg.v, cfg.v)
    inputs = np.zeros((L, n_x))
    inputs[0, 0] = x0
    inputs[L - 1, n_x - 1] = TRIGGER
    targets = np.zeros(L, dtype=np.int64)
    targets[L - 1] = sign(x0)
    return add_noise(SequenceExample(inputs, targets, task), cfg, rng)


def _variable_delay(cfg: GenConfig, rng: np.random.Generator, n_x: int, task: TaskId) -> SequenceExample:
    if cfg.d_min < 1:
        raise ValueError("variable-delay tasks need d_min >= 1")
    L = cfg.d_max + 2
    x0 = rng.uniform(-cfg.v, cfg.v)
    delta = int(rng.integers(cfg.d_min, cfg.d_max + 1))
    pos = delta + 1
    inputs = np.zeros((L, n_x))
    inputs[0, 0] = x0
    inputs[pos, n_x - 1] = TRIGGER
    targets = np.zeros(L, dtype=np.int64)
    targets[pos] = sign(x0)
    return add_noise(SequenceExample(inputs, targets, task), cfg, rng)


def gen_poc1(cfg: GenConfig, rng: np.random.Generator) -> SequenceExample:
    return _fixed_delay(cfg, rng, 1, TaskId.poc1)


def gen_poc2(cfg: GenConfig, rng: np.random.Generator) -> SequenceExample:
    return _fixed_delay(cfg, rng, 2, TaskId.poc2)


def gen_poc3(cfg: GenConfig, rng: np.random.Generator) -> SequenceExample:
    return _variable_delay(cfg, rng, 1, TaskId.poc3)


def gen_poc4(cfg: GenConfig, rng: np.random.Generator) -> SequenceExample:
    return _variable_delay(cfg, rng, 2, TaskId.poc4)


def poc5_sequence(blocks, block_len: int, delay: int):
    """Clean (inputs, targets) for the given block signs."""
    blocks = [int(b) for b in blocks]
    if len(blocks) < 2 or block_len < 1:
        raise ValueError("poc5 needs at least two blocks of length >= 1")
    period = block_len + delay
    L = len(blocks) * block_len + (len(blocks) - 1) * delay
    x = np.zeros(L)
    y = np.zeros(L, dtype=np.int64)
    for j, b in enumerate(blocks):
        start = j * period
        x[start:start + block_len] = b
        if j > 0:
            y[start:start + block_len] = blocks[j - 1]
    return x[:, None], y


def gen_poc5(cfg: GenConfig, rng: np.random.Generator) -> SequenceExample:
    blocks = rng.choice(np.array([-1, 1]), size=cfg.n_blocks)
    inputs, targets = poc5_sequence(blocks, cfg.block_len, cfg.d)
    return add_noise(SequenceExample(inputs, targets, TaskId.poc5), cfg, rng)


GENERATORS: Dict[TaskId, Callable[[GenConfig, np.random.Generator], SequenceExample]] = {
    TaskId.poc1: gen_poc1,
    TaskId.poc2: gen_poc2,
    TaskId.poc3: gen_poc3,
    TaskId.poc4: gen_poc4,
    TaskId.poc5: gen_poc5,
}


def generate_dataset(task: TaskId, cfg: GenConfig) -> List[SequenceExample]:
    """n_sequences examples; sequence i uses its own child seed of cfg.seed."""
    task = TaskId(task)
    gen = GENERATORS[task]
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.n_sequences)
    data = [gen(cfg, np.random.default_rng(child)) for child in children]
    logger.info("generated %d %s sequences (seed=%d, length=%d)", len(data), task.value, cfg.seed, data[0].length)
    return data
