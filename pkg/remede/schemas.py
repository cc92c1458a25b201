from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, Field, field_validator, model_validator


class TaskId(str, Enum):
    poc1 = "poc1"
    poc2 = "poc2"
    poc3 = "poc3"
    poc4 = "poc4"
    poc5 = "poc5"


class GenConfig(BaseModel):
    # 데이터 생성 파라미터 (기본값 = PoC 기본 실험 설정)
    v: float = Field(0.5, gt=0, description="Half-width of the initial value range U(-v, v)")
    d: int = Field(5, ge=0, description="Fixed delay (PoC1/2) and zero-block length (PoC5)")
    d_min: int = Field(3, ge=1, description="Lower bound of the variable delay (PoC3/4)")
    d_max: int = Field(7, ge=1, description="Upper bound of the variable delay (PoC3/4)")
    noise_mean: float = Field(-0.01, description="Mean of the noise added to delay positions")
    noise_std: float = Field(0.01, ge=0, description="Standard deviation of the delay noise")
    n_sequences: int = Field(10_000, gt=0, description="Number of sequences per dataset")
    block_len: int = Field(1, ge=1, description="PoC5 non-zero block length l")
    n_blocks: int = Field(5, ge=2, description="PoC5 number of non-zero blocks n")
    seed: int = Field(0, ge=0, description="Generator seed")

    @model_validator(mode="after")
    def _delay_range(self):
        if self.d_min > self.d_max:
            raise ValueError(f"d_min ({self.d_min}) must not exceed d_max ({self.d_max})")
        return self


class TrainConfig(BaseModel):
    depth: int = Field(6, ge=1, le=12, description="Tree depth")
    n_m: int = Field(5, ge=1, description="Hidden memory size")
    n_classes: int = Field(3, ge=2, description="Number of output classes")
    learning_rate: float = Field(0.01, ge=0, description="Adam step size (0 freezes the parameters)")
    batch_size: int = Field(64, ge=1)
    max_epochs: int = Field(200, ge=1)
    patience: int = Field(20, ge=1, description="Epochs without validation accuracy or loss improvement before stopping")
    clip_norm: Optional[float] = Field(10.0, gt=0, description="Global gradient-norm clip; None disables")
    spike_factor: Optional[float] = Field(
        4.0, gt=1, description="Cap each batch gradient norm at this multiple of the running mean norm; None disables"
    )
    valid_fraction: float = Field(0.1, gt=0, lt=1, description="Share of training data held out for early stopping")
    search_epochs: int = Field(30, ge=1, description="Epochs per learning-rate search trial")
    seed: int = Field(0, ge=0)
    soft_mode: bool = Field(False, description="Smooth surrogates instead of ST ops (gradient tests only)")


class ExperimentConfig(BaseModel):
    task: TaskId = TaskId.poc1
    gen: GenConfig = Field(default_factory=GenConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    out_dir: str = "runs"
    n_trials: int = Field(5, ge=1, description="Independent random trials per report")
    search_trials: int = Field(60, ge=1, description="Learning-rate search budget")
    lr_range: Tuple[float, float] = (1e-4, 1e-1)
    split_fraction: float = Field(0.8, gt=0, lt=1, description="Train share of the train/test split")
    parallel_trials: int = Field(1, ge=1)
    seed: int = Field(0, ge=0, description="Master seed; copied into gen.seed and train.seed")

    @field_validator("lr_range")
    @classmethod
    def _positive_range(cls, v):
        lo, hi = v
        if not 0 < lo <= hi:
            raise ValueError(f"lr_range must satisfy 0 < low <= high, got {v}")
        return v

    @model_validator(mode="after")
    def _propagate_seed(self):
        # 모든 난수는 하나의 seed 에서 파생된다
        self.gen.seed = self.seed
        self.train.seed = self.seed
        return self


class SequenceRecord(BaseModel):
    """One JSONL dataset line."""
    task: TaskId
    inputs: List[List[float]] = Field(..., min_length=1)
    targets: List[int]

    @model_validator(mode="after")
    def _consistent(self):
        if len(self.targets) != len(self.inputs):
            raise ValueError(f"{len(self.inputs)} input rows but {len(self.targets)} targets")
        if len({len(row) for row in self.inputs}) != 1:
            raise ValueError("input rows have different widths")
        bad = [t for t in self.targets if t not in (-1, 0, 1)]
        if bad:
            raise ValueError(f"targets must lie in {{-1, 0, 1}}, got {bad[:3]}")
        return self


class LeafPayloadRecord(BaseModel):
    class_logits: List[float]
    gate_logits: List[float]
    input_weights: List[List[float]]


class Checkpoint(BaseModel):
    depth: int = Field(..., ge=1, le=12)
    n_x: int = Field(..., ge=1)
    n_m: int = Field(..., ge=1)
    n_classes: int = Field(..., ge=2)
    thresholds: List[List[float]]
    feature_logits: List[List[float]]
    leaf_payloads: List[LeafPayloadRecord]
    seed: int = 0
    task_id: Optional[str] = None


class HistoryRow(BaseModel):
    epoch: int
    train_loss: float
    val_accuracy: float
    val_loss: float
    best_val_accuracy: float


class SearchTrial(BaseModel):
    trial: int
    lr: float
    val_accuracy: float
    epochs_run: int


class TrialReport(BaseModel):
    task_id: str
    accuracies: List[float]
    mean: float
    std: float
    sizes: List[int] = []
    mean_size: Optional[float] = None
    learning_rate: Optional[float] = None
    random_guess: List[float] = []
    naive: List[float] = []
    search_trials: List[SearchTrial] = Field(default_factory=list, description="Learning-rate search log, if one ran")
    std_ddof: int = Field(1, description="Standard deviations use the sample formula (n - 1)")


class RunManifest(BaseModel):
    command: str
    seed: int
    config: Dict[str, Any]
    inputs: List[Dict[str, str]] = []
    artifacts: List[Dict[str, str]] = []
