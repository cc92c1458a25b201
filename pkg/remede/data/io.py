# remede/data/io.py
import json
from pathlib import Path
from typing import List, Sequence, Tuple

import numpy as np
from pydantic import ValidationError

from remede.data.generators import SequenceExample
from remede.errors import DatasetFormatError
from remede.schemas import SequenceRecord
from remede.utils import derive_rng

SPLIT_STREAM = 2


def split_dataset(data: Sequence[SequenceExample], fraction: float, seed: int
                  ) -> Tuple[List[SequenceExample], List[SequenceExample]]:
    """Seeded shuffle, then the first round(fraction * n) examples form the train part."""
    if not 0 < fraction < 1:
        raise ValueError(f"split fraction must be in (0, 1), got {fraction}")
    order = derive_rng(seed, SPLIT_STREAM).permutation(len(data))
    n_train = int(round(fraction * len(data)))
    return [data[i] for i in order[:n_train]], [data[i] for i in order[n_train:]]


def to_record(seq: SequenceExample) -> dict:
    return {"task": seq.task_id.value, "inputs": seq.inputs.tolist(), "targets": seq.targets.tolist()}


def write_jsonl(path, data: Sequence[SequenceExample]) -> None:
    with open(Path(path), "w", encoding="utf-8", newline="\n") as f:
        for seq in data:
            f.write(json.dumps(to_record(seq)) + "\n")


def read_jsonl(path) -> List[SequenceExample]:
    out: List[SequenceExample] = []
    with open(Path(path), "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                rec = SequenceRecord.model_validate(json.loads(line))
            except (json.JSONDecodeError, ValidationError) as e:
                first = str(e).splitlines()[0] if str(e) else type(e).__name__
                raise DatasetFormatError(f"{path}: line {lineno}: {first}") from e
            out.append(SequenceExample(np.asarray(rec.inputs), np.asarray(rec.targets), rec.task))
    return out
