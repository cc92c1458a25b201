from remede.data.generators import (
    CLASS_VALUES,
    GENERATORS,
    SequenceExample,
    add_noise,
    encode_targets,
    gen_poc1,
    gen_poc2,
    gen_poc3,
    gen_poc4,
    gen_poc5,
    generate_dataset,
    sign,
)
from remede.data.io import read_jsonl, split_dataset, write_jsonl

__all__ = [
    "CLASS_VALUES", "GENERATORS", "SequenceExample", "add_noise",
    "encode_targets", "gen_poc1", "gen_poc2", "gen_poc3", "gen_poc4", "gen_poc5",
    "generate_dataset", "sign", "read_jsonl", "split_dataset", "write_jsonl",
]
