import numpy as np
import pytest
from numpy.testing import assert_array_equal
from pydantic import ValidationError

from remede.data import (
    SequenceExample,
    add_noise,
    generate_dataset,
    gen_poc1,
    gen_poc2,
    gen_poc3,
    gen_poc4,
    gen_poc5,
    read_jsonl,
    split_dataset,
    write_jsonl,
)
from remede.data.generators import poc5_sequence
from remede.errors import DatasetFormatError
from remede.schemas import GenConfig, TaskId

CLEAN = GenConfig(noise_mean=0.0, noise_std=0.0)


def test_poc1_layout(rng):
    seq = gen_poc1(CLEAN, rng)
    assert seq.inputs.shape == (7, 1)
    assert seq.inputs[-1, 0] == 1.0
    assert_array_equal(seq.inputs[1:6, 0], np.zeros(5))
    assert -0.5 <= seq.inputs[0, 0] <= 0.5
    expected = np.zeros(7, dtype=np.int64)
    expected[-1] = 1 if seq.inputs[0, 0] >= 0 else -1
    assert_array_equal(seq.targets, expected)


def test_poc2_trigger_on_second_channel(rng):
    seq = gen_poc2(CLEAN, rng)
    assert seq.inputs.shape == (7, 2)
    assert seq.inputs[-1, 1] == 1.0 and seq.inputs[-1, 0] == 0.0
    assert_array_equal(seq.inputs[1:, 0], np.zeros(6))


@pytest.mark.parametrize("gen,n_x", [(gen_poc3, 1), (gen_poc4, 2)])
def test_variable_delay_layout(rng, gen, n_x):
    for _ in range(50):
        seq = gen(CLEAN, rng)
        assert seq.inputs.shape == (9, n_x)
        pos = int(np.flatnonzero(seq.targets)[0])
        assert 4 <= pos <= 8
        assert seq.inputs[pos, n_x - 1] == 1.0
        assert np.count_nonzero(seq.targets) == 1


def test_variable_delay_covers_all_delays():
    data = generate_dataset(TaskId.poc3, GenConfig(n_sequences=500, seed=11))
    positions = {int(np.flatnonzero(s.targets)[0]) for s in data}
    assert positions == {4, 5, 6, 7, 8}


def test_variable_delay_position_is_uniform():
    data = generate_dataset(TaskId.poc3, GenConfig(n_sequences=100_000, seed=12))
    positions = np.array([int(np.flatnonzero(s.targets)[0]) for s in data])
    for pos in range(4, 9):
        assert np.mean(positions == pos) == pytest.approx(0.2, abs=0.01)


@pytest.mark.parametrize("one_channel,two_channel", [(TaskId.poc1, TaskId.poc2), (TaskId.poc3, TaskId.poc4)])
def test_second_channel_variant_has_same_targets(one_channel, two_channel):
    cfg = GenConfig(n_sequences=200, seed=9)
    a = generate_dataset(one_channel, cfg)
    b = generate_dataset(two_channel, cfg)
    for s, t in zip(a, b):
        assert_array_equal(s.targets, t.targets)
        assert s.inputs[0, 0] == t.inputs[0, 0]


def test_poc5_echoes_previous_block():
    x, y = poc5_sequence([1, -1, 1], block_len=2, delay=1)
    assert_array_equal(x[:, 0], [1, 1, 0, -1, -1, 0, 1, 1])
    assert_array_equal(y, [0, 0, 0, 1, 1, 0, -1, -1])


def test_poc5_generator_defaults(rng):
    seq = gen_poc5(CLEAN, rng)
    # 5 blocks of length 1 separated by 5 zeros
    assert seq.length == 5 + 4 * 5
    assert np.count_nonzero(seq.targets) == 4


def test_noise_only_on_zero_positions(rng):
    seq = gen_poc1(CLEAN, rng)
    noisy = add_noise(seq, GenConfig(), rng)
    assert noisy.inputs[0, 0] == seq.inputs[0, 0]
    assert noisy.inputs[-1, 0] == 1.0
    assert np.all(noisy.inputs[1:6, 0] != 0.0)
    assert_array_equal(noisy.targets, seq.targets)


def test_zero_std_noise_is_constant_offset(rng):
    seq = gen_poc1(CLEAN, rng)
    shifted = add_noise(seq, GenConfig(noise_mean=-0.01, noise_std=0.0), rng)
    assert_array_equal(shifted.inputs[1:6, 0], np.full(5, -0.01))


def test_generation_is_deterministic():
    cfg = GenConfig(n_sequences=20, seed=7)
    a = generate_dataset(TaskId.poc4, cfg)
    b = generate_dataset(TaskId.poc4, cfg)
    for s, t in zip(a, b):
        assert_array_equal(s.inputs, t.inputs)
        assert_array_equal(s.targets, t.targets)


def test_sign_of_initial_value_is_roughly_balanced():
    data = generate_dataset(TaskId.poc1, GenConfig(n_sequences=1000, seed=1))
    positive = sum(int(s.targets[-1] == 1) for s in data)
    assert 400 < positive < 600


def test_gen_config_rejects_inverted_delay_range():
    with pytest.raises(ValidationError):
        GenConfig(d_min=6, d_max=4)


def test_jsonl_round_trip(tmp_path, poc3_data):
    path = tmp_path / "data.jsonl"
    write_jsonl(path, poc3_data)
    again = read_jsonl(path)
    assert len(again) == len(poc3_data)
    for s, t in zip(poc3_data, again):
        assert_array_equal(s.inputs, t.inputs)
        assert_array_equal(s.targets, t.targets)
        assert t.task_id == TaskId.poc3


def test_jsonl_reports_bad_line(tmp_path, poc1_data):
    path = tmp_path / "data.jsonl"
    write_jsonl(path, poc1_data[:2])
    with open(path, "a", encoding="utf-8") as f:
        f.write('{"task": "poc1", "inputs": [[0.1]], "targets": [5]}\n')
    with pytest.raises(DatasetFormatError, match="line 3"):
        read_jsonl(path)


def test_split_is_seeded_and_disjoint(poc1_data):
    train, test = split_dataset(poc1_data, 0.8, seed=4)
    assert len(train) == 160 and len(test) == 40
    assert {id(s) for s in train}.isdisjoint({id(s) for s in test})
    again, _ = split_dataset(poc1_data, 0.8, seed=4)
    assert [id(s) for s in again] == [id(s) for s in train]
    with pytest.raises(ValueError):
        split_dataset(poc1_data, 1.0, seed=4)


def test_sequence_example_validates_lengths():
    with pytest.raises(ValueError):
        SequenceExample(np.zeros((3, 1)), np.zeros(4), TaskId.poc1)
