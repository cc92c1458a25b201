import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from remede.autodiff import Tape, backward, constant, finite_diff_check, no_tape, soft_mode
from remede.cell import (
    HiddenState,
    RemedeCell,
    batch_loss,
    load_checkpoint,
    save_checkpoint,
    sequence_loss,
    step,
    unroll,
)
from remede.errors import ShapeError
from remede.schemas import Checkpoint


def _close_all_gates(cell):
    cell.tree.leaves["gate_logits"].data[...] = -10.0


def test_init_shapes(small_cell):
    leaves = small_cell.tree.leaves
    assert leaves["class_logits"].shape == (8, 3)
    assert leaves["gate_logits"].shape == (8, 2)
    assert leaves["input_weights"].shape == (8, 2, 2)
    assert small_cell.tree.thresholds.shape == (7, 4)
    assert_array_equal(leaves["gate_logits"].data, np.zeros((8, 2)))


def test_step_shapes_and_memory_update(small_cell):
    with no_tape():
        z, nxt = step(small_cell, constant([0.3, -0.1]), HiddenState.zeros(2))
    assert z.shape == (3,)
    assert nxt.m.shape == (2,)
    # zero gate logits round to open gates: m = tanh(W x)
    trace = small_cell.infer(np.array([[0.3, -0.1]]))
    assert_allclose(nxt.m.data, trace.states[1])


def test_open_gate_with_zero_weights_keeps_state(small_cell):
    small_cell.tree.leaves["gate_logits"].data[...] = 10.0
    small_cell.tree.leaves["input_weights"].data[...] = 0.0
    m_prev = HiddenState(constant([0.4, -0.7]))
    with no_tape():
        _, nxt = step(small_cell, constant([0.9, -0.3]), m_prev)
    assert_array_equal(nxt.m.data, [0.4, -0.7])


def test_step_rejects_wrong_shapes(small_cell):
    with pytest.raises(ShapeError):
        step(small_cell, constant([0.3]), HiddenState.zeros(2))


def test_closed_gates_keep_state(small_cell, rng):
    _close_all_gates(small_cell)
    trace = small_cell.infer(rng.normal(size=(6, 2)))
    assert_array_equal(trace.states, np.zeros((7, 2)))


def test_unroll_empty_sequence(small_cell):
    with pytest.raises(ValueError):
        unroll(small_cell, np.zeros((0, 2)))


def test_dense_unroll_matches_inference(small_cell, rng):
    inputs = rng.normal(size=(40, 5, 2))
    with no_tape():
        logits, m = small_cell.unroll_batch(inputs)
    for b in range(inputs.shape[0]):
        trace = small_cell.infer(inputs[b])
        assert_array_equal(logits.data[b], trace.logits)
        assert_allclose(m.data[b], trace.states[-1], rtol=0, atol=1e-12)
    assert_array_equal(small_cell.predict_batch(inputs),
                       np.stack([small_cell.predict(x) for x in inputs]))


def test_sequence_loss_is_mean_cross_entropy(small_cell, rng):
    x = rng.normal(size=(4, 2))
    targets = np.array([0, 1, 2, 1])
    with no_tape():
        logits, _ = unroll(small_cell, x)
        loss = sequence_loss(logits, targets).item()
    z = logits.data
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    assert loss == pytest.approx(-np.mean(logp[np.arange(4), targets]))


def test_batch_loss_equals_mean_of_sequence_losses(small_cell, rng):
    inputs = rng.normal(size=(3, 4, 2))
    targets = rng.integers(0, 3, size=(3, 4))
    with no_tape():
        logits, _ = small_cell.unroll_batch(inputs)
        total = batch_loss(logits, targets).item()
        per_seq = [sequence_loss(unroll(small_cell, inputs[b])[0], targets[b]).item() for b in range(3)]
    assert total == pytest.approx(np.mean(per_seq))


def test_bptt_reaches_first_timestep_inputs(rng):
    cell = RemedeCell.init(rng, n_x=1, n_m=2, n_classes=3, depth=3)
    inputs = np.zeros((8, 1))
    inputs[0, 0] = 0.4
    targets = np.ones(8, dtype=np.int64)
    targets[-1] = 2

    def loss_of(_):
        logits, _ = unroll(cell, inputs)
        return sequence_loss(logits, targets)

    with soft_mode():
        for name, p in cell.named_parameters().items():
            err = finite_diff_check(loss_of, p, n_entries=min(13, p.data.size), rng=np.random.default_rng(0))
            assert err < 1e-4, name


def test_gradients_flow_in_hard_mode(small_cell, rng):
    inputs = rng.normal(size=(2, 6, 2))
    with Tape() as tape:
        logits, _ = small_cell.unroll_batch(inputs)
        loss = batch_loss(logits, np.ones((2, 6), dtype=np.int64))
    grads = backward(tape, loss, small_cell.parameters())
    assert np.any(grads[small_cell.tree.leaves["class_logits"]] != 0)
    assert np.all(np.isfinite(grads[small_cell.tree.thresholds]))


def test_checkpoint_round_trip_is_exact(small_cell, tmp_path):
    path = tmp_path / "ckpt.json"
    save_checkpoint(small_cell, path, seed=9, task_id="poc2")
    loaded, ckpt = load_checkpoint(path)
    assert isinstance(ckpt, Checkpoint) and ckpt.seed == 9
    for name, p in small_cell.named_parameters().items():
        assert_array_equal(loaded.named_parameters()[name].data, p.data)


def test_custom_router_is_used(small_cell):
    payload = {
        "class_logits": np.array([0.0, 0.0, 5.0]),
        "gate_logits": np.array([-10.0, -10.0]),
        "input_weights": np.zeros((2, 2)),
    }
    trace = small_cell.infer(np.zeros((3, 2)), router=lambda x: (0, payload))
    assert_array_equal(trace.predictions, [2, 2, 2])
    assert_array_equal(trace.leaves, [0, 0, 0])
