import numpy as np
import pytest
import torch

from config import SynthConfig, TrainConfig, gradcheck_config, replace
from errors import GradcheckFailure, ShapeError, TrainingError
from model import ABLATION_ROWS
from synth import synth_generate
from training import (
    OptimizerState, adam_update, finite_diff_gradcheck, init_parameters, input_windows, lr_at_epoch,
    predict_sequence, prepare_windows, train_epochs, train_steps,
)

QUIET = TrainConfig(progress=False)


def _scalar_state(lr=0.001):
    theta = torch.nn.Parameter(torch.zeros(1, dtype=torch.float64))
    state = OptimizerState(torch.optim.Adam([theta], lr=lr, betas=(0.9, 0.999), eps=1e-8))
    return {'theta': theta}, state


@pytest.fixture
def small_set(tiny_config):
    """16 windows of the tiny 4-frame chain model."""
    rng = np.random.default_rng(0)
    p2d = rng.normal(scale=100.0, size=(64, 5, 2))
    p3d = rng.normal(scale=300.0, size=(64, 5, 3))
    return prepare_windows(p2d, p3d, tiny_config, QUIET)


# ============================================================================
# INITIALIZATION AND OPTIMIZER
# ============================================================================

def test_init_is_deterministic(tiny_config):
    a = init_parameters(tiny_config, seed=3).state_dict()
    b = init_parameters(tiny_config, seed=3).state_dict()
    assert all(torch.equal(a[name], b[name]) for name in a)


def test_init_values(tiny_config):
    model = init_parameters(tiny_config, seed=1)
    for block in model.blocks:
        assert not block.attn.bias_t.any() and not block.attn.bias_s.any()
        for layer in block.gcn.layers:
            for m in list(layer.spatial.modulations) + list(layer.temporal.modulations):
                assert torch.all(m == 1)
        assert torch.all(block.norm1.weight == 1) and not block.norm1.bias.any()
    bound = 1 / np.sqrt(2)
    assert torch.all(model.embed_w.abs() <= bound) and model.embed_w.abs().max() > 0


def test_adam_single_step_hand_value():
    params, state = _scalar_state()
    adam_update(params, {'theta': torch.ones(1, dtype=torch.float64)}, state, 0.001)
    # m̂ = v̂ = 1 after bias correction
    assert float(params['theta']) == pytest.approx(-0.001 / (1 + 1e-8), rel=1e-12)
    assert state.step == 1


def test_adam_zero_gradient_is_fixed_point():
    params, state = _scalar_state()
    params['theta'].data.fill_(0.5)
    adam_update(params, {'theta': torch.zeros(1, dtype=torch.float64)}, state, 0.001)
    assert float(params['theta']) == 0.5


def test_adam_state_advances():
    params, state = _scalar_state()
    grads = {'theta': torch.ones(1, dtype=torch.float64)}
    adam_update(params, grads, state, 0.001)
    first = float(state.optimizer.state[params['theta']]['exp_avg'])
    adam_update(params, grads, state, 0.001)
    second = float(state.optimizer.state[params['theta']]['exp_avg'])
    assert state.step == 2
    assert first == pytest.approx(0.1) and second == pytest.approx(0.19)


def test_adam_ignores_parameter_order():
    gen = torch.Generator().manual_seed(0)
    start = {'a': torch.randn(3, generator=gen, dtype=torch.float64),
             'b': torch.randn(2, 2, generator=gen, dtype=torch.float64)}
    grads = [{'a': torch.randn(3, generator=gen, dtype=torch.float64),
              'b': torch.randn(2, 2, generator=gen, dtype=torch.float64)} for _ in range(3)]

    finals = []
    for order in (['a', 'b'], ['b', 'a']):
        params = {name: torch.nn.Parameter(start[name].clone()) for name in order}
        state = OptimizerState(torch.optim.Adam(list(params.values()), lr=0.01))
        for step_grads in grads:
            adam_update(params, {name: step_grads[name] for name in order}, state, 0.01)
        finals.append(params)
    assert all(torch.equal(finals[0][name], finals[1][name]) for name in start)


def test_adam_rejects_non_finite_gradient():
    params, state = _scalar_state()
    with pytest.raises(TrainingError, match="theta"):
        adam_update(params, {'theta': torch.tensor([float('nan')], dtype=torch.float64)}, state, 0.001)


@pytest.mark.parametrize("epoch,expected", [(0, 0.001), (1, 0.00097), (2, 0.001 * 0.97 ** 2)])
def test_lr_schedule(epoch, expected):
    assert lr_at_epoch(0.001, 0.97, epoch) == pytest.approx(expected)


def test_constant_lr_without_decay():
    assert all(lr_at_epoch(0.001, 1.0, e) == 0.001 for e in range(5))
    with pytest.raises(TrainingError):
        lr_at_epoch(0.001, 0.97, -1)


# ============================================================================
# DATA
# ============================================================================

def test_prepare_windows_normalizes(tiny_config, small_set):
    inputs, targets = small_set
    assert inputs.shape == (16, 4, 5, 2) and targets.shape == (16, 4, 5, 3)
    assert not inputs[..., 0, :].any() and not targets[..., 0, :].any()
    assert inputs.dtype == torch.float64


def test_prepare_windows_drops_trailing_frames(tiny_config):
    inputs, _ = prepare_windows(np.ones((10, 5, 2)), np.ones((10, 5, 3)), tiny_config, QUIET)
    assert inputs.shape[0] == 2


def test_prepare_windows_rejects_bad_data(tiny_config):
    with pytest.raises(TrainingError):
        prepare_windows(np.ones((3, 5, 2)), np.ones((3, 5, 3)), tiny_config, QUIET)
    with pytest.raises(TrainingError):
        prepare_windows(np.ones((8, 5, 2)), np.ones((8, 4, 3)), tiny_config, QUIET)


def test_input_windows_cover_partial_tail(tiny_config):
    windows, starts = input_windows(np.ones((10, 5, 2)), tiny_config, QUIET)
    assert starts == [0, 4, 6]
    assert windows.shape == (3, 4, 5, 2)
    windows, starts = input_windows(np.ones((2, 5, 2)), tiny_config, QUIET)
    assert starts == [0] and windows.shape == (1, 4, 5, 2)
    with pytest.raises(ShapeError):
        input_windows(np.ones((2, 4, 2)), tiny_config, QUIET)


@pytest.mark.parametrize("frames", [2, 8, 10])
def test_predict_sequence_length_and_units(tiny_config, frames):
    model = init_parameters(tiny_config)
    p2d = np.random.default_rng(frames).normal(size=(frames, 5, 2))
    pred = predict_sequence(model, p2d, QUIET)
    assert pred.shape == (frames, 5, 3)
    windows, _ = input_windows(p2d[:4], tiny_config, QUIET)
    expected = model(windows[0]).detach().numpy() / QUIET.target_scale
    np.testing.assert_allclose(pred[:min(4, frames)], expected[:min(4, frames)])


# ============================================================================
# TRAINING LOOP
# ============================================================================

def test_training_events(tiny_config, small_set):
    cfg = replace(QUIET, epochs=2, batch_size=8)
    model = init_parameters(tiny_config)
    events = list(train_steps(model, *small_set, cfg))
    kinds = [kind for kind, _, _ in events]
    assert kinds.count('step') == 4 and kinds.count('epoch') == 2
    assert kinds[-1] == 'done'
    trace = events[-1][1]
    assert [r['step'] for r in trace] == [1, 2, 3, 4]
    assert [r['epoch'] for r in trace] == [0, 0, 1, 1]
    assert trace[2]['lr'] == pytest.approx(0.00097)


def test_max_steps_caps_training(tiny_config, small_set):
    _, trace = train_epochs(*small_set, tiny_config, replace(QUIET, epochs=5, batch_size=4, max_steps=6))
    assert len(trace) == 6


def test_zero_lr_keeps_loss_constant(tiny_config, small_set):
    cfg = replace(QUIET, lr=0.0, epochs=3, batch_size=16)
    _, trace = train_epochs(*small_set, tiny_config, cfg)
    losses = [r['loss'] for r in trace]
    assert losses == pytest.approx([losses[0]] * len(losses), rel=1e-12)


def test_training_is_deterministic(tiny_config, small_set):
    cfg = replace(QUIET, epochs=2, batch_size=4, seed=7)
    model_a, trace_a = train_epochs(*small_set, tiny_config, cfg)
    model_b, trace_b = train_epochs(*small_set, tiny_config, cfg)
    assert trace_a == trace_b
    assert all(torch.equal(p, q) for p, q in zip(model_a.parameters(), model_b.parameters()))


def test_training_reduces_loss(tiny_config, small_set):
    _, trace = train_epochs(*small_set, tiny_config, replace(QUIET, lr=0.01, epochs=10, batch_size=16))
    assert trace[-1]['loss'] < trace[0]['loss']


def test_empty_dataset_rejected(tiny_config):
    model = init_parameters(tiny_config)
    empty = torch.zeros(0, 4, 5, 2, dtype=torch.float64), torch.zeros(0, 4, 5, 3, dtype=torch.float64)
    with pytest.raises(TrainingError):
        list(train_steps(model, *empty, QUIET))


def test_non_finite_loss_aborts(tiny_config, small_set):
    inputs, targets = small_set
    targets = targets.clone()
    targets[0, 0, 1, 0] = float('inf')
    with pytest.raises(TrainingError, match="non-finite"):
        train_epochs(inputs, targets, tiny_config, replace(QUIET, batch_size=16))


@pytest.mark.slow
def test_overfits_small_synthetic_set():
    """64 windows of 16 frames, 500 steps: loss falls below 1% of its start."""
    seq = synth_generate(SynthConfig(seed=0, frames=64 * 16, step_mm=1.0))
    model_cfg = gradcheck_config(
        skeleton="h36m17", num_joints=17, num_frames=16, embed_dim=16, num_heads=2, dtype="float32",
    )
    train_cfg = replace(QUIET, lr=0.005, lr_decay=0.99, batch_size=8, epochs=63, max_steps=500, seed=0)
    inputs, targets = prepare_windows(seq.p2d, seq.p3d, model_cfg, train_cfg)
    assert inputs.shape[0] == 64

    _, trace = train_epochs(inputs, targets, model_cfg, train_cfg)
    assert len(trace) == 500
    assert trace[-1]['loss'] < 0.01 * trace[0]['loss']

    _, again = train_epochs(inputs, targets, model_cfg, train_cfg)
    assert again == trace


# ============================================================================
# GRADIENT CHECK
# ============================================================================

def test_gradcheck_default_tiny_config(tiny_config):
    report = finite_diff_gradcheck(tiny_config, seed=0)
    assert report.passed, report.per_tensor
    assert report.max_rel_error < 1e-4
    assert set(report.per_tensor) == {name for name, _ in init_parameters(tiny_config).named_parameters()}


@pytest.mark.slow
@pytest.mark.parametrize("row", sorted(ABLATION_ROWS))
def test_gradcheck_every_ablation_row(row, tiny_config):
    report = finite_diff_gradcheck(replace(tiny_config, **ABLATION_ROWS[row]), seed=1)
    assert report.max_rel_error < 1e-4, report.per_tensor


def test_gradcheck_linear_model_is_exact(tiny_config):
    cfg = replace(tiny_config, activation="identity", use_stga=False, use_smhr=False, use_tmhr=False)
    # the loss is quadratic in each single parameter, so central differences are exact at any step
    report = finite_diff_gradcheck(cfg, seed=2, step=0.1)
    assert report.max_rel_error < 1e-9


def test_gradcheck_names_corrupted_tensor(tiny_config):
    def corrupt(name, grad):
        return grad * 1.5 + 0.1 if name == 'blocks.0.attn.w_o' else grad

    report = finite_diff_gradcheck(tiny_config, seed=0, grad_transform=corrupt)
    assert report.worst_parameter == 'blocks.0.attn.w_o'
    assert not report.passed
    with pytest.raises(GradcheckFailure, match="blocks.0.attn.w_o"):
        report.raise_for_failure()


def test_gradcheck_subsamples_large_tensors(tiny_config):
    cfg = replace(tiny_config, embed_dim=32, num_heads=2)
    report = finite_diff_gradcheck(cfg, seed=0, samples=20)
    model = init_parameters(cfg)
    expected = sum(min(p.numel(), 20) for p in model.parameters())
    assert report.entries == expected
