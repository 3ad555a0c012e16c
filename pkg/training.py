"""
STGFormer Pose Lifter - Training
Seeded parameter initialization, the Adam step and learning-rate schedule,
window preparation, the training loop, sequence prediction, evaluation, and
the finite-difference gradient check.

The training loop is a generator in the same style as the graph searches:
it yields ('step', record, step) after every update, ('epoch', record, epoch)
after every epoch and ('done', trace, step) once at the end.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Generator, List, Optional, Sequence, Tuple

import numpy as np
import torch
from tqdm import tqdm

import constants as C
from config import ModelConfig, TrainConfig, replace
from errors import GradcheckFailure, ShapeError, TrainingError
from metrics import EvalReport, evaluate_poses, root_align
from model import STGFormer, mse_loss

logger = logging.getLogger(__name__)

TrainEvent = Tuple[str, object, int]


# ============================================================================
# INITIALIZATION AND OPTIMIZER
# ============================================================================

def init_parameters(config: ModelConfig, seed: int = 0) -> STGFormer:
    """
    Build a model with deterministic parameters.

    Projections and weights are uniform in ±1/√fan_in (fan_in = rows),
    modulations and normalization gains are one, bias tables and offsets
    are zero.

    Args:
        config: Architecture settings
        seed: Seed of the dedicated torch.Generator

    Returns:
        Initialized STGFormer
    """
    model = STGFormer(config)
    generator = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for name, param in model.named_parameters():
            if ".modulations." in name or (".norm" in name and name.endswith(".weight")):
                param.fill_(1.0)
            elif param.dim() < 2 or ".bias_" in name:
                param.zero_()
            else:
                bound = 1.0 / math.sqrt(param.shape[0])
                param.uniform_(-bound, bound, generator=generator)
    return model


@dataclass
class OptimizerState:
    """torch Adam plus the number of updates applied."""
    optimizer: torch.optim.Adam
    step: int = 0


def init_optimizer(model: torch.nn.Module, train_config: TrainConfig) -> OptimizerState:
    optimizer = torch.optim.Adam(
        model.parameters(), lr=train_config.lr,
        betas=(train_config.beta1, train_config.beta2), eps=train_config.eps,
    )
    return OptimizerState(optimizer=optimizer)


def adam_update(
    params: Dict[str, torch.nn.Parameter],
    grads: Dict[str, Optional[torch.Tensor]],
    state: OptimizerState,
    lr: float,
) -> Tuple[Dict[str, torch.nn.Parameter], OptimizerState]:
    """
    One bias-corrected Adam step with learning rate ``lr``.

    Parameters whose gradient is None are left untouched.

    Raises:
        TrainingError: If any gradient is non-finite; names the parameter
    """
    for name, grad in grads.items():
        if grad is not None and not torch.isfinite(grad).all():
            raise TrainingError(f"non-finite gradient in '{name}' at step {state.step}")
    for name, param in params.items():
        param.grad = grads.get(name)

    for group in state.optimizer.param_groups:
        group["lr"] = lr
    state.optimizer.step()
    state.step += 1
    return params, state


def lr_at_epoch(base_lr: float, decay: float, epoch: int) -> float:
    """base_lr · decay^epoch."""
    if epoch < 0:
        raise TrainingError(f"epoch must be >= 0, got {epoch}")
    return base_lr * decay ** epoch


# ============================================================================
# DATA
# ============================================================================

def _normalize_2d(p2d: np.ndarray, root: int, scale: float) -> np.ndarray:
    p2d = np.asarray(p2d, dtype=np.float64)
    return (p2d - p2d[:, root:root + 1]) * scale


def prepare_windows(
    p2d: np.ndarray,
    p3d: np.ndarray,
    model_config: ModelConfig,
    train_config: TrainConfig,
) -> Tuple[torch.Tensor, torch.Tensor]:
    """
    Cut paired sequences into non-overlapping T-frame windows.

    2D input is root-centered per frame and scaled by ``input_scale``; the 3D
    target is root-aligned and scaled by ``target_scale``. Trailing frames
    that do not fill a window are dropped.

    Returns:
        (inputs [W×T×N×2], targets [W×T×N×3]) in the model dtype

    Raises:
        TrainingError: Mismatched sequences or fewer than T frames
    """
    t = model_config.num_frames
    if p2d.shape[0] != p3d.shape[0] or p2d.shape[1:] != (model_config.num_joints, 2) \
            or p3d.shape[1:] != (model_config.num_joints, 3):
        raise TrainingError(
            f"sequences {p2d.shape} / {p3d.shape} do not pair up for {model_config.num_joints} joints"
        )
    windows = p2d.shape[0] // t
    if windows == 0:
        raise TrainingError(f"sequence of {p2d.shape[0]} frames is shorter than one {t}-frame window")

    dtype = torch.float64 if model_config.dtype == "float64" else torch.float32
    x = _normalize_2d(p2d, model_config.root_joint, train_config.input_scale)
    y = root_align(p3d, model_config.root_joint) * train_config.target_scale
    x = x[:windows * t].reshape(windows, t, *x.shape[1:])
    y = y[:windows * t].reshape(windows, t, *y.shape[1:])
    return torch.as_tensor(x, dtype=dtype), torch.as_tensor(y, dtype=dtype)


def _window_starts(frames: int, t: int) -> List[int]:
    starts = list(range(0, frames - t + 1, t))
    if frames % t:
        starts.append(frames - t)
    return starts


def input_windows(p2d: np.ndarray, model_config: ModelConfig, train_config: TrainConfig) -> Tuple[torch.Tensor, List[int]]:
    """
    Normalized 2D windows tiling a whole sequence.

    Windows start every T frames; a final partial window is taken flush with
    the end. Sequences shorter than T are padded by repeating the last frame.

    Returns:
        (windows [W×T×N×2] in the model dtype, start frame of each window)
    """
    t = model_config.num_frames
    if p2d.ndim != 3 or p2d.shape[1:] != (model_config.num_joints, 2):
        raise ShapeError(f"2D sequence {p2d.shape} does not match {model_config.num_joints} joints")
    if p2d.shape[0] == 0:
        raise ShapeError("2D sequence has no frames")
    x = _normalize_2d(p2d, model_config.root_joint, train_config.input_scale)
    if x.shape[0] < t:
        x = np.concatenate([x, np.repeat(x[-1:], t - x.shape[0], axis=0)])
    starts = _window_starts(x.shape[0], t)
    dtype = torch.float64 if model_config.dtype == "float64" else torch.float32
    return torch.as_tensor(np.stack([x[s:s + t] for s in starts]), dtype=dtype), starts


def predict_sequence(model: STGFormer, p2d: np.ndarray, train_config: TrainConfig) -> np.ndarray:
    """
    Lift a whole 2D sequence to root-relative 3D in millimeters.

    Overlapping frames of the flush-with-the-end window are overwritten by
    that window's predictions.

    Returns:
        [frames×N×3] float64
    """
    cfg = model.config
    t = cfg.num_frames
    frames = p2d.shape[0]
    windows, starts = input_windows(p2d, cfg, train_config)

    out = np.zeros((max(frames, t), cfg.num_joints, 3))
    model.eval()
    with torch.no_grad():
        for window, start in zip(windows, starts):
            out[start:start + t] = model(window).cpu().numpy()
    return out[:frames] / train_config.target_scale


# ============================================================================
# TRAINING LOOP
# ============================================================================

def train_steps(
    model: STGFormer,
    inputs: torch.Tensor,
    targets: torch.Tensor,
    train_config: TrainConfig,
) -> Generator[TrainEvent, None, None]:
    """
    Mini-batch Adam training over prepared windows.

    Batch order is a per-epoch permutation drawn from a generator seeded with
    ``train_config.seed``, so the loss trace is deterministic.

    Yields:
        ('step', {'step', 'epoch', 'lr', 'loss'}, step)
        ('epoch', {'epoch', 'lr', 'mean_loss'}, epoch)
        ('done', trace, total_steps)

    Raises:
        TrainingError: Empty dataset, non-finite loss or gradient
    """
    if inputs.shape[0] == 0:
        raise TrainingError("training set is empty")
    if inputs.shape[0] != targets.shape[0]:
        raise TrainingError(f"{inputs.shape[0]} input windows for {targets.shape[0]} targets")

    state = init_optimizer(model, train_config)
    params = dict(model.named_parameters())
    generator = torch.Generator().manual_seed(train_config.seed)
    batches_per_epoch = math.ceil(inputs.shape[0] / train_config.batch_size)
    total = train_config.epochs * batches_per_epoch
    if train_config.max_steps is not None:
        total = min(total, train_config.max_steps)

    trace: List[dict] = []
    progress = tqdm(total=total, desc="train", unit="step", disable=not train_config.progress)
    model.train()
    try:
        for epoch in range(train_config.epochs):
            if len(trace) >= total:
                break
            lr = lr_at_epoch(train_config.lr, train_config.lr_decay, epoch)
            order = torch.randperm(inputs.shape[0], generator=generator)
            epoch_losses = []

            for start in range(0, inputs.shape[0], train_config.batch_size):
                if len(trace) >= total:
                    break
                index = order[start:start + train_config.batch_size]
                for param in params.values():
                    param.grad = None
                loss = mse_loss(model(inputs[index]), targets[index])
                if not torch.isfinite(loss):
                    raise TrainingError(f"non-finite loss at step {state.step} (epoch {epoch})")
                loss.backward()
                adam_update(params, {name: p.grad for name, p in params.items()}, state, lr)

                record = {"step": state.step, "epoch": epoch, "lr": lr, "loss": float(loss)}
                trace.append(record)
                epoch_losses.append(record["loss"])
                progress.update(1)
                progress.set_postfix(loss=f"{record['loss']:.5f}")
                logger.debug("step %d loss %.6f", state.step, record["loss"])
                yield ('step', record, state.step)

            summary = {"epoch": epoch, "lr": lr, "mean_loss": float(np.mean(epoch_losses))}
            logger.info("epoch %d lr %.6g mean loss %.6f", epoch, lr, summary["mean_loss"])
            yield ('epoch', summary, epoch)
    finally:
        progress.close()

    yield ('done', trace, state.step)


def train_epochs(
    inputs: torch.Tensor,
    targets: torch.Tensor,
    model_config: ModelConfig,
    train_config: TrainConfig,
) -> Tuple[STGFormer, List[dict]]:
    """
    Initialize from ``train_config.seed`` and run the whole loop.

    Returns:
        (trained model, per-step loss trace)
    """
    model = init_parameters(model_config, train_config.seed)
    trace: List[dict] = []
    for event, payload, _ in train_steps(model, inputs, targets, train_config):
        if event == 'done':
            trace = payload
    return model, trace


def evaluate(
    model: STGFormer,
    p2d: np.ndarray,
    p3d: np.ndarray,
    labels: Optional[Sequence[str]],
    train_config: TrainConfig,
) -> EvalReport:
    """Predict the whole sequence and score it against root-aligned ground truth."""
    root = model.config.root_joint
    pred = predict_sequence(model, p2d, train_config)
    return evaluate_poses(pred, root_align(p3d, root), labels, root_index=root)


# ============================================================================
# GRADIENT CHECK
# ============================================================================

@dataclass
class GradcheckReport:
    """
    Attributes:
        max_rel_error: Worst relative error over all checked entries
        worst_parameter: Tensor holding that entry
        tolerance: Pass threshold
        per_tensor: Worst relative error of each tensor
        entries: Number of entries compared
    """
    max_rel_error: float
    worst_parameter: str
    tolerance: float
    per_tensor: Dict[str, float] = field(default_factory=dict)
    entries: int = 0

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance

    def raise_for_failure(self) -> "GradcheckReport":
        if not self.passed:
            raise GradcheckFailure(self)
        return self


GradTransform = Callable[[str, torch.Tensor], torch.Tensor]


def finite_diff_gradcheck(
    config: ModelConfig,
    seed: int = 0,
    tolerance: float = C.GRADCHECK_TOLERANCE,
    samples: int = C.GRADCHECK_SAMPLES,
    step: float = C.GRADCHECK_STEP,
    grad_transform: Optional[GradTransform] = None,
) -> GradcheckReport:
    """
    Compare autograd gradients of mse_loss∘model against central differences.

    Runs in double precision. Parameters are initialized from ``seed`` and then
    jittered so bias tables and modulations sit away from their init values.
    Each tensor is checked on every entry, or on ``samples`` seeded entries
    when it is larger.

    Args:
        config: Model config; dtype is forced to float64
        seed: Seeds parameters, jitter, data and sampling
        tolerance: Pass threshold on relative error
        samples: Entries per tensor for large tensors
        step: Finite-difference step, scaled by max(1, |θ|)
        grad_transform: Applied to each analytic gradient before comparison

    Returns:
        GradcheckReport
    """
    config = replace(config, dtype="float64")
    model = init_parameters(config, seed)
    generator = torch.Generator().manual_seed(seed + 1)
    with torch.no_grad():
        for param in model.parameters():
            param.add_(0.1 * torch.randn(param.shape, generator=generator, dtype=param.dtype))

    shape = (config.num_frames, config.num_joints)
    p2d = torch.randn(*shape, 2, generator=generator, dtype=torch.float64)
    target = torch.randn(*shape, 3, generator=generator, dtype=torch.float64)

    def loss_value() -> float:
        return float(mse_loss(model(p2d), target))

    model.zero_grad()
    mse_loss(model(p2d), target).backward()

    per_tensor: Dict[str, float] = {}
    worst_name, worst_error, entries = "", 0.0, 0
    with torch.no_grad():
        for name, param in model.named_parameters():
            analytic = param.grad if param.grad is not None else torch.zeros_like(param)
            if grad_transform is not None:
                analytic = grad_transform(name, analytic.clone())
            flat, analytic_flat = param.view(-1), analytic.reshape(-1)

            if flat.numel() > samples:
                picks = torch.randperm(flat.numel(), generator=generator)[:samples].tolist()
            else:
                picks = range(flat.numel())

            tensor_error = 0.0
            for i in picks:
                original = float(flat[i])
                h = step * max(1.0, abs(original))
                flat[i] = original + h
                plus = loss_value()
                flat[i] = original - h
                minus = loss_value()
                flat[i] = original
                numeric = (plus - minus) / (2 * h)
                a = float(analytic_flat[i])
                rel = abs(a - numeric) / max(abs(a), abs(numeric), C.GRADCHECK_SCALE_FLOOR)
                tensor_error = max(tensor_error, rel)
                entries += 1

            per_tensor[name] = tensor_error
            logger.info("gradcheck %-40s max rel error %.3e", name, tensor_error)
            if tensor_error > worst_error or not worst_name:
                worst_name, worst_error = name, tensor_error

    report = GradcheckReport(
        max_rel_error=worst_error, worst_parameter=worst_name, tolerance=tolerance,
        per_tensor=per_tensor, entries=entries,
    )
    logger.info("gradcheck: %d entries, worst %.3e in '%s'", entries, worst_error, worst_name)
    return report
