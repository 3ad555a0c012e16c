"""
STGFormer Pose Lifter - Configuration
Dataclasses for model, training and synthetic-data settings, plus the
key=value text format they are stored in.
"""

import dataclasses
import logging
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional, Tuple, Union

import constants as C
from errors import ConfigError

logger = logging.getLogger(__name__)

# Short symbols accepted as keys in config files
ALIASES = {
    "L": "num_blocks",
    "F": "embed_dim",
    "H": "num_heads",
    "J": "spatial_hops",
    "K": "temporal_hops",
    "N_layers": "gcn_layers",
    "D_s": "spatial_clip",
    "D_t": "temporal_clip",
    "T": "num_frames",
    "N": "num_joints",
}

_TRUE = {"true", "1", "yes", "on"}
_FALSE = {"false", "0", "no", "off"}


def hop_widths(width: int, hops: int) -> Tuple[int, ...]:
    """
    Partition a channel width into per-hop widths that differ by at most one.

    Earlier hops take the remainder, so 128 over 3 hops gives (43, 43, 42).

    Args:
        width: Channel width to partition
        hops: Number of hop branches

    Returns:
        Tuple of per-hop widths summing to ``width``
    """
    base, extra = divmod(width, hops)
    return tuple(base + (1 if r < extra else 0) for r in range(hops))


@dataclass(frozen=True)
class ModelConfig:
    """
    Architecture hyperparameters and ablation switches.

    Attributes:
        num_blocks (int): L, number of STGFormer blocks
        embed_dim (int): F, embedding width (even)
        num_heads (int): H, total heads, half per channel group
        spatial_hops (int): J, hop rings in the spatial GCN path
        temporal_hops (int): K, hop rings in the temporal GCN path
        gcn_layers (int): propagation layers inside each MHR-GCN
        spatial_clip (int): D_s, hop-distance clip of the spatial bias
        temporal_clip (int): D_t, frame-offset clip of the temporal bias
        num_frames (int): T, frames per input window
        num_joints (int): N, joints per frame
        skeleton (str): topology id ('h36m17', 'mpi13', 'chain') or file path
        root_joint (int): joint used for root alignment
        use_stga / use_smhr / use_tmhr (bool): structural ablation rows
        use_tga / use_sga (bool): single-group attention ablations
        activation (str): 'gelu', or 'identity' for linear verification models
        dtype (str): 'float32' or 'float64'
    """
    num_blocks: int = C.NUM_BLOCKS
    embed_dim: int = C.EMBED_DIM
    num_heads: int = C.NUM_HEADS
    spatial_hops: int = C.SPATIAL_HOPS
    temporal_hops: int = C.TEMPORAL_HOPS
    gcn_layers: int = C.GCN_LAYERS
    spatial_clip: int = C.SPATIAL_CLIP
    temporal_clip: int = C.TEMPORAL_CLIP
    num_frames: int = C.NUM_FRAMES
    num_joints: int = C.NUM_JOINTS
    skeleton: str = "h36m17"
    root_joint: int = C.ROOT_JOINT
    use_stga: bool = True
    use_smhr: bool = True
    use_tmhr: bool = True
    use_tga: bool = True
    use_sga: bool = True
    activation: str = "gelu"
    dtype: str = "float32"

    # ------------------------------------------------------------------------
    # Derived widths
    # ------------------------------------------------------------------------

    @property
    def group_dim(self) -> int:
        """Channels per attention group and per GCN path (F/2)."""
        return self.embed_dim // 2

    @property
    def heads_per_group(self) -> int:
        return self.num_heads // 2

    @property
    def head_dim(self) -> int:
        return self.group_dim // self.heads_per_group

    @property
    def spatial_hop_widths(self) -> Tuple[int, ...]:
        return hop_widths(self.group_dim, self.spatial_hops)

    @property
    def temporal_hop_widths(self) -> Tuple[int, ...]:
        return hop_widths(self.group_dim, self.temporal_hops)

    def validate(self) -> "ModelConfig":
        """
        Check the width and count invariants.

        Returns:
            self, so calls can be chained

        Raises:
            ConfigError: Naming the first violated invariant
        """
        if self.embed_dim <= 0 or self.embed_dim % 2:
            raise ConfigError(f"embed_dim must be positive and even, got {self.embed_dim}")
        if self.num_heads <= 0 or self.num_heads % 2:
            raise ConfigError(f"num_heads must be positive and even, got {self.num_heads}")
        if self.group_dim % self.heads_per_group:
            raise ConfigError(
                f"heads per group ({self.heads_per_group}) must divide embed_dim/2 ({self.group_dim})"
            )
        for name in ("spatial_hops", "temporal_hops"):
            hops = getattr(self, name)
            if hops < 1 or hops > self.group_dim:
                raise ConfigError(f"{name} must lie in [1, {self.group_dim}], got {hops}")
        if self.num_blocks < 0:
            raise ConfigError(f"num_blocks must be >= 0, got {self.num_blocks}")
        if self.gcn_layers < 1:
            raise ConfigError(f"gcn_layers must be >= 1, got {self.gcn_layers}")
        if self.spatial_clip < 1 or self.temporal_clip < 1:
            raise ConfigError("bias clip radii must be >= 1")
        if self.num_frames < 1 or self.num_joints < 1:
            raise ConfigError("num_frames and num_joints must be positive")
        if not 0 <= self.root_joint < self.num_joints:
            raise ConfigError(f"root_joint {self.root_joint} outside [0, {self.num_joints})")
        if self.activation not in C.ACTIVATIONS:
            raise ConfigError(f"activation must be one of {C.ACTIVATIONS}, got '{self.activation}'")
        if self.dtype not in C.DTYPES:
            raise ConfigError(f"dtype must be one of {C.DTYPES}, got '{self.dtype}'")
        return self


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer, schedule and data-scaling settings."""
    lr: float = C.BASE_LR
    lr_decay: float = C.LR_DECAY
    beta1: float = C.ADAM_BETA1
    beta2: float = C.ADAM_BETA2
    eps: float = C.ADAM_EPS
    batch_size: int = C.DESK_BATCH_SIZE
    epochs: int = C.EPOCHS
    max_steps: Optional[int] = None
    seed: int = 0
    input_scale: float = C.INPUT_SCALE
    target_scale: float = C.TARGET_SCALE
    progress: bool = True

    def validate(self) -> "TrainConfig":
        if self.lr < 0:
            raise ConfigError(f"lr must be >= 0, got {self.lr}")
        if not 0 < self.lr_decay <= 1:
            raise ConfigError(f"lr_decay must lie in (0, 1], got {self.lr_decay}")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ConfigError("Adam betas must lie in [0, 1)")
        if self.batch_size < 1 or self.epochs < 1:
            raise ConfigError("batch_size and epochs must be positive")
        if self.max_steps is not None and self.max_steps < 0:
            raise ConfigError("max_steps must be >= 0")
        if self.input_scale <= 0 or self.target_scale <= 0:
            raise ConfigError("input_scale and target_scale must be positive")
        return self


@dataclass(frozen=True)
class SynthConfig:
    """
    Synthetic sequence generator settings.

    Attributes:
        seed (int): Random seed
        frames (int): Sequence length T
        skeleton (str): Topology id or file path
        step_mm (float): Random-walk step scale in millimeters
        smoothing (int): Moving-average window applied to the walk
        focal_px (float): Pinhole focal length in pixels
        distance_mm (float): Camera-to-root distance in millimeters
        noise_px (float): Gaussian 2D detector noise, 0 for clean projections
        num_actions (int): Contiguous action segments, labeled with Human3.6M names
        num_joints (Optional[int]): Joint count, required for the 'chain' topology
    """
    seed: int = 0
    frames: int = C.SYNTH_FRAMES
    skeleton: str = "h36m17"
    step_mm: float = C.SYNTH_STEP_MM
    smoothing: int = C.SYNTH_SMOOTHING
    focal_px: float = C.SYNTH_FOCAL_PX
    distance_mm: float = C.SYNTH_DISTANCE_MM
    noise_px: float = 0.0
    num_actions: int = 1
    num_joints: Optional[int] = None

    def validate(self) -> "SynthConfig":
        if self.focal_px <= 0 or self.distance_mm <= 0:
            raise ConfigError("focal_px and distance_mm must be positive")
        if self.frames < 1:
            raise ConfigError(f"frames must be positive, got {self.frames}")
        if self.smoothing < 1:
            raise ConfigError("smoothing window must be >= 1")
        if self.step_mm < 0 or self.noise_px < 0:
            raise ConfigError("step_mm and noise_px must be >= 0")
        if not 1 <= self.num_actions <= min(len(C.ACTIONS), self.frames):
            raise ConfigError(f"num_actions must lie in [1, {min(len(C.ACTIONS), self.frames)}]")
        if self.skeleton == "chain" and (self.num_joints is None or self.num_joints < 2):
            raise ConfigError("the chain skeleton needs num_joints >= 2")
        return self


# ============================================================================
# KEY=VALUE TEXT FORMAT
# ============================================================================

def _parse_value(raw: str, kind, key: str, line_no: int):
    """Convert a raw string to the field's declared type."""
    text = raw.strip()
    if kind == Optional[int]:
        return None if text.lower() in ("", "none") else _parse_value(text, int, key, line_no)
    try:
        if kind is bool:
            lowered = text.lower()
            if lowered in _TRUE:
                return True
            if lowered in _FALSE:
                return False
            raise ValueError(text)
        return kind(text)
    except ValueError:
        raise ConfigError(f"line {line_no}: cannot read '{text}' as {getattr(kind, '__name__', kind)} for '{key}'")


def parse_config_text(text: str) -> Tuple[ModelConfig, TrainConfig]:
    """
    Parse key=value text into model and training configs.

    Blank lines and ``#`` comments are ignored; short symbols (L, F, H, ...)
    are accepted as aliases for the model fields.

    Args:
        text: Config file contents

    Returns:
        (ModelConfig, TrainConfig), both validated

    Raises:
        ConfigError: Unknown key, malformed line or invalid value
    """
    model_fields = {f.name: f for f in fields(ModelConfig)}
    train_fields = {f.name: f for f in fields(TrainConfig)}
    model_kwargs, train_kwargs = {}, {}

    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {line_no}: expected key=value, got '{line}'")
        key, value = (part.strip() for part in line.split("=", 1))
        key = ALIASES.get(key, key)
        if key in model_fields:
            model_kwargs[key] = _parse_value(value, model_fields[key].type, key, line_no)
        elif key in train_fields:
            train_kwargs[key] = _parse_value(value, train_fields[key].type, key, line_no)
        else:
            raise ConfigError(f"line {line_no}: unknown key '{key}'")

    return ModelConfig(**model_kwargs).validate(), TrainConfig(**train_kwargs).validate()


def load_config(path: Union[str, Path]) -> Tuple[ModelConfig, TrainConfig]:
    """Read a key=value config file."""
    path = Path(path)
    logger.debug("reading config %s", path)
    return parse_config_text(path.read_text(encoding="utf-8"))


def config_to_text(model_config: ModelConfig, train_config: Optional[TrainConfig] = None) -> str:
    """Serialize configs as key=value lines in declaration order."""
    lines = []
    for cfg in (model_config, train_config):
        if cfg is None:
            continue
        for f in fields(cfg):
            value = getattr(cfg, f.name)
            if isinstance(value, bool):
                value = "true" if value else "false"
            elif value is None:
                value = "none"
            lines.append(f"{f.name}={value}")
    return "\n".join(lines) + "\n"


def replace(cfg, **changes):
    """dataclasses.replace followed by validation."""
    return dataclasses.replace(cfg, **changes).validate()


def save_config(path: Union[str, Path], model_config: ModelConfig, train_config: Optional[TrainConfig] = None) -> None:
    """Write configs as key=value text, atomically."""
    from pose_io import atomic_write_text

    atomic_write_text(path, config_to_text(model_config, train_config))
    logger.info("wrote config %s", path)


def gradcheck_config(**changes) -> ModelConfig:
    """The tiny double-precision model used for gradient checks, with overrides."""
    return ModelConfig(**{**C.GRADCHECK_MODEL, **changes}).validate()
