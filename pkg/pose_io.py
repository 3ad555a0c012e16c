"""
STGFormer Pose Lifter - File Formats
Pose sequences (PSEQ), attention-map containers (ATTN), checkpoints and loss
traces. Every writer goes through a temp file and ``os.replace``.

PSEQ / ATTN layout, little-endian:
    magic[4] | version u32 | T u32 | N u32 | C u32 | T·N·C float32 (t, n, c row-major)
PSEQ may be followed by an action-label block:
    "ACTS" | byte length u32 | UTF-8 labels joined by newlines, one per frame
"""

import logging
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import torch

import constants as C
from config import ModelConfig, TrainConfig, config_to_text, parse_config_text
from errors import CheckpointError, PoseFileError, ShapeError
from model import STGFormer

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

HEADER_BYTES = 20
_U32 = np.dtype("<u4")
_F32 = np.dtype("<f4")


@dataclass
class PoseFile:
    """
    Decoded pose sequence.

    Attributes:
        data: float32 array [T×N×C]; pixels for C=2, millimeters for C=3
        labels: Optional action label per frame
    """
    data: np.ndarray
    labels: Optional[List[str]] = None

    @property
    def shape(self) -> Tuple[int, int, int]:
        return tuple(self.data.shape)


# ============================================================================
# ATOMIC WRITES
# ============================================================================

def atomic_write_bytes(path: PathLike, payload: bytes) -> None:
    """Write to a temp file in the target directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: PathLike, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


# ============================================================================
# TENSOR CONTAINERS
# ============================================================================

def encode_container(magic: bytes, data: np.ndarray, channels: Optional[Sequence[int]] = None) -> bytes:
    """Header plus float32 payload for a [T×N×C] array."""
    data = np.asarray(data)
    if data.ndim != 3:
        raise ShapeError(f"container payload must be [T×N×C], got {data.shape}")
    if channels is not None and data.shape[2] not in channels:
        raise ShapeError(f"channel count {data.shape[2]} not in {tuple(channels)}")
    header = magic + np.array([C.FORMAT_VERSION, *data.shape], dtype=_U32).tobytes()
    return header + np.ascontiguousarray(data, dtype=_F32).tobytes()


def decode_container(
    raw: bytes, magic: bytes, channels: Optional[Sequence[int]] = None
) -> Tuple[np.ndarray, int]:
    """
    Parse a header and payload.

    Returns:
        (data [T×N×C] float32, offset of the first byte after the payload)

    Raises:
        PoseFileError: Bad magic, unsupported version, bad channel count, or
            truncated header / payload
    """
    if len(raw) < HEADER_BYTES:
        raise PoseFileError(f"header needs {HEADER_BYTES} bytes, file has {len(raw)}", len(raw))
    if raw[:4] != magic:
        raise PoseFileError(f"bad magic {raw[:4]!r}, expected {magic!r}", 0)
    version, t, n, c = (int(v) for v in np.frombuffer(raw, dtype=_U32, count=4, offset=4))
    if version != C.FORMAT_VERSION:
        raise PoseFileError(f"unsupported format version {version} (reader knows {C.FORMAT_VERSION})", 4)
    if channels is not None and c not in channels:
        raise PoseFileError(f"channel count {c} not in {tuple(channels)}", 16)

    expected = t * n * c * _F32.itemsize
    available = len(raw) - HEADER_BYTES
    if available < expected:
        raise PoseFileError(f"truncated payload: expected {expected} bytes, got {available}", HEADER_BYTES)
    data = np.frombuffer(raw, dtype=_F32, count=t * n * c, offset=HEADER_BYTES).reshape(t, n, c).copy()
    return data, HEADER_BYTES + expected


def _decode_labels(raw: bytes, offset: int, frames: int) -> Optional[List[str]]:
    if offset == len(raw):
        return None
    if raw[offset:offset + 4] != C.LABEL_MAGIC:
        raise PoseFileError(f"{len(raw) - offset} trailing bytes are not a label block", offset)
    if len(raw) < offset + 8:
        raise PoseFileError("truncated label block header", offset)
    length = int(np.frombuffer(raw, dtype=_U32, count=1, offset=offset + 4)[0])
    start = offset + 8
    if len(raw) != start + length:
        raise PoseFileError(f"label block: expected {length} bytes, got {len(raw) - start}", start)
    try:
        labels = raw[start:].decode("utf-8").split("\n") if length else []
    except UnicodeDecodeError as exc:
        raise PoseFileError(f"label block is not valid UTF-8 ({exc.reason})", start + exc.start)
    if len(labels) != frames:
        raise PoseFileError(f"label block has {len(labels)} labels for {frames} frames", start)
    return labels


def write_pose_file(path: PathLike, data, labels: Optional[Sequence[str]] = None) -> None:
    """
    Write a [T×N×C] pose sequence (C ∈ {2, 3}) with optional frame labels.

    Raises:
        ShapeError: Wrong rank, channel count, or label count
    """
    data = np.asarray(data)
    payload = encode_container(C.POSE_MAGIC, data, C.POSE_CHANNELS)
    if labels is not None:
        labels = list(labels)
        if len(labels) != data.shape[0]:
            raise ShapeError(f"{len(labels)} labels for {data.shape[0]} frames")
        if any("\n" in label for label in labels):
            raise ShapeError("action labels must not contain newlines")
        text = "\n".join(labels).encode("utf-8")
        payload += C.LABEL_MAGIC + np.array([len(text)], dtype=_U32).tobytes() + text
    atomic_write_bytes(path, payload)
    logger.info("wrote %s %s", path, data.shape)


def read_pose_file(path: PathLike) -> PoseFile:
    raw = Path(path).read_bytes()
    data, offset = decode_container(raw, C.POSE_MAGIC, C.POSE_CHANNELS)
    return PoseFile(data=data, labels=_decode_labels(raw, offset, data.shape[0]))


def write_attention_file(path: PathLike, weights) -> None:
    """Write a stack of attention maps [M×Q×K] as an ATTN container."""
    weights = np.asarray(weights)
    atomic_write_bytes(path, encode_container(C.ATTN_MAGIC, weights))
    logger.info("wrote %s %s", path, weights.shape)


def read_attention_file(path: PathLike) -> np.ndarray:
    raw = Path(path).read_bytes()
    data, offset = decode_container(raw, C.ATTN_MAGIC)
    if offset != len(raw):
        raise PoseFileError(f"{len(raw) - offset} unexpected trailing bytes", offset)
    return data


# ============================================================================
# CHECKPOINTS
# ============================================================================

def save_checkpoint(
    directory: PathLike,
    model: torch.nn.Module,
    model_config: ModelConfig,
    train_config: Optional[TrainConfig] = None,
) -> None:
    """
    Write manifest.txt, params.bin (float32 LE) and config.txt into ``directory``.

    Manifest lines are ``name dtype shape offset`` with shape as ``AxB``.
    """
    directory = Path(directory)
    manifest, chunks, offset = [], [], 0
    for name, param in model.state_dict().items():
        array = param.detach().cpu().numpy().astype(_F32)
        shape = "x".join(str(d) for d in array.shape) or "scalar"
        manifest.append(f"{name} float32 {shape} {offset}")
        chunks.append(array.tobytes())
        offset += array.nbytes

    atomic_write_bytes(directory / C.CHECKPOINT_PAYLOAD, b"".join(chunks))
    atomic_write_text(directory / C.CHECKPOINT_MANIFEST, "\n".join(manifest) + "\n")
    atomic_write_text(directory / C.CHECKPOINT_CONFIG, config_to_text(model_config, train_config))
    logger.info("saved checkpoint %s (%d tensors, %d bytes)", directory, len(manifest), offset)


def _parse_manifest(text: str) -> Dict[str, Tuple[Tuple[int, ...], int]]:
    entries = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 4 or parts[1] != "float32":
            raise CheckpointError(f"manifest line {line_no}: expected 'name float32 shape offset', got '{line}'")
        name, _, shape, offset = parts
        dims = () if shape == "scalar" else tuple(int(d) for d in shape.split("x"))
        entries[name] = (dims, int(offset))
    return entries


def load_checkpoint(directory: PathLike) -> Tuple[torch.nn.Module, ModelConfig, TrainConfig]:
    """
    Rebuild the model from config.txt and fill it from params.bin.

    Raises:
        CheckpointError: Manifest names or shapes disagree with the model the
            config describes, or the payload length disagrees with the manifest
    """
    directory = Path(directory)
    model_config, train_config = parse_config_text((directory / C.CHECKPOINT_CONFIG).read_text(encoding="utf-8"))
    entries = _parse_manifest((directory / C.CHECKPOINT_MANIFEST).read_text(encoding="utf-8"))
    payload = (directory / C.CHECKPOINT_PAYLOAD).read_bytes()

    model = STGFormer(model_config)
    state = model.state_dict()
    if set(entries) != set(state):
        missing = sorted(set(state) - set(entries))
        extra = sorted(set(entries) - set(state))
        raise CheckpointError(f"checkpoint does not match config: missing {missing[:3]}, unexpected {extra[:3]}")

    loaded = {}
    for name, tensor in state.items():
        dims, offset = entries[name]
        if dims != tuple(tensor.shape):
            raise CheckpointError(f"'{name}': manifest shape {dims} != model shape {tuple(tensor.shape)}")
        count = int(np.prod(dims, dtype=np.int64))
        if offset + count * _F32.itemsize > len(payload):
            raise CheckpointError(f"'{name}': payload ends at {len(payload)} bytes, needs {offset + count * 4}")
        array = np.frombuffer(payload, dtype=_F32, count=count, offset=offset).reshape(dims)
        loaded[name] = torch.from_numpy(array.copy()).to(tensor.dtype)
    model.load_state_dict(loaded)
    logger.info("loaded checkpoint %s", directory)
    return model, model_config, train_config


# ============================================================================
# LOSS TRACE
# ============================================================================

def trace_to_csv(records: Iterable[dict]) -> str:
    lines = ["step,epoch,lr,loss"]
    lines += [f"{r['step']},{r['epoch']},{r['lr']:.10g},{r['loss']:.10g}" for r in records]
    return "\n".join(lines) + "\n"


def write_trace(path: PathLike, records: Iterable[dict]) -> None:
    atomic_write_text(path, trace_to_csv(records))
    logger.info("wrote loss trace %s", path)
