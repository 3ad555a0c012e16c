"""
STGFormer Pose Lifter - Synthetic Motion
Paired 3D/2D pose sequences for desk-scale training and tests.

Every bone keeps its rest length: its direction in each frame is the rest
direction rotated by a per-bone axis-angle that follows a smoothed,
mean-reverting random walk. Joints are placed by forward kinematics along the
BFS tree of the skeleton, the root drifts by its own walk, and the 2D input
is the pinhole projection of the 3D joints (optionally with detector noise).
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Union

import numpy as np

import constants as C
from config import SynthConfig
from errors import GraphError
from pose_io import write_pose_file
from skeleton import SkeletonGraph, load_topology

logger = logging.getLogger(__name__)


@dataclass
class SynthSequence:
    """
    Attributes:
        p3d: Camera-frame joints [T×N×3] in mm
        p2d: Projected joints [T×N×2] in px, principal point at the origin
        labels: Action label per frame
    """
    p3d: np.ndarray
    p2d: np.ndarray
    labels: List[str]


def rest_offsets(graph: SkeletonGraph, skeleton: str) -> np.ndarray:
    """
    Offset of every joint from its BFS parent in the rest pose [N×3].

    The Human3.6M skeleton uses anatomical bone lengths; other topologies get
    fixed pseudo-random directions with a uniform bone length.
    """
    if skeleton == "h36m17" and graph.num_joints == len(C.H36M_REST_OFFSETS_MM):
        return np.asarray(C.H36M_REST_OFFSETS_MM, dtype=np.float64)
    directions = np.random.default_rng(0).normal(size=(graph.num_joints, 3))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    offsets = C.SYNTH_BONE_MM * directions
    offsets[C.ROOT_JOINT] = 0.0
    return offsets


def rodrigues(axis_angle: np.ndarray) -> np.ndarray:
    """Rotation matrices [..., 3, 3] from axis-angle vectors [..., 3]."""
    theta = np.linalg.norm(axis_angle, axis=-1, keepdims=True)
    axis = axis_angle / np.where(theta > 0, theta, 1.0)
    x, y, z = axis[..., 0], axis[..., 1], axis[..., 2]
    zero = np.zeros_like(x)
    k = np.stack([zero, -z, y, z, zero, -x, -y, x, zero], axis=-1).reshape(axis.shape[:-1] + (3, 3))
    s = np.sin(theta)[..., None]
    c = np.cos(theta)[..., None]
    return np.eye(3) + s * k + (1.0 - c) * (k @ k)


def smoothed_walk(rng: np.random.Generator, frames: int, shape, step: np.ndarray,
                  reversion: float, window: int) -> np.ndarray:
    """
    Mean-reverting random walk [frames, *shape], then a centered moving average.

    Args:
        rng: Seeded generator
        frames: Walk length
        shape: Shape of one sample
        step: Per-frame step scale, broadcastable to ``shape``
        reversion: Multiplier pulling the state back toward zero each frame
        window: Moving-average width along time
    """
    noise = rng.normal(size=(frames,) + tuple(shape)) * step
    walk = np.empty_like(noise)
    state = np.zeros(tuple(shape))
    for t in range(frames):
        state = reversion * state + noise[t]
        walk[t] = state
    if window > 1:
        pad = window // 2
        padded = np.concatenate([np.repeat(walk[:1], pad, axis=0), walk, np.repeat(walk[-1:], window - 1 - pad, axis=0)])
        cumsum = np.cumsum(padded, axis=0)
        cumsum = np.concatenate([np.zeros((1,) + walk.shape[1:]), cumsum])
        walk = (cumsum[window:] - cumsum[:-window]) / window
    return walk


def forward_kinematics(graph: SkeletonGraph, offsets: np.ndarray, rotations: np.ndarray,
                       root_positions: np.ndarray, root: int = C.ROOT_JOINT) -> np.ndarray:
    """
    Place joints frame by frame along the BFS tree.

    Args:
        graph: Skeleton (must be connected)
        offsets: Rest offset of each joint from its parent [N×3]
        rotations: Global rotation of the bone ending at each joint [T×N×3×3]
        root_positions: Root trajectory [T×3]

    Returns:
        Joints [T×N×3]
    """
    parents = graph.parents(root)
    order = graph.bfs_order(root)
    if len(order) != graph.num_joints:
        raise GraphError(f"synthetic motion needs a connected skeleton, {graph!r} is not")

    joints = np.zeros((root_positions.shape[0], graph.num_joints, 3))
    joints[:, root] = root_positions
    for joint in order[1:]:
        bone = np.einsum('tij,j->ti', rotations[:, joint], offsets[joint])
        joints[:, joint] = joints[:, parents[joint]] + bone
    return joints


def project(p3d: np.ndarray, focal_px: float) -> np.ndarray:
    """Pinhole projection u = f·x/z, v = f·y/z."""
    return focal_px * p3d[..., :2] / p3d[..., 2:3]


def action_labels(frames: int, num_actions: int) -> List[str]:
    """Contiguous, nearly equal segments named after the Human3.6M actions."""
    labels = []
    for index, segment in enumerate(np.array_split(np.arange(frames), num_actions)):
        labels += [C.ACTIONS[index]] * len(segment)
    return labels


def synth_generate(cfg: SynthConfig) -> SynthSequence:
    """
    Generate one paired sequence; deterministic per ``cfg.seed``.

    Args:
        cfg: Generator settings

    Returns:
        SynthSequence with float32 arrays
    """
    cfg.validate()
    graph = load_topology(cfg.skeleton, cfg.num_joints)
    rng = np.random.default_rng(cfg.seed)
    offsets = rest_offsets(graph, cfg.skeleton)

    # Angular step per bone so the bone tip moves about step_mm per frame
    lengths = np.linalg.norm(offsets, axis=1)
    angular_step = cfg.step_mm / np.where(lengths > 0, lengths, 1.0)
    axis_angles = smoothed_walk(
        rng, cfg.frames, (graph.num_joints, 3), angular_step[:, None], C.SYNTH_REVERSION, cfg.smoothing,
    )
    root_walk = smoothed_walk(rng, cfg.frames, (3,), np.full(3, cfg.step_mm), C.SYNTH_REVERSION, cfg.smoothing)
    root_positions = root_walk + np.array([0.0, 0.0, cfg.distance_mm])

    p3d = forward_kinematics(graph, offsets, rodrigues(axis_angles), root_positions)
    p2d = project(p3d, cfg.focal_px)
    if cfg.noise_px > 0:
        p2d = p2d + rng.normal(scale=cfg.noise_px, size=p2d.shape)

    logger.info("synthesized %d frames on %r (seed %d)", cfg.frames, graph, cfg.seed)
    return SynthSequence(
        p3d=p3d.astype(np.float32),
        p2d=p2d.astype(np.float32),
        labels=action_labels(cfg.frames, cfg.num_actions),
    )


def write_synth(cfg: SynthConfig, out_2d: Union[str, Path], out_3d: Union[str, Path]) -> SynthSequence:
    """Generate a sequence and write it as a 2D and a 3D pose file."""
    seq = synth_generate(cfg)
    write_pose_file(out_2d, seq.p2d, seq.labels)
    write_pose_file(out_3d, seq.p3d, seq.labels)
    return seq
