import numpy as np
import pytest

import constants as C
from config import SynthConfig
from errors import ConfigError, GraphError
from pose_io import read_pose_file
from skeleton import build_skeleton, load_topology
from synth import (
    action_labels, forward_kinematics, project, rest_offsets, rodrigues, smoothed_walk, synth_generate, write_synth,
)

SHORT = SynthConfig(seed=3, frames=64)


def _bone_lengths(p3d, graph):
    parents = graph.parents(C.ROOT_JOINT)
    joints = [j for j in range(graph.num_joints) if j != C.ROOT_JOINT]
    return np.stack([np.linalg.norm(p3d[:, j] - p3d[:, parents[j]], axis=-1) for j in joints], axis=1)


def test_same_seed_same_sequence():
    a, b = synth_generate(SHORT), synth_generate(SHORT)
    assert np.array_equal(a.p3d, b.p3d) and np.array_equal(a.p2d, b.p2d)
    assert not np.array_equal(a.p3d, synth_generate(SynthConfig(seed=4, frames=64)).p3d)


def test_shapes_and_dtypes():
    seq = synth_generate(SHORT)
    assert seq.p3d.shape == (64, 17, 3) and seq.p2d.shape == (64, 17, 2)
    assert seq.p3d.dtype == np.float32 and seq.p2d.dtype == np.float32
    assert np.isfinite(seq.p2d).all()


@pytest.mark.parametrize("skeleton", ["h36m17", "mpi13"])
def test_bone_lengths_are_constant(skeleton):
    seq = synth_generate(SynthConfig(seed=1, frames=200, skeleton=skeleton))
    graph = load_topology(skeleton)
    lengths = _bone_lengths(seq.p3d.astype(np.float64), graph)
    expected = np.linalg.norm(rest_offsets(graph, skeleton), axis=1)[1:]
    np.testing.assert_allclose(lengths, np.broadcast_to(expected, lengths.shape), rtol=1e-4)


def test_generic_topology_uses_uniform_bones():
    graph = load_topology("mpi13")
    offsets = rest_offsets(graph, "mpi13")
    assert not offsets[C.ROOT_JOINT].any()
    np.testing.assert_allclose(np.linalg.norm(offsets[1:], axis=1), C.SYNTH_BONE_MM)


def test_input_is_projection_of_target():
    seq = synth_generate(SHORT)
    p3d = seq.p3d.astype(np.float64)
    for t, n in [(0, 0), (10, 5), (63, 16)]:
        x, y, z = p3d[t, n]
        np.testing.assert_allclose(seq.p2d[t, n], [C.SYNTH_FOCAL_PX * x / z, C.SYNTH_FOCAL_PX * y / z], rtol=1e-5)
    assert (p3d[..., 2] > 0).all()


def test_noise_perturbs_only_the_input():
    clean = synth_generate(SHORT)
    noisy = synth_generate(SynthConfig(seed=3, frames=64, noise_px=2.0))
    assert np.array_equal(clean.p3d, noisy.p3d)
    residual = (noisy.p2d - clean.p2d).astype(np.float64)
    assert 1.0 < residual.std() < 3.0


def test_motion_is_smooth():
    seq = synth_generate(SynthConfig(seed=0, frames=256))
    velocity = np.linalg.norm(np.diff(seq.p3d.astype(np.float64), axis=0), axis=-1)
    assert velocity.max() < 100.0
    assert velocity.mean() > 0.0


def test_action_labels_are_contiguous_segments():
    labels = action_labels(10, 3)
    assert labels == [C.ACTIONS[0]] * 4 + [C.ACTIONS[1]] * 3 + [C.ACTIONS[2]] * 3
    seq = synth_generate(SynthConfig(seed=0, frames=30, num_actions=2))
    assert seq.labels == [C.ACTIONS[0]] * 15 + [C.ACTIONS[1]] * 15


@pytest.mark.parametrize("changes", [dict(frames=0), dict(focal_px=0.0), dict(smoothing=0), dict(noise_px=-1.0),
                                     dict(num_actions=16), dict(skeleton="chain"),
                                     dict(skeleton="chain", num_joints=1)])
def test_invalid_settings_rejected(changes):
    with pytest.raises(ConfigError):
        synth_generate(SynthConfig(**changes))


def test_rodrigues_is_a_rotation(rng):
    rot = rodrigues(rng.normal(size=(5, 3)))
    np.testing.assert_allclose(rot @ np.swapaxes(rot, -1, -2), np.broadcast_to(np.eye(3), (5, 3, 3)), atol=1e-12)
    np.testing.assert_allclose(np.linalg.det(rot), 1.0)
    np.testing.assert_allclose(rodrigues(np.zeros(3)), np.eye(3))
    quarter = rodrigues(np.array([0.0, 0.0, np.pi / 2]))
    np.testing.assert_allclose(quarter @ [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], atol=1e-12)


def test_walk_without_step_stays_at_zero(rng):
    walk = smoothed_walk(rng, 20, (4, 3), np.zeros((4, 1)), 0.98, 5)
    assert walk.shape == (20, 4, 3) and not walk.any()


def test_forward_kinematics_needs_connected_skeleton():
    graph = build_skeleton([(0, 1), (2, 3)], 4)
    with pytest.raises(GraphError):
        forward_kinematics(graph, np.ones((4, 3)), np.tile(np.eye(3), (1, 4, 1, 1)), np.zeros((1, 3)))


def test_project_pinhole():
    point = np.array([[100.0, -50.0, 2000.0]])
    np.testing.assert_allclose(project(point, 1000.0), [[50.0, -25.0]])


def test_write_synth_files(tmp_path):
    seq = write_synth(SHORT, tmp_path / "in.pseq", tmp_path / "gt.pseq")
    p2d, p3d = read_pose_file(tmp_path / "in.pseq"), read_pose_file(tmp_path / "gt.pseq")
    assert np.array_equal(p2d.data, seq.p2d) and np.array_equal(p3d.data, seq.p3d)
    assert p3d.labels == seq.labels


def test_chain_skeleton_with_joint_count():
    seq = synth_generate(SynthConfig(seed=2, frames=50, skeleton="chain", num_joints=6))
    assert seq.p3d.shape == (50, 6, 3) and seq.p2d.shape == (50, 6, 2)
    graph = load_topology("chain", 6)
    lengths = _bone_lengths(seq.p3d.astype(np.float64), graph)
    np.testing.assert_allclose(lengths, C.SYNTH_BONE_MM, rtol=1e-4)
