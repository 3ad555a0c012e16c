import numpy as np
import pytest

import oracles
from algorithms import procrustes_align as procrustes_kernel
from errors import InvalidInputError, ShapeError
from metrics import (
    EvalReport, auc, evaluate_poses, mpjpe, pa_mpjpe, pck, pck_curve, procrustes_align, root_align,
)


def random_rotation(rng):
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] *= -1
    return q


def offset_by(errors_mm):
    """Prediction/ground-truth pair with the given per-joint errors along x."""
    gt = np.zeros((1, len(errors_mm), 3))
    pred = gt.copy()
    pred[0, :, 0] = errors_mm
    return pred, gt


# ============================================================================
# P1
# ============================================================================

def test_root_align_zeroes_root(rng):
    pose = rng.normal(size=(3, 17, 3))
    aligned = root_align(pose, 0)
    assert not aligned[:, 0].any()
    np.testing.assert_allclose(aligned, oracles.root_align(pose, 0), atol=1e-12)


def test_root_align_cancels_translation(rng):
    pose = rng.normal(size=(2, 5, 3))
    np.testing.assert_allclose(root_align(pose + np.array([10.0, -3.0, 7.0]), 2), root_align(pose, 2), atol=1e-12)
    with pytest.raises(ShapeError):
        root_align(pose, 5)


def test_mpjpe_three_four_five():
    gt = np.array([[[0.0, 0, 0], [1, 0, 0]]])
    pred = np.array([[[0.0, 0, 0], [1, 3, 4]]])
    assert mpjpe(pred, gt) == 2.5


def test_mpjpe_matches_loop_oracle(rng):
    for _ in range(10):
        pred, gt = rng.normal(size=(4, 17, 3)), rng.normal(size=(4, 17, 3))
        assert mpjpe(pred, gt) == pytest.approx(oracles.mpjpe(pred, gt), abs=1e-9)
    assert mpjpe(gt, gt) == 0.0


def test_mpjpe_after_root_align_ignores_translation(rng):
    pred, gt = rng.normal(size=(3, 17, 3)), rng.normal(size=(3, 17, 3))
    shifted = pred + rng.normal(size=(3, 1, 3))
    assert mpjpe(root_align(shifted), root_align(gt)) == pytest.approx(mpjpe(root_align(pred), root_align(gt)))


# ============================================================================
# P2
# ============================================================================

def test_procrustes_recovers_rigid_motion(rng):
    gt = rng.normal(size=(17, 3)) * 100
    rot = random_rotation(rng)
    pred = gt @ rot.T + np.array([5.0, -2.0, 30.0])
    aligned, degenerate = procrustes_align(pred, gt)
    np.testing.assert_allclose(aligned, gt, atol=1e-9)
    assert not degenerate.any()


def test_procrustes_recovers_scale(rng):
    gt = rng.normal(size=(1, 17, 3))
    aligned, _ = procrustes_align(2 * gt, gt)
    np.testing.assert_allclose(aligned, gt, atol=1e-9)


def test_procrustes_never_reflects(rng):
    gt = rng.normal(size=(17, 3))
    mirrored = gt * np.array([-1.0, 1.0, 1.0])
    aligned, _ = procrustes_align(mirrored, gt)
    centered = aligned - aligned.mean(0)
    source = mirrored - mirrored.mean(0)
    # the fitted linear map stays a proper rotation (times a positive scale)
    linear, *_ = np.linalg.lstsq(source, centered, rcond=None)
    assert np.linalg.det(linear) > 0


def test_procrustes_beats_random_rigid_transforms(rng):
    pred, gt = rng.normal(size=(17, 3)), rng.normal(size=(17, 3))
    aligned, _ = procrustes_align(pred, gt)
    best = np.sum((aligned - gt) ** 2)
    for _ in range(50):
        candidate = pred @ random_rotation(rng).T + rng.normal(size=3)
        assert best <= np.sum((candidate - gt) ** 2) + 1e-12


def test_degenerate_frames_fall_back_to_translation(rng):
    gt = rng.normal(size=(2, 5, 3))
    pred = gt.copy()
    pred[1] = 3.0                                  # every joint collapsed onto one point
    aligned, degenerate = procrustes_align(pred, gt)
    assert degenerate.tolist() == [False, True]
    np.testing.assert_allclose(aligned[1], np.broadcast_to(gt[1].mean(0), (5, 3)), atol=1e-12)

    line = np.zeros((1, 5, 3))
    line[0, :, 0] = np.arange(5.0)
    _, degenerate = procrustes_kernel(line, gt[:1])
    assert degenerate.tolist() == [True]


def test_pa_mpjpe_rigid_invariance(rng):
    pred, gt = rng.normal(size=(3, 17, 3)) * 50, rng.normal(size=(3, 17, 3)) * 50
    base = pa_mpjpe(pred, gt)
    for _ in range(50):
        moved = pred @ random_rotation(rng).T + rng.normal(size=3) * 100
        assert pa_mpjpe(moved, gt) == pytest.approx(base, abs=1e-9)
    assert pa_mpjpe(gt @ random_rotation(rng).T + 4.0, gt) == pytest.approx(0.0, abs=1e-9)


def test_pa_mpjpe_four_point_example():
    gt = np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]])
    pred = gt.copy()
    pred[3] = [0, 0, 2]
    aligned, _ = procrustes_align(pred, gt)
    assert pa_mpjpe(pred, gt) == pytest.approx(oracles.mpjpe(aligned[None], gt[None]), abs=1e-12)
    assert 0 < pa_mpjpe(pred, gt) < mpjpe(pred, gt)


# ============================================================================
# PCK / AUC
# ============================================================================

def test_pck_cases():
    assert pck(*offset_by([0.0, 0.0]), 150) == 100.0
    assert pck(*offset_by([0.0, 5.0]), 4) == 50.0
    assert pck(*offset_by([0.0, 5.0]), 0) == 0.0
    assert pck(*offset_by([4.0]), 4) == 0.0


def test_pck_matches_loop_oracle(rng):
    pred, gt = rng.normal(size=(4, 17, 3)) * 100, rng.normal(size=(4, 17, 3)) * 100
    for threshold in (50.0, 150.0, 250.0):
        assert pck(pred, gt, threshold) == pytest.approx(oracles.pck(pred, gt, threshold))


def test_pck_is_monotone_in_threshold(rng):
    curve = pck_curve(rng.normal(size=(4, 17, 3)) * 80, np.zeros((4, 17, 3)))
    assert len(curve) == 31
    assert all(a <= b for a, b in zip(curve, curve[1:]))


def test_auc_cases():
    assert auc(*offset_by([0.0, 0.0])) == pytest.approx(30 / 31)
    assert auc(*offset_by([200.0, 300.0])) == 0.0
    # 75 < t for t = 80..150: fifteen grid points
    assert auc(*offset_by([75.0])) == pytest.approx(15 / 31)


def test_auc_in_unit_interval(rng):
    value = auc(rng.normal(size=(2, 17, 3)) * 60, np.zeros((2, 17, 3)))
    assert 0.0 <= value <= 1.0


def test_metric_input_validation():
    with pytest.raises(ShapeError):
        mpjpe(np.zeros((1, 3, 3)), np.zeros((1, 4, 3)))
    with pytest.raises(InvalidInputError):
        pck(np.full((1, 3, 3), np.nan), np.zeros((1, 3, 3)))


# ============================================================================
# REPORT
# ============================================================================

def test_evaluate_poses_perfect_prediction(rng):
    gt = rng.normal(size=(6, 17, 3)) * 100
    report = evaluate_poses(gt, gt, ["Walking"] * 3 + ["Eating"] * 3)
    assert report.mpjpe_mm == 0.0
    assert report.pa_mpjpe_mm == pytest.approx(0.0, abs=1e-9)
    assert report.pck_percent == 100.0
    assert report.frames == 6 and report.procrustes_fallbacks == 0
    assert sorted(report.per_action) == ["Eating", "Walking"]


def test_evaluate_poses_per_action_breakdown(rng):
    gt = rng.normal(size=(4, 17, 3)) * 100
    pred = gt.copy()
    pred[2:, 1:] += 10.0
    report = evaluate_poses(pred, gt, ["A", "A", "B", "B"])
    assert report.per_action["A"]["mpjpe_mm"] == 0.0
    assert report.per_action["B"]["mpjpe_mm"] > 0.0
    assert report.mpjpe_mm == pytest.approx(report.per_action["B"]["mpjpe_mm"] / 2)
    with pytest.raises(ShapeError):
        evaluate_poses(pred, gt, ["A"])


def test_report_text_is_stable():
    report = EvalReport(
        mpjpe_mm=1.5, pa_mpjpe_mm=1.0, pck_percent=99.0, auc=0.5, frames=2,
        per_action={"Walking": dict(mpjpe_mm=1.5, pa_mpjpe_mm=1.0, pck_percent=99.0, auc=0.5),
                    "Eating": dict(mpjpe_mm=2.0, pa_mpjpe_mm=1.0, pck_percent=98.0, auc=0.4)},
    )
    text = report.to_text()
    assert text.splitlines()[:6] == [
        "frames: 2", "mpjpe_mm: 1.5000", "pa_mpjpe_mm: 1.0000", "pck_percent: 99.0000",
        "auc: 0.500000", "procrustes_fallbacks: 0",
    ]
    rows = [line.split()[0] for line in text.splitlines()[8:]]
    assert rows == ["Eating", "Walking"]
    assert text == report.to_text()
