import numpy as np
import pytest

from src.services.geometry_service import GeometryService


def test_box_iou_identical(make_box):
    box = make_box(3, 4, 10, 20)
    assert GeometryService.box_iou(box, box) == 1.0


def test_box_iou_disjoint(make_box):
    assert GeometryService.box_iou(make_box(0, 0, 10, 10), make_box(20, 0, 10, 10)) == 0.0


def test_box_iou_touching_edges_is_zero(make_box):
    assert GeometryService.box_iou(make_box(0, 0, 10, 10), make_box(10, 0, 10, 10)) == 0.0


def test_box_iou_half_shift(make_box):
    iou = GeometryService.box_iou(make_box(0, 0, 10, 10), make_box(5, 0, 10, 10))
    assert iou == pytest.approx(1 / 3)


def test_iou_matrix_matches_pairwise(make_box):
    rng = np.random.default_rng(0)
    a = np.column_stack([rng.uniform(0, 50, (5, 2)), rng.uniform(5, 30, (5, 2))])
    b = np.column_stack([rng.uniform(0, 50, (4, 2)), rng.uniform(5, 30, (4, 2))])
    matrix = GeometryService.iou_matrix(a, b)
    assert matrix.shape == (5, 4)
    for i in range(5):
        for j in range(4):
            expected = GeometryService.box_iou(make_box(*a[i]), make_box(*b[j]))
            assert matrix[i, j] == pytest.approx(expected)


def test_iou_matrix_empty():
    assert GeometryService.iou_matrix(np.zeros((0, 4)), np.ones((3, 4))).shape == (0, 3)


def test_tube_iou_identical(make_trajectory):
    traj = make_trajectory(1, list(range(1, 11)), box=lambda f: (f, 0, 10, 20))
    assert GeometryService.tube_iou(traj, traj) == 1.0


def test_tube_iou_disjoint_frames(make_trajectory):
    a = make_trajectory(1, [1, 2, 3])
    b = make_trajectory(2, [4, 5, 6])
    assert GeometryService.tube_iou(a, b) == 0.0


def test_tube_iou_counts_unshared_frames_in_union(make_trajectory):
    a = make_trajectory(1, [1, 2])
    b = make_trajectory(2, [2, 3])
    assert GeometryService.tube_iou(a, b) == pytest.approx(1 / 3)


def test_tube_iou_is_symmetric(make_trajectory):
    a = make_trajectory(1, list(range(1, 30)), box=lambda f: (f * 0.7, 2, 12, 30))
    b = make_trajectory(2, list(range(10, 40)), box=lambda f: (f * 0.9, 0, 14, 28))
    assert GeometryService.tube_iou(a, b) == GeometryService.tube_iou(b, a)
