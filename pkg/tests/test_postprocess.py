import math

import numpy as np
import pytest

from src.config import PostConfig
from src.errors import InputError
from src.services.geometry_service import GeometryService
from src.services.postprocess_service import PostprocessService

FRAMES = list(range(1, 11))


def test_denoise_removes_identical_duplicate(make_trajectory, post_config):
    a = make_trajectory(1, FRAMES, score=0.9)
    b = make_trajectory(2, FRAMES, score=0.8)
    survivors = PostprocessService.denoise([a, b], post_config)
    assert survivors == [a]


def test_denoise_keeps_disjoint_trajectories(make_trajectory, post_config):
    a = make_trajectory(1, FRAMES, box=(0.0, 0.0, 10.0, 10.0))
    b = make_trajectory(2, FRAMES, box=(100.0, 0.0, 10.0, 10.0))
    assert PostprocessService.denoise([a, b], post_config) == [a, b]


def test_denoise_decays_by_overlap(make_trajectory, post_config):
    a = make_trajectory(1, FRAMES, box=(0.0, 0.0, 10.0, 10.0), score=0.9)
    b = make_trajectory(2, FRAMES, box=(0.0, 0.0, 10.0, 5.0), score=0.8)
    assert GeometryService.tube_iou(a, b) == pytest.approx(0.5)
    survivors = PostprocessService.denoise([a, b], post_config)
    assert survivors[0] == a
    np.testing.assert_allclose(survivors[1].scores, 0.4)
    assert [e.box for e in survivors[1].entries] == [e.box for e in b.entries]


def test_denoise_ignores_other_rough_classes(make_trajectory, post_config):
    a = make_trajectory(1, FRAMES, score=0.9)
    b = make_trajectory(2, FRAMES, score=0.8, class_id=4, rough_class="vehicle")
    assert PostprocessService.denoise([a, b], post_config) == [a, b]


def test_denoise_compares_within_a_class_label(make_trajectory, post_config):
    car = make_trajectory(1, FRAMES, score=0.9, class_id=4, rough_class="vehicle")
    van = make_trajectory(2, FRAMES, score=0.8, class_id=5, rough_class="vehicle")
    assert PostprocessService.denoise([car, van], post_config) == [car, van]

    voted_car = van.model_copy(update={"class_votes": [(4, 0.7), (5, 0.3)]})
    assert voted_car.label == 4
    assert PostprocessService.denoise([car, voted_car], post_config) == [car]


def test_denoise_never_raises_scores(make_trajectory, post_config):
    rng = np.random.default_rng(0)
    trajectories = []
    for track_id in range(1, 9):
        left, top = rng.uniform(0, 40, 2)
        start = int(rng.integers(1, 20))
        trajectories.append(
            make_trajectory(
                track_id,
                list(range(start, start + 15)),
                box=(float(left), float(top), 20.0, 20.0),
                score=float(rng.uniform(0.2, 1.0)),
            )
        )
    survivors = PostprocessService.denoise(trajectories, post_config)
    by_id = {t.id: t for t in trajectories}
    for traj in survivors:
        original = by_id[traj.id]
        assert np.all(traj.scores <= original.scores)
        assert [e.box for e in traj.entries] == [e.box for e in original.entries]


def test_interpolate_fills_gap_linearly(make_trajectory):
    traj = make_trajectory(
        1, [10, 14], box=lambda f: (0.0 if f == 10 else 8.0, 0.0, 10.0, 10.0), score=0.5
    )
    filled = PostprocessService.interpolate(traj, 60)
    assert [e.frame for e in filled.entries] == [10, 11, 12, 13, 14]
    assert filled.entries[2].box.as_tuple() == (4.0, 0.0, 10.0, 10.0)
    assert [e.interpolated for e in filled.entries] == [False, True, True, True, False]
    assert filled.entries[0] == traj.entries[0]
    assert filled.entries[-1] == traj.entries[-1]


def test_interpolate_blends_scores_and_takes_nearer_class(make_trajectory):
    traj = make_trajectory(
        1,
        [1, 5],
        score=lambda f: 0.2 if f == 1 else 0.6,
        class_id=lambda f: 4 if f == 1 else 5,
        rough_class="vehicle",
    )
    filled = PostprocessService.interpolate(traj, 60)
    assert [e.score for e in filled.entries] == pytest.approx([0.2, 0.3, 0.4, 0.5, 0.6])
    # frame 3 is equidistant and takes the earlier class
    assert [e.class_id for e in filled.entries] == [4, 4, 4, 5, 5]


def test_interpolate_recovers_linear_motion(make_trajectory):
    def box(f):
        return (2.5 * f + 1.0, 100.0 - 0.75 * f, 20.0 + 0.1 * f, 40.0)

    observed = [1, 2, 7, 8, 20, 45, 46]
    traj = make_trajectory(1, observed, box=box, score=lambda f: 0.5 + 0.01 * f)
    filled = PostprocessService.interpolate(traj, 60)

    assert [e.frame for e in filled.entries] == list(range(1, 47))
    for entry in filled.entries:
        np.testing.assert_allclose(entry.box.as_tuple(), box(entry.frame), atol=1e-9)
        assert entry.score == pytest.approx(0.5 + 0.01 * entry.frame, abs=1e-9)
        assert entry.interpolated == (entry.frame not in observed)
    kept = [e for e in filled.entries if not e.interpolated]
    assert kept == traj.entries


def test_interpolate_leaves_long_gaps_open(make_trajectory):
    open_gap = make_trajectory(1, [1, 62])
    assert PostprocessService.interpolate(open_gap, 60) is open_gap
    filled = PostprocessService.interpolate(make_trajectory(1, [1, 61]), 60)
    assert len(filled) == 61


def test_interpolate_without_gaps_is_identity(make_trajectory):
    traj = make_trajectory(1, FRAMES)
    assert PostprocessService.interpolate(traj, 60) is traj


def test_rescore_weight_values():
    assert PostprocessService.rescore_weight(0, 25) == 0.0
    assert PostprocessService.rescore_weight(25, 25) == pytest.approx(0.462117, abs=1e-6)
    assert PostprocessService.rescore_weight(25, 25) == pytest.approx(math.tanh(0.5))


def test_rescore_weight_monotonic_and_bounded():
    weights = [PostprocessService.rescore_weight(n, 25) for n in range(1, 501)]
    assert all(b > a for a, b in zip(weights, weights[1:]))
    assert all(0.0 <= w < 1.0 for w in weights)
    assert PostprocessService.rescore_weight(50, 10) > PostprocessService.rescore_weight(
        50, 40
    )


@pytest.mark.parametrize("length, tau", [(-1, 25), (10, 0), (10, -5)])
def test_rescore_weight_rejects_bad_arguments(length, tau):
    with pytest.raises(InputError):
        PostprocessService.rescore_weight(length, tau)


def test_rescore_scales_every_score(make_trajectory):
    traj = make_trajectory(1, list(range(1, 26)), score=0.8)
    rescored = PostprocessService.rescore(traj, 25)
    np.testing.assert_allclose(rescored.scores, 0.8 * math.tanh(0.5))


def test_tracknms_of_a_set_with_itself(make_trajectory, post_config):
    x = [
        make_trajectory(5, FRAMES, box=(0.0, 0.0, 10.0, 10.0)),
        make_trajectory(9, FRAMES, box=(200.0, 0.0, 10.0, 10.0)),
    ]
    fused = PostprocessService.tracknms([x, x], post_config)
    assert len(fused) == 2
    for original, kept in zip(x, fused):
        assert kept.entries == original.entries


def test_tracknms_with_empty_set(make_trajectory, post_config):
    x = [make_trajectory(3, FRAMES), make_trajectory(4, FRAMES, box=(50.0, 0, 10, 10))]
    fused = PostprocessService.tracknms([x, []], post_config)
    assert [t.id for t in fused] == [1, 2]
    assert [t.entries for t in fused] == [t.entries for t in x]


def test_tracknms_ranks_by_total_score(make_trajectory):
    cfg = PostConfig(nms_overlap_floor=0.1)
    long = make_trajectory(1, list(range(1, 121)), score=0.5)
    short = make_trajectory(2, list(range(1, 21)), score=0.9)

    fused = PostprocessService.tracknms([[long], [short]], cfg)
    assert fused[0].scores.tolist() == long.scores.tolist()
    np.testing.assert_allclose(fused[1].scores, 0.9 * (1 - 20 / 120))

    # mean-score ranking decays the long one instead
    denoised = PostprocessService.denoise([long, short], cfg)
    np.testing.assert_allclose(denoised[0].scores, 0.5 * (1 - 20 / 120))
    assert denoised[1].scores.tolist() == short.scores.tolist()


def test_tracknms_compares_within_a_class_label(make_trajectory, post_config):
    a = make_trajectory(1, FRAMES, class_id=4, rough_class="vehicle")
    b = make_trajectory(1, FRAMES, class_id=5, rough_class="vehicle")
    fused = PostprocessService.tracknms([[a], [b]], post_config)
    assert [t.label for t in fused] == [4, 5]


def test_run_without_steps_is_identity(make_trajectory):
    x = [make_trajectory(1, [1, 5]), make_trajectory(2, FRAMES, score=0.3)]
    assert PostprocessService.run(x, PostConfig(steps=[])) == x


def test_run_applies_steps_in_order(make_trajectory, post_config):
    x = [make_trajectory(1, [1, 5], score=0.8)]
    (out,) = PostprocessService.run(x, post_config)
    assert len(out) == 5
    np.testing.assert_allclose(out.scores, 0.8 * math.tanh(5 / 50))
