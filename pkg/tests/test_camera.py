import math

import numpy as np
import pytest

from src.errors import InputError, NumericalError
from src.models import AffineTransform
from src.services.camera_service import CameraService, TransformTable
from src.services.motion_service import MotionService


def _similarity(scale: float, angle: float, tx: float, ty: float) -> AffineTransform:
    c, s = math.cos(angle), math.sin(angle)
    return AffineTransform(
        a11=scale * c, a12=-scale * s, a21=scale * s, a22=scale * c, tx=tx, ty=ty
    )


def _state(noise):
    state = MotionService.initiate(np.array([200.0, 120.0, 0.6, 40.0]), noise)
    mean = state.mean.copy()
    mean[4:] = [1.5, -0.5, 0.0, 0.2]
    return state.model_copy(update={"mean": mean})


def test_warp_box_translation(make_box):
    box = CameraService.warp_box(
        AffineTransform(tx=-3.0, ty=2.0), make_box(10, 20, 30, 40)
    )
    assert box.as_tuple() == (7.0, 22.0, 30.0, 40.0)


def test_warp_box_rotation_takes_corner_hull(make_box):
    box = CameraService.warp_box(_similarity(1.0, math.pi / 2, 0, 0), make_box(0, 0, 4, 2))
    assert box.width == pytest.approx(2.0)
    assert box.height == pytest.approx(4.0)


def test_compensate_with_identity_is_exact(noise):
    state = _state(noise)
    out = CameraService.compensate(state, AffineTransform.identity())
    np.testing.assert_array_equal(out.mean, state.mean)
    np.testing.assert_array_equal(out.cov, state.cov)


def test_compensate_translation_moves_position_only(noise):
    state = _state(noise)
    out = CameraService.compensate(state, AffineTransform(tx=-1.0, ty=0.0))
    np.testing.assert_allclose(out.mean[:2], state.mean[:2] + [-1.0, 0.0])
    np.testing.assert_allclose(out.mean[2:], state.mean[2:])


def test_compensate_then_inverse_restores_state(noise):
    state = _state(noise)
    t = _similarity(1.02, 0.05, -4.0, 3.0)
    restored = CameraService.compensate(CameraService.compensate(state, t), t.inverse())
    np.testing.assert_allclose(restored.mean, state.mean, rtol=1e-9, atol=1e-9)
    np.testing.assert_allclose(restored.cov, state.cov, rtol=1e-9, atol=1e-9)


def test_compensate_then_inverse_restores_state_under_shear(noise):
    state = _state(noise)
    t = AffineTransform(a11=1.05, a12=0.2, a21=-0.1, a22=0.95, tx=6.0, ty=-2.0)
    assert CameraService.aspect_scale(t.linear) != pytest.approx(1.0)
    restored = CameraService.compensate(CameraService.compensate(state, t), t.inverse())
    np.testing.assert_allclose(restored.mean, state.mean, rtol=1e-9, atol=1e-8)
    np.testing.assert_allclose(restored.cov, state.cov, rtol=1e-9, atol=1e-8)


def test_compensate_scales_height(noise):
    state = _state(noise)
    out = CameraService.compensate(state, _similarity(2.0, 0.0, 0.0, 0.0))
    assert out.mean[3] == pytest.approx(2 * state.mean[3])
    assert out.mean[2] == pytest.approx(state.mean[2])


def test_compensate_degenerate_raises(noise):
    state = _state(noise)
    mean = state.mean.copy()
    mean[3] = 0.0
    with pytest.raises(NumericalError):
        CameraService.compensate(
            state.model_copy(update={"mean": mean}), AffineTransform.identity()
        )


def test_compensate_overflow_raises_numerical_error(noise):
    state = _state(noise).model_copy(update={"cov": np.eye(8) * 1e300})
    with pytest.raises(NumericalError, match="finite"):
        CameraService.compensate(state, _similarity(1e5, 0.0, 0.0, 0.0))


def test_transform_table_between_composes_steps():
    step = AffineTransform(tx=-1.0, ty=0.5)
    table = TransformTable({f: step for f in range(2, 11)})
    total = table.between(3, 8)
    assert total.tx == pytest.approx(-5.0)
    assert total.ty == pytest.approx(2.5)
    assert table.between(5, 5) == AffineTransform.identity()
    assert table.get(1) is None


def test_parse_table_reads_rows():
    table = CameraService.parse_table(["2,1,0,0,1,-1,0", "", "3,1,0,0,1,-1,0.5"])
    assert len(table) == 2
    assert table.get(3).ty == 0.5


@pytest.mark.parametrize(
    "lines, line",
    [
        (["2,1,0,0,1,-1"], 1),
        (["2,1,0,0,1,-1,0", "3,1,0,x,1,-1,0"], 2),
        (["2,1,0,0,1,-1,0", "3,0,0,0,0,0,0"], 2),
        (["2,1,0,0,1,-1,0", "2,1,0,0,1,-1,0"], 2),
    ],
)
def test_parse_table_reports_line_numbers(lines, line):
    with pytest.raises(InputError) as exc:
        CameraService.parse_table(lines, "transforms.txt")
    assert exc.value.line == line


def test_load_table_none_is_empty():
    assert not CameraService.load_table(None)
