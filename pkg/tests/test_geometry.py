import numpy as np
import pytest

from pocgm import (
    FanBeamGeometry,
    Sinogram,
    ViewMask,
    desk_scale_geometry,
    paper_scale_geometry,
    sample_views,
    uniform_mask,
    uniform_view_angles,
)


def test_source_must_sit_outside_fov():
    with pytest.raises(ValueError, match="source_to_center"):
        FanBeamGeometry(100.0, 400.0, 64, 1 / 64, uniform_view_angles(4), 150.0)


def test_detector_arc_must_cover_fov():
    with pytest.raises(ValueError, match="arc"):
        FanBeamGeometry(550.0, 400.0, 16, 1 / 64, uniform_view_angles(4), 200.0)


def test_paper_scale_defaults():
    geom = paper_scale_geometry()
    assert geom.detector_count == 512
    assert geom.detector_pitch == pytest.approx(1 / 512)
    assert geom.num_views == 512
    assert geom.source_to_detector == pytest.approx(950.0)
    # arc coverage invariant holds at the default FOV radius
    arc = geom.detector_count * geom.detector_pitch
    assert arc >= 2 * np.arcsin(geom.fov_radius / geom.source_to_center)


def test_fan_angles_symmetric():
    geom = desk_scale_geometry()
    gam = geom.fan_angles()
    assert np.allclose(gam, -gam[::-1])
    assert gam.size == 64


def test_uniform_mask_examples():
    assert np.array_equal(uniform_mask(512, 128).kept_view_indices[:3], [0, 4, 8])
    assert len(uniform_mask(512, 128)) == 128
    assert np.array_equal(uniform_mask(8, 8).kept_view_indices, np.arange(8))
    m = uniform_mask(60, 15)
    assert len(m) == 15
    assert np.array_equal(m.kept_view_indices, np.arange(15) * 4)


def test_uniform_mask_floor_rule_and_errors():
    m = uniform_mask(10, 3)  # stride floor(10/3) = 3
    assert np.array_equal(m.kept_view_indices, [0, 3, 6])
    with pytest.raises(ValueError):
        uniform_mask(4, 8)
    with pytest.raises(ValueError):
        uniform_mask(4, 0)


def test_view_mask_must_increase():
    with pytest.raises(ValueError):
        ViewMask(np.array([0, 4, 4]))


def _random_sino(num_views=60, seed=0):
    geom = desk_scale_geometry(num_views=num_views)
    rng = np.random.default_rng(seed)
    return Sinogram(rng.standard_normal((num_views, 64)), geom)


def test_sample_views_identity():
    sino = _random_sino()
    out = sample_views(sino, uniform_mask(60, 60))
    assert np.array_equal(out.values, sino.values)
    assert np.array_equal(out.geometry.view_angles, sino.geometry.view_angles)


def test_sample_views_keeps_strided_rows_and_angles():
    sino = _random_sino()
    out = sample_views(sino, uniform_mask(60, 15))
    assert out.num_views == 15
    assert np.array_equal(out.values, sino.values[::4])
    assert np.array_equal(out.geometry.view_angles, sino.geometry.view_angles[::4])


def test_sample_views_composition():
    sino = _random_sino()
    twice = sample_views(sample_views(sino, uniform_mask(60, 30)), uniform_mask(30, 15))
    once = sample_views(sino, uniform_mask(60, 15))
    assert np.array_equal(twice.values, once.values)
    assert np.array_equal(twice.geometry.view_angles, once.geometry.view_angles)


def test_sample_views_range_check():
    sino = _random_sino()
    with pytest.raises(ValueError, match="out of range"):
        sample_views(sino, ViewMask(np.array([0, 60])))


def test_sinogram_shape_check():
    geom = desk_scale_geometry()
    with pytest.raises(ValueError):
        Sinogram(np.zeros((59, 64)), geom)
