import json

import numpy as np
import pytest

from pocgm import (
    DisplayWindow,
    ImageGrid,
    Sinogram,
    desk_scale_geometry,
    read_geometry,
    read_image,
    read_sinogram,
    write_geometry,
    write_image,
    write_sinogram,
)
from pocgm.fileio import FileFormatError


def _float32_image(rng, w=7, h=5):
    vals = rng.standard_normal((h, w)).astype(np.float32).astype(np.float64)
    return ImageGrid(w, h, 1.25, vals)


def test_raw_float_roundtrip_is_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    for _ in range(5):
        img = _float32_image(rng)
        path = str(tmp_path / "img.raw")
        write_image(img, path)
        back = read_image(path)
        assert np.array_equal(back.values, img.values)
        assert (back.width, back.height, back.pixel_size) == (7, 5, 1.25)


def test_raw_float_missing_sidecar(tmp_path):
    path = str(tmp_path / "img.raw")
    np.zeros(4, dtype="<f4").tofile(path)
    with pytest.raises(FileFormatError, match="sidecar"):
        read_image(path)


def test_raw_float_dimension_mismatch(tmp_path):
    img = ImageGrid.zeros(4, 4, 1.0)
    path = str(tmp_path / "img.raw")
    write_image(img, path)
    with open(path + ".json", "w") as fh:
        json.dump({"width": 5, "height": 4, "pixel_size": 1.0}, fh)
    with pytest.raises(FileFormatError, match="payload"):
        read_image(path)


def test_pgm16_window_endpoints_and_midpoint(tmp_path):
    win = DisplayWindow(-160.0, 240.0)
    img = ImageGrid(4, 1, 1.0, np.array([-160.0, 240.0, 40.0, 1000.0]))
    path = str(tmp_path / "img.pgm")
    write_image(img, path, format="pgm16", window=win)
    with open(path, "rb") as fh:
        header = fh.readline() + fh.readline() + fh.readline()
        data = np.frombuffer(fh.read(), dtype=">u2")
    assert header == b"P5\n4 1\n65535\n"
    # low -> 0, high -> 65535, midpoint -> 32768 (round-half-up), clamp above
    assert data.tolist() == [0, 65535, 32768, 65535]


def test_pgm16_requires_window(tmp_path):
    with pytest.raises(ValueError, match="window"):
        write_image(ImageGrid.zeros(2, 2, 1.0), str(tmp_path / "x.pgm"), format="pgm16")


def test_pgm16_read_back(tmp_path):
    win = DisplayWindow(0.0, 100.0)
    vals = np.linspace(0.0, 100.0, 24).reshape(4, 6)
    img = ImageGrid(6, 4, 2.0, vals)
    path = str(tmp_path / "img.pgm")
    write_image(img, path, format="pgm16", window=win)
    back = read_image(path, pixel_size=2.0, window=win)
    assert back.values.shape == (4, 6)
    assert np.max(np.abs(back.values - vals)) < 100.0 / 65535.0


def test_pgm16_rejects_8bit(tmp_path):
    path = str(tmp_path / "x.pgm")
    with open(path, "wb") as fh:
        fh.write(b"P5\n2 2\n255\n" + bytes(4))
    with pytest.raises(FileFormatError, match="16-bit"):
        read_image(path)


def test_sinogram_roundtrip(tmp_path):
    geom = desk_scale_geometry()
    rng = np.random.default_rng(1)
    vals = rng.standard_normal((60, 64)).astype(np.float32).astype(np.float64)
    sino = Sinogram(vals, geom)
    path = str(tmp_path / "s.sino")
    write_sinogram(sino, path)
    back = read_sinogram(path)
    assert np.array_equal(back.values, vals)
    assert back.geometry.detector_count == 64
    assert np.allclose(back.geometry.view_angles, geom.view_angles)


def test_geometry_roundtrip(tmp_path):
    geom = desk_scale_geometry(num_views=12, detector_count=32)
    path = str(tmp_path / "g.json")
    write_geometry(geom, path)
    back = read_geometry(path)
    assert back.to_dict() == geom.to_dict()
