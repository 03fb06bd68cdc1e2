"""On-disk formats: raw float32 + JSON sidecar, 16-bit PGM, geometry JSON.

raw-float: little-endian float32, row-major, with a sidecar at ``path + ".json"``
holding the grid metadata.  Round trips are bit-exact for float32 data.

pgm16: binary PGM (P5), maxval 65535, big-endian samples.  Intensities map
linearly from a display window [low, high] to [0, 65535] with clamping and
round-half-up, so the exact midpoint lands on 32768.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .geometry import FanBeamGeometry, Sinogram
from .grid import DisplayWindow, ImageGrid


class FileFormatError(ValueError):
    """Malformed file or metadata inconsistent with the payload."""


def _sidecar_path(path: str) -> str:
    return path + ".json"


def write_image(
    image: ImageGrid,
    path: str,
    format: str = "raw-float",
    window: DisplayWindow | None = None,
) -> None:
    if format == "raw-float":
        image.values.astype("<f4").tofile(path)
        meta = {
            "width": image.width,
            "height": image.height,
            "pixel_size": image.pixel_size,
            "dtype": "float32-le",
        }
        with open(_sidecar_path(path), "w") as fh:
            json.dump(meta, fh, indent=2)
    elif format == "pgm16":
        if window is None:
            raise ValueError("pgm16 output requires a display window")
        t = (image.values - window.low) / window.width
        q = np.floor(np.clip(t, 0.0, 1.0) * 65535.0 + 0.5).astype(">u2")
        with open(path, "wb") as fh:
            fh.write(f"P5\n{image.width} {image.height}\n65535\n".encode("ascii"))
            fh.write(q.tobytes())
    else:
        raise ValueError(f"unknown image format {format!r}")


def read_image(
    path: str,
    pixel_size: float | None = None,
    window: DisplayWindow | None = None,
) -> ImageGrid:
    """Read raw-float (sidecar required) or PGM16 (auto-detected by magic).

    For PGM16 the stored quantized values map back to [0, 1], or to the given
    window when one is supplied; ``pixel_size`` defaults to 1.0 mm for PGM.
    """
    with open(path, "rb") as fh:
        magic = fh.read(2)
    if magic == b"P5":
        return _read_pgm16(path, pixel_size or 1.0, window)
    return _read_raw_float(path, pixel_size)


def _read_raw_float(path: str, pixel_size: float | None) -> ImageGrid:
    side = _sidecar_path(path)
    if not os.path.exists(side):
        raise FileFormatError(f"missing sidecar {side} for raw-float image {path}")
    with open(side) as fh:
        meta = json.load(fh)
    try:
        width, height = int(meta["width"]), int(meta["height"])
        ps = float(meta["pixel_size"]) if pixel_size is None else pixel_size
    except (KeyError, TypeError, ValueError) as exc:
        raise FileFormatError(f"bad sidecar {side}: {exc}") from exc
    data = np.fromfile(path, dtype="<f4")
    if data.size != width * height:
        raise FileFormatError(
            f"{path}: payload has {data.size} samples, sidecar says {width}x{height}"
        )
    return ImageGrid(width, height, ps, data.astype(np.float64))


def _read_pgm_header(fh) -> tuple[int, int, int]:
    # Tokens separated by whitespace; '#' starts a comment to end of line.
    tokens: list[bytes] = []
    while len(tokens) < 4:
        chunk = fh.read(1)
        if not chunk:
            raise FileFormatError("truncated PGM header")
        if chunk == b"#":
            while chunk not in (b"\n", b""):
                chunk = fh.read(1)
            continue
        if chunk.isspace():
            continue
        tok = chunk
        while True:
            c = fh.read(1)
            if not c or c.isspace():
                break
            tok += c
        tokens.append(tok)
    if tokens[0] != b"P5":
        raise FileFormatError(f"not a binary PGM file (magic {tokens[0]!r})")
    width, height, maxval = (int(t) for t in tokens[1:4])
    return width, height, maxval


def _read_pgm16(path: str, pixel_size: float, window: DisplayWindow | None) -> ImageGrid:
    with open(path, "rb") as fh:
        width, height, maxval = _read_pgm_header(fh)
        if maxval != 65535:
            raise FileFormatError(f"{path}: expected 16-bit PGM (maxval 65535), got {maxval}")
        data = np.frombuffer(fh.read(), dtype=">u2")
    if data.size != width * height:
        raise FileFormatError(
            f"{path}: payload has {data.size} samples, header says {width}x{height}"
        )
    t = data.astype(np.float64) / 65535.0
    if window is not None:
        t = window.low + t * window.width
    return ImageGrid(width, height, pixel_size, t)


def write_sinogram(sino: Sinogram, path: str) -> None:
    sino.values.astype("<f4").tofile(path)
    meta = {
        "num_views": sino.num_views,
        "detector_count": sino.detector_count,
        "dtype": "float32-le",
        "geometry": sino.geometry.to_dict(),
    }
    with open(_sidecar_path(path), "w") as fh:
        json.dump(meta, fh, indent=2)


def read_sinogram(path: str) -> Sinogram:
    side = _sidecar_path(path)
    if not os.path.exists(side):
        raise FileFormatError(f"missing sidecar {side} for sinogram {path}")
    with open(side) as fh:
        meta = json.load(fh)
    try:
        num_views = int(meta["num_views"])
        detector_count = int(meta["detector_count"])
        geom = FanBeamGeometry.from_dict(meta["geometry"])
    except (KeyError, TypeError, ValueError) as exc:
        raise FileFormatError(f"bad sidecar {side}: {exc}") from exc
    if geom.num_views != num_views or geom.detector_count != detector_count:
        raise FileFormatError(f"{side}: geometry block disagrees with sinogram shape")
    data = np.fromfile(path, dtype="<f4")
    if data.size != num_views * detector_count:
        raise FileFormatError(
            f"{path}: payload has {data.size} samples, sidecar says "
            f"{num_views}x{detector_count}"
        )
    return Sinogram(data.astype(np.float64), geom)


def write_geometry(geom: FanBeamGeometry, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(geom.to_dict(), fh, indent=2)


def read_geometry(path: str) -> FanBeamGeometry:
    with open(path) as fh:
        return FanBeamGeometry.from_dict(json.load(fh))
