"""2D scalar fields on physically sized pixel grids, plus display windowing."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class ImageGrid:
    """Scalar image on a regular grid with isotropic pixel spacing.

    ``values`` has shape ``(height, width)`` (row-major).  The grid is
    centred on the origin: pixel (i, j) covers the physical square
    ``x in [x0 + j*p, x0 + (j+1)*p)``, ``y in [y0 + i*p, y0 + (i+1)*p)``
    with ``p = pixel_size``, ``x0 = -width*p/2`` and ``y0 = -height*p/2``.
    Pixel centres sit at ``x = (j - (width-1)/2)*p``, ``y = (i - (height-1)/2)*p``.
    """

    width: int
    height: int
    pixel_size: float
    values: np.ndarray

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"grid dimensions must be positive, got {self.width}x{self.height}")
        if self.pixel_size <= 0:
            raise ValueError(f"pixel_size must be positive, got {self.pixel_size}")
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.size != self.width * self.height:
            raise ValueError(
                f"values has {vals.size} entries, expected {self.width * self.height}"
            )
        vals = vals.reshape(self.height, self.width)
        if not np.all(np.isfinite(vals)):
            raise ValueError("image values must be finite")
        self.values = vals

    @classmethod
    def zeros(cls, width: int, height: int, pixel_size: float) -> "ImageGrid":
        return cls(width, height, pixel_size, np.zeros((height, width)))

    @classmethod
    def from_values(cls, values: np.ndarray, pixel_size: float) -> "ImageGrid":
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 2:
            raise ValueError(f"expected a 2D array, got shape {values.shape}")
        h, w = values.shape
        return cls(w, h, pixel_size, values)

    @property
    def extent_x(self) -> float:
        """Physical width in mm."""
        return self.width * self.pixel_size

    @property
    def extent_y(self) -> float:
        """Physical height in mm."""
        return self.height * self.pixel_size

    @property
    def fov_radius(self) -> float:
        """Radius of the inscribed circle of the physical grid."""
        return 0.5 * min(self.extent_x, self.extent_y)

    def pixel_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Centre coordinates: x of shape (width,), y of shape (height,)."""
        xs = (np.arange(self.width) - (self.width - 1) / 2.0) * self.pixel_size
        ys = (np.arange(self.height) - (self.height - 1) / 2.0) * self.pixel_size
        return xs, ys

    def with_values(self, values: np.ndarray) -> "ImageGrid":
        """Same grid, new values."""
        return ImageGrid(self.width, self.height, self.pixel_size, np.asarray(values))

    def copy(self) -> "ImageGrid":
        return self.with_values(self.values.copy())


@dataclass(frozen=True)
class DisplayWindow:
    """Linear display window [low, high] in HU (or any intensity unit)."""

    low: float
    high: float

    def __post_init__(self):
        if not self.low < self.high:
            raise ValueError(f"window requires low < high, got [{self.low}, {self.high}]")

    @property
    def width(self) -> float:
        return self.high - self.low


# Clinical soft-tissue default used for PGM export and display normalization.
DEFAULT_WINDOW = DisplayWindow(-160.0, 240.0)


def hu_window(image: ImageGrid, window: DisplayWindow) -> ImageGrid:
    """Map intensities through a display window to [0, 1] with clamping.

    out = clamp((v - low) / (high - low), 0, 1); monotone in v and idempotent
    when re-applied with the unit window [0, 1].
    """
    t = (image.values - window.low) / window.width
    return image.with_values(np.clip(t, 0.0, 1.0))
