"""Equiangular fan-beam acquisition geometry, sinograms, and view masks."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class FanBeamGeometry:
    """Fan-beam scanner with an equiangular (arc) detector.

    For view angle ``beta`` the source sits at
    ``S = source_to_center * (cos beta, sin beta)``.  Detector element ``k``
    defines a ray leaving the source at fan angle
    ``gamma_k = (k - (detector_count - 1)/2) * detector_pitch`` measured from
    the central ray (which points at the isocenter); its endpoint lies on the
    detector arc at distance ``source_to_center + center_to_detector`` from
    the source.  A ray at fan angle ``gamma`` passes the isocenter at
    perpendicular distance ``source_to_center * sin(gamma)``.
    """

    source_to_center: float
    center_to_detector: float
    detector_count: int
    detector_pitch: float
    view_angles: np.ndarray
    fov_radius: float

    def __post_init__(self):
        self.view_angles = np.atleast_1d(np.asarray(self.view_angles, dtype=np.float64))
        if self.detector_count <= 0:
            raise ValueError("detector_count must be positive")
        if self.detector_pitch <= 0:
            raise ValueError("detector_pitch must be positive")
        if self.view_angles.size == 0:
            raise ValueError("at least one view angle required")
        if not np.all(np.isfinite(self.view_angles)):
            raise ValueError("view angles must be finite")
        if self.source_to_center <= self.fov_radius:
            raise ValueError(
                f"source_to_center ({self.source_to_center}) must exceed "
                f"fov_radius ({self.fov_radius})"
            )
        arc = self.detector_count * self.detector_pitch
        needed = 2.0 * np.arcsin(self.fov_radius / self.source_to_center)
        if arc < needed - 1e-12:
            raise ValueError(
                f"detector arc {arc:.6g} rad does not span the FOV "
                f"(needs {needed:.6g} rad for fov_radius={self.fov_radius})"
            )

    @property
    def num_views(self) -> int:
        return self.view_angles.size

    @property
    def source_to_detector(self) -> float:
        return self.source_to_center + self.center_to_detector

    def fan_angles(self) -> np.ndarray:
        """Signed fan angle of each detector element, shape (detector_count,)."""
        k = np.arange(self.detector_count)
        return (k - (self.detector_count - 1) / 2.0) * self.detector_pitch

    def with_views(self, view_angles: np.ndarray) -> "FanBeamGeometry":
        return FanBeamGeometry(
            self.source_to_center,
            self.center_to_detector,
            self.detector_count,
            self.detector_pitch,
            np.asarray(view_angles, dtype=np.float64),
            self.fov_radius,
        )

    def to_dict(self) -> dict:
        return {
            "source_to_center": self.source_to_center,
            "center_to_detector": self.center_to_detector,
            "detector_count": self.detector_count,
            "detector_pitch": self.detector_pitch,
            "view_angles": self.view_angles.tolist(),
            "fov_radius": self.fov_radius,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FanBeamGeometry":
        return cls(
            source_to_center=float(d["source_to_center"]),
            center_to_detector=float(d["center_to_detector"]),
            detector_count=int(d["detector_count"]),
            detector_pitch=float(d["detector_pitch"]),
            view_angles=np.asarray(d["view_angles"], dtype=np.float64),
            fov_radius=float(d["fov_radius"]),
        )


def uniform_view_angles(num_views: int) -> np.ndarray:
    """num_views angles uniformly spaced over [0, 2*pi)."""
    if num_views <= 0:
        raise ValueError("num_views must be positive")
    return np.arange(num_views) * (2.0 * np.pi / num_views)


def paper_scale_geometry(num_views: int = 512) -> FanBeamGeometry:
    """Clinical-scale default: 550/400 mm distances, 512-element arc detector.

    The 512 x (1/512 rad) arc subtends 1 rad and therefore covers rays out to
    550*sin(0.5) ~ 263.7 mm from the isocenter, so the FOV radius is capped at
    260 mm (a nominal 300 mm FOV would violate the arc-coverage invariant).
    """
    return FanBeamGeometry(
        source_to_center=550.0,
        center_to_detector=400.0,
        detector_count=512,
        detector_pitch=1.0 / 512.0,
        view_angles=uniform_view_angles(num_views),
        fov_radius=260.0,
    )


def desk_scale_geometry(num_views: int = 60, detector_count: int = 64) -> FanBeamGeometry:
    """Small geometry for fast experiments: same distances, 1 rad detector arc."""
    return FanBeamGeometry(
        source_to_center=550.0,
        center_to_detector=400.0,
        detector_count=detector_count,
        detector_pitch=1.0 / detector_count,
        view_angles=uniform_view_angles(num_views),
        fov_radius=200.0,
    )


@dataclass
class Sinogram:
    """Line-integral measurements, shape (num_views, detector_count)."""

    values: np.ndarray
    geometry: FanBeamGeometry

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        expected = (self.geometry.num_views, self.geometry.detector_count)
        if vals.size != expected[0] * expected[1]:
            raise ValueError(
                f"sinogram has {vals.size} entries, geometry expects {expected}"
            )
        vals = vals.reshape(expected)
        if not np.all(np.isfinite(vals)):
            raise ValueError("sinogram values must be finite")
        self.values = vals

    @property
    def num_views(self) -> int:
        return self.geometry.num_views

    @property
    def detector_count(self) -> int:
        return self.geometry.detector_count

    def with_values(self, values: np.ndarray) -> "Sinogram":
        return Sinogram(np.asarray(values), self.geometry)


@dataclass
class ViewMask:
    """Sorted unique view indices to keep when subsampling."""

    kept_view_indices: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.kept_view_indices, dtype=np.int64).ravel()
        if idx.size == 0:
            raise ValueError("mask must keep at least one view")
        if np.any(np.diff(idx) <= 0):
            raise ValueError("kept_view_indices must be strictly increasing")
        if idx[0] < 0:
            raise ValueError("view indices must be non-negative")
        self.kept_view_indices = idx

    def __len__(self) -> int:
        return self.kept_view_indices.size


def uniform_mask(num_views: int, kept: int) -> ViewMask:
    """Uniform stride mask: indices {0, s, 2s, ...} with s = floor(num_views/kept).

    When ``kept`` does not divide ``num_views`` the stride rounds down, which
    biases the kept angles toward the start of the range; exact division gives
    perfectly even coverage.
    """
    if kept <= 0:
        raise ValueError("kept must be positive")
    if kept > num_views:
        raise ValueError(f"cannot keep {kept} of {num_views} views")
    stride = num_views // kept
    return ViewMask(np.arange(kept) * stride)


def sample_views(sino: Sinogram, mask: ViewMask) -> Sinogram:
    """Sparse-view sampling: keep the masked views, in order.

    The output geometry's view angles are sub-selected consistently, so the
    sparse sinogram remains self-describing.
    """
    idx = mask.kept_view_indices
    if idx[-1] >= sino.num_views:
        raise ValueError(
            f"mask index {idx[-1]} out of range for {sino.num_views} views"
        )
    geom = sino.geometry.with_views(sino.geometry.view_angles[idx])
    return Sinogram(sino.values[idx], geom)
