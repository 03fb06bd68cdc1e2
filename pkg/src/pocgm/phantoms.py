"""Parametric ellipse phantoms: analytic ground truth for the CT pipeline."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import ImageGrid


@dataclass(frozen=True)
class Ellipse:
    """One additive ellipse: physical mm coordinates, rotation in radians."""

    center_x: float
    center_y: float
    semi_axis_a: float
    semi_axis_b: float
    rotation: float = 0.0
    intensity: float = 1.0

    def __post_init__(self):
        if self.semi_axis_a <= 0 or self.semi_axis_b <= 0:
            raise ValueError(
                f"semi-axes must be positive, got a={self.semi_axis_a}, b={self.semi_axis_b}"
            )

    @property
    def area(self) -> float:
        return np.pi * self.semi_axis_a * self.semi_axis_b

    def outer_radius(self) -> float:
        """Upper bound on the distance of any ellipse point from the origin."""
        c = np.hypot(self.center_x, self.center_y)
        return c + max(self.semi_axis_a, self.semi_axis_b)


@dataclass
class PhantomSpec:
    """A list of additive ellipses plus the seed that generated them."""

    ellipses: list[Ellipse] = field(default_factory=list)
    seed: int = 0


def generate_ellipse_phantom(
    spec: PhantomSpec, width: int, height: int, pixel_size: float
) -> ImageGrid:
    """Rasterize a phantom by pixel-centre point sampling.

    Each pixel receives the sum of ``intensity`` over all ellipses whose
    interior contains the pixel centre.  Containment uses the closed ellipse
    (boundary included).  Every ellipse must lie within the field-of-view
    circle inscribed in the grid; the check uses the conservative bound
    |center| + max(a, b) <= fov_radius.
    """
    grid = ImageGrid.zeros(width, height, pixel_size)
    fov = grid.fov_radius
    for idx, e in enumerate(spec.ellipses):
        if e.outer_radius() > fov + 1e-9:
            raise ValueError(
                f"ellipse {idx} (center=({e.center_x}, {e.center_y}), "
                f"axes=({e.semi_axis_a}, {e.semi_axis_b})) extends outside the "
                f"FOV circle of radius {fov:.6g} mm"
            )

    xs, ys = grid.pixel_centers()
    X, Y = np.meshgrid(xs, ys)
    out = np.zeros((height, width))
    for e in spec.ellipses:
        dx = X - e.center_x
        dy = Y - e.center_y
        ct, st = np.cos(e.rotation), np.sin(e.rotation)
        u = (dx * ct + dy * st) / e.semi_axis_a
        v = (-dx * st + dy * ct) / e.semi_axis_b
        out += e.intensity * (u * u + v * v <= 1.0)
    return grid.with_values(out)


def disk_phantom(
    width: int, height: int, pixel_size: float, radius: float, intensity: float = 1.0
) -> ImageGrid:
    """Centered uniform disk; the workhorse for projector and FBP oracles."""
    spec = PhantomSpec([Ellipse(0.0, 0.0, radius, radius, 0.0, intensity)])
    return generate_ellipse_phantom(spec, width, height, pixel_size)


def random_phantom_spec(
    seed: int,
    fov_radius: float,
    n_features: tuple[int, int] = (3, 7),
) -> PhantomSpec:
    """Random anatomy-like phantom: a large body ellipse plus smaller features.

    Deterministic for a fixed seed.  All ellipses satisfy the FOV containment
    bound used by the rasterizer, with a small safety margin.
    """
    rng = np.random.default_rng(seed)
    ellipses: list[Ellipse] = []

    # Body outline: large, nearly centered, moderate intensity.
    body_a = fov_radius * rng.uniform(0.55, 0.8)
    body_b = fov_radius * rng.uniform(0.55, 0.8)
    body_rot = rng.uniform(0.0, np.pi)
    margin = fov_radius - max(body_a, body_b)
    cx, cy = rng.uniform(-0.3, 0.3, size=2) * margin
    ellipses.append(Ellipse(cx, cy, body_a, body_b, body_rot, rng.uniform(0.5, 0.9)))

    n = int(rng.integers(n_features[0], n_features[1] + 1))
    for _ in range(n):
        a = fov_radius * rng.uniform(0.04, 0.25)
        b = fov_radius * rng.uniform(0.04, 0.25)
        rot = rng.uniform(0.0, np.pi)
        reach = fov_radius * 0.95 - max(a, b)
        r = rng.uniform(0.0, max(reach, 0.0))
        phi = rng.uniform(0.0, 2 * np.pi)
        intensity = rng.choice([-1.0, 1.0]) * rng.uniform(0.1, 0.45)
        ellipses.append(Ellipse(r * np.cos(phi), r * np.sin(phi), a, b, rot, intensity))

    return PhantomSpec(ellipses, seed=seed)
