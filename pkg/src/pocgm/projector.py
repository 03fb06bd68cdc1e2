"""Fan-beam forward projection via Siddon ray-grid traversal, and its exact transpose."""

from __future__ import annotations

import numpy as np

from .geometry import FanBeamGeometry, Sinogram
from .grid import ImageGrid


def _ray_endpoints(geom: FanBeamGeometry, beta: float) -> tuple[np.ndarray, np.ndarray]:
    """Source point (2,) and detector element centres (detector_count, 2) at one view."""
    d = geom.source_to_center
    src = np.array([d * np.cos(beta), d * np.sin(beta)])
    # Central ray direction and its in-plane perpendicular; fan angles rotate
    # the ray within this frame.
    c_hat = np.array([-np.cos(beta), -np.sin(beta)])
    e_hat = np.array([np.sin(beta), -np.cos(beta)])
    gammas = geom.fan_angles()
    dirs = np.outer(np.cos(gammas), c_hat) + np.outer(np.sin(gammas), e_hat)
    det = src + geom.source_to_detector * dirs
    return src, det


def _grid_segments(
    src: np.ndarray,
    det: np.ndarray,
    width: int,
    height: int,
    pixel_size: float,
):
    """Per-pixel intersection data for a batch of rays sharing one source point.

    Returns (ix, iy, lengths, valid): arrays of shape (n_rays, n_segments)
    giving, for each candidate segment, the pixel indices, the intersection
    length in mm, and whether the segment actually lies inside the grid.
    Segment boundaries are the sorted union of all x- and y- grid line
    crossings, so lengths are the exact Siddon traversal lengths; rays that
    cross a pixel corner produce zero-length segments that are masked out.
    Pixel membership uses half-open intervals [low, high) via floor on the
    segment midpoint.
    """
    x0 = -0.5 * width * pixel_size
    y0 = -0.5 * height * pixel_size
    x_edges = x0 + pixel_size * np.arange(width + 1)
    y_edges = y0 + pixel_size * np.arange(height + 1)

    delta = det - src[None, :]  # (n, 2)
    ray_len = np.hypot(delta[:, 0], delta[:, 1])  # (n,)

    with np.errstate(divide="ignore", invalid="ignore"):
        inv_dx = 1.0 / delta[:, 0]
        inv_dy = 1.0 / delta[:, 1]
        tx = (x_edges[None, :] - src[0]) * inv_dx[:, None]  # (n, W+1)
        ty = (y_edges[None, :] - src[1]) * inv_dy[:, None]  # (n, H+1)

        # Slab clipping of the parametric range [0, 1] (source to detector).
        tx_lo = np.fmin(tx[:, 0], tx[:, -1])
        tx_hi = np.fmax(tx[:, 0], tx[:, -1])
        ty_lo = np.fmin(ty[:, 0], ty[:, -1])
        ty_hi = np.fmax(ty[:, 0], ty[:, -1])

    # Rays parallel to an axis: crossing parameters are +-inf (or NaN when the
    # source lies exactly on a grid line); the slab bound collapses to the
    # whole range when the ray is inside the slab, and to "miss" otherwise.
    par_x = delta[:, 0] == 0.0
    inside_x = (src[0] >= x_edges[0]) & (src[0] <= x_edges[-1])
    tx_lo = np.where(par_x, np.where(inside_x, -np.inf, np.inf), tx_lo)
    tx_hi = np.where(par_x, np.where(inside_x, np.inf, -np.inf), tx_hi)
    par_y = delta[:, 1] == 0.0
    inside_y = (src[1] >= y_edges[0]) & (src[1] <= y_edges[-1])
    ty_lo = np.where(par_y, np.where(inside_y, -np.inf, np.inf), ty_lo)
    ty_hi = np.where(par_y, np.where(inside_y, np.inf, -np.inf), ty_hi)

    t_lo = np.maximum(0.0, np.maximum(tx_lo, ty_lo))
    t_hi = np.minimum(1.0, np.minimum(tx_hi, ty_hi))
    miss = t_lo >= t_hi
    t_lo = np.where(miss, 0.0, t_lo)
    t_hi = np.where(miss, 0.0, t_hi)

    t_all = np.concatenate([tx, ty, t_lo[:, None], t_hi[:, None]], axis=1)
    t_all = np.where(np.isnan(t_all), t_lo[:, None], t_all)
    t_all = np.clip(t_all, t_lo[:, None], t_hi[:, None])
    t_all.sort(axis=1)

    seg = np.diff(t_all, axis=1)  # (n, m)
    t_mid = 0.5 * (t_all[:, :-1] + t_all[:, 1:])
    px = src[0] + t_mid * delta[:, 0:1]
    py = src[1] + t_mid * delta[:, 1:2]
    ix = np.floor((px - x0) / pixel_size).astype(np.int64)
    iy = np.floor((py - y0) / pixel_size).astype(np.int64)
    valid = (seg > 0) & (ix >= 0) & (ix < width) & (iy >= 0) & (iy < height)
    lengths = seg * ray_len[:, None]
    return ix, iy, lengths, valid


def _check_image_fits(image: ImageGrid, geom: FanBeamGeometry) -> None:
    if image.fov_radius > geom.fov_radius * (1.0 + 1e-9):
        raise ValueError(
            f"image inscribed radius {image.fov_radius:.6g} mm exceeds geometry "
            f"fov_radius {geom.fov_radius:.6g} mm"
        )


def siddon_forward(image: ImageGrid, geom: FanBeamGeometry) -> Sinogram:
    """Exact ray-driven line integrals: sum of pixel_value * chord_length (mm).

    One ray per (view, detector element), from the source point to the
    detector element centre; rays missing the grid contribute 0.
    """
    _check_image_fits(image, geom)
    vals = image.values
    out = np.empty((geom.num_views, geom.detector_count))
    for vi, beta in enumerate(geom.view_angles):
        src, det = _ray_endpoints(geom, beta)
        ix, iy, lengths, valid = _grid_segments(
            src, det, image.width, image.height, image.pixel_size
        )
        pix = vals[np.clip(iy, 0, image.height - 1), np.clip(ix, 0, image.width - 1)]
        out[vi] = np.sum(np.where(valid, pix * lengths, 0.0), axis=1)
    return Sinogram(out, geom)


def backproject(
    sino: Sinogram,
    geom: FanBeamGeometry,
    grid_shape: tuple[int, int],
    pixel_size: float,
    weights: np.ndarray | None = None,
) -> ImageGrid:
    """Exact transpose of :func:`siddon_forward` over the same ray set.

    Each pixel traversed by a ray accumulates ray_value * chord_length.
    ``weights``, when given, scales each ray value first (same shape as the
    sinogram).  This is the unfiltered adjoint used for operator testing and
    iterative schemes, not the FBP backprojection.
    """
    if sino.geometry.num_views != geom.num_views or sino.detector_count != geom.detector_count:
        raise ValueError("sinogram shape does not match geometry")
    width, height = grid_shape
    values = sino.values
    if weights is not None:
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape != values.shape:
            raise ValueError(
                f"weights shape {weights.shape} != sinogram shape {values.shape}"
            )
        values = values * weights
    img = np.zeros(height * width)
    for vi, beta in enumerate(geom.view_angles):
        src, det = _ray_endpoints(geom, beta)
        ix, iy, lengths, valid = _grid_segments(src, det, width, height, pixel_size)
        contrib = lengths * values[vi][:, None]
        flat = (iy * width + ix)[valid]
        np.add.at(img, flat, contrib[valid])
    return ImageGrid(width, height, pixel_size, img.reshape(height, width))
