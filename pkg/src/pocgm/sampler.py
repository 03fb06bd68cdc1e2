"""Deterministic flow sampling: sigma schedule plus Euler/Heun integration.

With the noise scale as the time variable, the reverse flow is

    dx/dsigma = (x - D(x, sigma, cond)) / sigma

integrated from sigma_max down to 0 along a decreasing schedule.  The slope
has a 1/sigma factor, so the final step onto sigma = 0 always uses the last
finite-sigma slope (plain Euler); every earlier step may add Heun's
trapezoidal correction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fbp import FilterSpec, fbp_reconstruct
from .geometry import FanBeamGeometry, Sinogram
from .grid import ImageGrid
from .pfgm import PfgmConfig, sample_prior

INTEGRATORS = ("euler", "heun")


class SamplingError(RuntimeError):
    """Raised when the model produces non-finite output during sampling."""


@dataclass
class SigmaSchedule:
    """Decreasing noise levels [sigma_max, ..., sigma_min, 0]."""

    levels: np.ndarray
    rho: float

    def __post_init__(self):
        lv = np.asarray(self.levels, dtype=np.float64)
        if lv.size < 2:
            raise ValueError("schedule needs at least [sigma_max, 0]")
        if lv[-1] != 0.0:
            raise ValueError("schedule must terminate at exactly 0")
        if np.any(np.diff(lv) >= 0):
            raise ValueError("schedule levels must be strictly decreasing")
        self.levels = lv

    @property
    def num_steps(self) -> int:
        return self.levels.size - 1


@dataclass
class SamplerConfig:
    steps: int = 16
    integrator: str = "heun"
    pfgm: PfgmConfig = field(default_factory=lambda: PfgmConfig(data_dim=1))

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.integrator not in INTEGRATORS:
            raise ValueError(
                f"unknown integrator {self.integrator!r}, expected one of {INTEGRATORS}"
            )


def build_sigma_schedule(steps: int, cfg: PfgmConfig) -> SigmaSchedule:
    """Power-law interpolation between sigma_max and sigma_min, then 0.

    sigma_i = (sigma_max^(1/rho) + (i/(steps-1)) * (sigma_min^(1/rho) -
    sigma_max^(1/rho)))^rho for i < steps; a single step collapses to
    [sigma_max, 0].
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if steps == 1:
        return SigmaSchedule(np.array([cfg.sigma_max, 0.0]), cfg.rho)
    inv = 1.0 / cfg.rho
    i = np.arange(steps) / (steps - 1)
    levels = (cfg.sigma_max**inv + i * (cfg.sigma_min**inv - cfg.sigma_max**inv)) ** cfg.rho
    levels[0] = cfg.sigma_max  # snap the endpoints lost to roundoff
    levels[-1] = cfg.sigma_min
    return SigmaSchedule(np.concatenate([levels, [0.0]]), cfg.rho)


def _drift(model, x: np.ndarray, sigma: float, condition) -> np.ndarray:
    est = np.asarray(model.evaluate(x, sigma, condition), dtype=np.float64)
    if est.shape != x.shape:
        raise SamplingError(
            f"model output shape {est.shape} != sample shape {x.shape}"
        )
    return (x - est) / sigma


def sample_ode(
    model,
    condition,
    schedule: SigmaSchedule,
    cfg: SamplerConfig,
    rng: np.random.Generator,
    n_samples: int | None = None,
):
    """Integrate the flow from a prior draw down to the data manifold.

    ``condition`` may be an ImageGrid, an array, or None (for unconditional
    oracle models); the sample takes the condition's shape, falling back to
    ``cfg.pfgm.data_dim`` vectors.  Only the prior draw consumes randomness;
    the trajectory itself is deterministic.  ``n_samples`` batches independent
    trajectories on a leading axis (the model must then broadcast, as the
    analytic oracle does).  Returns the same type as the condition.
    """
    as_grid = isinstance(condition, ImageGrid)
    if as_grid:
        cond_values = condition.values
        shape = cond_values.shape
    elif condition is not None:
        cond_values = np.asarray(condition, dtype=np.float64)
        shape = cond_values.shape
    else:
        cond_values = None
        shape = (cfg.pfgm.data_dim,)

    x = sample_prior(cfg.pfgm, rng, shape=shape, size=n_samples)
    levels = schedule.levels
    for i in range(schedule.num_steps):
        s_cur, s_next = levels[i], levels[i + 1]
        d = _drift(model, x, s_cur, cond_values)
        if not np.all(np.isfinite(d)):
            raise SamplingError(
                f"non-finite model output at step {i} (sigma={s_cur:.6g})"
            )
        x_next = x + (s_next - s_cur) * d
        if cfg.integrator == "heun" and s_next > 0.0:
            d2 = _drift(model, x_next, s_next, cond_values)
            if not np.all(np.isfinite(d2)):
                raise SamplingError(
                    f"non-finite model output at step {i} correction (sigma={s_next:.6g})"
                )
            x_next = x + (s_next - s_cur) * 0.5 * (d + d2)
        x = x_next

    if as_grid and n_samples is None:
        return condition.with_values(x)
    return x


def reconstruct(
    sparse_sino: Sinogram,
    geom: FanBeamGeometry,
    model,
    cfg: SamplerConfig,
    fbp_spec: FilterSpec,
    rng: np.random.Generator,
    grid_shape: tuple[int, int],
    pixel_size: float,
    data_consistency_geom: FanBeamGeometry | None = None,
) -> ImageGrid:
    """Sparse sinogram -> FBP condition -> conditional flow -> intensity image.

    The condition image is normalized with the model's intensity transform
    (identity when the model has none) and the generated sample is mapped
    back.  When ``data_consistency_geom`` is given, the result is re-projected
    onto that full-view geometry, the views present in ``sparse_sino`` are
    replaced by the measured data, and the merged sinogram is reconstructed
    with FBP; by default this hook is off.
    """
    condition = fbp_reconstruct(sparse_sino, geom, grid_shape, pixel_size, fbp_spec)
    transform = getattr(model, "transform", None)
    cond_values = condition.values if transform is None else transform.normalize(condition.values)

    schedule = build_sigma_schedule(cfg.steps, cfg.pfgm)
    out = sample_ode(model, cond_values, schedule, cfg, rng)
    if transform is not None:
        out = transform.denormalize(out)
    result = ImageGrid(grid_shape[0], grid_shape[1], pixel_size, out)

    if data_consistency_geom is not None:
        result = _sinogram_replacement(result, sparse_sino, data_consistency_geom, fbp_spec)
    return result


def _sinogram_replacement(
    image: ImageGrid,
    sparse_sino: Sinogram,
    full_geom: FanBeamGeometry,
    fbp_spec: FilterSpec,
) -> ImageGrid:
    from .projector import siddon_forward

    full = siddon_forward(image, full_geom)
    merged = full.values.copy()
    full_angles = full_geom.view_angles
    for row, angle in zip(sparse_sino.values, sparse_sino.geometry.view_angles):
        matches = np.nonzero(np.isclose(full_angles, angle, rtol=0.0, atol=1e-12))[0]
        if matches.size != 1:
            raise ValueError(
                f"sparse view angle {angle!r} not found in the full-view geometry"
            )
        merged[matches[0]] = row
    return fbp_reconstruct(
        Sinogram(merged, full_geom),
        full_geom,
        (image.width, image.height),
        image.pixel_size,
        fbp_spec,
    )
