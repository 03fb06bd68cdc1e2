"""Conditional Poisson-flow generation for sparse-view fan-beam CT."""

from .config import RunConfig
from .denoiser import (
    ConditionalDenoiser,
    DenoiserModel,
    IdentityDenoiser,
    IntensityTransform,
    OracleDenoiser,
    conditional_loss,
    lambda_weight,
    load_model,
    oracle_model,
    save_model,
)
from .fbp import FilterSpec, fbp_reconstruct, filter_kernel, ramp_filter_row
from .fileio import (
    read_geometry,
    read_image,
    read_sinogram,
    write_geometry,
    write_image,
    write_sinogram,
)
from .geometry import (
    FanBeamGeometry,
    Sinogram,
    ViewMask,
    desk_scale_geometry,
    paper_scale_geometry,
    sample_views,
    uniform_mask,
    uniform_view_angles,
)
from .grid import DEFAULT_WINDOW, DisplayWindow, ImageGrid, hu_window
from .metrics import MetricReport, mse, psnr, ssim
from .network import TinyNet, TinyNetConfig
from .pfgm import (
    AugmentedSample,
    DiracDataset,
    PfgmConfig,
    oracle_field_direction,
    r_from_sigma,
    sample_perturbation,
    sample_prior,
    target_direction,
)
from .phantoms import (
    Ellipse,
    PhantomSpec,
    disk_phantom,
    generate_ellipse_phantom,
    random_phantom_spec,
)
from .pipeline import end_to_end, load_pairs, make_dataset, train_from_dataset
from .projector import backproject, siddon_forward
from .sampler import (
    SamplerConfig,
    SamplingError,
    SigmaSchedule,
    build_sigma_schedule,
    reconstruct,
    sample_ode,
)
from .training import Adam, TrainConfig, TrainingDiverged, train

__version__ = "0.1.0"

__all__ = [
    "Adam",
    "AugmentedSample",
    "ConditionalDenoiser",
    "DEFAULT_WINDOW",
    "DenoiserModel",
    "DiracDataset",
    "DisplayWindow",
    "Ellipse",
    "FanBeamGeometry",
    "FilterSpec",
    "IdentityDenoiser",
    "ImageGrid",
    "IntensityTransform",
    "MetricReport",
    "OracleDenoiser",
    "PfgmConfig",
    "PhantomSpec",
    "RunConfig",
    "SamplerConfig",
    "SamplingError",
    "SigmaSchedule",
    "Sinogram",
    "TinyNet",
    "TinyNetConfig",
    "TrainConfig",
    "TrainingDiverged",
    "ViewMask",
    "backproject",
    "build_sigma_schedule",
    "conditional_loss",
    "desk_scale_geometry",
    "disk_phantom",
    "end_to_end",
    "fbp_reconstruct",
    "filter_kernel",
    "generate_ellipse_phantom",
    "hu_window",
    "lambda_weight",
    "load_model",
    "load_pairs",
    "make_dataset",
    "mse",
    "oracle_field_direction",
    "oracle_model",
    "paper_scale_geometry",
    "psnr",
    "r_from_sigma",
    "ramp_filter_row",
    "random_phantom_spec",
    "read_geometry",
    "read_image",
    "read_sinogram",
    "reconstruct",
    "sample_ode",
    "sample_perturbation",
    "sample_prior",
    "sample_views",
    "save_model",
    "siddon_forward",
    "ssim",
    "target_direction",
    "train",
    "train_from_dataset",
    "uniform_mask",
    "uniform_view_angles",
    "write_geometry",
    "write_image",
    "write_sinogram",
]
