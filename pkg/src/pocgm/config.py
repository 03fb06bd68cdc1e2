"""End-to-end run configuration: one JSON document covering every stage."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fbp import FILTER_KINDS, FilterSpec
from .geometry import FanBeamGeometry, uniform_view_angles
from .network import TinyNetConfig
from .pfgm import PfgmConfig
from .sampler import SamplerConfig
from .training import TrainConfig

GROUND_TRUTH_MODES = ("phantom", "full-fbp")


@dataclass
class RunConfig:
    """Aggregated settings for the phantom -> project -> train -> sample pipeline."""

    # scanner (full-view acquisition)
    source_to_center: float = 550.0
    center_to_detector: float = 400.0
    detector_count: int = 64
    detector_pitch: float = 1.0 / 64.0
    fov_radius: float = 200.0
    # reconstruction grid
    width: int = 64
    height: int = 64
    pixel_size: float = 6.25
    # view sparsity
    full_views: int = 60
    kept_views: int = 15
    # flow dimensions and schedule
    aug_dim: int = 128
    sigma_min: float = 0.002
    sigma_max: float = 80.0
    rho: float = 7.0
    sigma_data: float = 0.5
    # sampling
    steps: int = 16
    integrator: str = "heun"
    # training + network
    train: TrainConfig = field(default_factory=TrainConfig)
    base_channels: int = 16
    depth: int = 1
    # condition preprocessing
    condition_filter: str = "shepp-logan-apodized"
    condition_cutoff: float = 1.0
    ground_truth: str = "phantom"
    seed: int = 0

    def __post_init__(self):
        if self.kept_views > self.full_views:
            raise ValueError("kept_views must not exceed full_views")
        if self.train.patch is not None and self.train.patch > min(self.width, self.height):
            raise ValueError("training patch must fit inside the grid")
        if self.condition_filter not in FILTER_KINDS:
            raise ValueError(f"unknown condition_filter {self.condition_filter!r}")
        if self.ground_truth not in GROUND_TRUTH_MODES:
            raise ValueError(f"unknown ground_truth mode {self.ground_truth!r}")

    # -- derived objects --------------------------------------------------------

    def geometry(self) -> FanBeamGeometry:
        return FanBeamGeometry(
            source_to_center=self.source_to_center,
            center_to_detector=self.center_to_detector,
            detector_count=self.detector_count,
            detector_pitch=self.detector_pitch,
            view_angles=uniform_view_angles(self.full_views),
            fov_radius=self.fov_radius,
        )

    def pfgm(self) -> PfgmConfig:
        return PfgmConfig(
            data_dim=self.width * self.height,
            aug_dim=self.aug_dim,
            sigma_min=self.sigma_min,
            sigma_max=self.sigma_max,
            rho=self.rho,
            sigma_data=self.sigma_data,
        )

    def sampler(self) -> SamplerConfig:
        return SamplerConfig(steps=self.steps, integrator=self.integrator, pfgm=self.pfgm())

    def net(self) -> TinyNetConfig:
        patch = self.train.patch if self.train.patch is not None else min(self.width, self.height)
        return TinyNetConfig(base_channels=self.base_channels, depth=self.depth, patch=patch)

    def filter_spec(self) -> FilterSpec:
        return FilterSpec(self.condition_filter, self.condition_cutoff)

    # -- serialization -----------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "geometry": {
                "source_to_center": self.source_to_center,
                "center_to_detector": self.center_to_detector,
                "detector_count": self.detector_count,
                "detector_pitch": self.detector_pitch,
                "fov_radius": self.fov_radius,
            },
            "grid": {
                "width": self.width,
                "height": self.height,
                "pixel_size": self.pixel_size,
            },
            "sparsity": {"full_views": self.full_views, "kept_views": self.kept_views},
            "pfgm": {
                "aug_dim": self.aug_dim,
                "sigma_min": self.sigma_min,
                "sigma_max": self.sigma_max,
                "rho": self.rho,
                "sigma_data": self.sigma_data,
            },
            "sampler": {"steps": self.steps, "integrator": self.integrator},
            "train": self.train.to_dict(),
            "network": {"base_channels": self.base_channels, "depth": self.depth},
            "condition": {
                "filter": self.condition_filter,
                "cutoff": self.condition_cutoff,
                "ground_truth": self.ground_truth,
            },
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        geo = d.get("geometry", {})
        grid = d.get("grid", {})
        sp = d.get("sparsity", {})
        pf = d.get("pfgm", {})
        sa = d.get("sampler", {})
        net = d.get("network", {})
        cond = d.get("condition", {})
        defaults = cls()
        return cls(
            source_to_center=float(geo.get("source_to_center", defaults.source_to_center)),
            center_to_detector=float(geo.get("center_to_detector", defaults.center_to_detector)),
            detector_count=int(geo.get("detector_count", defaults.detector_count)),
            detector_pitch=float(geo.get("detector_pitch", defaults.detector_pitch)),
            fov_radius=float(geo.get("fov_radius", defaults.fov_radius)),
            width=int(grid.get("width", defaults.width)),
            height=int(grid.get("height", defaults.height)),
            pixel_size=float(grid.get("pixel_size", defaults.pixel_size)),
            full_views=int(sp.get("full_views", defaults.full_views)),
            kept_views=int(sp.get("kept_views", defaults.kept_views)),
            aug_dim=int(pf.get("aug_dim", defaults.aug_dim)),
            sigma_min=float(pf.get("sigma_min", defaults.sigma_min)),
            sigma_max=float(pf.get("sigma_max", defaults.sigma_max)),
            rho=float(pf.get("rho", defaults.rho)),
            sigma_data=float(pf.get("sigma_data", defaults.sigma_data)),
            steps=int(sa.get("steps", defaults.steps)),
            integrator=str(sa.get("integrator", defaults.integrator)),
            train=TrainConfig.from_dict(d["train"]) if "train" in d else TrainConfig(),
            base_channels=int(net.get("base_channels", defaults.base_channels)),
            depth=int(net.get("depth", defaults.depth)),
            condition_filter=str(cond.get("filter", defaults.condition_filter)),
            condition_cutoff=float(cond.get("cutoff", defaults.condition_cutoff)),
            ground_truth=str(cond.get("ground_truth", defaults.ground_truth)),
            seed=int(d.get("seed", defaults.seed)),
        )


def phantom_seed(run_seed: int, index: int) -> int:
    """Stable per-image seed derived from the run seed."""
    return int(np.random.SeedSequence([run_seed, index]).generate_state(1)[0])
