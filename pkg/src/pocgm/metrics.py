"""Reconstruction quality metrics: PSNR and single-scale SSIM."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .grid import ImageGrid

# Canonical SSIM settings: 11x11 Gaussian window (std 1.5), stability
# constants C1 = (0.01 L)^2 and C2 = (0.03 L)^2 for dynamic range L.
_SSIM_SIGMA = 1.5
_SSIM_RADIUS = 5  # 11x11 window
_SSIM_K1 = 0.01
_SSIM_K2 = 0.03


def _values(img) -> np.ndarray:
    if isinstance(img, ImageGrid):
        return img.values
    return np.asarray(img, dtype=np.float64)


def mse(a, b) -> float:
    av, bv = _values(a), _values(b)
    if av.shape != bv.shape:
        raise ValueError(f"shape mismatch: {av.shape} vs {bv.shape}")
    return float(np.mean((av - bv) ** 2))


def psnr(a, b, peak: float | None = None) -> float:
    """10*log10(peak^2 / MSE); identical images give +inf.

    ``peak`` defaults to the dynamic range (max - min) of ``a``, which is
    treated as the reference image.
    """
    if peak is None:
        ref = _values(a)
        peak = float(ref.max() - ref.min())
    if peak <= 0:
        raise ValueError("peak must be positive")
    err = mse(a, b)
    if err == 0.0:
        return np.inf
    return float(10.0 * np.log10(peak * peak / err))


def _gaussian_window_filter(x: np.ndarray) -> np.ndarray:
    return ndimage.gaussian_filter(
        x, sigma=_SSIM_SIGMA, mode="constant", truncate=_SSIM_RADIUS / _SSIM_SIGMA
    )


def ssim(a, b, dynamic_range: float) -> float:
    """Mean local structural similarity over the fully-covered (valid) region."""
    av, bv = _values(a), _values(b)
    if av.shape != bv.shape:
        raise ValueError(f"shape mismatch: {av.shape} vs {bv.shape}")
    if dynamic_range <= 0:
        raise ValueError("dynamic_range must be positive")
    pad = _SSIM_RADIUS
    if min(av.shape) < 2 * pad + 1:
        raise ValueError(
            f"image {av.shape} smaller than the {2 * pad + 1}x{2 * pad + 1} SSIM window"
        )
    c1 = (_SSIM_K1 * dynamic_range) ** 2
    c2 = (_SSIM_K2 * dynamic_range) ** 2

    mu_a = _gaussian_window_filter(av)
    mu_b = _gaussian_window_filter(bv)
    var_a = _gaussian_window_filter(av * av) - mu_a * mu_a
    var_b = _gaussian_window_filter(bv * bv) - mu_b * mu_b
    cov = _gaussian_window_filter(av * bv) - mu_a * mu_b

    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    smap = num / den
    interior = smap[pad:-pad, pad:-pad]
    return float(interior.mean())


@dataclass
class MetricRow:
    image_id: str
    psnr_db: float
    ssim: float
    mse: float


@dataclass
class MetricReport:
    rows: list[MetricRow] = field(default_factory=list)

    def add(self, image_id: str, reference, candidate, peak: float | None = None) -> MetricRow:
        ref = _values(reference)
        rng = float(ref.max() - ref.min())
        dynamic_range = peak if peak is not None else (rng if rng > 0 else 1.0)
        row = MetricRow(
            image_id=image_id,
            psnr_db=psnr(reference, candidate, dynamic_range),
            ssim=ssim(reference, candidate, dynamic_range),
            mse=mse(reference, candidate),
        )
        self.rows.append(row)
        return row

    @property
    def mean_psnr(self) -> float:
        return float(np.mean([r.psnr_db for r in self.rows]))

    @property
    def mean_ssim(self) -> float:
        return float(np.mean([r.ssim for r in self.rows]))

    @property
    def mean_mse(self) -> float:
        return float(np.mean([r.mse for r in self.rows]))

    def write_csv(self, path: str) -> None:
        """Per-image rows plus an aggregate mean; LPIPS is reserved as n/a."""
        def fmt(x: float) -> str:
            return "inf" if np.isinf(x) else f"{x:.6f}"

        with open(path, "w") as fh:
            fh.write("image_id,psnr_db,ssim,mse,lpips\n")
            for r in self.rows:
                fh.write(f"{r.image_id},{fmt(r.psnr_db)},{fmt(r.ssim)},{fmt(r.mse)},n/a\n")
            if self.rows:
                fh.write(
                    f"mean,{fmt(self.mean_psnr)},{fmt(self.mean_ssim)},{fmt(self.mean_mse)},n/a\n"
                )
