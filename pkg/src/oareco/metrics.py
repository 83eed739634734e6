"""Image-quality metrics: data residual norm plus reference-based measures.

Definitions are pinned here since sources rarely state them:
  - R = ||A vec(x) - s||2 / ||s||2 against the forward operator;
  - MAE, MSE are plain means over pixels; the _rel variants are
    100 * sum|p - r| / sum|r| and 100 * sum (p - r)^2 / sum r^2;
  - PSNR = 10 log10(max(ref)^2 / MSE), +inf when MSE = 0;
  - SSIM uses an 11x11 Gaussian window (sigma 1.5), k1 = 0.01, k2 = 0.03,
    dynamic range L = max(ref) - min(ref), weighted moments without
    sample-bias correction, valid-mode windows, mean of the local map.
Aggregation reports the mean and the linearly interpolated 25th/75th
percentiles of each metric over a dataset.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .domain import Image, Sinogram
from .forward_model import SparseOperator

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def residual_norm(image: Image, sino: Sinogram, op: SparseOperator) -> float:
    """Relative data residual R of an image against a measured sinogram."""
    s = sino.data.ravel()
    s_norm = float(np.linalg.norm(s))
    if s_norm == 0.0:
        raise ValueError("zero sinogram: residual norm is undefined")
    predicted = op.apply(image.data.ravel())
    return float(np.linalg.norm(predicted - s) / s_norm)


def _gaussian_kernel(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    half = (size - 1) / 2.0
    coords = np.arange(size) - half
    g = np.exp(-(coords**2) / (2.0 * sigma**2))
    kernel = np.outer(g, g)
    return kernel / kernel.sum()


def _windowed_mean(x: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    windows = sliding_window_view(x, kernel.shape)
    return np.einsum("hwij,ij->hw", windows, kernel, optimize=True)


def ssim(pred: np.ndarray, ref: np.ndarray) -> float:
    """Mean structural similarity between two equally shaped 2D arrays."""
    pred = np.asarray(pred, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if pred.shape != ref.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {ref.shape}")
    if min(pred.shape) < SSIM_WINDOW:
        raise ValueError(f"images must be at least {SSIM_WINDOW} pixels per side for SSIM")
    data_range = float(ref.max() - ref.min())
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    kernel = _gaussian_kernel()
    mu_p = _windowed_mean(pred, kernel)
    mu_r = _windowed_mean(ref, kernel)
    var_p = _windowed_mean(pred * pred, kernel) - mu_p**2
    var_r = _windowed_mean(ref * ref, kernel) - mu_r**2
    cov = _windowed_mean(pred * ref, kernel) - mu_p * mu_r
    num = (2.0 * mu_p * mu_r + c1) * (2.0 * cov + c2)
    den = (mu_p**2 + mu_r**2 + c1) * (var_p + var_r + c2)
    with np.errstate(divide="ignore", invalid="ignore"):
        local = np.where(den == 0.0, 1.0, num / np.where(den == 0.0, 1.0, den))
    return float(local.mean())


@dataclass(frozen=True)
class ImageMetrics:
    mae: float
    mae_rel_pct: float
    mse: float
    mse_rel_pct: float
    psnr_db: float
    ssim: float

    def as_dict(self) -> dict:
        return {
            "mae": self.mae,
            "mae_rel_pct": self.mae_rel_pct,
            "mse": self.mse,
            "mse_rel_pct": self.mse_rel_pct,
            "psnr_db": self.psnr_db,
            "ssim": self.ssim,
        }


def image_metrics(pred: Image, ref: Image) -> ImageMetrics:
    """Reference-based metrics for one image pair."""
    p = pred.data
    r = ref.data
    if p.shape != r.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {r.shape}")
    if not np.any(r):
        raise ValueError("all-zero reference: relative metrics are undefined")
    diff = p - r
    abs_diff = np.abs(diff)
    mae = float(abs_diff.mean())
    mse = float((diff**2).mean())
    mae_rel = 100.0 * float(abs_diff.sum() / np.abs(r).sum())
    mse_rel = 100.0 * float((diff**2).sum() / (r**2).sum())
    if mse == 0.0:
        psnr = math.inf
    else:
        psnr = 10.0 * math.log10(float(r.max()) ** 2 / mse)
    return ImageMetrics(
        mae=mae,
        mae_rel_pct=mae_rel,
        mse=mse,
        mse_rel_pct=mse_rel,
        psnr_db=psnr,
        ssim=ssim(p, r),
    )


@dataclass(frozen=True)
class AggregateStat:
    mean: float
    p25: float
    p75: float


@dataclass(frozen=True)
class MetricsReport:
    mae: AggregateStat
    mae_rel_pct: AggregateStat
    mse: AggregateStat
    mse_rel_pct: AggregateStat
    psnr_db: AggregateStat
    ssim: AggregateStat
    r: AggregateStat | None = None

    def as_dict(self) -> dict:
        out = {}
        fields = ["mae", "mae_rel_pct", "mse", "mse_rel_pct", "psnr_db", "ssim"]
        if self.r is not None:
            fields = ["r"] + fields
        for name in fields:
            stat = getattr(self, name)
            out[f"{name}.mean"] = stat.mean
            out[f"{name}.p25"] = stat.p25
            out[f"{name}.p75"] = stat.p75
        return out


def _stat(values) -> AggregateStat:
    arr = np.asarray(values, dtype=np.float64)
    return AggregateStat(
        mean=float(arr.mean()),
        p25=float(np.percentile(arr, 25)),
        p75=float(np.percentile(arr, 75)),
    )


def aggregate(reports: list, residuals: list | None = None) -> MetricsReport:
    """Mean and 25th/75th percentiles of each metric over a dataset."""
    if not reports:
        raise ValueError("cannot aggregate an empty list of reports")
    if residuals is not None and len(residuals) != len(reports):
        raise ValueError("residuals must pair one-to-one with reports")
    kwargs = {}
    for name in ("mae", "mae_rel_pct", "mse", "mse_rel_pct", "psnr_db", "ssim"):
        kwargs[name] = _stat([getattr(rep, name) for rep in reports])
    if residuals is not None:
        kwargs["r"] = _stat(residuals)
    return MetricsReport(**kwargs)


def format_table(report: MetricsReport) -> str:
    """Table shaped as mean (p25, p75) per metric."""
    rows = []
    names = ["r"] if report.r is not None else []
    names += ["mae", "mae_rel_pct", "mse", "mse_rel_pct", "psnr_db", "ssim"]
    for name in names:
        stat = getattr(report, name)
        rows.append(f"{name:<12} {stat.mean:>12.6g}  ({stat.p25:.6g}, {stat.p75:.6g})")
    return "\n".join(rows)
