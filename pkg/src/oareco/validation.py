"""Input validation helpers shared by the estimator layer and the CLI."""

from __future__ import annotations

import numbers

import numpy as np

from .domain import Image, ImageGrid, ScanProfile, Sinogram


def check_scan_profile(profile) -> ScanProfile:
    if profile is None:
        raise ValueError("a scan profile is required; pass profile= before fitting")
    if not isinstance(profile, ScanProfile):
        raise TypeError(f"expected a ScanProfile, got {type(profile).__name__}")
    return profile


def check_positive(value, name: str, strict: bool = True):
    if not isinstance(value, numbers.Real) or isinstance(value, bool):
        raise TypeError(f"{name} must be a real number, got {type(value).__name__}")
    if strict and value <= 0:
        raise ValueError(f"{name} must be > 0, got {value}")
    if not strict and value < 0:
        raise ValueError(f"{name} must be >= 0, got {value}")
    return value


def check_sinogram_array(X, profile: ScanProfile) -> np.ndarray:
    """Coerce X to a (n_scans, n_detectors, n_samples) float64 batch.

    A single 2D sinogram becomes a batch of one; shape is checked against
    the profile.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 2:
        X = X[np.newaxis]
    if X.ndim != 3:
        raise ValueError(f"expected 2D sinogram or 3D batch, got shape {X.shape}")
    expected = (profile.array.num_elements, profile.num_samples)
    if X.shape[1:] != expected:
        raise ValueError(f"sinogram shape {X.shape[1:]} does not match profile {expected}")
    if not np.all(np.isfinite(X)):
        raise ValueError("sinogram contains non-finite values")
    return X


def check_image_array(X, grid: ImageGrid) -> np.ndarray:
    """Coerce X to a (n_images, side, side) float64 batch against a grid."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 2:
        X = X[np.newaxis]
    if X.ndim != 3:
        raise ValueError(f"expected 2D image or 3D batch, got shape {X.shape}")
    expected = (grid.side_px, grid.side_px)
    if X.shape[1:] != expected:
        raise ValueError(f"image shape {X.shape[1:]} does not match grid {expected}")
    if not np.all(np.isfinite(X)):
        raise ValueError("image contains non-finite values")
    return X


def to_sinogram(row: np.ndarray, profile: ScanProfile) -> Sinogram:
    return Sinogram(
        data=row, sampling_rate_hz=profile.sampling_rate_hz, t0_s=profile.t0_s
    )


def to_image(row: np.ndarray, grid: ImageGrid) -> Image:
    return Image(data=row, grid=grid)
