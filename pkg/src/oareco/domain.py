"""Core geometric and signal types shared across the toolkit.

Conventions fixed project-wide: x to the right, y up, angles counter-clockwise
from the +x axis, SI units everywhere. Images are stored row-major with row 0
at the minimum y coordinate. All containers are immutable after construction
and safe to share between threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * np.pi


def _frozen_array(values, dtype=np.float64) -> np.ndarray:
    arr = np.ascontiguousarray(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class DetectorArray:
    """Arc of point detectors on a circle.

    Parameters
    ----------
    num_elements : int
        Number of detector elements (>= 1).
    radius_m : float
        Circle radius in meters (> 0).
    coverage_rad : float
        Angular extent of the arc, in (0, 2*pi]. Elements are placed
        endpoint-inclusive, so a full ring without a duplicated element
        uses ``2*pi * (n - 1) / n``.
    center_xy_m : tuple of float
        Circle center (x, y) in meters.
    rotation_rad : float
        Orientation of the arc bisector, counter-clockwise from +x.
    """

    num_elements: int
    radius_m: float
    coverage_rad: float
    center_xy_m: tuple = (0.0, 0.0)
    rotation_rad: float = 0.0

    def __post_init__(self):
        if int(self.num_elements) != self.num_elements or self.num_elements < 1:
            raise ValueError(f"num_elements must be a positive integer, got {self.num_elements}")
        if not self.radius_m > 0:
            raise ValueError(f"radius_m must be > 0, got {self.radius_m}")
        if not 0 < self.coverage_rad <= TWO_PI + 1e-12:
            raise ValueError(f"coverage_rad must be in (0, 2*pi], got {self.coverage_rad}")
        if len(self.center_xy_m) != 2:
            raise ValueError("center_xy_m must be a 2-vector")
        object.__setattr__(self, "num_elements", int(self.num_elements))
        object.__setattr__(self, "center_xy_m", (float(self.center_xy_m[0]), float(self.center_xy_m[1])))


@dataclass(frozen=True)
class ImageGrid:
    """Square reconstruction grid of pixel centers.

    Pixel (i, j) maps to world coordinates
    ``origin + pixel_size * (j - (side-1)/2, i - (side-1)/2)``;
    the center pixel of an odd-sided grid sits exactly on the origin.
    """

    side_px: int
    pixel_size_m: float
    origin_xy_m: tuple = (0.0, 0.0)

    def __post_init__(self):
        if int(self.side_px) != self.side_px or self.side_px < 1:
            raise ValueError(f"side_px must be a positive integer, got {self.side_px}")
        if not self.pixel_size_m > 0:
            raise ValueError(f"pixel_size_m must be > 0, got {self.pixel_size_m}")
        if len(self.origin_xy_m) != 2:
            raise ValueError("origin_xy_m must be a 2-vector")
        object.__setattr__(self, "side_px", int(self.side_px))
        object.__setattr__(self, "origin_xy_m", (float(self.origin_xy_m[0]), float(self.origin_xy_m[1])))

    @property
    def extent_m(self) -> float:
        return self.side_px * self.pixel_size_m

    @property
    def num_pixels(self) -> int:
        return self.side_px * self.side_px

    def index_to_world(self, ij) -> np.ndarray:
        """Map fractional (row, col) indices to world (x, y) coordinates."""
        ij = np.asarray(ij, dtype=np.float64)
        half = (self.side_px - 1) / 2.0
        x = self.origin_xy_m[0] + (ij[..., 1] - half) * self.pixel_size_m
        y = self.origin_xy_m[1] + (ij[..., 0] - half) * self.pixel_size_m
        return np.stack([x, y], axis=-1)

    def world_to_index(self, xy) -> np.ndarray:
        """Map world (x, y) coordinates to fractional (row, col) indices."""
        xy = np.asarray(xy, dtype=np.float64)
        half = (self.side_px - 1) / 2.0
        col = (xy[..., 0] - self.origin_xy_m[0]) / self.pixel_size_m + half
        row = (xy[..., 1] - self.origin_xy_m[1]) / self.pixel_size_m + half
        return np.stack([row, col], axis=-1)


@dataclass(frozen=True)
class SpeedOfSound:
    """Scalar speed of sound in m/s, bounded to a physiological range."""

    value_m_per_s: float
    min_m_per_s: float = 1300.0
    max_m_per_s: float = 1700.0

    def __post_init__(self):
        if not self.min_m_per_s <= self.value_m_per_s <= self.max_m_per_s:
            raise ValueError(
                f"speed of sound {self.value_m_per_s} outside "
                f"[{self.min_m_per_s}, {self.max_m_per_s}] m/s"
            )
        object.__setattr__(self, "value_m_per_s", float(self.value_m_per_s))


@dataclass(frozen=True)
class Sinogram:
    """Recorded pressure signals, detectors x time samples.

    ``data[d, k]`` is the sample of detector d at time ``t0_s + k / sampling_rate_hz``.
    """

    data: np.ndarray
    sampling_rate_hz: float
    t0_s: float = 0.0
    wavelength_nm: float | None = None

    def __post_init__(self):
        data = _frozen_array(self.data)
        if data.ndim != 2:
            raise ValueError(f"sinogram data must be 2D (detectors x samples), got shape {data.shape}")
        if not np.isfinite(data).all():
            raise ValueError("sinogram data contains non-finite entries")
        if not self.sampling_rate_hz > 0:
            raise ValueError(f"sampling_rate_hz must be > 0, got {self.sampling_rate_hz}")
        object.__setattr__(self, "data", data)

    @property
    def num_elements(self) -> int:
        return self.data.shape[0]

    @property
    def num_samples(self) -> int:
        return self.data.shape[1]

    @property
    def t_end_s(self) -> float:
        return self.t0_s + (self.num_samples - 1) / self.sampling_rate_hz


@dataclass(frozen=True)
class Image:
    """Scalar per-pixel initial-pressure image on a square grid."""

    data: np.ndarray
    grid: ImageGrid

    def __post_init__(self):
        data = _frozen_array(self.data)
        if data.shape != (self.grid.side_px, self.grid.side_px):
            raise ValueError(
                f"image shape {data.shape} does not match grid side {self.grid.side_px}"
            )
        if not np.isfinite(data).all():
            raise ValueError("image data contains non-finite entries")
        object.__setattr__(self, "data", data)


def detector_positions(array: DetectorArray) -> np.ndarray:
    """World positions of the detector elements, shape (num_elements, 2).

    Elements are uniformly spaced in angle over ``coverage_rad`` (inclusive of
    both endpoints) and symmetric about the rotation bisector; a single
    element sits on the bisector.
    """
    n = array.num_elements
    if n == 1:
        offsets = np.zeros(1)
    else:
        offsets = np.linspace(-0.5, 0.5, n) * array.coverage_rad
    angles = array.rotation_rad + offsets
    cx, cy = array.center_xy_m
    return np.stack(
        [cx + array.radius_m * np.cos(angles), cy + array.radius_m * np.sin(angles)], axis=1
    )


def pixel_coordinates(grid: ImageGrid) -> np.ndarray:
    """World coordinates of all pixel centers, shape (side, side, 2).

    ``out[i, j]`` is the (x, y) position of pixel (row i, col j); row 0 lies
    at the minimum y.
    """
    half = (grid.side_px - 1) / 2.0
    idx = np.arange(grid.side_px, dtype=np.float64)
    x = grid.origin_xy_m[0] + (idx - half) * grid.pixel_size_m
    y = grid.origin_xy_m[1] + (idx - half) * grid.pixel_size_m
    xx, yy = np.meshgrid(x, y)  # yy varies along rows
    return np.stack([xx, yy], axis=-1)


@dataclass(frozen=True)
class ScanProfile:
    """Bundle of acquisition parameters: geometry, grid, sampling and medium.

    Two stock profiles exist: :func:`desk_profile` keeps every oracle test
    sub-second; :func:`paper_profile` mirrors typical hand-held scanner
    parameters (256 elements on a 145 degree arc, 40 MHz, 416 px grid).
    """

    array: DetectorArray
    grid: ImageGrid
    sos: SpeedOfSound
    sampling_rate_hz: float
    t0_s: float
    num_samples: int

    def __post_init__(self):
        if not self.sampling_rate_hz > 0:
            raise ValueError("sampling_rate_hz must be > 0")
        if int(self.num_samples) != self.num_samples or self.num_samples < 2:
            raise ValueError("num_samples must be an integer >= 2")
        object.__setattr__(self, "num_samples", int(self.num_samples))

    def as_metadata(self) -> dict:
        """Flat key/value view used for file sidecars; see sidecar format."""
        return {
            "num_elements": self.array.num_elements,
            "radius_m": self.array.radius_m,
            "coverage_rad": self.array.coverage_rad,
            "center_x_m": self.array.center_xy_m[0],
            "center_y_m": self.array.center_xy_m[1],
            "rotation_rad": self.array.rotation_rad,
            "side_px": self.grid.side_px,
            "pixel_size_m": self.grid.pixel_size_m,
            "origin_x_m": self.grid.origin_xy_m[0],
            "origin_y_m": self.grid.origin_xy_m[1],
            "sos_m_per_s": self.sos.value_m_per_s,
            "sampling_rate_hz": self.sampling_rate_hz,
            "t0_s": self.t0_s,
            "num_samples": self.num_samples,
        }

    @staticmethod
    def from_metadata(meta: dict) -> "ScanProfile":
        return ScanProfile(
            array=DetectorArray(
                num_elements=int(float(meta["num_elements"])),
                radius_m=float(meta["radius_m"]),
                coverage_rad=float(meta["coverage_rad"]),
                center_xy_m=(float(meta.get("center_x_m", 0.0)), float(meta.get("center_y_m", 0.0))),
                rotation_rad=float(meta.get("rotation_rad", 0.0)),
            ),
            grid=ImageGrid(
                side_px=int(float(meta["side_px"])),
                pixel_size_m=float(meta["pixel_size_m"]),
                origin_xy_m=(float(meta.get("origin_x_m", 0.0)), float(meta.get("origin_y_m", 0.0))),
            ),
            sos=SpeedOfSound(float(meta["sos_m_per_s"])),
            sampling_rate_hz=float(meta["sampling_rate_hz"]),
            t0_s=float(meta["t0_s"]),
            num_samples=int(float(meta["num_samples"])),
        )


def desk_profile(side_px: int = 64) -> ScanProfile:
    """Small test-scale setup: 64 detectors on a full ring, 512 samples."""
    return ScanProfile(
        array=DetectorArray(num_elements=64, radius_m=0.04, coverage_rad=TWO_PI * 63 / 64),
        grid=ImageGrid(side_px=side_px, pixel_size_m=3.2e-4),
        sos=SpeedOfSound(1500.0),
        sampling_rate_hz=2.0e7,
        t0_s=1.5e-5,
        num_samples=512,
    )


def paper_profile(side_px: int = 416) -> ScanProfile:
    """Hand-held-scanner-scale setup: 256 detectors, 145 degree arc, 40 MHz."""
    return ScanProfile(
        array=DetectorArray(
            num_elements=256,
            radius_m=0.04,
            coverage_rad=np.deg2rad(145.0),
            rotation_rad=-np.pi / 2,
        ),
        grid=ImageGrid(side_px=side_px, pixel_size_m=1.0e-4),
        sos=SpeedOfSound(1500.0),
        sampling_rate_hz=4.0e7,
        t0_s=5.0e-6,
        num_samples=2030,
    )
