"""Synthetic initial-pressure phantoms for simulation and testing.

Point sources and random disk scenes cover controlled geometry checks;
arbitrary grayscale image files can stand in as natural-image phantoms.
"""

from __future__ import annotations

import numpy as np

from .domain import Image, ImageGrid


def point_sources(
    grid: ImageGrid,
    num_sources: int = 10,
    seed: int | None = None,
    amplitude: float = 1.0,
    margin_px: int = 8,
    min_separation_px: int = 6,
):
    """Isolated unit impulses; returns (image, pixel_indices).

    pixel_indices is an (n, 2) int array of (row, col) positions, kept
    at least min_separation_px apart and margin_px away from the edges
    so each source has a clean local maximum.
    """
    side = grid.side_px
    if side <= 2 * margin_px:
        raise ValueError(f"grid side {side} too small for margin {margin_px}")
    rng = np.random.default_rng(seed)
    chosen = []
    attempts = 0
    while len(chosen) < num_sources:
        attempts += 1
        if attempts > 10000:
            raise ValueError(
                f"could not place {num_sources} sources with separation {min_separation_px}"
            )
        r = int(rng.integers(margin_px, side - margin_px))
        c = int(rng.integers(margin_px, side - margin_px))
        if all(max(abs(r - rr), abs(c - cc)) >= min_separation_px for rr, cc in chosen):
            chosen.append((r, c))
    data = np.zeros((side, side))
    for r, c in chosen:
        data[r, c] = amplitude
    return Image(data=data, grid=grid), np.asarray(chosen, dtype=np.intp)


def disks(
    grid: ImageGrid,
    num_disks: int = 5,
    seed: int | None = None,
    min_radius_frac: float = 0.03,
    max_radius_frac: float = 0.15,
) -> Image:
    """Additive random disks, normalized to peak 1."""
    if num_disks < 1:
        raise ValueError("num_disks must be >= 1")
    side = grid.side_px
    rng = np.random.default_rng(seed)
    rows, cols = np.mgrid[0:side, 0:side]
    data = np.zeros((side, side))
    for _ in range(num_disks):
        cr = rng.uniform(0.15, 0.85) * side
        cc = rng.uniform(0.15, 0.85) * side
        radius = rng.uniform(min_radius_frac, max_radius_frac) * side
        amp = rng.uniform(0.3, 1.0)
        data += amp * ((rows - cr) ** 2 + (cols - cc) ** 2 <= radius**2)
    peak = data.max()
    if peak > 0:
        data /= peak
    return Image(data=data, grid=grid)


def from_image_file(path, grid: ImageGrid) -> Image:
    """Grayscale image file resized to the grid, scaled to [0, 1]."""
    from PIL import Image as PILImage

    with PILImage.open(path) as img:
        gray = img.convert("L").resize((grid.side_px, grid.side_px), PILImage.BILINEAR)
    data = np.asarray(gray, dtype=np.float64) / 255.0
    return Image(data=data, grid=grid)
