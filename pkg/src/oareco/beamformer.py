"""Delay-and-sum transformation of a sinogram into the image domain.

This is the fixed, non-trainable front end placed before the network: each
pixel sums the detector samples found at its time-of-flight delays. No
filtering or envelope detection is applied beforehand.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import DetectorArray, Image, ImageGrid, Sinogram, SpeedOfSound
from .domain import detector_positions, pixel_coordinates
from .parallel import run_row_blocks

INTERPOLATIONS = ("nearest", "linear")


@dataclass(frozen=True)
class DasConfig:
    """Delay-and-sum options.

    ``interpolation`` selects the temporal sampling of each delayed signal;
    ``normalize_by_count`` divides every pixel by its number of in-range
    detector contributions. Aperture weighting is uniform.
    """

    interpolation: str = "linear"
    normalize_by_count: bool = True

    def __post_init__(self):
        if self.interpolation not in INTERPOLATIONS:
            raise ValueError(
                f"interpolation must be one of {INTERPOLATIONS}, got {self.interpolation!r}"
            )


def das_reconstruct(
    sino: Sinogram,
    array: DetectorArray,
    grid: ImageGrid,
    sos: SpeedOfSound,
    cfg: DasConfig = DasConfig(),
    workers: int | None = None,
) -> Image:
    """Back-project a sinogram onto the grid by delay and sum.

    For pixel p and detector d the delay is ``|r_p - r_d| / c - t0``; samples
    falling outside the recorded window contribute nothing and do not count
    toward the per-pixel normalization. The detector sum runs in ascending
    detector order for every pixel, so results are bit-reproducible for any
    worker count.
    """
    if sino.num_elements != array.num_elements:
        raise ValueError(
            f"sinogram has {sino.num_elements} detector rows, geometry has {array.num_elements}"
        )
    positions = detector_positions(array)
    pixels = pixel_coordinates(grid)
    signals = sino.data
    n_samples = sino.num_samples
    fs = sino.sampling_rate_hz
    c = sos.value_m_per_s
    t0 = sino.t0_s
    nearest = cfg.interpolation == "nearest"

    out = np.zeros((grid.side_px, grid.side_px), dtype=np.float64)

    def block(start: int, stop: int) -> None:
        pix = pixels[start:stop].reshape(-1, 2)
        acc = np.zeros(pix.shape[0], dtype=np.float64)
        count = np.zeros(pix.shape[0], dtype=np.int64)
        for d in range(array.num_elements):
            dist = np.hypot(pix[:, 0] - positions[d, 0], pix[:, 1] - positions[d, 1])
            u = (dist / c - t0) * fs
            valid = (u >= 0.0) & (u <= n_samples - 1)
            u = np.where(valid, u, 0.0)
            row = signals[d]
            if nearest:
                vals = row[np.rint(u).astype(np.intp)]
            else:
                k0 = np.minimum(np.floor(u).astype(np.intp), max(n_samples - 2, 0))
                k1 = np.minimum(k0 + 1, n_samples - 1)
                frac = u - k0
                vals = row[k0] * (1.0 - frac) + row[k1] * frac
            acc += np.where(valid, vals, 0.0)
            count += valid
        if cfg.normalize_by_count:
            acc = np.divide(acc, count, out=np.zeros_like(acc), where=count > 0)
        out[start:stop] = acc.reshape(stop - start, grid.side_px)

    run_row_blocks(block, grid.side_px, workers)
    return Image(data=out, grid=grid)
