"""2D ring-array optoacoustic reconstruction and performance toolkit.

Pipeline: delay-and-sum beamforming, iterative model-based reconstruction
against a sparse forward operator, and a learned post-processing network
executed by a self-contained numpy inference engine, plus the cost,
quality-metric, and latency tooling to compare them.
"""

from .beamformer import DasConfig, das_reconstruct
from .bench import TimingStats, bench_pipeline, benchmark
from .cost_model import (
    CostEntry,
    CostReport,
    FitResult,
    NoFitError,
    fit_width_multiplier,
    layer_cost,
    network_cost,
)
from .domain import (
    DetectorArray,
    Image,
    ImageGrid,
    ScanProfile,
    Sinogram,
    SpeedOfSound,
    desk_profile,
    detector_positions,
    paper_profile,
    pixel_coordinates,
)
from .estimators import (
    DelayAndSumReconstructor,
    FullPipelineReconstructor,
    ModelBasedReconstructor,
    NetworkReconstructor,
)
from .forward_model import (
    MbConfig,
    NumericalFailure,
    SparseOperator,
    apply_forward,
    build_forward_operator,
    cgls_solve,
    mb_reconstruct,
    simulate_sinogram,
)
from .metrics import (
    ImageMetrics,
    MetricsReport,
    aggregate,
    image_metrics,
    residual_norm,
    ssim,
)
from .oarr import OarrFormatError, read_array, read_arrays, write_array, write_arrays
from .phantoms import disks, from_image_file, point_sources

__version__ = "0.1.0"

__all__ = [
    "CostEntry",
    "CostReport",
    "DasConfig",
    "DelayAndSumReconstructor",
    "DetectorArray",
    "FitResult",
    "FullPipelineReconstructor",
    "Image",
    "ImageGrid",
    "ImageMetrics",
    "MbConfig",
    "MetricsReport",
    "ModelBasedReconstructor",
    "NetworkReconstructor",
    "NoFitError",
    "NumericalFailure",
    "OarrFormatError",
    "ScanProfile",
    "Sinogram",
    "SparseOperator",
    "SpeedOfSound",
    "TimingStats",
    "aggregate",
    "apply_forward",
    "bench_pipeline",
    "benchmark",
    "build_forward_operator",
    "cgls_solve",
    "das_reconstruct",
    "desk_profile",
    "detector_positions",
    "disks",
    "fit_width_multiplier",
    "from_image_file",
    "image_metrics",
    "layer_cost",
    "mb_reconstruct",
    "network_cost",
    "paper_profile",
    "pixel_coordinates",
    "point_sources",
    "read_array",
    "read_arrays",
    "residual_norm",
    "simulate_sinogram",
    "ssim",
    "write_array",
    "write_arrays",
]
