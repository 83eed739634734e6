"""Wall-clock latency and frame-rate measurement.

Warmup runs are executed and discarded, then each measured run is timed
with the monotonic high-resolution clock. The headline statistic is the
median (with p05/p95 bands) since single-machine timings are noisy; the
mean is also derivable from the raw samples, which are kept verbatim so
every statistic is recomputable.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .beamformer import DasConfig, das_reconstruct
from .domain import ScanProfile, Sinogram

DEFAULT_WARMUP_RUNS = 10
DEFAULT_MEASURED_RUNS = 100
DEFAULT_THRESHOLD_HZ = 25.0

STAGES = ("das", "net", "e2e")


class BenchTaskError(RuntimeError):
    """The timed task raised; carries the failing run index."""

    def __init__(self, run_index: int, phase: str, cause: BaseException):
        self.run_index = run_index
        self.phase = phase
        self.cause = cause
        super().__init__(f"task failed on {phase} run {run_index}: {cause!r}")


@dataclass(frozen=True)
class TimingStats:
    samples_ms: tuple
    threshold_hz: float
    warmup_runs: int

    def __post_init__(self):
        samples = tuple(float(s) for s in self.samples_ms)
        if not samples:
            raise ValueError("samples_ms must hold at least one measurement")
        if any(s < 0 for s in samples):
            raise ValueError("samples_ms must be non-negative")
        object.__setattr__(self, "samples_ms", samples)

    @property
    def median_ms(self) -> float:
        return float(np.median(self.samples_ms))

    @property
    def p05_ms(self) -> float:
        return float(np.percentile(self.samples_ms, 5))

    @property
    def p95_ms(self) -> float:
        return float(np.percentile(self.samples_ms, 95))

    @property
    def mean_ms(self) -> float:
        return float(np.mean(self.samples_ms))

    @property
    def frame_rate_hz(self) -> float:
        return 1000.0 / self.median_ms

    @property
    def realtime(self) -> bool:
        return self.frame_rate_hz >= self.threshold_hz

    def as_dict(self) -> dict:
        return {
            "runs": len(self.samples_ms),
            "median_ms": self.median_ms,
            "p05_ms": self.p05_ms,
            "p95_ms": self.p95_ms,
            "mean_ms": self.mean_ms,
            "frame_rate_hz": self.frame_rate_hz,
            "threshold_hz": self.threshold_hz,
            "realtime": self.realtime,
        }


def benchmark(
    task,
    warmup_runs: int = DEFAULT_WARMUP_RUNS,
    measured_runs: int = DEFAULT_MEASURED_RUNS,
    threshold_hz: float = DEFAULT_THRESHOLD_HZ,
) -> TimingStats:
    """Time a repeatable closure; warmups are discarded."""
    if warmup_runs < 0:
        raise ValueError("warmup_runs must be >= 0")
    if measured_runs < 1:
        raise ValueError("measured_runs must be >= 1")
    if threshold_hz <= 0:
        raise ValueError("threshold_hz must be positive")
    for i in range(warmup_runs):
        try:
            task()
        except Exception as exc:
            raise BenchTaskError(i, "warmup", exc) from exc
    samples = []
    for i in range(measured_runs):
        start = time.perf_counter()
        try:
            task()
        except Exception as exc:
            raise BenchTaskError(i, "measured", exc) from exc
        samples.append((time.perf_counter() - start) * 1000.0)
    return TimingStats(
        samples_ms=tuple(samples), threshold_hz=threshold_hz, warmup_runs=warmup_runs
    )


def bench_pipeline(
    sino: Sinogram,
    profile: ScanProfile,
    model=None,
    stages=STAGES,
    warmup_runs: int = DEFAULT_WARMUP_RUNS,
    measured_runs: int = DEFAULT_MEASURED_RUNS,
    threshold_hz: float = DEFAULT_THRESHOLD_HZ,
    das_config: DasConfig = DasConfig(),
    workers: int | None = None,
) -> dict:
    """Per-stage timing of the reconstruction pipeline.

    Stages: das (beamforming only), net (network only, on a precomputed
    DAS image), e2e (beamforming plus network). Network stages require a
    model.
    """
    for stage in stages:
        if stage not in STAGES:
            raise ValueError(f"unknown stage {stage!r}; choose from {STAGES}")
    needs_model = any(s in stages for s in ("net", "e2e"))
    if needs_model and model is None:
        raise ValueError("net/e2e stages require a model")

    def run_das():
        return das_reconstruct(
            sino, profile.array, profile.grid, profile.sos, das_config, workers=workers
        )

    results = {}
    for stage in stages:
        if stage == "das":
            task = run_das
        elif stage == "net":
            from .nn import infer

            das_image = run_das()
            task = lambda: infer(model, das_image)  # noqa: E731
        else:
            from .nn import infer

            task = lambda: infer(model, run_das())  # noqa: E731
        results[stage] = benchmark(task, warmup_runs, measured_runs, threshold_hz)
    return results


def format_stats(results: dict) -> str:
    """Frame-rate comparison table over named timing results."""
    lines = [
        f"{'stage':<8}{'median ms':>12}{'p05 ms':>10}{'p95 ms':>10}"
        f"{'frames/s':>10}{'realtime':>10}"
    ]
    for name, stats in results.items():
        lines.append(
            f"{name:<8}{stats.median_ms:>12.3f}{stats.p05_ms:>10.3f}"
            f"{stats.p95_ms:>10.3f}{stats.frame_rate_hz:>10.2f}"
            f"{'yes' if stats.realtime else 'no':>10}"
        )
    return "\n".join(lines)
