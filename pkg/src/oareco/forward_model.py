"""Discrete optoacoustic forward operator and model-based reconstruction.

The operator is an interpolated-delay projection: each (pixel, detector) pair
deposits weight ``1 / max(distance, pixel_size)`` split linearly between the
two time bins bracketing its time of flight. It is deliberately simple but
self-consistent, so delay-and-sum, the least-squares reconstructor and the
data residual norm all refer to the same physics.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .domain import Image, ScanProfile, Sinogram
from .domain import detector_positions, pixel_coordinates
from . import oarr


class NumericalFailure(RuntimeError):
    """Raised when an iterative solve diverges; carries the iteration index."""

    def __init__(self, message: str, iteration: int):
        super().__init__(message)
        self.iteration = iteration


@dataclass(frozen=True)
class MbConfig:
    """Model-based solver options: iteration budget, nonnegativity, stopping."""

    max_iters: int = 100
    nonneg: bool = True
    stop_tol: float = 1e-6

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.stop_tol < 0:
            raise ValueError(f"stop_tol must be >= 0, got {self.stop_tol}")


class SparseOperator:
    """Sparse forward operator A mapping images to sinograms.

    Rows index (detector, time sample) pairs, columns index pixels in
    row-major grid order. Stored as CSR; ``apply``/``adjoint`` are pure and
    safe to call concurrently.
    """

    def __init__(self, matrix: sparse.csr_matrix, profile: ScanProfile):
        expected = (profile.array.num_elements * profile.num_samples, profile.grid.num_pixels)
        if matrix.shape != expected:
            raise ValueError(f"operator shape {matrix.shape} does not match profile {expected}")
        data = matrix.data
        if data.size and (not np.isfinite(data).all() or data.min() < 0):
            raise ValueError("operator weights must be finite and >= 0")
        self.matrix = matrix
        self.profile = profile

    @property
    def shape(self) -> tuple:
        return self.matrix.shape

    @property
    def nnz(self) -> int:
        return self.matrix.nnz

    @property
    def fingerprint(self) -> str:
        """Provenance hash over geometry, grid, speed of sound and sampling."""
        meta = self.profile.as_metadata()
        text = ",".join(f"{k}={meta[k]!r}" for k in sorted(meta))
        return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]

    def apply(self, x: np.ndarray) -> np.ndarray:
        """A @ x for a flattened image vector."""
        return self.matrix @ np.asarray(x, dtype=np.float64).ravel()

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        """A^T @ y for a flattened sinogram vector."""
        return self.matrix.T @ np.asarray(y, dtype=np.float64).ravel()

    def save(self, path) -> None:
        coo = self.matrix.tocoo()
        meta = dict(self.profile.as_metadata())
        meta["rows_total"] = self.shape[0]
        meta["cols_total"] = self.shape[1]
        meta["fingerprint"] = self.fingerprint
        oarr.write_arrays(
            path,
            {
                "rows": coo.row.astype(np.float64),
                "cols": coo.col.astype(np.float64),
                "weights": coo.data.astype(np.float64),
            },
            metadata=meta,
        )

    @staticmethod
    def load(path) -> "SparseOperator":
        arrays = oarr.read_arrays(path)
        meta = oarr.read_sidecar(path)
        profile = ScanProfile.from_metadata(meta)
        shape = (int(float(meta["rows_total"])), int(float(meta["cols_total"])))
        matrix = sparse.coo_matrix(
            (
                arrays["weights"],
                (arrays["rows"].astype(np.int64), arrays["cols"].astype(np.int64)),
            ),
            shape=shape,
        ).tocsr()
        return SparseOperator(matrix, profile)


def build_forward_operator(profile: ScanProfile) -> SparseOperator:
    """Discretize the delay physics of a scan profile into a sparse matrix.

    For pixel j and detector d with time of flight tau, the weight
    ``1 / max(|r_j - r_d|, pixel_size)`` is split between the two samples
    bracketing tau; delays outside the recorded window deposit nothing.
    """
    array, grid = profile.array, profile.grid
    positions = detector_positions(array)
    pixels = pixel_coordinates(grid).reshape(-1, 2)
    n_pix = grid.num_pixels
    n_samples = profile.num_samples
    fs = profile.sampling_rate_hz
    c = profile.sos.value_m_per_s
    t0 = profile.t0_s

    rows_parts, cols_parts, vals_parts = [], [], []
    cols = np.arange(n_pix, dtype=np.int64)
    for d in range(array.num_elements):
        dist = np.hypot(pixels[:, 0] - positions[d, 0], pixels[:, 1] - positions[d, 1])
        u = (dist / c - t0) * fs
        valid = (u >= 0.0) & (u <= n_samples - 1)
        if not valid.any():
            continue
        uv = u[valid]
        k0 = np.minimum(np.floor(uv).astype(np.int64), n_samples - 2)
        frac = uv - k0
        weight = 1.0 / np.maximum(dist[valid], grid.pixel_size_m)
        base = d * n_samples
        w0 = weight * (1.0 - frac)
        w1 = weight * frac
        keep0 = w0 > 0.0
        keep1 = w1 > 0.0
        rows_parts.append(base + k0[keep0])
        cols_parts.append(cols[valid][keep0])
        vals_parts.append(w0[keep0])
        rows_parts.append(base + k0[keep1] + 1)
        cols_parts.append(cols[valid][keep1])
        vals_parts.append(w1[keep1])

    if rows_parts:
        rows = np.concatenate(rows_parts)
        col_idx = np.concatenate(cols_parts)
        vals = np.concatenate(vals_parts)
    else:
        rows = col_idx = np.empty(0, dtype=np.int64)
        vals = np.empty(0, dtype=np.float64)
    matrix = sparse.coo_matrix(
        (vals, (rows, col_idx)),
        shape=(array.num_elements * n_samples, n_pix),
    ).tocsr()
    return SparseOperator(matrix, profile)


def apply_forward(op: SparseOperator, image: Image) -> Sinogram:
    """Project an image through the operator: s = A vec(x)."""
    if image.grid != op.profile.grid:
        raise ValueError("image grid does not match the operator's provenance grid")
    data = op.apply(image.data).reshape(op.profile.array.num_elements, op.profile.num_samples)
    return Sinogram(data=data, sampling_rate_hz=op.profile.sampling_rate_hz, t0_s=op.profile.t0_s)


def simulate_sinogram(
    image: Image, op: SparseOperator, noise_std: float = 0.0, seed: int | None = None
) -> Sinogram:
    """Forward-project plus i.i.d. Gaussian noise, deterministic per seed."""
    if noise_std < 0:
        raise ValueError(f"noise_std must be >= 0, got {noise_std}")
    clean = apply_forward(op, image)
    if noise_std == 0.0:
        return clean
    rng = np.random.default_rng(seed)
    noisy = clean.data + rng.normal(0.0, noise_std, size=clean.data.shape)
    return Sinogram(data=noisy, sampling_rate_hz=clean.sampling_rate_hz, t0_s=clean.t0_s)


def cgls_solve(apply, adjoint, s: np.ndarray, n_cols: int, cfg: MbConfig = MbConfig()):
    """CGLS core for min_x ||A x - s||, returning (best_x, residual_history).

    ``apply``/``adjoint`` evaluate A and A^T on vectors. With ``cfg.nonneg``
    every iterate is projected onto x >= 0 and the conjugate recursion
    restarts whenever the projection clips, which keeps the method
    convergent. The best iterate by residual norm is returned, so the
    recorded (accepted) residual history is non-increasing by construction.

    Raises
    ------
    NumericalFailure
        If the residual grows beyond 10x its initial value.
    """
    s = np.asarray(s, dtype=np.float64).ravel()
    res0 = float(np.linalg.norm(s))
    x = np.zeros(n_cols, dtype=np.float64)
    if res0 == 0.0:
        return x, [0.0]
    best_x, best_res = x, res0
    history = [res0]
    r = s.copy()
    g = adjoint(r)
    p = g.copy()
    gamma = float(g @ g)
    prev_res = res0

    for it in range(1, cfg.max_iters + 1):
        if gamma == 0.0:
            break
        q = apply(p)
        qq = float(q @ q)
        if qq == 0.0:
            break
        alpha = gamma / qq
        x_new = x + alpha * p
        if cfg.nonneg and (x_new < 0.0).any():
            x_new = np.maximum(x_new, 0.0)
            clipped = True
            r = s - apply(x_new)
        else:
            clipped = False
            r = r - alpha * q
        res = float(np.linalg.norm(r))
        if res > 10.0 * res0:
            raise NumericalFailure(
                f"residual grew to {res:.3e} (> 10x initial {res0:.3e}) at iteration {it}",
                iteration=it,
            )
        if res < best_res:
            best_res, best_x = res, x_new
        history.append(best_res)
        x = x_new
        if abs(prev_res - res) <= cfg.stop_tol * res0:
            break
        prev_res = res
        g = adjoint(r)
        gamma_new = float(g @ g)
        if clipped:
            p = g.copy()
        else:
            p = g + (gamma_new / gamma) * p
        gamma = gamma_new

    return best_x, history


def mb_reconstruct(sino: Sinogram, op: SparseOperator, cfg: MbConfig = MbConfig()) -> Image:
    """Least-squares reconstruction of a sinogram against the operator.

    Thin wrapper around :func:`cgls_solve` that checks shapes and reshapes
    the solution onto the operator's grid.
    """
    profile = op.profile
    expected = (profile.array.num_elements, profile.num_samples)
    if sino.data.shape != expected:
        raise ValueError(f"sinogram shape {sino.data.shape} does not match operator rows {expected}")
    x, _ = cgls_solve(op.apply, op.adjoint, sino.data.ravel(), op.shape[1], cfg)
    grid = profile.grid
    return Image(data=x.reshape(grid.side_px, grid.side_px), grid=grid)
