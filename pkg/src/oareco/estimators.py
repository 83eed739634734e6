"""Estimator-style wrappers over the functional core.

Each reconstructor follows the familiar fit/transform (or fit/predict)
protocol with get_params/set_params, so pipelines, grid search, and
cloning work out of the box. X is a single 2D sinogram/image or a 3D
batch; output dimensionality mirrors the input.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .beamformer import DasConfig, das_reconstruct
from .domain import ScanProfile
from .forward_model import MbConfig, build_forward_operator, mb_reconstruct
from .validation import (
    check_image_array,
    check_scan_profile,
    check_sinogram_array,
    to_image,
    to_sinogram,
)


class DelayAndSumReconstructor(BaseEstimator, TransformerMixin):
    """Delay-and-sum beamforming as a stateless transformer."""

    def __init__(self, profile=None, interpolation="linear", normalize_by_count=True, workers=None):
        self.profile = profile
        self.interpolation = interpolation
        self.normalize_by_count = normalize_by_count
        self.workers = workers

    def _config(self) -> DasConfig:
        return DasConfig(
            interpolation=self.interpolation, normalize_by_count=self.normalize_by_count
        )

    def fit(self, X=None, y=None):
        profile = check_scan_profile(self.profile)
        self._config()  # validates interpolation early
        self.profile_ = profile
        return self

    def transform(self, X):
        check_is_fitted(self, "profile_")
        p = self.profile_
        batch = check_sinogram_array(X, p)
        cfg = self._config()
        out = np.stack(
            [
                das_reconstruct(
                    to_sinogram(row, p), p.array, p.grid, p.sos, cfg, workers=self.workers
                ).data
                for row in batch
            ]
        )
        return out if np.asarray(X).ndim == 3 else out[0]


class ModelBasedReconstructor(BaseEstimator, TransformerMixin):
    """Iterative model-based reconstruction; fit builds the forward operator."""

    def __init__(self, profile=None, max_iters=100, nonneg=True, stop_tol=1e-6):
        self.profile = profile
        self.max_iters = max_iters
        self.nonneg = nonneg
        self.stop_tol = stop_tol

    def _config(self) -> MbConfig:
        return MbConfig(max_iters=self.max_iters, nonneg=self.nonneg, stop_tol=self.stop_tol)

    def fit(self, X=None, y=None):
        profile = check_scan_profile(self.profile)
        self._config()
        self.profile_ = profile
        self.operator_ = build_forward_operator(profile)
        return self

    def transform(self, X):
        check_is_fitted(self, "operator_")
        p = self.profile_
        batch = check_sinogram_array(X, p)
        cfg = self._config()
        out = np.stack(
            [mb_reconstruct(to_sinogram(row, p), self.operator_, cfg).data for row in batch]
        )
        return out if np.asarray(X).ndim == 3 else out[0]


class NetworkReconstructor(BaseEstimator):
    """Network post-processing of beamformed images.

    Provide either a loaded model or a weight-file path; fit resolves it.
    predict maps DAS images to enhanced images.
    """

    def __init__(self, model=None, model_path=None, profile=None):
        self.model = model
        self.model_path = model_path
        self.profile = profile

    def fit(self, X=None, y=None):
        from .nn import load_model

        if (self.model is None) == (self.model_path is None):
            raise ValueError("provide exactly one of model or model_path")
        self.model_ = self.model if self.model is not None else load_model(self.model_path)
        return self

    def predict(self, X):
        from .nn import infer_array

        check_is_fitted(self, "model_")
        X_arr = np.asarray(X, dtype=np.float64)
        if self.profile is not None:
            batch = check_image_array(X_arr, check_scan_profile(self.profile).grid)
        else:
            batch = X_arr[np.newaxis] if X_arr.ndim == 2 else X_arr
            if batch.ndim != 3:
                raise ValueError(f"expected 2D image or 3D batch, got shape {X_arr.shape}")
        out = np.stack([infer_array(self.model_, row).astype(np.float64) for row in batch])
        return out if X_arr.ndim == 3 else out[0]


class FullPipelineReconstructor(BaseEstimator):
    """DAS beamforming followed by the network, end to end."""

    def __init__(self, profile=None, model=None, model_path=None, interpolation="linear", workers=None):
        self.profile = profile
        self.model = model
        self.model_path = model_path
        self.interpolation = interpolation
        self.workers = workers

    def fit(self, X=None, y=None):
        self.das_ = DelayAndSumReconstructor(
            profile=self.profile, interpolation=self.interpolation, workers=self.workers
        ).fit()
        self.net_ = NetworkReconstructor(
            model=self.model, model_path=self.model_path, profile=self.profile
        ).fit()
        return self

    def predict(self, X):
        check_is_fitted(self, "das_")
        return self.net_.predict(self.das_.transform(X))
