import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from oareco import (
    DasConfig,
    DelayAndSumReconstructor,
    FullPipelineReconstructor,
    ModelBasedReconstructor,
    NetworkReconstructor,
    das_reconstruct,
)
from oareco.nn import Model, random_weights, save_model, template_arch


@pytest.fixture(scope="module")
def tiny_net():
    arch = template_arch("efficientdeepmb", width_multiplier=0.05)
    return Model(arch=arch, weights=random_weights(arch, seed=0))


class TestSklearnContract:
    @pytest.mark.parametrize(
        "factory",
        [
            lambda: DelayAndSumReconstructor(interpolation="nearest", workers=2),
            lambda: ModelBasedReconstructor(max_iters=7, stop_tol=1e-3),
            lambda: NetworkReconstructor(model_path="ignored.oarr"),
            lambda: FullPipelineReconstructor(interpolation="nearest"),
        ],
    )
    def test_get_params_round_trips_through_clone(self, factory):
        est = factory()
        params = est.get_params()
        cloned = clone(est)
        assert cloned.get_params() == params

    def test_set_params_chains(self):
        est = DelayAndSumReconstructor()
        assert est.set_params(interpolation="nearest").interpolation == "nearest"

    def test_unfitted_transform_raises(self, sinogram):
        with pytest.raises(NotFittedError):
            DelayAndSumReconstructor().transform(sinogram.data)
        with pytest.raises(NotFittedError):
            ModelBasedReconstructor().transform(sinogram.data)
        with pytest.raises(NotFittedError):
            NetworkReconstructor().predict(np.zeros((64, 64)))

    def test_fit_returns_self(self, profile):
        est = DelayAndSumReconstructor(profile=profile)
        assert est.fit() is est


class TestDelayAndSumReconstructor:
    def test_matches_functional_form(self, profile, sinogram):
        est = DelayAndSumReconstructor(profile=profile, interpolation="nearest").fit()
        got = est.transform(sinogram.data)
        want = das_reconstruct(
            sinogram, profile.array, profile.grid, profile.sos,
            DasConfig(interpolation="nearest"),
        )
        np.testing.assert_array_equal(got, want.data)

    def test_2d_in_2d_out_3d_in_3d_out(self, profile, sinogram):
        est = DelayAndSumReconstructor(profile=profile).fit()
        single = est.transform(sinogram.data)
        assert single.shape == (64, 64)
        batch = est.transform(np.stack([sinogram.data, sinogram.data]))
        assert batch.shape == (2, 64, 64)
        np.testing.assert_array_equal(batch[0], single)
        np.testing.assert_array_equal(batch[1], single)

    def test_requires_profile(self):
        with pytest.raises(ValueError, match="profile"):
            DelayAndSumReconstructor().fit()

    def test_rejects_wrong_shape(self, profile):
        est = DelayAndSumReconstructor(profile=profile).fit()
        with pytest.raises(ValueError):
            est.transform(np.zeros((32, 512)))

    def test_rejects_non_finite(self, profile):
        est = DelayAndSumReconstructor(profile=profile).fit()
        bad = np.zeros((64, 512))
        bad[0, 0] = np.nan
        with pytest.raises(ValueError, match="finite"):
            est.transform(bad)


class TestModelBasedReconstructor:
    def test_reconstruction_fits_the_data(self, profile, sinogram, operator):
        est = ModelBasedReconstructor(profile=profile, max_iters=60).fit()
        recon = est.transform(sinogram.data)
        s = sinogram.data.ravel()
        r = np.linalg.norm(operator.apply(recon) - s) / np.linalg.norm(s)
        assert r <= 0.05
        assert recon.min() >= 0.0

    def test_fit_builds_operator_once(self, profile):
        est = ModelBasedReconstructor(profile=profile).fit()
        assert est.operator_.fingerprint
        assert est.operator_.profile == profile


class TestNetworkReconstructor:
    def test_predict_on_das_image(self, tiny_net):
        est = NetworkReconstructor(model=tiny_net).fit()
        x = np.abs(np.random.default_rng(0).standard_normal((64, 64)))
        out = est.predict(x)
        assert out.shape == (64, 64)
        assert out.min() >= 0.0

    def test_loads_model_from_path(self, tiny_net, tmp_path):
        path = tmp_path / "net.oarr"
        save_model(tiny_net, path)
        est = NetworkReconstructor(model_path=str(path)).fit()
        x = np.abs(np.random.default_rng(1).standard_normal((64, 64)))
        np.testing.assert_array_equal(
            est.predict(x), NetworkReconstructor(model=tiny_net).fit().predict(x)
        )

    def test_requires_exactly_one_source(self, tiny_net, tmp_path):
        with pytest.raises(ValueError, match="model"):
            NetworkReconstructor().fit()
        path = tmp_path / "net.oarr"
        save_model(tiny_net, path)
        with pytest.raises(ValueError, match="model"):
            NetworkReconstructor(model=tiny_net, model_path=str(path)).fit()


class TestFullPipeline:
    def test_composes_das_then_network(self, profile, sinogram, tiny_net):
        pipe = FullPipelineReconstructor(profile=profile, model=tiny_net).fit()
        got = pipe.predict(sinogram.data)
        das_img = DelayAndSumReconstructor(profile=profile).fit().transform(sinogram.data)
        want = NetworkReconstructor(model=tiny_net).fit().predict(das_img)
        np.testing.assert_array_equal(got, want)

    def test_batch_predict(self, profile, sinogram, tiny_net):
        pipe = FullPipelineReconstructor(profile=profile, model=tiny_net).fit()
        batch = pipe.predict(np.stack([sinogram.data, 2.0 * sinogram.data]))
        assert batch.shape == (2, 64, 64)
