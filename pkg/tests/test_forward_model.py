import numpy as np
import pytest

from oareco import (
    DetectorArray,
    Image,
    ImageGrid,
    MbConfig,
    NumericalFailure,
    ScanProfile,
    SparseOperator,
    SpeedOfSound,
    apply_forward,
    build_forward_operator,
    cgls_solve,
    desk_profile,
    detector_positions,
    disks,
    mb_reconstruct,
    pixel_coordinates,
    simulate_sinogram,
)


def tiny_profile():
    return ScanProfile(
        array=DetectorArray(num_elements=4, radius_m=0.01, coverage_rad=np.pi),
        grid=ImageGrid(side_px=8, pixel_size_m=4e-4),
        sos=SpeedOfSound(1500.0),
        sampling_rate_hz=1.0e7,
        t0_s=4e-6,
        num_samples=48,
    )


def dense_reference_operator(profile):
    """Rebuild the forward matrix entry by entry from the delay formula."""
    positions = detector_positions(profile.array)
    pixels = pixel_coordinates(profile.grid).reshape(-1, 2)
    n_samples = profile.num_samples
    dense = np.zeros((profile.array.num_elements * n_samples, len(pixels)))
    for d in range(profile.array.num_elements):
        for j, (px, py) in enumerate(pixels):
            dist = np.hypot(px - positions[d, 0], py - positions[d, 1])
            u = (dist / profile.sos.value_m_per_s - profile.t0_s) * profile.sampling_rate_hz
            if not 0.0 <= u <= n_samples - 1:
                continue
            k0 = min(int(np.floor(u)), n_samples - 2)
            frac = u - k0
            w = 1.0 / max(dist, profile.grid.pixel_size_m)
            dense[d * n_samples + k0, j] += w * (1.0 - frac)
            dense[d * n_samples + k0 + 1, j] += w * frac
    return dense


class TestOperatorConstruction:
    def test_matches_dense_reference_exactly(self):
        profile = tiny_profile()
        op = build_forward_operator(profile)
        np.testing.assert_array_equal(op.matrix.toarray(), dense_reference_operator(profile))

    def test_shape_and_sparsity(self, operator, profile):
        assert operator.shape == (64 * 512, 64 * 64)
        assert 0 < operator.nnz < operator.shape[0] * operator.shape[1]
        assert operator.matrix.data.min() >= 0.0

    def test_fingerprint_tracks_profile(self, operator):
        other = build_forward_operator(desk_profile(side_px=32))
        assert operator.fingerprint == build_forward_operator(desk_profile()).fingerprint
        assert operator.fingerprint != other.fingerprint

    def test_adjoint_matches_transpose(self, operator):
        rng = np.random.default_rng(0)
        x = rng.standard_normal(operator.shape[1])
        y = rng.standard_normal(operator.shape[0])
        lhs = operator.apply(x) @ y
        rhs = x @ operator.adjoint(y)
        assert abs(lhs - rhs) <= 1e-10 * max(abs(lhs), abs(rhs))

    def test_save_load_round_trip(self, operator, tmp_path):
        path = tmp_path / "op.oarr"
        operator.save(path)
        back = SparseOperator.load(path)
        assert back.fingerprint == operator.fingerprint
        assert back.profile == operator.profile
        assert (back.matrix != operator.matrix).nnz == 0

    def test_rejects_negative_weights(self, profile):
        from scipy import sparse

        bad = sparse.csr_matrix(
            (np.array([-1.0]), (np.array([0]), np.array([0]))),
            shape=(64 * 512, 64 * 64),
        )
        with pytest.raises(ValueError, match=">= 0"):
            SparseOperator(bad, profile)


class TestSimulate:
    def test_noiseless_equals_apply_forward(self, phantom, operator):
        sim = simulate_sinogram(phantom, operator)
        fwd = apply_forward(operator, phantom)
        np.testing.assert_array_equal(sim.data, fwd.data)
        assert sim.sampling_rate_hz == operator.profile.sampling_rate_hz
        assert sim.t0_s == operator.profile.t0_s

    def test_seeded_noise_is_reproducible(self, phantom, operator):
        a = simulate_sinogram(phantom, operator, noise_std=0.1, seed=5)
        b = simulate_sinogram(phantom, operator, noise_std=0.1, seed=5)
        c = simulate_sinogram(phantom, operator, noise_std=0.1, seed=6)
        np.testing.assert_array_equal(a.data, b.data)
        assert not np.array_equal(a.data, c.data)

    def test_noise_variance_matches_request(self, phantom, operator):
        clean = simulate_sinogram(phantom, operator)
        pooled = [
            simulate_sinogram(phantom, operator, noise_std=0.25, seed=seed).data - clean.data
            for seed in range(4)
        ]
        resid = np.concatenate([r.ravel() for r in pooled])
        assert resid.size >= 1e5
        assert np.var(resid) == pytest.approx(0.25**2, rel=0.05)

    def test_negative_noise_rejected(self, phantom, operator):
        with pytest.raises(ValueError):
            simulate_sinogram(phantom, operator, noise_std=-0.1)

    def test_grid_mismatch_rejected(self, operator):
        grid = ImageGrid(side_px=32, pixel_size_m=3.2e-4)
        img = Image(data=np.zeros((32, 32)), grid=grid)
        with pytest.raises(ValueError, match="grid"):
            apply_forward(operator, img)


class TestCgls:
    def test_dense_toy_matches_normal_equations(self):
        # 4x3 overdetermined system, unconstrained route
        rng = np.random.default_rng(3)
        a = rng.standard_normal((4, 3))
        s = rng.standard_normal(4)
        want, *_ = np.linalg.lstsq(a, s, rcond=None)
        x, history = cgls_solve(
            lambda v: a @ v, lambda r: a.T @ r, s, 3, MbConfig(max_iters=50, nonneg=False, stop_tol=0.0)
        )
        np.testing.assert_allclose(x, want, atol=1e-8)
        assert history[0] == pytest.approx(np.linalg.norm(s))

    def test_consistent_nonneg_system_is_recovered(self):
        rng = np.random.default_rng(4)
        a = rng.standard_normal((20, 8))
        x_true = rng.random(8)
        s = a @ x_true
        x, history = cgls_solve(lambda v: a @ v, lambda r: a.T @ r, s, 8,
                                MbConfig(max_iters=100, nonneg=True, stop_tol=0.0))
        np.testing.assert_allclose(x, x_true, atol=1e-6)
        assert history[-1] <= 1e-8 * history[0]

    def test_projected_route_stays_near_nnls_optimum(self):
        from scipy.optimize import nnls

        rng = np.random.default_rng(5)
        a = rng.standard_normal((15, 6))
        s = rng.standard_normal(15)
        x, history = cgls_solve(lambda v: a @ v, lambda r: a.T @ r, s, 6,
                                MbConfig(max_iters=200, nonneg=True, stop_tol=0.0))
        assert x.min() >= 0.0
        _, best = nnls(a, s)
        assert history[-1] <= best * 1.05 + 1e-12

    def test_history_monotone_non_increasing(self):
        rng = np.random.default_rng(6)
        a = rng.standard_normal((30, 12))
        s = rng.standard_normal(30)
        _, history = cgls_solve(lambda v: a @ v, lambda r: a.T @ r, s, 12,
                                MbConfig(max_iters=60, nonneg=True, stop_tol=0.0))
        assert all(b <= a_ for a_, b in zip(history, history[1:]))

    def test_zero_rhs_returns_zero(self):
        x, history = cgls_solve(lambda v: v, lambda r: r, np.zeros(5), 5, MbConfig())
        np.testing.assert_array_equal(x, 0.0)
        assert history == [0.0]

    def test_divergence_raises_numerical_failure(self):
        # a badly scaled adjoint overshoots the line search and the residual
        # blows past the 10x guard immediately
        rng = np.random.default_rng(7)
        a = rng.standard_normal((10, 4))
        s = rng.standard_normal(10)
        with pytest.raises(NumericalFailure) as exc:
            cgls_solve(lambda v: a @ v, lambda r: 100.0 * (a.T @ r), s, 4,
                       MbConfig(max_iters=100, nonneg=False, stop_tol=0.0))
        assert exc.value.iteration >= 1
        assert str(exc.value.iteration) in str(exc.value)

    def test_stop_tol_short_circuits(self):
        rng = np.random.default_rng(8)
        a = rng.standard_normal((40, 20))
        s = rng.standard_normal(40)
        _, loose = cgls_solve(lambda v: a @ v, lambda r: a.T @ r, s, 20,
                              MbConfig(max_iters=100, nonneg=False, stop_tol=0.5))
        _, tight = cgls_solve(lambda v: a @ v, lambda r: a.T @ r, s, 20,
                              MbConfig(max_iters=100, nonneg=False, stop_tol=1e-12))
        assert len(loose) < len(tight)


class TestMbReconstruct:
    def test_noiseless_scan_reaches_low_residual(self, phantom, operator, sinogram):
        recon = mb_reconstruct(sinogram, operator)
        s = sinogram.data.ravel()
        r = np.linalg.norm(operator.apply(recon.data) - s) / np.linalg.norm(s)
        assert r <= 0.05
        assert recon.data.min() >= 0.0

    def test_shape_mismatch_rejected(self, operator):
        from oareco import Sinogram

        bad = Sinogram(data=np.zeros((64, 100)), sampling_rate_hz=2e7)
        with pytest.raises(ValueError):
            mb_reconstruct(bad, operator)

    def test_zero_sinogram_gives_zero_image(self, operator):
        from oareco import Sinogram

        zero = Sinogram(data=np.zeros((64, 512)), sampling_rate_hz=2e7, t0_s=1.5e-5)
        recon = mb_reconstruct(zero, operator)
        np.testing.assert_array_equal(recon.data, 0.0)
