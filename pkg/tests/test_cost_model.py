import numpy as np
import pytest

from oareco import (
    NoFitError,
    fit_width_multiplier,
    layer_cost,
    network_cost,
)
from oareco.cost_model import format_report
from oareco.nn import efficientdeepmb_arch, parameter_count, random_weights, unet_arch
from oareco.nn.arch import LayerConfig, mbconv6

from naive_refs import counted_conv2d


def conv_layer_mac_oracle(layer, h, w):
    """Execute the convolution and count multiply-accumulates as they run."""
    rng = np.random.default_rng(layer.in_ch * 31 + layer.out_ch)
    groups = layer.in_ch if layer.kind == "DepthwiseConv" else 1
    x = rng.standard_normal((layer.in_ch, h, w))
    weight = rng.standard_normal(
        (layer.out_ch, layer.in_ch // groups, layer.kernel, layer.kernel)
    )
    bias = rng.standard_normal(layer.out_ch)
    out, macs, flops = counted_conv2d(x, weight, bias, stride=layer.stride, groups=groups)
    return out, macs, flops


class TestLayerCost:
    def test_stem_conv_hand_numbers(self):
        flops, macs, params = layer_cost(LayerConfig("Conv", 1, 32, 1), 64, 64)
        # conv 64*64*9*32 MACs; plus bias, bn (2/elem), act (1/elem)
        assert macs == 64 * 64 * 9 * 32
        elems = 64 * 64 * 32
        assert flops == 2 * macs + elems + 2 * elems + elems
        # 3x3 weights + bias + bn gamma/beta
        assert params == 32 * 9 + 32 + 64

    def test_conv_macs_match_executed_loops(self):
        rng = np.random.default_rng(0)
        for _ in range(6):
            cin = int(rng.integers(1, 6))
            cout = int(rng.integers(1, 6))
            h = int(rng.integers(4, 9))
            w = int(rng.integers(4, 9))
            stride = int(rng.choice([1, 2]))
            layer = LayerConfig("Conv", cin, cout, stride)
            out, macs, _ = conv_layer_mac_oracle(layer, h, w)
            flops, got_macs, params = layer_cost(layer, h, w)
            assert got_macs == macs
            assert params == cout * cin * 9 + cout + 2 * cout
            elems = out.size
            assert flops == 2 * macs + elems + 2 * elems + elems

    def test_flops_are_twice_macs_on_conv_entries(self):
        from oareco.cost_model import block_entries

        entries, _, _ = block_entries("b", mbconv6(16, 24, 2), 32, 32)
        mac_entries = [e for e in entries if e.macs > 0]
        assert mac_entries
        for e in mac_entries:
            assert e.flops == 2 * e.macs

    def test_upsample_and_concat_conventions(self):
        from oareco.cost_model import block_entries
        from oareco.nn.arch import DecoderLevel

        lvl = DecoderLevel(16, 12, 12)
        up, cat, *_ = lvl.layers()
        up_entries, h, w = block_entries("up", up, 8, 8)
        assert (h, w) == (16, 16)
        assert up_entries[0].flops == 8 * 16 * 16 * 16
        assert up_entries[0].macs == 0 and up_entries[0].params == 0
        cat_entries, h2, w2 = block_entries("cat", cat, 16, 16)
        assert (h2, w2) == (16, 16)
        assert sum(e.flops for e in cat_entries) == 0


class TestNetworkCost:
    def test_totals_are_entry_sums(self):
        report = network_cost(efficientdeepmb_arch(), 64, 64)
        assert report.flops == sum(e.flops for e in report.per_layer)
        assert report.macs == sum(e.macs for e in report.per_layer)
        assert report.params == sum(e.params for e in report.per_layer)
        assert report.input_shape == (64, 64)

    @pytest.mark.parametrize("template", [efficientdeepmb_arch, unet_arch])
    def test_params_match_actual_weight_arrays(self, template):
        arch = template()
        report = network_cost(arch, 32, 32)
        assert report.params == parameter_count(arch)
        weights = random_weights(arch)
        from oareco.nn import is_trainable

        assert report.params == sum(w.size for n, w in weights.items() if is_trainable(n))

    def test_flops_scale_with_input_area(self):
        arch = efficientdeepmb_arch()
        small = network_cost(arch, 32, 32)
        large = network_cost(arch, 64, 64)
        assert large.params == small.params
        assert 3.5 < large.flops / small.flops < 4.5

    def test_rejects_indivisible_input(self):
        with pytest.raises(ValueError, match="divisible"):
            network_cost(efficientdeepmb_arch(), 60, 60)

    def test_report_formatting_lists_totals(self):
        text = format_report(network_cost(efficientdeepmb_arch(), 32, 32))
        assert "total" in text
        assert "enc1.conv" in text


class TestFitWidthMultiplier:
    def test_achieves_tolerance(self):
        fit = fit_width_multiplier(efficientdeepmb_arch, 64, 64, target_params=5_000_000)
        assert abs(fit.achieved_params - 5_000_000) <= 0.10 * 5_000_000
        assert fit.rel_error == pytest.approx(
            abs(fit.achieved_params - fit.target_params) / fit.target_params
        )
        assert fit.rel_error <= 0.10

    def test_returns_smallest_in_tolerance_multiplier(self):
        target = 5_000_000
        fit = fit_width_multiplier(efficientdeepmb_arch, 64, 64, target_params=target)
        floor = (1 - 0.10) * target

        def params_at(wm):
            return network_cost(efficientdeepmb_arch(width_multiplier=wm), 64, 64).params

        assert params_at(fit.width_multiplier) >= floor
        # one lattice-resolution step lower already misses the floor
        assert params_at(fit.width_multiplier - 5e-4) < floor

    def test_params_monotone_in_multiplier(self):
        counts = [
            network_cost(efficientdeepmb_arch(width_multiplier=wm), 32, 32).params
            for wm in np.linspace(0.25, 3.0, 12)
        ]
        assert counts == sorted(counts)

    def test_unreachable_target_lists_neighbors(self):
        # tolerance far below the lattice step around the target
        with pytest.raises(NoFitError) as exc:
            fit_width_multiplier(efficientdeepmb_arch, 64, 64,
                                 target_params=5_000_000, tol_rel=1e-6)
        err = exc.value
        assert err.nearest_below < 5_000_000 < err.nearest_above
        assert str(err.nearest_below) in str(err)
        assert str(err.nearest_above) in str(err)
