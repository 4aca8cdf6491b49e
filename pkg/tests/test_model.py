"""Variant construction, fusion, prediction, and bundle round-trip tests."""

import numpy as np
import pytest

from aircov.data import SplitSpec, split_by_bs
from aircov.errors import InvalidInputError
from aircov.features import assemble_feature_table, fit_encoding
from aircov.geo import SamplePoint
from aircov.metrics import mae
from aircov.model import (
    VARIANTS,
    build_variant,
    fit_variant,
    forward_fused,
    load_model,
    param_count,
    predict_rsrp,
    predict_rsrp_batch,
    predict_table_rows,
    save_model,
)
from aircov.nnet import MlpSpec, TrainConfig, mlp_init
from aircov.nnet import param_count as mlp_param_count
from aircov.synth import default_scenario, generate_dataset


@pytest.fixture(scope="module")
def world():
    s = default_scenario(noise_std=0.0)
    bss, samples = generate_dataset(s, 10, 50, seed=33)
    table = assemble_feature_table(bss, samples, m_beams=8)
    enc = fit_encoding(table, np.arange(len(table)))
    return s, bss, samples, table, enc


class TestBuildVariant:
    def test_proposed_has_three_nine_dim_subnets(self, world):
        *_, enc = world
        model = build_variant("proposed", 8, enc, seed=0, hidden_width=16)
        assert len(model.nets) == 3
        assert all(net.spec.output_dim == 9 for net in model.nets)
        assert all(net.spec.hidden_layers == 5 for net in model.nets)
        assert model.distance_net.spec.input_dim == 1
        assert model.frequency_net.spec.input_dim == 1

    def test_benchmark2_input_dim_bookkeeping(self, world):
        *_, enc = world
        model = build_variant("benchmark2", 8, enc, seed=0, hidden_width=16)
        (net,) = model.nets
        # 4 numeric compressed features + channel count + both one-hot blocks
        expected = 5 + len(enc.vocab_aau) + len(enc.vocab_scenario)
        assert net.spec.input_dim == expected
        assert net.spec.hidden_layers == 6

    def test_wrong1_feature_routing(self):
        groups = VARIANTS["wrong1"]["groups"]
        assert groups[0] == ["distance_m"]
        assert groups[1] == ["delta_theta_h"]
        assert set(groups[2]) == {"carrier_freq_mhz", "delta_theta_v",
                                  "aau_type", "num_channels",
                                  "coverage_scenario"}

    def test_wrong23_feature_routing(self):
        assert VARIANTS["wrong2"]["groups"][0] == ["delta_theta_h"]
        assert VARIANTS["wrong2"]["groups"][1] == ["carrier_freq_mhz"]
        assert VARIANTS["wrong3"]["groups"][0] == ["delta_theta_h"]
        assert VARIANTS["wrong3"]["groups"][1] == ["delta_theta_v"]
        assert "distance_m" in VARIANTS["wrong3"]["groups"][2]

    def test_unknown_tag(self, world):
        *_, enc = world
        with pytest.raises(InvalidInputError):
            build_variant("wrong4", 8, enc, seed=0)

    def test_constrained_model_is_smaller_than_full_width_equivalent(self, world):
        # three width-w subnets versus one width-3w net of the same depth on
        # the union of the inputs: the block-diagonal structure drops weights
        *_, enc = world
        w = 32
        model = build_variant("proposed", 8, enc, seed=0, hidden_width=w)
        full_dim = sum(enc.input_dim(g) for g in model.groups)
        full = mlp_init(MlpSpec(full_dim, 5, 3 * w, 9), 0)
        assert param_count(model) < mlp_param_count(full)


class TestForwardFused:
    def test_sum_of_stubbed_subnets(self, world):
        *_, table, enc = world
        model = build_variant("proposed", 8, enc, seed=1, hidden_width=8)
        vals = (1.25, -2.5, 0.75)
        for net, v in zip(model.nets, vals):
            for wgt in net.weights:
                wgt[:] = 0.0
            for b in net.biases:
                b[:] = 0.0
            net.biases[-1][:] = v
        cols = {k: v[:4] for k, v in table.columns.items()}
        from aircov.model import group_matrices
        from aircov.nnet import fused_forward
        out = fused_forward(model.nets, group_matrices(model, cols))
        assert np.array_equal(out, np.full((4, 9), sum(vals)))

    def test_equals_sum_of_subnet_outputs(self, world):
        *_, table, enc = world
        from aircov.model import group_matrices
        from aircov.nnet import forward
        model = build_variant("proposed", 8, enc, seed=5, hidden_width=16)
        xs = group_matrices(model, {k: v[:32] for k, v in table.columns.items()})
        fused = np.zeros((32, 9))
        for net, x in zip(model.nets, xs):
            fused = fused + forward(net, x)
        from aircov.nnet import fused_forward
        assert np.allclose(fused_forward(model.nets, xs), fused, rtol=0, atol=1e-12)

    def test_single_record_fusion(self, world):
        _, bss, samples, table, enc = world
        from aircov.geo import compress
        model = build_variant("proposed", 8, enc, seed=2, hidden_width=8)
        bs = {b.bs_id: b for b in bss}[samples[0].bs_id]
        cf = compress(bs, samples[0].point)
        out = forward_fused(model, cf)
        assert out.shape == (9,)

    def test_identical_output_gradients_into_subnets(self, world):
        # additive fusion sends the same output gradient to every subnet, so
        # the final-layer bias gradients coincide across subnets
        *_, table, enc = world
        from aircov.model import group_matrices
        from aircov.nnet import backward_from_output, forward_cached, loss_output_grad
        model = build_variant("proposed", 8, enc, seed=3, hidden_width=8)
        xs = group_matrices(model, {k: v[:16] for k, v in table.columns.items()})
        outs, caches = [], []
        for net, x in zip(model.nets, xs):
            out, cache = forward_cached(net, x)
            outs.append(out)
            caches.append(cache)
        yhat = sum(outs)
        y = np.zeros_like(yhat)
        _, dout = loss_output_grad(y, yhat, np.ones(yhat.shape, dtype=bool))
        bias_grads = []
        for net, cache in zip(model.nets, caches):
            _, gb = backward_from_output(net, cache, dout)
            bias_grads.append(gb[-1])
        assert np.array_equal(bias_grads[0], bias_grads[1])
        assert np.array_equal(bias_grads[0], bias_grads[2])

    def test_zeroed_distance_net_ignores_distance(self, world):
        *_, table, enc = world
        from aircov.model import group_matrices
        from aircov.nnet import fused_forward
        model = build_variant("proposed", 8, enc, seed=4, hidden_width=8)
        for wgt in model.distance_net.weights:
            wgt[:] = 0.0
        cols_a = {k: v[:8].copy() for k, v in table.columns.items()}
        cols_b = {k: v.copy() for k, v in cols_a.items()}
        cols_b["distance_m"] = cols_b["distance_m"] * 3.0 + 17.0
        out_a = fused_forward(model.nets, group_matrices(model, cols_a))
        out_b = fused_forward(model.nets, group_matrices(model, cols_b))
        assert np.array_equal(out_a, out_b)


class TestPredict:
    def test_pointwise_matches_batch_bitwise(self, world):
        _, bss, samples, table, enc = world
        model = build_variant("proposed", 8, enc, seed=7, hidden_width=16)
        bs = bss[0]
        pts = [s.point for s in samples if s.bs_id == bs.bs_id][:20]
        batch = predict_rsrp_batch(
            model, bs,
            [p.longitude for p in pts], [p.latitude for p in pts],
            [p.altitude for p in pts])
        for i, p in enumerate(pts):
            single = predict_rsrp(model, bs, p)
            assert np.array_equal(single, batch[i])

    def test_tx_power_equivariance(self, world):
        _, bss, samples, table, enc = world
        import copy
        model = build_variant("proposed", 8, enc, seed=8, hidden_width=16)
        bs = bss[1]
        pt = next(s.point for s in samples if s.bs_id == bs.bs_id)
        base = predict_rsrp(model, bs, pt)
        bumped = copy.deepcopy(bs)
        bumped.power.total_tx_power += 3.0
        shifted = predict_rsrp(model, bumped, pt)
        assert np.allclose(shifted - base, 3.0, rtol=0, atol=1e-9)

    def test_exclude_aau_invariance(self, world):
        _, bss, samples, table, _ = world
        import copy
        enc = fit_encoding(table, np.arange(len(table)), exclude_aau=True)
        model = build_variant("proposed", 8, enc, seed=9, hidden_width=8)
        bs = bss[2]
        pt = next(s.point for s in samples if s.bs_id == bs.bs_id)
        base = predict_rsrp(model, bs, pt)
        other = copy.deepcopy(bs)
        other.static.aau_type = "SOMETHING_ELSE"
        assert np.array_equal(predict_rsrp(model, other, pt), base)

    def test_degenerate_point_propagates(self, world):
        _, bss, *_ , enc = world
        from aircov.errors import DegenerateGeometryError
        model = build_variant("proposed", 8, enc, seed=0, hidden_width=8)
        bs = bss[0]
        with pytest.raises(DegenerateGeometryError):
            predict_rsrp(model, bs, SamplePoint(
                bs.location.longitude, bs.location.latitude, 200.0))


class TestFitVariant:
    def test_learns_noiseless_world_smoke(self, world):
        _, bss, samples, table, _ = world
        train, val, test = split_by_bs({b.bs_id for b in bss}, SplitSpec(0.6, seed=0))
        cfg = TrainConfig(max_epochs=40, batch_size=128, seed=0,
                          learning_rate=0.003)
        model, hist = fit_variant(
            table, table.rows_for(train), table.rows_for(val), "proposed",
            cfg, hidden_width=48)
        rows = table.rows_for(test)
        pred = predict_table_rows(model, table, rows)
        err = mae(table.p_raw[rows], pred, table.mask[rows])
        assert err < 4.0  # smoke bound; the acceptance suite pins < 1 dB
        assert len(hist.train_losses) <= 40

    def test_benchmark3_predicts_absolute_rsrp(self, world):
        _, bss, samples, table, _ = world
        train, val, _ = split_by_bs({b.bs_id for b in bss}, SplitSpec(0.6, seed=1))
        cfg = TrainConfig(max_epochs=3, batch_size=128, seed=0)
        model, _ = fit_variant(table, table.rows_for(train),
                               table.rows_for(val), "benchmark3", cfg,
                               hidden_width=16)
        assert not model.shift_target
        rows = table.rows_for(train)[:5]
        pred = predict_table_rows(model, table, rows)
        assert pred.shape == (5, 9)


class TestBundle:
    def test_roundtrip_bit_exact(self, world, tmp_path):
        _, bss, samples, table, enc = world
        model = build_variant("wrong2", 8, enc, seed=11, hidden_width=12)
        path = tmp_path / "model.bin"
        save_model(model, path)
        loaded = load_model(path)
        assert loaded.variant == model.variant
        assert loaded.groups == model.groups
        assert loaded.m_beams == model.m_beams
        for a, b in zip(loaded.nets, model.nets):
            assert a.spec == b.spec
            for wa, wb in zip(a.weights + a.biases, b.weights + b.biases):
                assert np.array_equal(wa, wb)
        bs = bss[0]
        pt = next(s.point for s in samples if s.bs_id == bs.bs_id)
        assert np.array_equal(predict_rsrp(loaded, bs, pt),
                              predict_rsrp(model, bs, pt))

    def test_deterministic_bytes(self, world, tmp_path):
        *_, enc = world
        model = build_variant("proposed", 8, enc, seed=1, hidden_width=8)
        p1, p2 = tmp_path / "m1.bin", tmp_path / "m2.bin"
        save_model(model, p1)
        save_model(model, p2)
        assert p1.read_bytes() == p2.read_bytes()
