"""Feature table assembly and encoding tests."""

import logging

import numpy as np
import pytest

from aircov.data import MeasurementSample, split_by_bs, SplitSpec
from aircov.errors import InvalidInputError, NotFittedError
from aircov.features import (
    ALL_NUMERIC,
    FeatureEncoding,
    assemble_feature_table,
    decode_targets,
    encode_matrix,
    encode_targets,
    fit_encoding,
)
from aircov.geo import SamplePoint, compress, ssb_tx_power
from aircov.synth import default_scenario, generate_dataset


@pytest.fixture(scope="module")
def dataset():
    s = default_scenario(noise_std=1.0)
    bss, samples = generate_dataset(s, 10, 40, seed=21)
    return s, bss, samples


@pytest.fixture(scope="module")
def table(dataset):
    _, bss, samples = dataset
    return assemble_feature_table(bss, samples, m_beams=8)


class TestAssemble:
    def test_row_count_and_columns(self, dataset, table):
        _, _, samples = dataset
        assert len(table) == len(samples)
        for name in ALL_NUMERIC + ["aau_type", "coverage_scenario"]:
            assert name in table.columns
            assert len(table.columns[name]) == len(table)

    def test_geometry_matches_pointwise_compress(self, dataset, table):
        _, bss, samples = dataset
        by_id = {b.bs_id: b for b in bss}
        # rows preserve sample order
        for i in range(0, len(samples), 37):
            s = samples[i]
            cf = compress(by_id[s.bs_id], s.point)
            assert table.columns["delta_theta_h"][i] == cf.delta_theta_h
            assert table.columns["delta_theta_v"][i] == cf.delta_theta_v
            assert table.columns["distance_m"][i] == cf.distance

    def test_target_shift(self, dataset, table):
        _, bss, _ = dataset
        by_id = {b.bs_id: b for b in bss}
        p_t = np.array([ssb_tx_power(by_id[b].power) for b in table.bs_ids])
        assert np.array_equal(table.p_t, p_t)
        assert np.allclose(table.y_shift, table.p_raw - p_t[:, None],
                           rtol=0, atol=0)

    def test_degenerate_rows_dropped(self, dataset, caplog):
        _, bss, samples = dataset
        bs = bss[0]
        bad = MeasurementSample(
            bs.bs_id,
            SamplePoint(bs.location.longitude, bs.location.latitude, 150.0),
            rsrp=np.full(9, -90.0), observed=np.ones(9, dtype=bool))
        with caplog.at_level(logging.WARNING):
            t = assemble_feature_table(bss, list(samples) + [bad], m_beams=8)
        assert len(t) == len(samples)
        assert any("degenerate" in r.message for r in caplog.records)

    def test_rows_for(self, table):
        ids = list(dict.fromkeys(table.bs_ids))[:3]
        rows = table.rows_for(ids)
        assert set(table.bs_ids[rows]) == set(ids)


class TestEncoding:
    def test_standardized_columns(self, table):
        train, _, _ = split_by_bs(set(table.bs_ids), SplitSpec(0.5, seed=1))
        rows = table.rows_for(train)
        enc = fit_encoding(table, rows)
        x = encode_matrix(enc, {k: v[rows] for k, v in table.columns.items()},
                          ALL_NUMERIC)
        means = x.mean(axis=0)
        stds = x.std(axis=0)
        # constant columns standardize to zero and keep std 0; others hit (0, 1)
        for j in range(x.shape[1]):
            assert abs(means[j]) < 1e-6
            assert stds[j] < 1e-6 or abs(stds[j] - 1.0) < 1e-6

    def test_onehot_and_unknown_category(self, table):
        rows = np.arange(len(table))
        enc = fit_encoding(table, rows)
        cols = {
            "aau_type": np.array(["AAU311", "NEW_VENDOR"], dtype=object),
            "coverage_scenario": np.array(["GROUND_WIDE", "GROUND_WIDE"],
                                          dtype=object),
        }
        x = encode_matrix(enc, cols, ["aau_type", "coverage_scenario"])
        width = len(enc.vocab_aau) + len(enc.vocab_scenario)
        assert x.shape == (2, width)
        assert x[0, :len(enc.vocab_aau)].sum() == 1.0
        assert x[1, :len(enc.vocab_aau)].sum() == 0.0  # unseen vendor

    def test_exclude_aau_drops_block(self, table):
        rows = np.arange(len(table))
        enc = fit_encoding(table, rows, exclude_aau=True)
        x = encode_matrix(enc, table.columns, ["aau_type", "coverage_scenario"])
        assert x.shape[1] == len(enc.vocab_scenario)
        assert enc.input_dim(["aau_type"]) == 0

    def test_target_roundtrip(self, table):
        rows = np.arange(len(table))
        enc = fit_encoding(table, rows)
        y = table.y_shift[:25]
        back = decode_targets(enc, encode_targets(enc, y))
        assert np.allclose(back, y, rtol=0, atol=1e-9)

    def test_unfitted_rejected(self, table):
        enc = FeatureEncoding()
        with pytest.raises(NotFittedError):
            encode_matrix(enc, table.columns, ["distance_m"])

    def test_zero_rows_rejected(self, table):
        with pytest.raises(InvalidInputError):
            fit_encoding(table, np.array([], dtype=int))
