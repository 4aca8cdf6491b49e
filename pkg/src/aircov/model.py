"""Model variants: the disentangled predictor, its ablations, and the
wrong-wiring controls.

The proposed architecture routes each independent factor of the link budget
into its own subnet — distance fading, frequency fading, and antenna gain —
and sums the three (M+1)-dimensional outputs. The ablation benchmarks
replace that structure with a single MLP on the compressed features
(benchmark2) or on the raw operational parameters (benchmark3), and the
wrong1..3 variants keep three subnets but permute which features feed
which subnet.

Variants that consume compressed features regress the power-shifted target
(measured RSRP minus per-beam transmit power) and add the shift back at
prediction time; benchmark3 regresses absolute RSRP directly.
"""

from dataclasses import dataclass

import numpy as np

from . import serio
from .data import BsRecord
from .errors import DegenerateGeometryError, InvalidInputError
from .features import (
    TARGET_RAW,
    TARGET_SHIFTED,
    FeatureEncoding,
    FeatureTable,
    decode_targets,
    encode_matrix,
    encode_targets,
    fit_encoding,
)
from .geo import SamplePoint, enu_offset_arrays, relative_geometry, ssb_tx_power
from .nnet import (
    Mlp,
    MlpSpec,
    TrainConfig,
    fused_forward,
    mlp_init,
    train_ensemble,
)
from .nnet import param_count as mlp_param_count

ANTENNA_GAIN_GROUP = ["delta_theta_h", "delta_theta_v", "aau_type",
                      "num_channels", "coverage_scenario"]
COMPRESSED_GROUP = ["delta_theta_h", "delta_theta_v", "distance_m",
                    "carrier_freq_mhz", "aau_type", "num_channels",
                    "coverage_scenario"]
RAW_GROUP = ["aau_type", "num_channels", "coverage_scenario",
             "carrier_freq_mhz", "horizontal_azimuth_deg", "beam_azimuth_deg",
             "mech_tilt_deg", "digital_tilt_deg", "total_tx_power_dbm",
             "bandwidth", "east_m", "north_m", "up_m"]

# subnet order for three-net variants: distance fading, frequency fading,
# antenna gain
VARIANTS = {
    "proposed": dict(
        groups=[["distance_m"], ["carrier_freq_mhz"], ANTENNA_GAIN_GROUP],
        hidden_layers=5, target_kind=TARGET_SHIFTED),
    "benchmark2": dict(
        groups=[COMPRESSED_GROUP], hidden_layers=6, target_kind=TARGET_SHIFTED),
    "benchmark3": dict(
        groups=[RAW_GROUP], hidden_layers=6, target_kind=TARGET_RAW),
    "wrong1": dict(
        groups=[["distance_m"], ["delta_theta_h"],
                ["carrier_freq_mhz", "delta_theta_v", "aau_type",
                 "num_channels", "coverage_scenario"]],
        hidden_layers=5, target_kind=TARGET_SHIFTED),
    "wrong2": dict(
        groups=[["delta_theta_h"], ["carrier_freq_mhz"],
                ["distance_m", "delta_theta_v", "aau_type",
                 "num_channels", "coverage_scenario"]],
        hidden_layers=5, target_kind=TARGET_SHIFTED),
    "wrong3": dict(
        groups=[["delta_theta_h"], ["delta_theta_v"],
                ["distance_m", "carrier_freq_mhz", "aau_type",
                 "num_channels", "coverage_scenario"]],
        hidden_layers=5, target_kind=TARGET_SHIFTED),
}
VARIANT_TAGS = tuple(VARIANTS)


@dataclass
class CoverageModel:
    """A trained (or initialized) variant plus its fitted encoding."""

    variant: str
    m_beams: int
    groups: list
    nets: list
    encoding: FeatureEncoding
    hidden_width: int

    @property
    def shift_target(self) -> bool:
        return self.encoding.target_kind == TARGET_SHIFTED

    # accessors for the three-subnet variants, in the fixed subnet order
    @property
    def distance_net(self) -> Mlp:
        return self.nets[0]

    @property
    def frequency_net(self) -> Mlp:
        return self.nets[1]

    @property
    def antenna_gain_net(self) -> Mlp:
        return self.nets[2]


def build_variant(tag: str, m_beams: int, encoding: FeatureEncoding,
                  seed: int, hidden_width: int = 256) -> CoverageModel:
    """Initialize a variant's subnets against a fitted encoding."""
    if tag not in VARIANTS:
        raise InvalidInputError(
            f"unknown variant {tag!r}; expected one of {', '.join(VARIANTS)}")
    encoding.require_fitted()
    conf = VARIANTS[tag]
    if encoding.target_kind != conf["target_kind"]:
        raise InvalidInputError(
            f"variant {tag} needs target_kind={conf['target_kind']!r}, "
            f"encoding has {encoding.target_kind!r}")
    rng = np.random.default_rng(seed)
    seeds = rng.integers(0, 2 ** 31, size=len(conf["groups"]))
    nets = []
    for group, net_seed in zip(conf["groups"], seeds):
        spec = MlpSpec(
            input_dim=encoding.input_dim(group),
            hidden_layers=conf["hidden_layers"],
            hidden_width=hidden_width,
            output_dim=m_beams + 1,
        )
        nets.append(mlp_init(spec, int(net_seed)))
    return CoverageModel(variant=tag, m_beams=m_beams, groups=conf["groups"],
                         nets=nets, encoding=encoding, hidden_width=hidden_width)


def param_count(model: CoverageModel) -> int:
    return sum(mlp_param_count(net) for net in model.nets)


def group_matrices(model: CoverageModel, columns) -> list:
    return [encode_matrix(model.encoding, columns, group) for group in model.groups]


def forward_fused(model: CoverageModel, cf) -> np.ndarray:
    """Fused network output, in standardized target units, for one
    compressed-feature record (shift-target variants only)."""
    if not model.shift_target:
        raise InvalidInputError(
            "forward_fused consumes compressed features; "
            f"variant {model.variant} runs on raw features")
    columns = {
        "delta_theta_h": np.array([cf.delta_theta_h]),
        "delta_theta_v": np.array([cf.delta_theta_v]),
        "distance_m": np.array([cf.distance]),
        "carrier_freq_mhz": np.array([cf.carrier_frequency]),
        "num_channels": np.array([float(cf.beam_static.num_channels)]),
        "aau_type": np.array([cf.beam_static.aau_type], dtype=object),
        "coverage_scenario": np.array([cf.beam_static.coverage_scenario],
                                      dtype=object),
    }
    xs = group_matrices(model, columns)
    return fused_forward(model.nets, xs)[0]


def predict_rsrp_batch(model: CoverageModel, bs: BsRecord, lons, lats, alts) -> np.ndarray:
    """Predicted RSRP rows (n, M+1) in dBm for many points of one station."""
    lons = np.asarray(lons, float)
    lats = np.asarray(lats, float)
    alts = np.asarray(alts, float)
    dh, dv, dist, valid = relative_geometry(bs.location, bs.orientation,
                                            lons, lats, alts)
    if not np.all(valid):
        raise DegenerateGeometryError(
            "a point lies on the antenna vertical axis")
    n = lons.shape[0]
    columns = {
        "delta_theta_h": dh,
        "delta_theta_v": dv,
        "distance_m": dist,
        "carrier_freq_mhz": np.full(n, bs.static.carrier_frequency),
        "num_channels": np.full(n, float(bs.static.num_channels)),
        "aau_type": np.full(n, bs.static.aau_type, dtype=object),
        "coverage_scenario": np.full(n, bs.static.coverage_scenario, dtype=object),
        "horizontal_azimuth_deg": np.full(n, bs.orientation.horizontal_azimuth),
        "beam_azimuth_deg": np.full(n, bs.orientation.beam_azimuth),
        "mech_tilt_deg": np.full(n, bs.orientation.mechanical_down_tilt),
        "digital_tilt_deg": np.full(n, bs.orientation.digital_down_tilt),
        "total_tx_power_dbm": np.full(n, bs.power.total_tx_power),
        "bandwidth": np.full(n, bs.power.bandwidth),
    }
    if not model.shift_target:
        east, north, up = enu_offset_arrays(bs.location, lons, lats, alts)
        columns["east_m"] = east
        columns["north_m"] = north
        columns["up_m"] = up
    xs = group_matrices(model, columns)
    y_std = fused_forward(model.nets, xs)
    y = decode_targets(model.encoding, y_std)
    if model.shift_target:
        return y + ssb_tx_power(bs.power)
    return y


def predict_rsrp(model: CoverageModel, bs: BsRecord, pt: SamplePoint) -> np.ndarray:
    """Predicted (M+1,) RSRP vector in dBm for one point."""
    return predict_rsrp_batch(model, bs, [pt.longitude], [pt.latitude],
                              [pt.altitude])[0]


def predict_table_rows(model: CoverageModel, table: FeatureTable, rows) -> np.ndarray:
    """Predicted RSRP for rows of an assembled feature table."""
    rows = np.asarray(rows, dtype=int)
    columns = {name: col[rows] for name, col in table.columns.items()}
    xs = group_matrices(model, columns)
    y = decode_targets(model.encoding, fused_forward(model.nets, xs))
    if model.shift_target:
        return y + table.p_t[rows][:, None]
    return y


def fit_variant(table: FeatureTable, train_rows, val_rows, tag: str,
                cfg: TrainConfig, hidden_width: int = 256,
                exclude_aau: bool = False, init_seed: int | None = None):
    """Fit a variant on table rows; returns (model, train history)."""
    conf = VARIANTS.get(tag)
    if conf is None:
        raise InvalidInputError(f"unknown variant {tag!r}")
    encoding = fit_encoding(table, train_rows, exclude_aau=exclude_aau,
                            target_kind=conf["target_kind"])
    model = build_variant(tag, table.m_beams, encoding,
                          seed=cfg.seed if init_seed is None else init_seed,
                          hidden_width=hidden_width)

    def dataset(rows):
        rows = np.asarray(rows, dtype=int)
        columns = {name: col[rows] for name, col in table.columns.items()}
        xs = group_matrices(model, columns)
        y = encode_targets(encoding, encoding.targets_of(table)[rows])
        # unobserved entries carry nan; zero them so they stay out of the
        # matmul path (the mask already excludes them from the loss)
        y = np.where(table.mask[rows], y, 0.0)
        return xs, y, table.mask[rows]

    nets, history = train_ensemble(model.nets, dataset(train_rows),
                                   dataset(val_rows), cfg)
    model.nets = nets
    return model, history


BUNDLE_VERSION = 1


def save_model(model: CoverageModel, path) -> None:
    """One-file bundle: variant, subnet specs, encoding, raw weights."""
    enc = model.encoding
    meta = {
        "kind": "coverage-model",
        "version": BUNDLE_VERSION,
        "variant": model.variant,
        "m_beams": model.m_beams,
        "hidden_width": model.hidden_width,
        "groups": model.groups,
        "specs": [{
            "input_dim": net.spec.input_dim,
            "hidden_layers": net.spec.hidden_layers,
            "hidden_width": net.spec.hidden_width,
            "output_dim": net.spec.output_dim,
            "activation": net.spec.activation,
        } for net in model.nets],
        "encoding": {
            "exclude_aau": enc.exclude_aau,
            "target_kind": enc.target_kind,
            "numeric_names": enc.numeric_names,
            "means": enc.means,
            "stds": enc.stds,
            "vocab_aau": enc.vocab_aau,
            "vocab_scenario": enc.vocab_scenario,
        },
    }
    arrays = [("target_mean", enc.target_mean), ("target_std", enc.target_std)]
    for i, net in enumerate(model.nets):
        for l, (w, b) in enumerate(zip(net.weights, net.biases)):
            arrays.append((f"net{i}_w{l}", w))
            arrays.append((f"net{i}_b{l}", b))
    serio.write_blob(path, meta, arrays)


def load_model(path) -> CoverageModel:
    meta, arrays = serio.read_blob(path)
    if meta.get("kind") != "coverage-model":
        raise InvalidInputError(f"{path} is not a model bundle")
    if meta.get("version") != BUNDLE_VERSION:
        raise InvalidInputError(
            f"{path}: unsupported bundle version {meta.get('version')}")
    enc_meta = meta["encoding"]
    encoding = FeatureEncoding(
        exclude_aau=enc_meta["exclude_aau"],
        target_kind=enc_meta["target_kind"],
        numeric_names=list(enc_meta["numeric_names"]),
        means=dict(enc_meta["means"]),
        stds=dict(enc_meta["stds"]),
        vocab_aau=list(enc_meta["vocab_aau"]),
        vocab_scenario=list(enc_meta["vocab_scenario"]),
        target_mean=arrays["target_mean"],
        target_std=arrays["target_std"],
        fitted=True,
    )
    nets = []
    for i, spec_meta in enumerate(meta["specs"]):
        spec = MlpSpec(**spec_meta)
        n_layers = spec.hidden_layers + 1
        nets.append(Mlp(
            spec,
            [arrays[f"net{i}_w{l}"] for l in range(n_layers)],
            [arrays[f"net{i}_b{l}"] for l in range(n_layers)],
        ))
    return CoverageModel(
        variant=meta["variant"], m_beams=meta["m_beams"],
        groups=[list(g) for g in meta["groups"]], nets=nets,
        encoding=encoding, hidden_width=meta["hidden_width"])
