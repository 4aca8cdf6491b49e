"""Feature table assembly and train-split encodings.

The assembly step joins measurement rows to their stations, runs the
geometry compression once, and keeps every derivable feature column (both
the compressed set and the raw operational parameters) so that any model
variant can select what it consumes. Encodings are fitted on the training
rows only: z-score constants for numeric columns, one-hot vocabularies for
the categorical ones, and per-output standardization of the regression
targets. Categories unseen at fit time encode to all-zero rows.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .data import BsRecord, MeasurementSample, join_samples
from .errors import InvalidInputError, NotFittedError
from .geo import enu_offset_arrays, relative_geometry, ssb_tx_power

logger = logging.getLogger(__name__)

COMPRESSED_NUMERIC = [
    "delta_theta_h", "delta_theta_v", "distance_m", "carrier_freq_mhz",
    "num_channels",
]
RAW_NUMERIC = [
    "num_channels", "carrier_freq_mhz", "horizontal_azimuth_deg",
    "beam_azimuth_deg", "mech_tilt_deg", "digital_tilt_deg",
    "total_tx_power_dbm", "bandwidth", "east_m", "north_m", "up_m",
]
ALL_NUMERIC = COMPRESSED_NUMERIC + [n for n in RAW_NUMERIC if n not in COMPRESSED_NUMERIC]
CATEGORICAL = ["aau_type", "coverage_scenario"]

TARGET_SHIFTED = "shifted"
TARGET_RAW = "raw"


@dataclass
class FeatureTable:
    """Per-sample feature columns plus both target representations."""

    bs_ids: np.ndarray                  # (n,) station id per row
    columns: dict                       # name -> (n,) array
    y_shift: np.ndarray                 # (n, M+1) rsrp - per-beam tx power
    p_raw: np.ndarray                   # (n, M+1) rsrp as measured
    mask: np.ndarray                    # (n, M+1) bool
    p_t: np.ndarray                     # (n,) per-beam tx power, dBm
    m_beams: int

    def __len__(self):
        return len(self.bs_ids)

    def rows_for(self, bs_ids) -> np.ndarray:
        wanted = set(bs_ids)
        return np.array([i for i, b in enumerate(self.bs_ids) if b in wanted],
                        dtype=int)


def assemble_feature_table(bss: list[BsRecord], samples: list[MeasurementSample],
                           m_beams: int) -> FeatureTable:
    """Join, compress, and tabulate; degenerate-geometry rows are dropped."""
    samples = join_samples(bss, samples)
    if not samples:
        raise InvalidInputError("no joinable samples")
    by_id = {b.bs_id: b for b in bss}
    n = len(samples)

    cols = {name: np.empty(n) for name in ALL_NUMERIC}
    cats = {name: np.empty(n, dtype=object) for name in CATEGORICAL}
    y_raw = np.stack([s.rsrp for s in samples])
    mask = np.stack([s.observed for s in samples])
    p_t = np.empty(n)
    bs_ids = np.array([s.bs_id for s in samples], dtype=object)
    valid = np.zeros(n, dtype=bool)

    order = np.argsort(bs_ids, kind="stable")
    start = 0
    while start < len(order):
        end = start
        bs_id = bs_ids[order[start]]
        while end < len(order) and bs_ids[order[end]] == bs_id:
            end += 1
        idx = order[start:end]
        bs = by_id[bs_id]
        lons = np.array([samples[i].point.longitude for i in idx])
        lats = np.array([samples[i].point.latitude for i in idx])
        alts = np.array([samples[i].point.altitude for i in idx])
        east, north, up = enu_offset_arrays(bs.location, lons, lats, alts)
        dh, dv, dist, ok = relative_geometry(bs.location, bs.orientation,
                                             lons, lats, alts)
        cols["delta_theta_h"][idx] = dh
        cols["delta_theta_v"][idx] = dv
        cols["distance_m"][idx] = dist
        cols["east_m"][idx] = east
        cols["north_m"][idx] = north
        cols["up_m"][idx] = up
        cols["carrier_freq_mhz"][idx] = bs.static.carrier_frequency
        cols["num_channels"][idx] = bs.static.num_channels
        cols["horizontal_azimuth_deg"][idx] = bs.orientation.horizontal_azimuth
        cols["beam_azimuth_deg"][idx] = bs.orientation.beam_azimuth
        cols["mech_tilt_deg"][idx] = bs.orientation.mechanical_down_tilt
        cols["digital_tilt_deg"][idx] = bs.orientation.digital_down_tilt
        cols["total_tx_power_dbm"][idx] = bs.power.total_tx_power
        cols["bandwidth"][idx] = bs.power.bandwidth
        cats["aau_type"][idx] = bs.static.aau_type
        cats["coverage_scenario"][idx] = bs.static.coverage_scenario
        p_t[idx] = ssb_tx_power(bs.power)
        valid[idx] = ok
        start = end

    dropped = int((~valid).sum())
    if dropped:
        logger.warning("dropped %d degenerate-geometry samples", dropped)
        keep = np.flatnonzero(valid)
        cols = {k: v[keep] for k, v in cols.items()}
        cats = {k: v[keep] for k, v in cats.items()}
        y_raw, mask, p_t, bs_ids = y_raw[keep], mask[keep], p_t[keep], bs_ids[keep]

    columns = {**cols, **cats}
    y_shift = y_raw - p_t[:, None]
    return FeatureTable(bs_ids=bs_ids, columns=columns, y_shift=y_shift,
                        p_raw=y_raw, mask=mask, p_t=p_t, m_beams=m_beams)


@dataclass
class FeatureEncoding:
    """Standardization constants and one-hot vocabularies, fitted on train rows."""

    exclude_aau: bool = False
    target_kind: str = TARGET_SHIFTED
    numeric_names: list = field(default_factory=list)
    means: dict = field(default_factory=dict)
    stds: dict = field(default_factory=dict)
    vocab_aau: list = field(default_factory=list)
    vocab_scenario: list = field(default_factory=list)
    target_mean: np.ndarray | None = None
    target_std: np.ndarray | None = None
    fitted: bool = False

    def require_fitted(self):
        if not self.fitted:
            raise NotFittedError("encoding has not been fitted")

    def targets_of(self, table: FeatureTable) -> np.ndarray:
        return table.y_shift if self.target_kind == TARGET_SHIFTED else table.p_raw

    def width_of(self, name: str) -> int:
        if name == "aau_type":
            return 0 if self.exclude_aau else len(self.vocab_aau)
        if name == "coverage_scenario":
            return len(self.vocab_scenario)
        return 1

    def input_dim(self, names) -> int:
        self.require_fitted()
        return sum(self.width_of(n) for n in names)


def fit_encoding(table: FeatureTable, rows, exclude_aau=False,
                 target_kind=TARGET_SHIFTED) -> FeatureEncoding:
    """Fit constants on the given (training) rows of the table."""
    if target_kind not in (TARGET_SHIFTED, TARGET_RAW):
        raise InvalidInputError(f"unknown target kind {target_kind!r}")
    rows = np.asarray(rows, dtype=int)
    if rows.size == 0:
        raise InvalidInputError("cannot fit an encoding on zero rows")
    enc = FeatureEncoding(exclude_aau=exclude_aau, target_kind=target_kind)
    enc.numeric_names = list(ALL_NUMERIC)
    for name in enc.numeric_names:
        col = table.columns[name][rows]
        mean = float(col.mean())
        std = float(col.std())
        enc.means[name] = mean
        enc.stds[name] = std if std > 1e-12 else 1.0

    aau_values = [v for v in table.columns["aau_type"][rows] if v is not None]
    enc.vocab_aau = sorted(set(aau_values))
    enc.vocab_scenario = sorted(set(table.columns["coverage_scenario"][rows]))

    targets = (table.y_shift if target_kind == TARGET_SHIFTED else table.p_raw)[rows]
    mask = table.mask[rows]
    heads = targets.shape[1]
    mean = np.zeros(heads)
    std = np.ones(heads)
    for h in range(heads):
        vals = targets[:, h][mask[:, h]]
        if vals.size:
            mean[h] = vals.mean()
            s = vals.std()
            std[h] = s if s > 1e-12 else 1.0
    enc.target_mean = mean
    enc.target_std = std
    enc.fitted = True
    return enc


def _onehot(values, vocab) -> np.ndarray:
    out = np.zeros((len(values), len(vocab)))
    index = {v: i for i, v in enumerate(vocab)}
    for r, v in enumerate(values):
        i = index.get(v)
        if i is not None:
            out[r, i] = 1.0
    return out


def encode_matrix(enc: FeatureEncoding, columns, names) -> np.ndarray:
    """Build the standardized input matrix for the named features.

    ``columns`` maps feature name to a (n,) array (a FeatureTable's columns
    dict, or constants broadcast by the prediction path).
    """
    enc.require_fitted()
    blocks = []
    n = None
    for name in names:
        col = np.asarray(columns[name])
        n = len(col) if n is None else n
        if name == "aau_type":
            if enc.exclude_aau:
                continue
            blocks.append(_onehot(col, enc.vocab_aau))
        elif name == "coverage_scenario":
            blocks.append(_onehot(col, enc.vocab_scenario))
        else:
            if name not in enc.means:
                raise InvalidInputError(f"encoding has no constants for {name!r}")
            blocks.append(((col.astype(float) - enc.means[name])
                           / enc.stds[name])[:, None])
    if not blocks:
        return np.zeros((n or 0, 0))
    return np.concatenate(blocks, axis=1)


def encode_targets(enc: FeatureEncoding, y: np.ndarray) -> np.ndarray:
    enc.require_fitted()
    return (y - enc.target_mean) / enc.target_std


def decode_targets(enc: FeatureEncoding, y_std: np.ndarray) -> np.ndarray:
    enc.require_fitted()
    return y_std * enc.target_std + enc.target_mean
