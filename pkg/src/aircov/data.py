"""Table ingestion and station-level dataset splitting.

CSV schemas (UTF-8, '.' decimal, header mandatory):

station table
    bs_id, longitude, latitude, antenna_height_m, aau_type, num_channels,
    coverage_scenario, carrier_frequency_mhz, horizontal_azimuth_deg,
    beam_azimuth_deg, mech_tilt_deg, digital_tilt_deg, total_tx_power_dbm,
    bandwidth, sigma (optional, defaults to 1.0)

measurement table
    bs_id, longitude, latitude, altitude_m, ss_rsrp_dbm,
    ssb1_rsrp_dbm ... ssbM_rsrp_dbm       (empty cell = unobserved)

Splits are formed over whole stations so that no station contributes
samples to more than one of train/validation/test.
"""

import csv
import logging
import math
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import IntegrityError, InvalidSplitError, ParseError
from .geo import AdditivePower, BeamOrientation, BeamStatic, BsLocation, SamplePoint

logger = logging.getLogger(__name__)

BS_COLUMNS = [
    "bs_id", "longitude", "latitude", "antenna_height_m", "aau_type",
    "num_channels", "coverage_scenario", "carrier_frequency_mhz",
    "horizontal_azimuth_deg", "beam_azimuth_deg", "mech_tilt_deg",
    "digital_tilt_deg", "total_tx_power_dbm", "bandwidth", "sigma",
]

_CHANNELS_RE = re.compile(r"^(\d+)T(\d+)R$")


@dataclass
class BsRecord:
    """One station's operational parameters."""

    bs_id: str
    location: BsLocation
    static: BeamStatic
    orientation: BeamOrientation
    power: AdditivePower


@dataclass
class MeasurementSample:
    """One spatial sample: SS-RSRP followed by the M per-beam values."""

    bs_id: str
    point: SamplePoint
    rsrp: np.ndarray      # (M+1,) dBm, unobserved entries are nan
    observed: np.ndarray  # (M+1,) bool


@dataclass
class SplitSpec:
    """Station sampling rate for training; validation share is fixed at 10%."""

    sampling_rate: float
    seed: int
    val_fraction: float = field(default=0.10)

    def __post_init__(self):
        if not 0.0 < self.sampling_rate < 0.9:
            raise InvalidSplitError(
                f"sampling_rate must be in (0, 0.9), got {self.sampling_rate}")
        if self.sampling_rate + self.val_fraction > 1.0 + 1e-12:
            raise InvalidSplitError("sampling_rate + val_fraction exceeds 1")


def parse_num_channels(text: str) -> int:
    """Accepts plain integers or transceiver labels like '32T32R'."""
    text = text.strip()
    m = _CHANNELS_RE.match(text)
    if m:
        return int(m.group(1))
    return int(text)


def _fail(path, row_num, msg):
    raise ParseError(f"{path}:{row_num}: {msg}")


def _float_field(path, row_num, row, col):
    raw = row.get(col, "").strip()
    try:
        value = float(raw)
    except ValueError:
        _fail(path, row_num, f"column {col!r}: cannot parse {raw!r} as a number")
    if not math.isfinite(value):
        _fail(path, row_num, f"column {col!r}: value must be finite")
    return value


def parse_bs_table(path) -> list[BsRecord]:
    """Read and validate a station table; raises ParseError / IntegrityError."""
    records = []
    seen = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            _fail(path, 1, "missing header")
        missing = [c for c in BS_COLUMNS if c != "sigma" and c not in reader.fieldnames]
        if missing:
            _fail(path, 1, f"missing columns: {', '.join(missing)}")
        for row_num, row in enumerate(reader, start=2):
            bs_id = (row.get("bs_id") or "").strip()
            if not bs_id:
                _fail(path, row_num, "empty bs_id")
            if bs_id in seen:
                raise IntegrityError(f"{path}:{row_num}: duplicate bs_id {bs_id!r}")
            seen.add(bs_id)

            lon = _float_field(path, row_num, row, "longitude")
            lat = _float_field(path, row_num, row, "latitude")
            height = _float_field(path, row_num, row, "antenna_height_m")
            if not -180.0 <= lon <= 180.0:
                _fail(path, row_num, f"longitude {lon} out of [-180, 180]")
            if not -90.0 <= lat <= 90.0:
                _fail(path, row_num, f"latitude {lat} out of [-90, 90]")
            if not height > 0:
                _fail(path, row_num, f"antenna_height_m must be > 0, got {height}")

            aau = (row.get("aau_type") or "").strip() or None
            scenario = (row.get("coverage_scenario") or "").strip()
            if not scenario:
                _fail(path, row_num, "empty coverage_scenario")
            try:
                channels = parse_num_channels(row.get("num_channels", ""))
            except ValueError:
                _fail(path, row_num,
                      f"num_channels: cannot parse {row.get('num_channels')!r}")
            if channels <= 0:
                _fail(path, row_num, "num_channels must be positive")
            freq = _float_field(path, row_num, row, "carrier_frequency_mhz")
            if not freq > 0:
                _fail(path, row_num, "carrier_frequency_mhz must be > 0")

            power = _float_field(path, row_num, row, "total_tx_power_dbm")
            bandwidth = _float_field(path, row_num, row, "bandwidth")
            if not bandwidth > 0:
                _fail(path, row_num, "bandwidth must be > 0")
            sigma_raw = (row.get("sigma") or "").strip()
            sigma = float(sigma_raw) if sigma_raw else 1.0
            if not 0 < sigma <= 1:
                _fail(path, row_num, f"sigma {sigma} out of (0, 1]")

            records.append(BsRecord(
                bs_id=bs_id,
                location=BsLocation(lon, lat, height),
                static=BeamStatic(aau, channels, scenario, freq),
                orientation=BeamOrientation(
                    _float_field(path, row_num, row, "horizontal_azimuth_deg"),
                    _float_field(path, row_num, row, "beam_azimuth_deg"),
                    _float_field(path, row_num, row, "mech_tilt_deg"),
                    _float_field(path, row_num, row, "digital_tilt_deg"),
                ),
                power=AdditivePower(power, bandwidth, sigma),
            ))
    return records


def write_bs_table(records: list[BsRecord], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(BS_COLUMNS)
        for r in records:
            writer.writerow([
                r.bs_id, repr(r.location.longitude), repr(r.location.latitude),
                repr(r.location.antenna_height),
                r.static.aau_type if r.static.aau_type is not None else "",
                r.static.num_channels, r.static.coverage_scenario,
                repr(r.static.carrier_frequency),
                repr(r.orientation.horizontal_azimuth),
                repr(r.orientation.beam_azimuth),
                repr(r.orientation.mechanical_down_tilt),
                repr(r.orientation.digital_down_tilt),
                repr(r.power.total_tx_power), repr(r.power.bandwidth),
                repr(r.power.ssb_utilization_sigma),
            ])


def measurement_columns(m_beams: int) -> list[str]:
    return (["bs_id", "longitude", "latitude", "altitude_m", "ss_rsrp_dbm"]
            + [f"ssb{i}_rsrp_dbm" for i in range(1, m_beams + 1)])


def parse_measurements(path, m_beams: int) -> list[MeasurementSample]:
    """Read a measurement table; empty RSRP cells become unobserved entries."""
    samples = []
    columns = measurement_columns(m_beams)
    rsrp_cols = columns[4:]
    inconsistent = 0
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            _fail(path, 1, "missing header")
        missing = [c for c in columns if c not in reader.fieldnames]
        if missing:
            _fail(path, 1, f"missing columns: {', '.join(missing)}")
        for row_num, row in enumerate(reader, start=2):
            bs_id = (row.get("bs_id") or "").strip()
            if not bs_id:
                _fail(path, row_num, "empty bs_id")
            lon = _float_field(path, row_num, row, "longitude")
            lat = _float_field(path, row_num, row, "latitude")
            alt = _float_field(path, row_num, row, "altitude_m")
            if alt < 0:
                _fail(path, row_num, f"altitude_m must be >= 0, got {alt}")

            rsrp = np.full(m_beams + 1, np.nan)
            observed = np.zeros(m_beams + 1, dtype=bool)
            for i, col in enumerate(rsrp_cols):
                raw = (row.get(col) or "").strip()
                if not raw:
                    continue
                try:
                    value = float(raw)
                except ValueError:
                    _fail(path, row_num, f"column {col!r}: bad value {raw!r}")
                if not math.isfinite(value):
                    _fail(path, row_num, f"column {col!r}: value must be finite")
                rsrp[i] = value
                observed[i] = True
            if not observed.any():
                _fail(path, row_num, "row has no observed RSRP values")

            if observed[0] and observed[1:].any():
                best_beam = np.nanmax(rsrp[1:])
                if rsrp[0] < best_beam - 1e-9:
                    inconsistent += 1
                    logger.warning(
                        "%s:%d: SS-RSRP %.2f below best beam %.2f; row retained",
                        path, row_num, rsrp[0], best_beam)

            samples.append(MeasurementSample(
                bs_id=bs_id,
                point=SamplePoint(lon, lat, alt),
                rsrp=rsrp,
                observed=observed,
            ))
    if inconsistent:
        logger.warning("%s: %d rows with SS-RSRP below the best beam", path, inconsistent)
    return samples


def write_measurements(samples: list[MeasurementSample], path, m_beams: int) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(measurement_columns(m_beams))
        for s in samples:
            cells = [s.bs_id, repr(s.point.longitude), repr(s.point.latitude),
                     repr(s.point.altitude)]
            for value, obs in zip(s.rsrp, s.observed):
                cells.append(repr(float(value)) if obs else "")
            writer.writerow(cells)


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def split_by_bs(bs_ids, spec: SplitSpec):
    """Partition station ids into (train, val, test) id lists.

    Sizes are round-half-up fractions of the station count; validation gets
    at least one station. Samples follow their station, so the caller only
    needs the id sets.
    """
    ids = sorted(set(bs_ids))
    n = len(ids)
    if n < 3:
        raise InvalidSplitError(f"need at least 3 stations, got {n}")
    n_train = round_half_up(spec.sampling_rate * n)
    if n_train == 0:
        raise InvalidSplitError(
            f"sampling_rate {spec.sampling_rate} selects no stations out of {n}")
    n_val = max(1, round_half_up(spec.val_fraction * n))
    if n_train + n_val > n:
        raise InvalidSplitError(
            f"train ({n_train}) + val ({n_val}) exceed the {n} stations")
    rng = np.random.default_rng(spec.seed)
    order = [ids[i] for i in rng.permutation(n)]
    train = sorted(order[:n_train])
    val = sorted(order[n_train:n_train + n_val])
    test = sorted(order[n_train + n_val:])
    return train, val, test


def join_samples(bss: list[BsRecord], samples: list[MeasurementSample]):
    """Drop samples whose station id has no record; returns kept samples."""
    known = {b.bs_id for b in bss}
    kept = [s for s in samples if s.bs_id in known]
    dropped = len(samples) - len(kept)
    if dropped:
        logger.warning("dropped %d samples with unknown bs_id", dropped)
    return kept
