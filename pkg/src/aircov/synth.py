"""Synthetic ground-truth generator with a known separable propagation model.

Field measurements are proprietary, so experiments run against data drawn
from an explicit model: per-beam received power = beam transmit power +
directional beam gain + log-distance/log-frequency path fading + receiver
gain + optional Gaussian noise, with the reported SS-RSRP being the max
over the beams. Every term is recoverable from the scenario, which makes
generated datasets usable as an exact oracle for the learning pipeline.

Beam gain uses the standard sector-antenna form: a quadratic-in-dB rolloff
from the beam pointing direction, clamped at a fixed attenuation floor.
Each (aau_type, coverage_scenario) pair indexes its own deterministic
pattern family so that beam shapes vary across station types.
"""

import json
from dataclasses import dataclass, field, asdict

import numpy as np

from .data import BsRecord, MeasurementSample
from .errors import InvalidInputError
from .geo import (
    METERS_PER_DEGREE,
    AdditivePower,
    BeamOrientation,
    BeamStatic,
    BsLocation,
    SamplePoint,
    relative_geometry,
    ssb_tx_power,
    wrap_angle,
)


@dataclass
class BeamPattern:
    """Sector beam: pointing offsets relative to the panel normal, 3 dB
    beamwidths, peak gain, and the sidelobe attenuation floor (all dB)."""

    pointing_azimuth_offset: float
    pointing_tilt_offset: float
    hbw_3db: float
    vbw_3db: float
    max_gain: float
    attenuation_floor: float

    def __post_init__(self):
        if not (self.hbw_3db > 0 and self.vbw_3db > 0):
            raise InvalidInputError("beamwidths must be positive")
        if not self.attenuation_floor > 0:
            raise InvalidInputError("attenuation_floor must be positive")


def synthetic_gain(b: BeamPattern, delta_theta_h, delta_theta_v):
    """Directional gain (dBi) of one beam at panel-relative angles (degrees).

    The horizontal offset is wrapped so the pattern is periodic across the
    +-180 deg seam; gain is bounded below by max_gain - attenuation_floor and
    peaks exactly at the pointing offsets.
    """
    dh = wrap_angle(np.asarray(delta_theta_h, float) - b.pointing_azimuth_offset)
    dv = np.asarray(delta_theta_v, float) - b.pointing_tilt_offset
    rolloff = 12.0 * (dh / b.hbw_3db) ** 2 + 12.0 * (dv / b.vbw_3db) ** 2
    return b.max_gain - np.minimum(rolloff, b.attenuation_floor)


@dataclass
class SyntheticScenario:
    """Everything that defines the synthetic world; see default_scenario()."""

    m_beams: int = 8
    alpha: float = -22.0          # dB per decade of distance
    beta: float = -20.0           # dB per decade of carrier frequency
    const_offset: float = 8.0     # dB, keeps RSRP in a plausible dBm band
    noise_std: float = 0.0        # dB
    rx_gain: float = 0.0          # dBi, omnidirectional receiver
    pattern_seed: int = 0
    aau_types: list = field(default_factory=lambda: ["AAU311", "AAU522", "AAU733"])
    channels_by_aau: dict = field(default_factory=lambda: {
        "AAU311": 8, "AAU522": 32, "AAU733": 64})
    coverage_scenarios: list = field(default_factory=lambda: [
        "GROUND_WIDE", "MIXED_SECTOR", "AERIAL_UP"])
    frequencies_mhz: list = field(default_factory=lambda: [2100.0, 2600.0, 3500.0, 4900.0])
    bandwidth_choices: list = field(default_factory=lambda: [1.0, 2.0, 4.0, 8.0])
    power_range_dbm: tuple = (38.0, 46.0)
    height_range_m: tuple = (20.0, 50.0)
    mech_tilt_range_deg: tuple = (0.0, 12.0)
    digital_tilt_range_deg: tuple = (0.0, 3.0)
    beam_azimuth_range_deg: tuple = (-15.0, 15.0)
    altitudes_m: list = field(default_factory=lambda: [150.0, 300.0, 500.0])
    area_center: tuple = (116.40, 39.90)
    area_extent_deg: float = 0.05
    sample_radius_m: tuple = (120.0, 2000.0)
    # (frequency, bandwidth) -> SSB utilization; anything missing = 1.0
    sigma_table: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.m_beams < 1:
            raise InvalidInputError("m_beams must be >= 1")
        if self.noise_std < 0:
            raise InvalidInputError("noise_std must be >= 0")

    def sigma_for(self, frequency_mhz: float, bandwidth: float) -> float:
        return float(self.sigma_table.get((float(frequency_mhz), float(bandwidth)), 1.0))

    def beam_patterns(self, aau_type: str, coverage_scenario: str) -> list[BeamPattern]:
        """Deterministic pattern family for one station type."""
        i_aau = self.aau_types.index(aau_type)
        i_scen = self.coverage_scenarios.index(coverage_scenario)
        rng = np.random.default_rng([self.pattern_seed, i_aau, i_scen])
        spread = rng.uniform(60.0, 120.0)
        # aerial-flavored families point upward, ground families near horizon
        base_tilt = rng.uniform(-2.0, 8.0) + 14.0 * i_scen / max(1, len(self.coverage_scenarios) - 1)
        hbw = rng.uniform(9.0, 26.0)
        vbw = rng.uniform(7.0, 16.0)
        max_gain = rng.uniform(13.0, 19.0)
        floor = rng.uniform(22.0, 28.0)
        patterns = []
        for k in range(self.m_beams):
            az = -spread / 2.0 + spread * (k + 0.5) / self.m_beams
            patterns.append(BeamPattern(
                pointing_azimuth_offset=az + rng.uniform(-2.0, 2.0),
                pointing_tilt_offset=base_tilt + rng.uniform(-2.0, 2.0),
                hbw_3db=hbw * rng.uniform(0.9, 1.1),
                vbw_3db=vbw * rng.uniform(0.9, 1.1),
                max_gain=max_gain + rng.uniform(-1.0, 1.0),
                attenuation_floor=floor,
            ))
        return patterns


def synthetic_path_fading(distance_m, frequency_mhz, s: SyntheticScenario):
    """Log-distance / log-frequency path fading in dB (negative)."""
    d = np.asarray(distance_m, float)
    f = np.asarray(frequency_mhz, float)
    if np.any(d <= 0):
        raise InvalidInputError("distance must be > 0")
    if np.any(f <= 0):
        raise InvalidInputError("frequency must be > 0")
    result = s.alpha * np.log10(d) + s.beta * np.log10(f) + s.const_offset
    if result.ndim == 0:
        return float(result)
    return result


def default_scenario(**overrides) -> SyntheticScenario:
    return SyntheticScenario(**overrides)


_TUPLE_FIELDS = ("power_range_dbm", "height_range_m", "mech_tilt_range_deg",
                 "digital_tilt_range_deg", "beam_azimuth_range_deg",
                 "area_center", "sample_radius_m")


def load_scenario(path) -> SyntheticScenario:
    """Scenario from a JSON config; missing keys keep their defaults.

    sigma_table entries are written as [frequency_mhz, bandwidth, sigma]
    triples since JSON has no tuple keys.
    """
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    known = {f.name for f in SyntheticScenario.__dataclass_fields__.values()}
    unknown = set(raw) - known
    if unknown:
        raise InvalidInputError(f"{path}: unknown scenario keys {sorted(unknown)}")
    if "sigma_table" in raw:
        raw["sigma_table"] = {
            (float(f), float(b)): float(s) for f, b, s in raw["sigma_table"]}
    for key in _TUPLE_FIELDS:
        if key in raw:
            raw[key] = tuple(raw[key])
    return SyntheticScenario(**raw)


def save_scenario(s: SyntheticScenario, path) -> None:
    raw = asdict(s)
    raw["sigma_table"] = [[f, b, v] for (f, b), v in sorted(s.sigma_table.items())]
    for key in _TUPLE_FIELDS:
        raw[key] = list(raw[key])
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(raw, fh, indent=2, sort_keys=True)
        fh.write("\n")


def sample_rsrp(s: SyntheticScenario, bs: BsRecord, lons, lats, alts, rng=None):
    """Noiseless (or noisy, when rng given and noise_std > 0) RSRP rows for
    many points of one station; returns an (n, M+1) array."""
    dh, dv, dist, valid = relative_geometry(
        bs.location, bs.orientation, lons, lats, alts)
    if not np.all(valid):
        raise InvalidInputError("degenerate sample geometry in generator")
    p_t = ssb_tx_power(bs.power)
    fading = synthetic_path_fading(dist, bs.static.carrier_frequency, s)
    patterns = s.beam_patterns(bs.static.aau_type, bs.static.coverage_scenario)
    n = dist.shape[0]
    beams = np.empty((n, s.m_beams))
    for m, pattern in enumerate(patterns):
        beams[:, m] = p_t + synthetic_gain(pattern, dh, dv) + fading + s.rx_gain
    if rng is not None and s.noise_std > 0:
        beams = beams + rng.normal(0.0, s.noise_std, size=beams.shape)
    rows = np.empty((n, s.m_beams + 1))
    rows[:, 0] = beams.max(axis=1)
    rows[:, 1:] = beams
    return rows


def generate_dataset(s: SyntheticScenario, n_bs: int, samples_per_bs: int,
                     seed: int):
    """Draw stations and their measurement samples; deterministic per seed."""
    if n_bs < 1 or samples_per_bs < 1:
        raise InvalidInputError("counts must be >= 1")
    rng = np.random.default_rng(seed)
    lon0, lat0 = s.area_center
    half = s.area_extent_deg / 2.0
    cos_lat0 = float(np.cos(np.radians(lat0)))

    stations: list[BsRecord] = []
    samples: list[MeasurementSample] = []
    for i in range(n_bs):
        lon = rng.uniform(lon0 - half, lon0 + half)
        lat = rng.uniform(lat0 - half, lat0 + half)
        height = rng.uniform(*s.height_range_m)
        aau = str(rng.choice(s.aau_types))
        scenario = str(rng.choice(s.coverage_scenarios))
        freq = float(rng.choice(s.frequencies_mhz))
        bandwidth = float(rng.choice(s.bandwidth_choices))
        bs = BsRecord(
            bs_id=f"BS{i:04d}",
            location=BsLocation(lon, lat, height),
            static=BeamStatic(aau, s.channels_by_aau[aau], scenario, freq),
            orientation=BeamOrientation(
                horizontal_azimuth=rng.uniform(0.0, 360.0),
                beam_azimuth=rng.uniform(*s.beam_azimuth_range_deg),
                mechanical_down_tilt=rng.uniform(*s.mech_tilt_range_deg),
                digital_down_tilt=rng.uniform(*s.digital_tilt_range_deg),
            ),
            power=AdditivePower(
                total_tx_power=rng.uniform(*s.power_range_dbm),
                bandwidth=bandwidth,
                ssb_utilization_sigma=s.sigma_for(freq, bandwidth),
            ),
        )
        stations.append(bs)

        r_min, r_max = s.sample_radius_m
        radius = np.sqrt(rng.uniform(r_min ** 2, r_max ** 2, size=samples_per_bs))
        bearing = np.radians(rng.uniform(0.0, 360.0, size=samples_per_bs))
        east = radius * np.sin(bearing)
        north = radius * np.cos(bearing)
        lons = lon + east / (METERS_PER_DEGREE * cos_lat0)
        lats = lat + north / METERS_PER_DEGREE
        alts = rng.choice(np.asarray(s.altitudes_m, float), size=samples_per_bs)
        rows = sample_rsrp(s, bs, lons, lats, alts, rng=rng)
        observed = np.ones(s.m_beams + 1, dtype=bool)
        for j in range(samples_per_bs):
            samples.append(MeasurementSample(
                bs_id=bs.bs_id,
                point=SamplePoint(float(lons[j]), float(lats[j]), float(alts[j])),
                rsrp=rows[j].copy(),
                observed=observed.copy(),
            ))
    return stations, samples
