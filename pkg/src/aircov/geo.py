"""Geometry and feature compression for station-to-point links.

Absolute station/point coordinates and panel orientation angles are reduced
to the decoupled inputs the predictor consumes: horizontal/vertical angles
relative to the antenna panel normal, slant distance, and the per-beam
transmit power correction.

Conventions: all angles in degrees, horizontal bearings clockwise from true
north, down tilts positive toward the ground. Longitude/latitude offsets are
projected to meters with a local equirectangular approximation (111320 m per
degree, latitude-cosine correction on longitude), which is accurate to well
under 0.1% over the few-kilometer extents this package targets.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGeometryError, InvalidInputError, ShapeError

METERS_PER_DEGREE = 111320.0


@dataclass
class BsLocation:
    """Station position: longitude/latitude in degrees, antenna height in m."""

    longitude: float
    latitude: float
    antenna_height: float


@dataclass
class BeamStatic:
    """Static beam configuration of a station.

    ``aau_type`` may be None when the hardware type is withheld (cross-vendor
    prediction). ``num_channels`` is the transceiver count parsed from labels
    like "32T32R".
    """

    aau_type: str | None
    num_channels: int
    coverage_scenario: str
    carrier_frequency: float  # MHz


@dataclass
class BeamOrientation:
    """Panel pointing angles, degrees, as recorded in operational data."""

    horizontal_azimuth: float
    beam_azimuth: float
    mechanical_down_tilt: float
    digital_down_tilt: float


@dataclass
class AdditivePower:
    """Transmit-power related parameters.

    ``bandwidth`` is the dimensionless count of power-sharing subunits the
    total power divides over; ``ssb_utilization_sigma`` in (0, 1] models the
    broadcast-beam bandwidth utilization (1.0 = no correction).
    """

    total_tx_power: float  # dBm
    bandwidth: float
    ssb_utilization_sigma: float = 1.0


@dataclass
class SamplePoint:
    """A measurement location: lon/lat degrees, altitude meters above ground."""

    longitude: float
    latitude: float
    altitude: float


@dataclass
class EnuOffset:
    """Local east/north/up offset of a point from the antenna top, meters."""

    east: float
    north: float
    up: float


@dataclass
class CompressedFeatures:
    """Decoupled link features: panel-relative angles, distance, carrier."""

    delta_theta_h: float  # degrees, wrapped to (-180, 180]
    delta_theta_v: float  # degrees, not wrapped
    distance: float  # meters
    carrier_frequency: float  # MHz
    beam_static: BeamStatic


def wrap_angle(deg):
    """Wrap an angle (or array of angles) into (-180, 180] degrees."""
    return 180.0 - np.mod(180.0 - np.asarray(deg, dtype=float), 360.0)


def _require_finite(**values):
    for name, v in values.items():
        if not math.isfinite(v):
            raise InvalidInputError(f"{name} must be finite, got {v!r}")


# Array core. The scalar operations below delegate to these so that pointwise
# and batched evaluation run the exact same ufunc chain and agree bitwise.

def enu_offset_arrays(bs: BsLocation, lons, lats, alts):
    """East/north/up offsets (meters) of many points from one station."""
    cos_lat = math.cos(math.radians(bs.latitude))
    east = (np.asarray(lons, float) - bs.longitude) * cos_lat * METERS_PER_DEGREE
    north = (np.asarray(lats, float) - bs.latitude) * METERS_PER_DEGREE
    up = np.asarray(alts, float) - bs.antenna_height
    return east, north, up


def bearing_arrays(east, north, up):
    """Horizontal bearing from north and elevation angle, degrees."""
    horiz = np.hypot(east, north)
    theta_h = wrap_angle(np.degrees(np.arctan2(east, north)))
    theta_v = np.degrees(np.arctan2(up, horiz))
    return theta_h, theta_v


def relative_angle_arrays(theta_h, theta_v, o: BeamOrientation):
    delta_h = wrap_angle(theta_h - o.horizontal_azimuth - o.beam_azimuth)
    delta_v = theta_v - o.mechanical_down_tilt - o.digital_down_tilt
    return delta_h, delta_v


def slant_distance_arrays(east, north, up):
    return np.sqrt(east * east + north * north + up * up)


def relative_geometry(bs_location, bs_orientation, lons, lats, alts):
    """Full compression geometry for many points against one station.

    Returns (delta_theta_h, delta_theta_v, distance, valid). ``valid`` is
    False where the point sits on the antenna vertical axis (east = north = 0)
    or any coordinate is non-finite; values at invalid rows are unusable.
    """
    east, north, up = enu_offset_arrays(bs_location, lons, lats, alts)
    with np.errstate(invalid="ignore"):
        theta_h, theta_v = bearing_arrays(east, north, up)
        delta_h, delta_v = relative_angle_arrays(theta_h, theta_v, bs_orientation)
        dist = slant_distance_arrays(east, north, up)
    valid = (
        np.isfinite(east) & np.isfinite(north) & np.isfinite(up)
        & ((east != 0.0) | (north != 0.0))
    )
    return delta_h, delta_v, dist, valid


# Pointwise operations.

def enu_offset(bs: BsLocation, pt: SamplePoint) -> EnuOffset:
    """Project a sample point into the station's local east/north/up frame."""
    _require_finite(
        bs_longitude=bs.longitude, bs_latitude=bs.latitude,
        bs_antenna_height=bs.antenna_height, pt_longitude=pt.longitude,
        pt_latitude=pt.latitude, pt_altitude=pt.altitude,
    )
    e, n, u = enu_offset_arrays(bs, [pt.longitude], [pt.latitude], [pt.altitude])
    return EnuOffset(float(e[0]), float(n[0]), float(u[0]))


def bearing_angles(d: EnuOffset) -> tuple[float, float]:
    """Bearing from true north and elevation angle of an ENU offset.

    Raises DegenerateGeometryError when the horizontal offset is zero.
    """
    if d.east == 0.0 and d.north == 0.0:
        raise DegenerateGeometryError("zero horizontal offset has no bearing")
    th, tv = bearing_arrays(np.array([d.east]), np.array([d.north]), np.array([d.up]))
    return float(th[0]), float(tv[0])


def relative_angles(theta_h: float, theta_v: float, o: BeamOrientation) -> tuple[float, float]:
    """Angles relative to the panel normal; horizontal wrapped, vertical not."""
    dh, dv = relative_angle_arrays(np.array([theta_h]), np.array([theta_v]), o)
    return float(dh[0]), float(dv[0])


def slant_distance(d: EnuOffset) -> float:
    if d.east == 0.0 and d.north == 0.0 and d.up == 0.0:
        raise DegenerateGeometryError("zero offset has no distance direction")
    return float(slant_distance_arrays(
        np.array([d.east]), np.array([d.north]), np.array([d.up]))[0])


def ssb_tx_power(a: AdditivePower) -> float:
    """Per-beam broadcast transmit power in dBm.

    Total power is split over ``bandwidth`` subunits and corrected for the
    actual utilization ``sigma``.
    """
    if not (a.bandwidth > 0):
        raise InvalidInputError(f"bandwidth must be > 0, got {a.bandwidth!r}")
    if not (0 < a.ssb_utilization_sigma <= 1):
        raise InvalidInputError(
            f"sigma must be in (0, 1], got {a.ssb_utilization_sigma!r}")
    return float(a.total_tx_power
                 - 10.0 * np.log10(a.bandwidth)
                 - 10.0 * np.log10(a.ssb_utilization_sigma))


def compress(bs, pt: SamplePoint) -> CompressedFeatures:
    """Compress one (station, point) pair into decoupled link features.

    ``bs`` is any record exposing .location, .orientation and .static
    (see data.BsRecord).
    """
    _require_finite(pt_longitude=pt.longitude, pt_latitude=pt.latitude,
                    pt_altitude=pt.altitude)
    dh, dv, dist, valid = relative_geometry(
        bs.location, bs.orientation, [pt.longitude], [pt.latitude], [pt.altitude])
    if not valid[0]:
        raise DegenerateGeometryError(
            "sample point lies on the antenna vertical axis")
    return CompressedFeatures(
        delta_theta_h=float(dh[0]),
        delta_theta_v=float(dv[0]),
        distance=float(dist[0]),
        carrier_frequency=bs.static.carrier_frequency,
        beam_static=bs.static,
    )


def target_transform(p, p_t):
    """Shift a measured RSRP vector by the per-beam transmit power (dB)."""
    p = np.asarray(p, dtype=float)
    p_t = np.asarray(p_t, dtype=float)
    if p_t.ndim > 0 and p_t.shape != p.shape:
        raise ShapeError(f"p_t shape {p_t.shape} does not match p {p.shape}")
    return p - p_t


def inverse_target_transform(y, p_t):
    """Exact inverse of target_transform."""
    y = np.asarray(y, dtype=float)
    p_t = np.asarray(p_t, dtype=float)
    if p_t.ndim > 0 and p_t.shape != y.shape:
        raise ShapeError(f"p_t shape {p_t.shape} does not match y {y.shape}")
    return y + p_t
