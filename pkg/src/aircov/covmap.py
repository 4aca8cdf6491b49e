"""Rasterized coverage maps: per-station prediction grids, max-fusion
across stations, point sampling, and CSV/image export.

A grid is an extent anchored at an origin corner (south-west), tiled at a
fixed resolution, evaluated at cell centers at one altitude. Cells outside
a station's prediction radius hold NaN — an explicit no-coverage marker
that fusion and statistics ignore; it is never a magic dBm value.
"""

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .data import BsRecord
from .errors import InvalidInputError, OutOfBoundsError, ParseError
from .geo import METERS_PER_DEGREE
from .model import CoverageModel, predict_rsrp_batch

GRID_META_SUFFIX = ".meta.json"

# fixed ramp over the plausible dBm range; values clamp at the ends
RAMP_VMIN = -130.0
RAMP_VMAX = -60.0
_RAMP_STOPS = [
    (0.00, (8, 29, 88)),      # deep blue, weak signal
    (0.25, (34, 94, 168)),
    (0.50, (65, 182, 196)),
    (0.75, (254, 204, 92)),
    (1.00, (215, 25, 28)),    # red, strong signal
]
SENTINEL_RGB = (255, 255, 255)


@dataclass
class GridSpec:
    """Raster definition: origin corner, metric extent, resolution, altitude."""

    origin_lon: float
    origin_lat: float
    extent_east_m: float
    extent_north_m: float
    resolution_m: float = 10.0
    altitude_m: float = 120.0

    def __post_init__(self):
        if not self.resolution_m > 0:
            raise InvalidInputError("resolution_m must be > 0")
        if not (self.extent_east_m > 0 and self.extent_north_m > 0):
            raise InvalidInputError("extents must be positive")

    @property
    def nx(self) -> int:
        return int(math.ceil(self.extent_east_m / self.resolution_m))

    @property
    def ny(self) -> int:
        return int(math.ceil(self.extent_north_m / self.resolution_m))

    def cell_center_lonlat(self):
        """(ny, nx) arrays of cell-center coordinates."""
        cos_lat = math.cos(math.radians(self.origin_lat))
        east = (np.arange(self.nx) + 0.5) * self.resolution_m
        north = (np.arange(self.ny) + 0.5) * self.resolution_m
        lons = self.origin_lon + east / (METERS_PER_DEGREE * cos_lat)
        lats = self.origin_lat + north / METERS_PER_DEGREE
        return np.broadcast_to(lons, (self.ny, self.nx)).copy(), \
            np.broadcast_to(lats[:, None], (self.ny, self.nx)).copy()

    def point_to_index(self, lon: float, lat: float):
        """(iy, ix) of the cell containing the point; OutOfBounds outside."""
        cos_lat = math.cos(math.radians(self.origin_lat))
        east = (lon - self.origin_lon) * METERS_PER_DEGREE * cos_lat
        north = (lat - self.origin_lat) * METERS_PER_DEGREE
        ix = int(math.floor(east / self.resolution_m))
        iy = int(math.floor(north / self.resolution_m))
        if not (0 <= ix < self.nx and 0 <= iy < self.ny):
            raise OutOfBoundsError(
                f"point ({lon}, {lat}) outside the grid extent")
        return iy, ix


@dataclass
class CoverageGrid:
    """Predicted SS-RSRP per cell; NaN marks no coverage."""

    spec: GridSpec
    values: np.ndarray            # (ny, nx) float, dBm or NaN
    contributing_bs: np.ndarray = field(default=None)  # (ny, nx) object ids

    def __post_init__(self):
        expected = (self.spec.ny, self.spec.nx)
        if self.values.shape != expected:
            raise InvalidInputError(
                f"values shape {self.values.shape} != grid shape {expected}")
        if self.contributing_bs is None:
            self.contributing_bs = np.full(expected, "", dtype=object)
        elif self.contributing_bs.shape != expected:
            raise InvalidInputError("contributing_bs shape mismatch")


def empty_grid(spec: GridSpec) -> CoverageGrid:
    return CoverageGrid(spec=spec, values=np.full((spec.ny, spec.nx), np.nan))


def predict_grid(model: CoverageModel, bs: BsRecord, spec: GridSpec,
                 radius_m: float) -> CoverageGrid:
    """Predicted SS-RSRP at every cell center within radius of the station.

    The cell containing the station itself (zero horizontal offset) stays
    NaN, as does everything beyond the radius.
    """
    grid = empty_grid(spec)
    lons, lats = spec.cell_center_lonlat()
    cos_lat = math.cos(math.radians(bs.location.latitude))
    east = (lons - bs.location.longitude) * cos_lat * METERS_PER_DEGREE
    north = (lats - bs.location.latitude) * METERS_PER_DEGREE
    horiz = np.hypot(east, north)
    inside = (horiz <= radius_m) & (horiz > 0.0)
    if not inside.any():
        return grid
    sel = np.flatnonzero(inside.ravel())
    alts = np.full(sel.size, spec.altitude_m)
    rows = predict_rsrp_batch(model, bs, lons.ravel()[sel], lats.ravel()[sel], alts)
    flat = grid.values.ravel()
    flat[sel] = rows[:, 0]
    grid.values = flat.reshape(grid.values.shape)
    ids = grid.contributing_bs.ravel()
    ids[sel] = bs.bs_id
    grid.contributing_bs = ids.reshape(grid.contributing_bs.shape)
    return grid


def fuse_max(grids: list[CoverageGrid]) -> CoverageGrid:
    """Cell-wise maximum across grids, ignoring NaN; ties keep the earlier
    grid's contributor, so fusing a grid with itself is the identity."""
    if not grids:
        raise InvalidInputError("no grids to fuse")
    spec = grids[0].spec
    for g in grids[1:]:
        if g.spec != spec:
            raise InvalidInputError("grids have mismatched specs")
    fused = CoverageGrid(spec=spec, values=grids[0].values.copy(),
                         contributing_bs=grids[0].contributing_bs.copy())
    for g in grids[1:]:
        take = ~np.isnan(g.values) & (np.isnan(fused.values)
                                      | (g.values > fused.values))
        fused.values[take] = g.values[take]
        fused.contributing_bs[take] = g.contributing_bs[take]
    return fused


def sample_at(grid: CoverageGrid, points) -> np.ndarray:
    """Nearest-cell-center lookup for (n, 2) lon/lat points."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[None, :]
    out = np.empty(pts.shape[0])
    for i, (lon, lat) in enumerate(pts):
        iy, ix = grid.spec.point_to_index(lon, lat)
        out[i] = grid.values[iy, ix]
    return out


def color_ramp_index(value: float) -> int:
    """Position of a dBm value on the fixed 256-step ramp (monotone)."""
    t = (value - RAMP_VMIN) / (RAMP_VMAX - RAMP_VMIN)
    t = min(max(t, 0.0), 1.0)
    return int(round(t * 255))


def color_for_value(value: float) -> tuple[int, int, int]:
    if math.isnan(value):
        return SENTINEL_RGB
    t = color_ramp_index(value) / 255.0
    for (t0, c0), (t1, c1) in zip(_RAMP_STOPS, _RAMP_STOPS[1:]):
        if t <= t1:
            f = 0.0 if t1 == t0 else (t - t0) / (t1 - t0)
            return tuple(int(round(a + f * (b - a))) for a, b in zip(c0, c1))
    return _RAMP_STOPS[-1][1]


def export_csv(grid: CoverageGrid, path) -> None:
    """Cell rows (lon, lat, ss_rsrp_dbm, contributing_bs_id) plus a JSON
    sidecar (path + '.meta.json') echoing the grid spec."""
    lons, lats = grid.spec.cell_center_lonlat()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write("lon,lat,ss_rsrp_dbm,contributing_bs_id\n")
        for iy in range(grid.spec.ny):
            for ix in range(grid.spec.nx):
                v = grid.values[iy, ix]
                cell = "" if math.isnan(v) else repr(float(v))
                fh.write(f"{float(lons[iy, ix])!r},{float(lats[iy, ix])!r},"
                         f"{cell},{grid.contributing_bs[iy, ix]}\n")
    meta = {"format": "coverage-grid", "version": 1, "spec": asdict(grid.spec)}
    with open(str(path) + GRID_META_SUFFIX, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, sort_keys=True, indent=2)
        fh.write("\n")


def import_csv(path) -> CoverageGrid:
    with open(str(path) + GRID_META_SUFFIX, encoding="utf-8") as fh:
        meta = json.load(fh)
    if meta.get("format") != "coverage-grid":
        raise ParseError(f"{path}: missing or foreign grid sidecar")
    spec = GridSpec(**meta["spec"])
    grid = empty_grid(spec)
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "lon,lat,ss_rsrp_dbm,contributing_bs_id":
            raise ParseError(f"{path}: unexpected header {header!r}")
        flat_v = grid.values.ravel()
        flat_b = grid.contributing_bs.ravel()
        for i, line in enumerate(fh):
            parts = line.rstrip("\n").split(",")
            if len(parts) != 4:
                raise ParseError(f"{path}:{i + 2}: expected 4 columns")
            if parts[2]:
                flat_v[i] = float(parts[2])
            flat_b[i] = parts[3]
        grid.values = flat_v.reshape(spec.ny, spec.nx)
        grid.contributing_bs = flat_b.reshape(spec.ny, spec.nx)
    return grid


def export_image(grid: CoverageGrid, path) -> None:
    """Binary PPM heatmap; row 0 of the image is the northmost grid row,
    no-coverage cells render as blank white."""
    ny, nx = grid.spec.ny, grid.spec.nx
    pixels = bytearray()
    for iy in range(ny - 1, -1, -1):
        for ix in range(nx):
            pixels.extend(color_for_value(grid.values[iy, ix]))
    with open(path, "wb") as fh:
        fh.write(f"P6\n{nx} {ny}\n255\n".encode("ascii"))
        fh.write(bytes(pixels))
