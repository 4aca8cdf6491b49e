"""Independent reference implementations shared by the test modules.

Everything here is deliberately written against the math module with
explicit loops, separate from the package's vectorized numpy paths, so the
suites compare two genuinely different computations.
"""

import math

import numpy as np

from aircov.geo import BeamOrientation, BeamStatic, BsLocation
from aircov.nnet import MlpSpec, forward_cached, mlp_init


class StationStub:
    """Minimal object exposing .location/.orientation/.static."""

    def __init__(self, location, orientation, static):
        self.location = location
        self.orientation = orientation
        self.static = static


def make_station(lon=116.0, lat=39.9, height=40.0, haz=0.0, baz=0.0,
                 mech=0.0, digital=0.0, freq=3500.0):
    return StationStub(
        BsLocation(lon, lat, height),
        BeamOrientation(haz, baz, mech, digital),
        BeamStatic("AAU-A", 32, "GROUND", freq),
    )


def wrap_deg(x: float) -> float:
    while x <= -180.0:
        x += 360.0
    while x > 180.0:
        x -= 360.0
    return x


def oracle_compress(bs, pt):
    """Step-by-step feature compression: projection, bearings, panel-relative
    angles, slant distance."""
    cos_lat = math.cos(math.radians(bs.location.latitude))
    e = (pt.longitude - bs.location.longitude) * cos_lat * 111320.0
    n = (pt.latitude - bs.location.latitude) * 111320.0
    u = pt.altitude - bs.location.antenna_height
    th = math.degrees(math.atan2(e, n))
    tv = math.degrees(math.atan(u / math.sqrt(e * e + n * n)))
    o = bs.orientation
    dh = wrap_deg(th - o.horizontal_azimuth - o.beam_azimuth)
    dv = tv - o.mechanical_down_tilt - o.digital_down_tilt
    dist = math.sqrt(e * e + n * n + u * u)
    return dh, dv, dist


def random_safe_case(rng, n_nets=1, batch=4, output_dim=3):
    """Random small nets plus inputs whose pre-activations stay clear of the
    rectifier kink, so central finite differences are trustworthy."""
    nets = []
    for _ in range(n_nets):
        spec = MlpSpec(int(rng.integers(1, 5)), int(rng.integers(1, 4)),
                       int(rng.integers(2, 7)), output_dim)
        nets.append(mlp_init(spec, int(rng.integers(0, 2 ** 31))))
    xs = []
    for _ in range(200):
        xs = [rng.normal(size=(batch, net.spec.input_dim)) for net in nets]
        margin = np.inf
        for net, x in zip(nets, xs):
            for b in net.biases:
                b += rng.normal(scale=0.3, size=b.shape)
            _, (_, zs) = forward_cached(net, x)
            margin = min(margin, min(np.abs(z).min() for z in zs))
        if margin > 1e-3:
            break
    y = rng.normal(size=(batch, output_dim))
    mask = rng.random((batch, output_dim)) < 0.8
    if not mask.any():
        mask[0, 0] = True
    return nets, xs, y, mask
