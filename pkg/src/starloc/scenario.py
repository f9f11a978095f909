"""Deployment description shared by the simulator, the bounds and the estimator."""

from dataclasses import dataclass, field, replace
import math

import numpy as np

from . import channel as ch
from .geometry import as_position, jacobian_T, link_from_positions

TABLE1_POSITIONS = {
    "p_b": (0.0, 0.0, 8.0),
    "p_r": (2.0, 2.0, 5.0),
    "p_u1": (5.0, 1.0, 2.0),
    "p_u2": (1.0, 5.0, 2.0),
}


def azimuth_signs(p_b, p_r):
    """Known half-space (sign of the y component) of links 1, 2 and 3.

    Both arrays lie in x-z planes, so they only see ``cos(theta) cos(phi)``
    and ``sin(phi)``; the sign of the y component follows from the
    deployment. The BS faces the RIS, the reflected MS is on the BS side of
    the RIS and the refracted MS on the other side.
    """
    s = 1.0 if as_position(p_r)[1] >= as_position(p_b)[1] else -1.0
    return s, -s, s


@dataclass(frozen=True)
class Scenario:
    p_b: np.ndarray
    p_r: np.ndarray
    p_u1: np.ndarray
    p_u2: np.ndarray
    bs_array: ch.ArrayGeometry
    ris_array: ch.ArrayGeometry
    wavelength: float = field(default_factory=lambda: ch.wavelength_from_ghz(ch.DEFAULT_FC_GHZ))
    pathloss: ch.PathLossModel = field(default_factory=ch.PathLossModel.squared)

    def __post_init__(self):
        for name in ("p_b", "p_r", "p_u1", "p_u2"):
            object.__setattr__(self, name, as_position(getattr(self, name)))
        if not self.wavelength > 0:
            raise ValueError("wavelength must be positive")

    @classmethod
    def table1(cls, m=16, n=36, **kwargs):
        """The reference deployment with square BS (M) and RIS (N) arrays."""
        pos = {k: np.array(v) for k, v in TABLE1_POSITIONS.items()}
        pos.update({k: v for k, v in kwargs.items() if k in pos})
        rest = {k: v for k, v in kwargs.items() if k not in pos}
        return cls(bs_array=ch.ArrayGeometry.square(m), ris_array=ch.ArrayGeometry.square(n), **pos, **rest)

    def with_positions(self, **kw):
        return replace(self, **kw)

    @property
    def m(self):
        return self.bs_array.size

    @property
    def n(self):
        return self.ris_array.size

    def links(self):
        """(BS->MS1, RIS->MS1, RIS->MS2, BS->RIS) link geometries."""
        return (
            link_from_positions(self.p_b, self.p_u1),
            link_from_positions(self.p_r, self.p_u1),
            link_from_positions(self.p_r, self.p_u2),
            link_from_positions(self.p_b, self.p_r),
        )

    def nu(self):
        """The nine channel parameters [theta1, phi1, d1, ..., theta3, phi3, d3]."""
        return np.concatenate([lk.as_array() for lk in self.links()[:3]])

    def channels(self):
        """LoS channels ``(h1, h2, h3, H4)``."""
        l1, l2, l3, l4 = self.links()
        lam, plm = self.wavelength, self.pathloss
        return (
            ch.los_channel(self.bs_array, l1, plm, lam),
            ch.los_channel(self.ris_array, l2, plm, lam),
            ch.los_channel(self.ris_array, l3, plm, lam),
            ch.ris_bs_channel(self.bs_array, self.ris_array, l4, plm, lam),
        )

    def h4(self, link4=None):
        link4 = self.links()[3] if link4 is None else link4
        return ch.ris_bs_channel(self.bs_array, self.ris_array, link4, self.pathloss, self.wavelength)

    def jacobian_T(self):
        return jacobian_T(self)

    def azimuth_signs(self):
        return azimuth_signs(self.p_b, self.p_r)


def random_scenario(rng, m=16, n=16):
    """A random but well-conditioned deployment around a RIS wall at y = 2.

    Elevations stay away from +/- pi/2 and every node is at least a meter
    from the others.
    """
    while True:
        p_b = np.array([rng.uniform(-3, 3), rng.uniform(-2, 0.5), rng.uniform(6, 10)])
        p_r = np.array([rng.uniform(0, 4), 2.0, rng.uniform(4, 6)])
        p_u1 = np.array([rng.uniform(2, 8), rng.uniform(-1, 1.5), rng.uniform(0.5, 3)])
        p_u2 = np.array([rng.uniform(-2, 4), rng.uniform(3, 7), rng.uniform(0.5, 3)])
        sc = Scenario.table1(m=m, n=n, p_b=p_b, p_r=p_r, p_u1=p_u1, p_u2=p_u2)
        links = sc.links()
        if min(lk.d for lk in links) > 1.0 and max(abs(lk.phi) for lk in links) < math.radians(75):
            return sc
