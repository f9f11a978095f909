"""Cartesian <-> link-parameter conversions and the position Jacobian.

Angles follow the global frame: for a link from ``anchor`` to ``target``
the unit direction is

    xi(theta, phi) = [cos(theta) cos(phi), sin(theta) cos(phi), sin(phi)]

so ``target = anchor + d * xi``. Azimuth comes from ``atan2`` and therefore
lives in [-pi, pi]; elevation lives in [-pi/2, pi/2].
"""

from dataclasses import dataclass
import math

import numpy as np

from .errors import DegenerateGeometryError

# Elevation closer than this to +/- pi/2 makes the azimuth partials blow up.
_GIMBAL_TOL = 1e-12


def as_position(p):
    """Validate and return a finite float array of shape (3,)."""
    arr = np.asarray(p, dtype=float).reshape(-1)
    if arr.shape != (3,):
        raise ValueError(f"position must have 3 coordinates, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"position must be finite, got {arr}")
    return arr


@dataclass(frozen=True)
class LinkGeometry:
    """Azimuth/elevation/distance triple of one propagation link."""

    theta: float
    phi: float
    d: float

    def __post_init__(self):
        if not (math.isfinite(self.theta) and math.isfinite(self.phi) and math.isfinite(self.d)):
            raise ValueError(f"non-finite link parameters {self}")
        if self.d <= 0:
            raise DegenerateGeometryError(f"link distance must be positive, got {self.d}")
        if not -math.pi <= self.theta <= math.pi:
            raise ValueError(f"azimuth {self.theta} outside [-pi, pi]")
        if not -math.pi / 2 <= self.phi <= math.pi / 2:
            raise ValueError(f"elevation {self.phi} outside [-pi/2, pi/2]")

    def as_array(self):
        return np.array([self.theta, self.phi, self.d])

    @property
    def direction(self):
        return direction_vector(self)


def direction_vector(link):
    """Unit vector ``xi`` pointing along ``link``."""
    ct, st = math.cos(link.theta), math.sin(link.theta)
    cp, sp = math.cos(link.phi), math.sin(link.phi)
    return np.array([ct * cp, st * cp, sp])


def link_from_positions(anchor, target):
    """Link parameters such that ``target = anchor + d * xi(theta, phi)``."""
    delta = as_position(target) - as_position(anchor)
    d = float(np.linalg.norm(delta))
    if d == 0.0:
        raise DegenerateGeometryError("anchor and target coincide")
    # atan2 stays well conditioned near the poles, where asin(z / d) loses digits
    phi = math.atan2(delta[2], math.hypot(delta[0], delta[1]))
    theta = math.atan2(delta[1], delta[0])
    return LinkGeometry(theta, phi, d)


def map_indoor(p_r, link3):
    """Indoor MS position from the RIS anchor and the refraction link."""
    return as_position(p_r) + link3.d * direction_vector(link3)


def outdoor_weight(d1, d2):
    """Weight of the direct-path branch; inversely proportional to its path loss."""
    return d2**2 / (d1**2 + d2**2)


def map_outdoor_weighted(p_b, p_r, link1, link2):
    """Blend the direct (BS) and reflected (RIS) position estimates of the outdoor MS.

    The direct branch ``p_b + d1 xi1`` gets weight ``d2^2 / (d1^2 + d2^2)``,
    the reflected branch ``p_r + d2 xi2`` the complement.
    """
    branch1 = as_position(p_b) + link1.d * direction_vector(link1)
    branch2 = as_position(p_r) + link2.d * direction_vector(link2)
    w1 = outdoor_weight(link1.d, link2.d)
    return w1 * branch1 + (1.0 - w1) * branch2


def link_partials(link):
    """3x3 matrix of partials of (theta, phi, d) with respect to the target position.

    Row ``i`` is the gradient of the i-th link parameter; i.e. the returned
    matrix is d(theta, phi, d) / d(x, y, z).
    """
    if math.pi / 2 - abs(link.phi) < _GIMBAL_TOL:
        raise DegenerateGeometryError("elevation at +/- pi/2: azimuth is undefined")
    ct, st = math.cos(link.theta), math.sin(link.theta)
    cp, sp = math.cos(link.phi), math.sin(link.phi)
    d = link.d
    return np.array(
        [
            [-st / (d * cp), ct / (d * cp), 0.0],
            [-ct * sp / d, -st * sp / d, cp / d],
            [ct * cp, st * cp, sp],
        ]
    )


def jacobian_T(scenario):
    """Jacobian ``T`` with ``T[i, j] = d nu_j / d kappa_i``.

    ``kappa`` stacks the outdoor and indoor MS coordinates (6 entries), ``nu``
    the nine link parameters (theta, phi, d) of the BS->MS1, RIS->MS1 and
    RIS->MS2 links. The result is block diagonal: a 3x6 block for the outdoor
    MS and a 3x3 block for the indoor MS.

    Parameters
    ----------
    scenario : object
        Anything with ``p_b``, ``p_r``, ``p_u1`` and ``p_u2`` attributes.
    """
    link1 = link_from_positions(scenario.p_b, scenario.p_u1)
    link2 = link_from_positions(scenario.p_r, scenario.p_u1)
    link3 = link_from_positions(scenario.p_r, scenario.p_u2)
    T = np.zeros((6, 9))
    T[0:3, 0:3] = link_partials(link1).T
    T[0:3, 3:6] = link_partials(link2).T
    T[3:6, 6:9] = link_partials(link3).T
    return T
