"""LoS channel construction for the BS, the STAR-RIS and the two mobiles.

Array responses use direction-cosine spatial frequencies that agree with
:func:`starloc.geometry.direction_vector`: the phase progression along the
array's x axis is proportional to ``cos(theta) cos(phi)`` and along its z
axis to ``sin(phi)``. Element offsets are centred, running over
``-(n-1)/2 .. (n-1)/2``, and the full response is ``alpha_x kron alpha_z``
(x index outer, z index inner).
"""

from dataclasses import dataclass
import math

import numpy as np
from scipy.optimize import brentq

from .geometry import LinkGeometry

SPEED_OF_LIGHT = 299_792_458.0
DEFAULT_FC_GHZ = 28.0


def wavelength_from_ghz(fc_ghz):
    return SPEED_OF_LIGHT / (fc_ghz * 1e9)


@dataclass(frozen=True)
class ArrayGeometry:
    """Uniform planar array with ``nx`` horizontal and ``nz`` vertical elements.

    ``spacing_x`` and ``spacing_z`` are in meters; ``None`` means half a
    wavelength, resolved when a wavelength is supplied.
    """

    nx: int
    nz: int
    spacing_x: float | None = None
    spacing_z: float | None = None

    def __post_init__(self):
        if int(self.nx) != self.nx or int(self.nz) != self.nz or self.nx < 1 or self.nz < 1:
            raise ValueError(f"element counts must be positive integers, got {self.nx}x{self.nz}")
        for s in (self.spacing_x, self.spacing_z):
            if s is not None and not s > 0:
                raise ValueError(f"element spacing must be positive, got {s}")

    @property
    def size(self):
        return self.nx * self.nz

    @classmethod
    def square(cls, n):
        """Square array with ``n`` elements (``n`` must be a perfect square)."""
        side = math.isqrt(n)
        if side * side != n:
            raise ValueError(f"{n} elements do not form a square array")
        return cls(side, side)

    def phase_steps(self, wavelength):
        """Phase increment per unit spatial frequency along x and z (2 pi d / lambda)."""
        sx = wavelength / 2 if self.spacing_x is None else self.spacing_x
        sz = wavelength / 2 if self.spacing_z is None else self.spacing_z
        return 2 * math.pi * sx / wavelength, 2 * math.pi * sz / wavelength


def centered_offsets(n):
    return np.arange(n) - (n - 1) / 2.0


def spatial_frequencies(link):
    """Direction cosines ``(u_x, u_z)`` seen by an x-z planar array."""
    return math.cos(link.theta) * math.cos(link.phi), math.sin(link.phi)


def steering(nx, nz, omega_x, omega_z):
    """Unit-modulus Kronecker steering vector for phase progressions ``omega_x``, ``omega_z``."""
    ax = np.exp(1j * omega_x * centered_offsets(nx))
    az = np.exp(1j * omega_z * centered_offsets(nz))
    return np.kron(ax, az)


def array_response(geom, link, wavelength):
    """Array response ``alpha_x(theta, phi) kron alpha_z(phi)`` of ``geom`` toward ``link``."""
    kx, kz = geom.phase_steps(wavelength)
    ux, uz = spatial_frequencies(link)
    return steering(geom.nx, geom.nz, kx * ux, kz * uz)


@dataclass(frozen=True)
class PathLossModel:
    """Path-loss ``rho(d)`` (a power ratio, >= 1 for typical links).

    ``kind`` is one of ``"squared"`` (rho = d^2), ``"free_space"``
    (rho = d^2 fc^2 / 10^8.755, fc in kHz) or ``"umi"``
    (rho = 10^2.27 d^3.67 fc^2.6, fc in GHz). ``fc`` is in the unit the
    formula expects.
    """

    kind: str = "squared"
    fc: float | None = None

    def __post_init__(self):
        if self.kind not in ("squared", "free_space", "umi"):
            raise ValueError(f"unknown path-loss model {self.kind!r}")
        if self.kind != "squared" and not (self.fc is not None and self.fc > 0):
            raise ValueError(f"{self.kind} path loss needs a positive carrier frequency")

    @classmethod
    def squared(cls):
        return cls("squared")

    @classmethod
    def free_space(cls, fc_khz):
        return cls("free_space", float(fc_khz))

    @classmethod
    def umi(cls, fc_ghz):
        return cls("umi", float(fc_ghz))

    @property
    def exponent(self):
        return 3.67 if self.kind == "umi" else 2.0

    def rho(self, d):
        if self.kind == "squared":
            return d**2
        if self.kind == "free_space":
            return d**2 * self.fc**2 / 10**8.755
        return 10**2.27 * d**3.67 * self.fc**2.6

    def dlog_rho(self, d):
        """Logarithmic derivative ``rho'(d) / rho(d)``."""
        return self.exponent / d

    def invert(self, rho, lo=1e-9, hi=1e9):
        """Distance at which the path loss equals ``rho``; bisection on the monotone model."""
        if not rho > 0:
            raise ValueError(f"path loss must be positive, got {rho}")
        if self.kind == "squared":
            return math.sqrt(rho)
        f = lambda logd: math.log(self.rho(math.exp(logd))) - math.log(rho)
        return math.exp(brentq(f, math.log(lo), math.log(hi), xtol=1e-15, rtol=4 * np.finfo(float).eps))


def path_gain(link_d, plm, wavelength):
    """Complex scalar ``exp(-j 2 pi d / lambda) / sqrt(rho(d))``."""
    return np.exp(-2j * math.pi * link_d / wavelength) / math.sqrt(plm.rho(link_d))


def los_channel(geom, link, plm, wavelength):
    """LoS channel vector between a single-antenna node and the array ``geom``."""
    return path_gain(link.d, plm, wavelength) * array_response(geom, link, wavelength)


def los_channel_jacobian(geom, link, plm, wavelength):
    """LoS channel and its partials with respect to (theta, phi, d).

    Returns
    -------
    h : ndarray, shape (n,)
    dh : ndarray, shape (n, 3)
        Columns are dh/dtheta, dh/dphi, dh/dd.
    """
    h = los_channel(geom, link, plm, wavelength)
    kx, kz = geom.phase_steps(wavelength)
    ox = np.repeat(centered_offsets(geom.nx), geom.nz)
    oz = np.tile(centered_offsets(geom.nz), geom.nx)
    ct, st = math.cos(link.theta), math.sin(link.theta)
    cp, sp = math.cos(link.phi), math.sin(link.phi)
    dux_dtheta = -st * cp
    dux_dphi = -ct * sp
    duz_dphi = cp
    dh = np.empty((h.size, 3), dtype=complex)
    dh[:, 0] = 1j * kx * ox * dux_dtheta * h
    dh[:, 1] = 1j * (kx * ox * dux_dphi + kz * oz * duz_dphi) * h
    dh[:, 2] = (-2j * math.pi / wavelength - 0.5 * plm.dlog_rho(link.d)) * h
    return h, dh


def ris_bs_channel(bs_geom, ris_geom, link4, plm, wavelength):
    """Rank-one RIS->BS channel for parallel, unrotated arrays."""
    a_bs = array_response(bs_geom, link4, wavelength)
    a_ris = array_response(ris_geom, link4, wavelength)
    return path_gain(link4.d, plm, wavelength) * np.outer(a_bs, a_ris.conj())


@dataclass(frozen=True)
class MpcComponent:
    """A non-LoS path described relative to its LoS link."""

    distance_scale: float
    theta_offset: float
    phi_offset: float

    def __post_init__(self):
        if not self.distance_scale > 1:
            raise ValueError("an MPC must be longer (hence weaker) than the LoS path")

    def perturb(self, link):
        return LinkGeometry(
            link.theta + self.theta_offset,
            link.phi + self.phi_offset,
            link.d * self.distance_scale,
        )


def mpc_case(name):
    """The two-component multipath profiles: ``"i"`` (10x distance) or ``"ii"`` (5x)."""
    scale = {"i": 10.0, "ii": 5.0}.get(name)
    if scale is None:
        raise ValueError(f"unknown MPC case {name!r}")
    return [MpcComponent(scale, math.pi / 6, math.pi / 6), MpcComponent(scale, math.pi / 3, math.pi / 3)]


def add_mpc(h, link, comps, geom, plm, wavelength):
    """Add one LoS-shaped term per multipath component to ``h``.

    Raises ``ValueError`` if a perturbed angle leaves the valid range.
    """
    out = np.array(h, dtype=complex, copy=True)
    for comp in comps:
        out += los_channel(geom, comp.perturb(link), plm, wavelength)
    return out
