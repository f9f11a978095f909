"""Vectorized uplink observation model.

Stacking the K per-slot received vectors column by column and vectorizing
gives

    y = sqrt(P) * mu + n,
    mu = eta1 A1 h1 + eta1 eps2 A2 h2 + eta2 eps1 A3 h3,

with ``A1 = 1_K kron I_M`` and ``A2``/``A3`` carrying the RIS->BS channel
and the reflection/refraction schedules. ``mu`` excludes ``sqrt(P)``; the
Fisher prefactor ``P / sigma^2`` accounts for it.
"""

from dataclasses import dataclass

import numpy as np

from .geometry import LinkGeometry


@dataclass(frozen=True)
class MeasurementMatrices:
    a1: np.ndarray
    a2: np.ndarray
    a3: np.ndarray

    @property
    def shape(self):
        """(K, M, N)."""
        km, m = self.a1.shape
        return km // m, m, self.a2.shape[1]


def schedule_operator(h4, omega_bar):
    """``(omega_bar^T kron I_M)(I_N <> H4)``; block k equals ``H4 diag(omega_bar[:, k])``."""
    m, n = h4.shape
    if omega_bar.shape[0] != n:
        raise ValueError(f"schedule has {omega_bar.shape[0]} rows but H4 has {n} columns")
    k = omega_bar.shape[1]
    return (omega_bar.T[:, None, :] * h4[None, :, :]).reshape(k * m, n)


def build_measurement_matrices(h4, schedule):
    h4 = np.asarray(h4, dtype=complex)
    if h4.ndim != 2:
        raise ValueError("H4 must be an M x N matrix")
    m = h4.shape[0]
    a1 = np.kron(np.ones((schedule.k, 1)), np.eye(m))
    return MeasurementMatrices(
        a1.astype(complex),
        schedule_operator(h4, schedule.omega2_bar),
        schedule_operator(h4, schedule.omega1_bar),
    )


def noiseless_mean(mm, h1, h2, h3, pc):
    w1, w2, w3 = pc.path_weights
    return w1 * (mm.a1 @ h1) + w2 * (mm.a2 @ h2) + w3 * (mm.a3 @ h3)


@dataclass(frozen=True)
class ObservationBundle:
    y: np.ndarray
    matrices: MeasurementMatrices
    power: object
    sigma2: float

    def __post_init__(self):
        if not self.sigma2 > 0:
            raise ValueError("noise variance must be positive")
        if self.y.shape != (self.matrices.a1.shape[0],):
            raise ValueError("observation length does not match the measurement matrices")


def sigma2_from_snr_db(snr_db, p=1.0):
    """Noise variance for SNR = P / sigma^2 given in dB."""
    return p / 10 ** (snr_db / 10)


def complex_noise(rng, size, sigma2):
    """CN(0, sigma2) samples: real and imaginary parts each carry sigma2 / 2."""
    scale = np.sqrt(sigma2 / 2)
    return scale * (rng.standard_normal(size) + 1j * rng.standard_normal(size))


def synthesize_observation(mm, h1, h2, h3, pc, sigma2, seed):
    """Noisy observation ``y = sqrt(P) mu + n``; ``seed`` may be an int, SeedSequence or Generator."""
    rng = np.random.default_rng(seed)
    mean = np.sqrt(pc.p) * noiseless_mean(mm, h1, h2, h3, pc)
    y = mean + complex_noise(rng, mean.size, sigma2)
    return ObservationBundle(y, mm, pc, float(sigma2))


@dataclass(frozen=True)
class H4Perturbation:
    """Half-widths of the uniform errors on the RIS->BS link parameters."""

    d_hat: float = 0.0
    phi_hat: float = 0.0

    def __post_init__(self):
        if self.d_hat < 0 or self.phi_hat < 0:
            raise ValueError("perturbation half-widths must be non-negative")


def perturb_h4(link4, p, seed):
    """Draw ``d + U[-d_hat, d_hat]`` and ``theta, phi + U[-phi_hat, phi_hat]`` independently."""
    rng = np.random.default_rng(seed)
    dd, dtheta, dphi = rng.uniform(-1.0, 1.0, size=3) * np.array([p.d_hat, p.phi_hat, p.phi_hat])
    d = link4.d + dd
    if d <= 0:
        raise ValueError(f"perturbed RIS->BS distance is not positive ({d})")
    return LinkGeometry(link4.theta + dtheta, link4.phi + dphi, d)
