"""STAR-RIS phase schedules and power bookkeeping."""

from dataclasses import dataclass
import math

import numpy as np

from .errors import InsufficientOverheadError


@dataclass(frozen=True)
class PhaseSchedule:
    """Per-slot refraction and reflection phase profiles.

    Attributes
    ----------
    omega1_bar : ndarray, shape (N, K)
        Refraction profile; column k drives slot k.
    omega2_bar : ndarray, shape (N, K)
        Reflection profile.
    """

    omega1_bar: np.ndarray
    omega2_bar: np.ndarray

    def __post_init__(self):
        if self.omega1_bar.shape != self.omega2_bar.shape or self.omega1_bar.ndim != 2:
            raise ValueError("refraction and reflection profiles must both be N x K")
        for w in (self.omega1_bar, self.omega2_bar):
            if not np.allclose(np.abs(w), 1.0, rtol=0, atol=1e-12):
                raise ValueError("STAR-RIS phase profiles must be unit modulus")

    @property
    def n(self):
        return self.omega1_bar.shape[0]

    @property
    def k(self):
        return self.omega1_bar.shape[1]


@dataclass(frozen=True)
class PowerConfig:
    """STAR-RIS power split (eps) and pilot power allocation (eta).

    Only ``eps1`` and ``eta1`` are free; ``eps2 = sqrt(1 - eps1^2)`` and
    ``eta2 = sqrt(1 - eta1^2)``. Boundary values 0 and 1 are allowed so that
    one path can be switched off.
    """

    eps1: float
    eta1: float
    p: float = 1.0

    def __post_init__(self):
        for name in ("eps1", "eta1"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if not self.p > 0:
            raise ValueError(f"total power must be positive, got {self.p}")

    @property
    def eps2(self):
        return math.sqrt(max(0.0, 1.0 - self.eps1**2))

    @property
    def eta2(self):
        return math.sqrt(max(0.0, 1.0 - self.eta1**2))

    @property
    def path_weights(self):
        """Amplitude weights of the direct, reflected and refracted terms (without sqrt(P))."""
        return self.eta1, self.eta1 * self.eps2, self.eta2 * self.eps1

    @property
    def gammas(self):
        s = math.sqrt(self.p)
        return tuple(s * w for w in self.path_weights)


def dft_matrix(k):
    """Unnormalized K-point DFT matrix, entries exp(-j 2 pi m n / K)."""
    idx = np.arange(k)
    return np.exp(-2j * np.pi * np.outer(idx, idx) / k)


def dft_design(n, k):
    """Localization-optimal schedule built from DFT rows.

    With ``W`` the transposed K-point DFT matrix, refraction uses rows
    1..N and reflection rows N+1..2N (0-based; row 0 is the all-ones row
    seen by the direct path). Every used row is orthogonal to the all-ones
    row and to every other used row.
    """
    if n < 1:
        raise ValueError(f"need at least one RIS element, got {n}")
    if k < 2 * n + 1:
        raise InsufficientOverheadError(f"DFT design needs K >= 2N+1 = {2 * n + 1}, got K = {k}")
    w = dft_matrix(k).T
    return PhaseSchedule(w[1 : n + 1, :].copy(), w[n + 1 : 2 * n + 1, :].copy())


def random_design(n, k, seed):
    """Schedule with i.i.d. phases uniform on [0, 2 pi)."""
    if n < 1 or k < 1:
        raise ValueError(f"invalid schedule size {n} x {k}")
    rng = np.random.default_rng(seed)
    phases = rng.uniform(0.0, 2 * np.pi, size=(2, n, k))
    return PhaseSchedule(np.exp(1j * phases[0]), np.exp(1j * phases[1]))


def verify_orthogonality(schedule):
    """Residuals ``||conj(W1) 1||_2`` and ``||conj(W1) W2^T||_F``.

    Both vanish for the DFT design, which makes the refraction subspace
    orthogonal to the direct and reflection subspaces.
    """
    w1c = schedule.omega1_bar.conj()
    residual_ones = float(np.linalg.norm(w1c.sum(axis=1)))
    residual_cross = float(np.linalg.norm(w1c @ schedule.omega2_bar.T))
    return residual_ones, residual_cross
