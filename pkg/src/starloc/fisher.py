"""Fisher information, CRLB position bounds and the schedule design objective."""

from dataclasses import dataclass

import numpy as np

from . import channel as ch
from .errors import UnidentifiableError
from .geometry import LinkGeometry
from .signal import build_measurement_matrices

PARAM_NAMES = ("theta1", "phi1", "d1", "theta2", "phi2", "d2", "theta3", "phi3", "d3")
KAPPA_NAMES = ("x_u1", "y_u1", "z_u1", "x_u2", "y_u2", "z_u2")
MAX_CONDITION = 1e12


def links_from_nu(nu):
    nu = np.asarray(nu, dtype=float)
    if nu.shape != (9,):
        raise ValueError(f"nu must have nine entries, got shape {nu.shape}")
    return tuple(LinkGeometry(*nu[3 * i : 3 * i + 3]) for i in range(3))


def channel_jacobians(nu, scenario):
    """Per-link channel partials ``Q1`` (M x 3), ``Q2``, ``Q3`` (N x 3)."""
    l1, l2, l3 = links_from_nu(nu)
    lam, plm = scenario.wavelength, scenario.pathloss
    _, q1 = ch.los_channel_jacobian(scenario.bs_array, l1, plm, lam)
    _, q2 = ch.los_channel_jacobian(scenario.ris_array, l2, plm, lam)
    _, q3 = ch.los_channel_jacobian(scenario.ris_array, l3, plm, lam)
    return q1, q2, q3


def mean_jacobian(nu, mm, pc, scenario):
    """``d mu / d nu`` as a KM x 9 complex matrix."""
    q1, q2, q3 = channel_jacobians(nu, scenario)
    w1, w2, w3 = pc.path_weights
    return np.hstack([w1 * (mm.a1 @ q1), w2 * (mm.a2 @ q2), w3 * (mm.a3 @ q3)])


def fisher_nu(jac, p, sigma2):
    """``J(nu) = (P / sigma^2) Re(jac^H jac)``."""
    j = (p / sigma2) * np.real(jac.conj().T @ jac)
    return 0.5 * (j + j.T)


def position_fim(j_nu, t):
    """``J(kappa) = T J(nu) T^T``."""
    if t.shape[1] != j_nu.shape[0]:
        raise ValueError(f"T is {t.shape} but J(nu) is {j_nu.shape}")
    j = t @ j_nu @ t.T
    return 0.5 * (j + j.T)


def guarded_inverse(j, names=None):
    """Inverse of a symmetric PSD matrix through its eigendecomposition.

    Raises :class:`UnidentifiableError` when the condition number exceeds
    ``MAX_CONDITION``; the error carries the near-null eigenvector.
    """
    evals, evecs = np.linalg.eigh(j)
    top = evals[-1]
    cond = np.inf if evals[0] <= 0 else top / evals[0]
    if not top > 0 or cond > MAX_CONDITION:
        v = evecs[:, 0]
        if names is not None:
            lead = ", ".join(f"{names[i]}={v[i]:+.3f}" for i in np.argsort(-np.abs(v))[:3])
            detail = f" (near-null direction dominated by {lead})"
        else:
            detail = ""
        raise UnidentifiableError(f"Fisher matrix is singular, condition {cond:.3g}{detail}", v, cond)
    return (evecs / evals) @ evecs.T


@dataclass(frozen=True)
class CrlbReport:
    rmse_u1: float
    rmse_u2: float
    param_bounds: np.ndarray | None = None

    def __post_init__(self):
        for v in (self.rmse_u1, self.rmse_u2):
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"RMSE bound must be positive and finite, got {v}")


def crlb_rmse(j_kappa, j_nu=None):
    """Position RMSE bounds ``sqrt(tr(J^-1(kappa)[block]))`` for both mobiles.

    If ``j_nu`` is given, the per-parameter standard-deviation bounds
    ``sqrt(diag(J^-1(nu)))`` are attached as well.
    """
    cov = guarded_inverse(j_kappa, KAPPA_NAMES)
    params = None
    if j_nu is not None:
        params = np.sqrt(np.diag(guarded_inverse(j_nu, PARAM_NAMES)))
    return CrlbReport(
        float(np.sqrt(np.trace(cov[:3, :3]))),
        float(np.sqrt(np.trace(cov[3:, 3:]))),
        params,
    )


def _projector(a):
    q, _ = np.linalg.qr(a)
    return q @ q.T


def block_inverse_bounds(jac, t, p, sigma2):
    """Position bounds through the projection (Schur complement) form of ``J^-1(kappa)``.

    This is an independent route to :func:`crlb_rmse`. Because the Fisher
    matrix uses ``Re{.}``, the Jacobians are stacked as real matrices
    ``[Re; Im]`` so that the projection identity holds exactly.
    """
    g_hat = jac @ t.T.astype(complex)
    g_r = np.vstack([g_hat.real, g_hat.imag])
    g1, g2 = g_r[:, :3], g_r[:, 3:]
    eye = np.eye(g_r.shape[0])
    b1 = g1.T @ (eye - _projector(g2)) @ g1
    b2 = g2.T @ (eye - _projector(g1)) @ g2
    scale = sigma2 / p
    return (
        float(np.sqrt(scale * np.trace(np.linalg.inv(b1)))),
        float(np.sqrt(scale * np.trace(np.linalg.inv(b2)))),
    )


def design_blocks(scenario, mm, pc, nu=None):
    """``G1_hat = G1 T1^H`` (outdoor) and ``G2_hat = G2 T2^H`` (indoor)."""
    nu = scenario.nu() if nu is None else nu
    jac = mean_jacobian(nu, mm, pc, scenario)
    t = scenario.jacobian_T()
    return jac[:, :6] @ t[:3, :6].T, jac[:, 6:] @ t[3:, 6:].T


def principal_angle_objective(scenario, mm, pc):
    """``||G2_hat^H G1_hat||_F``; zero when the two position subspaces are orthogonal."""
    g1, g2 = design_blocks(scenario, mm, pc)
    return float(np.linalg.norm(g2.conj().T @ g1))


def position_crlb(scenario, schedule, pc, sigma2, h4=None):
    """End-to-end CRLB for a scenario, schedule and noise level."""
    h4 = scenario.h4() if h4 is None else h4
    mm = build_measurement_matrices(h4, schedule)
    jac = mean_jacobian(scenario.nu(), mm, pc, scenario)
    j_nu = fisher_nu(jac, pc.p, sigma2)
    j_kappa = position_fim(j_nu, scenario.jacobian_T())
    return crlb_rmse(j_kappa, j_nu)
