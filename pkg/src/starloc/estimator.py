"""Two-step localizer: per-channel ANM recovery, then geometric mapping.

For each channel ``i`` the other two paths are removed by projecting the
observation onto the left null space of their measurement matrices. The
surviving sparsity-one channel is denoised by atomic norm minimization
(solved by ADMM on its semidefinite form), its angles are read off with
root-MUSIC on each array axis and its distance from the recovered power.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from . import channel as ch
from . import kernels
from .errors import InsufficientOverheadError, InvalidFrequencyError
from .geometry import LinkGeometry, as_position, direction_vector, outdoor_weight
from .scenario import azimuth_signs
from .signal import build_measurement_matrices

# Tolerance on the visible region |u| <= 1 before a frequency is declared invalid.
FREQ_CLAMP_TOL = 1e-6
# sigma_2 / sigma_1 of the reshaped channel above which the rank-one model is suspect.
MISMATCH_WARN = 0.5


@dataclass(frozen=True)
class NullingOperator:
    """Rows form an orthonormal basis of the left null space of the interferers."""

    u: np.ndarray
    target: int

    @property
    def rank(self):
        return self.u.shape[0]

    def apply(self, v):
        return self.u @ v


def _interferers(target, mm):
    mats = {1: mm.a1, 2: mm.a2, 3: mm.a3}
    if target not in mats:
        raise ValueError(f"target channel must be 1, 2 or 3, got {target}")
    return mats[target], np.hstack([mats[j] for j in (1, 2, 3) if j != target])


def nulling_operator(target, mm, rcond=1e-10):
    """Nulling matrix ``U_target`` from the SVD of the two interfering matrices."""
    _, other = _interferers(target, mm)
    km, cols = other.shape
    if km <= cols:
        raise InsufficientOverheadError(f"KM = {km} observations cannot null {cols} interfering columns")
    left, s, _ = np.linalg.svd(other, full_matrices=True)
    rank = int(np.count_nonzero(s > rcond * s[0])) if s[0] > 0 else 0
    null = left[:, rank:]
    if null.shape[1] == 0:
        raise InsufficientOverheadError("interferers span the whole observation space")
    return NullingOperator(np.ascontiguousarray(null.conj().T), target)


@dataclass(frozen=True)
class AnmConfig:
    """ANM solver settings.

    ``mu_scale`` multiplies ``sigma * sqrt(T log T)`` to form the atomic-norm
    weight; ``step`` is the initial ADMM penalty of the normalized problem
    (rebalanced during the run). With ``amplitude_refit`` the complex gain
    of the recovered atom is re-fitted by least squares on the nulled data
    before the distance is read off, which removes the shrinkage the
    atomic-norm penalty puts on ``||h||``.
    """

    mu_scale: float = 1.0
    solver_tol: float = 1e-7
    max_iters: int = 50000
    step: float = 1.0
    backend: str | None = None
    amplitude_refit: bool = True

    def __post_init__(self):
        for name in ("mu_scale", "solver_tol", "step"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")

    def mu(self, sigma, t_dim):
        return self.mu_scale * sigma * math.sqrt(t_dim * math.log(t_dim))


@dataclass(frozen=True)
class ToeplitzCertificate:
    """Two-level Toeplitz lag array and scalar ``t`` of the ANM semidefinite form."""

    lags: np.ndarray
    t: float

    @property
    def dims(self):
        return (self.lags.shape[0] + 1) // 2, (self.lags.shape[1] + 1) // 2

    def toeplitz(self):
        nx, nz = self.dims
        return kernels.python_backend.toeplitz_assemble(self.lags, nx, nz)

    def block(self, h):
        tp = self.toeplitz()
        size = tp.shape[0]
        out = np.empty((size + 1, size + 1), dtype=complex)
        out[:size, :size] = tp
        out[:size, size] = h
        out[size, :size] = np.conj(h)
        out[size, size] = self.t
        return out

    def is_psd(self, h, rtol=1e-8):
        blk = self.block(h)
        mineig = np.linalg.eigvalsh(blk)[0]
        return mineig >= -rtol * max(np.trace(blk).real, np.finfo(float).tiny)

    def atomic_norm_bound(self):
        """Objective value ``Tr(Toep)/(2T) + t/2``; an upper bound on the atomic norm."""
        return 0.5 * (self.lags[self.lags.shape[0] // 2, self.lags.shape[1] // 2].real + self.t)


@dataclass(frozen=True)
class AnmResult:
    h_hat: np.ndarray
    certificate: ToeplitzCertificate
    converged: bool
    iterations: int
    mu: float
    residual: float
    history: list = field(default_factory=list, repr=False)


def _solve_reduced(r, b, mu, cfg, dims, record=False):
    """ANM for ``min mu ||h||_A + 1/2 ||b - r h||^2`` with square ``r``."""
    nx, nz = dims
    size = nx * nz
    if r.shape != (size, size):
        raise ValueError(f"reduced operator must be {size}x{size}, got {r.shape}")
    s = float(np.linalg.norm(b))
    if s == 0.0:
        lags = np.zeros((2 * nx - 1, 2 * nz - 1), dtype=complex)
        return AnmResult(np.zeros(size, dtype=complex), ToeplitzCertificate(lags, 0.0), True, 0, mu, 0.0)
    c = float(np.linalg.norm(r, 2))
    rn = r / c
    bn = b / s
    gram = rn.conj().T @ rn
    evals, evecs = np.linalg.eigh(0.5 * (gram + gram.conj().T))
    rhb = rn.conj().T @ bn
    backend = kernels.get_backend(cfg.backend)
    g, lags, t, iters, converged, history = backend.admm_solve(
        np.ascontiguousarray(np.maximum(evals, 0.0)),
        np.ascontiguousarray(evecs),
        np.ascontiguousarray(rhb),
        mu / (c * s),
        cfg.step,
        nx,
        nz,
        cfg.solver_tol,
        cfg.max_iters,
        record,
        1.0,
    )
    scale = s / c
    h = scale * np.asarray(g)
    residual = float(np.linalg.norm(b - r @ h))
    cert = _feasible_certificate(ToeplitzCertificate(scale * np.asarray(lags), scale * float(t)), h)
    return AnmResult(h, cert, bool(converged), int(iters), mu, residual, list(history))


def _feasible_certificate(cert, h):
    """Lift the diagonal of an almost-PSD certificate until the block is PSD.

    ADMM returns the structured iterate, which is PSD only up to the solver
    tolerance. Raising the centre lag and ``t`` by the most negative
    eigenvalue adds a multiple of the identity, keeps the Toeplitz form and
    costs at most that eigenvalue in the objective.
    """
    mineig = float(np.linalg.eigvalsh(cert.block(h))[0])
    if mineig >= 0:
        return cert
    shift = -mineig * (1 + 1e-9)
    lags = cert.lags.copy()
    lags[lags.shape[0] // 2, lags.shape[1] // 2] += shift
    return ToeplitzCertificate(lags, cert.t + shift)


def anm_denoise(y_proj, a_proj, gamma, cfg, dims, sigma, record=False):
    """Atomic-norm denoising of ``y_proj ~ gamma * a_proj @ h + noise``.

    Parameters
    ----------
    y_proj : ndarray, shape (R,)
        Interference-nulled observation ``U_i y``.
    a_proj : ndarray, shape (R, T)
        Nulled measurement matrix ``U_i A_i``.
    gamma : float
        Known amplitude of the path (``sqrt(P)`` times its power weights).
    cfg : AnmConfig
    dims : (int, int)
        Array shape ``(nx, nz)`` with ``nx * nz = T``.
    sigma : float
        Noise standard deviation, used for the regularization weight.
    """
    nx, nz = dims
    if a_proj.shape[1] != nx * nz:
        raise ValueError("array dimensions do not match the channel length")
    if not gamma > 0:
        raise ValueError("path amplitude gamma must be positive")
    q, r = np.linalg.qr(gamma * a_proj)
    b = q.conj().T @ y_proj
    return _solve_reduced(r, b, cfg.mu(sigma, nx * nz), cfg, dims, record)


def _polyroot_frequency(c):
    """Root-MUSIC on the projector ``c`` onto the noise subspace, with Newton polishing.

    The null spectrum ``f(w) = a(w)^H c a(w)`` is a trigonometric polynomial
    with coefficients ``p_l`` (sums over the l-th diagonal). Its root
    nearest the unit circle from inside gives the initial frequency, which
    is refined by Newton steps on ``f'`` since the noiseless root is double.
    """
    n = c.shape[0]
    lags = np.arange(-(n - 1), n)
    p = np.array([np.trace(c, offset=int(l)) for l in lags])
    roots = np.roots(p[::-1])
    roots = roots[np.isfinite(roots)]
    inside = roots[np.abs(roots) <= 1.0]
    pool = inside if inside.size else roots
    z = pool[np.argmin(np.abs(np.abs(pool) - 1.0))]
    w = float(np.angle(z))
    for _ in range(50):
        e = np.exp(1j * w * lags)
        d1 = np.real(np.sum(1j * lags * p * e))
        d2 = np.real(np.sum(-(lags**2) * p * e))
        if not d2 > 0:
            break
        step = d1 / d2
        w -= step
        if abs(step) < 1e-15:
            break
    return float(np.angle(np.exp(1j * w)))


def root_music_frequency(v):
    """Spatial frequency ``w`` of a single Vandermonde component ``v[m] ~ exp(j w m)``."""
    v = np.asarray(v, dtype=complex)
    n = v.size
    if n < 2:
        return 0.0
    r = np.outer(v, v.conj())
    r = 0.5 * (r + np.flipud(np.fliplr(r.conj())))
    _, evecs = np.linalg.eigh(r)
    en = evecs[:, :-1]
    return _polyroot_frequency(en @ en.conj().T)


@dataclass(frozen=True)
class AngleEstimate:
    theta: float
    phi: float
    mismatch_ratio: float

    @property
    def rank1_warning(self):
        return self.mismatch_ratio > MISMATCH_WARN


def frequencies_to_angles(omega_x, omega_z, phase_steps=(math.pi, math.pi), azimuth_sign=1.0):
    """Invert ``omega_x = kx cos(theta) cos(phi)``, ``omega_z = kz sin(phi)``."""
    kx, kz = phase_steps
    ux, uz = omega_x / kx, omega_z / kz
    if abs(uz) > 1 + FREQ_CLAMP_TOL:
        raise InvalidFrequencyError(f"vertical direction cosine {uz:.6g} outside [-1, 1]")
    uz = max(-1.0, min(1.0, uz))
    phi = math.asin(uz)
    cphi = math.cos(phi)
    ctheta = ux / cphi if cphi > 0 else 0.0
    if abs(ctheta) > 1 + FREQ_CLAMP_TOL:
        raise InvalidFrequencyError(f"cos(theta) = {ctheta:.6g} outside [-1, 1]")
    theta = math.acos(max(-1.0, min(1.0, ctheta)))
    return math.copysign(theta, azimuth_sign) if theta != 0 else 0.0, phi


def extract_angles(h_hat, dims, phase_steps=(math.pi, math.pi), azimuth_sign=1.0):
    """Azimuth and elevation of a (nearly) rank-one UPA channel.

    ``h_hat`` is reshaped to ``nx x nz``; the dominant singular vectors carry
    the x and z Vandermonde factors, each resolved by root-MUSIC on its
    forward-backward averaged covariance. ``phase_steps`` are the
    ``2 pi spacing / lambda`` factors of the array (pi for half-wavelength).
    """
    nx, nz = dims
    h_hat = np.asarray(h_hat, dtype=complex)
    if h_hat.size != nx * nz:
        raise ValueError("channel length does not match the array dimensions")
    if not np.any(h_hat):
        raise ValueError("cannot extract angles from a zero channel")
    mat = h_hat.reshape(nx, nz)
    left, s, vh = np.linalg.svd(mat)
    ratio = float(s[1] / s[0]) if s.size > 1 else 0.0
    wx = root_music_frequency(left[:, 0])
    wz = root_music_frequency(vh[0])
    theta, phi = frequencies_to_angles(wx, wz, phase_steps, azimuth_sign)
    return AngleEstimate(theta, phi, ratio)


def refit_amplitude(r, b, atom):
    """Least-squares gain ``beta`` of ``b ~ r @ (beta * atom)``; returns ``beta * atom``."""
    ra = r @ atom
    energy = float(np.vdot(ra, ra).real)
    if energy <= 0:
        raise ValueError("atom is annihilated by the reduced operator")
    return (np.vdot(ra, b) / energy) * atom


def estimate_distance(h_hat, t_dim, plm):
    """Least-squares distance from the recovered channel power: ``rho(d) = T / ||h||^2``."""
    power = float(np.vdot(h_hat, h_hat).real)
    if power <= 0:
        raise ValueError("cannot estimate a distance from a zero channel")
    return plm.invert(t_dim / power)


@dataclass(frozen=True)
class ChannelEstimate:
    h_hat: np.ndarray
    link_hat: LinkGeometry


@dataclass(frozen=True)
class ChannelDiagnostics:
    index: int
    converged: bool = False
    iterations: int = 0
    residual: float = float("nan")
    mismatch_ratio: float = float("nan")
    error: str | None = None

    @property
    def ok(self):
        return self.error is None

    @property
    def rank1_warning(self):
        return self.mismatch_ratio > MISMATCH_WARN


@dataclass(frozen=True)
class LocalizationResult:
    p_u1: np.ndarray | None
    p_u2: np.ndarray | None
    estimates: tuple
    diagnostics: tuple
    outdoor_branch: str

    @property
    def converged(self):
        """Both positions produced and every ANM solve converged."""
        return (
            self.p_u1 is not None
            and self.p_u2 is not None
            and all(d.converged for d in self.diagnostics if d.ok)
        )


class Localizer:
    """Precomputes the nulling and reduction steps for one (H4, schedule) pair.

    Parameters
    ----------
    h4_assumed : ndarray, shape (M, N)
        RIS->BS channel the BS believes in; may differ from the true one.
    schedule : PhaseSchedule
    power : PowerConfig
    anchors : (p_b, p_r)
    bs_array, ris_array : ArrayGeometry
    wavelength : float
    pathloss : PathLossModel
    cfg : AnmConfig
    """

    def __init__(self, h4_assumed, schedule, power, anchors, bs_array, ris_array, wavelength, pathloss, cfg=None):
        self.cfg = AnmConfig() if cfg is None else cfg
        self.p_b, self.p_r = (as_position(p) for p in anchors)
        self.arrays = (bs_array, ris_array, ris_array)
        self.wavelength = wavelength
        self.pathloss = pathloss
        self.signs = azimuth_signs(self.p_b, self.p_r)
        self.matrices = build_measurement_matrices(h4_assumed, schedule)
        gammas = power.gammas
        self._reduced = {}
        self._errors = {}
        for i in (1, 2, 3):
            try:
                if not gammas[i - 1] > 0:
                    raise InsufficientOverheadError(f"path {i} carries no power")
                op = nulling_operator(i, self.matrices)
                target, _ = _interferers(i, self.matrices)
                q, r = np.linalg.qr(gammas[i - 1] * (op.u @ target))
                self._reduced[i] = (q.conj().T @ op.u, r)
            except (InsufficientOverheadError, np.linalg.LinAlgError) as exc:
                self._errors[i] = str(exc)

    def estimate_channel(self, i, y, sigma, record=False):
        if i in self._errors:
            raise InsufficientOverheadError(self._errors[i])
        proj, r = self._reduced[i]
        geom = self.arrays[i - 1]
        dims = (geom.nx, geom.nz)
        return _solve_reduced(r, proj @ y, self.cfg.mu(sigma, geom.size), self.cfg, dims, record)

    def estimate_link(self, i, y, sigma):
        """ANM, root-MUSIC and distance for channel ``i``; returns (ChannelEstimate, AnmResult, AngleEstimate)."""
        geom = self.arrays[i - 1]
        res = self.estimate_channel(i, y, sigma)
        ang = extract_angles(res.h_hat, (geom.nx, geom.nz), geom.phase_steps(self.wavelength), self.signs[i - 1])
        h_for_d = res.h_hat
        if self.cfg.amplitude_refit:
            proj, r = self._reduced[i]
            atom = ch.array_response(geom, LinkGeometry(ang.theta, ang.phi, 1.0), self.wavelength)
            h_for_d = refit_amplitude(r, proj @ y, atom)
        d = estimate_distance(h_for_d, geom.size, self.pathloss)
        return ChannelEstimate(res.h_hat, LinkGeometry(ang.theta, ang.phi, d)), res, ang

    def localize(self, y, sigma2):
        sigma = math.sqrt(sigma2)
        estimates, diags = [], []
        for i in (1, 2, 3):
            try:
                est, res, ang = self.estimate_link(i, y, sigma)
                estimates.append(est)
                diags.append(ChannelDiagnostics(i, res.converged, res.iterations, res.residual, ang.mismatch_ratio))
            except (InvalidFrequencyError, InsufficientOverheadError, ValueError) as exc:
                estimates.append(None)
                diags.append(ChannelDiagnostics(i, error=f"{type(exc).__name__}: {exc}"))
        e1, e2, e3 = estimates
        p_u2 = None if e3 is None else self.p_r + e3.link_hat.d * direction_vector(e3.link_hat)
        branch1 = None if e1 is None else self.p_b + e1.link_hat.d * direction_vector(e1.link_hat)
        branch2 = None if e2 is None else self.p_r + e2.link_hat.d * direction_vector(e2.link_hat)
        if branch1 is not None and branch2 is not None:
            w1 = outdoor_weight(e1.link_hat.d, e2.link_hat.d)
            p_u1, used = w1 * branch1 + (1 - w1) * branch2, "weighted"
        elif branch1 is not None:
            p_u1, used = branch1, "direct"
        elif branch2 is not None:
            p_u1, used = branch2, "reflected"
        else:
            p_u1, used = None, "none"
        return LocalizationResult(p_u1, p_u2, tuple(estimates), tuple(diags), used)


def localize(obs, anchors, h4_assumed, schedule, cfg, *, bs_array, ris_array, wavelength, pathloss):
    """One-shot localization of both mobiles from an :class:`ObservationBundle`."""
    loc = Localizer(h4_assumed, schedule, obs.power, anchors, bs_array, ris_array, wavelength, pathloss, cfg)
    return loc.localize(obs.y, obs.sigma2)


def localizer_for(scenario, schedule, power, cfg=None, h4_assumed=None):
    """Build a :class:`Localizer` from the deployment-level facts of ``scenario``.

    Only the anchors, arrays, wavelength and path-loss model are read; the
    mobile positions are not.
    """
    h4 = scenario.h4() if h4_assumed is None else h4_assumed
    return Localizer(
        h4,
        schedule,
        power,
        (scenario.p_b, scenario.p_r),
        scenario.bs_array,
        scenario.ris_array,
        scenario.wavelength,
        scenario.pathloss,
        cfg,
    )
