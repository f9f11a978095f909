"""Pure-numpy ANM kernels; the fallback when the compiled extension is missing.

The solver handles the normalized problem

    minimize  mu/2 (u[0,0] + t) + 1/2 ||b - R h||^2
    s.t.      [[Toep(u), h], [h^H, t]] >= 0

by ADMM on the splitting ``Z = X(h, u, t)`` with ``Z`` PSD. ``R`` enters
only through the eigendecomposition of ``R^H R`` and through ``R^H b``, so
the h-update ``(R^H R + 2 rho I)^-1 (...)`` stays cheap when the penalty
``rho`` is rebalanced.
"""

import numpy as np

# Residual balancing: rescale rho by RHO_FACTOR when one residual exceeds
# the other by more than RHO_RATIO; checked every RHO_EVERY iterations.
RHO_RATIO = 10.0
RHO_FACTOR = 2.0
RHO_EVERY = 10


def lag_index(nx, nz):
    """Flat lag index of every entry of a two-level Toeplitz matrix.

    Entry ``(i, j)`` with ``i = mx*nz + mz`` has lag
    ``(mx - mx', mz - mz')``, stored at flat position
    ``(dx + nx - 1) * (2*nz - 1) + (dz + nz - 1)``.
    """
    mx = np.repeat(np.arange(nx), nz)
    mz = np.tile(np.arange(nz), nx)
    dx = mx[:, None] - mx[None, :] + nx - 1
    dz = mz[:, None] - mz[None, :] + nz - 1
    return dx * (2 * nz - 1) + dz


def toeplitz_project(w, nx, nz):
    """Least-squares projection of a Hermitian matrix onto two-level Toeplitz structure.

    Returns the (2nx-1, 2nz-1) lag array; lag (dx, dz) sits at
    ``[dx + nx - 1, dz + nz - 1]`` and the array is conjugate symmetric
    about its centre.
    """
    idx = lag_index(nx, nz).ravel()
    size = (2 * nx - 1) * (2 * nz - 1)
    counts = np.bincount(idx, minlength=size)
    flat = np.asarray(w).ravel()
    mean = (np.bincount(idx, flat.real, size) + 1j * np.bincount(idx, flat.imag, size)) / counts
    mean = 0.5 * (mean + mean[::-1].conj())
    return mean.reshape(2 * nx - 1, 2 * nz - 1)


def toeplitz_assemble(u, nx, nz):
    """Two-level Toeplitz matrix from its lag array (inverse of :func:`toeplitz_project`)."""
    return np.asarray(u).ravel()[lag_index(nx, nz)]


def psd_project(a):
    evals, evecs = np.linalg.eigh(a)
    evals = np.maximum(evals, 0.0)
    return (evecs * evals) @ evecs.conj().T


def admm_solve(gram_evals, gram_evecs, rhb, mu, rho, nx, nz, tol, max_iters, record=False, bnorm2=0.0):
    """Run the ADMM iterations.

    Parameters
    ----------
    gram_evals, gram_evecs : ndarray
        Eigendecomposition of ``R^H R``.
    rhb : ndarray
        ``R^H b``.
    mu : float
        Atomic-norm weight.
    rho : float
        Initial ADMM penalty.
    tol : float
        Relative tolerance on the primal and dual residuals.

    Returns
    -------
    h, u, t, iters, converged, history
        ``history`` is a list of (objective, primal residual, dual residual)
        when ``record`` is true, else empty. ``bnorm2 = ||b||^2`` only
        shifts the recorded objective.
    """
    size = nx * nz
    lags = lag_index(nx, nz)
    idx = lags.ravel()
    nlag = (2 * nx - 1) * (2 * nz - 1)
    counts = np.bincount(idx, minlength=nlag)
    centre = nlag // 2
    vhb = gram_evecs.conj().T @ rhb
    z = np.zeros((size + 1, size + 1), dtype=complex)
    lam = np.zeros_like(z)
    x = np.zeros_like(z)
    history = []
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        w = z + lam / rho
        t = w[size, size].real - mu / (2 * rho)
        wbar = 0.5 * (w[:size, size] + w[size, :size].conj())
        h = gram_evecs @ ((vhb + 2 * rho * (gram_evecs.conj().T @ wbar)) / (gram_evals + 2 * rho))
        flat = w[:size, :size].ravel()
        mean = (np.bincount(idx, flat.real, nlag) + 1j * np.bincount(idx, flat.imag, nlag)) / counts
        mean = 0.5 * (mean + mean[::-1].conj())
        mean[centre] = mean[centre].real - mu / (2 * rho * size)
        x[:size, :size] = mean[lags]
        x[:size, size] = h
        x[size, :size] = h.conj()
        x[size, size] = t
        z_old = z
        z = psd_project(x - lam / rho)
        diff = z - x
        lam = lam + rho * diff
        r_primal = np.linalg.norm(diff)
        r_dual = rho * np.linalg.norm(z - z_old)
        if record:
            gh = gram_evecs.conj().T @ h
            fit = 0.5 * (bnorm2 - 2 * np.vdot(h, rhb).real + np.sum(gram_evals * np.abs(gh) ** 2))
            history.append((0.5 * mu * (mean[centre].real + t) + fit, r_primal, r_dual))
        eps_p = tol * max(1.0, np.linalg.norm(x), np.linalg.norm(z))
        eps_d = tol * max(1.0, np.linalg.norm(lam))
        if r_primal < eps_p and r_dual < eps_d:
            converged = True
            break
        if it % RHO_EVERY == 0:
            if r_primal / eps_p > RHO_RATIO * r_dual / eps_d:
                rho *= RHO_FACTOR
            elif r_dual / eps_d > RHO_RATIO * r_primal / eps_p:
                rho /= RHO_FACTOR
    u = mean.reshape(2 * nx - 1, 2 * nz - 1)
    return h, u, t, it, converged, history
