# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled ADMM kernel for the ANM semidefinite program.

Mirrors :func:`starloc._anm_py.admm_solve` step for step; the PSD
projection calls LAPACK ``zheevr`` and rebuilds the positive part with ``zherk``.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt, fmax
from scipy.linalg.cython_blas cimport zherk
from scipy.linalg.cython_lapack cimport zheevr

from ._anm_py import lag_index, toeplitz_assemble, toeplitz_project, psd_project

cnp.import_array()

cdef double RHO_RATIO = 10.0
cdef double RHO_FACTOR = 2.0
cdef int RHO_EVERY = 10


cdef double _sq(double complex v) nogil:
    return v.real * v.real + v.imag * v.imag


cdef int _psd_project(double complex[:, ::1] a, double complex[:, ::1] out, double complex[::1, :] vecs,
                      double[::1] w, int[::1] isuppz, double complex[::1] work, int lwork,
                      double[::1] rwork, int lrwork, int[::1] iwork, int liwork) nogil:
    """``out`` = projection of Hermitian ``a`` (overwritten) onto the PSD cone."""
    cdef int n = a.shape[0]
    cdef int lda = n, il = 0, iu = 0, m = 0, info = 0, first, npos, i, j
    cdef double vl = 0.0, vu = 0.0, abstol = 0.0, alpha = 1.0, beta = 0.0, s
    cdef char jobz = b'V', rng = b'A', uplo = b'L', trans = b'N'
    # Fortran sees the C-order buffer as conj(a); it has the same eigenvalues.
    zheevr(&jobz, &rng, &uplo, &n, &a[0, 0], &lda, &vl, &vu, &il, &iu, &abstol, &m, &w[0],
           &vecs[0, 0], &lda, &isuppz[0], &work[0], &lwork, &rwork[0], &lrwork, &iwork[0], &liwork, &info)
    if info != 0:
        return info
    first = n
    while first > 0 and w[first - 1] > 0:
        first -= 1
    npos = n - first
    if npos == 0:
        for i in range(n):
            for j in range(n):
                out[i, j] = 0
        return 0
    for j in range(first, n):
        s = sqrt(w[j])
        for i in range(n):
            vecs[i, j] = vecs[i, j] * s
    # out (Fortran view) = B B^H = conj(projection); read back in C order it is the projection.
    zherk(&uplo, &trans, &n, &npos, &alpha, &vecs[0, first], &lda, &beta, &out[0, 0], &lda)
    for i in range(n):
        for j in range(i):
            out[i, j] = out[j, i].conjugate()
    return 0


def admm_solve(double[::1] gram_evals, double complex[:, ::1] gram_evecs, double complex[::1] rhb,
               double mu, double rho, int nx, int nz, double tol, int max_iters, record=False,
               double bnorm2=0.0):
    """Compiled twin of :func:`starloc._anm_py.admm_solve`; same arguments and returns."""
    cdef int size = nx * nz
    cdef int n1 = size + 1
    cdef int nlag = (2 * nx - 1) * (2 * nz - 1)
    cdef int centre = nlag // 2
    cdef int[:, ::1] lags = np.ascontiguousarray(lag_index(nx, nz), dtype=np.intc)
    cdef double[::1] counts = np.bincount(np.asarray(lags).ravel(), minlength=nlag).astype(float)
    cdef double complex[:, ::1] z = np.zeros((n1, n1), dtype=complex)
    cdef double complex[:, ::1] z_old = np.zeros((n1, n1), dtype=complex)
    cdef double complex[:, ::1] lam = np.zeros((n1, n1), dtype=complex)
    cdef double complex[:, ::1] x = np.zeros((n1, n1), dtype=complex)
    cdef double complex[:, ::1] a = np.zeros((n1, n1), dtype=complex)
    cdef double complex[::1, :] vecs = np.zeros((n1, n1), dtype=complex, order="F")
    cdef double complex[::1] mean = np.zeros(nlag, dtype=complex)
    cdef double complex[::1] h = np.zeros(size, dtype=complex)
    cdef double complex[::1] wbar = np.zeros(size, dtype=complex)
    cdef double complex[::1] coef = np.zeros(size, dtype=complex)
    cdef double complex[::1] vhb = np.zeros(size, dtype=complex)
    cdef double[::1] w = np.zeros(n1)
    cdef int[::1] isuppz = np.zeros(2 * n1, dtype=np.intc)

    # LAPACK workspace query
    cdef int lwork = -1, lrwork = -1, liwork = -1, info = 0, m = 0, il = 0, iu = 0
    cdef double complex wq
    cdef double rq
    cdef int iq
    cdef double vl = 0.0, vu = 0.0, abstol = 0.0
    cdef char jobz = b'V', rng = b'A', uplo = b'L'
    zheevr(&jobz, &rng, &uplo, &n1, &a[0, 0], &n1, &vl, &vu, &il, &iu, &abstol, &m, &w[0],
           &vecs[0, 0], &n1, &isuppz[0], &wq, &lwork, &rq, &lrwork, &iq, &liwork, &info)
    lwork = max(int(wq.real), 2 * n1)
    lrwork = max(int(rq), 24 * n1)
    liwork = max(iq, 10 * n1)
    cdef double complex[::1] work = np.zeros(lwork, dtype=complex)
    cdef double[::1] rwork = np.zeros(lrwork)
    cdef int[::1] iwork = np.zeros(liwork, dtype=np.intc)

    cdef int i, j, k, l, it = 0
    cdef double t = 0.0, inv_rho, r_primal, r_dual, nx2, nz2, nl2, eps_p, eps_d
    cdef double complex acc, d
    cdef bint converged = False
    history = []

    for i in range(size):
        acc = 0
        for k in range(size):
            acc = acc + gram_evecs[k, i].conjugate() * rhb[k]
        vhb[i] = acc

    for it in range(1, max_iters + 1):
        inv_rho = 1.0 / rho
        # t-update
        t = z[size, size].real + lam[size, size].real * inv_rho - mu / (2 * rho)
        # h-update through the cached eigendecomposition
        for i in range(size):
            wbar[i] = 0.5 * ((z[i, size] + lam[i, size] * inv_rho)
                             + (z[size, i] + lam[size, i] * inv_rho).conjugate())
        for i in range(size):
            acc = 0
            for k in range(size):
                acc = acc + gram_evecs[k, i].conjugate() * wbar[k]
            coef[i] = (vhb[i] + 2 * rho * acc) / (gram_evals[i] + 2 * rho)
        for i in range(size):
            acc = 0
            for k in range(size):
                acc = acc + gram_evecs[i, k] * coef[k]
            h[i] = acc
        # Toeplitz projection of the leading block
        for l in range(nlag):
            mean[l] = 0
        for i in range(size):
            for j in range(size):
                mean[lags[i, j]] = mean[lags[i, j]] + z[i, j] + lam[i, j] * inv_rho
        for l in range(nlag):
            mean[l] = mean[l] / counts[l]
        for l in range(centre + 1):
            acc = 0.5 * (mean[l] + mean[nlag - 1 - l].conjugate())
            mean[l] = acc
            mean[nlag - 1 - l] = acc.conjugate()
        mean[centre] = mean[centre].real - mu / (2 * rho * size)
        for i in range(size):
            for j in range(size):
                x[i, j] = mean[lags[i, j]]
            x[i, size] = h[i]
            x[size, i] = h[i].conjugate()
        x[size, size] = t
        # Z-update
        for i in range(n1):
            for j in range(n1):
                z_old[i, j] = z[i, j]
                a[i, j] = x[i, j] - lam[i, j] * inv_rho
        info = _psd_project(a, z, vecs, w, isuppz, work, lwork, rwork, lrwork, iwork, liwork)
        if info != 0:
            raise RuntimeError(f"zheevr failed with info={info}")
        # dual update and residuals
        r_primal = 0.0
        r_dual = 0.0
        nx2 = 0.0
        nz2 = 0.0
        nl2 = 0.0
        for i in range(n1):
            for j in range(n1):
                d = z[i, j] - x[i, j]
                lam[i, j] = lam[i, j] + rho * d
                r_primal += _sq(d)
                r_dual += _sq(z[i, j] - z_old[i, j])
                nx2 += _sq(x[i, j])
                nz2 += _sq(z[i, j])
                nl2 += _sq(lam[i, j])
        r_primal = sqrt(r_primal)
        r_dual = rho * sqrt(r_dual)
        if record:
            history.append((_objective(gram_evals, gram_evecs, rhb, h, mean[centre].real, t, mu, bnorm2),
                            r_primal, r_dual))
        eps_p = tol * fmax(1.0, fmax(sqrt(nx2), sqrt(nz2)))
        eps_d = tol * fmax(1.0, sqrt(nl2))
        if r_primal < eps_p and r_dual < eps_d:
            converged = True
            break
        if it % RHO_EVERY == 0:
            if r_primal / eps_p > RHO_RATIO * r_dual / eps_d:
                rho *= RHO_FACTOR
            elif r_dual / eps_d > RHO_RATIO * r_primal / eps_p:
                rho /= RHO_FACTOR
    u = np.asarray(mean).reshape(2 * nx - 1, 2 * nz - 1).copy()
    return np.asarray(h).copy(), u, t, it, converged, history


cdef double _objective(double[::1] gram_evals, double complex[:, ::1] gram_evecs, double complex[::1] rhb,
                       double complex[::1] h, double u0, double t, double mu, double bnorm2):
    cdef int size = h.shape[0]
    cdef int i, k
    cdef double complex acc
    cdef double fit = bnorm2
    for i in range(size):
        fit -= 2 * (h[i].conjugate() * rhb[i]).real
        acc = 0
        for k in range(size):
            acc = acc + gram_evecs[k, i].conjugate() * h[k]
        fit += gram_evals[i] * _sq(acc)
    return 0.5 * mu * (u0 + t) + 0.5 * fit
