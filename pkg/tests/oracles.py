"""Independent reference computations shared by the unit and acceptance tests.

None of these reuse the vectorized code paths they are used to check.
"""

import math

import numpy as np

from starloc import channel as ch
from starloc.geometry import LinkGeometry


def per_slot_mean(h4, schedule, h1, h2, h3, pc):
    """Slot-by-slot received vectors stacked column by column, then vectorized."""
    w1, w2, w3 = pc.path_weights
    cols = []
    for k in range(schedule.k):
        cols.append(
            w1 * h1
            + w2 * h4 @ np.diag(schedule.omega2_bar[:, k]) @ h2
            + w3 * h4 @ np.diag(schedule.omega1_bar[:, k]) @ h3
        )
    return np.stack(cols, axis=1).reshape(-1, order="F")


def mean_from_nu(nu, scenario, h4, schedule, pc):
    """Noiseless mean rebuilt from the nine channel parameters through the per-slot model."""
    lam, plm = scenario.wavelength, scenario.pathloss
    geoms = (scenario.bs_array, scenario.ris_array, scenario.ris_array)
    hs = [ch.los_channel(g, LinkGeometry(*nu[3 * i : 3 * i + 3]), plm, lam) for i, g in enumerate(geoms)]
    return per_slot_mean(h4, schedule, *hs, pc)


def fd_mean_jacobian(scenario, h4, schedule, pc, angle_step=1e-7, dist_step=1e-6):
    """Central differences of the noiseless mean with respect to nu."""
    nu = scenario.nu()
    cols = []
    for j in range(9):
        step = dist_step if j % 3 == 2 else angle_step
        hi, lo = nu.copy(), nu.copy()
        hi[j] += step
        lo[j] -= step
        cols.append((mean_from_nu(hi, scenario, h4, schedule, pc) - mean_from_nu(lo, scenario, h4, schedule, pc)) / (2 * step))
    return np.stack(cols, axis=1)


def grid_search_atom(h, dims, phase_steps=(math.pi, math.pi), resolution=1e-3):
    """Angles (theta in [0, pi], phi in [-pi/2, pi/2]) of the atom best correlated with ``h``.

    Exhaustive search over a uniform grid with the given spacing in both
    angles; the x-z factorization is used only to evaluate the
    correlations quickly.
    """
    nx, nz = dims
    kx, kz = phase_steps
    ox = np.arange(nx) - (nx - 1) / 2
    oz = np.arange(nz) - (nz - 1) / 2
    thetas = np.arange(0.0, math.pi + resolution / 2, resolution)
    phis = np.arange(-math.pi / 2, math.pi / 2 + resolution / 2, resolution)
    mat = np.asarray(h, dtype=complex).reshape(nx, nz)
    # contract the z axis for every elevation: (n_phi, nx)
    vz = mat @ np.exp(-1j * kz * np.outer(oz, np.sin(phis)))
    best, arg = -1.0, (0.0, 0.0)
    cth = np.cos(thetas)
    for ip, phi in enumerate(phis):
        ax = np.exp(-1j * kx * np.outer(cth * math.cos(phi), ox))
        corr = np.abs(ax @ vz[:, ip])
        it = int(np.argmax(corr))
        if corr[it] > best:
            best, arg = float(corr[it]), (float(thetas[it]), float(phi))
    return arg


def anm_cvxpy(r, b, mu, dims):
    """Reference ANM solve, ``min mu (u0 + t) / 2 + ||b - r h||^2 / 2`` over a two-level Toeplitz PSD block."""
    import cvxpy as cp

    nx, nz = dims
    size = nx * nz
    x = cp.Variable((size + 1, size + 1), hermitian=True)
    cons = [x >> 0]
    first = {}
    for i in range(size):
        for j in range(size):
            key = (i // nz - j // nz, i % nz - j % nz)
            if key in first:
                cons.append(x[i, j] == x[first[key]])
            else:
                first[key] = (i, j)
    h = x[:size, size]
    obj = 0.5 * mu * (cp.real(x[0, 0]) + cp.real(x[size, size])) + 0.5 * cp.sum_squares(b - r @ h)
    cp.Problem(cp.Minimize(obj), cons).solve(solver=cp.CLARABEL)
    return np.asarray(x.value[:size, size]).ravel()
