"""Dense reference implementations of the spectral operators.

These build the differentiation matrix entrywise from the closed-form
cardinal-function series (no FFT) and realize the solver's elementary steps
with dense linear algebra.  They are deliberately independent of the
transform-based fast paths in :mod:`gfalm.grid` and :mod:`gfalm.solver` so
the two routes can be compared entrywise; keep them that way.

Only small grids are sensible here (cost is O(N^2) to O(N^3))."""

from __future__ import annotations

import numpy as np
from numpy.typing import NDArray

from .functionals import ProblemParams, modulus_power
from .grid import GridError, GridField, GridSpec


def dense_dxx_1d(grid: GridSpec) -> NDArray[np.float64]:
    """Second-derivative matrix (Dxx)_{j,l} = phi_l''(x_j) for a 1D grid.

    phi_l is the cardinal trigonometric interpolant with the half-weighted
    Nyquist modes:

        phi_l(x) = (1/M) sum_{k=-M/2}^{M/2} (1/a_k) exp(i k sigma (x - x_l)),

    a_k = 2 at |k| = M/2 and 1 otherwise.
    """
    if grid.dims != 1:
        raise GridError("dense_dxx_1d expects a 1D grid")
    m = grid.M[0]
    sigma = grid.sigma[0]
    x = grid.axis_points(0)
    ks = np.arange(-m // 2, m // 2 + 1)
    weights = np.where(np.abs(ks) == m // 2, 0.5, 1.0)
    d = np.zeros((m, m), dtype=np.complex128)
    for j in range(m):
        for l in range(m):
            phase = np.exp(1j * ks * sigma * (x[j] - x[l]))
            d[j, l] = np.sum(weights * (-((ks * sigma) ** 2)) * phase) / m
    return d.real


def dense_dxx(grid: GridSpec) -> NDArray[np.float64]:
    """Dense Laplacian on the flattened (C-order) nodal basis, 1D or 2D."""
    if grid.dims == 1:
        return dense_dxx_1d(grid)
    gx = GridSpec((grid.x0[0],), (grid.L[0],), (grid.M[0],))
    gy = GridSpec((grid.x0[1],), (grid.L[1],), (grid.M[1],))
    dx = dense_dxx_1d(gx)
    dy = dense_dxx_1d(gy)
    ix = np.eye(grid.M[0])
    iy = np.eye(grid.M[1])
    return np.kron(dx, iy) + np.kron(ix, dy)


def dense_A(params: ProblemParams, grid: GridSpec) -> NDArray[np.float64]:
    """Dense matrix of A = -1/2 Dxx + diag(V + omega)."""
    v = params.potential.evaluate(grid).reshape(-1)
    a = -0.5 * dense_dxx(grid)
    a[np.diag_indices_from(a)] += v + params.omega
    return a


def dense_L(u_g: GridField, lambda_g: float, params: ProblemParams) -> NDArray:
    """Dense matrix of L v = A v - p * lambda_g * |u_g|^{p-1} v (real form)."""
    a = dense_A(params, u_g.grid)
    weight = np.abs(u_g.values.reshape(-1)) ** (params.p - 1.0)
    a[np.diag_indices_from(a)] -= params.p * lambda_g * weight
    return a


def dense_resolvent_solve(rhs: GridField, a: float, b: float) -> GridField:
    """Solve (a*I - b*Dxx) w = rhs with a dense factorization."""
    mat = -b * dense_dxx(rhs.grid)
    mat[np.diag_indices_from(mat)] += a
    w = np.linalg.solve(mat, rhs.values.reshape(-1))
    return GridField(rhs.grid, w.reshape(rhs.grid.shape))


def dense_gfalm_step(
    u: GridField, params: ProblemParams, tau: float, alpha: float
) -> tuple[GridField, GridField]:
    """One normalized-gradient-flow step realized with dense linear algebra.

    Returns (u_next, mu_tilde).  Mirrors the transform-based step: solve

        ((1 + tau*alpha) I - tau/2 Dxx) u~ = u + tau (alpha - V - omega) u
                                             + tau lambda~(u) |u|^{p-1} u,

    then mu~ = (u - u~)/tau and u_next = u~ / ||u~||_{h,p+1}.
    """
    grid = u.grid
    vol = grid.cell_volume
    v = params.potential.evaluate(grid).reshape(-1)
    uu = u.values.reshape(-1)
    a_mat = dense_A(params, grid)
    q = float(np.real(np.vdot(uu, vol * (a_mat @ uu))))
    lp1 = float(vol * np.sum(np.abs(uu) ** (params.p + 1.0)))
    lam = q / lp1
    g = uu + tau * ((alpha - v - params.omega) * uu + lam * modulus_power(uu, params.p))
    mat = -0.5 * tau * dense_dxx(grid)
    mat[np.diag_indices_from(mat)] += 1.0 + tau * alpha
    u_tilde = np.linalg.solve(mat, g)
    mu_tilde = (uu - u_tilde) / tau
    nt = (vol * np.sum(np.abs(u_tilde) ** (params.p + 1.0))) ** (
        1.0 / (params.p + 1.0)
    )
    u_next = u_tilde / nt
    return (
        GridField(grid, u_next.reshape(grid.shape)),
        GridField(grid, mu_tilde.reshape(grid.shape)),
    )
