"""Energy functionals and multipliers for the focusing NLS ground-state problem.

Continuous model on a periodic box: stationary states of

    i psi_t = -1/2 Lap psi + V psi + beta |psi|^{p-1} psi,     beta < 0,

with frequency omega solve  A phi + beta |phi|^{p-1} phi = 0  where
A = -1/2 Lap + V + omega.  On the unit L^{p+1} sphere the problem becomes
minimizing the positive quadratic form

    Q(u) = 1/2 |u|_{1,h}^2 + <V u, u>_h + omega ||u||_h^2 = Re<A u, u>_h,

whose minimizers are action ground states after the rescaling
phi = (Q(u)/(-beta))^(1/(p-1)) u.  This module supplies Q, the multiplier
estimates, the Euler-Lagrange residual, and the action-side functionals.

All nonlinear powers use the modulus convention |u|^{p-1} u with value 0
wherever u vanishes, which is well defined for complex fields and any p > 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import eigh
from scipy.sparse.linalg import LinearOperator, eigsh, lobpcg

from .grid import (
    GridError,
    GridField,
    GridSpec,
    apply_dxx,
    dxx_symbol,
    inner,
    norm_l2,
    norm_linf,
    norm_lp,
    seminorm_h1,
)


class FunctionalError(ValueError):
    """Invalid problem parameters or functional arguments."""


class EigensolverError(RuntimeError):
    """The iterative eigensolver for the admissibility check did not converge."""


@dataclass(frozen=True)
class PotentialSpec:
    """External potential V >= 0 on the box.

    Variants: ``zero``, ``harmonic`` (V = sum_a gamma_a^2 x_a^2 / 2), or
    ``samples`` (nodal values supplied as a field, validated real and >= 0).
    """

    kind: str
    gamma: tuple[float, ...] | None = None
    samples: GridField | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("zero", "harmonic", "samples"):
            raise FunctionalError(f"unknown potential kind {self.kind!r}")
        if self.kind == "harmonic":
            if not self.gamma:
                raise FunctionalError("harmonic potential requires gamma per axis")
            object.__setattr__(self, "gamma", tuple(float(g) for g in self.gamma))
        if self.kind == "samples" and self.samples is None:
            raise FunctionalError("samples potential requires a field of values")

    @classmethod
    def zero(cls) -> "PotentialSpec":
        return cls("zero")

    @classmethod
    def harmonic(cls, *gamma: float) -> "PotentialSpec":
        return cls("harmonic", gamma=tuple(gamma))

    @classmethod
    def from_samples(cls, samples: GridField) -> "PotentialSpec":
        return cls("samples", samples=samples)

    def evaluate(self, grid: GridSpec) -> NDArray[np.float64]:
        """Nodal values of V on ``grid`` as a real array (validated >= 0)."""
        if self.kind == "zero":
            return np.zeros(grid.shape)
        if self.kind == "harmonic":
            if len(self.gamma) != grid.dims:
                raise FunctionalError(
                    f"harmonic potential has {len(self.gamma)} rates "
                    f"for a {grid.dims}D grid"
                )
            meshes = grid.meshes()
            v = np.zeros(grid.shape)
            for g, x in zip(self.gamma, meshes):
                v += 0.5 * g**2 * x**2
            return v
        if self.samples.grid != grid:
            raise FunctionalError("sampled potential lives on a different grid")
        vals = self.samples.values
        if np.max(np.abs(vals.imag)) > 0.0:
            raise FunctionalError("sampled potential must be real-valued")
        v = vals.real.copy()
        if np.min(v) < 0.0:
            raise FunctionalError("potential must be nonnegative")
        return v


@dataclass(frozen=True)
class ProblemParams:
    """Physical parameters: frequency omega, focusing strength beta < 0,
    nonlinearity exponent p > 1, and the external potential."""

    omega: float
    beta: float
    p: float
    potential: PotentialSpec

    def __post_init__(self) -> None:
        if not np.isfinite(self.omega):
            raise FunctionalError("omega must be finite")
        if not (self.beta < 0.0):
            raise FunctionalError(f"focusing problem needs beta < 0, got {self.beta}")
        if not (self.p > 1.0):
            raise FunctionalError(f"nonlinearity exponent needs p > 1, got {self.p}")


def modulus_power(values: NDArray[np.complex128], p: float) -> NDArray[np.complex128]:
    """Pointwise |u|^(p-1) * u with the convention 0 at zeros of u."""
    return np.abs(values) ** (p - 1.0) * values


def apply_A(u: GridField, params: ProblemParams) -> GridField:
    """Linear part A u = -1/2 Dxx u + (V + omega) u."""
    v = params.potential.evaluate(u.grid)
    out = -0.5 * apply_dxx(u).values + (v + params.omega) * u.values
    return GridField(u.grid, out)


def Q(u: GridField, params: ProblemParams) -> float:
    """Quadratic energy Q(u) = 1/2 |u|_{1,h}^2 + <V u, u>_h + omega ||u||_h^2."""
    v = params.potential.evaluate(u.grid)
    amp2 = np.abs(u.values) ** 2
    pot = u.grid.cell_volume * float(np.sum(v * amp2))
    mass = u.grid.cell_volume * float(np.sum(amp2))
    return 0.5 * seminorm_h1(u) ** 2 + pot + params.omega * mass


def lambda_tilde(u: GridField, params: ProblemParams) -> float:
    """Asymptotic multiplier estimate Q(u) / ||u||_{h,p+1}^{p+1}."""
    n = norm_lp(u, params.p + 1.0)
    if n == 0.0:
        raise FunctionalError("lambda_tilde undefined for the zero field")
    return Q(u, params) / n ** (params.p + 1.0)


def lambda_exact(u: GridField, params: ProblemParams) -> float:
    """Exact multiplier Re<A u, |u|^{p-1} u>_h / ||u||_{h,2p}^{2p}."""
    n = norm_lp(u, 2.0 * params.p)
    if n == 0.0:
        raise FunctionalError("lambda_exact undefined for the zero field")
    w = GridField(u.grid, modulus_power(u.values, params.p))
    return inner(apply_A(u, params), w).real / n ** (2.0 * params.p)


def residual_mu(u: GridField, params: ProblemParams) -> GridField:
    """Euler-Lagrange residual mu(u) = A u - lambda_tilde(u) |u|^{p-1} u."""
    lam = lambda_tilde(u, params)
    out = apply_A(u, params).values - lam * modulus_power(u.values, params.p)
    return GridField(u.grid, out)


def constraint_G(u: GridField, params: ProblemParams) -> float:
    """Sphere constraint G(u) = 2/(p+1) * (||u||_{h,p+1}^{p+1} - 1)."""
    n = norm_lp(u, params.p + 1.0)
    return 2.0 / (params.p + 1.0) * (n ** (params.p + 1.0) - 1.0)


@dataclass(frozen=True)
class ActionValues:
    """Energy E, action S_omega = E + omega*mass, and Nehari value K_omega."""

    energy: float
    action: float
    nehari: float


def action_functionals(phi: GridField, params: ProblemParams) -> ActionValues:
    """Discrete energy/action/Nehari functionals of an unnormalized state.

    E(phi)       = 1/2 |phi|_{1,h}^2 + <V phi, phi>_h
                   + 2*beta/(p+1) ||phi||_{h,p+1}^{p+1}
    S_omega(phi) = E(phi) + omega ||phi||_h^2
    K_omega(phi) = Q(phi) + beta ||phi||_{h,p+1}^{p+1}
    """
    v = params.potential.evaluate(phi.grid)
    amp2 = np.abs(phi.values) ** 2
    pot = phi.grid.cell_volume * float(np.sum(v * amp2))
    mass = phi.grid.cell_volume * float(np.sum(amp2))
    lp1 = norm_lp(phi, params.p + 1.0) ** (params.p + 1.0)
    kinetic = 0.5 * seminorm_h1(phi) ** 2
    energy = kinetic + pot + 2.0 * params.beta / (params.p + 1.0) * lp1
    action = energy + params.omega * mass
    nehari = kinetic + pot + params.omega * mass + params.beta * lp1
    return ActionValues(energy=energy, action=action, nehari=nehari)


def rescale_to_phi(u: GridField, params: ProblemParams) -> GridField:
    """Map a sphere minimizer to the action ground state
    phi = (Q(u)/(-beta))^(1/(p-1)) u."""
    q = Q(u, params)
    if q <= 0.0:
        raise FunctionalError(f"rescaling requires Q(u) > 0, got {q}")
    factor = (q / (-params.beta)) ** (1.0 / (params.p - 1.0))
    return GridField(u.grid, factor * u.values)


def alpha_min(params: ProblemParams, grid: GridSpec) -> float:
    """Smallest admissible stabilization 1/2 max{0, max_j (V_j + omega)} + 1/2."""
    v = params.potential.evaluate(grid)
    return 0.5 * max(0.0, float(np.max(v)) + params.omega) + 0.5


@dataclass(frozen=True)
class OmegaCheck:
    """Result of the frequency admissibility check omega > -lambda0'."""

    lambda0_prime: float
    admissible: bool
    method: str


def _linear_operator_matrix(params: ProblemParams, grid: GridSpec) -> NDArray:
    """Dense matrix of H0 = 1/2 (-Dxx) + diag(V) in the nodal basis."""
    n = grid.npoints
    v = params.potential.evaluate(grid).reshape(-1)
    rho = dxx_symbol(grid)
    cols = np.empty((n, n))
    basis = np.zeros(grid.shape, dtype=np.complex128)
    flat = basis.reshape(-1)
    for j in range(n):
        flat[j] = 1.0
        col = np.fft.ifftn(rho * np.fft.fftn(basis)).real
        cols[:, j] = 0.5 * col.reshape(-1)
        flat[j] = 0.0
    cols[np.arange(n), np.arange(n)] += v
    return cols


def check_omega(
    params: ProblemParams,
    grid: GridSpec,
    dense_cutoff: int = 4096,
    seed: int = 0,
) -> OmegaCheck:
    """Admissibility check: lambda0' = min eig of 1/2(-Dxx) + diag(V), and
    the problem is admissible iff omega > -lambda0'.

    Dense symmetric eigensolve up to ``dense_cutoff`` points; beyond that a
    matrix-free LOBPCG with a spectral preconditioner (ARPACK fallback).
    """
    n = grid.npoints
    if n <= dense_cutoff:
        h0 = _linear_operator_matrix(params, grid)
        lam0 = float(eigh(h0, eigvals_only=True, subset_by_index=(0, 0))[0])
        method = "dense"
    else:
        v = params.potential.evaluate(grid)
        rho = dxx_symbol(grid)

        def matvec(x):
            f = x.reshape(grid.shape)
            out = 0.5 * np.fft.ifftn(rho * np.fft.fftn(f)).real + v * f
            return out.reshape(-1)

        def precvec(x):
            f = x.reshape(grid.shape)
            out = np.fft.ifftn(np.fft.fftn(f) / (0.5 * rho + 1.0)).real
            return out.reshape(-1)

        op = LinearOperator((n, n), matvec=matvec, dtype=np.float64)
        prec = LinearOperator((n, n), matvec=precvec, dtype=np.float64)
        rng = np.random.default_rng(seed)
        x0 = np.column_stack(
            [np.ones(n) / np.sqrt(n), rng.standard_normal((n, 2))]
        )
        try:
            vals, _ = lobpcg(
                op, x0, M=prec, largest=False, tol=1e-10, maxiter=400
            )
            lam0 = float(np.min(vals))
            method = "lobpcg"
        except Exception:
            try:
                vals = eigsh(op, k=1, which="SA", return_eigenvectors=False)
                lam0 = float(vals[0])
                method = "arpack"
            except Exception as exc:  # pragma: no cover - double failure
                raise EigensolverError(
                    f"eigensolver failed for the admissibility check: {exc}"
                ) from exc
    return OmegaCheck(
        lambda0_prime=lam0,
        admissible=bool(params.omega > -lam0),
        method=method,
    )


def coercivity_constant(params: ProblemParams) -> float:
    """Provable lower bound for Q(u)/||u||_{1,h}^2 when V >= 0 and omega > 0:
    min(1/2, omega)."""
    return min(0.5, params.omega)
