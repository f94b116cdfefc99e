"""Local geometry probes around a certified discrete ground state.

Near a sphere point u_g every nearby sphere point factors uniquely as

    u = (1 + r) u_g + xi,      Re<|u_g|^{p-1} u_g, xi>_h = 0,

and the sphere constraint determines r = r(xi) with |r| = O(||xi||^2).  The
second variation of Q at u_g along real tangent directions is carried by

    L v = A v - p lambda_g |u_g|^{p-1} v,

and its coercivity on the tangent space (measured against the H^1 Gram
operator I - Dxx) is the constant behind quadratic energy growth, the
Lojasiewicz inequality Q(u) - Q(u_g) <= C ||mu(u)||_{-1,h}^2 near u_g, and
hence the exponential convergence rate of the discrete flow.  These probes
measure those constants numerically; none of them is used by the solver
itself.

For complex perturbations the second variation is carried by the real-linear
extension

    H v = A v - lambda_g [ (p-1) |u_g|^{p-3} Re(conj(u_g) v) u_g
                           + |u_g|^{p-1} v ],

which agrees with L on real fields and annihilates the phase direction
i u_g up to the ground-state residual (H(i u_g) = i mu(u_g)); that near-zero
mode is reported separately and never folded into the coercivity minimum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import eigh, null_space
from scipy.sparse.linalg import LinearOperator, lobpcg

from .functionals import (
    ProblemParams,
    Q,
    apply_A,
    lambda_tilde,
    modulus_power,
    residual_mu,
)
from .grid import (
    GridError,
    GridField,
    dxx_symbol,
    inner,
    norm_h1,
    norm_hminus1,
    norm_l2,
    norm_linf,
    norm_lp,
    resolvent_solve,
)


class GeometryError(ValueError):
    """Uncertified ground state or invalid probe request."""


class ChartError(RuntimeError):
    """The constraint equation for r(xi) could not be solved."""


@dataclass(frozen=True)
class GroundStateContext:
    """A ground-state candidate certified for probing.

    Certification (at construction): unit L^{p+1} norm within 1e-13 and
    Euler-Lagrange residual below 1e-10 in the max norm.
    """

    u_g: GridField
    lambda_g: float
    params: ProblemParams
    Q_g: float
    residual_linf: float

    _NORM_TOL = 1e-13
    _RESIDUAL_TOL = 1e-10

    @classmethod
    def certify(cls, u_g: GridField, params: ProblemParams) -> "GroundStateContext":
        lp1 = norm_lp(u_g, params.p + 1.0)
        if abs(lp1 - 1.0) > cls._NORM_TOL:
            raise GeometryError(
                f"candidate is off the sphere: ||u||_{{h,p+1}} - 1 = {lp1 - 1.0:.3e}"
            )
        res = norm_linf(residual_mu(u_g, params))
        if res > cls._RESIDUAL_TOL:
            raise GeometryError(
                f"candidate residual {res:.3e} exceeds the certification "
                f"threshold {cls._RESIDUAL_TOL}"
            )
        q_g = Q(u_g, params)
        return cls(
            u_g=u_g,
            lambda_g=lambda_tilde(u_g, params),
            params=params,
            Q_g=q_g,
            residual_linf=res,
        )

    @property
    def weight(self) -> NDArray[np.complex128]:
        """Constraint gradient direction |u_g|^{p-1} u_g (nodal values)."""
        return modulus_power(self.u_g.values, self.params.p)


@dataclass(frozen=True)
class TangentField:
    """A perturbation orthogonal to the constraint direction at u_g."""

    xi: GridField

    def check(self, ctx: GroundStateContext, tol: float = 1e-12) -> None:
        w = GridField(ctx.u_g.grid, ctx.weight)
        defect = abs(inner(w, self.xi).real)
        scale = max(norm_l2(self.xi), 1.0)
        if defect > tol * scale:
            raise GeometryError(f"field is not tangent: defect {defect:.3e}")


@dataclass(frozen=True)
class ChartCoords:
    r: float
    xi: TangentField


def tangent_project(v: GridField, ctx: GroundStateContext) -> TangentField:
    """Project v along u_g onto the tangent space: v - Re<w, v>_h u_g."""
    w = GridField(ctx.u_g.grid, ctx.weight)
    coeff = inner(w, v).real
    return TangentField(GridField(v.grid, v.values - coeff * ctx.u_g.values))


def chart(ctx: GroundStateContext, r: float, xi: TangentField) -> GridField:
    """Chart map (r, xi) -> (1 + r) u_g + xi."""
    return GridField(ctx.u_g.grid, (1.0 + r) * ctx.u_g.values + xi.xi.values)


def chart_inverse(u: GridField, ctx: GroundStateContext) -> ChartCoords:
    """Decompose u = (1 + r) u_g + xi with xi tangent at u_g."""
    w = GridField(ctx.u_g.grid, ctx.weight)
    r = inner(w, u).real - 1.0
    xi = GridField(u.grid, u.values - (1.0 + r) * ctx.u_g.values)
    return ChartCoords(r=r, xi=TangentField(xi))


def solve_r_of_xi(
    xi: TangentField,
    ctx: GroundStateContext,
    tol: float = 1e-13,
    max_iter: int = 100,
) -> float:
    """Radial correction r with ||(1 + r) u_g + xi||_{h,p+1} = 1.

    Safeguarded Newton (bisection fallback inside an expanding bracket) on
    F(s) = ||(1+s) u_g + xi||_{h,p+1}^{p+1} - 1, started at s = 0.
    """
    pexp = ctx.params.p + 1.0
    vol = ctx.u_g.grid.cell_volume
    ug = ctx.u_g.values
    xv = xi.xi.values

    def f_and_deriv(s: float) -> tuple[float, float]:
        v = (1.0 + s) * ug + xv
        amp = np.abs(v)
        f = vol * float(np.sum(amp**pexp)) - 1.0
        # d/ds ||v||^{p+1} = (p+1) Re<|v|^{p-1} v, u_g>_h
        fp = pexp * vol * float(np.real(np.sum(amp ** (pexp - 2.0) * v * np.conj(ug))))
        return f, fp

    # Expand a sign-changing bracket around 0.
    lo, hi = -0.5, 0.5
    f_lo, _ = f_and_deriv(lo)
    f_hi, _ = f_and_deriv(hi)
    grow = 0
    while f_lo > 0.0 and lo > -0.999 and grow < 60:
        lo = max(-0.999, 2.0 * lo)
        f_lo, _ = f_and_deriv(lo)
        grow += 1
    while f_hi < 0.0 and grow < 60:
        hi *= 2.0
        f_hi, _ = f_and_deriv(hi)
        grow += 1
    if f_lo > 0.0 or f_hi < 0.0:
        raise ChartError("could not bracket the radial correction")

    s = 0.0
    f, fp = f_and_deriv(s)
    for _ in range(max_iter):
        if abs(f) <= tol:
            return s
        if f > 0.0:
            hi = min(hi, s)
        else:
            lo = max(lo, s)
        step_ok = fp != 0.0
        if step_ok:
            s_new = s - f / fp
            step_ok = lo < s_new < hi
        if not step_ok:
            s_new = 0.5 * (lo + hi)
        s = s_new
        f, fp = f_and_deriv(s)
    raise ChartError(f"radial correction did not converge (last defect {f:.3e})")


def apply_L(v: GridField, ctx: GroundStateContext) -> GridField:
    """Linearized operator L v = A v - p lambda_g |u_g|^{p-1} v."""
    weight = np.abs(ctx.u_g.values) ** (ctx.params.p - 1.0)
    out = (
        apply_A(v, ctx.params).values
        - ctx.params.p * ctx.lambda_g * weight * v.values
    )
    return GridField(v.grid, out)


def apply_hessian(v: GridField, ctx: GroundStateContext) -> GridField:
    """Real-linear second-variation operator H for complex perturbations."""
    p = ctx.params.p
    ug = ctx.u_g.values
    amp = np.abs(ug)
    with np.errstate(divide="ignore", invalid="ignore"):
        amp_pm3 = np.where(amp > 0.0, amp ** (p - 3.0), 0.0)
    radial = (p - 1.0) * amp_pm3 * np.real(np.conj(ug) * v.values) * ug
    out = apply_A(v, ctx.params).values - ctx.lambda_g * (
        radial + amp ** (p - 1.0) * v.values
    )
    return GridField(v.grid, out)


def _realified_ground_state(ctx: GroundStateContext) -> NDArray[np.float64]:
    """Ground-state values rotated to the real axis; raises if that fails."""
    vals = ctx.u_g.values
    peak = np.unravel_index(np.argmax(np.abs(vals)), vals.shape)
    rotated = vals * np.exp(-1j * np.angle(vals[peak]))
    if np.max(np.abs(rotated.imag)) > 1e-8 * np.max(np.abs(rotated.real)):
        raise GeometryError(
            "coercivity check requires a real-valued ground state "
            "(up to a global phase)"
        )
    return rotated.real


def _dense_dxx_fft(grid) -> NDArray[np.float64]:
    """Dense Laplacian assembled from the transform path (batched columns)."""
    blocks = []
    for a in range(grid.dims):
        m = grid.M[a]
        k = np.fft.fftfreq(m, d=1.0 / m)
        rho_axis = (grid.sigma[a] * k) ** 2
        cols = np.fft.ifft(-rho_axis[:, None] * np.fft.fft(np.eye(m), axis=0), axis=0)
        blocks.append(cols.real)
    if grid.dims == 1:
        return blocks[0]
    return np.kron(blocks[0], np.eye(grid.M[1])) + np.kron(
        np.eye(grid.M[0]), blocks[1]
    )


@dataclass(frozen=True)
class CoercivityResult:
    """Outcome of the tangent-space coercivity eigensolve."""

    min_eig: float
    positive: bool
    eigenvalues: tuple[float, ...]
    phase_mode_residual: float
    method: str


def coercivity_check(
    ctx: GroundStateContext, subspace_dim_cap: int = 4096
) -> CoercivityResult:
    """Smallest eigenvalue of L on the real tangent space at u_g, generalized
    against the H^1 Gram operator I - Dxx.

    Solved densely up to ``subspace_dim_cap`` grid points and with a
    constrained LOBPCG beyond that.  The complex phase mode i u_g is excluded
    by construction; its Hessian residual ||H(i u_g)||_h is reported so the
    caller can see how flat that direction is.
    """
    grid = ctx.u_g.grid
    params = ctx.params
    ug = _realified_ground_state(ctx)
    n = grid.npoints
    phase_res = norm_l2(
        apply_hessian(GridField(grid, 1j * ctx.u_g.values), ctx)
    )

    v_pot = params.potential.evaluate(grid).reshape(-1)
    weight = (np.abs(ug) ** (params.p - 1.0)).reshape(-1)
    w_vec = (np.abs(ug) ** (params.p - 1.0) * ug).reshape(-1)

    if n <= subspace_dim_cap:
        dxx = _dense_dxx_fft(grid)
        l_mat = -0.5 * dxx
        l_mat[np.diag_indices_from(l_mat)] += (
            v_pot + params.omega - params.p * ctx.lambda_g * weight
        )
        b_mat = -dxx
        b_mat[np.diag_indices_from(b_mat)] += 1.0
        z = null_space(w_vec[None, :])
        lt = z.T @ l_mat @ z
        bt = z.T @ b_mat @ z
        vals = eigh(lt, bt, eigvals_only=True)
        lowest = tuple(float(v) for v in vals[: min(6, len(vals))])
        method = "dense"
    else:
        rho = dxx_symbol(grid)

        def l_matvec(x):
            f = x.reshape(grid.shape)
            lap = np.fft.ifftn(rho * np.fft.fftn(f)).real
            out = 0.5 * lap + (
                v_pot.reshape(grid.shape)
                + params.omega
                - params.p * ctx.lambda_g * weight.reshape(grid.shape)
            ) * f
            return out.reshape(-1)

        def b_matvec(x):
            f = x.reshape(grid.shape)
            return (f + np.fft.ifftn(rho * np.fft.fftn(f)).real).reshape(-1)

        def m_matvec(x):
            f = x.reshape(grid.shape)
            return np.fft.ifftn(np.fft.fftn(f) / (1.0 + rho)).real.reshape(-1)

        l_op = LinearOperator((n, n), matvec=l_matvec, dtype=np.float64)
        b_op = LinearOperator((n, n), matvec=b_matvec, dtype=np.float64)
        m_op = LinearOperator((n, n), matvec=m_matvec, dtype=np.float64)
        # Constraint: iterate B-orthogonally to Y, and Y^T B x = w^T x
        # exactly when Y = (I - Dxx)^{-1} w.
        y = m_matvec(w_vec)[:, None]
        rng = np.random.default_rng(1234)
        x0 = rng.standard_normal((n, 4))
        vals, _ = lobpcg(
            l_op, x0, B=b_op, M=m_op, Y=y, largest=False, tol=1e-9, maxiter=500
        )
        vals = np.sort(vals)
        lowest = tuple(float(v) for v in vals)
        method = "lobpcg"

    min_eig = float(lowest[0])
    return CoercivityResult(
        min_eig=min_eig,
        positive=bool(min_eig > 0.0),
        eigenvalues=lowest,
        phase_mode_residual=float(phase_res),
        method=method,
    )


def sample_tangent(
    ctx: GroundStateContext,
    rng: np.random.Generator,
    k_modes: int = 32,
) -> TangentField:
    """Random smooth tangent direction: white noise band-limited to the
    lowest ``k_modes`` Fourier modes per axis, projected to the tangent
    space.  Real-valued when the ground state is real-valued."""
    grid = ctx.u_g.grid
    is_real = bool(np.max(np.abs(ctx.u_g.values.imag)) == 0.0)
    noise = rng.standard_normal(grid.shape)
    if not is_real:
        noise = noise + 1j * rng.standard_normal(grid.shape)
    mask = np.ones(grid.shape, dtype=bool)
    for a in range(grid.dims):
        k = np.fft.fftfreq(grid.M[a], d=1.0 / grid.M[a])
        axis_mask = np.abs(k) <= k_modes / 2
        shape = [1] * grid.dims
        shape[a] = grid.M[a]
        mask &= axis_mask.reshape(shape)
    smooth = np.fft.ifftn(np.where(mask, np.fft.fftn(noise), 0.0))
    if is_real:
        smooth = smooth.real
    candidate = GridField(grid, smooth)
    xi = tangent_project(candidate, ctx)
    if norm_h1(xi.xi) == 0.0:
        raise GeometryError("tangent sample degenerated to zero")
    return xi


@dataclass(frozen=True)
class GrowthSample:
    scale: float
    ratio: float
    r: float
    dist_h1: float


@dataclass(frozen=True)
class GrowthProbeResult:
    """Quadratic-growth ratios (Q(u) - Q_g) / ||u - u_g||_{1,h}^2 by scale."""

    samples: tuple[GrowthSample, ...]
    skipped: tuple[str, ...]
    seed: int

    def ratios_at(self, scale: float) -> list[float]:
        return [s.ratio for s in self.samples if s.scale == scale]

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "skipped": list(self.skipped),
            "samples": [
                {
                    "scale": s.scale,
                    "ratio": s.ratio,
                    "r": s.r,
                    "dist_h1": s.dist_h1,
                }
                for s in self.samples
            ],
        }


def quadratic_growth_probe(
    ctx: GroundStateContext,
    scales: tuple[float, ...] = (1e-1, 1e-2, 1e-3),
    n_samples: int = 8,
    seed: int = 0,
    k_modes: int = 32,
) -> GrowthProbeResult:
    """Sample sphere points near u_g and measure the quadratic energy growth.

    For each scale and sample: draw a tangent direction, size it to
    ||xi||_{1,h} = scale, lift it back to the sphere through r(xi), and
    record (Q(u) - Q_g) / ||u - u_g||_{1,h}^2.  Scales whose lifted point is
    numerically indistinguishable from u_g (distance below 1e-8) are skipped
    with a reason."""
    rng = np.random.default_rng(seed)
    samples: list[GrowthSample] = []
    skipped: list[str] = []
    for scale in scales:
        for j in range(n_samples):
            direction = sample_tangent(ctx, rng, k_modes=k_modes)
            size = norm_h1(direction.xi)
            xi = TangentField(
                GridField(ctx.u_g.grid, direction.xi.values * (scale / size))
            )
            r = solve_r_of_xi(xi, ctx)
            u = chart(ctx, r, xi)
            diff = GridField(u.grid, u.values - ctx.u_g.values)
            dist = norm_h1(diff)
            if dist < 1e-8:
                skipped.append(
                    f"scale {scale:g} sample {j}: distance {dist:.3e} below 1e-8"
                )
                continue
            ratio = (Q(u, ctx.params) - ctx.Q_g) / dist**2
            samples.append(GrowthSample(scale=scale, ratio=ratio, r=r, dist_h1=dist))
    return GrowthProbeResult(samples=tuple(samples), skipped=tuple(skipped), seed=seed)


def lojasiewicz_quotient(u: GridField, ctx: GroundStateContext) -> float:
    """Quotient (Q(u) - Q_g) / ||mu(u)||_{-1,h}^2; 0 at gaps below 1e-14 and
    +inf when the residual vanishes while the gap does not."""
    gap = Q(u, ctx.params) - ctx.Q_g
    if gap <= 1e-14:
        return 0.0
    res = norm_hminus1(residual_mu(u, ctx.params))
    if res == 0.0:
        return math.inf
    return gap / res**2
