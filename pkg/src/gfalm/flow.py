"""Continuous-time normalized gradient flow, integrated with classical RK4.

The flow on the unit L^{p+1} sphere reads

    du/dt = -A u + lambda(u) |u|^{p-1} u,
    lambda(u) = Re<A u, |u|^{p-1} u>_h / ||u||_{h,2p}^{2p},

where the exact multiplier makes the right side tangent to the sphere, so
the constraint ||u||_{h,p+1} = 1 is conserved by the exact dynamics and
drifts only through the O(dt^4) time-discretization error.  Energy Q
decreases along exact trajectories; the integrator tracks the largest
per-step increase as a diagnostic.

The integrator is explicit, so stiffness of -1/2 Dxx caps the usable step:
beyond dt ~ 2/rho_max (rho_max the largest symbol value) a warning is
emitted, and high-mode roundoff will amplify until the run aborts with a
blow-up error.  Choose the resolution to match the step size.  2D inputs are
rejected unless explicitly allowed; the decay theory backing this flow is
one-dimensional, and the stiffness penalty in 2D is rarely worth it.
"""

from __future__ import annotations

import time
import warnings
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .fitting import FitError, RateFit, fit_log_decay
from .functionals import ProblemParams, modulus_power
from .grid import GridError, GridField, dxx_symbol
from .solver import ConfigError, SolveOutcome, SolverError


@dataclass(frozen=True)
class FlowConfig:
    """Integration controls for the continuous flow."""

    dt: float
    t_final: float
    renormalize_each_step: bool = False
    record_every: int = 1
    reference: GridField | None = None
    allow_2d: bool = False
    on_record: Callable[["FlowRecord"], None] | None = None

    def __post_init__(self) -> None:
        if not (self.dt > 0.0) or not np.isfinite(self.dt):
            raise ConfigError(f"dt must be positive and finite, got {self.dt}")
        if self.t_final < self.dt:
            raise ConfigError("t_final must be at least one step long")
        if self.record_every < 1:
            raise ConfigError(f"record_every must be >= 1, got {self.record_every}")


@dataclass(frozen=True)
class FlowRecord:
    """Diagnostics at one recorded time: energy, constraint drift
    | ||u||_{h,p+1}^{p+1} - 1 |, and distance to the reference if given."""

    t: float
    Q: float
    constraint_drift: float
    err_h1: float | None = None


class _FlowWorkspace:
    def __init__(self, grid, params: ProblemParams):
        self.grid = grid
        self.params = params
        self.vol = grid.cell_volume
        self.rho = dxx_symbol(grid)
        self.V = params.potential.evaluate(grid)

    def rhs(self, u: NDArray) -> NDArray:
        p = self.params
        au = 0.5 * np.fft.ifftn(self.rho * np.fft.fftn(u)) + (self.V + p.omega) * u
        w = modulus_power(u, p.p)
        denom = float(np.sum(np.abs(u) ** (2.0 * p.p)))
        if denom == 0.0:
            raise SolverError("flow right side undefined for the zero field")
        lam = float(np.real(np.vdot(w, au))) / denom
        return -au + lam * w

    def energy(self, u: NDArray) -> float:
        vhat = np.fft.fftn(u)
        semi2 = self.vol / self.grid.npoints * float(np.sum(self.rho * np.abs(vhat) ** 2))
        amp2 = np.abs(u) ** 2
        return (
            0.5 * semi2
            + self.vol * float(np.sum(self.V * amp2))
            + self.params.omega * self.vol * float(np.sum(amp2))
        )

    def lp1(self, u: NDArray) -> float:
        q = self.params.p + 1.0
        return float((self.vol * np.sum(np.abs(u) ** q)) ** (1.0 / q))

    def h1_err(self, u: NDArray, ref: NDArray) -> float:
        d = u - ref
        dhat = np.fft.fftn(d)
        semi2 = self.vol / self.grid.npoints * float(np.sum(self.rho * np.abs(dhat) ** 2))
        return float(np.sqrt(self.vol * np.sum(np.abs(d) ** 2) + semi2))


def flow_rhs(u: GridField, params: ProblemParams) -> GridField:
    """Right side -A u + lambda(u)|u|^{p-1}u of the normalized flow."""
    ws = _FlowWorkspace(u.grid, params)
    return GridField(u.grid, ws.rhs(u.values.astype(np.complex128)))


def rk4_integrate(
    u0: GridField, params: ProblemParams, config: FlowConfig
) -> SolveOutcome:
    """Integrate the flow from u0 (normalized defensively) to t_final.

    Records every ``record_every`` steps plus the final step.  Raises
    :class:`SolverError` with the time stamp on blow-up.  Warns when dt
    exceeds the explicit-stability guideline 2/rho_max.
    """
    if u0.grid.dims == 2 and not config.allow_2d:
        raise GridError(
            "continuous-flow integration of 2D problems must be enabled explicitly"
        )
    t_start = time.perf_counter()
    ws = _FlowWorkspace(u0.grid, params)
    rho_max = float(np.max(ws.rho))
    if config.dt > 2.0 / rho_max:
        warnings.warn(
            f"dt = {config.dt} exceeds the stability guideline "
            f"2/rho_max = {2.0 / rho_max:.3e}; expect amplification of the "
            "highest modes",
            RuntimeWarning,
            stacklevel=2,
        )

    u = u0.values.astype(np.complex128)
    n0 = ws.lp1(u)
    if n0 == 0.0:
        raise SolverError("initial field is identically zero")
    u = u / n0
    ref_vals = None
    if config.reference is not None:
        if config.reference.grid != u0.grid:
            raise ConfigError("reference field lives on a different grid")
        ref_vals = config.reference.values

    n_steps = int(round(config.t_final / config.dt))
    dt = config.dt
    records: list[FlowRecord] = []
    q_prev = ws.energy(u)
    max_q_increase = 0.0

    def record(step: int) -> None:
        t = step * dt
        drift = abs(ws.lp1(u) ** (params.p + 1.0) - 1.0)
        err = ws.h1_err(u, ref_vals) if ref_vals is not None else None
        rec = FlowRecord(t=t, Q=ws.energy(u), constraint_drift=drift, err_h1=err)
        records.append(rec)
        if config.on_record is not None:
            config.on_record(rec)

    record(0)
    for n in range(1, n_steps + 1):
        k1 = ws.rhs(u)
        k2 = ws.rhs(u + 0.5 * dt * k1)
        k3 = ws.rhs(u + 0.5 * dt * k2)
        k4 = ws.rhs(u + dt * k3)
        u = u + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(u.view(np.float64))):
            raise SolverError(f"flow blow-up at t = {n * dt:.6g} (step {n})")
        if config.renormalize_each_step:
            u = u / ws.lp1(u)
        q_now = ws.energy(u)
        max_q_increase = max(max_q_increase, q_now - q_prev)
        q_prev = q_now
        if n % config.record_every == 0 or n == n_steps:
            record(n)

    final = GridField(u0.grid, u)
    lp1 = ws.lp1(u)
    return SolveOutcome(
        final=final,
        records=records,
        converged=True,
        iterations_used=n_steps,
        Q_final=q_prev,
        lambda_final=q_prev / lp1 ** (params.p + 1.0),
        tau=dt,
        alpha=float("nan"),
        max_q_increase=max_q_increase,
        wall_time=time.perf_counter() - t_start,
    )


def decay_rate_estimate(records: list[FlowRecord], q_limit: float) -> RateFit:
    """Fit the exponential decay of the energy gap Q(t) - q_limit.

    Requires at least 10 records with a gap above 1e-12; returns the fitted
    slope together with its R^2 so callers can judge the fit quality.
    """
    t = np.array([r.t for r in records], dtype=float)
    gap = np.array([r.Q for r in records], dtype=float) - q_limit
    mask = gap > 1e-12
    if int(np.count_nonzero(mask)) < 10:
        raise FitError(
            "need at least 10 records with Q above the limit for a rate estimate"
        )
    return fit_log_decay(t[mask], gap[mask], window=None, min_points=10)
