"""Fully discrete normalized gradient flow with asymptotic multiplier (GFALM).

One step from the current sphere point u^n:

    solve   ((1 + tau*alpha) I - tau/2 Dxx) u~ = g(u^n),
    with    g(u^n) = u^n + tau (alpha - V - omega) u^n
                         + tau lambda~(u^n) |u^n|^{p-1} u^n,
    recover mu~^{n+1} = (u^n - u~)/tau,
    project u^{n+1} = u~ / ||u~||_{h,p+1}.

With the stabilization alpha >= 1/2 max{0, max_j (V_j + omega)} + 1/2 the
energy Q decays unconditionally in the step size; each step satisfies

    Q(u^{n+1}) - Q(u^n)
        <= -(tau^2 ||mu~||_{1,h}^2 + 4 tau ||mu~||_h^2) / (2 ||u~||_{h,p+1}^2).

``decay_certificate`` evaluates the left side minus the right side, so the
certificate value is <= 0 up to roundoff on every step of an admissible run.
"""

from __future__ import annotations

import time
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .functionals import ProblemParams, alpha_min, modulus_power
from .grid import GridField, dxx_symbol, norm_lp, seminorm_h1


class ConfigError(ValueError):
    """Inconsistent solver configuration."""


class SolverError(RuntimeError):
    """Numerical failure during iteration (non-finite data, lost decay)."""


@dataclass(frozen=True)
class SolverConfig:
    """Iteration controls.

    ``alpha`` is either the string ``"auto"`` (use the smallest admissible
    stabilization for the problem) or an explicit value, which must not fall
    below that threshold.  ``reference`` enables the err_h1 and lojasiewicz_q
    record columns.  With ``assert_decay`` the run enforces monotonicity of Q
    and tracks the step-wise decay certificate.  ``on_record`` is called with
    each :class:`IterationRecord` as it is produced, so callers can stream
    records to disk while the iteration is still running.
    """

    tau: float
    alpha: float | str = "auto"
    tol_linf: float = 1e-11
    max_iters: int = 100_000
    record_every: int = 1
    reference: GridField | None = None
    assert_decay: bool = True
    on_record: Callable[["IterationRecord"], None] | None = None

    def __post_init__(self) -> None:
        if not (self.tau > 0.0) or not np.isfinite(self.tau):
            raise ConfigError(f"tau must be positive and finite, got {self.tau}")
        if not (self.tol_linf > 0.0):
            raise ConfigError(f"tol_linf must be positive, got {self.tol_linf}")
        if self.max_iters < 0:
            raise ConfigError(f"max_iters must be >= 0, got {self.max_iters}")
        if self.record_every < 1:
            raise ConfigError(f"record_every must be >= 1, got {self.record_every}")
        if isinstance(self.alpha, str):
            if self.alpha != "auto":
                raise ConfigError(f"alpha must be 'auto' or a number, got {self.alpha!r}")
        elif not np.isfinite(self.alpha):
            raise ConfigError(f"alpha must be finite, got {self.alpha}")


def resolve_alpha(config: SolverConfig, params: ProblemParams, grid) -> float:
    """Concrete stabilization for a run; explicit values are checked against
    the admissible minimum."""
    amin = alpha_min(params, grid)
    if isinstance(config.alpha, str):
        return amin
    if config.alpha < amin - 1e-12:
        raise ConfigError(
            f"alpha = {config.alpha} is below the admissible minimum {amin}"
        )
    return float(config.alpha)


@dataclass(frozen=True)
class IterationRecord:
    """Diagnostics at one recorded iterate u^n.

    ``residual_linf`` is the max-norm of the mu~ produced by the step into
    u^n (the stopping quantity); ``residual_hm1`` is ||mu(u^n)||_{-1,h} of the
    Euler-Lagrange residual at u^n, so Q and residual_hm1 at the same n are
    the pair entering the Lojasiewicz quotient.
    """

    n: int
    Q: float
    residual_linf: float
    residual_hm1: float
    lp1_norm: float
    err_h1: float | None = None
    lojasiewicz_q: float | None = None


@dataclass(frozen=True)
class StepResult:
    """Output of one step: the new sphere point, the discrete flow residual
    mu~, and the pre-projection point u~."""

    u_next: GridField
    mu_tilde: GridField
    u_tilde: GridField


@dataclass
class SolveOutcome:
    """Converged (or truncated) run with its recorded trajectory."""

    final: GridField
    records: list
    converged: bool
    iterations_used: int
    Q_final: float
    lambda_final: float
    tau: float
    alpha: float
    max_decay_certificate: float | None = None
    min_utilde_lp1: float | None = None
    max_q_increase: float | None = None
    wall_time: float = 0.0


class _Stepper:
    """Precomputed arrays for the repeated step on one (grid, params) pair."""

    def __init__(self, grid, params: ProblemParams, tau: float, alpha: float):
        self.grid = grid
        self.params = params
        self.tau = tau
        self.alpha = alpha
        self.vol = grid.cell_volume
        self.rho = dxx_symbol(grid)
        self.V = params.potential.evaluate(grid)
        self.denom = (1.0 + tau * alpha) + 0.5 * tau * self.rho
        self.pexp = params.p + 1.0

    def lp1_norm(self, values: NDArray) -> float:
        return float((self.vol * np.sum(np.abs(values) ** self.pexp)) ** (1.0 / self.pexp))

    def energy(self, values: NDArray) -> float:
        """Q from one forward transform (Parseval for the semi-norm)."""
        vhat = np.fft.fftn(values)
        semi2 = self.vol / self.grid.npoints * float(np.sum(self.rho * np.abs(vhat) ** 2))
        amp2 = np.abs(values) ** 2
        pot = self.vol * float(np.sum(self.V * amp2))
        mass = self.vol * float(np.sum(amp2))
        return 0.5 * semi2 + pot + self.params.omega * mass

    def h1_norm2(self, values: NDArray) -> tuple[float, float]:
        """(||v||_h^2, |v|_{1,h}^2) of an arbitrary array."""
        vhat = np.fft.fftn(values)
        semi2 = self.vol / self.grid.npoints * float(np.sum(self.rho * np.abs(vhat) ** 2))
        l2sq = self.vol * float(np.sum(np.abs(values) ** 2))
        return l2sq, semi2

    def step(self, u: NDArray, q_u: float, lp1_u: float):
        """Advance one iterate; returns (u_next, mu_tilde, u_tilde, lp1 of u~)."""
        p = self.params
        lam = q_u / lp1_u**self.pexp
        g = u + self.tau * (
            (self.alpha - self.V - p.omega) * u + lam * modulus_power(u, p.p)
        )
        u_tilde = np.fft.ifftn(np.fft.fftn(g) / self.denom)
        mu_tilde = (u - u_tilde) / self.tau
        nt = self.lp1_norm(u_tilde)
        if not np.isfinite(nt) or nt == 0.0:
            raise SolverError("pre-projection point has invalid L^{p+1} norm")
        u_next = u_tilde / nt
        return u_next, mu_tilde, u_tilde, nt


def gfalm_step(
    u: GridField, params: ProblemParams, tau: float, alpha: float
) -> StepResult:
    """One step from a sphere point u (||u||_{h,p+1} = 1 expected)."""
    st = _Stepper(u.grid, params, tau, alpha)
    vals = u.values
    u_next, mu_tilde, u_tilde, _ = st.step(vals, st.energy(vals), st.lp1_norm(vals))
    return StepResult(
        u_next=GridField(u.grid, u_next),
        mu_tilde=GridField(u.grid, mu_tilde),
        u_tilde=GridField(u.grid, u_tilde),
    )


def decay_certificate(
    q_before: float, q_after: float, step: StepResult, tau: float, p: float
) -> float:
    """Energy-decay certificate for one step:

        Q(u^{n+1}) - Q(u^n)
            + (tau^2 ||mu~||_{1,h}^2 + 4 tau ||mu~||_h^2) / (2 ||u~||_{h,p+1}^2)

    which is <= 0 up to roundoff whenever the stabilization is admissible.
    """
    mu = step.mu_tilde
    l2sq = float(np.sum(np.abs(mu.values) ** 2)) * mu.grid.cell_volume
    h1sq = l2sq + seminorm_h1(mu) ** 2
    nt = norm_lp(step.u_tilde, p + 1.0)
    gain = (tau**2 * h1sq + 4.0 * tau * l2sq) / (2.0 * nt**2)
    return q_after - q_before + gain


def _residual_hm1(stepper: _Stepper, u: NDArray, q_u: float, lp1_u: float) -> float:
    """||mu(u)||_{-1,h} with mu = A u - lambda~(u) |u|^{p-1} u."""
    p = stepper.params
    au = (
        0.5 * np.fft.ifftn(stepper.rho * np.fft.fftn(u))
        + (stepper.V + p.omega) * u
    )
    lam = q_u / lp1_u**stepper.pexp
    mu = au - lam * modulus_power(u, p.p)
    what = np.fft.fftn(mu) / (1.0 + stepper.rho)
    w = np.fft.ifftn(what)
    val = stepper.vol * float(np.real(np.vdot(w, mu)))
    return float(np.sqrt(max(val, 0.0)))


def run(u0: GridField, params: ProblemParams, config: SolverConfig) -> SolveOutcome:
    """Iterate from u0 (normalized defensively) until ||mu~||_{h,inf} falls
    below ``config.tol_linf`` or ``config.max_iters`` steps are exhausted."""
    t_start = time.perf_counter()
    alpha = resolve_alpha(config, params, u0.grid)
    st = _Stepper(u0.grid, params, config.tau, alpha)

    u = u0.values.astype(np.complex128)
    n0 = st.lp1_norm(u)
    if n0 == 0.0:
        raise SolverError("initial field is identically zero")
    u = u / n0

    ref_vals = None
    q_ref = None
    if config.reference is not None:
        if config.reference.grid != u0.grid:
            raise ConfigError("reference field lives on a different grid")
        ref_vals = config.reference.values
        q_ref = st.energy(ref_vals) / st.lp1_norm(ref_vals) ** st.pexp

    q_u = st.energy(u)
    lp1_u = st.lp1_norm(u)
    records: list[IterationRecord] = []
    converged = False
    iterations = 0
    max_cert = None
    min_nt = None
    max_q_inc = None
    res_linf = np.inf

    def record(n: int, res: float) -> None:
        q_here = st.energy(u)
        lp1_here = st.lp1_norm(u)
        hm1 = _residual_hm1(st, u, q_here, lp1_here)
        err = None
        loja = None
        if ref_vals is not None:
            dl2, dsemi = st.h1_norm2(u - ref_vals)
            err = float(np.sqrt(dl2 + dsemi))
            gap = q_here - q_ref
            if gap <= 1e-14:
                loja = 0.0
            elif hm1 <= 1e-14:
                loja = float("inf")
            else:
                loja = gap / hm1**2
        rec = IterationRecord(
            n=n,
            Q=q_here,
            residual_linf=res,
            residual_hm1=hm1,
            lp1_norm=lp1_here,
            err_h1=err,
            lojasiewicz_q=loja,
        )
        records.append(rec)
        if config.on_record is not None:
            config.on_record(rec)

    for n in range(1, config.max_iters + 1):
        u_next, mu_tilde, u_tilde, nt = st.step(u, q_u, lp1_u)
        if not np.all(np.isfinite(u_next.view(np.float64))):
            raise SolverError(f"non-finite iterate at step {n}")
        res_linf = float(np.max(np.abs(mu_tilde)))
        q_next = st.energy(u_next)
        iterations = n
        inc = q_next - q_u
        max_q_inc = inc if max_q_inc is None else max(max_q_inc, inc)

        if config.assert_decay:
            if q_next > q_u + 1e-12:
                raise SolverError(
                    f"energy increased at step {n}: Q {q_u!r} -> {q_next!r}"
                )
            mu_l2sq = st.vol * float(np.sum(np.abs(mu_tilde) ** 2))
            _, mu_semi2 = st.h1_norm2(mu_tilde)
            gain = (
                config.tau**2 * (mu_l2sq + mu_semi2) + 4.0 * config.tau * mu_l2sq
            ) / (2.0 * nt**2)
            cert = q_next - q_u + gain
            max_cert = cert if max_cert is None else max(max_cert, cert)
        min_nt = nt if min_nt is None else min(min_nt, nt)

        u = u_next
        q_u = q_next
        lp1_u = st.lp1_norm(u)
        converged = res_linf < config.tol_linf
        if converged or n % config.record_every == 0 or n == config.max_iters:
            record(n, res_linf)
        if converged:
            break

    if config.max_iters == 0:
        q_u = st.energy(u)
        lp1_u = st.lp1_norm(u)

    final = GridField(u0.grid, u)
    lam_final = q_u / lp1_u**st.pexp
    return SolveOutcome(
        final=final,
        records=records,
        converged=converged,
        iterations_used=iterations,
        Q_final=q_u,
        lambda_final=lam_final,
        tau=config.tau,
        alpha=alpha,
        max_decay_certificate=max_cert,
        min_utilde_lp1=min_nt,
        max_q_increase=max_q_inc,
        wall_time=time.perf_counter() - t_start,
    )
