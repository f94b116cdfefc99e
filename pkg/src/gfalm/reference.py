"""Reference states and canonical initial data.

For the cubic focusing problem (p = 3, beta = -1, V = 0) in 1D the ground
state is known in closed form:

    phi*(x) = sqrt(2 omega) sech(sqrt(2 omega) x),

and the sphere representative is u* = phi* / ||phi*||_{L^4} with the
*continuum* L^4 norm, evaluated by adaptive quadrature.  Sampling u* on a
grid gives the interpolated benchmark the solver error is measured against.

For the 2D harmonic-trap problem there is no closed form; the benchmark is a
tightly converged run from the isotropic Gaussian, persisted as a field file
plus a JSON certificate so later comparisons can reload it bit-exactly.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.integrate import quad

from .fieldio import read_field, write_field
from .functionals import FunctionalError, ProblemParams, lambda_tilde, residual_mu
from .grid import GridError, GridField, GridSpec, norm_linf, norm_lp
from .solver import SolveOutcome, SolverConfig, run


class ReferenceError(ValueError):
    """Invalid reference request (wrong dimension, bad variant, ...)."""


def soliton_l4_norm(omega: float) -> float:
    """Continuum L^4 norm of phi*(x) = sqrt(2 omega) sech(sqrt(2 omega) x),
    by adaptive quadrature on (-64, 64) at tolerance 1e-13."""
    if omega <= 0.0:
        raise ReferenceError(f"soliton requires omega > 0, got {omega}")
    s = np.sqrt(2.0 * omega)
    val, _ = quad(
        lambda x: (s / np.cosh(s * x)) ** 4, -64.0, 64.0, epsabs=1e-13, epsrel=1e-13
    )
    return float(val**0.25)


def exact_soliton(omega: float, grid: GridSpec) -> GridField:
    """Grid samples of u* = phi*/||phi*||_{L^4} (continuum-normalized).

    The discrete L^4 norm of the result is 1 only up to quadrature/domain
    truncation error; callers that need a sphere point must renormalize.
    """
    if grid.dims != 1:
        raise ReferenceError("the closed-form ground state is one-dimensional")
    s = np.sqrt(2.0 * omega)
    x = grid.axis_points(0)
    phi = s / np.cosh(s * x)
    return GridField(grid, phi / soliton_l4_norm(omega))


@dataclass(frozen=True)
class InitialDataSpec:
    """Closed-form initial data, sampled and normalized on the sphere.

    Variants
    --------
    gaussian          exp(-sum_a (x_a - center_a)^2 / (2 width_a^2))
    shifted_gaussian  the standard Gaussian recentered at ``offset``
    vortex            (x_1 + i x_2) * gaussian, 2D only
    soliton_exact     the closed-form 1D ground state at ``omega``
    constant          the constant field
    from_file         samples loaded from a field file at ``path``
    """

    kind: str
    center: tuple[float, ...] | None = None
    width: tuple[float, ...] | None = None
    offset: tuple[float, ...] | None = None
    omega: float | None = None
    path: str | None = None

    _KINDS = (
        "gaussian",
        "shifted_gaussian",
        "vortex",
        "soliton_exact",
        "constant",
        "from_file",
    )

    def __post_init__(self) -> None:
        if self.kind not in self._KINDS:
            raise ReferenceError(f"unknown initial data kind {self.kind!r}")
        for name in ("center", "width", "offset"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(
                    self, name, (float(v),) if np.isscalar(v) else tuple(float(t) for t in v)
                )
        if self.kind == "shifted_gaussian" and self.offset is None:
            raise ReferenceError("shifted_gaussian requires an offset")
        if self.kind == "soliton_exact" and self.omega is None:
            raise ReferenceError("soliton_exact requires omega")
        if self.kind == "from_file" and not self.path:
            raise ReferenceError("from_file requires a path")


def _axis_param(value, grid: GridSpec, default: float) -> tuple[float, ...]:
    if value is None:
        return (default,) * grid.dims
    if len(value) == 1 and grid.dims > 1:
        return value * grid.dims
    if len(value) != grid.dims:
        raise ReferenceError(
            f"parameter has {len(value)} components for a {grid.dims}D grid"
        )
    return value


def _gaussian(grid: GridSpec, center, width) -> np.ndarray:
    c = _axis_param(center, grid, 0.0)
    w = _axis_param(width, grid, 1.0)
    arg = np.zeros(grid.shape)
    for a, x in enumerate(grid.meshes()):
        arg += (x - c[a]) ** 2 / (2.0 * w[a] ** 2)
    return np.exp(-arg)


def make_initial(spec: InitialDataSpec, grid: GridSpec, p: float) -> GridField:
    """Sample the requested variant and normalize it to ||.||_{h,p+1} = 1."""
    if spec.kind == "gaussian":
        vals = _gaussian(grid, spec.center, spec.width)
    elif spec.kind == "shifted_gaussian":
        vals = _gaussian(grid, spec.offset, spec.width)
    elif spec.kind == "vortex":
        if grid.dims != 2:
            raise ReferenceError("vortex initial data requires a 2D grid")
        x1, x2 = grid.meshes()
        vals = (x1 + 1j * x2) * _gaussian(grid, spec.center, spec.width)
    elif spec.kind == "soliton_exact":
        vals = exact_soliton(spec.omega, grid).values
    elif spec.kind == "constant":
        vals = np.ones(grid.shape)
    else:  # from_file
        loaded = read_field(spec.path)
        if loaded.grid != grid:
            raise ReferenceError(f"{spec.path}: field grid differs from the target grid")
        vals = loaded.values
    field = GridField(grid, vals)
    n = norm_lp(field, p + 1.0)
    if n == 0.0:
        raise ReferenceError("initial data is identically zero on the grid")
    return GridField(grid, field.values / n)


@dataclass(frozen=True)
class Reference2D:
    """Persisted high-accuracy 2D benchmark state."""

    field: GridField
    certificate: dict
    field_path: Path
    certificate_path: Path


def _certificate_hash(payload: dict) -> str:
    canon = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def make_reference_2d(
    params: ProblemParams,
    grid: GridSpec,
    out_dir: str | Path,
    tau: float = 0.01,
    n_steps: int = 10_000,
    residual_target: float = 1e-10,
) -> Reference2D:
    """Run the solver from the isotropic Gaussian for exactly ``n_steps``
    steps of size ``tau`` and persist the final state plus a certificate.

    The certificate records Q, the multiplier, both residual norms, and a
    hash of the generating configuration; it is marked valid only when the
    final residual meets ``residual_target``.  Files: reference.field and
    reference.json under ``out_dir``.
    """
    if grid.dims != 2:
        raise ReferenceError("the persisted benchmark is specific to 2D problems")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    u0 = make_initial(InitialDataSpec(kind="gaussian"), grid, params.p)
    config = SolverConfig(
        tau=tau,
        tol_linf=1e-15,  # effectively run the full budget
        max_iters=n_steps,
        record_every=max(1, n_steps // 100),
    )
    outcome = run(u0, params, config)
    final = outcome.final
    res = residual_mu(final, params)
    res_linf = norm_linf(res)
    last = outcome.records[-1]

    config_payload = {
        "grid": {"x0": list(grid.x0), "L": list(grid.L), "M": list(grid.M)},
        "params": {
            "omega": params.omega,
            "beta": params.beta,
            "p": params.p,
            "potential": params.potential.kind,
            "gamma": list(params.potential.gamma or ()),
        },
        "tau": tau,
        "n_steps": n_steps,
        "initial": "gaussian",
    }
    certificate = {
        "Q": outcome.Q_final,
        "lambda": outcome.lambda_final,
        "residual_linf": res_linf,
        "residual_hm1": last.residual_hm1,
        "iterations": outcome.iterations_used,
        "config_hash": _certificate_hash(config_payload),
        "residual_target": residual_target,
        "valid": bool(res_linf <= residual_target),
    }

    field_path = out_dir / "reference.field"
    cert_path = out_dir / "reference.json"
    write_field(field_path, final)
    cert_path.write_text(json.dumps(certificate, indent=2, sort_keys=True) + "\n")
    return Reference2D(
        field=final,
        certificate=certificate,
        field_path=field_path,
        certificate_path=cert_path,
    )


def load_reference_2d(out_dir: str | Path) -> Reference2D:
    """Reload a persisted benchmark; raises if the certificate is invalid."""
    out_dir = Path(out_dir)
    field_path = out_dir / "reference.field"
    cert_path = out_dir / "reference.json"
    certificate = json.loads(cert_path.read_text())
    if not certificate.get("valid", False):
        raise ReferenceError(f"{cert_path}: benchmark certificate is marked invalid")
    return Reference2D(
        field=read_field(field_path),
        certificate=certificate,
        field_path=field_path,
        certificate_path=cert_path,
    )
