"""Uniform periodic grids and Fourier pseudospectral building blocks.

A grid covers the periodic box  prod_a [x0_a, x0_a + L_a)  with M_a
equispaced points per axis (M_a even).  Fields live on the grid nodes and
are always stored as complex128 arrays in C order (last axis fastest).

The second derivative is the trigonometric-interpolation derivative: it is
diagonal in Fourier space with symbol -rho_l, where for each axis

    rho_l = (sigma * l)^2,   sigma = 2*pi/L,   l = 0, ..., M/2-1, -M/2, ..., -1,

and the single Nyquist bin l = -M/2 carries rho = (sigma*M/2)^2, which is the
second derivative of the cosine representative of that mode.  With this
convention the operator is real-symmetric and negative semi-definite, and it
matches the dense cardinal-function differentiation matrix entrywise.

Discrete inner product and norms (vol = prod_a h_a):

    <u, v>_h    = vol * sum_j u_j * conj(v_j)
    ||u||_h     = <u, u>_h^(1/2)
    ||u||_{h,q} = (vol * sum_j |u_j|^q)^(1/q)
    |u|_{1,h}   = Re<-Dxx u, u>_h^(1/2)          (spectral H^1 semi-norm)
    ||u||_{1,h} = (||u||_h^2 + |u|_{1,h}^2)^(1/2)
    ||u||_{-1,h} = Re<u, w>_h^(1/2),  (I - Dxx) w = u
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.typing import NDArray


class GridError(ValueError):
    """Invalid grid, field, or operator argument."""


@dataclass(frozen=True)
class GridSpec:
    """Periodic tensor-product grid in 1 or 2 space dimensions.

    Attributes
    ----------
    x0 : tuple of float
        Left endpoint of the box per axis.
    L : tuple of float
        Box length per axis (the right endpoint x0 + L is identified with x0).
    M : tuple of int
        Number of grid points per axis; must be even and >= 4.
    """

    x0: tuple[float, ...]
    L: tuple[float, ...]
    M: tuple[int, ...]

    def __post_init__(self) -> None:
        x0 = tuple(float(v) for v in self.x0)
        L = tuple(float(v) for v in self.L)
        M = tuple(int(v) for v in self.M)
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "M", M)
        if not (len(x0) == len(L) == len(M)):
            raise GridError("x0, L, M must have the same number of axes")
        if len(M) not in (1, 2):
            raise GridError(f"only 1D and 2D grids are supported, got {len(M)} axes")
        for a, (length, m) in enumerate(zip(L, M)):
            if not np.isfinite(length) or length <= 0.0:
                raise GridError(f"axis {a}: box length must be positive, got {length}")
            if m < 4 or m % 2 != 0:
                raise GridError(f"axis {a}: M must be even and >= 4, got {m}")
        if not all(np.isfinite(v) for v in x0):
            raise GridError("x0 entries must be finite")

    @classmethod
    def make(cls, x0, L, M) -> "GridSpec":
        """Build a spec from scalars (1D) or sequences (any dimension)."""
        as_tuple = lambda v: (v,) if np.isscalar(v) else tuple(v)
        return cls(as_tuple(x0), as_tuple(L), as_tuple(M))

    @property
    def dims(self) -> int:
        return len(self.M)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.M

    @property
    def npoints(self) -> int:
        return int(np.prod(self.M))

    @property
    def h(self) -> tuple[float, ...]:
        """Grid spacing per axis."""
        return tuple(length / m for length, m in zip(self.L, self.M))

    @property
    def sigma(self) -> tuple[float, ...]:
        """Fundamental wavenumber 2*pi/L per axis."""
        return tuple(2.0 * np.pi / length for length in self.L)

    @property
    def cell_volume(self) -> float:
        """Volume element of the trapezoidal/rectangle quadrature, prod_a h_a."""
        return float(np.prod(self.h))

    def axis_points(self, axis: int) -> NDArray[np.float64]:
        """Node coordinates x0 + j*h along one axis."""
        return self.x0[axis] + self.h[axis] * np.arange(self.M[axis])

    def meshes(self) -> tuple[NDArray[np.float64], ...]:
        """Coordinate arrays of shape ``self.shape`` (ij indexing)."""
        axes = [self.axis_points(a) for a in range(self.dims)]
        return tuple(np.meshgrid(*axes, indexing="ij"))


@dataclass(frozen=True)
class GridField:
    """A complex-valued nodal field on a :class:`GridSpec`.

    The value array is defensively copied and marked read-only: fields are
    immutable value objects, and every operation returns a new field.
    """

    grid: GridSpec
    values: NDArray[np.complex128]

    def __post_init__(self) -> None:
        arr = np.array(self.values, dtype=np.complex128, order="C", copy=True)
        if arr.size != self.grid.npoints:
            raise GridError(
                f"field has {arr.size} values, grid has {self.grid.npoints} points"
            )
        arr = arr.reshape(self.grid.shape)
        if not np.all(np.isfinite(arr.view(np.float64))):
            raise GridError("field contains non-finite entries")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    def with_values(self, values: NDArray) -> "GridField":
        """New field on the same grid."""
        return GridField(self.grid, values)


@lru_cache(maxsize=None)
def dxx_symbol(grid: GridSpec) -> NDArray[np.float64]:
    """Nonnegative symbol rho of -Dxx on ``grid`` (shape ``grid.shape``).

    Per axis rho_l = (sigma*l)^2 in FFT bin order with the Nyquist bin at
    (sigma*M/2)^2; in 2D the per-axis symbols add.  The array is cached per
    grid and read-only.
    """
    per_axis = []
    for a in range(grid.dims):
        m = grid.M[a]
        k = np.fft.fftfreq(m, d=1.0 / m)  # integer mode numbers, Nyquist at -M/2
        per_axis.append((grid.sigma[a] * k) ** 2)
    if grid.dims == 1:
        rho = per_axis[0]
    else:
        rho = per_axis[0][:, None] + per_axis[1][None, :]
    rho = np.ascontiguousarray(rho)
    rho.setflags(write=False)
    return rho


def apply_dxx(u: GridField) -> GridField:
    """Spectral Laplacian Dxx u (sum of second derivatives over the axes)."""
    rho = dxx_symbol(u.grid)
    out = np.fft.ifftn(-rho * np.fft.fftn(u.values))
    return GridField(u.grid, out)


def resolvent_solve(rhs: GridField, a: float, b: float) -> GridField:
    """Solve (a*I - b*Dxx) w = rhs diagonally in Fourier space.

    Requires a > 0 and b >= 0 so the symbol a + b*rho is strictly positive.
    """
    if not (a > 0.0):
        raise GridError(f"resolvent requires a > 0, got a = {a}")
    if b < 0.0:
        raise GridError(f"resolvent requires b >= 0, got b = {b}")
    rho = dxx_symbol(rhs.grid)
    what = np.fft.fftn(rhs.values) / (a + b * rho)
    return GridField(rhs.grid, np.fft.ifftn(what))


def _check_same_grid(u: GridField, v: GridField) -> None:
    if u.grid != v.grid:
        raise GridError("fields live on different grids")


def inner(u: GridField, v: GridField) -> complex:
    """Discrete L^2 pairing <u, v>_h = vol * sum u_j conj(v_j)."""
    _check_same_grid(u, v)
    return complex(u.grid.cell_volume * np.vdot(v.values, u.values))


def norm_l2(u: GridField) -> float:
    return float(np.sqrt(u.grid.cell_volume) * np.linalg.norm(u.values))


def norm_lp(u: GridField, q: float) -> float:
    """Discrete L^q norm (vol * sum |u|^q)^(1/q), q >= 1."""
    if q < 1.0:
        raise GridError(f"norm_lp requires q >= 1, got {q}")
    amp = np.abs(u.values)
    return float((u.grid.cell_volume * np.sum(amp**q)) ** (1.0 / q))


def norm_linf(u: GridField) -> float:
    return float(np.max(np.abs(u.values)))


def seminorm_h1(u: GridField) -> float:
    """Spectral H^1 semi-norm |u|_{1,h} = Re<-Dxx u, u>_h^(1/2) via Parseval."""
    rho = dxx_symbol(u.grid)
    uhat = np.fft.fftn(u.values)
    val = u.grid.cell_volume / u.grid.npoints * np.sum(rho * np.abs(uhat) ** 2)
    return float(np.sqrt(max(val, 0.0)))


def seminorm_fwd_diff(u: GridField) -> float:
    """Forward-difference semi-norm ||grad_h u||_h with periodic wrap-around.

    Squared value: sum over axes of vol * sum_j |u_{j+1} - u_j|^2 / h_axis^2,
    where j+1 wraps to 0 at the last node of each axis.
    """
    total = 0.0
    for a in range(u.grid.dims):
        diff = np.roll(u.values, -1, axis=a) - u.values
        total += np.sum(np.abs(diff) ** 2) / u.grid.h[a] ** 2
    return float(np.sqrt(u.grid.cell_volume * total))


def norm_h1(u: GridField) -> float:
    """Full discrete H^1 norm (||u||_h^2 + |u|_{1,h}^2)^(1/2)."""
    return float(np.hypot(norm_l2(u), seminorm_h1(u)))


def norm_hminus1(u: GridField) -> float:
    """Dual norm ||u||_{-1,h} = Re<u, w>_h^(1/2) with (I - Dxx) w = u.

    Equals sup_{v != 0} |<u, v>_h| / ||v||_{1,h}; the supremum is attained at
    v = w.
    """
    w = resolvent_solve(u, 1.0, 1.0)
    val = inner(u, w).real
    return float(np.sqrt(max(val, 0.0)))


@dataclass(frozen=True)
class FieldNorms:
    """Bundle of the discrete norms of one field (lp evaluated at a given q)."""

    l2: float
    lp: float
    h1_semi: float
    h1: float
    fwd_diff_semi: float
    h_minus1: float


def norms(u: GridField, q: float) -> FieldNorms:
    """All discrete norms of ``u`` in one call; ``q`` is the L^q exponent."""
    return FieldNorms(
        l2=norm_l2(u),
        lp=norm_lp(u, q),
        h1_semi=seminorm_h1(u),
        h1=norm_h1(u),
        fwd_diff_semi=seminorm_fwd_diff(u),
        h_minus1=norm_hminus1(u),
    )


def normalize_lp(u: GridField, q: float) -> tuple[GridField, float]:
    """Scale ``u`` to unit L^q norm; returns (scaled field, original norm)."""
    n = norm_lp(u, q)
    if n == 0.0:
        raise GridError("cannot normalize the zero field")
    return GridField(u.grid, u.values / n), n


def align_phase(u: GridField, v: GridField) -> GridField:
    """Rotate ``v`` by the global phase that best matches ``u``.

    The minimizer of theta |-> ||u - e^{i theta} v||_h is theta = arg<u, v>_h
    (expand the square: the cross term is 2 Re(e^{-i theta} <u, v>_h), maximal
    when the phases cancel).  Returns e^{i theta} v; when the pairing vanishes
    every phase is equally good and v is returned unchanged.
    """
    z = inner(u, v)
    if z == 0:
        return v
    return GridField(v.grid, np.exp(1j * np.angle(z)) * v.values)
