"""Chart, linearized operators, coercivity, growth, and Lojasiewicz probes.

The coercivity engine is validated against an exactly solvable case: at the
normalized-constant critical point of the free problem the tangent space is
spanned by single Fourier modes, so every generalized eigenvalue has the
closed form (rho/2 - 2 omega)/(1 + rho).
"""

import warnings

import numpy as np
import pytest

from gfalm import (
    GeometryError,
    GridField,
    GridSpec,
    GroundStateContext,
    InitialDataSpec,
    PotentialSpec,
    ProblemParams,
    Q,
    SolverConfig,
    TangentField,
    apply_hessian,
    apply_L,
    chart,
    chart_inverse,
    coercivity_check,
    inner,
    lojasiewicz_quotient,
    make_initial,
    modulus_power,
    norm_h1,
    norm_l2,
    norm_lp,
    quadratic_growth_probe,
    run,
    sample_tangent,
    solve_r_of_xi,
    tangent_project,
)
from gfalm.densemat import dense_L

FREE = ProblemParams(omega=1.0, beta=-1.0, p=3.0, potential=PotentialSpec.zero())

_CTX_CACHE = {}


def free_context(m=128):
    if m not in _CTX_CACHE:
        g = GridSpec.make(-32.0, 64.0, m)
        u0 = make_initial(InitialDataSpec(kind="gaussian"), g, 3.0)
        out = run(u0, FREE, SolverConfig(tau=0.5, tol_linf=1e-11))
        _CTX_CACHE[m] = GroundStateContext.certify(out.final, FREE)
    return _CTX_CACHE[m]


def scaled_tangent(ctx, scale, seed=3):
    xi = sample_tangent(ctx, np.random.default_rng(seed))
    return TangentField(
        GridField(ctx.u_g.grid, xi.xi.values * (scale / norm_h1(xi.xi)))
    )


# ------------------------------------------------------------- certification


def test_certify_accepts_converged_ground_state():
    ctx = free_context()
    assert ctx.residual_linf < 1e-10
    assert ctx.Q_g == pytest.approx(ctx.lambda_g, rel=1e-12)
    assert abs(norm_lp(ctx.u_g, 4.0) - 1.0) < 1e-13


def test_certify_rejects_off_sphere_and_non_critical():
    ctx = free_context()
    g = ctx.u_g.grid
    scaled = GridField(g, 1.01 * ctx.u_g.values)
    with pytest.raises(GeometryError, match="sphere"):
        GroundStateContext.certify(scaled, FREE)
    rough = make_initial(InitialDataSpec(kind="gaussian"), g, 3.0)
    with pytest.raises(GeometryError, match="residual"):
        GroundStateContext.certify(rough, FREE)


# --------------------------------------------------------------------- chart


def test_chart_inverse_of_ground_state_is_origin():
    ctx = free_context()
    coords = chart_inverse(ctx.u_g, ctx)
    assert abs(coords.r) < 1e-13
    assert norm_l2(coords.xi.xi) < 1e-13


def test_chart_inverse_pure_radial_and_pure_tangent():
    ctx = free_context()
    g = ctx.u_g.grid
    s = 0.037
    coords = chart_inverse(GridField(g, (1.0 + s) * ctx.u_g.values), ctx)
    assert coords.r == pytest.approx(s, abs=1e-13)
    assert norm_l2(coords.xi.xi) < 1e-12
    eta = scaled_tangent(ctx, 0.05)
    coords = chart_inverse(GridField(g, ctx.u_g.values + eta.xi.values), ctx)
    assert abs(coords.r) < 1e-12
    assert np.max(np.abs(coords.xi.xi.values - eta.xi.values)) < 1e-12


def test_chart_round_trip():
    ctx = free_context()
    xi = scaled_tangent(ctx, 0.1, seed=11)
    u = chart(ctx, -0.02, xi)
    coords = chart_inverse(u, ctx)
    back = chart(ctx, coords.r, coords.xi)
    assert coords.r == pytest.approx(-0.02, abs=1e-13)
    assert np.max(np.abs(back.values - u.values)) < 1e-13
    coords.xi.check(ctx)


def test_tangent_projection_annihilates_ground_state():
    ctx = free_context()
    proj = tangent_project(ctx.u_g, ctx)
    assert norm_l2(proj.xi) < 1e-12
    # idempotency on an arbitrary field
    v = GridField(ctx.u_g.grid, np.cos(ctx.u_g.grid.axis_points(0)) + 0j)
    once = tangent_project(v, ctx)
    twice = tangent_project(once.xi, ctx)
    assert np.max(np.abs(twice.xi.values - once.xi.values)) < 1e-13
    once.check(ctx)


def test_radial_correction_properties():
    ctx = free_context()
    zero = TangentField(GridField(ctx.u_g.grid, np.zeros(ctx.u_g.grid.shape)))
    assert solve_r_of_xi(zero, ctx) == pytest.approx(0.0, abs=1e-13)
    for scale, seed in ((0.1, 5), (0.01, 6)):
        xi = scaled_tangent(ctx, scale, seed=seed)
        r = solve_r_of_xi(xi, ctx)
        # the lifted point is exactly on the sphere
        u = chart(ctx, r, xi)
        assert abs(norm_lp(u, 4.0) - 1.0) < 1e-13
        # r is a negative O(scale^2) correction for small tangents
        assert r < 0.0
        assert abs(r) < scale**2
        # r(xi) is even in xi up to the cubic remainder
        minus = TangentField(GridField(ctx.u_g.grid, -xi.xi.values))
        assert abs(r - solve_r_of_xi(minus, ctx)) < 0.1 * scale**3


# ------------------------------------------------------- linearized operators


def test_L_at_ground_state_direction():
    # L u_g = (1 - p) lambda_g |u_g|^{p-1} u_g exactly (up to the residual)
    ctx = free_context()
    lhs = apply_L(ctx.u_g, ctx)
    rhs = (1.0 - 3.0) * ctx.lambda_g * modulus_power(ctx.u_g.values, 3.0)
    assert np.max(np.abs(lhs.values - rhs)) < 1e-10


def test_L_is_symmetric():
    ctx = free_context(m=64)
    rng = np.random.default_rng(9)
    g = ctx.u_g.grid
    for _ in range(10):
        u = GridField(g, rng.standard_normal(64) + 1j * rng.standard_normal(64))
        v = GridField(g, rng.standard_normal(64) + 1j * rng.standard_normal(64))
        assert inner(apply_L(u, ctx), v) == pytest.approx(
            inner(u, apply_L(v, ctx)), rel=1e-11, abs=1e-11
        )


def test_L_matches_dense_oracle():
    # dense_L only needs a (state, multiplier) pair, so a synthetic context
    # suffices; certification is deliberately bypassed here.
    g = GridSpec.make(-2.0, 4.0, 8)
    u0 = make_initial(InitialDataSpec(kind="gaussian", width=0.7), g, 3.0)
    params = ProblemParams(
        omega=0.9, beta=-1.0, p=3.0, potential=PotentialSpec.harmonic(1.2)
    )
    ctx = GroundStateContext(
        u_g=u0, lambda_g=1.7, params=params, Q_g=Q(u0, params), residual_linf=1.0
    )
    mat = dense_L(u0, 1.7, params)
    rng = np.random.default_rng(14)
    for _ in range(20):
        v = GridField(g, rng.standard_normal(8) + 1j * rng.standard_normal(8))
        fast = apply_L(v, ctx).values
        assert np.max(np.abs(fast - mat @ v.values)) < 1e-11


def test_hessian_agrees_with_L_on_real_fields():
    ctx = free_context()
    g = ctx.u_g.grid
    rng = np.random.default_rng(2)
    for _ in range(10):
        v = GridField(g, rng.standard_normal(128) + 0j)
        hv = apply_hessian(v, ctx).values
        lv = apply_L(v, ctx).values
        assert np.max(np.abs(hv - lv)) < 1e-11


def test_hessian_annihilates_phase_mode_but_L_does_not():
    # H(i u_g) = i mu(u_g) ~ 0, while L(i u_g) is O(1): the distinction
    # matters for interpreting the flat phase direction.
    ctx = free_context()
    iu = GridField(ctx.u_g.grid, 1j * ctx.u_g.values)
    assert norm_l2(apply_hessian(iu, ctx)) < 1e-9
    assert norm_l2(apply_L(iu, ctx)) > 0.1


# ----------------------------------------------------------------- coercivity


def test_coercivity_positive_at_free_ground_state():
    ctx = free_context()
    res = coercivity_check(ctx)
    assert res.method == "dense"
    assert res.positive
    assert 0.0 < res.min_eig < 0.5
    assert res.eigenvalues[0] == res.min_eig
    assert list(res.eigenvalues) == sorted(res.eigenvalues)
    assert res.phase_mode_residual < 1e-9


def test_coercivity_enumeration_oracle_at_constant_critical_point():
    # constants are certified critical points of the free problem but not
    # minimizers; every tangent eigenvalue is known in closed form
    g = GridSpec.make(-32.0, 64.0, 64)
    c = 64.0 ** (-0.25)
    u = GridField(g, np.full(64, c + 0j))
    ctx = GroundStateContext.certify(u, FREE)
    res = coercivity_check(ctx)
    assert not res.positive
    sigma = g.sigma[0]
    exact = sorted(
        (0.5 * (k * sigma) ** 2 - 2.0) / (1.0 + (k * sigma) ** 2)
        for k in range(1, 33)
    )
    assert res.min_eig == pytest.approx(exact[0], abs=1e-10)
    # the sin/cos pair at each k makes every eigenvalue doubly degenerate
    expected = sorted(np.repeat(exact, 2))[: len(res.eigenvalues)]
    assert np.allclose(res.eigenvalues, expected, atol=1e-10)


def test_coercivity_iterative_path_matches_dense():
    # force the constrained LOBPCG branch by lowering the dense cutoff
    g2 = GridSpec.make((-4.0, -4.0), (8.0, 8.0), (32, 32))
    trap = ProblemParams(
        omega=1.0, beta=-1.0, p=3.0, potential=PotentialSpec.harmonic(1.0, 1.0)
    )
    u0 = make_initial(InitialDataSpec(kind="gaussian"), g2, 3.0)
    out = run(u0, trap, SolverConfig(tau=0.1, tol_linf=1e-11, max_iters=20000))
    ctx = GroundStateContext.certify(out.final, trap)
    dense = coercivity_check(ctx)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)  # scipy LOBPCG chatter
        iterative = coercivity_check(ctx, subspace_dim_cap=100)
    assert dense.method == "dense" and iterative.method == "lobpcg"
    assert dense.positive and iterative.positive
    assert iterative.min_eig == pytest.approx(dense.min_eig, rel=1e-6)


def test_coercivity_rejects_genuinely_complex_state():
    ctx = free_context()
    g = ctx.u_g.grid
    x = g.axis_points(0)
    twisted = GridField(g, ctx.u_g.values * np.exp(1j * 0.3 * x))
    fake = GroundStateContext(
        u_g=twisted, lambda_g=ctx.lambda_g, params=FREE, Q_g=ctx.Q_g, residual_linf=0.0
    )
    with pytest.raises(GeometryError, match="real"):
        coercivity_check(fake)


# ----------------------------------------------------- growth and Lojasiewicz


def test_growth_ratio_matches_rayleigh_quotient_single_mode():
    ctx = free_context()
    g = ctx.u_g.grid
    x = g.axis_points(0)
    mode = GridField(g, np.cos(3.0 * g.sigma[0] * (x - g.x0[0])) + 0j)
    xi = tangent_project(mode, ctx)
    for scale in (1e-2, 1e-3):
        sized = TangentField(
            GridField(g, xi.xi.values * (scale / norm_h1(xi.xi)))
        )
        u = chart(ctx, solve_r_of_xi(sized, ctx), sized)
        dist2 = norm_h1(GridField(g, u.values - ctx.u_g.values)) ** 2
        ratio = (Q(u, FREE) - ctx.Q_g) / dist2
        oracle = inner(apply_L(sized.xi, ctx), sized.xi).real / dist2
        assert ratio == pytest.approx(oracle, rel=5e-2)
    # at the smallest scale the quadratic model is essentially exact
    assert ratio == pytest.approx(oracle, rel=1e-4)


def test_quadratic_growth_probe_reports_positive_ratios():
    ctx = free_context()
    probe = quadratic_growth_probe(ctx, scales=(1e-2, 1e-3), n_samples=4, seed=0)
    assert not probe.skipped
    for scale in (1e-2, 1e-3):
        ratios = probe.ratios_at(scale)
        assert len(ratios) == 4
        assert all(r > 0.0 for r in ratios)
        assert max(ratios) / min(ratios) < 10.0
    d = probe.to_dict()
    assert d["seed"] == 0
    assert len(d["samples"]) == 8


def test_growth_probe_is_seed_reproducible():
    ctx = free_context(m=64)
    a = quadratic_growth_probe(ctx, scales=(1e-2,), n_samples=3, seed=7)
    b = quadratic_growth_probe(ctx, scales=(1e-2,), n_samples=3, seed=7)
    assert [s.ratio for s in a.samples] == [s.ratio for s in b.samples]


def test_sample_tangent_is_tangent_and_real_for_real_state():
    ctx = free_context()
    xi = sample_tangent(ctx, np.random.default_rng(0))
    xi.check(ctx)
    # exactly-real states (solver output carries FFT-level imaginary dust,
    # so only constructed states qualify) get real samples
    g = GridSpec.make(-32.0, 64.0, 64)
    const = GroundStateContext.certify(
        GridField(g, np.full(64, 64.0 ** (-0.25) + 0j)), FREE
    )
    xi_real = sample_tangent(const, np.random.default_rng(0))
    xi_real.check(const)
    assert np.max(np.abs(xi_real.xi.values.imag)) == 0.0


def test_lojasiewicz_quotient_values():
    ctx = free_context()
    assert lojasiewicz_quotient(ctx.u_g, ctx) == 0.0
    xi = scaled_tangent(ctx, 1e-3, seed=4)
    u = chart(ctx, solve_r_of_xi(xi, ctx), xi)
    q = lojasiewicz_quotient(u, ctx)
    assert np.isfinite(q)
    assert 0.0 < q < 50.0
