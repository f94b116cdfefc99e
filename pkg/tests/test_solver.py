"""GFALM step and driver: fixed points, dense oracle, decay certificate.

The certificate tests include a deliberately inadmissible configuration
(alpha = 0 under a steep trap) to confirm the check actually detects decay
violations rather than passing vacuously.
"""

import numpy as np
import pytest

from gfalm import (
    ConfigError,
    GridField,
    GridSpec,
    InitialDataSpec,
    PotentialSpec,
    ProblemParams,
    Q,
    SolverConfig,
    SolverError,
    decay_certificate,
    exact_soliton,
    gfalm_step,
    make_initial,
    norm_h1,
    norm_lp,
    resolve_alpha,
    run,
)
from gfalm.densemat import dense_gfalm_step

FREE = ProblemParams(omega=1.0, beta=-1.0, p=3.0, potential=PotentialSpec.zero())


def grid1d(m=128):
    return GridSpec.make(-32.0, 64.0, m)


def gaussian(grid):
    return make_initial(InitialDataSpec(kind="gaussian"), grid, 3.0)


def solve_free(m=128, tau=0.5, **kw):
    cfg = SolverConfig(tau=tau, tol_linf=kw.pop("tol_linf", 1e-11), **kw)
    return run(gaussian(grid1d(m)), FREE, cfg)


# ---------------------------------------------------------------- the step


def test_normalized_constant_is_an_exact_fixed_point():
    # with V = 0 the normalized constant is a discrete critical point, so one
    # step reproduces it to roundoff and mu~ vanishes
    g = grid1d(64)
    c = 64.0 ** (-0.25)
    u = GridField(g, np.full(64, c + 0j))
    step = gfalm_step(u, FREE, tau=0.5, alpha=1.0)
    assert np.max(np.abs(step.u_next.values - u.values)) < 1e-14
    assert np.max(np.abs(step.mu_tilde.values)) < 1e-13


def test_converged_state_is_a_near_fixed_point():
    out = solve_free()
    step = gfalm_step(out.final, FREE, tau=0.5, alpha=1.0)
    move = norm_h1(GridField(out.final.grid, step.u_next.values - out.final.values))
    assert move < 1e-10


def test_step_matches_dense_oracle():
    g = GridSpec.make(-8.0, 16.0, 64)
    params = ProblemParams(
        omega=1.0, beta=-1.0, p=3.0, potential=PotentialSpec.harmonic(0.5)
    )
    u = make_initial(InitialDataSpec(kind="gaussian"), g, 3.0)
    for tau in (0.1, 0.5, 2.0):
        fast = gfalm_step(u, params, tau=tau, alpha=9.0)
        slow_next, slow_mu = dense_gfalm_step(u, params, tau=tau, alpha=9.0)
        assert np.max(np.abs(fast.u_next.values - slow_next.values)) < 1e-10
        assert np.max(np.abs(fast.mu_tilde.values - slow_mu.values)) < 1e-10


def test_step_decreases_energy_from_generic_start():
    g = grid1d(64)
    u = gaussian(g)
    step = gfalm_step(u, FREE, tau=0.5, alpha=1.0)
    assert Q(step.u_next, FREE) < Q(u, FREE)
    assert abs(norm_lp(step.u_next, 4.0) - 1.0) < 1e-14


def test_certificate_nonpositive_for_admissible_alpha():
    g = grid1d(64)
    u = gaussian(g)
    for tau in (0.1, 1.0, 10.0):
        v = u
        for _ in range(5):
            q0 = Q(v, FREE)
            step = gfalm_step(v, FREE, tau, alpha=1.0)
            q1 = Q(step.u_next, FREE)
            cert = decay_certificate(q0, q1, step, tau, 3.0)
            assert cert <= 1e-10
            assert q1 <= q0 + 1e-12
            v = step.u_next


def test_certificate_detects_inadmissible_alpha():
    # alpha = 0 under a steep trap violates the decay bound immediately; the
    # certificate must report a positive value, not mask it.
    g = GridSpec.make(-8.0, 16.0, 64)
    steep = ProblemParams(
        omega=1.0, beta=-1.0, p=3.0, potential=PotentialSpec.harmonic(2.0)
    )
    u = make_initial(InitialDataSpec(kind="gaussian"), g, 3.0)
    q0 = Q(u, steep)
    step = gfalm_step(u, steep, tau=1.0, alpha=0.0)
    q1 = Q(step.u_next, steep)
    cert = decay_certificate(q0, q1, step, tau=1.0, p=3.0)
    assert cert > 1.0  # decisively positive, far beyond roundoff
    assert q1 > q0  # the energy actually increased


# ------------------------------------------------------------ configuration


def test_solver_config_validation():
    with pytest.raises(ConfigError):
        SolverConfig(tau=0.0)
    with pytest.raises(ConfigError):
        SolverConfig(tau=-0.5)
    with pytest.raises(ConfigError):
        SolverConfig(tau=0.5, tol_linf=0.0)
    with pytest.raises(ConfigError):
        SolverConfig(tau=0.5, max_iters=-1)
    with pytest.raises(ConfigError):
        SolverConfig(tau=0.5, record_every=0)
    with pytest.raises(ConfigError):
        SolverConfig(tau=0.5, alpha="magic")
    with pytest.raises(ConfigError):
        SolverConfig(tau=0.5, alpha=np.nan)


def test_resolve_alpha_policy():
    g = grid1d(64)
    cfg_auto = SolverConfig(tau=0.5, alpha="auto")
    assert resolve_alpha(cfg_auto, FREE, g) == pytest.approx(1.0)
    cfg_big = SolverConfig(tau=0.5, alpha=2.5)
    assert resolve_alpha(cfg_big, FREE, g) == 2.5
    cfg_exact = SolverConfig(tau=0.5, alpha=1.0)
    assert resolve_alpha(cfg_exact, FREE, g) == 1.0
    with pytest.raises(ConfigError, match="admissible"):
        resolve_alpha(SolverConfig(tau=0.5, alpha=0.25), FREE, g)


def test_run_rejects_zero_initial_and_mismatched_reference():
    g = grid1d(64)
    with pytest.raises(SolverError):
        run(GridField(g, np.zeros(64)), FREE, SolverConfig(tau=0.5, max_iters=5))
    ref = exact_soliton(1.0, grid1d(128))
    with pytest.raises(ConfigError, match="grid"):
        run(gaussian(g), FREE, SolverConfig(tau=0.5, reference=ref, max_iters=5))


# -------------------------------------------------------------------- run()


def test_run_zero_iterations_returns_normalized_initial():
    g = grid1d(64)
    u0 = GridField(g, 3.0 * gaussian(g).values)  # deliberately unnormalized
    out = run(u0, FREE, SolverConfig(tau=0.5, max_iters=0))
    assert not out.converged
    assert out.iterations_used == 0
    assert out.records == []
    assert abs(norm_lp(out.final, 4.0) - 1.0) < 1e-13
    assert out.Q_final == pytest.approx(Q(out.final, FREE), rel=1e-13)


def test_run_converges_and_tracks_diagnostics():
    out = solve_free()
    assert out.converged
    assert out.records[-1].residual_linf < 1e-11
    assert out.iterations_used == out.records[-1].n
    assert out.Q_final == pytest.approx(out.records[-1].Q, rel=1e-14)
    assert out.max_decay_certificate is not None and out.max_decay_certificate <= 1e-10
    assert out.max_q_increase is not None and out.max_q_increase <= 1e-12
    assert out.min_utilde_lp1 is not None and out.min_utilde_lp1 > 0.5
    assert out.alpha == pytest.approx(1.0)
    # multiplier limit: lambda = Q at unit L4 norm
    assert out.lambda_final == pytest.approx(out.Q_final, rel=1e-12)


def test_run_energy_is_monotone_and_constraint_exact():
    out = solve_free(m=64)
    qs = [r.Q for r in out.records]
    assert all(b <= a + 1e-12 for a, b in zip(qs, qs[1:]))
    assert max(abs(r.lp1_norm - 1.0) for r in out.records) < 1e-13


def test_run_record_cadence_and_final_record():
    out = solve_free(m=64, record_every=10, max_iters=47, tol_linf=1e-15)
    ns = [r.n for r in out.records]
    assert ns == [10, 20, 30, 40, 47]  # multiples plus the forced final
    assert not out.converged


def test_on_record_streams_in_order():
    seen = []
    out = solve_free(m=64, on_record=seen.append)
    assert seen == out.records
    assert [r.n for r in seen] == sorted(r.n for r in seen)


def test_reference_columns_populated_and_decaying():
    g = grid1d(128)
    ref = run(gaussian(g), FREE, SolverConfig(tau=0.5, tol_linf=1e-13, max_iters=10**5)).final
    out = run(gaussian(g), FREE, SolverConfig(tau=0.5, reference=ref))
    errs = [r.err_h1 for r in out.records]
    assert all(e is not None for e in errs)
    assert errs[-1] < 1e-9 < errs[0]
    # lojasiewicz column: finite and positive while the gap is resolvable,
    # clamped to 0 once the energy gap reaches the floor
    mid = [r.lojasiewicz_q for r in out.records if r.Q - out.Q_final > 1e-10]
    assert mid and all(q is not None and 0.0 < q < 50.0 for q in mid)
    assert out.records[-1].lojasiewicz_q == 0.0


def test_tighter_tau_still_converges_same_state():
    g = grid1d(64)
    a = run(gaussian(g), FREE, SolverConfig(tau=1.0))
    b = run(gaussian(g), FREE, SolverConfig(tau=0.1))
    assert a.converged and b.converged
    gap = norm_h1(GridField(g, a.final.values - b.final.values))
    assert gap < 1e-9
    assert a.Q_final == pytest.approx(b.Q_final, abs=1e-12)
