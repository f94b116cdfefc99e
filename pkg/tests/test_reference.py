"""Closed-form soliton values, initial-data variants, persisted 2D benchmark.

The soliton norm has the closed form ||phi*||_{L^4}^4 = (2 omega)^{3/2} * 4/3
(from integral sech^4 = 4/3), which the quadrature path must reproduce.
"""

import json

import numpy as np
import pytest

from gfalm import (
    GridField,
    GridSpec,
    InitialDataSpec,
    PotentialSpec,
    ProblemParams,
    Q,
    ReferenceError,
    exact_soliton,
    gfalm_step,
    load_reference_2d,
    make_initial,
    make_reference_2d,
    norm_linf,
    norm_lp,
    residual_mu,
    soliton_l4_norm,
    write_field,
)

FREE = ProblemParams(omega=1.0, beta=-1.0, p=3.0, potential=PotentialSpec.zero())


def grid1d(m=512):
    return GridSpec.make(-32.0, 64.0, m)


def grid2d(m=16):
    return GridSpec.make((-4.0, -4.0), (8.0, 8.0), (m, m))


# ------------------------------------------------------------------- soliton


@pytest.mark.parametrize("omega", [1.0, 0.5, 2.0])
def test_soliton_l4_norm_closed_form(omega):
    exact = ((2.0 * omega) ** 1.5 * 4.0 / 3.0) ** 0.25
    assert soliton_l4_norm(omega) == pytest.approx(exact, abs=1e-12)


def test_soliton_l4_norm_reference_value():
    # (8 sqrt(2) / 3)^{1/4} pinned to full double precision
    assert soliton_l4_norm(1.0) == pytest.approx(1.393544791827408, abs=1e-13)
    with pytest.raises(ReferenceError):
        soliton_l4_norm(0.0)


def test_exact_soliton_profile():
    g = grid1d()
    u = exact_soliton(1.0, g)
    # peak amplitude sqrt(2)/||phi*||_4 at x = 0
    j0 = np.argmin(np.abs(g.axis_points(0)))
    assert abs(u.values[j0]) == pytest.approx(1.0148317949, abs=1e-9)
    assert np.argmax(np.abs(u.values)) == j0
    # even about the origin on the symmetric part of the grid
    vals = u.values
    assert np.max(np.abs(vals[1:] - vals[1:][::-1])) < 1e-15
    # decayed to nothing at the box edge
    assert abs(vals[0]) < 1e-15
    # continuum normalization puts the discrete norm at 1 only up to
    # quadrature error, which is tiny at this resolution
    assert abs(norm_lp(u, 4.0) - 1.0) < 1e-10


def test_exact_soliton_is_near_critical_point():
    g = grid1d()
    u = exact_soliton(1.0, g)
    assert norm_linf(residual_mu(u, FREE)) < 1e-8
    assert Q(u, FREE) == pytest.approx(1.9419670868292938, abs=1e-10)
    # half frequency: wider profile, still spectrally resolved
    half = ProblemParams(omega=0.5, beta=-1.0, p=3.0, potential=PotentialSpec.zero())
    u5 = exact_soliton(0.5, g)
    assert norm_linf(residual_mu(u5, half)) < 1e-8


def test_exact_soliton_rejects_2d():
    with pytest.raises(ReferenceError):
        exact_soliton(1.0, grid2d())


# -------------------------------------------------------------- initial data


def test_initial_gaussian_matches_closed_form():
    g = grid1d(64)
    u = make_initial(InitialDataSpec(kind="gaussian", center=2.0, width=1.5), g, 3.0)
    x = g.axis_points(0)
    raw = np.exp(-((x - 2.0) ** 2) / (2.0 * 1.5**2))
    expected = raw / norm_lp(GridField(g, raw + 0j), 4.0)
    assert np.max(np.abs(u.values - expected)) < 1e-14
    assert abs(norm_lp(u, 4.0) - 1.0) < 1e-14


def test_initial_shifted_gaussian_is_recentered_gaussian():
    g = grid2d(16)
    shifted = make_initial(
        InitialDataSpec(kind="shifted_gaussian", offset=(1.0, 0.0)), g, 3.0
    )
    direct = make_initial(
        InitialDataSpec(kind="gaussian", center=(1.0, 0.0)), g, 3.0
    )
    assert np.array_equal(shifted.values, direct.values)
    with pytest.raises(ReferenceError, match="offset"):
        InitialDataSpec(kind="shifted_gaussian")


def test_initial_vortex_structure():
    g = grid2d(16)
    u = make_initial(InitialDataSpec(kind="vortex"), g, 3.0)
    xx, yy = g.meshes()
    origin = np.argmin(xx**2 + yy**2)
    assert abs(u.values.reshape(-1)[origin]) < 1e-14
    # phase winds: u(x, y) = conj-free multiple of (x + iy), so the value at
    # (a, b) equals i times the value at (b, -a) for the symmetric Gaussian
    i1, i2 = 10, 6
    a = u.values[i1, i2]
    j1 = np.argmin(np.abs(g.axis_points(0) - g.axis_points(1)[i2]))
    j2 = np.argmin(np.abs(g.axis_points(1) + g.axis_points(0)[i1]))
    b = u.values[j1, j2]
    assert a == pytest.approx(1j * b, rel=1e-12)
    with pytest.raises(ReferenceError, match="2D"):
        make_initial(InitialDataSpec(kind="vortex"), grid1d(16), 3.0)


def test_initial_constant_and_scalar_broadcast():
    g = grid2d(8)
    u = make_initial(InitialDataSpec(kind="constant"), g, 3.0)
    assert np.max(np.abs(u.values - u.values.reshape(-1)[0])) < 1e-15
    # a scalar width broadcasts across both axes
    a = make_initial(InitialDataSpec(kind="gaussian", width=2.0), g, 3.0)
    b = make_initial(InitialDataSpec(kind="gaussian", width=(2.0, 2.0)), g, 3.0)
    assert np.array_equal(a.values, b.values)


def test_initial_soliton_exact_kind():
    g = grid1d(128)
    u = make_initial(InitialDataSpec(kind="soliton_exact", omega=1.0), g, 3.0)
    # same samples as exact_soliton, but renormalized onto the sphere
    assert abs(norm_lp(u, 4.0) - 1.0) < 1e-14
    with pytest.raises(ReferenceError, match="omega"):
        InitialDataSpec(kind="soliton_exact")


def test_initial_from_file_round_trip(tmp_path):
    g = grid1d(32)
    u = make_initial(InitialDataSpec(kind="gaussian"), g, 3.0)
    path = tmp_path / "init.field"
    write_field(path, u)
    loaded = make_initial(InitialDataSpec(kind="from_file", path=str(path)), g, 3.0)
    assert np.max(np.abs(loaded.values - u.values)) < 1e-15
    with pytest.raises(ReferenceError, match="grid"):
        make_initial(InitialDataSpec(kind="from_file", path=str(path)), grid1d(64), 3.0)
    with pytest.raises(ReferenceError, match="path"):
        InitialDataSpec(kind="from_file")


def test_initial_validation():
    with pytest.raises(ReferenceError, match="kind"):
        InitialDataSpec(kind="wavelet")
    g = grid1d(16)
    with pytest.raises(ReferenceError, match="components"):
        make_initial(InitialDataSpec(kind="gaussian", width=(1.0, 2.0)), g, 3.0)


# ------------------------------------------------------------- 2D benchmark


TRAP = ProblemParams(
    omega=1.0, beta=-1.0, p=3.0, potential=PotentialSpec.harmonic(1.0, 1.0)
)


def test_make_reference_2d_persists_and_reloads(tmp_path):
    g = grid2d(32)
    ref = make_reference_2d(TRAP, g, tmp_path, tau=0.1, n_steps=600, residual_target=1e-8)
    assert ref.field_path.exists() and ref.certificate_path.exists()
    cert = ref.certificate
    assert cert["valid"]
    assert cert["residual_linf"] <= 1e-8
    # coarse grids can bottom out at machine level before the step budget
    assert 0 < cert["iterations"] <= 600
    assert len(cert["config_hash"]) == 64

    reloaded = load_reference_2d(tmp_path)
    assert np.array_equal(reloaded.field.values, ref.field.values)
    assert reloaded.certificate == cert

    # the persisted state really is a near fixed point of the iteration
    step = gfalm_step(reloaded.field, TRAP, tau=0.1, alpha=9.0)
    move = np.max(np.abs(step.u_next.values - reloaded.field.values))
    assert move < 1e-8


def test_load_reference_2d_rejects_invalid_certificate(tmp_path):
    g = grid2d(16)
    # an absurd target marks the certificate invalid at generation time
    make_reference_2d(TRAP, g, tmp_path, tau=0.1, n_steps=5, residual_target=1e-14)
    with pytest.raises(ReferenceError, match="invalid"):
        load_reference_2d(tmp_path)


def test_load_reference_2d_missing_files(tmp_path):
    with pytest.raises(OSError):
        load_reference_2d(tmp_path / "nowhere")


def test_make_reference_2d_rejects_1d():
    with pytest.raises(ReferenceError):
        make_reference_2d(FREE, grid1d(16), "/tmp/unused", n_steps=1)
