"""Spectral-calculus oracles: single-mode hand derivatives, Poisson inversion,
Helmholtz splitting, Parseval, and the binary field format."""

import numpy as np
import pytest

from qcx import fields as F
from qcx.errors import BandLimitError, NonZeroMeanError, ParameterRangeError


def grid2(n=32):
    return F.PeriodicGrid(2, n)


def grid3(n=16):
    return F.PeriodicGrid(3, n)


def mode_field(grid, fn):
    x = grid.coordinates()
    return F.ScalarField(grid, fn(x))


# ---------------------------------------------------------------------------
# grid and field construction
# ---------------------------------------------------------------------------

def test_grid_validation():
    with pytest.raises(ParameterRangeError):
        F.PeriodicGrid(4, 32)
    with pytest.raises(ParameterRangeError):
        F.PeriodicGrid(2, 24)      # not a power of two
    with pytest.raises(ParameterRangeError):
        F.PeriodicGrid(2, 4)       # too coarse


def test_field_shape_validation():
    g = grid2(8)
    with pytest.raises(ParameterRangeError):
        F.ScalarField(g, np.zeros((8, 4)))
    with pytest.raises(ParameterRangeError):
        F.VectorField(g, np.zeros((8, 8)))


def test_fields_are_immutable():
    g = grid2(8)
    f = F.ScalarField(g, np.zeros(g.shape))
    with pytest.raises(ValueError):
        f.values[0, 0] = 1.0


# ---------------------------------------------------------------------------
# spectral round trip and Parseval
# ---------------------------------------------------------------------------

def test_spectral_round_trip():
    g = grid2()
    rng = np.random.default_rng(0)
    f = F.ScalarField(g, rng.standard_normal(g.shape))
    back = F.from_spectral(F.to_spectral(f))
    assert np.max(np.abs(back.values - f.values)) < 1e-12 * max(
        1.0, np.max(np.abs(f.values)))


def test_parseval():
    g = grid2()
    rng = np.random.default_rng(1)
    f = F.ScalarField(g, rng.standard_normal(g.shape))
    spectral_energy = float(np.sum(np.abs(F.to_spectral(f).values) ** 2))
    grid_energy = F.integrate(F.ScalarField(g, f.values ** 2))
    assert spectral_energy == pytest.approx(grid_energy, rel=1e-12)


# ---------------------------------------------------------------------------
# derivatives on hand-computed modes
# ---------------------------------------------------------------------------

def test_gradient_of_constant_is_zero():
    g = grid2()
    grad = F.gradient(F.ScalarField(g, np.full(g.shape, 3.7)))
    assert np.max(np.abs(grad.values)) < 1e-12


def test_gradient_single_mode():
    g = grid2()
    phi = mode_field(g, lambda x: np.sin(2 * np.pi * x[..., 0]))
    grad = F.gradient(phi)
    x = g.coordinates()
    expect = 2 * np.pi * np.cos(2 * np.pi * x[..., 0])
    assert np.allclose(grad.values[..., 0], expect, atol=1e-10)
    assert np.max(np.abs(grad.values[..., 1])) < 1e-10


def test_hessian_product_mode():
    # off-diagonal of sin(2 pi x1) sin(2 pi x2) is 4 pi^2 cos cos, symmetric
    g = grid2()
    phi = mode_field(g, lambda x: np.sin(2 * np.pi * x[..., 0])
                     * np.sin(2 * np.pi * x[..., 1]))
    h = F.hessian(phi)
    x = g.coordinates()
    expect = (4 * np.pi ** 2 * np.cos(2 * np.pi * x[..., 0])
              * np.cos(2 * np.pi * x[..., 1]))
    assert np.allclose(h.values[..., 0, 1], expect, atol=1e-9)
    assert np.array_equal(h.values[..., 0, 1], h.values[..., 1, 0])


def test_hessian_is_exactly_symmetric():
    g = grid3()
    rng = np.random.default_rng(2)
    phi = F.random_field(g, "scalar", g.max_band, rng)
    h = F.hessian(phi)
    assert np.array_equal(h.values, np.swapaxes(h.values, -1, -2))


def test_jacobian_of_gradient_is_hessian():
    g = grid2()
    phi = F.random_field(g, "scalar", g.max_band, 3)
    jac = F.jacobian(F.gradient(phi))
    hes = F.hessian(phi)
    assert np.max(np.abs(jac.values - hes.values)) < 1e-10
    anti = F.antisym_part(jac)
    assert np.max(np.abs(anti.values)) < 1e-10


def test_divergence_of_gradient_is_laplacian():
    g = grid3()
    phi = F.random_field(g, "scalar", g.max_band, 4)
    lhs = F.divergence(F.gradient(phi))
    rhs = F.laplacian(phi)
    assert np.max(np.abs(lhs.values - rhs.values)) < 1e-10


def test_divergence_free_mode():
    g = grid2()
    x = g.coordinates()
    v = np.zeros(g.shape + (2,))
    v[..., 0] = np.sin(2 * np.pi * x[..., 1])
    div = F.divergence(F.VectorField(g, v))
    assert np.max(np.abs(div.values)) < 1e-12


def test_laplacian_eigenvalue():
    g = grid2()
    phi = mode_field(g, lambda x: np.sin(2 * np.pi * x[..., 0]))
    lap = F.laplacian(phi)
    assert np.allclose(lap.values, -4 * np.pi ** 2 * phi.values, atol=1e-9)


# ---------------------------------------------------------------------------
# Poisson
# ---------------------------------------------------------------------------

def test_poisson_zero_rhs():
    g = grid2()
    sol = F.solve_poisson(F.ScalarField(g, np.zeros(g.shape)))
    assert np.all(sol.values == 0.0)


def test_poisson_single_mode():
    g = grid2()
    rhs = mode_field(g, lambda x: np.sin(2 * np.pi * x[..., 0]))
    sol = F.solve_poisson(rhs)
    assert np.allclose(sol.values, -rhs.values / (4 * np.pi ** 2), atol=1e-12)


def test_poisson_inverts_laplacian():
    g = grid3()
    f = F.random_field(g, "scalar", g.max_band, 5)
    back = F.solve_poisson(F.laplacian(f))
    assert np.max(np.abs(back.values - f.values)) < 1e-10


def test_poisson_rejects_nonzero_mean():
    g = grid2()
    with pytest.raises(NonZeroMeanError):
        F.solve_poisson(F.ScalarField(g, np.ones(g.shape)))


# ---------------------------------------------------------------------------
# Helmholtz decomposition
# ---------------------------------------------------------------------------

def test_helmholtz_curl_free_input():
    g = grid2()
    x = g.coordinates()
    u = np.sin(2 * np.pi * x[..., 0]) / (2 * np.pi)   # zero-mean potential
    varphi = F.gradient(F.ScalarField(g, u))
    pot, sol = F.helmholtz(varphi)
    assert np.max(np.abs(sol.values)) < 1e-12
    assert np.allclose(pot.values, u, atol=1e-12)


def test_helmholtz_divergence_free_input():
    g = grid2()
    varphi = F.random_field(g, "divfree-vector", g.max_band, 6)
    pot, sol = F.helmholtz(varphi)
    assert np.max(np.abs(pot.values)) < 1e-12
    assert np.max(np.abs(sol.values - varphi.values)) < 1e-12


def test_helmholtz_mode_projection():
    # generic amplitude v splits into (v.khat) khat and its complement
    g = grid2()
    x = g.coordinates()
    k = np.array([1.0, 2.0])
    v = np.array([0.7, -0.3])
    khat = k / np.linalg.norm(k)
    phase = 2 * np.pi * (x @ k)
    varphi = F.VectorField(g, np.cos(phase)[..., None] * v)
    pot, sol = F.helmholtz(varphi)
    v_par = (v @ khat) * khat
    v_perp = v - v_par
    grad_pot = F.gradient(pot)
    assert np.allclose(grad_pot.values, np.cos(phase)[..., None] * v_par,
                       atol=1e-11)
    assert np.allclose(sol.values, np.cos(phase)[..., None] * v_perp,
                       atol=1e-11)


def test_helmholtz_residual_and_idempotence():
    for g in (grid2(), grid3()):
        varphi = F.random_field(g, "vector", g.max_band, 7)
        pot, sol = F.helmholtz(varphi)
        recomposed = F.gradient(pot).values + sol.values
        assert np.max(np.abs(recomposed - varphi.values)) < 1e-12
        assert F.l2_norm(F.divergence(sol)) < 1e-10 * F.l2_norm(varphi)
        pot2, sol2 = F.helmholtz(sol)
        assert np.max(np.abs(pot2.values)) < 1e-12
        assert np.max(np.abs(sol2.values - sol.values)) < 1e-12


# ---------------------------------------------------------------------------
# symmetric / antisymmetric split
# ---------------------------------------------------------------------------

def test_sym_antisym_partition_and_orthogonality():
    g = grid2(8)
    rng = np.random.default_rng(8)
    m = F.MatrixField(g, rng.standard_normal(g.shape + (2, 2)))
    s, a = F.sym_part(m), F.antisym_part(m)
    assert np.allclose(s.values + a.values, m.values, atol=0)
    total = np.sum(m.values ** 2, axis=(-2, -1))
    split = (np.sum(s.values ** 2, axis=(-2, -1))
             + np.sum(a.values ** 2, axis=(-2, -1)))
    assert np.allclose(total, split, rtol=1e-14)


def test_single_entry_split():
    g = grid2(8)
    m = np.zeros(g.shape + (2, 2))
    m[..., 0, 1] = 1.0
    s = F.sym_part(F.MatrixField(g, m))
    a = F.antisym_part(F.MatrixField(g, m))
    assert np.all(s.values[..., 0, 1] == 0.5) and np.all(
        s.values[..., 1, 0] == 0.5)
    assert np.all(a.values[..., 0, 1] == 0.5) and np.all(
        a.values[..., 1, 0] == -0.5)


# ---------------------------------------------------------------------------
# integration
# ---------------------------------------------------------------------------

def test_integrate_constant():
    g = grid2(8)
    assert F.integrate(F.ScalarField(g, np.full(g.shape, 2.5))) == 2.5


def test_integrate_mean_zero_mode():
    g = grid2()
    f = mode_field(g, lambda x: np.sin(2 * np.pi * x[..., 0]))
    assert abs(F.integrate(f)) < 1e-14


def test_integrate_sin_squared():
    g = grid2()
    f = mode_field(g, lambda x: np.sin(2 * np.pi * x[..., 0]) ** 2)
    assert F.integrate(f) == pytest.approx(0.5, abs=1e-14)


# ---------------------------------------------------------------------------
# random fields
# ---------------------------------------------------------------------------

def test_random_field_determinism():
    g = grid2()
    a = F.random_field(g, "vector", 5, 42)
    b = F.random_field(g, "vector", 5, 42)
    assert np.array_equal(a.values, b.values)


def test_random_field_unit_energy():
    for kind in ("scalar", "vector", "divfree-vector"):
        g = grid3()
        f = F.random_field(g, kind, 4, 9)
        sq = f.values ** 2 if kind == "scalar" else np.sum(f.values ** 2, -1)
        assert F.integrate(F.ScalarField(g, sq)) == pytest.approx(
            1.0, abs=1e-12)


def test_random_divfree_field():
    g = grid2()
    f = F.random_field(g, "divfree-vector", g.max_band, 10)
    assert F.l2_norm(F.divergence(f)) < 1e-12


def test_random_field_band_limit_enforced():
    g = grid2(16)
    with pytest.raises(BandLimitError):
        F.random_field(g, "scalar", 6, 0)   # N/3 = 5
    with pytest.raises(BandLimitError):
        F.random_field(g, "scalar", 0, 0)


def test_random_field_seed_pins_polynomial_across_grids():
    coarse = F.random_field(grid2(16), "vector", 4, 11)
    fine = F.random_field(grid2(32), "vector", 4, 11)
    refined = F.refine(coarse, 2)
    assert np.max(np.abs(refined.values - fine.values)) < 1e-12


# ---------------------------------------------------------------------------
# refinement
# ---------------------------------------------------------------------------

def test_refine_interpolates_exactly():
    g = grid2(16)
    phi = F.random_field(g, "scalar", 5, 12)
    fine = F.refine(phi, 2)
    assert fine.grid.points_per_axis == 32
    # original nodes are every other fine node
    assert np.max(np.abs(fine.values[::2, ::2] - phi.values)) < 1e-12


def _gradient_power_integral(field, p):
    jac = F.jacobian(field)
    sq = np.sum(jac.values ** 2, axis=(-2, -1))
    return F.integrate(F.ScalarField(field.grid, sq ** (p / 2)))


def test_refinement_stability_even_powers():
    # |grad psi|^p is a sub-Nyquist trig polynomial for even p: integral exact
    g = F.PeriodicGrid(2, 64)
    psi = F.random_field(g, "divfree-vector", 6, 13)
    for p in (2.0, 4.0):
        coarse = _gradient_power_integral(psi, p)
        fine = _gradient_power_integral(F.refine(psi, 2), p)
        assert abs(fine - coarse) < 1e-10 * max(1.0, abs(coarse))


def test_refinement_stability_fractional_power_smooth_field():
    # swirl field with constant |grad psi|: fractional powers stay band-limited
    g = F.PeriodicGrid(3, 32)
    x = g.coordinates()
    two_pi = 2 * np.pi
    v = np.empty(g.shape + (3,))
    v[..., 0] = np.sin(two_pi * x[..., 2]) + np.cos(two_pi * x[..., 1])
    v[..., 1] = np.sin(two_pi * x[..., 0]) + np.cos(two_pi * x[..., 2])
    v[..., 2] = np.sin(two_pi * x[..., 1]) + np.cos(two_pi * x[..., 0])
    psi = F.VectorField(g, v)
    assert F.l2_norm(F.divergence(psi)) < 1e-12
    for p in (1.5, 3.0):
        coarse = _gradient_power_integral(psi, p)
        fine = _gradient_power_integral(F.refine(psi, 2), p)
        assert abs(fine - coarse) < 1e-10 * max(1.0, abs(coarse))


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def test_field_round_trip_through_disk(tmp_path):
    g = grid3()
    f = F.random_field(g, "vector", 4, 14)
    path = tmp_path / "witness.field"
    F.save_field(f, path)
    back = F.load_field(path)
    assert isinstance(back, F.VectorField)
    assert back.grid == f.grid
    assert np.array_equal(back.values, f.values)
    sidecar = (tmp_path / "witness.field.json").read_text()
    assert '"kind": "vector"' in sidecar


def test_load_rejects_garbage(tmp_path):
    path = tmp_path / "bad.field"
    path.write_bytes(b"NOPE" + b"\x00" * 32)
    with pytest.raises(ValueError):
        F.load_field(path)
