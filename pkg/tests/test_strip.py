import math

import numpy as np
import pytest

from muskat.params import ModelParams
from muskat.spectral import COS_MODE, SpectralField, wiener_norm
from muskat.strip import (
    DegenerateLiftError,
    LinearSolveError,
    StripGrid,
    assemble_P_delta,
    assemble_system,
    dtn_apply,
    solve_strip,
    surface_normal_velocity,
    verify_dtn_expansion,
    verify_lub_flux,
)


def p_of(delta=1.0, eps=0.0):
    return ModelParams.lubrication(chi=1, lam=0.0, theta=1.0,
                                   delta=delta, epsilon=eps)


def test_grid_validation():
    with pytest.raises(ValueError):
        StripGrid(64, 8)
    with pytest.raises(ValueError):
        StripGrid(7, 32)
    g = StripGrid(64, 33)
    assert g.dz == pytest.approx(1 / 32)


def test_p_delta_flat_interface():
    g = StripGrid(32, 17)
    P = assemble_P_delta(SpectralField.zeros(8), g, p_of(delta=0.5))
    assert np.allclose(P[..., 0, 0], 0.5)
    assert np.allclose(P[..., 1, 1], 1.0)
    assert np.all(P[..., 0, 1] == 0)


def test_p_delta_bottom_row_diagonal():
    # at z = -1 the lifting factor (1+z) kills the off-diagonal entries
    g = StripGrid(64, 17)
    h = SpectralField.cosine(1, 0.5, 8)
    p = p_of(delta=0.7, eps=0.3)
    P = assemble_P_delta(h, g, p)
    assert np.abs(P[:, 0, 0, 1]).max() == 0.0
    hv = h.values(64)
    assert np.allclose(P[:, 0, 0, 0], 0.7 * (1 + 0.3 * hv))
    assert np.allclose(P[:, 0, 1, 1], 1.0 / (1 + 0.3 * hv))


def test_p_delta_symmetric_positive_definite(rng):
    g = StripGrid(64, 17)
    for _ in range(10):
        c = np.zeros(9, complex)
        c[1:4] = 0.1 * (rng.standard_normal(3) + 1j * rng.standard_normal(3))
        h = SpectralField(c)
        P = assemble_P_delta(h, g, p_of(delta=0.5, eps=0.4))
        assert np.all(P[..., 0, 1] == P[..., 1, 0])
        det = P[..., 0, 0] * P[..., 1, 1] - P[..., 0, 1] ** 2
        assert np.all(det > 0)
        assert np.all(P[..., 0, 0] > 0)


def test_degenerate_lift_rejected():
    g = StripGrid(64, 17)
    h = SpectralField.cosine(1, 1.0, 8)
    with pytest.raises(DegenerateLiftError):
        assemble_P_delta(h, g, p_of(eps=0.96))
    with pytest.raises(DegenerateLiftError):
        solve_strip(h, h, g, p_of(eps=0.96))


def test_factorization_failure_wrapped(monkeypatch):
    import muskat.strip as strip_mod

    def boom(*_a, **_k):
        raise RuntimeError("factorization failed")

    monkeypatch.setattr(strip_mod.spla, "splu", boom)
    g = StripGrid(32, 17)
    with pytest.raises(LinearSolveError, match="sparse solve failed"):
        solve_strip(SpectralField.zeros(8), SpectralField.cosine(1, 1.0, 8),
                    g, p_of())


def test_assembled_operator_symmetric():
    g = StripGrid(48, 25)
    h = SpectralField.cosine(1, 0.4, 8)
    A = assemble_system(h, g, p_of(delta=0.6, eps=0.4))
    assert abs(A - A.T).max() == 0.0


def test_flat_strip_closed_form_second_order():
    # phi = cos(x) cosh(1+z)/cosh(1); error drops 4x per refinement
    errs = []
    for (nx, nz) in ((64, 33), (128, 65), (256, 129)):
        g = StripGrid(nx, nz)
        psi = SpectralField.cosine(1, 1.0, 8)
        sol = solve_strip(SpectralField.zeros(8), psi, g, p_of())
        exact = np.cos(g.x)[:, None] * np.cosh(1 + g.z)[None, :] / math.cosh(1)
        errs.append(np.abs(sol.phi - exact).max())
        assert sol.residual_norm <= 1e-10 * wiener_norm(psi, 0)
        # Dirichlet row equals the datum exactly
        assert np.all(sol.phi[:, -1] == psi.values(nx))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.1)
    assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.1)


def test_constant_datum_gives_constant_potential():
    g = StripGrid(32, 17)
    c = np.zeros(9, complex)
    c[0] = 2.5
    psi = SpectralField(c)
    sol = solve_strip(SpectralField.zeros(8), psi, g, p_of(delta=0.3))
    assert np.abs(sol.phi - sol.phi[0, -1]).max() < 1e-10


def test_dtn_flat_reduces_to_multiplier():
    # relative A0 error <= 5e-4 at n_z = 256 across modes k <= 8
    g = StripGrid(512, 256)
    p = ModelParams(chi=1, theta=1.0, sigma=0.0, delta=1.0, epsilon=0.0,
                    model="wnl1")
    c = np.zeros(65, complex)
    for k in range(1, 9):
        c[k] = COS_MODE / k
    psi = SpectralField(c)
    out = dtn_apply(SpectralField.zeros(64), psi, g, p, sigma=0.0)
    kk = np.arange(65.0)
    expect = kk * np.tanh(kk) * psi.coeffs
    err = 2 * np.abs(out.coeffs[1:] - expect[1:]).sum()
    assert err <= 5e-4 * wiener_norm(psi, 1)


def test_dtn_zero_datum_and_flux_balance(rng):
    g = StripGrid(128, 48)
    p = ModelParams(chi=1, theta=1.0, sigma=0.1, delta=1.0, epsilon=0.1,
                    model="wnl1")
    h = SpectralField.cosine(1, 1.0, 16)
    zero = dtn_apply(h, SpectralField.zeros(16), g, p)
    assert np.abs(zero.coeffs).max() < 1e-12
    # discrete divergence theorem: with an impermeable bottom and periodic
    # sides, the assembled operator's total surface-flux functional vanishes
    psi = SpectralField.cosine(2, 1.0, 16)
    sol = solve_strip(h, psi, g, p)
    A = assemble_system(h, g, p)
    top_flux = (A @ sol.phi.ravel()).reshape(g.n_x, g.n_z)[:, -1].sum()
    scale = np.abs(A @ sol.phi.ravel()).max()
    assert abs(top_flux) <= 1e-10 * max(scale, 1.0)
    # the surface velocity itself integrates to ~0 up to discretization
    vals = surface_normal_velocity(sol, h, g, p, p.sigma)
    assert abs(np.mean(vals)) <= 1e-3 * np.abs(vals).max()


def test_dtn_expansion_second_order():
    g = StripGrid(256, 96)
    p = ModelParams(chi=1, theta=1.0, sigma=0.0, delta=1.0, epsilon=0.0,
                    model="wnl1")
    h = SpectralField.cosine(1, 1.0, 32)
    psi = SpectralField.cosine(2, 1.0, 32)
    rep = verify_dtn_expansion(h, psi, [0.2, 0.1, 0.05], g, p)
    assert not rep.grid_limited
    assert 1.7 <= rep.slope <= 2.3
    assert rep.correlation < -0.999 or rep.correlation > 0.999
    # Richardson check: the first-order mismatch shrinks linearly in sigma
    fo = rep.extra["first_order_errors"]
    assert fo[-1] < fo[0]


def test_dtn_expansion_zero_h_remainder_floor():
    g = StripGrid(128, 48)
    p = ModelParams(chi=1, theta=1.0, sigma=0.0, delta=1.0, epsilon=0.0,
                    model="wnl1")
    h = SpectralField.zeros(16)
    psi = SpectralField.cosine(2, 1.0, 16)
    rep = verify_dtn_expansion(h, psi, [0.2, 0.1], g, p)
    # with h = 0 the map is sigma-independent: remainders sit at the floor
    assert all(r <= max(2 * rep.floor, 1e-12) for r in rep.remainders)


def test_lub_flux_second_order_flat_mobility():
    g = StripGrid(256, 65)
    p = p_of(eps=0.1)
    f = SpectralField.cosine(1, 1.0, 32)
    flux_rep, phi_rep = verify_lub_flux(
        SpectralField.zeros(32), f, [0.04, 0.02, 0.01], g, p
    )
    assert 1.8 <= flux_rep.slope <= 2.2
    assert 1.8 <= phi_rep.slope <= 2.2


def test_lub_flux_second_order_with_profile():
    g = StripGrid(256, 65)
    p = p_of(eps=0.1)
    f = SpectralField.cosine(1, 1.0, 32)
    h = SpectralField.cosine(1, 0.3, 32)
    flux_rep, phi_rep = verify_lub_flux(h, f, [0.04, 0.02, 0.01], g, p)
    assert 1.8 <= flux_rep.slope <= 2.2
    assert 1.8 <= phi_rep.slope <= 2.2


def test_lub_flux_zero_datum():
    g = StripGrid(128, 33)
    p = p_of(eps=0.2)
    h = SpectralField.cosine(1, 0.2, 16)
    flux_rep, _phi = verify_lub_flux(
        h, SpectralField.zeros(16), [0.04, 0.02], g, p
    )
    assert all(r < 1e-12 for r in flux_rep.remainders)


def test_phi1_profile_shape():
    # solved phi - f at small delta reproduces z(z+2)/2 * cos(x) (times delta)
    g = StripGrid(128, 65)
    d = 0.005
    p = p_of(eps=0.0)
    f = SpectralField.cosine(1, 1.0, 16)
    from dataclasses import replace
    sol = solve_strip(SpectralField.zeros(16), f,
                      g, replace(p, delta=d, sigma=0.0))
    phi1_num = (sol.phi - f.values(128)[:, None]) / d
    phi1 = 0.5 * g.z[None, :] * (g.z[None, :] + 2.0) * np.cos(g.x)[:, None]
    assert np.abs(phi1_num - phi1).max() <= 0.01
