"""Operators and nonlinearities of the three interface evolution models.

All three models share the first-order-system form

    L_h(dh/dt) = N(h)

where ``L_h`` is an invertible base operator plus an h-dependent
perturbation and ``N`` collects the forcing terms:

* small-slope models (``wnl1``/``wnl2``, order-one depth):
    L_h U = (1 - theta*G*dxx) U + sigma*theta*I(h, U)
    I(h,V) = G(h * G dxx V) + dx(h * dxxx V)
    N(h)   = -chi*G h - (lam/4)*G dx^4 h
             + sigma*chi   [G(h*Gh)       + dx(h dx h)]
             + sigma*lam/4 [G(h*G dx^4 h) + dx(h dx^5 h)]
  with G the depth symbol (|k| tanh|k| bounded strip, |k| unbounded).
  Model 2 replaces U inside the sigma*theta term by the leading-order
  velocity mu = (1 - theta*G*dxx)^{-1}[-chi*G h - (lam/4)*G dx^4 h], which
  makes its right-hand side explicit.

* thin-film model (``lubrication``):
    L_h U = U + sqrt(delta)*theta*dx((1+eps*h) dx^3 U)
    N(h)  = sqrt(delta)*dx((1+eps*h) dx(chi*h + (lam/4) dx^4 h))

Every quadratic product is dealiased at formation (4N padding) and every
public operation returns a mean-zero field.  The module keeps an immutable
per-(n_modes, params) table of symbol arrays; scratch memory is allocated
per call, so all operations are safe to use from multiple threads.
"""

import math
from functools import lru_cache

import numpy as np
import scipy.fft as _fft

from .params import ModelParams
from .spectral import (
    SQRT_2PI,
    MultiplierSymbol,
    SpectralField,
    check_same_grid,
    tanh_clamped,
)

__all__ = [
    "base_elliptic_symbol",
    "invert_base",
    "commutator",
    "commutator_sign_split",
    "apply_quasilinear_wnl",
    "forcing_wnl",
    "leading_velocity_wnl2",
    "rhs_wnl2",
    "forcing_lub",
    "apply_quasilinear_lub",
    "invert_lub_base",
    "linear_decay_rate",
    "scheme_norm_order",
]


class _OpTable:
    """Per-(n_modes, params) constant arrays for the FFT pipeline.

    Immutable after construction.  Scaling conventions: rows of *_stack are
    premultiplied so that irfft gives physical samples directly, rows of
    *_out fold in the inverse-transform normalization of the 4N product
    grid.
    """

    def __init__(self, n_modes, p):
        n = n_modes
        self.n = n
        self.m = 4 * n
        self.nbig = self.m // 2 + 1
        self.p = p
        k = np.arange(n + 1, dtype=float)
        self.k = k
        tanh = tanh_clamped(k)
        self.tanh = tanh if p.depth == "finite" else np.ones_like(k)
        self.G = k * self.tanh
        self.ik = 1j * k
        # base symbols
        self.ell0 = 1.0 + p.theta * k**3 * self.tanh
        self.sqd = math.sqrt(p.delta)
        self.lub_base = 1.0 + self.sqd * p.theta * k**4
        to_phys = self.m / SQRT_2PI
        from_phys = SQRT_2PI / self.m
        self.h_scale = to_phys
        # wnl forcing: factors [G h, dx h, G dx^4 h, dx^5 h]
        self.nl_stack = np.stack(
            [self.G + 0j, self.ik, self.G * k**4 + 0j, (1j * k) ** 5]
        ) * to_phys
        self.nl_out = np.stack(
            [
                p.sigma * p.chi * self.G + 0j,
                p.sigma * p.chi * self.ik,
                p.sigma * (p.lam / 4.0) * self.G + 0j,
                p.sigma * (p.lam / 4.0) * self.ik,
            ]
        ) * from_phys
        self.nl_linear = -p.chi * self.G - (p.lam / 4.0) * self.G * k**4
        # commutator I(h,V): factors [G dxx V, dxxx V], outputs [G ., dx .]
        self.comm_stack = np.stack([-self.G * k**2 + 0j, (1j * k) ** 3]) * to_phys
        self.comm_out = np.stack([self.G + 0j, self.ik]) * from_phys
        # sign/tanh split of I: I_A = dx(h dxxx V) - Lam(h Lam^3 V),
        # I_B = Lam(h Lam^3 V) + G(h G dxx V); for the unbounded symbol
        # (tanh == 1) I_B vanishes identically.
        self.split_stack = np.stack(
            [(1j * k) ** 3, k**3 + 0j, -self.G * k**2 + 0j]
        ) * to_phys
        self.split_outA = np.stack([self.ik, -np.abs(k) + 0j]) * from_phys
        self.split_outB = np.stack([np.abs(k) + 0j, self.G + 0j]) * from_phys
        # lubrication: forcing factor dx(chi h + lam/4 dx^4 h); perturbation dx^3 V
        self.lub_w = self.ik * (p.chi + (p.lam / 4.0) * k**4)
        self.lub_pert_scale = self.sqd * p.theta * p.epsilon
        self.k3 = k**3
        self.k4 = k**4

    # -- transforms ---------------------------------------------------------

    def phys(self, c):
        buf = np.zeros(self.nbig, dtype=complex)
        buf[: self.n + 1] = c
        buf[: self.n + 1] *= self.h_scale
        return _fft.irfft(buf, n=self.m)

    def phys_stack(self, rows):
        buf = np.zeros((rows.shape[0], self.nbig), dtype=complex)
        buf[:, : self.n + 1] = rows
        return _fft.irfft(buf, n=self.m, axis=1)

    def prods(self, hphys, rows_phys):
        return _fft.rfft(rows_phys * hphys, axis=1)[:, : self.n + 1]


@lru_cache(maxsize=64)
def _table(n_modes, params):
    return _OpTable(n_modes, params)


def _tab(field, params):
    if not isinstance(params, ModelParams):
        raise TypeError("params must be a ModelParams")
    return _table(field.n_modes, params)


# ---------------------------------------------------------------------------
# raw-array pipeline (used by the elliptic solver and the integrator)
# ---------------------------------------------------------------------------

def _forcing_wnl_raw(tab, c, hphys=None):
    out = tab.nl_linear * c
    if tab.p.sigma != 0.0:
        if hphys is None:
            hphys = tab.phys(c)
        rows = tab.phys_stack(tab.nl_stack * c)
        pr = tab.prods(hphys, rows)
        out = out + (tab.nl_out * pr).sum(axis=0)
    out[0] = 0.0
    return out


def _forcing_wnl_with_h(tab, c):
    """Forcing and the physical profile in one batched transform."""
    if tab.p.sigma == 0.0:
        out = tab.nl_linear * c
        out[0] = 0.0
        return out, tab.phys(c)
    rows = np.empty((5, tab.n + 1), dtype=complex)
    rows[0] = c * tab.h_scale
    rows[1:] = tab.nl_stack * c
    ph = tab.phys_stack(rows)
    hphys = ph[0]
    pr = tab.prods(hphys, ph[1:])
    out = tab.nl_linear * c + (tab.nl_out * pr).sum(axis=0)
    out[0] = 0.0
    return out, hphys


def _commutator_raw(tab, hphys, v):
    rows = tab.phys_stack(tab.comm_stack * v)
    pr = tab.prods(hphys, rows)
    out = (tab.comm_out * pr).sum(axis=0)
    out[0] = 0.0
    return out


def _leading_velocity_raw(tab, c):
    return tab.nl_linear * c / tab.ell0


def _rhs_wnl2_raw(tab, c, hphys=None):
    f = _forcing_wnl_raw(tab, c, hphys)
    if tab.p.sigma != 0.0 and tab.p.theta != 0.0:
        if hphys is None:
            hphys = tab.phys(c)
        mu = _leading_velocity_raw(tab, c)
        f = f - tab.p.sigma * tab.p.theta * _commutator_raw(tab, hphys, mu)
    out = f / tab.ell0
    out[0] = 0.0
    return out


def _forcing_lub_raw(tab, c, hphys=None):
    w = tab.lub_w * c
    flux = w.copy()
    if tab.p.epsilon != 0.0:
        if hphys is None:
            hphys = tab.phys(c)
        rows = tab.phys_stack(w[None, :] * tab.h_scale)
        flux = flux + tab.p.epsilon * tab.prods(hphys, rows)[0] * (SQRT_2PI / tab.m)
    out = tab.sqd * tab.ik * flux
    out[0] = 0.0
    return out


def _lub_perturb_raw(tab, hphys, v):
    rows = tab.phys_stack(((1j * tab.k) ** 3 * v)[None, :] * tab.h_scale)
    pr = tab.prods(hphys, rows)[0] * (SQRT_2PI / tab.m)
    out = tab.lub_pert_scale * tab.ik * pr
    out[0] = 0.0
    return out


# ---------------------------------------------------------------------------
# public field-level operations
# ---------------------------------------------------------------------------

def base_elliptic_symbol(params):
    """Symbol of the base operator acting on dh/dt.

    Small-slope models: 1 + theta |k|^3 T(|k|) with T = tanh (bounded) or 1
    (unbounded); thin film: 1 + sqrt(delta) theta k^4.  Always >= 1.
    """
    if params.model == "lubrication":
        sqd = math.sqrt(params.delta)
        return MultiplierSymbol(
            lambda k: 1.0 + sqd * params.theta * k**4, "1 + sqrt(delta) theta k^4"
        )
    if params.depth == "finite":
        return MultiplierSymbol(
            lambda k: 1.0 + params.theta * np.abs(k) ** 3 * tanh_clamped(k),
            "1 + theta |k|^3 tanh|k|",
        )
    return MultiplierSymbol(
        lambda k: 1.0 + params.theta * np.abs(k) ** 3, "1 + theta |k|^3"
    )


def invert_base(F, params):
    """Solve (1 - theta*G*dxx) U = F mode by mode (small-slope base operator)."""
    tab = _tab(F, params)
    out = F.coeffs / tab.ell0
    out[0] = 0.0
    return SpectralField(out, copy=False)


def commutator(h, V, params):
    """I(h,V) = G(h * G dxx V) + dx(h * dxxx V), dealiased and mean-projected."""
    check_same_grid(h, V)
    tab = _tab(h, params)
    out = _commutator_raw(tab, tab.phys(h.coeffs), V.coeffs)
    return SpectralField(out, copy=False)


def commutator_sign_split(h, V, params):
    """Split I(h,V) into the sign part and the tanh part.

    Mode by mode the interaction weight factors as
    |k||k-m|^3 [sgn(k)sgn(k-m) - tanh|k| tanh|k-m|]; adding and subtracting
    1 isolates the discontinuous piece (bracket sgn*sgn - 1, supported on
    |k| <= |m|) from the smooth one (bracket 1 - tanh*tanh).  As operators:

        I_A = dx(h dxxx V) - Lam(h Lam^3 V)
        I_B = Lam(h Lam^3 V) + G(h G dxx V)

    Returns (I_A, I_B); I_A + I_B reproduces ``commutator``.  For the
    unbounded depth symbol I_B is identically zero.
    """
    check_same_grid(h, V)
    tab = _tab(h, params)
    hphys = tab.phys(h.coeffs)
    rows = tab.phys_stack(tab.split_stack * V.coeffs)
    pr = tab.prods(hphys, rows)
    ia = (tab.split_outA * pr[:2]).sum(axis=0)
    ib = (tab.split_outB * pr[1:]).sum(axis=0)
    ia[0] = 0.0
    ib[0] = 0.0
    return SpectralField(ia, copy=False), SpectralField(ib, copy=False)


def apply_quasilinear_wnl(h, U, params):
    """L_h U for the small-slope models; reduces to the base operator when
    sigma = 0 or h = 0."""
    check_same_grid(h, U)
    tab = _tab(h, params)
    out = tab.ell0 * U.coeffs
    if params.sigma != 0.0:
        out = out + params.sigma * params.theta * _commutator_raw(
            tab, tab.phys(h.coeffs), U.coeffs
        )
    out[0] = 0.0
    return SpectralField(out, copy=False)


def forcing_wnl(h, params):
    """N(h) for the small-slope models (linear + quadratic forcing)."""
    tab = _tab(h, params)
    return SpectralField(_forcing_wnl_raw(tab, h.coeffs), copy=False)


def leading_velocity_wnl2(h, params):
    """mu: the base inverse applied to the linear forcing.

    Mode formula: mu(k) = -(chi + (lam/4) k^4) |k| T(|k|) hhat(k) / ell(k).
    """
    tab = _tab(h, params)
    out = _leading_velocity_raw(tab, h.coeffs)
    out[0] = 0.0
    return SpectralField(out, copy=False)


def rhs_wnl2(h, params):
    """Full dh/dt for model 2: base inverse of N(h) - sigma*theta*I(h, mu)."""
    tab = _tab(h, params)
    return SpectralField(_rhs_wnl2_raw(tab, h.coeffs), copy=False)


def forcing_lub(h, params):
    """Thin-film forcing sqrt(delta)*dx((1+eps*h)*dx(chi h + (lam/4) dx^4 h))."""
    tab = _tab(h, params)
    return SpectralField(_forcing_lub_raw(tab, h.coeffs), copy=False)


def apply_quasilinear_lub(h, U, params):
    """L_h U = U + sqrt(delta)*theta*dx((1+eps*h) dx^3 U) for the thin film."""
    check_same_grid(h, U)
    tab = _tab(h, params)
    out = tab.lub_base * U.coeffs
    if params.epsilon != 0.0:
        out = out + _lub_perturb_raw(tab, tab.phys(h.coeffs), U.coeffs)
    out[0] = 0.0
    return SpectralField(out, copy=False)


def invert_lub_base(F, params):
    """Solve (I + sqrt(delta)*theta*dx^4) U = F mode by mode."""
    tab = _tab(F, params)
    out = F.coeffs / tab.lub_base
    out[0] = 0.0
    return SpectralField(out, copy=False)


def apply_quasilinear(h, U, params):
    """Model-dispatched L_h."""
    if params.model == "lubrication":
        return apply_quasilinear_lub(h, U, params)
    return apply_quasilinear_wnl(h, U, params)


def forcing(h, params):
    """Model-dispatched N(h)."""
    if params.model == "lubrication":
        return forcing_lub(h, params)
    return forcing_wnl(h, params)


def linear_decay_rate(k, params):
    """Per-mode decay rate m(k) of the linearized evolution (dh/dt = -m h).

    Small slope: m(k) = (chi + (lam/4) k^4) |k| T(|k|) / (1 + theta |k|^3 T);
    thin film:   m(k) = sqrt(delta) (chi k^2 + (lam/4) k^6)
                        / (1 + sqrt(delta) theta k^4).
    """
    k = np.abs(np.asarray(k, dtype=float))
    p = params
    if p.model == "lubrication":
        sqd = math.sqrt(p.delta)
        return sqd * (p.chi * k**2 + (p.lam / 4.0) * k**6) / (1.0 + sqd * p.theta * k**4)
    t = tanh_clamped(k) if p.depth == "finite" else np.ones_like(k)
    return (p.chi + (p.lam / 4.0) * k**4) * k * t / (1.0 + p.theta * k**3 * t)


def scheme_norm_order(params):
    """Order of the norm in which the per-step elliptic iteration contracts."""
    return 4 if params.model == "lubrication" else 3
