"""Per-step quasilinear solve L_h U = F by contraction iteration.

The iteration splits L_h into its invertible base part plus the h-dependent
perturbation and repeats

    V_{n+1} = base^{-1}(F - perturbation(h, V_n)),    V_0 = base^{-1} F,

declaring convergence when the increment in the scheme norm (A^3 for the
small-slope models, A^4 for the thin film) drops below tolerance.  The map
is affine in V, so the increment sequence is exactly geometric with ratio
equal to the operator norm of base^{-1} perturbation; outside the small-h
regime that ratio exceeds one and the solve reports failure instead of
iterating forever.

``dense_solve`` is the independent reference route: it assembles the same
operator mode by mode against the cosine/sine basis and solves the dense
linear system directly.  It exists to check the iteration, never to replace
it.
"""

import numpy as np

from . import models
from .models import _tab
from .spectral import SpectralField, check_same_grid, wiener_norm

DEFAULT_MAX_ITER = 200
_STALL_LIMIT = 3


class NotContractingError(RuntimeError):
    """The fixed-point map expanded for several consecutive iterations,
    i.e. h lies outside the smallness regime."""

    def __init__(self, contraction_estimate, iterations):
        super().__init__(
            f"fixed-point map not contracting (ratio {contraction_estimate:.3g} "
            f">= 1 for {_STALL_LIMIT} consecutive iterations after "
            f"{iterations} iterations)"
        )
        self.contraction_estimate = contraction_estimate
        self.iterations = iterations


class MaxIterationsError(RuntimeError):
    def __init__(self, iterations, increment, tol):
        super().__init__(
            f"no convergence in {iterations} iterations "
            f"(last increment {increment:.3g}, tol {tol:.3g})"
        )
        self.iterations = iterations


class FixedPointReport:
    """Iteration diagnostics of one quasilinear solve."""

    __slots__ = (
        "iterations",
        "final_residual",
        "contraction_estimate",
        "converged",
        "increments",
        "norm_order",
        "tol",
    )

    def __init__(self, iterations, final_residual, contraction_estimate,
                 converged, increments, norm_order, tol):
        self.iterations = iterations
        self.final_residual = final_residual
        self.contraction_estimate = contraction_estimate
        self.converged = converged
        self.increments = tuple(increments)
        self.norm_order = norm_order
        self.tol = tol

    def as_dict(self):
        return {
            "iterations": self.iterations,
            "final_residual": self.final_residual,
            "contraction_estimate": self.contraction_estimate,
            "converged": self.converged,
            "increments": list(self.increments),
            "norm_order": self.norm_order,
            "tol": self.tol,
        }


def default_tolerance(F):
    return 1e-11 * max(1.0, wiener_norm(F, 0))


def _norm_raw(tab, c, order):
    k = tab.k3 if order == 3 else tab.k4
    return 2.0 * float((k * np.abs(c)).sum())


def _solve_raw(tab, cF, hphys, tol, max_iter):
    """Raw fixed point on coefficient arrays.  Returns (U, iters, increments)."""
    p = tab.p
    if p.model == "lubrication":
        base = tab.lub_base
        active = p.epsilon != 0.0 and np.any(hphys)
        pert = models._lub_perturb_raw
        order = 4
    else:
        base = tab.ell0
        active = p.sigma != 0.0 and np.any(hphys)
        pert = models._commutator_raw
        coef = p.sigma * p.theta
        order = 3
    V = cF / base
    V[0] = 0.0
    increments = []
    stall = 0
    prev = None
    for it in range(1, max_iter + 1):
        if not active:
            increments.append(0.0)
            return V, it, increments
        if p.model == "lubrication":
            rhs = cF - pert(tab, hphys, V)
        else:
            rhs = cF - coef * pert(tab, hphys, V)
        Vn = rhs / base
        Vn[0] = 0.0
        inc = _norm_raw(tab, Vn - V, order)
        increments.append(inc)
        V = Vn
        if not np.isfinite(inc):
            raise NotContractingError(float("inf"), it)
        if inc <= tol:
            return V, it, increments
        if prev is not None and prev > 0.0:
            stall = stall + 1 if inc >= prev else 0
            if stall >= _STALL_LIMIT:
                est = max(
                    b / a for a, b in zip(increments, increments[1:]) if a > 0.0
                )
                raise NotContractingError(est, it)
        prev = inc
    raise MaxIterationsError(max_iter, increments[-1], tol)


def _contraction_estimate(increments):
    ratios = [b / a for a, b in zip(increments, increments[1:]) if a > 0.0]
    return max(ratios) if ratios else 0.0


def solve_quasilinear(h, F, params, tol=None, max_iter=DEFAULT_MAX_ITER):
    """Solve L_h U = F.  Returns (U, FixedPointReport).

    Raises NotContractingError outside the smallness regime and
    MaxIterationsError if the tolerance is not reached.
    """
    check_same_grid(h, F)
    tab = _tab(h, params)
    if tol is None:
        tol = default_tolerance(F)
    hphys = tab.phys(h.coeffs)
    U_raw, iters, increments = _solve_raw(tab, F.coeffs.copy(), hphys, tol, max_iter)
    U = SpectralField(U_raw, copy=False)
    residual = wiener_norm(
        SpectralField(
            models.apply_quasilinear(h, U, params).coeffs - F.coeffs, copy=False
        ),
        0,
    )
    report = FixedPointReport(
        iterations=iters,
        final_residual=residual,
        contraction_estimate=_contraction_estimate(increments),
        converged=True,
        increments=increments,
        norm_order=models.scheme_norm_order(params),
        tol=tol,
    )
    return U, report


def dense_solve(h, F, params):
    """Direct dense solve of L_h U = F over the cosine/sine mode basis.

    Assembles the operator column by column by applying it to each basis
    field, then solves with LAPACK.  O(N^2) operator applications plus an
    O(N^3) solve; intended for small grids as the reference route for the
    contraction iteration.
    """
    check_same_grid(h, F)
    n = h.n_modes
    dim = 2 * n  # [Re c_1..c_N, Im c_1..c_N]

    def to_vec(c):
        return np.concatenate([c[1:].real, c[1:].imag])

    def from_vec(v):
        c = np.zeros(n + 1, dtype=complex)
        c[1:] = v[:n] + 1j * v[n:]
        return c

    A = np.empty((dim, dim))
    basis = np.zeros(n + 1, dtype=complex)
    for j in range(dim):
        basis[:] = 0.0
        if j < n:
            basis[j + 1] = 1.0
        else:
            basis[j - n + 1] = 1j
        col = models.apply_quasilinear(h, SpectralField(basis), params)
        A[:, j] = to_vec(col.coeffs)
    sol = np.linalg.solve(A, to_vec(F.coeffs))
    return SpectralField(from_vec(sol), copy=False)


class SmallnessReport:
    __slots__ = ("h_a1", "contraction_factor", "probe_ratios", "passed")

    def __init__(self, h_a1, contraction_factor, probe_ratios, passed):
        self.h_a1 = h_a1
        self.contraction_factor = contraction_factor
        self.probe_ratios = tuple(probe_ratios)
        self.passed = passed

    def as_dict(self):
        return {
            "h_a1": self.h_a1,
            "contraction_factor": self.contraction_factor,
            "probe_ratios": list(self.probe_ratios),
            "passed": self.passed,
        }


def certify_smallness(h, params, n_probes=5, seed=0):
    """Probe the contraction factor of the per-step fixed point at this h.

    The map is affine, so the factor is the operator norm of
    base^{-1} perturbation(h, .) in the scheme norm; it is estimated as the
    max ratio over random probe directions.  Pass requires factor < 1.
    """
    tab = _tab(h, params)
    order = models.scheme_norm_order(params)
    hphys = tab.phys(h.coeffs)
    rng = np.random.default_rng(seed)
    n = h.n_modes
    k = np.arange(1, n + 1, dtype=float)
    ratios = []
    for _ in range(n_probes):
        mag = k ** (-4.0) * rng.uniform(0.5, 1.0, size=n)
        phase = rng.uniform(0.0, 2.0 * np.pi, size=n)
        w = np.zeros(n + 1, dtype=complex)
        w[1:] = mag * np.exp(1j * phase)
        if params.model == "lubrication":
            img = models._lub_perturb_raw(tab, hphys, w) / tab.lub_base
        else:
            img = (
                params.sigma
                * params.theta
                * models._commutator_raw(tab, hphys, w)
                / tab.ell0
            )
        ratios.append(_norm_raw(tab, img, order) / _norm_raw(tab, w, order))
    factor = max(ratios)
    return SmallnessReport(
        h_a1=wiener_norm(h, 1),
        contraction_factor=factor,
        probe_ratios=ratios,
        passed=factor < 1.0,
    )
