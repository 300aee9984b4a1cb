"""Explicit time stepping of dh/dt = U(h) with the per-stage elliptic solve.

Each right-hand-side evaluation inverts the quasilinear operator: the
contraction solve for models ``wnl1``/``lubrication``, the explicit formula
for ``wnl2``.  Because the inversion caps the stiffness of the solved rate
at O(k^2) (the rate tends to (lam/4theta) k^2 as |k| grows), classical RK4
with dt of order 1/N^2 is stable and no implicit machinery is needed.

A step is rejected, and dt halved, whenever a stage solve fails to contract
or produces non-finite values; dt recovers by a factor 1.2 every 10 accepted
steps up to the configured value.  The mean mode is pinned to zero after
every accepted step.
"""

import os

import numpy as np

from . import diagnostics, models
from .elliptic import (
    DEFAULT_MAX_ITER,
    MaxIterationsError,
    NotContractingError,
    _solve_raw,
    solve_quasilinear,
)
from .models import _table
from .spectral import SpectralField, save_spectrum_csv

DT_FLOOR = 1e-14
_RECOVER_EVERY = 10
_RECOVER_FACTOR = 1.2


class StepSizeUnderflowError(RuntimeError):
    def __init__(self, dt, t):
        super().__init__(f"time step underflow (dt={dt:.3g} at t={t:.6g})")
        self.dt = dt
        self.t = t


class IntegratorState:
    """Time, current field, step size and bookkeeping for one trajectory."""

    __slots__ = (
        "t",
        "h",
        "dt",
        "dt_max",
        "scheme",
        "step_count",
        "rejected_steps",
        "accepted_streak",
    )

    def __init__(self, h, dt, scheme="rk4", t=0.0, dt_max=None,
                 step_count=0, rejected_steps=0, accepted_streak=0):
        if dt <= 0:
            raise ValueError("dt must be positive")
        if scheme not in ("euler", "rk4"):
            raise ValueError("scheme must be 'euler' or 'rk4'")
        self.t = t
        self.h = h
        self.dt = dt
        self.dt_max = dt if dt_max is None else dt_max
        self.scheme = scheme
        self.step_count = step_count
        self.rejected_steps = rejected_steps
        self.accepted_streak = accepted_streak


def _rhs_raw(tab, c, tol, max_iter):
    """dh/dt for the model in tab.p; returns (coeffs, solver iterations)."""
    if tab.p.model == "wnl2":
        return models._rhs_wnl2_raw(tab, c), 0
    if tab.p.model == "lubrication":
        hphys = tab.phys(c)
        F = models._forcing_lub_raw(tab, c, hphys)
    else:
        F, hphys = models._forcing_wnl_with_h(tab, c)
    if tol is None:
        tol = 1e-11 * max(1.0, 2.0 * float(np.abs(F).sum()))
    U, iters, _ = _solve_raw(tab, F, hphys, tol, max_iter)
    return U, iters


def _try_advance(tab, c, dt, scheme, tol, max_iter):
    """One explicit step attempt.  Returns (c_new, k1, iterations)."""
    k1, n1 = _rhs_raw(tab, c, tol, max_iter)
    if scheme == "euler":
        cn = c + dt * k1
        iters = n1
    else:
        k2, n2 = _rhs_raw(tab, c + 0.5 * dt * k1, tol, max_iter)
        k3, n3 = _rhs_raw(tab, c + 0.5 * dt * k2, tol, max_iter)
        k4, n4 = _rhs_raw(tab, c + dt * k3, tol, max_iter)
        cn = c + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        iters = n1 + n2 + n3 + n4
    cn[0] = 0.0
    if not np.all(np.isfinite(cn)):
        raise NotContractingError(float("inf"), 0)
    return cn, k1, iters


def step(state, params, tol=None, max_iter=DEFAULT_MAX_ITER):
    """Advance one accepted step, halving dt on stage failures.

    Returns (new_state, k1_field, solver_iterations); k1 is the solved
    dh/dt at the step's starting point.
    """
    tab = _table(state.h.n_modes, params)
    c = state.h.coeffs
    dt = state.dt
    rejected = state.rejected_steps
    streak = state.accepted_streak
    while True:
        try:
            cn, k1, iters = _try_advance(tab, c, dt, state.scheme, tol, max_iter)
            break
        except (NotContractingError, MaxIterationsError):
            rejected += 1
            streak = 0
            dt *= 0.5
            if dt < DT_FLOOR:
                raise StepSizeUnderflowError(dt, state.t)
    t_new = state.t + dt
    streak += 1
    dt_next = dt
    if streak % _RECOVER_EVERY == 0:
        dt_next = min(dt * _RECOVER_FACTOR, state.dt_max)
    new = IntegratorState(
        h=SpectralField(cn, copy=False),
        dt=dt_next,
        scheme=state.scheme,
        t=t_new,
        dt_max=state.dt_max,
        step_count=state.step_count + 1,
        rejected_steps=rejected,
        accepted_streak=streak,
    )
    return new, SpectralField(k1, copy=False), iters


class Trajectory:
    """In-memory record list plus (optionally) the on-disk layout."""

    def __init__(self, records, params, config_dict, final_h,
                 out_dir=None, rejected_steps=0):
        self.records = records
        self.params = params
        self.config = config_dict
        self.final_h = final_h
        self.out_dir = out_dir
        self.rejected_steps = rejected_steps

    def energy_series(self):
        return [(r.t, r.energy) for r in self.records]


def run(h0, params, config):
    """Integrate to config.t_end, emitting records and snapshot files.

    Records are taken every output_cadence-th step (the step's starting
    point, whose stage-1 solve provides the logged dh/dt at no extra cost)
    plus the final state.  Deterministic: identical config and initial data
    produce identical bytes on disk.
    """
    from .config import trajectory_paths, write_meta

    out_dir = config.output_dir
    paths = None
    if out_dir:
        paths = trajectory_paths(out_dir)
        os.makedirs(paths["snapshots"], exist_ok=True)
    tab = _table(h0.n_modes, params)

    state = IntegratorState(h=h0, dt=config.dt, scheme=config.scheme)
    n_steps = int(round(config.t_end / config.dt)) if config.t_end > 0 else 0

    records = []
    snap_indices = []

    def record(t, h, dth_raw, iters):
        records.append(
            diagnostics.make_record(
                t, h, SpectralField(dth_raw, copy=False), iters, params
            )
        )

    def snapshot(h):
        idx = len(records) - 1
        snap_indices.append(idx)
        if paths:
            save_spectrum_csv(h, os.path.join(paths["snapshots"], f"t_{idx:06d}.csv"))

    final_report = None

    def final_eval(h):
        # the closing rhs evaluation doubles as the logged solve report
        nonlocal final_report
        if params.model == "wnl2":
            return _rhs_raw(tab, h.coeffs, config.tol, config.max_iter)
        F = (
            models.forcing_lub(h, params)
            if params.model == "lubrication"
            else models.forcing_wnl(h, params)
        )
        U, rep = solve_quasilinear(h, F, params, config.tol, config.max_iter)
        final_report = rep.as_dict()
        return U.coeffs, rep.iterations

    failure = None
    if n_steps == 0:
        k0, it0 = final_eval(h0)
        record(0.0, h0, k0, it0)
        snapshot(h0)
    else:
        def advance_once():
            nonlocal state
            due = state.step_count % config.output_cadence == 0
            t_pre, h_pre = state.t, state.h
            state, k1, iters = step(state, params, config.tol, config.max_iter)
            if due:
                record(t_pre, h_pre, k1.coeffs, iters)
                idx = len(records) - 1
                if config.snapshot_cadence and \
                        idx % config.snapshot_cadence == 0:
                    snapshot(h_pre)

        try:
            while state.step_count < n_steps:
                advance_once()
            # rejections shrink dt mid-run; top up the remaining time
            # (no-op for clean runs, whose residue is pure roundoff,
            # orders below this threshold)
            while config.t_end - state.t > 1e-9 * max(1.0, config.t_end):
                if state.t + state.dt > config.t_end:
                    state.dt = config.t_end - state.t
                advance_once()
            kf, itf = final_eval(state.h)
            record(state.t, state.h, kf, itf)
            snapshot(state.h)
        except StepSizeUnderflowError as exc:
            failure = exc  # flush partial output below, then re-raise

    traj = Trajectory(
        records,
        params,
        config.as_dict(),
        final_h=state.h,
        out_dir=out_dir,
        rejected_steps=state.rejected_steps,
    )
    if paths:
        with open(paths["energy"], "w") as fh:
            fh.write(diagnostics.ENERGY_HEADER + "\n")
            for r in records:
                fh.write(r.csv_row() + "\n")
        extra = {
            "records": len(records),
            "snapshots": snap_indices,
            "rejected_steps": state.rejected_steps,
            "final_solve": final_report,
        }
        if failure is not None:
            extra["failed"] = str(failure)
        write_meta(paths["meta"], config, params, extra=extra)
    if failure is not None:
        raise failure
    return traj
