import math

import numpy as np
import pytest

from muskat.config import SolverConfig
from muskat.diagnostics import (
    EnergyRecord,
    check_a0_dyadic_trend,
    check_exponential_decay,
    check_monotone_decay,
    check_operator_bounds,
    energy,
    make_record,
    random_decay_field,
    read_energy_csv,
    verify_trajectory_dir,
)
from muskat.integrate import run
from muskat.params import ModelParams
from muskat.spectral import SpectralField

SQ2PI = math.sqrt(2 * math.pi)


def wnl(sigma=0.0, lam=0.0, theta=1.0, chi=1, depth="finite", model="wnl1"):
    return ModelParams(chi=chi, lam=lam, theta=theta, sigma=sigma,
                       depth=depth, model=model)


def test_energy_values():
    p = wnl(theta=1.0)
    assert energy(SpectralField.zeros(16), p) == 0.0
    # single cosine: A0 = A3 = sqrt(2 pi)
    e = energy(SpectralField.cosine(1, 1.0, 16), p)
    assert e == pytest.approx((1 + math.tanh(1.0)) * SQ2PI, rel=1e-14)
    # thin film at k = 2: A0 + sqrt(delta) theta A4 = (1 + 16) sqrt(2 pi)
    pl = ModelParams.lubrication(chi=1, lam=0.0, theta=1.0, delta=1.0, epsilon=0.0)
    e2 = energy(SpectralField.cosine(2, 1.0, 16), pl)
    assert e2 == pytest.approx(17 * SQ2PI, rel=1e-14)


def test_record_consistency(rng):
    p = wnl(lam=1.0)
    h = random_decay_field(32, 3, rng)
    rec = make_record(0.5, h, SpectralField.zeros(32), 4, p)
    expect = rec.norms[0] + p.theta * math.tanh(1.0) * rec.norms[3]
    assert rec.energy == pytest.approx(expect, rel=1e-12)
    row = rec.csv_row()
    back = EnergyRecord.from_csv_row(row)
    assert back.energy == rec.energy and back.t == rec.t


def test_monotone_decay_verdicts():
    def rec(t, e):
        return EnergyRecord(t, [e] * 6, e, 0.0, 0.0, 0)

    good = [rec(t, math.exp(-t)) for t in np.linspace(0, 1, 20)]
    v = check_monotone_decay(good)
    assert v.passed and v.first_violation is None

    bad = list(good)
    bad[10] = rec(bad[10].t, bad[9].energy * 1.001)
    v2 = check_monotone_decay(bad)
    assert not v2.passed
    assert v2.first_violation[0] == 10

    zero = [rec(t, 0.0) for t in np.linspace(0, 1, 5)]
    assert check_monotone_decay(zero).passed


def test_exponential_decay_fit_linear_run(tmp_path):
    # single-mode sigma=0 run: exact rate (1+lam/4) tanh1/(1+theta tanh1)
    p = wnl(lam=4.0, theta=1.0)
    cfg = SolverConfig(n_modes=32, dt=0.01, t_end=2.0, output_cadence=2,
                       snapshot_cadence=0, output_dir="")
    traj = run(SpectralField.cosine(1, 1e-3, 32), p, cfg)
    rep = check_exponential_decay(traj.records, p)
    exact = 2 * math.tanh(1.0) / (1 + math.tanh(1.0))
    assert rep.fitted_rate == pytest.approx(exact, rel=1e-6)
    assert rep.fitted_rate >= math.tanh(1.0) / 2 - 0.05
    assert rep.passed
    # the two window fits agree for single-mode data
    assert rep.half_rates[0] == pytest.approx(rep.half_rates[1], rel=1e-4)


def test_dyadic_trend_for_rateless_decay():
    # the lam = 0 small-slope model decays with no guaranteed rate: the A0 sup
    # over dyadic windows must still trend down
    p = wnl(sigma=0.3, lam=0.0, theta=1.0)
    cfg = SolverConfig(n_modes=32, dt=0.01, t_end=4.0, output_cadence=4,
                       snapshot_cadence=0, output_dir="")
    traj = run(SpectralField.cosine(1, 1e-2, 32), p, cfg)
    verdict = check_a0_dyadic_trend(traj.records)
    assert verdict.passed
    # a manufactured late bump is flagged
    def rec(t, a):
        return EnergyRecord(t, [a] * 6, a, 0.0, 0.0, 0)
    rising = [rec(t, math.exp(-t)) for t in np.linspace(0.01, 4.0, 50)]
    rising[-1] = rec(4.0, 5.0)
    assert not check_a0_dyadic_trend(rising).passed
    with pytest.raises(ValueError):
        check_a0_dyadic_trend(rising[:3])


def test_sign_part_two_mode_pair_frozen_values():
    # h = cos 3x, V = cos x: of the four (m, k-m) mode pairs only the two
    # with opposite signs contribute (k = +-2), each with weight
    # |k||k-m|^3 = 2 and bracket -2, so I_A = -sqrt(2 pi) cos(2x)
    from muskat import _kernels
    from muskat.spectral import COS_MODE, tanh_clamped

    h = SpectralField.cosine(3, 1.0, 8)
    v = SpectralField.cosine(1, 1.0, 8)
    tanha = tanh_clamped(np.arange(9))
    ia_f, _ib = _kernels.sign_split_direct(
        _kernels.full_spectrum(h.coeffs), _kernels.full_spectrum(v.coeffs), tanha
    )
    ia = _kernels.half_spectrum(ia_f) / SQ2PI
    # hand value: 2 * 1^3 * (-2) * COS_MODE^2 / sqrt(2 pi) at k = 2
    expect = 2 * (-2) * COS_MODE**2 / SQ2PI
    assert ia[2] == pytest.approx(expect, rel=1e-14)
    mask = np.ones(9, bool)
    mask[2] = False
    assert np.abs(ia[mask]).max() < 1e-15
    from muskat.spectral import wiener_norm as wn
    ratio = 2 * abs(ia[2]) / (wn(h, 1) * wn(v, 3))
    assert ratio == pytest.approx(2.0 / (3.0 * SQ2PI), rel=1e-14)
    assert ratio <= 2.0


def test_exponential_decay_guards():
    p = wnl(lam=1.0)
    recs = [EnergyRecord(t, [0.0] * 6, 0.0, 0.0, 0.0, 0)
            for t in np.linspace(0, 1, 25)]
    rep = check_exponential_decay(recs, p)
    assert rep.degenerate and rep.passed
    with pytest.raises(ValueError, match="20 records"):
        check_exponential_decay(recs[:5], p)
    with pytest.raises(ValueError, match="chi"):
        check_exponential_decay(recs, wnl(lam=1.0, chi=-1))
    with pytest.raises(ValueError, match="lam"):
        check_exponential_decay(recs, wnl(lam=0.0))


def test_unstable_sign_runs_and_verdict_reports():
    # chi = -1: the gravitationally unstable stratification grows; the run
    # completes, the monotonicity verdict reports the violation, and the
    # rate checker refuses the out-of-hypothesis fit
    p = wnl(sigma=0.0, lam=1.0, theta=1.0, chi=-1)
    cfg = SolverConfig(n_modes=32, dt=0.01, t_end=1.0, output_cadence=2,
                       snapshot_cadence=0, output_dir="")
    traj = run(SpectralField.cosine(1, 1e-3, 32), p, cfg)
    assert traj.records[-1].norms[0] > traj.records[0].norms[0]
    verdict = check_monotone_decay(traj.records)
    assert not verdict.passed
    assert verdict.first_violation is not None
    with pytest.raises(ValueError, match="chi"):
        check_exponential_decay(traj.records, p)


def test_operator_bounds_exact_and_deterministic():
    p = wnl(sigma=1.0, lam=1.0, theta=1.0)
    rep = check_operator_bounds(60, p, rng_seed=11, n_modes=48)
    assert rep.passed
    assert rep.checks["base_symbol_inverse"]["max_ratio"] <= 1.0
    assert rep.checks["damped_high_mode"]["max_ratio"] <= 1.0 + 1e-15
    assert rep.checks["sign_part_factor_two"]["max_ratio"] <= 1.0
    rep2 = check_operator_bounds(60, p, rng_seed=11, n_modes=48)
    assert rep.as_dict() == rep2.as_dict()
    # infinite depth and thin film variants of the exact inequalities
    rep3 = check_operator_bounds(20, wnl(depth="infinite", lam=1.0), 3, 32)
    assert rep3.checks["base_symbol_inverse"]["passed"]
    pl = ModelParams.lubrication(chi=1, lam=1.0, theta=0.5, delta=0.04,
                                 epsilon=0.2)
    rep4 = check_operator_bounds(20, pl, 3, 32)
    assert rep4.checks["damped_high_mode"]["passed"]


def test_random_decay_field_profile(rng):
    f = random_decay_field(64, 3, rng, amplitude=2.0)
    assert f.coeffs[0] == 0.0
    mags = np.abs(f.coeffs[1:])
    k = np.arange(1, 65, dtype=float)
    assert np.all(mags <= 2.0 * k**-3.0 + 1e-15)
    assert np.all(mags >= 1.0 * k**-3.0 - 1e-15)


def test_trajectory_dir_self_describing(tmp_path):
    p = wnl(sigma=0.1, lam=1.0)
    out = tmp_path / "run"
    cfg = SolverConfig(
        model="wnl1", chi=1, lam=1.0, theta=1.0, sigma=0.1,
        n_modes=32, dt=0.005, t_end=1.0, output_cadence=2,
        snapshot_cadence=10, output_dir=str(out),
    )
    traj = run(SpectralField.cosine(1, 1e-3, 32), p, cfg)
    checks = verify_trajectory_dir(str(out))
    assert checks["energy_consistency"]["passed"]
    assert checks["monotone_energy"]["passed"]
    assert checks["exponential_decay"]["passed"]
    # file-recomputed verdicts match the in-memory ones
    in_mem = check_monotone_decay(traj.records)
    assert checks["monotone_energy"]["passed"] == in_mem.passed
    recs = read_energy_csv(str(out / "energy.csv"))
    assert len(recs) == len(traj.records)
    assert recs[5].energy == traj.records[5].energy
