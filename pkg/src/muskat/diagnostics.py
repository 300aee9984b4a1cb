"""Energy functionals, decay verdicts and inequality checks.

The dissipation structure of the models is quantified by two energies:

* small-slope models: E = ||h||_{A0} + theta*T(1)*||h||_{A3}, with T(1) =
  tanh(1) for the bounded strip and 1 for the unbounded one;
* thin film: E = ||h||_{A0} + sqrt(delta)*theta*||h||_{A4}.

For gravitationally stable data (chi = +1) in the small-data regime these
are nonincreasing along trajectories, and for lam > 0 the A0 norm decays at
least at rate tanh(1)/2 (bounded strip).  The checkers below verify those
statements on recorded trajectories and the pointwise operator inequalities
on seeded random ensembles.
"""

import json
import math

import numpy as np

from . import _kernels, models
from .spectral import SQRT_2PI, SpectralField, wiener_norm

ENERGY_HEADER = "t,a0,a1,a2,a3,a4,a5,energy,dth_a0,dth_high,iters"

MONOTONE_SLACK = 1e-9
DECAY_RATE_MARGIN = 0.05
MIN_FIT_RECORDS = 20


def _fmt(x):
    return f"{x:.17g}"


class EnergyRecord:
    """One sampled instant of a trajectory."""

    __slots__ = ("t", "norms", "energy", "dth_a0", "dth_high", "iters")

    def __init__(self, t, norms, energy, dth_a0, dth_high, iters):
        self.t = t
        self.norms = tuple(norms)  # A^0..A^5 of h
        self.energy = energy
        self.dth_a0 = dth_a0
        self.dth_high = dth_high  # A^3 (small slope) or A^4 (thin film) of dh/dt
        self.iters = iters

    def csv_row(self):
        cells = [_fmt(self.t)] + [_fmt(v) for v in self.norms]
        cells += [_fmt(self.energy), _fmt(self.dth_a0), _fmt(self.dth_high),
                  str(self.iters)]
        return ",".join(cells)

    @classmethod
    def from_csv_row(cls, row):
        parts = row.split(",")
        if len(parts) != 11:
            raise ValueError(f"expected 11 columns, got {len(parts)}")
        vals = [float(p) for p in parts[:10]]
        return cls(
            t=vals[0],
            norms=vals[1:7],
            energy=vals[7],
            dth_a0=vals[8],
            dth_high=vals[9],
            iters=int(parts[10]),
        )


def energy_coefficient(params):
    if params.model == "lubrication":
        return math.sqrt(params.delta) * params.theta
    t1 = math.tanh(1.0) if params.depth == "finite" else 1.0
    return params.theta * t1


def energy_norm_order(params):
    return 4 if params.model == "lubrication" else 3


def energy(h, params):
    """Model-selected dissipation energy of h."""
    s = energy_norm_order(params)
    return wiener_norm(h, 0) + energy_coefficient(params) * wiener_norm(h, s)


def energy_from_norms(norms, params):
    return norms[0] + energy_coefficient(params) * norms[energy_norm_order(params)]


def make_record(t, h, dth, iters, params):
    a = np.abs(h.coeffs[1:])
    k = np.arange(1, h.n_modes + 1, dtype=float)
    norms = [2.0 * float((k**s * a).sum()) for s in range(6)]
    e = energy_from_norms(norms, params)
    return EnergyRecord(
        t=t,
        norms=norms,
        energy=e,
        dth_a0=wiener_norm(dth, 0),
        dth_high=wiener_norm(dth, models.scheme_norm_order(params)),
        iters=iters,
    )


# ---------------------------------------------------------------------------
# trajectory checks
# ---------------------------------------------------------------------------

class DecayVerdict:
    __slots__ = ("passed", "first_violation", "max_uptick", "n_records")

    def __init__(self, passed, first_violation, max_uptick, n_records):
        self.passed = passed
        self.first_violation = first_violation  # (index, t) or None
        self.max_uptick = max_uptick
        self.n_records = n_records

    def as_dict(self):
        return {
            "passed": self.passed,
            "first_violation": self.first_violation,
            "max_relative_uptick": self.max_uptick,
            "records": self.n_records,
        }


def check_monotone_decay(records):
    """E(t_{i+1}) <= E(t_i) * (1 + 1e-9) across consecutive records."""
    passed = True
    first = None
    max_uptick = 0.0
    for i in range(len(records) - 1):
        e0, e1 = records[i].energy, records[i + 1].energy
        if e0 == 0.0:
            if e1 > 0.0:
                passed = False
                first = first or (i + 1, records[i + 1].t)
            continue
        uptick = e1 / e0 - 1.0
        max_uptick = max(max_uptick, uptick)
        if e1 > e0 * (1.0 + MONOTONE_SLACK) and passed:
            passed = False
            first = (i + 1, records[i + 1].t)
    return DecayVerdict(passed, first, max_uptick, len(records))


class RateReport:
    __slots__ = ("fitted_rate", "rate_bound", "passed", "half_rates", "degenerate")

    def __init__(self, fitted_rate, rate_bound, passed, half_rates, degenerate):
        self.fitted_rate = fitted_rate
        self.rate_bound = rate_bound
        self.passed = passed
        self.half_rates = half_rates
        self.degenerate = degenerate

    def as_dict(self):
        return {
            "fitted_rate": self.fitted_rate,
            "rate_bound": self.rate_bound,
            "passed": self.passed,
            "half_rates": list(self.half_rates) if self.half_rates else None,
            "degenerate": self.degenerate,
        }


def check_exponential_decay(records, params):
    """Least-squares decay rate of log ||h||_{A0} against the model's bound.

    The dissipation structure guarantees decay at least at rate
    chi*T(1)/2 when lam > 0, so any faster fitted decay passes.  Requires
    chi = +1 and at least 20 records; identically-zero trajectories are
    reported degenerate.
    """
    if params.chi != 1:
        raise ValueError("decay verification assumes the stable sign chi = +1")
    if params.lam <= 0 and params.model != "lubrication":
        raise ValueError("exponential-rate fit assumes lam > 0")
    if len(records) < MIN_FIT_RECORDS:
        raise ValueError(f"need at least {MIN_FIT_RECORDS} records, "
                         f"got {len(records)}")
    t = np.array([r.t for r in records])
    a0 = np.array([r.norms[0] for r in records])
    if np.all(a0 == 0.0):
        return RateReport(0.0, _decay_bound(params), True, None, True)
    if np.any(a0 <= 0.0):
        raise ValueError("A0 norm vanished mid-run; cannot fit a rate")
    logs = np.log(a0)
    rate = -np.polyfit(t, logs, 1)[0]
    mid = len(records) // 2
    halves = []
    for sl in (slice(0, mid + 1), slice(mid, None)):
        halves.append(-np.polyfit(t[sl], logs[sl], 1)[0])
    bound = _decay_bound(params)
    return RateReport(float(rate), bound, bool(rate >= bound), halves, False)


def _decay_bound(params):
    t1 = math.tanh(1.0) if params.depth == "finite" else 1.0
    return params.chi * t1 / 2.0 - DECAY_RATE_MARGIN


def check_a0_dyadic_trend(records):
    """Nonincreasing sup of the A0 norm over dyadic time windows.

    The lam = 0 theory only gives decay to zero, with no rate; the testable
    discrete statement is that sup ||h||_{A0} over [T/2^{j+1}, T/2^j] does
    not increase as the windows move later in time.  Returns a DecayVerdict
    whose first_violation indexes the offending window.
    """
    if len(records) < 4:
        raise ValueError("need at least 4 records for a windowed trend")
    T = records[-1].t
    sups = []  # sups[j]: window (T/2^{j+1}, T/2^j], later windows first
    j = 0
    while True:
        lo, hi = T / 2 ** (j + 1), T / 2**j
        window = [r.norms[0] for r in records if lo < r.t <= hi]
        if not window:
            break
        sups.append(max(window))
        if lo <= records[1].t:
            break
        j += 1
    passed = True
    first = None
    worst = 0.0
    for j, (later, earlier) in enumerate(zip(sups, sups[1:])):
        if earlier > 0:
            worst = max(worst, later / earlier - 1.0)
        if later > earlier * (1.0 + MONOTONE_SLACK) and passed:
            passed = False
            first = (j, None)
    return DecayVerdict(passed, first, worst, len(records))


# ---------------------------------------------------------------------------
# random ensembles and operator bound checks
# ---------------------------------------------------------------------------

def random_decay_field(n_modes, p, rng, amplitude=1.0):
    """Mean-zero field with |hhat(k)| = amplitude * |k|^{-p} * U(1/2, 1) and
    uniform random phases."""
    k = np.arange(1, n_modes + 1, dtype=float)
    mag = amplitude * k ** (-float(p)) * rng.uniform(0.5, 1.0, size=n_modes)
    phase = rng.uniform(0.0, 2.0 * np.pi, size=n_modes)
    c = np.zeros(n_modes + 1, dtype=complex)
    c[1:] = mag * np.exp(1j * phase)
    return SpectralField(c, copy=False)


class BoundReport:
    def __init__(self):
        self.checks = {}
        self.passed = True

    def add(self, name, passed, **stats):
        self.checks[name] = {"passed": bool(passed), **stats}
        self.passed = self.passed and bool(passed)

    def as_dict(self):
        return {"passed": self.passed, "checks": self.checks}

    def to_json(self, indent=2):
        return json.dumps(self.as_dict(), indent=indent, sort_keys=True)


def check_operator_bounds(sample_count, params, rng_seed, n_modes=64):
    """Evaluate the operator inequalities on seeded random fields.

    Asserted exactly (they hold mode by mode or term by term):
      * base-symbol inversion: 1/ell(k) <= 1;
      * damped third derivative: theta*T(1)*|k|^3 / ell(k) <= 1
        (thin film: sqrt(delta)*theta*k^4 / (1 + sqrt(delta)*theta*k^4) <= 1);
      * sign-part commutator: ||I_A||_{A0} <= 2 ||h||_{A1} ||V||_{A3},
        with I_A evaluated by the direct double sum.

    Recorded (constants not fixed by the analysis): the empirical sup of
    ||I(h,V)||_{A0} / (||h||_{A1} ||V||_{A3}) and its stability across the
    two sample halves.
    """
    rng = np.random.default_rng(rng_seed)
    rep = BoundReport()
    k = np.arange(n_modes + 1, dtype=float)
    sym = models.base_elliptic_symbol(params).eval(k)
    rep.add("base_symbol_inverse", np.all(1.0 / sym <= 1.0),
            max_ratio=float((1.0 / sym).max()))
    if params.model == "lubrication":
        damped = math.sqrt(params.delta) * params.theta * k**4 / sym
    else:
        t1 = math.tanh(1.0) if params.depth == "finite" else 1.0
        damped = params.theta * t1 * k[1:] ** 3 / sym[1:]
    rep.add("damped_high_mode", np.all(damped <= 1.0 + 1e-15),
            max_ratio=float(damped.max()))

    tanha = (
        np.tanh(np.minimum(np.arange(n_modes + 1, dtype=float), 20.0))
        if params.depth == "finite"
        else np.ones(n_modes + 1)
    )
    if params.depth == "finite":
        tanha[np.arange(n_modes + 1) > 20] = 1.0

    ps = (2, 3, 4)
    ia_max = 0.0
    full_ratios = []
    for i in range(sample_count):
        h = random_decay_field(n_modes, ps[i % 3], rng)
        v = random_decay_field(n_modes, ps[(i + 1) % 3], rng)
        hf = _kernels.full_spectrum(h.coeffs)
        vf = _kernels.full_spectrum(v.coeffs)
        ia_f, ib_f = _kernels.sign_split_direct(hf, vf, tanha)
        scale = 1.0 / SQRT_2PI  # product normalization of the convolution
        ia_a0 = float(np.abs(ia_f).sum()) * scale
        i_a0 = float(np.abs(ia_f + ib_f).sum()) * scale
        ha1 = wiener_norm(h, 1)
        va3 = wiener_norm(v, 3)
        ia_max = max(ia_max, ia_a0 / (2.0 * ha1 * va3))
        full_ratios.append(i_a0 / (ha1 * va3))
    rep.add("sign_part_factor_two", ia_max <= 1.0 + 1e-12, max_ratio=ia_max,
            samples=sample_count)

    full_ratios = np.array(full_ratios)
    sup_all = float(full_ratios.max())
    half = sample_count // 2
    sup_1 = float(full_ratios[:half].max())
    sup_2 = float(full_ratios[half:].max())
    stable = abs(sup_1 - sup_2) <= 0.1 * max(sup_1, sup_2)
    rep.add("commutator_ratio", sup_all <= 10.0, empirical_sup=sup_all,
            half_sups=[sup_1, sup_2], halves_within_10pct=bool(stable))
    return rep


# ---------------------------------------------------------------------------
# self-describing trajectory directories
# ---------------------------------------------------------------------------

def read_energy_csv(path):
    records = []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != ENERGY_HEADER:
            raise ValueError(f"{path}: unexpected header {header!r}")
        for line in fh:
            line = line.strip()
            if line:
                records.append(EnergyRecord.from_csv_row(line))
    return records


def verify_trajectory_dir(out_dir):
    """Recompute all verdicts of a run directory from its files alone.

    Returns the checks dict; also validates that energies recomputed from
    snapshot spectra agree with the logged column to 1e-12 relative.
    """
    import os

    from .config import load_config
    from .spectral import load_spectrum_csv

    meta_path = os.path.join(out_dir, "meta.json")
    with open(meta_path) as fh:
        meta = json.load(fh)
    config, params = load_config(meta["config"])
    records = read_energy_csv(os.path.join(out_dir, "energy.csv"))
    checks = {"monotone_energy": check_monotone_decay(records).as_dict()}
    if params.chi == 1 and (params.lam > 0 or params.model == "lubrication") \
            and len(records) >= MIN_FIT_RECORDS:
        checks["exponential_decay"] = check_exponential_decay(
            records, params).as_dict()
    elif params.chi == 1 and len(records) >= 4:
        checks["a0_dyadic_trend"] = check_a0_dyadic_trend(records).as_dict()
    worst = 0.0
    for idx in meta.get("snapshots", []):
        snap = os.path.join(out_dir, "snapshots", f"t_{idx:06d}.csv")
        h = load_spectrum_csv(snap)
        e = energy(h, params)
        logged = records[idx].energy
        err = abs(e - logged) / max(1.0, abs(logged))
        worst = max(worst, err)
    checks["energy_consistency"] = {
        "passed": worst <= 1e-12,
        "max_relative_error": worst,
    }
    return checks


def append_checks_to_meta(out_dir, checks):
    import os

    meta_path = os.path.join(out_dir, "meta.json")
    with open(meta_path) as fh:
        meta = json.load(fh)
    meta["checks"] = checks
    with open(meta_path, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
