"""Flat key-value run configuration with dotted sections.

The format is one `key = value` per line, `#` comments, keys dotted for
nesting (`initial_condition.k = 1`, `verify.dtn.n_z = 256`).  Flat text
diffs cleanly across sweep matrices, which is why it is preferred over
nested formats here.  See README for the full schema.
"""

import json
import math
import os
from dataclasses import dataclass, field

from . import _kernels
from .params import ModelParams

PACKAGE_VERSION = "0.1.0"


class ConfigError(ValueError):
    pass


def parse_config_text(text):
    """Config text -> flat {dotted key: string value}."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, val = line.split("=", 1)
        key = key.strip()
        val = val.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = val
    return out


def _as_float(key, v):
    try:
        return float(v)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected a number, got {v!r}")


def _as_int(key, v):
    f = _as_float(key, v)
    if f != int(f):
        raise ConfigError(f"{key}: expected an integer, got {v!r}")
    return int(f)


def _as_float_list(key, v):
    if isinstance(v, (list, tuple)):
        return [float(x) for x in v]
    return [_as_float(key, part) for part in str(v).split(",") if part.strip()]


_KNOWN_TOP = {
    "model", "depth", "chi", "lambda", "theta", "sigma", "delta", "epsilon",
    "n_modes", "dt", "t_end", "output_cadence", "snapshot_cadence", "scheme",
    "tol", "max_iter", "rng_seed", "output_dir", "initial_condition",
}


@dataclass
class SolverConfig:
    """Everything one trajectory or verification needs, plus output control."""

    model: str = "wnl1"
    depth: str = "finite"
    chi: int = 1
    lam: float = 0.0
    theta: float = 1.0
    sigma: float = 0.0
    delta: float = 1.0
    epsilon: float = 0.0
    n_modes: int = 64
    dt: float = 1e-3
    t_end: float = 1.0
    output_cadence: int = 10
    snapshot_cadence: int = 10
    scheme: str = "rk4"
    tol: float | None = None
    max_iter: int = 200
    rng_seed: int = 0
    output_dir: str = ""
    ic: dict = field(default_factory=lambda: {"kind": "single_mode",
                                              "k": 1, "amplitude": 1e-3})
    verify: dict = field(default_factory=dict)

    def __post_init__(self):
        n = self.n_modes
        if n < 32 or (n & (n - 1)) != 0:
            raise ConfigError(f"n_modes must be a power of two >= 32, got {n}")
        if self.dt <= 0:
            raise ConfigError("dt must be positive")
        if self.t_end < 0:
            raise ConfigError("t_end must be nonnegative")
        if self.output_cadence < 1 or self.snapshot_cadence < 0:
            raise ConfigError("cadences must be positive")
        if self.scheme not in ("euler", "rk4"):
            raise ConfigError("scheme must be euler or rk4")
        if self.max_iter < 1:
            raise ConfigError("max_iter must be >= 1")

    def as_dict(self):
        return {
            "model": self.model,
            "depth": self.depth,
            "chi": self.chi,
            "lambda": self.lam,
            "theta": self.theta,
            "sigma": self.sigma,
            "delta": self.delta,
            "epsilon": self.epsilon,
            "n_modes": self.n_modes,
            "dt": self.dt,
            "t_end": self.t_end,
            "output_cadence": self.output_cadence,
            "snapshot_cadence": self.snapshot_cadence,
            "scheme": self.scheme,
            "tol": self.tol,
            "max_iter": self.max_iter,
            "rng_seed": self.rng_seed,
            "output_dir": self.output_dir,
            "initial_condition": dict(self.ic),
            "verify": {k: v for k, v in sorted(self.verify.items())},
        }


def load_config(source):
    """Path, text-parsed dict, or meta-style dict -> (SolverConfig, ModelParams)."""
    if isinstance(source, (str, os.PathLike)):
        try:
            with open(source) as fh:
                raw = parse_config_text(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}")
    elif isinstance(source, dict):
        raw = dict(source)
    else:
        raise ConfigError(f"unsupported config source {type(source)!r}")

    # meta.json style: nested initial_condition / verify dicts
    ic = raw.pop("initial_condition", None)
    nested_verify = raw.pop("verify", None) if isinstance(raw.get("verify"), dict) \
        else None

    flat_ic = {}
    verify = dict(nested_verify) if nested_verify else {}
    for key in list(raw):
        if key.startswith("initial_condition."):
            flat_ic[key.split(".", 1)[1]] = raw.pop(key)
        elif key.startswith("verify."):
            verify[key.split(".", 1)[1]] = raw.pop(key)

    unknown = set(raw) - _KNOWN_TOP
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")

    ic_dict = {"kind": "single_mode", "k": 1, "amplitude": 1e-3}
    if isinstance(ic, dict):
        ic_dict = dict(ic)
    elif ic is not None:
        ic_dict = {"kind": str(ic)}
    for k, v in flat_ic.items():
        ic_dict[k] = v
    kind = ic_dict.get("kind", "single_mode")
    if kind not in ("single_mode", "random_decay", "from_file"):
        raise ConfigError(f"unknown initial_condition {kind!r}")
    ic_norm = {"kind": kind}
    if kind == "single_mode":
        ic_norm["k"] = _as_int("initial_condition.k", ic_dict.get("k", 1))
        ic_norm["amplitude"] = _as_float(
            "initial_condition.amplitude", ic_dict.get("amplitude", 1e-3))
    elif kind == "random_decay":
        ic_norm["p"] = _as_float("initial_condition.p", ic_dict.get("p", 3))
        ic_norm["amplitude"] = _as_float(
            "initial_condition.amplitude", ic_dict.get("amplitude", 1e-3))
        if "seed" in ic_dict:
            ic_norm["seed"] = _as_int("initial_condition.seed", ic_dict["seed"])
    else:
        if "path" not in ic_dict:
            raise ConfigError("initial_condition = from_file requires "
                              "initial_condition.path")
        ic_norm["path"] = str(ic_dict["path"])

    model = str(raw.get("model", "wnl1"))
    epsilon = _as_float("epsilon", raw.get("epsilon", 0.0))
    delta = _as_float("delta", raw.get("delta", 1.0))
    if "sigma" in raw and raw["sigma"] is not None and raw["sigma"] != "":
        sigma = _as_float("sigma", raw["sigma"])
    elif model == "lubrication":
        sigma = epsilon * math.sqrt(delta)
    else:
        sigma = 0.0

    tol_raw = raw.get("tol")
    tol = None if tol_raw in (None, "", "auto") else _as_float("tol", tol_raw)

    cfg = SolverConfig(
        model=model,
        depth=str(raw.get("depth", "finite")),
        chi=_as_int("chi", raw.get("chi", 1)),
        lam=_as_float("lambda", raw.get("lambda", 0.0)),
        theta=_as_float("theta", raw.get("theta", 1.0)),
        sigma=sigma,
        delta=delta,
        epsilon=epsilon,
        n_modes=_as_int("n_modes", raw.get("n_modes", 64)),
        dt=_as_float("dt", raw.get("dt", 1e-3)),
        t_end=_as_float("t_end", raw.get("t_end", 1.0)),
        output_cadence=_as_int("output_cadence", raw.get("output_cadence", 10)),
        snapshot_cadence=_as_int("snapshot_cadence",
                                 raw.get("snapshot_cadence", 10)),
        scheme=str(raw.get("scheme", "rk4")),
        tol=tol,
        max_iter=_as_int("max_iter", raw.get("max_iter", 200)),
        rng_seed=_as_int("rng_seed", raw.get("rng_seed", 0)),
        output_dir=str(raw.get("output_dir", "") or ""),
        ic=ic_norm,
        verify=verify,
    )
    try:
        params = ModelParams(
            chi=cfg.chi,
            lam=cfg.lam,
            theta=cfg.theta,
            sigma=cfg.sigma,
            delta=cfg.delta,
            epsilon=cfg.epsilon,
            depth=cfg.depth,
            model=cfg.model,
        )
    except ValueError as exc:
        raise ConfigError(str(exc))
    return cfg, params


def make_initial_condition(config):
    """Build the configured mean-zero initial interface."""
    from .diagnostics import random_decay_field
    from .spectral import SpectralField, load_spectrum_csv

    import numpy as np

    ic = config.ic
    if ic["kind"] == "single_mode":
        if not 1 <= ic["k"] <= config.n_modes:
            raise ConfigError(
                f"initial_condition.k = {ic['k']} outside 1..{config.n_modes}")
        return SpectralField.cosine(ic["k"], ic["amplitude"], config.n_modes)
    if ic["kind"] == "random_decay":
        seed = ic.get("seed", config.rng_seed)
        rng = np.random.default_rng(seed)
        return random_decay_field(config.n_modes, ic["p"], rng, ic["amplitude"])
    h = load_spectrum_csv(ic["path"])
    if h.n_modes != config.n_modes:
        raise ConfigError(
            f"{ic['path']}: file has {h.n_modes} modes, config wants "
            f"{config.n_modes}")
    h.coeffs[0] = 0.0
    return h


def trajectory_paths(out_dir):
    return {
        "meta": os.path.join(out_dir, "meta.json"),
        "energy": os.path.join(out_dir, "energy.csv"),
        "snapshots": os.path.join(out_dir, "snapshots"),
    }


def write_meta(path, config, params, extra=None):
    """Self-describing, timestamp-free run metadata (kept reproducible)."""
    meta = {
        "version": PACKAGE_VERSION,
        "kernel_lane": _kernels.KERNEL_LANE,
        "config": config.as_dict(),
        "params": params.as_dict(),
    }
    if extra:
        meta.update(extra)
    with open(path, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
