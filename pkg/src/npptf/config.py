"""Run configuration: JSON schema, defaults and validation."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path

from .channel import ChannelParams
from .crossterm import DEFAULT_PAIR_CUTOFF
from .decoy import DEFAULT_YIELD_CUTOFF, IntensityConfig
from .errors import ConfigError, NpptfError
from .keyrate import DEFAULT_MU_GRID, MODES
from .leakage import DEFAULT_TOLERANCE
from .lp import FEAS_TOL

# every accepted key with its default; anything else is rejected
DEFAULTS = {
    "channel": {
        "dark_count": 8e-8,
        "det_eff": 0.145,
        "loss_coeff": 0.2,
        "misalignment": 0.0,
        "ec_eff": 1.15,
    },
    "intensities": {
        "mu": 0.05,
        "nu1": 0.005,
        "nu2": 0.002,
        "vacuum": 0.0,
        "mu3": 1.3,
        # explicit sets override the standard construction from the values above
        "i1": None,
        "i2": None,
    },
    "cutoffs": {
        "yield_cutoff": DEFAULT_YIELD_CUTOFF,
        "pair_cutoff": DEFAULT_PAIR_CUTOFF,
    },
    "tolerances": {
        "lp_tol": FEAS_TOL,
        "leakage_tol": DEFAULT_TOLERANCE,
    },
    "modes": ["improved", "original"],
    "gains_file": None,
    "optimize_mu": False,
    "mu_grid": list(DEFAULT_MU_GRID),
    "plob_with_detector": False,
}


@dataclass(frozen=True)
class RunConfig:
    channel: ChannelParams
    intensities: IntensityConfig
    yield_cutoff: int
    pair_cutoff: int
    lp_tol: float
    leakage_tol: float
    modes: tuple
    gains_file: str | None
    optimize_mu: bool
    mu_grid: tuple
    plob_with_detector: bool
    raw: dict

    def pipeline_kwargs(self):
        return {"yield_cutoff": self.yield_cutoff, "pair_cutoff": self.pair_cutoff,
                "leakage_tol": self.leakage_tol, "lp_tol": self.lp_tol}


def _merge(base, override, path=""):
    for key, value in override.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown configuration key '{where}'")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"'{where}' must be an object")
            _merge(base[key], value, where)
        else:
            base[key] = value


def _number(value, where, kind=float):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"'{where}' must be a number, got {value!r}")
    if kind is int and int(value) != value:
        raise ConfigError(f"'{where}' must be an integer, got {value!r}")
    return kind(value)


def build_config(data):
    """Validate a (partial) configuration mapping on top of the defaults."""
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object")
    merged = copy.deepcopy(DEFAULTS)
    _merge(merged, data)
    try:
        channel = ChannelParams(**{k: _number(v, f"channel.{k}") for k, v in merged["channel"].items()})
        it = merged["intensities"]
        if (it["i1"] is None) != (it["i2"] is None):
            raise ConfigError("'intensities.i1' and 'intensities.i2' must be given together")
        if it["i1"] is not None:
            sets = {}
            for key in ("i1", "i2"):
                if not isinstance(it[key], list) or not it[key]:
                    raise ConfigError(f"'intensities.{key}' must be a non-empty list")
                sets[key] = tuple(_number(v, f"intensities.{key}") for v in it[key])
            intensities = IntensityConfig(_number(it["mu"], "intensities.mu"), sets["i1"], sets["i2"])
        else:
            mu3 = it["mu3"]
            intensities = IntensityConfig.standard(
                _number(it["mu"], "intensities.mu"), _number(it["nu1"], "intensities.nu1"),
                _number(it["nu2"], "intensities.nu2"), _number(it["vacuum"], "intensities.vacuum"),
                None if mu3 is None else _number(mu3, "intensities.mu3"))
    except NpptfError as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc
    cut = merged["cutoffs"]
    yield_cutoff = _number(cut["yield_cutoff"], "cutoffs.yield_cutoff", int)
    pair_cutoff = _number(cut["pair_cutoff"], "cutoffs.pair_cutoff", int)
    if yield_cutoff < 3:
        raise ConfigError("'cutoffs.yield_cutoff' must be >= 3")
    if not 1 <= pair_cutoff <= yield_cutoff:
        raise ConfigError("'cutoffs.pair_cutoff' must lie in [1, yield_cutoff]")
    tol = merged["tolerances"]
    lp_tol = _number(tol["lp_tol"], "tolerances.lp_tol")
    leakage_tol = _number(tol["leakage_tol"], "tolerances.leakage_tol")
    if not (0 < lp_tol < 1e-3 and 0 < leakage_tol < 1e-2):
        raise ConfigError("tolerances must be small positive numbers")
    modes = merged["modes"]
    if isinstance(modes, str):
        modes = [modes]
    if not modes or any(m not in MODES for m in modes):
        raise ConfigError(f"'modes' must be a non-empty list drawn from {list(MODES)}")
    grid = merged["mu_grid"]
    if not (isinstance(grid, (list, tuple)) and len(grid) == 3):
        raise ConfigError("'mu_grid' must be [lo, hi, steps]")
    grid = (_number(grid[0], "mu_grid[0]"), _number(grid[1], "mu_grid[1]"),
            _number(grid[2], "mu_grid[2]", int))
    if not (0 < grid[0] < grid[1]) or grid[2] < 2:
        raise ConfigError("'mu_grid' needs 0 < lo < hi and steps >= 2")
    weak = [v for v in intensities.i2 if v != intensities.mu]
    if weak and grid[0] <= max(weak):
        raise ConfigError("'mu_grid' lower edge must exceed the weak decoy intensities")
    for key in ("optimize_mu", "plob_with_detector"):
        if not isinstance(merged[key], bool):
            raise ConfigError(f"'{key}' must be true or false")
    gains_file = merged["gains_file"]
    if gains_file is not None and not isinstance(gains_file, str):
        raise ConfigError("'gains_file' must be a path string or null")
    return RunConfig(channel, intensities, yield_cutoff, pair_cutoff, lp_tol, leakage_tol,
                     tuple(modes), gains_file, merged["optimize_mu"], grid,
                     merged["plob_with_detector"], merged)


def parse_override(text):
    """``section.key=value`` with a JSON value (bare strings allowed)."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} must look like key=value")
    key, value = text.split("=", 1)
    try:
        parsed = json.loads(value)
    except json.JSONDecodeError:
        parsed = value
    out = cur = {}
    parts = key.strip().split(".")
    for p in parts[:-1]:
        cur = cur.setdefault(p, {})
    cur[parts[-1]] = parsed
    return out


def _deep_update(target, src):
    for k, v in src.items():
        if isinstance(v, dict) and isinstance(target.get(k), dict):
            _deep_update(target[k], v)
        else:
            target[k] = v


def parse_config(path=None, overrides=()):
    """Load a JSON file (optional) and apply ``key=value`` overrides."""
    data = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read configuration file {path}: {exc.strerror}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"configuration file {path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a JSON object")
    for text in overrides:
        _deep_update(data, parse_override(text))
    return build_config(data)
