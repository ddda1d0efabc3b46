"""Experiment configuration: embedded defaults, flat config files, unit handling.

Config files are plain text, one ``section.key = value`` per line, ``#``
comments allowed.  Every default is embedded below, so an empty config file
(or none at all) runs the reference simulation setup: 28 GHz carrier, 8x16
arrays, 10 dBm transmit and sensing power, -107 dBm noise floors, 3 users
drawn from 30-50 m and +/-80 degrees, eavesdropper fixed at (30 m, 50 deg),
128 sweep beams, 21 sampled uncertainty directions, 15 degree rotation limits.

Powers enter in dBm, the radar cross section in dBsm and angles in degrees;
everything is converted to linear watts / square meters / radians once, here.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import SPEED_OF_LIGHT, ArrayConfig, PolarPosition
from .objective import LinkBudget
from .optimizer import SolverSettings
from .sensing import SensingConfig, default_search_grid

SCHEME_TAGS = ("FPA-ABF", "GRA-ABF", "ERA-ABF", "TRA-ABF", "TRA-ABF-PE", "TRA-ABF-ES")

DEFAULTS: dict[str, object] = {
    "array.n_tx": 8,
    "array.n_rx": 16,
    "array.carrier_ghz": 28.0,
    "array.directivity_p": 1.0,
    "array.phi_arr_max_deg": 15.0,
    "array.varphi_max_deg": 15.0,
    "link.power_dbm": 10.0,
    "link.noise_dbm": -107.0,
    "sensing.n_beams": 128,
    "sensing.power_dbm": 10.0,
    "sensing.noise_dbm": -117.0,   # narrower sensing bandwidth than the comm link
    "sensing.rcs_dbsm": 7.0,
    "sensing.grid_points": 2048,
    "sensing.refine": True,
    "sensing.n_samples": 21,
    "solver.tol": 1e-6,
    "solver.max_iter_inner": 200,
    "solver.max_iter_ao": 30,
    "solver.armijo_c": 1e-4,
    "solver.armijo_shrink": 0.5,
    "solver.armijo_max_backtracks": 30,
    "solver.beta_sm_init": 5.0,
    "solver.beta_sm_growth": 1.5,
    "solver.beta_sm_cap": 1e4,
    "solver.grid_points_init": 15,
    "solver.step_init": 1.0,
    "solver.es_grid_step_deg": 0.5,
    "scene.n_users": 3,
    "scene.user_range_m": [30.0, 50.0],
    "scene.user_azimuth_deg": [-80.0, 80.0],
    "scene.eav_range_m": 30.0,
    "scene.eav_azimuth_deg": 50.0,
    "experiment.n_trials": 200,
    "experiment.master_seed": 1,
    "experiment.schemes": list(SCHEME_TAGS),
    "experiment.sweep_parameter": "",
    "experiment.sweep_values": [],
    "experiment.rotation_error_bounds_deg": [],
    "experiment.beam_pattern_resolution_deg": 1.0,
}

_INT_KEYS = {
    "array.n_tx", "array.n_rx", "sensing.n_beams", "sensing.grid_points",
    "sensing.n_samples", "solver.max_iter_inner", "solver.max_iter_ao",
    "solver.armijo_max_backtracks", "solver.grid_points_init",
    "scene.n_users", "experiment.n_trials", "experiment.master_seed",
}
_BOOL_KEYS = {"sensing.refine"}
_LIST_KEYS = {
    "scene.user_range_m", "scene.user_azimuth_deg", "experiment.schemes",
    "experiment.sweep_values", "experiment.rotation_error_bounds_deg",
}
_STR_KEYS = {"experiment.sweep_parameter"}


class ConfigError(ValueError):
    """Malformed or inconsistent configuration input."""


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def _parse_scalar(key: str, raw: str):
    raw = raw.strip()
    if key in _STR_KEYS:
        return raw
    if key in _BOOL_KEYS:
        low = raw.lower()
        if low in ("true", "1", "yes", "on"):
            return True
        if low in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
    try:
        if key in _INT_KEYS:
            return int(raw)
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse {raw!r}") from exc


def parse_config_text(text: str) -> dict[str, object]:
    """Parse ``key = value`` lines on top of the embedded defaults."""
    values = dict(DEFAULTS)
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in body.split("=", 1))
        if key not in values:
            raise ConfigError(f"line {lineno}: unknown configuration key {key!r}")
        if key in _LIST_KEYS:
            items = [s.strip() for s in raw.split(",") if s.strip()]
            if key == "experiment.schemes":
                values[key] = items
            else:
                values[key] = [float(s) for s in items]
        else:
            values[key] = _parse_scalar(key, raw)
    return values


def load_config(path: str | None) -> dict[str, object]:
    if path is None:
        return dict(DEFAULTS)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return parse_config_text(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc


def format_manifest(values: dict[str, object]) -> str:
    """Fully resolved configuration in the same flat format it is read from."""
    lines = []
    for key in sorted(values):
        val = values[key]
        if isinstance(val, list):
            rendered = ", ".join(str(v) for v in val)
        else:
            rendered = str(val)
        lines.append(f"{key} = {rendered}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved experiment plan: physics configs, scene law and sweep definition."""

    array: ArrayConfig
    link: LinkBudget
    sensing: SensingConfig
    solver: SolverSettings
    n_samples: int
    n_users: int
    user_range_interval: tuple[float, float]
    user_azimuth_interval: tuple[float, float]      # radians
    eav_position: PolarPosition
    n_trials: int
    master_seed: int
    schemes: tuple[str, ...]
    es_grid_step: float                              # radians
    sweep_parameter: str = ""
    sweep_values: tuple[float, ...] = ()
    rotation_error_bounds: tuple[float, ...] = ()    # radians
    beam_pattern_resolution: float = np.deg2rad(1.0)
    raw: dict = field(default_factory=dict, compare=False, repr=False)


def build_experiment(values: dict[str, object]) -> ExperimentConfig:
    """Validate a flat config dict and assemble the typed experiment plan."""
    v = dict(DEFAULTS)
    v.update(values)
    schemes = tuple(v["experiment.schemes"])
    for tag in schemes:
        if tag not in SCHEME_TAGS:
            raise ConfigError(f"unknown scheme tag {tag!r}; valid: {', '.join(SCHEME_TAGS)}")
    if not schemes:
        raise ConfigError("scheme list must not be empty")
    sweep_param = str(v["experiment.sweep_parameter"])
    sweep_values = tuple(float(x) for x in v["experiment.sweep_values"])
    if sweep_param and sweep_param not in DEFAULTS:
        raise ConfigError(f"sweep parameter {sweep_param!r} is not a configuration key")
    if sweep_param and not sweep_values:
        raise ConfigError("sweep parameter set but no sweep values given")
    rng_interval = tuple(float(x) for x in v["scene.user_range_m"])
    az_interval_deg = tuple(float(x) for x in v["scene.user_azimuth_deg"])
    if len(rng_interval) != 2 or len(az_interval_deg) != 2:
        raise ConfigError("user range and azimuth intervals need exactly two values")
    wavelength = SPEED_OF_LIGHT / (float(v["array.carrier_ghz"]) * 1e9)
    try:
        array = ArrayConfig(
            n_tx=int(v["array.n_tx"]), n_rx=int(v["array.n_rx"]),
            wavelength=wavelength,
            directivity_p=float(v["array.directivity_p"]),
            phi_arr_max=np.deg2rad(float(v["array.phi_arr_max_deg"])),
            varphi_max=np.deg2rad(float(v["array.varphi_max_deg"])))
        link = LinkBudget(dbm_to_watts(float(v["link.power_dbm"])),
                          dbm_to_watts(float(v["link.noise_dbm"])))
        sensing = SensingConfig(
            n_beams=int(v["sensing.n_beams"]),
            sensing_power=dbm_to_watts(float(v["sensing.power_dbm"])),
            noise_power=dbm_to_watts(float(v["sensing.noise_dbm"])),
            rcs=db_to_linear(float(v["sensing.rcs_dbsm"])),
            search_grid=default_search_grid(int(v["sensing.grid_points"])),
            refine=bool(v["sensing.refine"]))
        solver = SolverSettings(
            tol=float(v["solver.tol"]),
            max_iter_inner=int(v["solver.max_iter_inner"]),
            max_iter_ao=int(v["solver.max_iter_ao"]),
            armijo_c=float(v["solver.armijo_c"]),
            armijo_shrink=float(v["solver.armijo_shrink"]),
            armijo_max_backtracks=int(v["solver.armijo_max_backtracks"]),
            beta_sm_init=float(v["solver.beta_sm_init"]),
            beta_sm_growth=float(v["solver.beta_sm_growth"]),
            beta_sm_cap=float(v["solver.beta_sm_cap"]),
            grid_points_init=int(v["solver.grid_points_init"]),
            step_init=float(v["solver.step_init"]))
        eav = PolarPosition(float(v["scene.eav_range_m"]),
                            np.deg2rad(float(v["scene.eav_azimuth_deg"])))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    n_samples = int(v["sensing.n_samples"])
    if n_samples < 1:
        raise ConfigError("sensing.n_samples must be positive")
    n_users = int(v["scene.n_users"])
    if n_users < 1:
        raise ConfigError("scene.n_users must be positive")
    n_trials = int(v["experiment.n_trials"])
    if n_trials < 1:
        raise ConfigError("experiment.n_trials must be positive")
    return ExperimentConfig(
        array=array, link=link, sensing=sensing, solver=solver,
        n_samples=n_samples, n_users=n_users,
        user_range_interval=rng_interval,
        user_azimuth_interval=tuple(np.deg2rad(az_interval_deg)),
        eav_position=eav,
        n_trials=n_trials,
        master_seed=int(v["experiment.master_seed"]),
        schemes=schemes,
        es_grid_step=np.deg2rad(float(v["solver.es_grid_step_deg"])),
        sweep_parameter=sweep_param,
        sweep_values=sweep_values,
        rotation_error_bounds=tuple(np.deg2rad(float(b))
                                    for b in v["experiment.rotation_error_bounds_deg"]),
        beam_pattern_resolution=np.deg2rad(
            float(v["experiment.beam_pattern_resolution_deg"])),
        raw=v)


def with_value(ecfg: ExperimentConfig, key: str, value: float) -> ExperimentConfig:
    """Rebuild the experiment with one flat config key overridden (sweeps)."""
    flat = dict(ecfg.raw or DEFAULTS)
    if key in _INT_KEYS:
        flat[key] = int(round(value))
    else:
        flat[key] = value
    rebuilt = build_experiment(flat)
    return replace(rebuilt,
                   sweep_parameter=ecfg.sweep_parameter,
                   sweep_values=ecfg.sweep_values)
