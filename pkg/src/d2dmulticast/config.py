"""Experiment configuration files.

INI format with four sections, all optional; missing keys fall back to
the library defaults, so an empty (or absent) file reproduces the
reference operating point.

[system] holds the physics. Decibel-valued keys carry a _db suffix and
are converted to linear exactly once, here: detection_threshold_db is
accepted in place of detection_threshold, and the noise power may be
given either directly (noise_power, watts) or as the trio
noise_psd_dbm_hz / noise_figure_db / bandwidth_hz. Giving both spellings
of a quantity is an error rather than a silent preference.

[sim] holds Monte Carlo knobs (trials, seed, window_radius, mobility,
assist, min_link_distance, batch_size, threads).

[sweep] names an axis from a closed set (param), its values (either an
explicit list or start/stop/step), and optionally probe distances for
the coverage command.

[output] holds path, figures, and mode (analytic, sim, or both).
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass
from typing import Tuple

from .model import SystemParams, db_to_linear, noise_power_watts
from .simulate import SimConfig

__all__ = [
    "ConfigError",
    "SweepSpec",
    "ExperimentConfig",
    "load_config",
    "apply_sweep_value",
    "SWEEPABLE_PARAMS",
]


class ConfigError(ValueError):
    """Malformed or contradictory experiment configuration."""


# Closed set of sweepable axes; _db-suffixed names take decibel values.
SWEEPABLE_PARAMS = (
    "detection_threshold",
    "detection_threshold_db",
    "cluster_radius",
    "tau_m",
    "lambda_b",
    "lambda_m",
    "lambda_r",
    "alpha",
    "p_bs",
    "p_d2d",
    "noise_power",
    "eta",
    "budget",
)

_SYSTEM_KEYS = {
    "lambda_b",
    "lambda_m",
    "lambda_r",
    "cluster_radius",
    "detection_threshold",
    "detection_threshold_db",
    "tau_m",
    "alpha",
    "pathloss_intercept",
    "p_bs",
    "p_d2d",
    "noise_power",
    "noise_psd_dbm_hz",
    "noise_figure_db",
    "bandwidth_hz",
    "eta",
    "budget",
}

_SIM_KEYS = {
    "trials",
    "seed",
    "window_radius",
    "mobility",
    "assist",
    "min_link_distance",
    "batch_size",
    "threads",
}

_SWEEP_KEYS = {"param", "values", "start", "stop", "step", "distances"}

_OUTPUT_KEYS = {"path", "figures", "mode"}


@dataclass(frozen=True)
class SweepSpec:
    """One swept axis; values stay in the units the user wrote (decibels
    for _db-suffixed parameters)."""

    param: str
    values: Tuple[float, ...]

    def __post_init__(self) -> None:
        if self.param not in SWEEPABLE_PARAMS:
            raise ConfigError(
                f"unknown sweep parameter {self.param!r}; "
                f"choose from {', '.join(SWEEPABLE_PARAMS)}"
            )
        if not self.values:
            raise ConfigError("sweep needs at least one value")


@dataclass(frozen=True)
class ExperimentConfig:
    params: SystemParams
    sim: SimConfig
    sweep: SweepSpec | None
    distances: Tuple[float, ...]
    out_path: str
    figures: bool
    mode: str | None  # None = let each command pick its default

    def __post_init__(self) -> None:
        if self.mode is not None and self.mode not in ("analytic", "sim", "both"):
            raise ConfigError("mode must be analytic, sim, or both")


def apply_sweep_value(
    params: SystemParams, name: str, value: float
) -> SystemParams:
    """A copy of params with the named axis set to value, converting from
    decibels when the name carries the _db suffix."""
    if name not in SWEEPABLE_PARAMS:
        raise ConfigError(f"unknown sweep parameter {name!r}")
    if name == "detection_threshold_db":
        return params.replace(detection_threshold=db_to_linear(float(value)))
    if name in ("tau_m", "budget"):
        intval = int(value)
        if intval != value:
            raise ConfigError(f"{name} sweep values must be integers")
        return params.replace(**{name: intval})
    return params.replace(**{name: float(value)})


def _reject_unknown(section, allowed, label: str) -> None:
    for key in section:
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r} in [{label}]")


def _floats(text: str) -> Tuple[float, ...]:
    parts = text.replace(",", " ").split()
    try:
        return tuple(float(p) for p in parts)
    except ValueError as exc:
        raise ConfigError(f"bad numeric list {text!r}: {exc}") from None


def _build_params(section) -> SystemParams:
    _reject_unknown(section, _SYSTEM_KEYS, "system")
    if "detection_threshold" in section and "detection_threshold_db" in section:
        raise ConfigError(
            "give detection_threshold or detection_threshold_db, not both"
        )
    noise_trio = {"noise_psd_dbm_hz", "noise_figure_db", "bandwidth_hz"}
    if "noise_power" in section and noise_trio & set(section):
        raise ConfigError(
            "give noise_power directly or via the psd/figure/bandwidth trio, "
            "not both"
        )
    changes = {}
    for key in (
        "lambda_b",
        "lambda_m",
        "lambda_r",
        "cluster_radius",
        "alpha",
        "pathloss_intercept",
        "p_bs",
        "p_d2d",
        "eta",
    ):
        if key in section:
            changes[key] = section.getfloat(key)
    for key in ("tau_m", "budget"):
        if key in section:
            changes[key] = section.getint(key)
    if "detection_threshold" in section:
        changes["detection_threshold"] = section.getfloat("detection_threshold")
    elif "detection_threshold_db" in section:
        changes["detection_threshold"] = db_to_linear(
            section.getfloat("detection_threshold_db")
        )
    if "noise_power" in section:
        changes["noise_power"] = section.getfloat("noise_power")
    elif noise_trio & set(section):
        changes["noise_power"] = noise_power_watts(
            section.getfloat("noise_psd_dbm_hz", fallback=-174.0),
            section.getfloat("noise_figure_db", fallback=9.0),
            section.getfloat("bandwidth_hz", fallback=1e7),
        )
    try:
        return SystemParams(**changes)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _build_sim(section) -> SimConfig:
    _reject_unknown(section, _SIM_KEYS, "sim")
    changes = {}
    if "trials" in section:
        changes["trials"] = section.getint("trials")
    if "seed" in section:
        changes["rng_seed"] = section.getint("seed")
    if "window_radius" in section and section.get("window_radius").strip():
        changes["window_radius"] = section.getfloat("window_radius")
    for key in ("mobility", "assist"):
        if key in section:
            changes[key] = section.getboolean(key)
    if "min_link_distance" in section:
        changes["min_link_distance"] = section.getfloat("min_link_distance")
    if "batch_size" in section:
        changes["batch_size"] = section.getint("batch_size")
    if "threads" in section:
        changes["threads"] = section.getint("threads")
    try:
        return SimConfig(**changes)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _build_sweep(section) -> Tuple[SweepSpec | None, Tuple[float, ...]]:
    _reject_unknown(section, _SWEEP_KEYS, "sweep")
    distances = _floats(section.get("distances", "")) if "distances" in section else ()
    if any(d <= 0 for d in distances):
        raise ConfigError("probe distances must be positive")
    if "param" not in section:
        if set(section) - {"distances"}:
            raise ConfigError("[sweep] without param cannot carry values")
        return None, distances
    param = section.get("param").strip()
    has_values = "values" in section
    has_range = any(k in section for k in ("start", "stop", "step"))
    if has_values and has_range:
        raise ConfigError("give sweep values or start/stop/step, not both")
    if has_values:
        values = _floats(section.get("values"))
    elif has_range:
        missing = [k for k in ("start", "stop", "step") if k not in section]
        if missing:
            raise ConfigError(f"sweep range needs {', '.join(missing)}")
        start = section.getfloat("start")
        stop = section.getfloat("stop")
        step = section.getfloat("step")
        if step <= 0 or stop < start:
            raise ConfigError("sweep range needs step > 0 and stop >= start")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        values = tuple(start + i * step for i in range(count))
    else:
        raise ConfigError("sweep needs values or start/stop/step")
    return SweepSpec(param, values), distances


def load_config(path: str | None = None) -> ExperimentConfig:
    """Parse an experiment configuration file; path None yields pure
    defaults. Unknown sections or keys are rejected."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    if path is not None:
        try:
            with open(path) as fh:
                cp.read_file(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from None
        except configparser.Error as exc:
            raise ConfigError(f"malformed config file {path}: {exc}") from None
    known = {"system", "sim", "sweep", "output"}
    for name in cp.sections():
        if name not in known:
            raise ConfigError(f"unknown section [{name}]")
    params = _build_params(cp["system"]) if cp.has_section("system") else SystemParams()
    sim = _build_sim(cp["sim"]) if cp.has_section("sim") else SimConfig()
    sweep, distances = (
        _build_sweep(cp["sweep"]) if cp.has_section("sweep") else (None, ())
    )
    out_path = "results"
    figures = True
    mode = None
    if cp.has_section("output"):
        section = cp["output"]
        _reject_unknown(section, _OUTPUT_KEYS, "output")
        out_path = section.get("path", out_path).strip() or out_path
        if "figures" in section:
            figures = section.getboolean("figures")
        if "mode" in section and section.get("mode").strip():
            mode = section.get("mode").strip()
    return ExperimentConfig(params, sim, sweep, distances, out_path, figures, mode)
