"""Core system model: parameters, path loss, and instantaneous SINR.

Everything downstream (closed forms, simulation, scheduling) reads from the
frozen parameter record defined here. All stored quantities are linear
(watts, meters, per square meter); decibel conversion belongs to the
configuration boundary and never leaks into the math.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace as _dc_replace
from typing import Iterable, Tuple

import numpy as np

# Published default seed for every stochastic entry point.
DEFAULT_SEED = 112358

# Reference deployment: one macro site per 500 m-radius disc on average.
_REFERENCE_CELL_AREA = math.pi * 500.0**2


def db_to_linear(value_db: float) -> float:
    return 10.0 ** (value_db / 10.0)


def linear_to_db(value: float) -> float:
    if value <= 0.0:
        raise ValueError("dB undefined for non-positive value")
    return 10.0 * math.log10(value)


def noise_power_watts(
    psd_dbm_hz: float = -174.0,
    noise_figure_db: float = 9.0,
    bandwidth_hz: float = 1e7,
) -> float:
    """Receiver noise power over the operating bandwidth, in watts.

    Thermal floor is given as a power spectral density in dBm/Hz; the noise
    figure and bandwidth fold in additively in dB before the single
    conversion to linear units.
    """
    if bandwidth_hz <= 0.0:
        raise ValueError("bandwidth must be positive")
    total_dbm = psd_dbm_hz + noise_figure_db + 10.0 * math.log10(bandwidth_hz)
    return db_to_linear(total_dbm - 30.0)


@dataclass(frozen=True)
class PathLossModel:
    """Power-law attenuation loss(r) = intercept * r ** exponent.

    The exponent must exceed 2, otherwise the far-field interference
    integrals this model feeds diverge.
    """

    intercept: float = 1.0
    exponent: float = 3.5

    def __post_init__(self) -> None:
        if not self.intercept > 0.0:
            raise ValueError("path loss intercept must be positive")
        if not self.exponent > 2.0:
            raise ValueError("path loss exponent must exceed 2")

    def loss(self, r):
        """Attenuation at distance r; accepts scalars or arrays."""
        return self.intercept * r**self.exponent

    def inverse(self, value):
        """Distance whose attenuation equals the given value."""
        return (value / self.intercept) ** (1.0 / self.exponent)


def path_loss(r: float, model: PathLossModel) -> float:
    if r < 0.0:
        raise ValueError("distance must be nonnegative")
    return model.loss(r)


def path_loss_inverse(value: float, model: PathLossModel) -> float:
    if value < 0.0:
        raise ValueError("attenuation must be nonnegative")
    return model.inverse(value)


@dataclass(frozen=True)
class SystemParams:
    """Immutable network operating point.

    Defaults reproduce the urban-macro reference deployment used by the
    bundled experiments: one BS, five multicast transmitters, and five
    hundred receivers per reference cell area, a 3.5 path loss exponent,
    a -3 dB detection threshold, 40 W downlink and 200 mW device power,
    and the thermal noise of a 10 MHz receiver with a 9 dB noise figure.
    The cluster radius and slot count are experiment-specific and default
    to 150 m and a single transmission.
    """

    lambda_b: float = 1.0 / _REFERENCE_CELL_AREA  # BS density (per m^2)
    lambda_m: float = 5.0 / _REFERENCE_CELL_AREA  # transmitter density
    lambda_r: float = 500.0 / _REFERENCE_CELL_AREA  # receiver density
    cluster_radius: float = 150.0  # multicast disc radius (m)
    detection_threshold: float = db_to_linear(-3.0)  # SINR threshold, linear
    tau_m: int = 1  # multicast transmission slots
    alpha: float = 3.5  # path loss exponent
    pathloss_intercept: float = 1.0
    p_bs: float = 40.0  # BS transmit power (W)
    p_d2d: float = 0.2  # device transmit power (W)
    noise_power: float = noise_power_watts()  # sigma^2 (W); 0 = no noise
    eta: float = 0.95  # per-cell reliability target
    budget: int = 2  # per-cell assist budget

    def __post_init__(self) -> None:
        for name in ("lambda_b", "lambda_m", "lambda_r"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")
        if not self.cluster_radius > 0.0:
            raise ValueError("cluster_radius must be positive")
        if not self.detection_threshold > 0.0:
            raise ValueError("detection_threshold must be positive")
        if not (isinstance(self.tau_m, int) and self.tau_m >= 1):
            raise ValueError("tau_m must be an integer >= 1")
        if not self.alpha > 2.0:
            raise ValueError("alpha must exceed 2")
        if not self.pathloss_intercept > 0.0:
            raise ValueError("pathloss_intercept must be positive")
        if not self.p_bs > 0.0 or not self.p_d2d > 0.0:
            raise ValueError("transmit powers must be positive")
        if self.noise_power < 0.0:
            raise ValueError("noise_power must be nonnegative")
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError("eta must lie in [0, 1]")
        if not (isinstance(self.budget, int) and self.budget >= 0):
            raise ValueError("budget must be a nonnegative integer")

    # Derived accessors; never stored separately so they cannot drift.
    def snr_inv(self) -> float:
        """Noise-to-signal ratio sigma^2 / P_d2d of the device link."""
        return self.noise_power / self.p_d2d

    def snr_c_inv(self) -> float:
        """Noise-to-signal ratio sigma^2 / P_bs of the downlink."""
        return self.noise_power / self.p_bs

    @property
    def pathloss(self) -> PathLossModel:
        return PathLossModel(self.pathloss_intercept, self.alpha)

    def mean_receivers(self) -> float:
        """Expected receiver count of one multicast cluster."""
        return self.lambda_r * math.pi * self.cluster_radius**2

    def replace(self, **changes) -> "SystemParams":
        return _dc_replace(self, **changes)


def reach_threshold(params: SystemParams) -> float:
    """Largest distance at which the mean received device SNR meets the
    detection threshold.

    Defined by loss(r) * T * snr_inv = 1; infinite when noise is zero.
    Receivers beyond this distance cannot be covered even without
    interference, which is what makes a cluster a dead one.
    """
    snr_inv = params.snr_inv()
    if snr_inv == 0.0:
        return math.inf
    return path_loss_inverse(
        1.0 / (snr_inv * params.detection_threshold), params.pathloss
    )


def sinr(
    signal_fading: float,
    signal_distance: float,
    interferers: Iterable[Tuple[float, float]],
    snr_inv: float,
    model: PathLossModel,
) -> float:
    """Instantaneous SINR of one link.

    interferers is a sequence of (fading, distance) pairs. With zero noise
    and no interferers the ratio is infinite, which the caller should treat
    as guaranteed detection.
    """
    if signal_distance <= 0.0:
        raise ValueError("signal distance must be positive")
    if signal_fading < 0.0:
        raise ValueError("fading must be nonnegative")
    if snr_inv < 0.0:
        raise ValueError("snr_inv must be nonnegative")
    denom = snr_inv
    for fading, distance in interferers:
        if distance <= 0.0:
            raise ValueError("interferer distance must be positive")
        if fading < 0.0:
            raise ValueError("fading must be nonnegative")
        denom += fading / model.loss(distance)
    numer = signal_fading / model.loss(signal_distance)
    if denom == 0.0:
        return math.inf
    return numer / denom


@dataclass(frozen=True, eq=False)
class NetworkSnapshot:
    """One sampled realization of the network.

    tx_points has the typical transmitter first, exactly at the origin.
    receivers holds one (k_i, 2) array per transmitter, every point within
    the cluster radius of its transmitter. bs_points is None when the run
    does not model the cellular layer.
    """

    tx_points: np.ndarray
    receivers: tuple
    bs_points: np.ndarray | None
    window_radius: float
