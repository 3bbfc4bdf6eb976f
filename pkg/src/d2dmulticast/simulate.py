"""Monte Carlo estimators for the multicast model.

Every estimator conditions on the typical transmitter at the origin and
samples the remaining transmitters as a homogeneous Poisson field inside
a finite window, which is valid because adding the conditioned point
does not disturb the law of the rest of the field.

Two implementation choices matter for accuracy and reproducibility:

* Truncation debiasing. The mean interference of the field beyond the
  window is added to every SINR denominator as a deterministic term. The
  remainder the window actually discards then has negligible variance,
  so estimates are insensitive to window growth beyond the default.
* Counter-based substreams. Every (estimator, stream, block) triple owns
  an independent Philox substream, and blocks are reduced in index
  order, so results are bit-identical for a given seed regardless of
  batch scheduling or thread count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Tuple

import numpy as np

from .model import DEFAULT_SEED, NetworkSnapshot, SystemParams, reach_threshold

__all__ = [
    "SimConfig",
    "CoverageEstimate",
    "JointCoverageEstimate",
    "resolve_window",
    "estimate_coverage",
    "estimate_slot_run_coverage",
    "estimate_mean_covered",
    "estimate_joint_coverage",
    "estimate_null_fraction",
    "sample_snapshot",
]

# Substream family tags; estimators must never share one.
_KIND_PROBE = 1
_KIND_RUN = 2
_KIND_MEAN = 3
_KIND_JOINT = 4
_KIND_NULL = 5
_KIND_SNAPSHOT = 6


@dataclass(frozen=True)
class SimConfig:
    """Knobs of a simulation run; the physics lives in SystemParams."""

    trials: int = 10_000
    rng_seed: int = DEFAULT_SEED
    window_radius: float | None = None  # None -> auto-sized per field
    mobility: bool = False  # redraw interferer field every slot
    assist: bool = False  # model the BS layer and downlink retransmission
    min_link_distance: float = 1.0  # receivers resampled closer than this
    batch_size: int = 1024
    threads: int = 1

    def __post_init__(self) -> None:
        if not (isinstance(self.trials, int) and self.trials >= 1):
            raise ValueError("trials must be a positive integer")
        if self.window_radius is not None and not self.window_radius > 0.0:
            raise ValueError("window_radius must be positive")
        if self.min_link_distance < 0.0:
            raise ValueError("min_link_distance must be nonnegative")
        if not (isinstance(self.batch_size, int) and self.batch_size >= 1):
            raise ValueError("batch_size must be a positive integer")
        if not (isinstance(self.threads, int) and self.threads >= 1):
            raise ValueError("threads must be a positive integer")


@dataclass(frozen=True)
class CoverageEstimate:
    """Point estimate with its standard error."""

    value: float
    stderr: float
    trials: int

    @property
    def half_width(self) -> float:
        # 95% normal interval
        return 1.96 * self.stderr

    def interval(self) -> Tuple[float, float]:
        return self.value - self.half_width, self.value + self.half_width


@dataclass(frozen=True)
class JointCoverageEstimate:
    """Joint and marginal success of two receivers, plus the conditional
    P(first | second) estimated on the trials where the second succeeded."""

    joint: CoverageEstimate
    marginal_1: CoverageEstimate
    marginal_2: CoverageEstimate
    conditional: CoverageEstimate


def resolve_window(
    params: SystemParams, config: SimConfig
) -> Tuple[float, float | None]:
    """(d2d_window, bs_window) radii in meters; bs_window is None when the
    run has no BS layer.

    Auto-sizing leaves a margin of ten mean nearest-neighbor spacings
    around the farthest point of interest; explicit radii below half that
    margin are refused rather than silently biased.
    """
    d2d_auto = max(
        10.0 / math.sqrt(math.pi * params.lambda_m), 4.0 * params.cluster_radius
    )
    bs_auto = max(
        10.0 / math.sqrt(math.pi * params.lambda_b), 2.0 * params.cluster_radius
    )
    if config.window_radius is None:
        return d2d_auto, bs_auto if config.assist else None
    w = config.window_radius
    floor = max(
        5.0 / math.sqrt(math.pi * params.lambda_m), 2.0 * params.cluster_radius
    )
    if config.assist:
        floor = max(floor, 5.0 / math.sqrt(math.pi * params.lambda_b))
    if w < floor:
        raise ValueError(
            f"window_radius {w:g} m is below the safe floor {floor:g} m "
            "for the configured densities"
        )
    return w, w if config.assist else None


def _tail_mean(density: float, window: float, params: SystemParams) -> float:
    """Mean aggregate interference-to-gain of the field beyond the window."""
    alpha = params.alpha
    return (
        density
        * 2.0
        * math.pi
        * window ** (2.0 - alpha)
        / (params.pathloss_intercept * (alpha - 2.0))
    )


def _stream(seed: int, kind: int, stream: int, block: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(kind, stream, block))
    return np.random.Generator(np.random.Philox(ss))


def _run_blocks(config: SimConfig, worker: Callable[[int, int], tuple]) -> List[tuple]:
    sizes = []
    remaining = config.trials
    while remaining > 0:
        sizes.append(min(config.batch_size, remaining))
        remaining -= sizes[-1]
    blocks = list(enumerate(sizes))
    if config.threads <= 1:
        return [worker(i, s) for i, s in blocks]
    with ThreadPoolExecutor(max_workers=config.threads) as pool:
        return list(pool.map(lambda pair: worker(*pair), blocks))


def _draw_disc(
    rng: np.random.Generator, n: int, radius: float, min_radius: float = 0.0
) -> np.ndarray:
    """n points uniform on the disc, as an (n, 2) array; points closer to
    the center than min_radius are resampled."""
    r = radius * np.sqrt(rng.random(n))
    if min_radius > 0.0:
        if min_radius >= radius:
            raise ValueError("min_radius must be below the disc radius")
        bad = r < min_radius
        while bad.any():
            r[bad] = radius * np.sqrt(rng.random(int(bad.sum())))
            bad = r < min_radius
    theta = rng.uniform(0.0, 2.0 * math.pi, n)
    return np.column_stack((r * np.cos(theta), r * np.sin(theta)))


def _gains_to(points: np.ndarray, target: np.ndarray, params: SystemParams):
    """Path gain 1 / loss(|point - target|) for an (n, 2) point array."""
    delta = points - target
    dist_sq = delta[:, 0] ** 2 + delta[:, 1] ** 2
    with np.errstate(divide="ignore"):
        return 1.0 / (
            params.pathloss_intercept * dist_sq ** (params.alpha / 2.0)
        )


def _binomial_estimate(successes: int, trials: int) -> CoverageEstimate:
    p = successes / trials
    stderr = math.sqrt(p * (1.0 - p) / trials)
    return CoverageEstimate(p, stderr, trials)


def _serving_indices(bs_idx: np.ndarray, dist_sq: np.ndarray, size: int) -> np.ndarray:
    """Index of the nearest BS per trial, -1 where the trial drew none."""
    serve = np.full(size, -1, dtype=np.int64)
    pos = 0
    counts = np.bincount(bs_idx, minlength=size).astype(np.int64)
    for t in range(size):
        c = int(counts[t])
        if c:
            serve[t] = pos + int(np.argmin(dist_sq[pos : pos + c]))
        pos += c
    return serve


def _probe_estimate(
    y_dist: float,
    n_slots: int,
    any_slot: bool,
    params: SystemParams,
    config: SimConfig,
    stream: int,
    kind: int,
    with_assist: bool,
) -> CoverageEstimate:
    """Shared engine: success of a fixed probe receiver at distance y_dist
    over n_slots slots, reduced by OR (any_slot) or AND across slots,
    optionally followed by a downlink retransmission attempt."""
    if y_dist <= 0.0:
        raise ValueError("probe distance must be positive")
    if n_slots < 1:
        raise ValueError("slot count must be positive")
    w_d2d, w_bs = resolve_window(params, config)
    probe = np.array([y_dist, 0.0])
    T = params.detection_threshold
    snr_inv = params.snr_inv()
    snr_c_inv = params.snr_c_inv()
    mu_i = params.lambda_m * math.pi * w_d2d**2
    tail_i = _tail_mean(params.lambda_m, w_d2d, params)
    sig_gain = 1.0 / params.pathloss.loss(y_dist)
    if with_assist:
        mu_b = params.lambda_b * math.pi * w_bs**2
        tail_b = _tail_mean(params.lambda_b, w_bs, params)

    def worker(block: int, size: int) -> tuple:
        rng = _stream(config.rng_seed, kind, stream, block)
        counts = rng.poisson(mu_i, size)
        idx = np.repeat(np.arange(size), counts)
        pts = _draw_disc(rng, int(counts.sum()), w_d2d)
        gains = _gains_to(pts, probe, params)
        agg = np.zeros(size, dtype=bool) if any_slot else np.ones(size, dtype=bool)
        for slot in range(n_slots):
            if slot > 0 and config.mobility:
                counts = rng.poisson(mu_i, size)
                idx = np.repeat(np.arange(size), counts)
                pts = _draw_disc(rng, int(counts.sum()), w_d2d)
                gains = _gains_to(pts, probe, params)
            fad = rng.standard_exponential(len(idx))
            interf = np.bincount(idx, fad * gains, minlength=size) + tail_i
            fad_sig = rng.standard_exponential(size)
            ok = fad_sig * sig_gain >= T * (snr_inv + interf)
            agg = (agg | ok) if any_slot else (agg & ok)
        if with_assist:
            bs_counts = rng.poisson(mu_b, size)
            bs_idx = np.repeat(np.arange(size), bs_counts)
            bs_pts = _draw_disc(rng, int(bs_counts.sum()), w_bs)
            bs_d2 = bs_pts[:, 0] ** 2 + bs_pts[:, 1] ** 2
            serve = _serving_indices(bs_idx, bs_d2, size)
            bs_gains = _gains_to(bs_pts, probe, params)
            fad_b = rng.standard_exponential(len(bs_idx))
            contrib = fad_b * bs_gains
            totals = np.bincount(bs_idx, contrib, minlength=size) + tail_b
            has_bs = serve >= 0
            safe = np.where(has_bs, serve, 0)
            signal = np.where(has_bs, contrib[safe], 0.0)
            interf_dl = totals - signal
            dl_ok = has_bs & (signal >= T * (snr_c_inv + interf_dl))
            agg |= dl_ok
        return (int(agg.sum()),)

    total = sum(r[0] for r in _run_blocks(config, worker))
    return _binomial_estimate(total, config.trials)


def estimate_coverage(
    y_dist: float, params: SystemParams, config: SimConfig, stream: int = 0
) -> CoverageEstimate:
    """Empirical probability that a receiver at y_dist clears the threshold
    in at least one of tau_m slots; with config.assist the downlink
    retransmission counts as one more chance."""
    return _probe_estimate(
        y_dist,
        params.tau_m,
        True,
        params,
        config,
        stream,
        _KIND_PROBE,
        config.assist,
    )


def estimate_slot_run_coverage(
    y_dist: float,
    n_slots: int,
    params: SystemParams,
    config: SimConfig,
    stream: int = 0,
) -> CoverageEstimate:
    """Empirical probability that a receiver at y_dist clears the threshold
    in every one of n_slots consecutive slots (the device link only; the
    BS layer is ignored here)."""
    return _probe_estimate(
        y_dist, int(n_slots), False, params, config, stream, _KIND_RUN, False
    )


def estimate_mean_covered(
    params: SystemParams, config: SimConfig, stream: int = 0
) -> CoverageEstimate:
    """Empirical mean number of the typical transmitter's receivers covered
    within tau_m slots, with config.assist adding one downlink
    retransmission from the BS nearest the transmitter."""
    if config.min_link_distance >= params.cluster_radius:
        raise ValueError("min_link_distance must be below the cluster radius")
    w_d2d, w_bs = resolve_window(params, config)
    T = params.detection_threshold
    alpha = params.alpha
    snr_inv = params.snr_inv()
    snr_c_inv = params.snr_c_inv()
    nu_r = params.mean_receivers()
    mu_i = params.lambda_m * math.pi * w_d2d**2
    tail_i = _tail_mean(params.lambda_m, w_d2d, params)
    if config.assist:
        mu_b = params.lambda_b * math.pi * w_bs**2
        tail_b = _tail_mean(params.lambda_b, w_bs, params)

    def worker(block: int, size: int) -> tuple:
        rng = _stream(config.rng_seed, _KIND_MEAN, stream, block)
        total = 0.0
        total_sq = 0.0
        for _ in range(size):
            n_r = int(rng.poisson(nu_r))
            if n_r == 0:
                continue
            rcv = _draw_disc(
                rng, n_r, params.cluster_radius, config.min_link_distance
            )
            rcv_dist = np.hypot(rcv[:, 0], rcv[:, 1])
            sig_gain = 1.0 / params.pathloss.loss(rcv_dist)
            n_i = int(rng.poisson(mu_i))
            ipts = _draw_disc(rng, n_i, w_d2d)
            covered = np.zeros(n_r, dtype=bool)
            gains = None
            for slot in range(params.tau_m):
                if slot > 0 and config.mobility:
                    n_i = int(rng.poisson(mu_i))
                    ipts = _draw_disc(rng, n_i, w_d2d)
                    gains = None
                if gains is None:
                    delta = rcv[:, None, :] - ipts[None, :, :]
                    dist_sq = delta[..., 0] ** 2 + delta[..., 1] ** 2
                    with np.errstate(divide="ignore"):
                        gains = 1.0 / (
                            params.pathloss_intercept * dist_sq ** (alpha / 2.0)
                        )
                fad = rng.standard_exponential((n_r, n_i))
                interf = (fad * gains).sum(axis=1) + tail_i
                fad_sig = rng.standard_exponential(n_r)
                covered |= fad_sig * sig_gain >= T * (snr_inv + interf)
            if config.assist:
                n_b = int(rng.poisson(mu_b))
                if n_b:
                    bpts = _draw_disc(rng, n_b, w_bs)
                    serve = int(np.argmin(bpts[:, 0] ** 2 + bpts[:, 1] ** 2))
                    delta = rcv[:, None, :] - bpts[None, :, :]
                    dist_sq = delta[..., 0] ** 2 + delta[..., 1] ** 2
                    with np.errstate(divide="ignore"):
                        bgains = 1.0 / (
                            params.pathloss_intercept * dist_sq ** (alpha / 2.0)
                        )
                    fad_b = rng.standard_exponential((n_r, n_b))
                    contrib = fad_b * bgains
                    signal = contrib[:, serve]
                    interf_dl = contrib.sum(axis=1) - signal + tail_b
                    covered |= signal >= T * (snr_c_inv + interf_dl)
            c = float(covered.sum())
            total += c
            total_sq += c * c
        return total, total_sq

    results = _run_blocks(config, worker)
    n = config.trials
    total = math.fsum(r[0] for r in results)
    total_sq = math.fsum(r[1] for r in results)
    mean = total / n
    if n > 1:
        var = max(total_sq - n * mean * mean, 0.0) / (n - 1)
    else:
        var = 0.0
    return CoverageEstimate(mean, math.sqrt(var / n), n)


def estimate_joint_coverage(
    d1: float,
    d2: float,
    separation: float,
    n_slots: int,
    params: SystemParams,
    config: SimConfig,
    stream: int = 0,
) -> JointCoverageEstimate:
    """Joint n-slot success of two receivers of the typical transmitter at
    distances d1 and d2, separated by the given distance.

    The two receivers see the same interferer positions but independent
    fading coefficients. The conditional estimate P(first | second) is the
    success frequency of the first within the trials where the second
    succeeded.
    """
    if d1 <= 0.0 or d2 <= 0.0:
        raise ValueError("receiver distances must be positive")
    tol = 1e-9 * max(d1, d2, 1.0)
    if separation > d1 + d2 + tol or separation < abs(d1 - d2) - tol:
        raise ValueError(
            "no planar placement has the given pairwise distances: need "
            "|d1 - d2| <= separation <= d1 + d2"
        )
    if n_slots < 1:
        raise ValueError("slot count must be positive")
    w_d2d, _ = resolve_window(params, config)
    # place the second receiver on the axis; the first follows from the
    # triangle (d1, d2, separation)
    x1 = (d1**2 + d2**2 - separation**2) / (2.0 * d2)
    y1 = np.array([x1, math.sqrt(max(d1**2 - x1**2, 0.0))])
    y2 = np.array([d2, 0.0])
    T = params.detection_threshold
    snr_inv = params.snr_inv()
    mu_i = params.lambda_m * math.pi * w_d2d**2
    tail_i = _tail_mean(params.lambda_m, w_d2d, params)
    sig_1 = 1.0 / params.pathloss.loss(d1)
    sig_2 = 1.0 / params.pathloss.loss(d2)

    def worker(block: int, size: int) -> tuple:
        rng = _stream(config.rng_seed, _KIND_JOINT, stream, block)
        counts = rng.poisson(mu_i, size)
        idx = np.repeat(np.arange(size), counts)
        pts = _draw_disc(rng, int(counts.sum()), w_d2d)
        g1 = _gains_to(pts, y1, params)
        g2 = _gains_to(pts, y2, params)
        ok1 = np.ones(size, dtype=bool)
        ok2 = np.ones(size, dtype=bool)
        for slot in range(n_slots):
            if slot > 0 and config.mobility:
                counts = rng.poisson(mu_i, size)
                idx = np.repeat(np.arange(size), counts)
                pts = _draw_disc(rng, int(counts.sum()), w_d2d)
                g1 = _gains_to(pts, y1, params)
                g2 = _gains_to(pts, y2, params)
            fad_1 = rng.standard_exponential(len(idx))
            fad_2 = rng.standard_exponential(len(idx))
            i1 = np.bincount(idx, fad_1 * g1, minlength=size) + tail_i
            i2 = np.bincount(idx, fad_2 * g2, minlength=size) + tail_i
            ok1 &= rng.standard_exponential(size) * sig_1 >= T * (snr_inv + i1)
            ok2 &= rng.standard_exponential(size) * sig_2 >= T * (snr_inv + i2)
        return int((ok1 & ok2).sum()), int(ok1.sum()), int(ok2.sum())

    results = _run_blocks(config, worker)
    n = config.trials
    joint = sum(r[0] for r in results)
    m1 = sum(r[1] for r in results)
    m2 = sum(r[2] for r in results)
    if m2 > 0:
        c = joint / m2
        conditional = CoverageEstimate(c, math.sqrt(c * (1.0 - c) / m2), m2)
    else:
        conditional = CoverageEstimate(math.nan, math.nan, 0)
    return JointCoverageEstimate(
        _binomial_estimate(joint, n),
        _binomial_estimate(m1, n),
        _binomial_estimate(m2, n),
        conditional,
    )


def estimate_null_fraction(
    params: SystemParams, config: SimConfig, stream: int = 0
) -> CoverageEstimate:
    """Empirical fraction of clusters with no receiver inside the effective
    service disc min(cluster_radius, noise-limited reach)."""
    r_eff = min(params.cluster_radius, reach_threshold(params))
    nu_r = params.mean_receivers()

    def worker(block: int, size: int) -> tuple:
        rng = _stream(config.rng_seed, _KIND_NULL, stream, block)
        counts = rng.poisson(nu_r, size)
        idx = np.repeat(np.arange(size), counts)
        pts = _draw_disc(
            rng, int(counts.sum()), params.cluster_radius, config.min_link_distance
        )
        radii = np.hypot(pts[:, 0], pts[:, 1])
        near = np.bincount(idx, (radii < r_eff).astype(float), minlength=size)
        return (int((near == 0.0).sum()),)

    total = sum(r[0] for r in _run_blocks(config, worker))
    return _binomial_estimate(total, config.trials)


def sample_snapshot(
    params: SystemParams, config: SimConfig, stream: int = 0, block: int = 0
) -> NetworkSnapshot:
    """One full realization: transmitters (typical one first, at the
    origin), each transmitter's receivers, and the BS field when the
    config models assistance."""
    if config.min_link_distance >= params.cluster_radius:
        raise ValueError("min_link_distance must be below the cluster radius")
    rng = _stream(config.rng_seed, _KIND_SNAPSHOT, stream, block)
    w_d2d, w_bs = resolve_window(params, config)
    n_extra = int(rng.poisson(params.lambda_m * math.pi * w_d2d**2))
    tx = np.vstack([np.zeros((1, 2)), _draw_disc(rng, n_extra, w_d2d)])
    receivers = []
    nu_r = params.mean_receivers()
    for i in range(len(tx)):
        k = int(rng.poisson(nu_r))
        cluster = _draw_disc(
            rng, k, params.cluster_radius, config.min_link_distance
        )
        receivers.append(cluster + tx[i])
    bs_points = None
    if config.assist:
        n_bs = int(rng.poisson(params.lambda_b * math.pi * w_bs**2))
        bs_points = _draw_disc(rng, n_bs, w_bs)
    return NetworkSnapshot(tx, tuple(receivers), bs_points, w_d2d)
