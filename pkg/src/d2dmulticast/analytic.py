"""Closed-form and quadrature engine for multicast coverage metrics.

The model: multicast transmitters form a planar Poisson field of density
lambda_m, each serving receivers of density lambda_r inside a disc of
radius cluster_radius, over Rayleigh block fading and power-law path
loss. A packet is detected when the SINR clears the threshold in at
least one of tau_m slots. Conditioning on the typical transmitter at the
origin leaves the rest of the field homogeneous Poisson, so every
quantity below reduces to one- or two-dimensional integrals.

Probabilities, expected covered counts, throughputs, the cellular
downlink layer, and the combined (assisted) delivery all live here.
Distances are meters, densities per square meter, rates in nats per
channel use.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence, Tuple

import numpy as np
from scipy import integrate, optimize
from scipy.special import erfcx

from .model import SystemParams, reach_threshold

__all__ = [
    "NumericalError",
    "CancellationWarning",
    "FlatObjectiveWarning",
    "QuadratureConfig",
    "DEFAULT_QUAD",
    "k_integral",
    "h_integral",
    "p_n_single",
    "coverage_probability",
    "bonferroni_bounds",
    "conditional_coverage",
    "conditional_ratio",
    "mean_covered",
    "mean_covered_alpha4",
    "mean_covered_asymptotic",
    "null_cluster_fraction",
    "throughput",
    "optimal_rate_asymptotic",
    "optimal_rate_general",
    "unicast_baseline",
    "mobility_variant",
    "bs_coverage_pc",
    "bs_coverage_alpha4",
    "bs_coverage_exact",
    "bs_coverage_exact_given_serving",
    "q_factor",
    "assisted_coverage",
    "assisted_mean_covered",
    "assisted_mean_covered_given_bs_distance",
    "CoverageCurve",
    "coverage_vs_threshold",
    "coverage_vs_distance",
]


class NumericalError(RuntimeError):
    """Quadrature failure, or an alternating sum too ill-conditioned to trust."""


class CancellationWarning(RuntimeWarning):
    """Alternating sum lost most of its leading digits to cancellation."""


class FlatObjectiveWarning(RuntimeWarning):
    """Objective is numerically flat around the reported optimum."""


@dataclass(frozen=True)
class QuadratureConfig:
    """Tolerances shared by every adaptive quadrature in this module."""

    abs_tol: float = 1e-10
    rel_tol: float = 1e-8
    max_subdivisions: int = 200

    def __post_init__(self) -> None:
        if self.abs_tol <= 0.0 or self.rel_tol <= 0.0:
            raise ValueError("tolerances must be positive")
        if self.max_subdivisions < 10:
            raise ValueError("max_subdivisions must be at least 10")


DEFAULT_QUAD = QuadratureConfig()

# Alternating binomial sums stay trustworthy in float64 up to this many
# slots; beyond it the partial-sum bracket takes over.
_EXACT_SUM_SLOTS = 32

# Warn when the largest term exceeds the sum by this factor.
_CANCELLATION_FACTOR = 1e6


def _quad(func, lo, hi, quad: QuadratureConfig, points=None):
    """scipy.integrate.quad with failures promoted to NumericalError."""
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            value, _ = integrate.quad(
                func,
                lo,
                hi,
                epsabs=quad.abs_tol,
                epsrel=quad.rel_tol,
                limit=quad.max_subdivisions,
                points=points,
            )
        except integrate.IntegrationWarning as exc:
            raise NumericalError(f"quadrature did not converge on [{lo}, {hi}]") from exc
    return value


# ---------------------------------------------------------------------------
# Interference geometry integrals
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def k_integral(alpha: float, n: int, quad: QuadratureConfig = DEFAULT_QUAD) -> float:
    """Interference exclusion coefficient K(alpha, n).

    K(alpha, n) = (2 pi / alpha) * Int_0^inf t^(-2/alpha - 1) (1 - (1+t)^-n) dt.

    The n-slot success probability at distance d in a field of density
    lambda decays as exp(-lambda K T^(2/alpha) d^2). The integrand has an
    integrable singularity at 0; substituting t = u^beta with
    beta = alpha / (alpha - 2) flattens it, after which the integrand is
    bounded by beta * n everywhere and decays like u^-beta.
    """
    alpha = float(alpha)
    n = int(n)
    if not alpha > 2.0:
        raise ValueError("alpha must exceed 2")
    if n < 1:
        raise ValueError("n must be a positive integer")
    beta = alpha / (alpha - 2.0)

    def integrand(u: float) -> float:
        t = u**beta
        if t == 0.0:
            return beta * n
        if math.isinf(t):
            return 0.0
        # (1 - (1+t)^-n) / t, computed without forming the tiny difference
        return beta * (-math.expm1(-n * math.log1p(t))) / t

    return (2.0 * math.pi / alpha) * _quad(integrand, 0.0, math.inf, quad)


@lru_cache(maxsize=None)
def h_integral(
    threshold: float, alpha: float, quad: QuadratureConfig = DEFAULT_QUAD
) -> float:
    """Downlink interference coefficient H(T, alpha).

    H(T, alpha) = Int_1^inf x / (1 + x^alpha / T) dx.

    Captures interference from BSs farther than the serving one, measured
    in units of the serving distance. Finite for alpha > 2, increasing in
    the threshold.
    """
    threshold = float(threshold)
    alpha = float(alpha)
    if not threshold > 0.0:
        raise ValueError("threshold must be positive")
    if not alpha > 2.0:
        raise ValueError("alpha must exceed 2")

    def integrand(x: float) -> float:
        return x / (1.0 + x**alpha / threshold)

    return _quad(integrand, 1.0, math.inf, quad)


# ---------------------------------------------------------------------------
# Alternating inclusion-exclusion sums
# ---------------------------------------------------------------------------


def _alternating_value(
    term: Callable[[int], float], tau_m: int, scale: float = 1.0
) -> float:
    """Evaluate sum_{n=1}^{tau_m} (-1)^(n+1) C(tau_m, n) term(n).

    term(n) must be the positive magnitude of the n-th summand. Up to
    _EXACT_SUM_SLOTS slots the sum is taken exactly with compensated
    summation and a cancellation check. Beyond that the binomial
    coefficients overwhelm float64, so the value is bracketed by truncated
    partial sums (odd prefixes overshoot, even ones undershoot) and the
    midpoint of the tightest bracket is returned; if even that bracket is
    wider than 1e-3 * scale the result is refused.
    """
    if tau_m <= _EXACT_SUM_SLOTS:
        signed = [
            (-1.0) ** (n + 1) * math.comb(tau_m, n) * term(n)
            for n in range(1, tau_m + 1)
        ]
        total = math.fsum(signed)
        peak = max(abs(v) for v in signed)
        if total <= 0.0:
            raise NumericalError(
                f"alternating sum fully cancelled at tau_m={tau_m}"
            )
        if peak > _CANCELLATION_FACTOR * total:
            warnings.warn(
                f"alternating sum at tau_m={tau_m} cancels by a factor "
                f"{peak / total:.2e}; fewer than 10 significant digits remain",
                CancellationWarning,
                stacklevel=3,
            )
        return total

    # Partial-sum bracket. Scan odd prefix lengths while the bracket width
    # (the magnitude of the next term) keeps shrinking.
    def signed_magnitude(n: int) -> float:
        # binomial coefficients overflow float64 near tau_m/2 for large
        # tau_m; by then the bracket has long stopped tightening
        try:
            coeff = float(math.comb(tau_m, n))
        except OverflowError:
            return math.inf
        return coeff * term(n)

    best_mid = None
    best_width = math.inf
    partial = 0.0
    prev_width = math.inf
    for n in range(1, tau_m + 1):
        magnitude = signed_magnitude(n)
        if math.isinf(magnitude) or math.isnan(magnitude):
            break
        partial += (-1.0) ** (n + 1) * magnitude
        if n % 2 == 1 and n < tau_m:
            next_mag = signed_magnitude(n + 1)
            if math.isinf(next_mag) or math.isnan(next_mag):
                break
            width = next_mag
            if width < best_width:
                best_width = width
                best_mid = partial - 0.5 * next_mag
            if width > prev_width:
                # terms started growing again; bracket only widens from here
                break
            prev_width = width
        elif n == tau_m:
            # walked the whole sum without overflow: it is exact
            return partial
    if best_mid is None or best_width > 1e-3 * scale:
        raise NumericalError(
            f"partial-sum bracket at tau_m={tau_m} has width "
            f"{best_width:.3e}, beyond tolerance {1e-3 * scale:.1e}"
        )
    warnings.warn(
        f"tau_m={tau_m} exceeds the exact-summation limit; returning the "
        f"midpoint of a partial-sum bracket of width {best_width:.3e}",
        CancellationWarning,
        stacklevel=3,
    )
    return best_mid


def _interference_coeff(
    alpha: float, n: int, mobility: bool, quad: QuadratureConfig
) -> float:
    # High mobility redraws the interferer field each slot, which turns the
    # n-slot joint coefficient K(alpha, n) into n independent single-slot
    # exclusions n * K(alpha, 1).
    if mobility:
        return n * k_integral(alpha, 1, quad)
    return k_integral(alpha, n, quad)


# ---------------------------------------------------------------------------
# Single-receiver coverage
# ---------------------------------------------------------------------------


def p_n_single(
    y_dist: float,
    n: int,
    params: SystemParams,
    mobility: bool = False,
    quad: QuadratureConfig = DEFAULT_QUAD,
) -> float:
    """Probability that a receiver at distance y_dist succeeds in all of
    the first n slots.

    Noise and interference factor into separate exponentials: the noise
    part is exp(-n T snr_inv A d^alpha), the interference part
    exp(-lambda_m K T^(2/alpha) d^2) with K depending on n and on whether
    the interferer field is static across slots.
    """
    if y_dist <= 0.0:
        raise ValueError("receiver distance must be positive")
    n = int(n)
    if n < 1:
        raise ValueError("n must be a positive integer")
    T = params.detection_threshold
    noise_exp = (
        n * T * params.snr_inv() * params.pathloss_intercept * y_dist**params.alpha
    )
    interference_exp = (
        params.lambda_m
        * _interference_coeff(params.alpha, n, mobility, quad)
        * T ** (2.0 / params.alpha)
        * y_dist**2
    )
    return math.exp(-(noise_exp + interference_exp))


def coverage_probability(
    y_dist: float,
    params: SystemParams,
    mobility: bool = False,
    quad: QuadratureConfig = DEFAULT_QUAD,
) -> float:
    """Probability that the receiver at y_dist is covered within tau_m slots.

    Inclusion-exclusion over slot subsets: the static field couples slots
    through the shared interferer geometry, so the alternating sum over
    p_n is irreducible. Under high mobility the slots decouple and the sum
    collapses to 1 - (1 - p_1)^tau_m, which is evaluated in that closed
    form to avoid the cancellation entirely.
    """
    tau = params.tau_m
    if mobility:
        p1 = p_n_single(y_dist, 1, params, mobility=False, quad=quad)
        if p1 >= 1.0:
            return 1.0
        return -math.expm1(tau * math.log1p(-p1))
    value = _alternating_value(
        lambda n: p_n_single(y_dist, n, params, mobility=False, quad=quad), tau
    )
    return min(value, 1.0)


def bonferroni_bounds(
    y_dist: float,
    params: SystemParams,
    k: int,
    quad: QuadratureConfig = DEFAULT_QUAD,
) -> Tuple[float, float]:
    """(lower, upper) truncation bounds on the tau_m-slot coverage.

    Truncating the inclusion-exclusion sum after an odd number of terms
    overshoots and after an even number undershoots, so the k-term and
    (k+1)-term prefixes bracket the true probability. k must be odd and
    at most tau_m; when the prefix exhausts the sum the bound is exact.
    """
    tau = params.tau_m
    k = int(k)
    if k < 1 or k > tau:
        raise ValueError("k must lie in [1, tau_m]")
    if k % 2 == 0:
        raise ValueError("k must be odd so the prefix overshoots")

    def prefix(m: int) -> float:
        return math.fsum(
            (-1.0) ** (n + 1)
            * math.comb(tau, n)
            * p_n_single(y_dist, n, params, quad=quad)
            for n in range(1, m + 1)
        )

    upper = prefix(k)
    lower = prefix(k + 1) if k < tau else upper
    return min(lower, 1.0), min(upper, 1.0)


# ---------------------------------------------------------------------------
# Joint coverage of two receivers of the same transmitter
# ---------------------------------------------------------------------------


def _pair_product_integral(
    d1: float,
    d2: float,
    separation: float,
    n: int,
    threshold: float,
    alpha: float,
    quad: QuadratureConfig,
    angular_order: int = 64,
) -> float:
    """Int over the plane of (1 - u1(x)) (1 - u2(x)) dx where
    u_i(x) = (1 + T d_i^alpha / |x - y_i|^alpha)^-n.

    This is the overlap of the two receivers' interference exclusion
    regions; it is what couples their success events. Polar coordinates
    centered on the first receiver, fixed-order Gauss-Legendre in angle,
    adaptive quadrature in radius split at the second receiver's distance
    (the only place the integrand has structure). The integrand decays
    like rho^(1 - 2 alpha), so the tail converges fast.
    """
    c1 = threshold * d1**alpha
    c2 = threshold * d2**alpha
    nodes, weights = np.polynomial.legendre.leggauss(angular_order)
    # map to (0, pi); the geometry is symmetric about the line joining the
    # receivers, so the angular integral is twice the half-range one
    phi = 0.5 * math.pi * (nodes + 1.0)
    wphi = 0.5 * math.pi * weights
    cos_phi = np.cos(phi)

    def one_minus_u(c: float, dist):
        dist = np.asarray(dist, dtype=float)
        out = np.ones_like(dist)
        pos = dist > 0.0
        ratio = c / dist[pos] ** alpha
        out[pos] = -np.expm1(-n * np.log1p(ratio))
        return out

    def radial_integrand(rho: float) -> float:
        if rho == 0.0:
            return 0.0
        f1 = one_minus_u(c1, np.array([rho]))[0]
        dist2 = np.sqrt(
            rho**2 + separation**2 - 2.0 * rho * separation * cos_phi
        )
        angular = 2.0 * float(np.dot(wphi, one_minus_u(c2, dist2)))
        return rho * f1 * angular

    split = max(4.0 * (separation + d1 + d2), 1.0)
    inner_points = [separation] if 0.0 < separation < split else None
    inner = _quad(radial_integrand, 0.0, split, quad, points=inner_points)
    tail = _quad(radial_integrand, split, math.inf, quad)
    return inner + tail


def _check_pair_geometry(d1: float, d2: float, separation: float) -> None:
    if d1 <= 0.0 or d2 <= 0.0:
        raise ValueError("receiver distances must be positive")
    if separation < 0.0:
        raise ValueError("separation must be nonnegative")
    # both receivers sit at fixed distances from the shared transmitter
    tol = 1e-9 * max(d1, d2, 1.0)
    if separation > d1 + d2 + tol or separation < abs(d1 - d2) - tol:
        raise ValueError(
            "no planar placement has the given pairwise distances: need "
            "|d1 - d2| <= separation <= d1 + d2"
        )


def conditional_ratio(
    d1: float,
    d2: float,
    separation: float,
    n: int,
    params: SystemParams,
    quad: QuadratureConfig = DEFAULT_QUAD,
) -> float:
    """Multiplier exp(lambda_m * J) relating conditional to marginal n-slot
    success, where J is the exclusion-overlap integral of the two
    receivers. Always at least 1: learning that the neighbor succeeded
    thins the interferer field near it, which can only help.
    """
    _check_pair_geometry(d1, d2, separation)
    n = int(n)
    if n < 1:
        raise ValueError("n must be a positive integer")
    overlap = _pair_product_integral(
        d1,
        d2,
        separation,
        n,
        params.detection_threshold,
        params.alpha,
        quad,
    )
    return math.exp(params.lambda_m * overlap)


def conditional_coverage(
    d1: float,
    d2: float,
    separation: float,
    n: int,
    params: SystemParams,
    quad: QuadratureConfig = DEFAULT_QUAD,
) -> float:
    """P(receiver 1 succeeds in all n slots | receiver 2 did), both served
    by the typical transmitter, at distances d1 and d2 from it and
    separated by the given distance.

    Noise multiplies in unconditionally; the interference exclusions of
    the two receivers overlap, and the overlap integral is exactly the
    boost over the marginal probability.
    """
    value = p_n_single(d1, n, params, quad=quad) * conditional_ratio(
        d1, d2, separation, n, params, quad=quad
    )
    return min(value, 1.0)


# ---------------------------------------------------------------------------
# Expected covered receivers
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _radial_success_integral(
    noise_coeff: float,
    interference_coeff: float,
    alpha: float,
    radius: float,
    quad: QuadratureConfig,
) -> float:
    """Int_0^R r exp(-noise_coeff r^alpha - interference_coeff r^2) dr."""

    def integrand(r: float) -> float:
        return r * math.exp(-noise_coeff * r**alpha - interference_coeff * r * r)

    return _quad(integrand, 0.0, radius, quad)


def mean_covered(
    params: SystemParams,
    mobility: bool = False,
    quad: QuadratureConfig = DEFAULT_QUAD,
) -> float:
    """Expected number of the typical transmitter's receivers covered
    within tau_m slots.

    Campbell's formula over the receiver disc: 2 pi lambda_r times the
    radial integral of the coverage probability, with the inclusion-
    exclusion sum pulled outside the integral so each term is a smooth
    positive radial integral.
    """
    T = params.detection_threshold
    alpha = params.alpha
    noise_base = T * params.snr_inv() * params.pathloss_intercept
    t_pow = T ** (2.0 / alpha)

    def term(n: int) -> float:
        return _radial_success_integral(
            n * noise_base,
            params.lambda_m * _interference_coeff(alpha, n, mobility, quad) * t_pow,
            alpha,
            params.cluster_radius,
            quad,
        )

    value = (
        2.0
        * math.pi
        * params.lambda_r
        * _alternating_value(term, params.tau_m, scale=params.cluster_radius**2 / 2.0)
    )
    return min(value, params.mean_receivers())


def mean_covered_alpha4(
    params: SystemParams, quad: QuadratureConfig = DEFAULT_QUAD
) -> float:
    """mean_covered specialised to alpha = 4, where each radial integral is
    Gaussian in r^2 and reduces to scaled complementary error functions.

    Kept as an independent route: it must agree with the quadrature form
    to float precision, and it is much cheaper inside optimisation loops.
    """
    if params.alpha != 4.0:
        raise ValueError("closed form requires alpha = 4")
    T = params.detection_threshold
    R = params.cluster_radius
    sqrt_T = math.sqrt(T)
    noise_base = T * params.snr_inv() * params.pathloss_intercept

    def term(n: int) -> float:
        c1 = n * noise_base  # r^4 coefficient
        c2 = params.lambda_m * k_integral(4.0, n, quad) * sqrt_T  # r^2 coefficient
        if c1 == 0.0:
            return -math.expm1(-c2 * R * R) / (2.0 * c2)
        # Int_0^R r exp(-c1 r^4 - c2 r^2) dr via the complement of the
        # Gaussian tail; erfcx keeps both ends exact when c2^2/c1 is large.
        root = math.sqrt(c1)
        a0 = c2 / (2.0 * root)
        a1 = root * R * R + a0
        return (
            math.sqrt(math.pi)
            / (4.0 * root)
            * (erfcx(a0) - erfcx(a1) * math.exp(-(c1 * R**4 + c2 * R * R)))
        )

    value = (
        2.0
        * math.pi
        * params.lambda_r
        * _alternating_value(term, params.tau_m, scale=R * R / 2.0)
    )
    return min(value, params.mean_receivers())


def mean_covered_asymptotic(params: SystemParams, regime: str) -> float:
    """Limiting expected covered count.

    regime "dense": no-noise, interference-limited limit where the disc
    radius drops out; scales like lambda_r / (T^(2/alpha) lambda_m).
    regime "sparse": interferer-free (lambda_m -> 0) limit where only
    noise truncates coverage; depends on the disc radius and SNR.
    """
    T = params.detection_threshold
    alpha = params.alpha
    tau = params.tau_m
    if regime == "dense":
        weight = math.fsum(
            (-1.0) ** (n + 1) * math.comb(tau, n) / k_integral(alpha, n)
            for n in range(1, tau + 1)
        )
        return math.pi * weight * params.lambda_r / (T ** (2.0 / alpha) * params.lambda_m)
    if regime == "sparse":
        noise_base = T * params.snr_inv() * params.pathloss_intercept

        def integrand(t: float) -> float:
            # t is squared distance; 1 - (1 - exp(-c t^(alpha/2)))^tau
            z = math.exp(-noise_base * t ** (alpha / 2.0))
            if z >= 1.0:
                return 1.0
            return -math.expm1(tau * math.log1p(-z))

        value = _quad(integrand, 0.0, params.cluster_radius**2, DEFAULT_QUAD)
        return math.pi * params.lambda_r * value
    raise ValueError("regime must be 'dense' or 'sparse'")


def null_cluster_fraction(params: SystemParams) -> float:
    """Fraction of clusters that cover nobody they could ever reach.

    Receivers beyond the noise-limited reach cannot be covered, so the
    effective service disc has radius min(cluster_radius, reach); a
    cluster is null when that disc holds no receivers, which for a
    Poisson field is exp(-lambda_r * pi * r_eff^2).
    """
    r_eff = min(params.cluster_radius, reach_threshold(params))
    return math.exp(-params.lambda_r * math.pi * r_eff**2)


# ---------------------------------------------------------------------------
# Throughput and rate selection
# ---------------------------------------------------------------------------


def throughput(
    params: SystemParams,
    mobility: bool = False,
    quad: QuadratureConfig = DEFAULT_QUAD,
) -> float:
    """Multicast sum throughput: covered receivers earn log(1+T) nats per
    channel use, amortised over the tau_m slots the packet occupies."""
    return (
        mean_covered(params, mobility=mobility, quad=quad)
        * math.log1p(params.detection_threshold)
        / params.tau_m
    )


def optimal_rate_asymptotic(alpha: float) -> float:
    """Threshold maximising the dense-network throughput, as the unique
    root of x / (1 + x) = (2 / alpha) log(1 + x) above alpha/2 - 1.

    In the interference-limited dense regime the covered count scales as
    T^(-2/alpha), so the objective is T^(-2/alpha) log(1+T) and the
    optimum depends on alpha alone.
    """
    alpha = float(alpha)
    if not alpha > 2.0:
        raise ValueError("alpha must exceed 2")

    def balance(x: float) -> float:
        return x / (1.0 + x) - (2.0 / alpha) * math.log1p(x)

    lo = alpha / 2.0 - 1.0
    hi = max(2.0 * lo, 1.0)
    while balance(hi) > 0.0:
        hi *= 2.0
        if hi > 1e9:
            raise NumericalError("failed to bracket the optimal-rate root")
    root = optimize.brentq(balance, lo, hi, xtol=1e-14, rtol=8.9e-16)
    if abs(balance(root)) > 1e-10:
        raise NumericalError("optimal-rate root did not converge")
    return root


def optimal_rate_general(
    params: SystemParams,
    bracket_db: Tuple[float, float] = (-20.0, 30.0),
    tol_db: float = 1e-4,
    mobility: bool = False,
    quad: QuadratureConfig = DEFAULT_QUAD,
) -> float:
    """Detection threshold (linear) maximising throughput at finite radius
    and noise.

    Coarse scan on a decibel grid to localise the peak, then golden
    section inside the bracketing cell. Warns when the objective is so
    flat near the optimum that the location is only loosely determined.
    """
    lo_db, hi_db = bracket_db
    if not hi_db > lo_db:
        raise ValueError("bracket must satisfy lo < hi")

    def objective(t_db: float) -> float:
        point = params.replace(detection_threshold=10.0 ** (t_db / 10.0))
        return throughput(point, mobility=mobility, quad=quad)

    grid = np.arange(lo_db, hi_db + 0.25, 0.5)
    values = [objective(t) for t in grid]
    best = int(np.argmax(values))
    if best in (0, len(grid) - 1):
        raise NumericalError(
            "throughput peak sits on the bracket edge; widen bracket_db"
        )
    a, b = grid[best - 1], grid[best + 1]

    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = objective(c), objective(d)
    while b - a > tol_db:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = objective(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = objective(d)
    best_db = (a + b) / 2.0
    peak = objective(best_db)
    drop = peak - max(objective(best_db - 0.5), objective(best_db + 0.5))
    if peak > 0.0 and drop < 1e-6 * peak:
        warnings.warn(
            "throughput is flat within 1e-6 over +/-0.5 dB around the optimum",
            FlatObjectiveWarning,
            stacklevel=2,
        )
    return 10.0 ** (best_db / 10.0)


def unicast_baseline(
    params: SystemParams,
    given_nonempty: bool = False,
    quad: QuadratureConfig = DEFAULT_QUAD,
) -> float:
    """Throughput of serving the same cluster by per-receiver unicast.

    The packet is repeated once per receiver, so each of the k receivers
    listens to a single dedicated slot out of k; a cluster of k receivers
    then delivers log(1+T) * mean coverage regardless of k, and averaging
    over the Poisson receiver count leaves a factor P(k >= 1). The tau_m
    unicast slots per receiver scale the rate by tau_m (each dedicated
    transmission may use all tau_m repeats).
    """
    nu = params.mean_receivers()
    mean_prob = mean_covered(params, quad=quad) / nu
    value = params.tau_m * math.log1p(params.detection_threshold) * mean_prob
    if not given_nonempty:
        value *= -math.expm1(-nu)
    return value


def mobility_variant(metric: str, *args, **kwargs):
    """(static, mobile) pair of a coverage metric.

    metric is one of 'p_n_single', 'coverage_probability', 'mean_covered';
    remaining arguments are forwarded unchanged.
    """
    table = {
        "p_n_single": p_n_single,
        "coverage_probability": coverage_probability,
        "mean_covered": mean_covered,
    }
    try:
        func = table[metric]
    except KeyError:
        raise ValueError(
            f"metric must be one of {sorted(table)}, got {metric!r}"
        ) from None
    return (
        func(*args, mobility=False, **kwargs),
        func(*args, mobility=True, **kwargs),
    )


# ---------------------------------------------------------------------------
# Cellular downlink layer
# ---------------------------------------------------------------------------


def q_factor(
    r: float, params: SystemParams, quad: QuadratureConfig = DEFAULT_QUAD
) -> float:
    """Downlink success probability conditioned on the serving BS at
    distance r: q(r) = exp(-T snr_c_inv A r^alpha - 2 pi lambda_b H r^2).

    The first factor is noise at the serving link, the second the
    interference of all BSs beyond the serving distance.
    """
    if r < 0.0:
        raise ValueError("distance must be nonnegative")
    T = params.detection_threshold
    noise_exp = T * params.snr_c_inv() * params.pathloss_intercept * r**params.alpha
    interference_exp = (
        2.0 * math.pi * params.lambda_b * h_integral(T, params.alpha, quad) * r**2
    )
    return math.exp(-(noise_exp + interference_exp))


def bs_coverage_pc(
    params: SystemParams, quad: QuadratureConfig = DEFAULT_QUAD
) -> float:
    """Downlink coverage probability of a typical user attached to its
    nearest BS: q averaged over the Rayleigh nearest-BS distance."""
    lam = params.lambda_b

    def integrand(r: float) -> float:
        return 2.0 * math.pi * lam * r * math.exp(-lam * math.pi * r * r) * q_factor(
            r, params, quad
        )

    scale = 1.0 / math.sqrt(math.pi * lam)
    inner = _quad(integrand, 0.0, 10.0 * scale, quad)
    tail = _quad(integrand, 10.0 * scale, math.inf, quad)
    return min(inner + tail, 1.0)


def bs_coverage_alpha4(
    params: SystemParams, quad: QuadratureConfig = DEFAULT_QUAD
) -> float:
    """bs_coverage_pc specialised to alpha = 4, as a single scaled
    complementary error function; the no-noise case collapses further to
    1 / (1 + 2 H(T, 4))."""
    if params.alpha != 4.0:
        raise ValueError("closed form requires alpha = 4")
    T = params.detection_threshold
    lam = params.lambda_b
    c3 = params.pathloss_intercept * T * params.snr_c_inv()  # r^4 coefficient
    c4 = 2.0 * math.pi * lam * h_integral(T, 4.0, quad) + math.pi * lam
    if c3 == 0.0:
        return math.pi * lam / c4
    root = math.sqrt(c3)
    return min(
        math.pi**1.5 * lam / (2.0 * root) * erfcx(c4 / (2.0 * root)), 1.0
    )


def _disc_exclusion_integral(
    c: float,
    disc_radius: float,
    offset: float,
    alpha: float,
    order: int = 48,
) -> float:
    """Int over the disc B(0, disc_radius) of c / (|z - y|^alpha + c) dz
    with y at distance offset from the disc center.

    Gauss-Legendre product rule; the integrand is smooth and bounded by 1.
    """
    nodes, weights = np.polynomial.legendre.leggauss(order)
    r = 0.5 * disc_radius * (nodes + 1.0)
    wr = 0.5 * disc_radius * weights
    phi = 0.5 * math.pi * (nodes + 1.0)
    wphi = 0.5 * math.pi * weights
    rr, pp = np.meshgrid(r, phi, indexing="ij")
    dist_sq = rr**2 + offset**2 - 2.0 * rr * offset * np.cos(pp)
    vals = c / (dist_sq ** (alpha / 2.0) + c)
    # symmetric in the angle, so double the half-range integral
    return 2.0 * float(np.einsum("i,j,ij->", wr * r, wphi, vals))


def bs_coverage_exact_given_serving(
    user_offset: Sequence[float],
    serving_pos: Sequence[float],
    params: SystemParams,
) -> float:
    """Downlink success probability of a user at user_offset (relative to
    the cluster transmitter) served by the BS at serving_pos, averaging
    over the interfering BS field outside the serving disc.

    The serving BS is the one nearest the transmitter, so no interferer
    lies inside the disc of radius |serving_pos| around the transmitter;
    the full-plane exclusion integral minus the integral over that disc
    is the exact conditional exponent.
    """
    user = np.asarray(user_offset, dtype=float)
    serving = np.asarray(serving_pos, dtype=float)
    T = params.detection_threshold
    alpha = params.alpha
    d_signal = float(np.hypot(*(serving - user)))
    if d_signal <= 0.0:
        raise ValueError("user cannot sit on the serving BS")
    c = T * d_signal**alpha
    noise_exp = T * params.snr_c_inv() * params.pathloss_intercept * d_signal**alpha
    plane = k_integral(alpha, 1) * T ** (2.0 / alpha) * d_signal**2
    hole = _disc_exclusion_integral(
        c, float(np.hypot(*serving)), float(np.hypot(*user)), alpha
    )
    return math.exp(-noise_exp - params.lambda_b * (plane - hole))


def bs_coverage_exact(
    user_offset: Sequence[float],
    params: SystemParams,
    samples: int = 2000,
    seed: int = 0,
) -> Tuple[float, float]:
    """Downlink coverage of a user displaced from the cluster transmitter,
    with the serving BS chosen nearest to the transmitter rather than to
    the user.

    Only the serving distance needs sampling (Rayleigh) and the rest is
    exact, so a few thousand draws give four digits. Returns (value,
    standard error).
    """
    if samples < 2:
        raise ValueError("need at least two samples")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    lam_pi = params.lambda_b * math.pi
    radii = np.sqrt(rng.exponential(scale=1.0 / lam_pi, size=samples))
    angles = rng.uniform(0.0, 2.0 * math.pi, size=samples)
    vals = np.empty(samples)
    for i in range(samples):
        serving = (
            radii[i] * math.cos(angles[i]),
            radii[i] * math.sin(angles[i]),
        )
        vals[i] = bs_coverage_exact_given_serving(user_offset, serving, params)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(samples))


# ---------------------------------------------------------------------------
# Network-assisted delivery
# ---------------------------------------------------------------------------


def assisted_coverage(
    y_dist: float,
    params: SystemParams,
    mobility: bool = False,
    quad: QuadratureConfig = DEFAULT_QUAD,
) -> float:
    """Coverage when the BS retransmits the packet on the downlink: the
    receiver fails only if both routes fail, and the downlink success is
    taken independent with probability bs_coverage_pc."""
    p = coverage_probability(y_dist, params, mobility=mobility, quad=quad)
    pc = bs_coverage_pc(params, quad=quad)
    return p + pc * (1.0 - p)


def assisted_mean_covered(
    params: SystemParams,
    mobility: bool = False,
    quad: QuadratureConfig = DEFAULT_QUAD,
) -> float:
    """Expected covered receivers with downlink assistance: the assist
    lifts every uncovered receiver independently with probability
    bs_coverage_pc."""
    base = mean_covered(params, mobility=mobility, quad=quad)
    pc = bs_coverage_pc(params, quad=quad)
    return base + pc * (params.mean_receivers() - base)


def assisted_mean_covered_given_bs_distance(
    params: SystemParams,
    bs_distance: float,
    mobility: bool = False,
    quad: QuadratureConfig = DEFAULT_QUAD,
) -> float:
    """assisted_mean_covered conditioned on the serving BS sitting at the
    given distance from the cluster transmitter; the downlink success is
    then q_factor(bs_distance) instead of its Rayleigh average."""
    base = mean_covered(params, mobility=mobility, quad=quad)
    q = q_factor(bs_distance, params, quad=quad)
    return base + q * (params.mean_receivers() - base)


# ---------------------------------------------------------------------------
# Curves
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CoverageCurve:
    """A coverage probability sampled along one swept axis."""

    swept: str
    abscissas: tuple
    values: tuple
    params: SystemParams

    def __post_init__(self) -> None:
        if len(self.abscissas) != len(self.values):
            raise ValueError("abscissas and values must align")
        diffs = np.diff(np.asarray(self.abscissas, dtype=float))
        if len(diffs) and not np.all(diffs > 0.0):
            raise ValueError("abscissas must be strictly increasing")
        vals = np.asarray(self.values, dtype=float)
        if len(vals) and (np.any(vals < 0.0) or np.any(vals > 1.0 + 1e-12)):
            raise ValueError("coverage values must lie in [0, 1]")


def coverage_vs_threshold(
    params: SystemParams,
    thresholds: Sequence[float],
    y_dist: float,
    mobility: bool = False,
) -> CoverageCurve:
    values = tuple(
        coverage_probability(
            y_dist, params.replace(detection_threshold=float(t)), mobility=mobility
        )
        for t in thresholds
    )
    return CoverageCurve(
        "detection_threshold", tuple(float(t) for t in thresholds), values, params
    )


def coverage_vs_distance(
    params: SystemParams,
    distances: Sequence[float],
    mobility: bool = False,
) -> CoverageCurve:
    values = tuple(
        coverage_probability(float(d), params, mobility=mobility) for d in distances
    )
    return CoverageCurve(
        "distance", tuple(float(d) for d in distances), values, params
    )
