"""Network-assisted multicast scheduling.

A cell is one BS and the multicast transmitters it serves, each known
only by its BS distance. The operator picks the common slot count tau_m
and a per-transmitter assist bit (the BS retransmits that cluster's
packet on the downlink). Feasibility means the cell-average expected
covered fraction clears the reliability target eta while assists stay
within the per-cell budget; the objective is the smallest feasible
tau_m, since slots are the scarce resource.

Two structural facts carry the solver. The expected covered fraction is
nondecreasing in tau_m, so the minimal feasible tau_m is found by
bracket-and-bisect. And the assist benefit q(r) decays with BS distance,
so for a fixed assist count the best vectors assist the nearest
transmitters first; only prefix vectors ever need checking.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, List, Sequence, Tuple

import numpy as np

from .analytic import NumericalError, QuadratureConfig, DEFAULT_QUAD, _quad, mean_covered, q_factor
from .model import DEFAULT_SEED, SystemParams
from .simulate import _draw_disc

__all__ = [
    "CellInstance",
    "AssistSolution",
    "PolicyHistogram",
    "RelaxedEvaluation",
    "InfeasibleAtCapError",
    "h_value",
    "check_feasible",
    "solve_cell",
    "solve_cell_exhaustive",
    "find_tau_max",
    "evaluate_relaxed",
    "min_feasible_tau_relaxed",
    "aggregate_policy",
    "write_cells",
    "read_cells",
]


class InfeasibleAtCapError(RuntimeError):
    """No feasible slot count at or below the cap.

    Carries the cap actually probed and the best achieved reliability
    there (under full-budget assistance), so callers can report how far
    short the cell falls.
    """

    def __init__(self, tau_probed: int, best_achieved: float):
        super().__init__(
            f"target unreachable: best achieved reliability "
            f"{best_achieved:.6f} at tau_m={tau_probed} with full assistance"
        )
        self.tau_probed = tau_probed
        self.best_achieved = best_achieved


@dataclass(frozen=True)
class CellInstance:
    """One cell of the scheduling problem.

    distances are the BS-to-transmitter distances in meters, sorted
    ascending; budget and eta may differ from the params defaults (the
    params field carries the physics only).
    """

    distances: Tuple[float, ...]
    budget: int
    eta: float
    params: SystemParams

    def __post_init__(self) -> None:
        if any(r < 0.0 for r in self.distances):
            raise ValueError("distances must be nonnegative")
        if any(
            a > b for a, b in zip(self.distances, self.distances[1:])
        ):
            raise ValueError("distances must be sorted ascending")
        if not (isinstance(self.budget, int) and self.budget >= 0):
            raise ValueError("budget must be a nonnegative integer")
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError("eta must lie in [0, 1]")

    @classmethod
    def from_distances(
        cls,
        distances: Iterable[float],
        params: SystemParams,
        budget: int | None = None,
        eta: float | None = None,
    ) -> "CellInstance":
        return cls(
            tuple(sorted(float(r) for r in distances)),
            params.budget if budget is None else budget,
            params.eta if eta is None else eta,
            params,
        )


@dataclass(frozen=True)
class AssistSolution:
    """Output of the per-cell solver: the minimal feasible slot count, the
    assist bits aligned with the cell's distance order, and the cell
    reliability actually achieved."""

    tau_star: int
    assist: Tuple[int, ...]
    achieved: float


@dataclass(frozen=True)
class PolicyHistogram:
    """Empirical assistance policy versus BS distance.

    edges holds len(frequencies) + 1 bin edges, the last possibly
    infinite; frequencies is the assisted fraction per bin with NaN where
    the bin saw no transmitters; counts are the observations per bin;
    tau_bar averages the per-cell minimal slot counts over nonempty
    cells.
    """

    edges: Tuple[float, ...]
    frequencies: Tuple[float, ...]
    counts: Tuple[int, ...]
    tau_bar: float

    def __post_init__(self) -> None:
        if len(self.edges) != len(self.frequencies) + 1:
            raise ValueError("need one more edge than bins")
        if len(self.counts) != len(self.frequencies):
            raise ValueError("counts must align with frequencies")
        diffs = np.diff(np.asarray(self.edges, dtype=float))
        if not np.all(diffs > 0.0):
            raise ValueError("edges must be strictly increasing")
        for f in self.frequencies:
            if not (math.isnan(f) or 0.0 <= f <= 1.0):
                raise ValueError("frequencies must lie in [0, 1] or be NaN")
        if any(c < 0 for c in self.counts):
            raise ValueError("counts must be nonnegative")


@dataclass(frozen=True)
class RelaxedEvaluation:
    """Population-level audit of a distance-based assist policy."""

    reliability: float  # expected covered fraction under the policy
    resource: float  # expected assisted clusters per cluster
    resource_cap: float  # budget * lambda_b / lambda_m
    eta: float

    @property
    def feasible(self) -> bool:
        return (
            self.reliability >= self.eta
            and self.resource <= self.resource_cap * (1.0 + 1e-12)
        )


@lru_cache(maxsize=None)
def _mean_covered_at(params: SystemParams, tau_m: int) -> float:
    return mean_covered(params.replace(tau_m=tau_m))


def h_value(r: float, tau_m: int, g: float, params: SystemParams) -> float:
    """Expected covered receivers of one cluster whose serving BS sits r
    meters away: the unassisted mean, lifted toward the cluster size by
    the downlink success q(r) when assisted. g may be fractional for
    relaxed (population-average) policies."""
    if not 0.0 <= g <= 1.0:
        raise ValueError("assist indicator must lie in [0, 1]")
    base = _mean_covered_at(params, int(tau_m))
    if g == 0.0:
        return base
    return base + g * q_factor(r, params) * (params.mean_receivers() - base)


def check_feasible(
    cell: CellInstance, tau_m: int, assist: Sequence[int]
) -> Tuple[bool, float]:
    """Whether the assist vector meets the cell's reliability target at the
    given slot count within budget; also returns the achieved cell-average
    covered fraction (an empty cell achieves 1 by convention)."""
    assist = tuple(int(g) for g in assist)
    if len(assist) != len(cell.distances):
        raise ValueError("assist vector must align with the distance list")
    if any(g not in (0, 1) for g in assist):
        raise ValueError("assist entries must be 0 or 1")
    used = sum(assist)
    if not cell.distances:
        return used <= cell.budget, 1.0
    total = math.fsum(
        h_value(r, tau_m, g, cell.params)
        for r, g in zip(cell.distances, assist)
    )
    achieved = total / (len(cell.distances) * cell.params.mean_receivers())
    return used <= cell.budget and achieved >= cell.eta, achieved


def _min_prefix_assists(
    cell: CellInstance, tau_m: int, q_values: Sequence[float]
) -> int | None:
    """Fewest assists meeting the target at tau_m, assisting nearest
    transmitters first; None when even the full budget falls short or the
    covered mean is not evaluable at this slot count."""
    try:
        base = _mean_covered_at(cell.params, tau_m)
    except NumericalError:
        return None
    m = len(cell.distances)
    nmax = cell.params.mean_receivers()
    lift = nmax - base
    target = cell.eta * m * nmax
    k_cap = min(m, cell.budget)
    acc = m * base
    for k in range(k_cap + 1):
        if acc >= target:
            return k
        if k < k_cap:
            acc += q_values[k] * lift
    return None


def find_tau_max(cell: CellInstance, tau_cap: int = 1024) -> int:
    """A slot count at which the cell is feasible, found by doubling from 1
    on the no-assist condition; before declaring the cell unreachable the
    full budget is tried at the largest evaluable slot count."""
    if not cell.distances:
        return 1
    nmax = cell.params.mean_receivers()
    tau = 1
    last_evaluable = None
    while True:
        try:
            ok = _mean_covered_at(cell.params, tau) >= cell.eta * nmax
        except NumericalError:
            ok = None
        if ok is not None:
            last_evaluable = tau
            if ok:
                return tau
        if tau >= tau_cap or ok is None:
            break
        tau = min(2 * tau, tau_cap)
    probe = last_evaluable if last_evaluable is not None else 1
    full = tuple(
        1 if i < min(cell.budget, len(cell.distances)) else 0
        for i in range(len(cell.distances))
    )
    feasible, achieved = check_feasible(cell, probe, full)
    if feasible:
        return probe
    raise InfeasibleAtCapError(probe, achieved)


def solve_cell(cell: CellInstance, tau_cap: int = 1024) -> AssistSolution:
    """Minimal feasible slot count and an assist vector achieving it with
    the fewest assists.

    Bisects on the slot count (feasibility is monotone in it) with the
    inner problem solved by the prefix rule: q decays with distance, so
    among k-assist vectors the k nearest transmitters achieve the most.
    """
    if not cell.distances:
        return AssistSolution(1, (), 1.0)
    q_values = tuple(q_factor(r, cell.params) for r in cell.distances)
    hi = find_tau_max(cell, tau_cap)
    lo = 1
    while lo < hi:
        mid = (lo + hi) // 2
        if _min_prefix_assists(cell, mid, q_values) is not None:
            hi = mid
        else:
            lo = mid + 1
    k = _min_prefix_assists(cell, lo, q_values)
    if k is None:
        # can only happen when find_tau_max fell back to full-budget
        # feasibility at a tau below the no-assist doubling target
        k = min(cell.budget, len(cell.distances))
    assist = tuple(1 if i < k else 0 for i in range(len(cell.distances)))
    _, achieved = check_feasible(cell, lo, assist)
    return AssistSolution(lo, assist, achieved)


def solve_cell_exhaustive(cell: CellInstance, tau_cap: int = 16) -> AssistSolution:
    """Brute-force reference solver: scans every slot count up to the cap
    and every assist vector within budget. Exponential in the cell size;
    use only on small instances."""
    m = len(cell.distances)
    if m == 0:
        return AssistSolution(1, (), 1.0)
    best_achieved = 0.0
    for tau in range(1, tau_cap + 1):
        best = None
        for bits in itertools.product((0, 1), repeat=m):
            if sum(bits) > cell.budget:
                continue
            feasible, achieved = check_feasible(cell, tau, bits)
            best_achieved = max(best_achieved, achieved)
            if feasible and (best is None or sum(bits) < sum(best[0])):
                best = (bits, achieved)
        if best is not None:
            return AssistSolution(tau, best[0], best[1])
    raise InfeasibleAtCapError(tau_cap, best_achieved)


# ---------------------------------------------------------------------------
# Population-level (relaxed) policy audit
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _policy_weights(
    policy: PolicyHistogram, params: SystemParams, quad: QuadratureConfig
) -> Tuple[float, float]:
    """(resource, lift) of a distance-binned policy against the Rayleigh
    serving-distance law: resource is the assisted cluster fraction, lift
    the q-weighted assisted mass that scales the coverage gain."""
    lam_pi = params.lambda_b * math.pi
    resource = 0.0
    lift = 0.0
    for i, g in enumerate(policy.frequencies):
        if math.isnan(g) or g == 0.0:
            continue
        lo, hi = policy.edges[i], policy.edges[i + 1]
        mass = math.exp(-lam_pi * lo * lo)
        if not math.isinf(hi):
            mass -= math.exp(-lam_pi * hi * hi)
        resource += g * mass
        weight = _quad(
            lambda r: q_factor(r, params, quad)
            * 2.0
            * lam_pi
            * r
            * math.exp(-lam_pi * r * r),
            lo,
            hi,
            quad,
        )
        lift += g * weight
    return resource, lift


def evaluate_relaxed(
    policy: PolicyHistogram,
    tau_m: int,
    params: SystemParams,
    quad: QuadratureConfig = DEFAULT_QUAD,
) -> RelaxedEvaluation:
    """Audit a distance-based assist policy at the population level.

    Replaces per-cell budgets by their density ratio: assists per cluster
    may not exceed budget * lambda_b / lambda_m on average. Reliability is
    the expected covered fraction of a typical cluster under the policy,
    with the serving-BS distance Rayleigh as for a Poisson BS field. Bins
    with no observations (NaN frequency) count as unassisted.
    """
    base = _mean_covered_at(params, int(tau_m))
    nmax = params.mean_receivers()
    resource, lift_weight = _policy_weights(policy, params, quad)
    reliability = (base + (nmax - base) * lift_weight) / nmax
    cap = params.budget * params.lambda_b / params.lambda_m
    return RelaxedEvaluation(reliability, resource, cap, params.eta)


def min_feasible_tau_relaxed(
    policy: PolicyHistogram,
    params: SystemParams,
    tau_cap: int = 1024,
    quad: QuadratureConfig = DEFAULT_QUAD,
) -> int:
    """Smallest slot count at which the relaxed policy audit passes; the
    resource check does not depend on the slot count, so an over-budget
    policy is unreachable at any tau and is reported as such."""
    probe = evaluate_relaxed(policy, 1, params, quad)
    if probe.resource > probe.resource_cap * (1.0 + 1e-12):
        raise InfeasibleAtCapError(1, probe.reliability)
    if probe.feasible:
        return 1
    tau = 1
    last_evaluable = 1
    best = probe.reliability
    while tau < tau_cap:
        tau = min(2 * tau, tau_cap)
        try:
            ev = evaluate_relaxed(policy, tau, params, quad)
        except NumericalError:
            break
        last_evaluable = tau
        best = max(best, ev.reliability)
        if ev.feasible:
            lo, hi = tau // 2 + 1, tau
            while lo < hi:
                mid = (lo + hi) // 2
                try:
                    if evaluate_relaxed(policy, mid, params, quad).feasible:
                        hi = mid
                    else:
                        lo = mid + 1
                except NumericalError:
                    lo = mid + 1
            return lo
    raise InfeasibleAtCapError(last_evaluable, best)


# ---------------------------------------------------------------------------
# Empirical policy over sampled deployments
# ---------------------------------------------------------------------------


def _realization_rng(seed: int, index: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(7, index))
    return np.random.Generator(np.random.Philox(ss))


def aggregate_policy(
    params: SystemParams,
    n_realizations: int = 50,
    extent: float = 5000.0,
    pad: float = 1500.0,
    bin_width: float = 25.0,
    seed: int = DEFAULT_SEED,
    tau_cap: int = 1024,
) -> PolicyHistogram:
    """Solve every cell of sampled Poisson deployments and histogram the
    assist decisions against BS distance.

    BSs and transmitters are drawn in a disc of radius extent + pad and
    transmitters attach to their nearest BS, but only cells whose BS lies
    within the extent are solved, so boundary cells with artificially
    truncated neighborhoods stay out of the statistics. Cells with no
    transmitter are skipped; they need no slots and no assists.
    """
    from scipy.spatial import cKDTree

    if n_realizations < 1:
        raise ValueError("need at least one realization")
    if pad < 0.0 or extent <= 0.0 or bin_width <= 0.0:
        raise ValueError("extent and bin_width must be positive, pad nonnegative")
    window = extent + pad
    distances: List[float] = []
    assists: List[int] = []
    taus: List[int] = []
    for index in range(n_realizations):
        rng = _realization_rng(seed, index)
        n_bs = int(rng.poisson(params.lambda_b * math.pi * window**2))
        if n_bs == 0:
            continue
        bs = _draw_disc(rng, n_bs, window)
        n_tx = int(rng.poisson(params.lambda_m * math.pi * window**2))
        if n_tx == 0:
            continue
        tx = _draw_disc(rng, n_tx, window)
        dist, owner = cKDTree(bs).query(tx)
        core = np.flatnonzero(np.hypot(bs[:, 0], bs[:, 1]) <= extent)
        for j in core:
            rs = np.sort(dist[owner == j])
            if len(rs) == 0:
                continue
            cell = CellInstance(
                tuple(float(r) for r in rs), params.budget, params.eta, params
            )
            sol = solve_cell(cell, tau_cap)
            taus.append(sol.tau_star)
            distances.extend(cell.distances)
            assists.extend(sol.assist)
    if not taus:
        raise ValueError(
            "no nonempty cells observed; increase extent or realizations"
        )
    r_arr = np.asarray(distances)
    g_arr = np.asarray(assists, dtype=float)
    n_bins = max(int(math.ceil(r_arr.max() / bin_width)), 1)
    idx = np.minimum((r_arr / bin_width).astype(int), n_bins - 1)
    counts = np.bincount(idx, minlength=n_bins)
    g_sums = np.bincount(idx, weights=g_arr, minlength=n_bins)
    with np.errstate(invalid="ignore"):
        freqs = np.where(counts > 0, g_sums / np.maximum(counts, 1), math.nan)
    edges = tuple(float(i * bin_width) for i in range(n_bins + 1)) + (math.inf,)
    return PolicyHistogram(
        edges,
        tuple(float(f) for f in freqs) + (math.nan,),
        tuple(int(c) for c in counts) + (0,),
        float(np.mean(taus)),
    )


# ---------------------------------------------------------------------------
# Cell fixtures on disk
# ---------------------------------------------------------------------------


def write_cells(path, cells: Sequence[CellInstance]) -> None:
    """Plain-text cell list: one line per cell, 'eta budget r1 r2 ...'."""
    with open(path, "w") as fh:
        fh.write("# eta budget bs_distances_m...\n")
        for cell in cells:
            parts = [repr(float(cell.eta)), str(cell.budget)]
            parts.extend(repr(float(r)) for r in cell.distances)
            fh.write(" ".join(parts) + "\n")


def read_cells(path, params: SystemParams) -> List[CellInstance]:
    """Parse a cell list written by write_cells; '#' starts a comment,
    blank lines are skipped, distances are sorted on read."""
    cells = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) < 2:
                raise ValueError(
                    f"{path}:{lineno}: need at least eta and budget"
                )
            try:
                eta = float(parts[0])
                budget = int(parts[1])
                rs = sorted(float(x) for x in parts[2:])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            cells.append(CellInstance(tuple(rs), budget, eta, params))
    return cells
