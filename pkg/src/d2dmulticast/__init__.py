"""Coverage, throughput, and assistance scheduling for multicast
device-to-device networks over Poisson fields.

The package pairs an analytic engine (closed forms and quadrature for
coverage probabilities, expected covered receivers, throughput, and the
cellular downlink) with a Monte Carlo simulator sharing the same model,
and a scheduler that picks slot counts and BS-assistance sets per cell.
"""

__version__ = "0.1.0"

from .model import (
    DEFAULT_SEED,
    NetworkSnapshot,
    PathLossModel,
    SystemParams,
    db_to_linear,
    linear_to_db,
    noise_power_watts,
    path_loss,
    path_loss_inverse,
    reach_threshold,
    sinr,
)
from .analytic import (
    CancellationWarning,
    CoverageCurve,
    FlatObjectiveWarning,
    NumericalError,
    QuadratureConfig,
    assisted_coverage,
    assisted_mean_covered,
    assisted_mean_covered_given_bs_distance,
    bonferroni_bounds,
    bs_coverage_alpha4,
    bs_coverage_exact,
    bs_coverage_exact_given_serving,
    bs_coverage_pc,
    conditional_coverage,
    conditional_ratio,
    coverage_probability,
    coverage_vs_distance,
    coverage_vs_threshold,
    h_integral,
    k_integral,
    mean_covered,
    mean_covered_alpha4,
    mean_covered_asymptotic,
    mobility_variant,
    null_cluster_fraction,
    optimal_rate_asymptotic,
    optimal_rate_general,
    p_n_single,
    q_factor,
    throughput,
    unicast_baseline,
)
from .simulate import (
    CoverageEstimate,
    JointCoverageEstimate,
    SimConfig,
    estimate_coverage,
    estimate_joint_coverage,
    estimate_mean_covered,
    estimate_null_fraction,
    estimate_slot_run_coverage,
    resolve_window,
    sample_snapshot,
)
from .optimize import (
    AssistSolution,
    CellInstance,
    InfeasibleAtCapError,
    PolicyHistogram,
    RelaxedEvaluation,
    aggregate_policy,
    check_feasible,
    evaluate_relaxed,
    find_tau_max,
    h_value,
    min_feasible_tau_relaxed,
    read_cells,
    solve_cell,
    solve_cell_exhaustive,
    write_cells,
)
from .config import (
    ConfigError,
    ExperimentConfig,
    SweepSpec,
    apply_sweep_value,
    load_config,
)
