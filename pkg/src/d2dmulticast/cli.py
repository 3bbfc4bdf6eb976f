"""Command line interface.

Subcommands: coverage, mean-covered, throughput, optimize, and reproduce
(which rebuilds the bundled reference figures figN). Every command reads
an optional INI experiment file (--config), applies the flag overrides,
writes one CSV of results, and renders the matching figure alongside it
unless figures are disabled.

Exit codes: 0 success, 2 configuration or usage error, 3 numerical
failure, 4 reliability target unreachable within the slot cap.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import replace as dc_replace
from pathlib import Path
from typing import List, Tuple

from . import __version__
from .analytic import (
    NumericalError,
    assisted_coverage,
    assisted_mean_covered,
    coverage_probability,
    mean_covered,
    optimal_rate_asymptotic,
    optimal_rate_general,
    throughput,
)
from .config import (
    ConfigError,
    ExperimentConfig,
    SweepSpec,
    apply_sweep_value,
    load_config,
)
from .model import db_to_linear, linear_to_db
from .optimize import (
    InfeasibleAtCapError,
    aggregate_policy,
    evaluate_relaxed,
    min_feasible_tau_relaxed,
    read_cells,
    solve_cell,
)
from .report import (
    ResultRow,
    params_digest,
    render_histogram,
    render_parametric,
    render_rows,
    write_rows,
)
from .simulate import estimate_coverage, estimate_mean_covered

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_INFEASIBLE = 4

_AXIS_LABELS = {
    "detection_threshold_db": "detection threshold (dB)",
    "detection_threshold": "detection threshold (linear)",
    "cluster_radius": "cluster radius (m)",
    "tau_m": "transmission slots",
    "lambda_b": "BS density (per m^2)",
    "lambda_m": "transmitter density (per m^2)",
    "lambda_r": "receiver density (per m^2)",
    "alpha": "path loss exponent",
    "p_bs": "BS power (W)",
    "p_d2d": "device power (W)",
    "noise_power": "noise power (W)",
    "eta": "reliability target",
    "budget": "assist budget",
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="FILE", help="experiment INI file")
    common.add_argument("--seed", type=int, help="override the RNG seed")
    common.add_argument("--trials", type=int, help="override Monte Carlo trials")
    common.add_argument("--threads", type=int, help="override worker threads")
    common.add_argument(
        "--out", metavar="PATH", help="output directory, or a .csv file path"
    )
    common.add_argument(
        "--mode",
        choices=("analytic", "sim", "both"),
        help="which route(s) to evaluate",
    )
    common.add_argument(
        "--no-figures",
        action="store_true",
        help="write CSV only, skip figure rendering",
    )

    parser = argparse.ArgumentParser(
        prog="d2dmulticast",
        description="Coverage, throughput, and assistance scheduling for "
        "multicast device-to-device networks over Poisson fields.",
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser(
        "coverage",
        parents=[common],
        help="coverage probability of probe receivers along a sweep",
    )
    p.set_defaults(func=cmd_coverage)

    p = sub.add_parser(
        "mean-covered",
        parents=[common],
        help="expected covered receivers per cluster along a sweep",
    )
    p.set_defaults(func=cmd_mean_covered)

    p = sub.add_parser(
        "throughput",
        parents=[common],
        help="multicast throughput along a sweep, with optimal rates",
    )
    p.set_defaults(func=cmd_throughput)

    p = sub.add_parser(
        "optimize",
        parents=[common],
        help="per-cell slot counts and assist sets, or a sampled policy",
    )
    p.add_argument(
        "--cells",
        metavar="FILE",
        help="solve the cell instances listed in FILE instead of sampling",
    )
    p.add_argument(
        "--realizations",
        type=int,
        default=50,
        help="deployments to sample when no cell file is given",
    )
    p.add_argument(
        "--extent", type=float, default=5000.0, help="sampled core radius (m)"
    )
    p.add_argument(
        "--bin-width", type=float, default=25.0, help="policy histogram bin (m)"
    )
    p.add_argument(
        "--tau-cap", type=int, default=1024, help="hard cap on slot counts"
    )
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser(
        "reproduce",
        parents=[common],
        help="rebuild one of the bundled reference figures",
    )
    p.add_argument(
        "figure",
        choices=("fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8"),
    )
    p.set_defaults(func=cmd_reproduce)
    return parser


def _load(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    sim = cfg.sim
    if args.seed is not None:
        sim = dc_replace(sim, rng_seed=args.seed)
    if args.trials is not None:
        sim = dc_replace(sim, trials=args.trials)
    if args.threads is not None:
        sim = dc_replace(sim, threads=args.threads)
    changes = {"sim": sim}
    if args.mode is not None:
        changes["mode"] = args.mode
    if args.out is not None:
        changes["out_path"] = args.out
    if args.no_figures:
        changes["figures"] = False
    return dc_replace(cfg, **changes)


def _out_paths(cfg: ExperimentConfig, stem: str) -> Tuple[Path, Path]:
    out = Path(cfg.out_path)
    if out.suffix == ".csv":
        out.parent.mkdir(parents=True, exist_ok=True)
        return out, out.with_suffix(".png")
    out.mkdir(parents=True, exist_ok=True)
    return out / f"{stem}.csv", out / f"{stem}.png"


def _metadata(cfg: ExperimentConfig, mode: str, **extra) -> dict:
    md = {
        "generator": f"d2dmulticast {__version__}",
        "seed": str(cfg.sim.rng_seed),
        "trials": str(cfg.sim.trials),
        "mode": mode,
        "params": params_digest(cfg.params),
    }
    md.update({k: str(v) for k, v in extra.items()})
    return md


def _finish(cfg, stem, rows, metadata, render) -> int:
    csv_path, png_path = _out_paths(cfg, stem)
    write_rows(csv_path, rows, metadata)
    made = [str(csv_path)]
    if cfg.figures:
        render(png_path)
        made.append(str(png_path))
    print("wrote " + " and ".join(made))
    return EXIT_OK


# ---------------------------------------------------------------------------
# coverage
# ---------------------------------------------------------------------------


def cmd_coverage(args) -> int:
    cfg = _load(args)
    mode = cfg.mode or "both"
    sweep = cfg.sweep or SweepSpec(
        "detection_threshold_db", tuple(float(v) for v in range(-10, 15))
    )
    distances = cfg.distances or (50.0, 150.0, 250.0)
    rows: List[ResultRow] = []
    stream = 0
    for dist in distances:
        metric = f"coverage_d{dist:g}"
        for value in sweep.values:
            point = apply_sweep_value(cfg.params, sweep.param, value)
            analytic = simulated = stderr = trials = None
            if mode != "sim":
                if cfg.sim.assist:
                    analytic = assisted_coverage(
                        dist, point, mobility=cfg.sim.mobility
                    )
                else:
                    analytic = coverage_probability(
                        dist, point, mobility=cfg.sim.mobility
                    )
            if mode != "analytic":
                est = estimate_coverage(dist, point, cfg.sim, stream=stream)
                simulated, stderr, trials = est.value, est.stderr, est.trials
            stream += 1
            rows.append(
                ResultRow(
                    sweep.param, float(value), metric, analytic, simulated,
                    stderr, trials,
                )
            )
    metadata = _metadata(cfg, mode, sweep=sweep.param)
    xlabel = _AXIS_LABELS.get(sweep.param, sweep.param)
    return _finish(
        cfg,
        "coverage",
        rows,
        metadata,
        lambda p: render_rows(p, rows, xlabel, "coverage probability"),
    )


# ---------------------------------------------------------------------------
# mean-covered
# ---------------------------------------------------------------------------


def cmd_mean_covered(args) -> int:
    cfg = _load(args)
    mode = cfg.mode or "both"
    sweep = cfg.sweep or SweepSpec("tau_m", tuple(float(t) for t in range(1, 9)))
    rows: List[ResultRow] = []
    stream = 0
    # one series per requested variant: the plain device link always, the
    # mobile and BS-assisted variants when the sim config asks for them
    variants = [("mean_covered", False, False)]
    if cfg.sim.mobility:
        variants.append(("mean_covered_mobile", True, False))
    if cfg.sim.assist:
        variants.append(("mean_covered_assisted", False, True))
    for metric, mobility, assist in variants:
        for value in sweep.values:
            point = apply_sweep_value(cfg.params, sweep.param, value)
            analytic = simulated = stderr = trials = None
            if mode != "sim":
                if assist:
                    analytic = assisted_mean_covered(point)
                else:
                    analytic = mean_covered(point, mobility=mobility)
            if mode != "analytic":
                sim_cfg = dc_replace(cfg.sim, mobility=mobility, assist=assist)
                est = estimate_mean_covered(point, sim_cfg, stream=stream)
                simulated, stderr, trials = est.value, est.stderr, est.trials
            stream += 1
            rows.append(
                ResultRow(
                    sweep.param, float(value), metric, analytic, simulated,
                    stderr, trials,
                )
            )
    metadata = _metadata(cfg, mode, sweep=sweep.param)
    xlabel = _AXIS_LABELS.get(sweep.param, sweep.param)
    return _finish(
        cfg,
        "mean_covered",
        rows,
        metadata,
        lambda p: render_rows(p, rows, xlabel, "mean covered receivers"),
    )


# ---------------------------------------------------------------------------
# throughput
# ---------------------------------------------------------------------------


def cmd_throughput(args) -> int:
    cfg = _load(args)
    # simulation of a full rate sweep is expensive; default to the
    # analytic route unless a mode is asked for
    mode = cfg.mode or "analytic"
    sweep = cfg.sweep or SweepSpec(
        "detection_threshold_db", tuple(-6.0 + 0.5 * i for i in range(49))
    )
    rows: List[ResultRow] = []
    metric = f"throughput_tau{cfg.params.tau_m}"
    stream = 0
    for value in sweep.values:
        point = apply_sweep_value(cfg.params, sweep.param, value)
        analytic = simulated = stderr = trials = None
        if mode != "sim":
            analytic = throughput(point, mobility=cfg.sim.mobility)
        if mode != "analytic":
            sim_cfg = dc_replace(cfg.sim, assist=False)
            est = estimate_mean_covered(point, sim_cfg, stream=stream)
            factor = math.log1p(point.detection_threshold) / point.tau_m
            simulated = est.value * factor
            stderr = est.stderr * factor
            trials = est.trials
        stream += 1
        rows.append(
            ResultRow(
                sweep.param, float(value), metric, analytic, simulated,
                stderr, trials,
            )
        )
    sweep_rows = list(rows)
    if mode != "sim" and sweep.param in (
        "detection_threshold_db",
        "detection_threshold",
    ):
        t_opt = optimal_rate_general(cfg.params, mobility=cfg.sim.mobility)
        rows.append(
            ResultRow(
                "optimum",
                float(cfg.params.tau_m),
                "optimal_threshold_db",
                analytic=linear_to_db(t_opt),
            )
        )
        rows.append(
            ResultRow(
                "optimum",
                float(cfg.params.tau_m),
                "optimal_threshold_db_dense",
                analytic=linear_to_db(optimal_rate_asymptotic(cfg.params.alpha)),
            )
        )
    metadata = _metadata(cfg, mode, sweep=sweep.param)
    xlabel = _AXIS_LABELS.get(sweep.param, sweep.param)
    return _finish(
        cfg,
        "throughput",
        rows,
        metadata,
        lambda p: render_rows(
            p, sweep_rows, xlabel, "throughput (nats/channel use)"
        ),
    )


# ---------------------------------------------------------------------------
# optimize
# ---------------------------------------------------------------------------


def cmd_optimize(args) -> int:
    cfg = _load(args)
    if args.cells:
        try:
            cells = read_cells(args.cells, cfg.params)
        except OSError as exc:
            raise ConfigError(f"cannot read cell file {args.cells}: {exc}") from None
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        rows: List[ResultRow] = []
        for index, cell in enumerate(cells):
            sol = solve_cell(cell, tau_cap=args.tau_cap)
            used = sum(sol.assist)
            print(
                f"cell {index}: {len(cell.distances)} transmitters, "
                f"tau_star={sol.tau_star}, assists={used}/{cell.budget}, "
                f"achieved={sol.achieved:.4f} (target {cell.eta})"
            )
            rows.append(
                ResultRow(
                    "cell_index", float(index), "tau_star",
                    analytic=float(sol.tau_star),
                )
            )
            rows.append(
                ResultRow("cell_index", float(index), "achieved", sol.achieved)
            )
            rows.append(
                ResultRow(
                    "cell_index", float(index), "assist_count",
                    analytic=float(used),
                )
            )
        metadata = _metadata(cfg, "analytic", cells=args.cells)
        return _finish(
            cfg,
            "optimize",
            rows,
            metadata,
            lambda p: render_rows(p, rows, "cell index", "value"),
        )

    return _sampled_policy(
        cfg, "optimize", args.realizations, args.extent, args.bin_width,
        args.tau_cap,
    )


def _sampled_policy(
    cfg: ExperimentConfig,
    stem: str,
    realizations: int,
    extent: float,
    bin_width: float,
    tau_cap: int,
) -> int:
    policy = aggregate_policy(
        cfg.params,
        n_realizations=realizations,
        extent=extent,
        bin_width=bin_width,
        seed=cfg.sim.rng_seed,
        tau_cap=tau_cap,
    )
    rows: List[ResultRow] = []
    for i, freq in enumerate(policy.frequencies):
        lo, hi = policy.edges[i], policy.edges[i + 1]
        if math.isinf(hi):
            continue
        rows.append(
            ResultRow(
                "bs_distance_m",
                (lo + hi) / 2.0,
                "assist_fraction",
                simulated=freq,
                trials=policy.counts[i],
            )
        )
    rows.append(
        ResultRow("aggregate", 0.0, "tau_bar", simulated=policy.tau_bar)
    )
    tau_relaxed = min_feasible_tau_relaxed(policy, cfg.params, tau_cap=tau_cap)
    audit = evaluate_relaxed(policy, tau_relaxed, cfg.params)
    rows.append(
        ResultRow("aggregate", 0.0, "tau_relaxed", analytic=float(tau_relaxed))
    )
    rows.append(ResultRow("aggregate", 0.0, "resource", analytic=audit.resource))
    rows.append(
        ResultRow("aggregate", 0.0, "resource_cap", analytic=audit.resource_cap)
    )
    rows.append(
        ResultRow("aggregate", 0.0, "reliability", analytic=audit.reliability)
    )
    print(
        f"sampled policy: tau_bar={policy.tau_bar:.3f}, relaxed tau={tau_relaxed}, "
        f"resource={audit.resource:.4f} (cap {audit.resource_cap:.4f})"
    )
    metadata = _metadata(
        cfg,
        "sim",
        realizations=realizations,
        extent=extent,
        bin_width=bin_width,
    )
    return _finish(
        cfg,
        stem,
        rows,
        metadata,
        lambda p: render_histogram(p, policy),
    )


# ---------------------------------------------------------------------------
# reproduce
# ---------------------------------------------------------------------------


def _fig_sim(cfg: ExperimentConfig, default_trials: int, args):
    """Sim config for a reference figure: preset trial count unless the
    user overrode it on the command line."""
    sim = cfg.sim
    if args.trials is None:
        sim = dc_replace(sim, trials=default_trials)
    return sim


def _fig2(cfg: ExperimentConfig, args) -> int:
    sim = _fig_sim(cfg, 20_000, args)
    mode = cfg.mode or "both"
    rows: List[ResultRow] = []
    stream = 0
    for dist in (50.0, 150.0, 250.0):
        metric = f"coverage_d{dist:g}"
        for tdb in range(-10, 15):
            point = cfg.params.replace(detection_threshold=db_to_linear(tdb))
            analytic = simulated = stderr = trials = None
            if mode != "sim":
                analytic = coverage_probability(dist, point)
            if mode != "analytic":
                est = estimate_coverage(dist, point, sim, stream=stream)
                simulated, stderr, trials = est.value, est.stderr, est.trials
            stream += 1
            rows.append(
                ResultRow(
                    "detection_threshold_db", float(tdb), metric,
                    analytic, simulated, stderr, trials,
                )
            )
    cfg = dc_replace(cfg, sim=sim)
    metadata = _metadata(cfg, mode, figure="fig2")
    return _finish(
        cfg,
        "fig2",
        rows,
        metadata,
        lambda p: render_rows(
            p, rows, "detection threshold (dB)", "coverage probability"
        ),
    )


def _fig3(cfg: ExperimentConfig, args) -> int:
    sim = _fig_sim(cfg, 1000, args)
    mode = cfg.mode or "both"
    rows: List[ResultRow] = []
    stream = 0
    for tau in (1, 2, 4):
        metric = f"mean_covered_frac_tau{tau}"
        for radius in range(50, 401, 50):
            point = cfg.params.replace(tau_m=tau, cluster_radius=float(radius))
            nmax = point.mean_receivers()
            analytic = simulated = stderr = trials = None
            if mode != "sim":
                analytic = mean_covered(point) / nmax
            if mode != "analytic":
                est = estimate_mean_covered(point, sim, stream=stream)
                simulated = est.value / nmax
                stderr = est.stderr / nmax
                trials = est.trials
            stream += 1
            rows.append(
                ResultRow(
                    "cluster_radius", float(radius), metric,
                    analytic, simulated, stderr, trials,
                )
            )
    cfg = dc_replace(cfg, sim=sim)
    metadata = _metadata(cfg, mode, figure="fig3")
    return _finish(
        cfg,
        "fig3",
        rows,
        metadata,
        lambda p: render_rows(
            p, rows, "cluster radius (m)", "covered fraction"
        ),
    )


def _fig4(cfg: ExperimentConfig, args) -> int:
    sim = _fig_sim(cfg, 1000, args)
    mode = cfg.mode or "both"
    base = cfg.params.replace(cluster_radius=250.0)
    rows: List[ResultRow] = []
    stream = 0
    for metric, mobility in (
        ("mean_covered_frac_static", False),
        ("mean_covered_frac_mobile", True),
    ):
        for tau in range(1, 9):
            point = base.replace(tau_m=tau)
            nmax = point.mean_receivers()
            analytic = simulated = stderr = trials = None
            if mode != "sim":
                analytic = mean_covered(point, mobility=mobility) / nmax
            if mode != "analytic":
                sim_cfg = dc_replace(sim, mobility=mobility)
                est = estimate_mean_covered(point, sim_cfg, stream=stream)
                simulated = est.value / nmax
                stderr = est.stderr / nmax
                trials = est.trials
            stream += 1
            rows.append(
                ResultRow(
                    "tau_m", float(tau), metric,
                    analytic, simulated, stderr, trials,
                )
            )
    cfg = dc_replace(cfg, sim=sim)
    metadata = _metadata(cfg, mode, figure="fig4")
    return _finish(
        cfg,
        "fig4",
        rows,
        metadata,
        lambda p: render_rows(
            p, rows, "transmission slots", "covered fraction"
        ),
    )


def _fig5(cfg: ExperimentConfig, args) -> int:
    sim = _fig_sim(cfg, 1000, args)
    mode = cfg.mode or "both"
    rows: List[ResultRow] = []
    stream = 0
    for metric, assist in (
        ("mean_covered_frac", False),
        ("mean_covered_frac_assisted", True),
    ):
        for radius in range(50, 401, 50):
            point = cfg.params.replace(cluster_radius=float(radius))
            nmax = point.mean_receivers()
            analytic = simulated = stderr = trials = None
            if mode != "sim":
                if assist:
                    analytic = assisted_mean_covered(point) / nmax
                else:
                    analytic = mean_covered(point) / nmax
            if mode != "analytic":
                sim_cfg = dc_replace(sim, assist=assist)
                est = estimate_mean_covered(point, sim_cfg, stream=stream)
                simulated = est.value / nmax
                stderr = est.stderr / nmax
                trials = est.trials
            stream += 1
            rows.append(
                ResultRow(
                    "cluster_radius", float(radius), metric,
                    analytic, simulated, stderr, trials,
                )
            )
    cfg = dc_replace(cfg, sim=sim)
    metadata = _metadata(cfg, mode, figure="fig5")
    return _finish(
        cfg,
        "fig5",
        rows,
        metadata,
        lambda p: render_rows(
            p, rows, "cluster radius (m)", "covered fraction"
        ),
    )


def _fig6(cfg: ExperimentConfig, args) -> int:
    return _sampled_policy(cfg, "fig6", 50, 5000.0, 25.0, 1024)


def _fig7(cfg: ExperimentConfig, args) -> int:
    rows: List[ResultRow] = []
    curves = {}
    for tau in (1, 4):
        metric = f"throughput_tau{tau}"
        xs, ys = [], []
        for i in range(49):
            tdb = -6.0 + 0.5 * i
            point = cfg.params.replace(
                tau_m=tau, detection_threshold=db_to_linear(tdb)
            )
            xi = throughput(point)
            xs.append(tdb)
            ys.append(xi)
            rows.append(
                ResultRow("detection_threshold_db", tdb, metric, analytic=xi)
            )
        curves[metric] = (xs, ys)
        t_opt = optimal_rate_general(cfg.params.replace(tau_m=tau))
        rows.append(
            ResultRow(
                "optimum", float(tau), "optimal_threshold_db",
                analytic=linear_to_db(t_opt),
            )
        )
    rows.append(
        ResultRow(
            "optimum", 0.0, "optimal_threshold_db_dense",
            analytic=linear_to_db(optimal_rate_asymptotic(cfg.params.alpha)),
        )
    )
    metadata = _metadata(cfg, "analytic", figure="fig7")
    return _finish(
        cfg,
        "fig7",
        rows,
        metadata,
        lambda p: render_parametric(
            p, curves, "detection threshold (dB)",
            "throughput (nats/channel use)",
        ),
    )


def _fig8(cfg: ExperimentConfig, args) -> int:
    rows: List[ResultRow] = []
    curves = {}
    for tau in (1, 2, 4):
        fr_xs, xi_ys = [], []
        for i in range(61):
            tdb = -10.0 + 0.5 * i
            point = cfg.params.replace(
                tau_m=tau, detection_threshold=db_to_linear(tdb)
            )
            frac = mean_covered(point) / point.mean_receivers()
            xi = throughput(point)
            fr_xs.append(frac)
            xi_ys.append(xi)
            rows.append(
                ResultRow(
                    "detection_threshold_db", tdb,
                    f"mean_covered_frac_tau{tau}", analytic=frac,
                )
            )
            rows.append(
                ResultRow(
                    "detection_threshold_db", tdb,
                    f"throughput_tau{tau}", analytic=xi,
                )
            )
        curves[f"tau{tau}"] = (fr_xs, xi_ys)
    metadata = _metadata(cfg, "analytic", figure="fig8")
    return _finish(
        cfg,
        "fig8",
        rows,
        metadata,
        lambda p: render_parametric(
            p, curves, "covered fraction",
            "throughput (nats/channel use)",
        ),
    )


_FIG_BUILDERS = {
    "fig2": _fig2,
    "fig3": _fig3,
    "fig4": _fig4,
    "fig5": _fig5,
    "fig6": _fig6,
    "fig7": _fig7,
    "fig8": _fig8,
}


def cmd_reproduce(args) -> int:
    cfg = _load(args)
    if Path(cfg.out_path).suffix == ".csv":
        raise ConfigError("reproduce writes fixed file names; --out must be a directory")
    return _FIG_BUILDERS[args.figure](cfg, args)


# ---------------------------------------------------------------------------


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleAtCapError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
