"""Command line entry point for the underlay coverage engine."""

from __future__ import annotations

import argparse
import logging
import pathlib
import sys
from typing import Any, Iterable, Mapping, Sequence

import pandas as pd

from .analytic import Metric, coverage
from .errors import ConfigError, CoverageError, DomainError, PrecisionLoss, QuadratureFailure
from .montecarlo import DEFAULT_TRIALS, estimate_many
from .params import (
    MODEL1_ENVIRONMENTS,
    AerialEnvironment,
    SystemParams,
    build_environment,
    build_params,
    environment,
    read_config,
)
from .power import describe_regime
from .quadrature import QuadratureSpec
from .sweep import CSV_COLUMNS, DEFAULT_H_RANGE, DEFAULT_H_STEP, REFINE_STEP, CoverageSweep, SweepSpec, best_height

logger = logging.getLogger("underlay_coverage")

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2
EXIT_NUMERICS = 3

# altitudes the evaluation figures cover
ALTITUDE_RANGE = (200.0, 1000.0)
VALIDATION_HEIGHTS = (200.0, 400.0, 600.0, 800.0, 1000.0)
VALIDATION_TOLERANCE = 0.005

_METRIC_CHOICES = [m.value for m in Metric]


def _status(message: str) -> None:
    print(message, file=sys.stderr)


def _quiet(message: str) -> None:
    pass


def _load(
    config_path: str | pathlib.Path, env_name: str | None = None, model: int | None = None
) -> tuple[SystemParams, AerialEnvironment, dict[str, Any]]:
    raw = read_config(config_path)
    params = build_params(raw)
    return params, _resolve_environment(raw, env_name, model), raw


def _resolve_environment(raw: Mapping[str, Any], env_name: str | None, model: int | None) -> AerialEnvironment:
    if env_name is None and model is None:
        return build_environment(raw)
    model = model if model is not None else raw.get("env_model", 1)
    if env_name is None:
        env_name = raw.get("env_name")
    return environment(model, env_name)


def _warn_altitudes(heights: Iterable[float], echo) -> None:
    low, high = ALTITUDE_RANGE
    outside = sorted({h for h in heights if not low <= h <= high})
    if outside:
        logger.warning("ABS heights outside [%g, %g] m: %s", low, high, ", ".join(f"{h:g}" for h in outside))
        echo(f"⚠️ Heights outside the {low:g}-{high:g} m range the channel models were fitted for: "
             + ", ".join(f"{h:g}" for h in outside))


def run_sweep(
    config_path: str | pathlib.Path,
    sweep: SweepSpec,
    metrics: Iterable[Metric | str],
    modes: Iterable[str],
    out_path: str | pathlib.Path,
    *,
    env_name: str | None = None,
    model: int | None = None,
    all_envs: bool = False,
    mc_trials: int = DEFAULT_TRIALS,
    seed: int = 0,
    no_fading: bool = False,
    timing: bool = True,
    optimize_h: bool = False,
    workers: int = 1,
    quad: QuadratureSpec | None = None,
    progress: bool = False,
    echo=_status,
) -> int:
    """Run one sweep and write its CSV. Returns the process exit code."""
    try:
        params, env, raw = _load(config_path, env_name, model)
        if all_envs:
            env_model = model if model is not None else raw.get("env_model", 1)
            if int(env_model) != 1:
                raise ConfigError("--all-envs covers the Model 1 presets only")
            environments = [environment(1, name) for name in MODEL1_ENVIRONMENTS]
        else:
            environments = [env]
        runner = CoverageSweep(
            params,
            environments,
            sweep,
            metrics=metrics,
            modes=modes,
            quad=quad,
            mc_trials=mc_trials,
            seed=seed,
            no_fading=no_fading,
            timing=timing,
            optimize_h=optimize_h,
            workers=workers,
            progress=progress,
            echo=echo,
        )
        points = runner.points()
    except (ConfigError, DomainError) as exc:
        echo(f"❌ Config error: {exc}")
        return EXIT_CONFIG

    _warn_altitudes((p.h for p, _ in points), echo)
    ok = runner.process()
    runner.save_csv(out_path)
    if not ok:
        echo(f"❌ {len(runner.failures)} row(s) failed numerically; they are marked NA in {out_path}")
        return EXIT_NUMERICS
    return EXIT_OK


def find_best_height(
    config_path: str | pathlib.Path,
    metric: Metric | str,
    h_range: tuple[float, float] = DEFAULT_H_RANGE,
    h_step: float = DEFAULT_H_STEP,
    env: str | AerialEnvironment | None = None,
    *,
    model: int | None = None,
    refine_step: float | None = REFINE_STEP,
    quad: QuadratureSpec | None = None,
) -> tuple[float, float]:
    """Coverage-maximising ABS height for one metric (errors propagate)."""
    if isinstance(env, AerialEnvironment):
        params, _, _ = _load(config_path)
        resolved = env
    else:
        params, resolved, _ = _load(config_path, env, model)
    return best_height(metric, params, resolved, h_range, h_step, refine_step, quad)


def _series_name(metric: str, env: str) -> str:
    safe_env = "".join(ch if ch.isalnum() or ch in "-_" else "_" for ch in env)
    return f"{metric}_{safe_env}.dat"


def emit_plot_data(csv_path: str | pathlib.Path, out_dir: str | pathlib.Path, echo=_status) -> int:
    """Split a sweep CSV into one whitespace-separated series per (metric, env).

    Values are copied as text, so the series reproduce the CSV exactly.
    """
    csv_path = pathlib.Path(csv_path)
    try:
        frame = pd.read_csv(csv_path, dtype=str, keep_default_na=False)
    except FileNotFoundError:
        echo(f"❌ No such CSV: {csv_path}")
        return EXIT_CONFIG
    except (pd.errors.EmptyDataError, pd.errors.ParserError) as exc:
        echo(f"❌ Malformed CSV {csv_path}: {exc}")
        return EXIT_CONFIG

    missing = [column for column in CSV_COLUMNS if column not in frame.columns]
    if missing:
        echo(f"❌ Malformed CSV {csv_path}: missing column(s) {', '.join(missing)}")
        return EXIT_CONFIG
    if frame.empty:
        echo(f"❌ {csv_path} has no data rows")
        return EXIT_CONFIG

    out_dir = pathlib.Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = []
    for (metric, env), group in frame.groupby(["metric", "env"], sort=False):
        x_column = "d_m" if group["d_m"].nunique() > 1 else "h_m"
        name = _series_name(metric, env)
        lines = [f"# {x_column} analytic analytic_err mc_mean mc_ci95"]
        for row in group.itertuples(index=False):
            row = row._asdict()
            lines.append(" ".join(row[c] for c in (x_column, "analytic", "analytic_err", "mc_mean", "mc_ci95")))
        (out_dir / name).write_text("\n".join(lines) + "\n", encoding="utf-8")
        manifest.append(f"{name} metric={metric} env={env} x={x_column} points={len(group)}")

    (out_dir / "manifest.txt").write_text("\n".join(manifest) + "\n", encoding="utf-8")
    echo(f"✅ Wrote {len(manifest)} series to {out_dir}")
    return EXIT_OK


def run_validation(
    config_path: str | pathlib.Path,
    heights: Sequence[float] = VALIDATION_HEIGHTS,
    mc_trials: int = DEFAULT_TRIALS,
    seed: int = 0,
    tolerance: float = VALIDATION_TOLERANCE,
    env_name: str | None = None,
    model: int | None = None,
    workers: int = 1,
    echo=_status,
) -> int:
    """Analytic-versus-simulation check at several heights; exit 0 only if all agree."""
    try:
        params, env, _ = _load(config_path, env_name, model)
        points = [params.replace(h=h) for h in heights]
    except (ConfigError, DomainError) as exc:
        echo(f"❌ Config error: {exc}")
        return EXIT_CONFIG

    print(f"{'h_m':>7} {'metric':>8} {'analytic':>10} {'mc_mean':>10} {'gap':>9} {'allowed':>9}  result")
    failed = 0
    for point in points:
        estimates = estimate_many(Metric, point, env, mc_trials, seed, workers=workers)
        for metric in Metric:
            try:
                result = coverage(metric, point, env)
            except (QuadratureFailure, PrecisionLoss) as exc:
                echo(f"❌ {metric.value} at h={point.h:g}: {exc}")
                return EXIT_NUMERICS
            gap = abs(result.value - estimates[metric].mean)
            allowed = tolerance + result.est_error
            passed = gap <= allowed
            failed += not passed
            print(
                f"{point.h:7.1f} {metric.value:>8} {result.value:10.6f} {estimates[metric].mean:10.6f} "
                f"{gap:9.2e} {allowed:9.2e}  {'PASS' if passed else 'FAIL'}"
            )
    if failed:
        echo(f"❌ {failed} check(s) failed ({env.label}, {mc_trials} trials)")
        return EXIT_FAILED
    echo(f"✅ Analytic and simulated coverage agree at every height ({env.label})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="underlaycov",
        description="Coverage analysis of an underlay aerial base station over a stadium",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=pathlib.Path, required=True, help="TOML parameter file")
    common.add_argument("--env", default=None, help="Environment preset name (overrides the config)")
    common.add_argument("--model", type=int, choices=(1, 2), default=None, help="LOS probability model")
    common.add_argument("-v", "--verbose", action="store_true", help="Debug logging on stderr")
    common.add_argument("-q", "--quiet", action="store_true", help="Suppress status lines and progress bars")

    subparsers = parser.add_subparsers(dest="command", required=True)

    sweep = subparsers.add_parser("sweep", parents=[common], help="Sweep h or d and write a CSV")
    sweep.add_argument(
        "--metric", action="append", choices=_METRIC_CHOICES, help="Metric to evaluate (repeatable, default: all)"
    )
    sweep.add_argument("--var", choices=("h", "d"), default="h", help="Swept variable (default: h)")
    sweep.add_argument("--from", dest="start", type=float, default=None, help="First grid value")
    sweep.add_argument("--to", dest="stop", type=float, default=None, help="Last grid value")
    sweep.add_argument("--step", type=float, default=None, help="Grid step")
    sweep.add_argument(
        "--mode", action="append", choices=("analytic", "mc"), help="analytic and/or mc (default: analytic)"
    )
    sweep.add_argument(
        "--mc-trials",
        type=int,
        default=DEFAULT_TRIALS,
        help=f"Monte Carlo trials per point (default: {DEFAULT_TRIALS:,})",
    )
    sweep.add_argument("--seed", type=int, default=0, help="Monte Carlo seed (default: 0)")
    sweep.add_argument("--out", type=pathlib.Path, required=True, help="Output CSV path")
    sweep.add_argument("--all-envs", action="store_true", help="Run every Model 1 environment preset")
    sweep.add_argument("--optimize-h", action="store_true", help="Place the ABS at each point's best height (d sweeps)")
    sweep.add_argument("--no-fading", action="store_true", help="Add a Monte Carlo column without aerial fading")
    sweep.add_argument("--no-timing", action="store_true", help="Write wall_ms = 0 for byte-identical reruns")
    sweep.add_argument("--workers", type=int, default=1, help="Parallel worker processes (default: 1)")
    sweep.add_argument("--rel-tol", type=float, default=QuadratureSpec.rel_tol, help="Quadrature relative tolerance")

    optimize = subparsers.add_parser("optimize", parents=[common], help="Find the coverage-maximising ABS height")
    optimize.add_argument("--metric", choices=_METRIC_CHOICES, required=True)
    optimize.add_argument("--h-from", type=float, default=DEFAULT_H_RANGE[0])
    optimize.add_argument("--h-to", type=float, default=DEFAULT_H_RANGE[1])
    optimize.add_argument("--h-step", type=float, default=DEFAULT_H_STEP)
    optimize.add_argument("--no-refine", action="store_true", help="Skip the 1 m refinement around the coarse optimum")

    plotdata = subparsers.add_parser("plotdata", help="Turn a sweep CSV into plot-ready series")
    plotdata.add_argument("--csv", type=pathlib.Path, required=True)
    plotdata.add_argument("--out-dir", type=pathlib.Path, required=True)
    plotdata.add_argument("-q", "--quiet", action="store_true")
    plotdata.add_argument("-v", "--verbose", action="store_true")

    validate = subparsers.add_parser("validate", parents=[common], help="Compare analytic and simulated coverage")
    validate.add_argument("--mc-trials", type=int, default=DEFAULT_TRIALS)
    validate.add_argument("--seed", type=int, default=0)
    validate.add_argument("--tolerance", type=float, default=VALIDATION_TOLERANCE)
    validate.add_argument("--workers", type=int, default=1)

    subparsers.add_parser("regimes", parents=[common], help="Print the power-control regime boundaries")
    return parser


def _configure_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def _sweep_defaults(var: str) -> tuple[float, float, float]:
    if var == "h":
        return DEFAULT_H_RANGE[0], DEFAULT_H_RANGE[1], DEFAULT_H_STEP
    return 150.0, 400.0, 50.0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _configure_logging(args.verbose)
    echo = _quiet if args.quiet else _status

    if args.command == "plotdata":
        return emit_plot_data(args.csv, args.out_dir, echo=echo)

    try:
        if args.command == "sweep":
            start, stop, step = _sweep_defaults(args.var)
            spec = SweepSpec(
                args.var,
                args.start if args.start is not None else start,
                args.stop if args.stop is not None else stop,
                args.step if args.step is not None else step,
            )
            return run_sweep(
                args.config,
                spec,
                args.metric or _METRIC_CHOICES,
                args.mode or ["analytic"],
                args.out,
                env_name=args.env,
                model=args.model,
                all_envs=args.all_envs,
                mc_trials=args.mc_trials,
                seed=args.seed,
                no_fading=args.no_fading,
                timing=not args.no_timing,
                optimize_h=args.optimize_h,
                workers=args.workers,
                quad=QuadratureSpec(rel_tol=args.rel_tol),
                progress=not args.quiet,
                echo=echo,
            )

        if args.command == "validate":
            return run_validation(
                args.config,
                mc_trials=args.mc_trials,
                seed=args.seed,
                tolerance=args.tolerance,
                env_name=args.env,
                model=args.model,
                workers=args.workers,
                echo=echo,
            )

        if args.command == "optimize":
            _warn_altitudes((args.h_from, args.h_to), echo)
            h_star, value = find_best_height(
                args.config,
                args.metric,
                (args.h_from, args.h_to),
                args.h_step,
                args.env,
                model=args.model,
                refine_step=None if args.no_refine else REFINE_STEP,
            )
            print(f"{args.metric} h_star_m={h_star:g} coverage={value:.6f}")
            return EXIT_OK

        params, env, _ = _load(args.config, args.env, args.model)
        _warn_altitudes((params.h,), echo)
        print(describe_regime(params))
        echo(f"ℹ️ Environment {env.label}: c={env.c:g}, b={env.b:g}")
        return EXIT_OK

    except (ConfigError, DomainError) as exc:
        echo(f"❌ Config error: {exc}")
        return EXIT_CONFIG
    except (QuadratureFailure, PrecisionLoss) as exc:
        echo(f"❌ Numerical failure: {exc}")
        return EXIT_NUMERICS
    except CoverageError as exc:  # pragma: no cover - every subclass is handled above
        echo(f"❌ {exc}")
        return EXIT_FAILED


if __name__ == "__main__":
    raise SystemExit(main())
