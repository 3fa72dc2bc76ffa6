"""
Batch coverage sweeps over ABS height, stadium distance and environment.

``CoverageSweep`` evaluates every (point, metric) pair analytically and,
optionally, with the Monte Carlo oracle, then writes the rows to CSV.
"""

from __future__ import annotations

import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Literal, Sequence

import numpy as np
import pandas as pd
from tqdm import tqdm

from .analytic import Metric, coverage
from .errors import InvalidValue, PrecisionLoss, QuadratureFailure
from .montecarlo import DEFAULT_TRIALS, estimate_many
from .params import AerialEnvironment, SystemParams
from .power import classify_regime
from .quadrature import QuadratureSpec

logger = logging.getLogger(__name__)

CSV_COLUMNS = ["h_m", "d_m", "env", "metric", "analytic", "analytic_err", "mc_mean", "mc_ci95", "regime", "wall_ms"]
NOFADE_COLUMN = "mc_nofade_mean"

DEFAULT_H_RANGE = (200.0, 1000.0)
DEFAULT_H_STEP = 10.0
REFINE_STEP = 1.0

Mode = Literal["analytic", "mc"]


@dataclass(frozen=True)
class SweepSpec:
    """Inclusive grid ``start, start + step, ..., stop`` over ``h`` or ``d``."""

    variable: Literal["h", "d"]
    start: float
    stop: float
    step: float

    def __post_init__(self) -> None:
        if self.variable not in ("h", "d"):
            raise InvalidValue("var", f"sweep variable must be 'h' or 'd', got {self.variable!r}")
        if not self.step > 0:
            raise InvalidValue("step", "step > 0 required")
        if not self.start < self.stop:
            raise InvalidValue("from", "from < to required")

    def values(self) -> list[float]:
        count = int(math.floor((self.stop - self.start) / self.step + 1e-9)) + 1
        return [self.start + i * self.step for i in range(count)]


@dataclass
class SweepRow:
    h: float
    d: float
    env_name: str
    metric: str
    analytic: float | None = None
    analytic_err: float | None = None
    mc_mean: float | None = None
    mc_half_width: float | None = None
    regime: str = ""
    wall_ms: int = 0
    mc_nofade_mean: float | None = None

    def as_record(self, with_nofade: bool = False) -> dict[str, object]:
        record: dict[str, object] = {
            "h_m": self.h,
            "d_m": self.d,
            "env": self.env_name,
            "metric": self.metric,
            "analytic": self.analytic,
            "analytic_err": self.analytic_err,
            "mc_mean": self.mc_mean,
            "mc_ci95": self.mc_half_width,
            "regime": self.regime,
            "wall_ms": self.wall_ms,
        }
        if with_nofade:
            record[NOFADE_COLUMN] = self.mc_nofade_mean
        return record


@dataclass(frozen=True)
class PointTask:
    """Everything one worker needs to produce the rows of one sweep point."""

    params: SystemParams
    env: AerialEnvironment
    metrics: tuple[Metric, ...]
    modes: frozenset[str]
    quad: QuadratureSpec
    mc_trials: int
    seed: int
    no_fading: bool
    timing: bool
    optimize_h: bool
    h_range: tuple[float, float]
    h_step: float


def best_height(
    metric: Metric | str,
    p: SystemParams,
    env: AerialEnvironment,
    h_range: tuple[float, float] = DEFAULT_H_RANGE,
    h_step: float = DEFAULT_H_STEP,
    refine_step: float | None = REFINE_STEP,
    quad: QuadratureSpec | None = None,
) -> tuple[float, float]:
    """Grid argmax of the analytic coverage over ABS height.

    The coarse grid is refined at ``refine_step`` within one coarse step of
    its argmax. Ties go to the smallest height.
    """
    metric = Metric.parse(metric)
    low, high = h_range
    if not h_step > 0:
        raise InvalidValue("h_step", "h_step > 0 required")
    if not 0 < low <= high:
        raise InvalidValue("h_range", "0 < low <= high required")

    def scan(grid: Sequence[float]) -> tuple[float, float]:
        values = np.array([coverage(metric, p.replace(h=h), env, quad).value for h in grid])
        best = int(np.argmax(values))
        return grid[best], float(values[best])

    coarse = SweepSpec("h", low, high, h_step).values() if high > low else [low]
    h_star, value = scan(coarse)
    if refine_step is not None and refine_step < h_step and high > low:
        fine_low = max(low, h_star - h_step)
        fine_high = min(high, h_star + h_step)
        h_star, value = scan(SweepSpec("h", fine_low, fine_high, refine_step).values())
    logger.info("Best height for %s in %s: %.1f m (coverage %.6f)", metric.value, env.label, h_star, value)
    return h_star, value


def evaluate_point(task: PointTask) -> tuple[list[SweepRow], list[str]]:
    """Rows for one (h, d, env) point plus the failures met on the way."""
    p, env = task.params, task.env
    rows: list[SweepRow] = []
    failures: list[str] = []

    mc = {}
    mc_nofade = {}
    mc_ms = 0.0
    if "mc" in task.modes and not task.optimize_h:
        started = time.perf_counter()
        mc = estimate_many(task.metrics, p, env, task.mc_trials, task.seed)
        if task.no_fading:
            mc_nofade = estimate_many(task.metrics, p, env, task.mc_trials, task.seed, faded=False)
        mc_ms = (time.perf_counter() - started) * 1000.0 / len(task.metrics)

    for metric in task.metrics:
        started = time.perf_counter()
        point = p
        row = SweepRow(h=p.h, d=p.d, env_name=env.label, metric=metric.value)
        try:
            if task.optimize_h:
                h_star, _ = best_height(metric, p, env, task.h_range, task.h_step, quad=task.quad)
                point = p.replace(h=h_star)
                row.h = h_star
            if "analytic" in task.modes:
                result = coverage(metric, point, env, task.quad)
                row.analytic, row.analytic_err = result.value, result.est_error
        except (QuadratureFailure, PrecisionLoss) as exc:
            failures.append(f"{metric.value} at h={row.h:g} d={p.d:g} ({env.label}): {exc}")

        if "mc" in task.modes:
            if task.optimize_h:
                mc[metric] = estimate_many([metric], point, env, task.mc_trials, task.seed)[metric]
                if task.no_fading:
                    unfaded = estimate_many([metric], point, env, task.mc_trials, task.seed, faded=False)
                    mc_nofade[metric] = unfaded[metric]
            row.mc_mean = mc[metric].mean
            row.mc_half_width = mc[metric].half_width_95
            if task.no_fading:
                row.mc_nofade_mean = mc_nofade[metric].mean

        row.regime = classify_regime(point).label
        if task.timing:
            row.wall_ms = int(round((time.perf_counter() - started) * 1000.0 + mc_ms))
        rows.append(row)
    return rows, failures


class CoverageSweep:
    """Run a sweep and save it.

    Example:
        >>> sweep = CoverageSweep(params, [environment(1, "urban")], SweepSpec("h", 200, 1000, 25))
        >>> sweep.process()
        >>> sweep.save_csv("urban_h.csv")
    """

    def __init__(
        self,
        params: SystemParams,
        environments: Sequence[AerialEnvironment],
        spec: SweepSpec,
        metrics: Iterable[Metric | str] = tuple(Metric),
        modes: Iterable[Mode] = ("analytic",),
        quad: QuadratureSpec | None = None,
        mc_trials: int = DEFAULT_TRIALS,
        seed: int = 0,
        no_fading: bool = False,
        timing: bool = True,
        optimize_h: bool = False,
        h_range: tuple[float, float] = DEFAULT_H_RANGE,
        h_step: float = DEFAULT_H_STEP,
        workers: int = 1,
        progress: bool = False,
        echo: Callable[[str], None] | None = None,
    ) -> None:
        self.params = params
        self.environments = list(environments)
        self.spec = spec
        self.metrics = tuple(dict.fromkeys(Metric.parse(m) for m in metrics))
        self.modes = frozenset(modes)
        if "mc" in self.modes:
            # simulated rows always carry the analytic value beside them
            self.modes |= {"analytic"}
        self.quad = quad or QuadratureSpec()
        self.mc_trials = mc_trials
        self.seed = seed
        self.no_fading = no_fading
        self.timing = timing
        self.optimize_h = optimize_h
        self.h_range = h_range
        self.h_step = h_step
        self.workers = max(1, workers)
        self.progress = progress
        self.echo = echo or (lambda message: None)

        self.rows: list[SweepRow] = []
        self.failures: list[str] = []

        if not self.metrics:
            raise InvalidValue("metric", "at least one metric is required")
        if not self.modes or not self.modes <= {"analytic", "mc"}:
            raise InvalidValue("modes", "modes must be a non-empty subset of {analytic, mc}")
        if optimize_h and spec.variable != "d":
            raise InvalidValue("optimize_h", "height optimisation only applies to d sweeps")
        if "mc" in self.modes and mc_trials < 1:
            raise InvalidValue("mc_trials", "mc_trials >= 1 required")

    def points(self) -> list[tuple[SystemParams, AerialEnvironment]]:
        """Validated parameter sets in output order (environment-major)."""
        points = []
        for env in self.environments:
            for value in self.spec.values():
                points.append((self.params.replace(**{self.spec.variable: value}), env))
        return points

    def _tasks(self) -> list[PointTask]:
        return [
            PointTask(
                params=p,
                env=env,
                metrics=self.metrics,
                modes=self.modes,
                quad=self.quad,
                mc_trials=self.mc_trials,
                seed=self.seed,
                no_fading=self.no_fading,
                timing=self.timing,
                optimize_h=self.optimize_h,
                h_range=self.h_range,
                h_step=self.h_step,
            )
            for p, env in self.points()
        ]

    def process(self) -> bool:
        """Evaluate every point. Returns ``False`` when some rows failed."""
        tasks = self._tasks()
        self.echo(
            f"🛰️ Sweeping {self.spec.variable} over {len(tasks)} point(s) x {len(self.metrics)} metric(s) "
            f"[{', '.join(sorted(self.modes))}]"
        )
        self.rows, self.failures = [], []
        bar = tqdm(total=len(tasks), disable=not self.progress, file=sys.stderr, unit="pt")
        try:
            if self.workers > 1 and len(tasks) > 1:
                with ProcessPoolExecutor(max_workers=self.workers) as pool:
                    for rows, failures in pool.map(evaluate_point, tasks):
                        self._collect(rows, failures)
                        bar.update()
            else:
                for task in tasks:
                    self._collect(*evaluate_point(task))
                    bar.update()
        finally:
            bar.close()

        for failure in self.failures:
            self.echo(f"⚠️ {failure}")
        return not self.failures

    def _collect(self, rows: list[SweepRow], failures: list[str]) -> None:
        self.rows.extend(rows)
        self.failures.extend(failures)

    def to_frame(self) -> pd.DataFrame:
        columns = CSV_COLUMNS + ([NOFADE_COLUMN] if self.no_fading else [])
        records = [row.as_record(self.no_fading) for row in self.rows]
        return pd.DataFrame.from_records(records, columns=columns)

    def save_csv(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False, na_rep="NA", lineterminator="\n")
        self.echo(f"✅ Wrote {len(self.rows)} rows to {path}")
        return path

