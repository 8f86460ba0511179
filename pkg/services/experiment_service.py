# File: services/experiment_service.py (Experiment harness: profiles, paired strategies, contact sweep, shares)

import logging
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.stats import binomtest

from config import settings
from crud.plan_crud import default_building_plan, load_building_plan
from errors import InvalidParams
from models import MINUTES_PER_DAY, MINUTES_PER_HALF_HOUR, BuildingPlan, Category, MeterSeries, SimTime
from schemas import ExperimentName, ExperimentResult, ExperimentSpec, LightingStrategy, Scenario, SeriesSummary, SummaryDocument
from services.engine_service import replication_seeds, run_replications
from services.export_service import export_service
from services.metering_service import (
    ShareWindow,
    calibrate_base_load,
    daily_peak_days,
    daytime_mean_power,
    total_wh,
    window_energy,
    with_base_load,
)

logger = logging.getLogger(__name__)


# --- Summaries ---

def summarize_series(series: MeterSeries) -> SeriesSummary:
    hh = series.half_hourly
    category_wh = {
        Category.BASE.value: float(hh.base_wh.sum()),
        Category.LIGHTS.value: float(hh.lights_wh.sum()),
        Category.COMPUTERS.value: float(hh.computers_wh.sum()),
    }
    total = float(hh.total_wh.sum())
    shares = {name: (100.0 * wh / total if total > 0 else 0.0) for name, wh in category_wh.items()}
    peak_tick = int(np.argmax(series.total_w)) if series.n_ticks else 0
    return SeriesSummary(
        seed=series.seed,
        total_wh=total,
        total_kwh=total / 1000.0,
        category_wh=category_wh,
        shares_pct=shares,
        peak_w=float(series.total_w[peak_tick]) if series.n_ticks else 0.0,
        peak_tick=peak_tick,
        peak_time=str(SimTime(peak_tick)),
        peak_half_hour_wh=float(hh.total_wh.max()) if len(hh) else 0.0,
    )


def _mean_stdev(values: Sequence[float]) -> Tuple[float, float]:
    array = np.asarray(values, dtype=float)
    stdev = float(array.std(ddof=1)) if array.size > 1 else 0.0
    return float(array.mean()), stdev


def summarize(series_list: Sequence[MeterSeries]) -> SummaryDocument:
    """Per-series totals, shares and peaks plus the cross-series mean and sample stdev."""
    if not series_list:
        raise InvalidParams("nothing to summarize")
    summaries = [summarize_series(series) for series in series_list]
    mean_total, stdev_total = _mean_stdev([s.total_wh for s in summaries])
    mean_peak, stdev_peak = _mean_stdev([s.peak_w for s in summaries])
    return SummaryDocument(
        n_series=len(summaries),
        series=summaries,
        mean_total_wh=mean_total,
        stdev_total_wh=stdev_total,
        mean_peak_w=mean_peak,
        stdev_peak_w=stdev_peak,
    )


def mean_power(series_list: Sequence[MeterSeries]) -> np.ndarray:
    return np.mean([series.total_w for series in series_list], axis=0)


# --- Experiments ---

class ExperimentContext:
    def __init__(self, spec: ExperimentSpec, plan: BuildingPlan, out_dir: Path):
        self.spec = spec
        self.plan = plan
        self.out_dir = out_dir
        self.scenario = spec.base_scenario()
        self.files: List[Path] = []

    def replicate(self, scenario: Scenario) -> List[MeterSeries]:
        return run_replications(
            scenario,
            self.spec.n_reps,
            seed_base=self.scenario.seed,
            plan=self.plan,
            population=self.spec.population,
            workers=self.spec.workers,
        )

    def write(self, frame: pd.DataFrame, name: str) -> None:
        self.files.append(export_service.write_frame(frame, self.out_dir / name))


def _baseline_automated(ctx: ExperimentContext) -> Dict[str, Any]:
    scenario = ctx.scenario.model_copy(update={"lighting_strategy": LightingStrategy.AUTOMATED})
    series = ctx.replicate(scenario)
    seeds = replication_seeds(scenario.seed, ctx.spec.n_reps)

    # Weekly profile: mean and spread of half-hourly power across replications
    hh_w = np.array([s.half_hourly.total_wh * 2.0 for s in series])
    bins = np.arange(hh_w.shape[1]) * MINUTES_PER_HALF_HOUR
    weekly = pd.DataFrame({
        "bin_start_min": bins,
        "day": [SimTime(int(b)).day_of_week.value for b in bins],
        "time": [f"{(b % MINUTES_PER_DAY) // 60:02d}:{b % 60:02d}" for b in bins],
        "mean_w": hh_w.mean(axis=0),
        "std_w": hh_w.std(axis=0, ddof=1) if len(series) > 1 else np.zeros(hh_w.shape[1]),
    })
    ctx.write(weekly, "weekly_profile.csv")

    # Daily profile: weekday against weekend, by half hour of day
    per_day = hh_w.reshape(len(series), -1, MINUTES_PER_DAY // MINUTES_PER_HALF_HOUR)
    weekend_days = np.array([day % 7 >= 5 for day in range(per_day.shape[1])])
    daily = pd.DataFrame({"bin_start_min": np.arange(per_day.shape[2]) * MINUTES_PER_HALF_HOUR})
    daily["weekday_mean_w"] = per_day[:, ~weekend_days, :].mean(axis=(0, 1)) if (~weekend_days).any() else np.nan
    daily["weekend_mean_w"] = per_day[:, weekend_days, :].mean(axis=(0, 1)) if weekend_days.any() else np.nan
    ctx.write(daily, "daily_profile.csv")

    totals = pd.DataFrame({
        "rep": range(len(series)),
        "seed": seeds,
        "total_wh": [total_wh(s) for s in series],
        "peak_w": [float(s.total_w.max()) for s in series],
    })
    ctx.write(totals, "replication_totals.csv")

    profile = mean_power(series)
    peak_days = daily_peak_days(profile, scenario.base_load_w)
    weekday_daytime = daytime_mean_power(profile, weekend=False)
    weekend_daytime = daytime_mean_power(profile, weekend=True)
    return {
        **summarize(series).model_dump(mode="json", exclude={"series"}),
        "peak_days": peak_days,
        "n_peak_days": len(peak_days),
        "weekday_daytime_mean_w": weekday_daytime,
        "weekend_daytime_mean_w": weekend_daytime,
        "weekend_to_weekday_daytime_ratio": (
            (weekend_daytime - scenario.base_load_w) / (weekday_daytime - scenario.base_load_w)
            if weekday_daytime > scenario.base_load_w else None
        ),
    }


def _staff_vs_automated(ctx: ExperimentContext) -> Dict[str, Any]:
    automated = ctx.replicate(ctx.scenario.model_copy(update={"lighting_strategy": LightingStrategy.AUTOMATED}))
    staff = ctx.replicate(ctx.scenario.model_copy(update={"lighting_strategy": LightingStrategy.STAFF_CONTROLLED}))
    seeds = replication_seeds(ctx.scenario.seed, ctx.spec.n_reps)

    automated_wh = np.array([total_wh(s) for s in automated])
    staff_wh = np.array([total_wh(s) for s in staff])
    automated_peak = np.array([float(s.half_hourly.total_wh.max()) for s in automated])
    staff_peak = np.array([float(s.half_hourly.total_wh.max()) for s in staff])
    diff = staff_wh - automated_wh
    peak_rel_diff = np.abs(staff_peak - automated_peak) / np.maximum(automated_peak, 1e-12)

    ctx.write(pd.DataFrame({
        "rep": range(len(seeds)),
        "seed": seeds,
        "automated_wh": automated_wh,
        "staff_wh": staff_wh,
        "diff_wh": diff,
        "automated_peak_hh_wh": automated_peak,
        "staff_peak_hh_wh": staff_peak,
        "peak_rel_diff": peak_rel_diff,
    }), "paired_totals.csv")

    n_higher = int((diff > 0).sum())
    n_nonzero = int((diff != 0).sum())
    p_value = float(binomtest(n_higher, n_nonzero, 0.5, alternative="two-sided").pvalue) if n_nonzero else 1.0
    logger.info(f"📊 Staff > automated in {n_higher}/{len(diff)} pairs (sign test p={p_value:.3g})")
    return {
        "n_pairs": len(diff),
        "automated_mean_wh": float(automated_wh.mean()),
        "staff_mean_wh": float(staff_wh.mean()),
        "mean_diff_wh": float(diff.mean()),
        "n_staff_higher": n_higher,
        "n_nonzero_pairs": n_nonzero,
        "sign_test_p_value": p_value,
        "max_peak_rel_diff": float(peak_rel_diff.max()),
    }


def _contact_sweep(ctx: ExperimentContext) -> Dict[str, Any]:
    levels = ctx.spec.sweep_levels()
    seeds = replication_seeds(ctx.scenario.seed, ctx.spec.n_reps)
    rows = []
    means = []
    for level in levels:
        series = ctx.replicate(ctx.scenario.model_copy(update={"contact_rate": float(level)}))
        totals = [total_wh(s) for s in series]
        rows.extend({"level": level, "rep": i, "seed": seeds[i], "total_wh": wh} for i, wh in enumerate(totals))
        mean, stdev = _mean_stdev(totals)
        means.append({"level": level, "mean_wh": mean, "std_wh": stdev})
        logger.info(f"📉 Contact rate {level}: mean {mean / 1000.0:.1f} kWh")

    ctx.write(pd.DataFrame(rows, columns=["level", "rep", "seed", "total_wh"]), "sweep_totals.csv")
    ctx.write(pd.DataFrame(means, columns=["level", "mean_wh", "std_wh"]), "sweep_summary.csv")

    ordered = sorted(means, key=lambda row: row["level"])
    mean_values = [row["mean_wh"] for row in ordered]
    return {
        "lighting_strategy": ctx.scenario.lighting_strategy.value,
        "levels": [row["level"] for row in ordered],
        "mean_wh": mean_values,
        "nonincreasing": all(b <= a for a, b in zip(mean_values, mean_values[1:])),
        "highest_below_lowest": mean_values[-1] < mean_values[0],
    }


def _category_breakdown(ctx: ExperimentContext) -> Dict[str, Any]:
    series = ctx.replicate(ctx.scenario)
    calibration = calibrate_base_load(series)

    def shares_over(runs: Sequence[MeterSeries]) -> Dict[str, Dict[str, float]]:
        out = {}
        for window in ShareWindow:
            pooled = {category: 0.0 for category in Category}
            for run in runs:
                for category, wh in window_energy(run, window).items():
                    pooled[category] += wh
            total = sum(pooled.values())
            out[window.value] = {c.value: (100.0 * wh / total if total > 0 else 0.0) for c, wh in pooled.items()}
        return out

    calibrated = [with_base_load(s, calibration.base_load_w) for s in series]
    hh = np.array([[s.half_hourly.base_wh, s.half_hourly.lights_wh, s.half_hourly.computers_wh] for s in calibrated])
    per_bin = hh.mean(axis=0)
    bin_total = per_bin.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        pct = np.where(bin_total > 0, 100.0 * per_bin / bin_total, 0.0)
    ctx.write(pd.DataFrame({
        "bin_start_min": np.arange(per_bin.shape[1]) * MINUTES_PER_HALF_HOUR,
        "base_pct": pct[0],
        "lights_pct": pct[1],
        "computers_pct": pct[2],
    }), "share_series.csv")

    return {
        "scenario_base_load_w": ctx.scenario.base_load_w,
        "window_shares_pct": shares_over(series),
        "calibration": {
            "procedure": (
                f"sweep base_load_w over {settings.CALIBRATION_STEPS} points in "
                f"[0, {settings.CALIBRATION_MAX_BASE_W:.0f}] W, minimising the nights-and-weekends base share error"
            ),
            "targets": {
                "night_base_share": settings.TARGET_NIGHT_BASE_SHARE,
                "day_computer_share": settings.TARGET_DAY_COMPUTER_SHARE,
                "day_light_share": settings.TARGET_DAY_LIGHT_SHARE,
            },
            **calibration.as_dict(),
        },
        "calibrated_window_shares_pct": shares_over(calibrated),
    }


_EXPERIMENTS: Dict[ExperimentName, Callable[[ExperimentContext], Dict[str, Any]]] = {
    ExperimentName.BASELINE_AUTOMATED: _baseline_automated,
    ExperimentName.STAFF_VS_AUTOMATED: _staff_vs_automated,
    ExperimentName.CONTACT_SWEEP: _contact_sweep,
    ExperimentName.CATEGORY_BREAKDOWN: _category_breakdown,
}


def run_experiment(
    spec: ExperimentSpec,
    plan: Optional[BuildingPlan] = None,
    out_dir: Optional[str] = None,
) -> ExperimentResult:
    """Run one named experiment and write its CSVs and summary.json under <out>/<name>/."""
    if plan is None:
        plan = load_building_plan(spec.plan) if spec.plan else default_building_plan()
    root = Path(out_dir or spec.output_dir or settings.OUTPUT_DIR)
    ctx = ExperimentContext(spec, plan, root / spec.name.value)

    logger.info(f"🧪 Experiment {spec.name.value}: {spec.n_reps} replications, output {ctx.out_dir}")
    summary = _EXPERIMENTS[spec.name](ctx)
    summary = {"experiment": spec.name.value, "n_reps": spec.n_reps, "seed_base": ctx.scenario.seed, **summary}
    ctx.files.append(export_service.write_json(summary, ctx.out_dir / "summary.json"))

    return ExperimentResult(
        name=spec.name,
        output_dir=str(ctx.out_dir),
        files=[str(path) for path in ctx.files],
        summary=summary,
    )
