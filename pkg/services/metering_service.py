# File: services/metering_service.py (Power, half-hourly energy, utilisation factors, shares and calibration)

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from config import settings
from errors import EmptyWindow, IncompleteFinalBin, MissingTimeline, ReconstructionMismatch
from models import (
    COMPUTER_POWER_W,
    COMPUTER_RATED_W,
    LIGHT_RATED_W,
    MINUTES_PER_DAY,
    MINUTES_PER_HALF_HOUR,
    BetaEntry,
    BetaReport,
    BuildingPlan,
    Category,
    ComputerStatus,
    EventKind,
    EventLog,
    HalfHourlySeries,
    LightStatus,
    MeterSeries,
)

logger = logging.getLogger(__name__)

RECONSTRUCTION_TOLERANCE = 1e-9

# Power an appliance draws after each state event
_EVENT_POWER_W: Dict[EventKind, float] = {
    EventKind.LIGHT_ON: LIGHT_RATED_W,
    EventKind.LIGHT_OFF: 0.0,
    EventKind.COMPUTER_ON: COMPUTER_POWER_W[ComputerStatus.ON],
    EventKind.COMPUTER_STANDBY: COMPUTER_POWER_W[ComputerStatus.STANDBY],
    EventKind.COMPUTER_OFF: COMPUTER_POWER_W[ComputerStatus.OFF],
}


class ShareWindow(str, Enum):
    ALL = "all"
    WEEKDAY_DAYTIME = "weekday_daytime"
    NIGHTS_AND_WEEKENDS = "nights_and_weekends"


Window = Union[ShareWindow, str, Tuple[int, int], np.ndarray]


# --- Instantaneous power ---

def instantaneous_power(world, base_load_w: float) -> Tuple[float, Dict[Category, float]]:
    """Meter reading now: base + 60 W per lit light + 70/25 W per computer On/StandBy."""
    lights_on = sum(
        len(world.plan.room(room_id).light_ids)
        for room_id, bank in world.lights.items()
        if bank.state is LightStatus.ON
    )
    computers_w = sum(computer.power_w for computer in world.computers.values())
    per_category = {
        Category.BASE: float(base_load_w),
        Category.LIGHTS: LIGHT_RATED_W * lights_on,
        Category.COMPUTERS: float(computers_w),
    }
    return sum(per_category.values()), per_category


# --- Half-hourly aggregation ---

def aggregate_half_hourly(tick_power_w: Sequence[float]) -> np.ndarray:
    """Wh per half hour from one-minute power samples."""
    power = np.asarray(tick_power_w, dtype=float)
    if power.size % MINUTES_PER_HALF_HOUR:
        raise IncompleteFinalBin(
            f"{power.size} ticks do not fill whole half hours ({power.size % MINUTES_PER_HALF_HOUR} left over)"
        )
    return power.reshape(-1, MINUTES_PER_HALF_HOUR).sum(axis=1) / 60.0


def build_meter_series(
    base_load_w: float,
    lights_w: np.ndarray,
    computers_w: np.ndarray,
    seed: Optional[int] = None,
) -> MeterSeries:
    lights_w = np.asarray(lights_w, dtype=float)
    computers_w = np.asarray(computers_w, dtype=float)
    base_w = np.full(lights_w.shape, float(base_load_w))
    total_w = base_w + lights_w + computers_w
    half_hourly = HalfHourlySeries(
        total_wh=aggregate_half_hourly(total_w),
        base_wh=aggregate_half_hourly(base_w),
        lights_wh=aggregate_half_hourly(lights_w),
        computers_wh=aggregate_half_hourly(computers_w),
    )
    return MeterSeries(base_w, lights_w, computers_w, total_w, half_hourly, float(base_load_w), seed)


def with_base_load(series: MeterSeries, base_load_w: float) -> MeterSeries:
    """Same flexible load under a different base load."""
    return build_meter_series(base_load_w, series.lights_w, series.computers_w, series.seed)


def total_wh(series: MeterSeries) -> float:
    return float(series.half_hourly.total_wh.sum())


# --- Utilisation factors ---

def _appliance_kinds(plan: BuildingPlan) -> Dict[str, str]:
    kinds = {light_id: "light" for light_id in plan.light_ids}
    kinds.update({pc_id: "computer" for pc_id in plan.computer_ids})
    return kinds


def compute_betas(event_log: EventLog, horizon_ticks: int, plan: BuildingPlan, base_load_w: float = 0.0) -> BetaReport:
    """
    Integrate every light and computer timeline from the event log. An appliance
    draws, during tick t, the power of its state after tick t's events.
    """
    if event_log.horizon_ticks is None or event_log.horizon_ticks < horizon_ticks:
        raise MissingTimeline(
            f"log covers {event_log.horizon_ticks} ticks, {horizon_ticks} requested"
        )

    kinds = _appliance_kinds(plan)
    changes: Dict[str, List[Tuple[int, float]]] = {appliance_id: [] for appliance_id in kinds}
    for event in event_log:
        power = _EVENT_POWER_W.get(event.kind)
        if power is None or event.tick >= horizon_ticks:
            continue
        timeline = changes.get(str(event.agent_id))
        if timeline is None:
            raise MissingTimeline(f"log has events for unknown appliance '{event.agent_id}'")
        if timeline and timeline[-1][0] == event.tick:
            timeline[-1] = (event.tick, power)
        else:
            timeline.append((event.tick, power))

    hours = horizon_ticks / 60.0
    entries: List[BetaEntry] = []
    for appliance_id in sorted(kinds):
        kind = kinds[appliance_id]
        rated_w = LIGHT_RATED_W if kind == "light" else COMPUTER_RATED_W
        c_fi_wh = rated_w * hours
        energy_wmin = 0.0
        current_w, since = 0.0, 0
        for tick, power in changes[appliance_id]:
            energy_wmin += current_w * (tick - since)
            current_w, since = power, tick
        energy_wmin += current_w * (horizon_ticks - since)
        actual_wh = energy_wmin / 60.0
        beta = actual_wh / c_fi_wh if c_fi_wh > 0 else 0.0
        entries.append(BetaEntry(appliance_id, kind, c_fi_wh, actual_wh, beta))

    return BetaReport(tuple(entries), float(base_load_w) * hours, horizon_ticks)


def reconstruct_total(report: BetaReport, meter_total_wh: Optional[float] = None) -> float:
    """C_base + sum(beta_i * C_fi). Checked against the meter when its total is given."""
    total = report.c_base_wh + math.fsum(entry.beta * entry.c_fi_wh for entry in report.entries)
    if meter_total_wh is not None:
        scale = max(abs(meter_total_wh), abs(total), 1.0)
        if abs(total - meter_total_wh) > RECONSTRUCTION_TOLERANCE * scale:
            logger.error(f"Reconstruction mismatch: betas give {total!r} Wh, meter gives {meter_total_wh!r} Wh")
            raise ReconstructionMismatch(
                f"beta reconstruction {total:.6f} Wh differs from metered {meter_total_wh:.6f} Wh"
            )
    return total


# --- Windows and shares ---

def window_mask(n_ticks: int, window: Window) -> np.ndarray:
    """Boolean tick mask for a named window, a [start, end) tick range or a ready mask."""
    if isinstance(window, np.ndarray):
        if window.shape != (n_ticks,):
            raise EmptyWindow(f"mask of shape {window.shape} for a {n_ticks}-tick series")
        return window.astype(bool)
    if isinstance(window, tuple):
        start, end = window
        mask = np.zeros(n_ticks, dtype=bool)
        mask[max(0, start):max(0, min(end, n_ticks))] = True
        return mask

    window = ShareWindow(window)
    ticks = np.arange(n_ticks)
    minute = ticks % MINUTES_PER_DAY
    weekday = (ticks // MINUTES_PER_DAY) % 7 < 5
    if window is ShareWindow.ALL:
        return np.ones(n_ticks, dtype=bool)
    if window is ShareWindow.WEEKDAY_DAYTIME:
        return weekday & (minute >= settings.DAYTIME_START_MIN) & (minute < settings.DAYTIME_END_MIN)
    return ~weekday | (minute < settings.NIGHT_END_MIN) | (minute >= settings.NIGHT_START_MIN)


def window_energy(series: MeterSeries, window: Window) -> Dict[Category, float]:
    mask = window_mask(series.n_ticks, window)
    if not mask.any():
        raise EmptyWindow(f"window {window!r} selects no ticks")
    return {category: float(series.category_w(category)[mask].sum()) / 60.0 for category in Category}


def decompose_shares(series: MeterSeries, window: Window = ShareWindow.ALL) -> Dict[Category, float]:
    """Percentage of the window's energy per category."""
    energy = window_energy(series, window)
    total = sum(energy.values())
    if total <= 0:
        raise EmptyWindow(f"window {window!r} holds no energy")
    return {category: 100.0 * wh / total for category, wh in energy.items()}


# --- Base-load calibration ---

@dataclass(frozen=True)
class CalibrationResult:
    base_load_w: float
    night_base_share: float
    day_computer_share: float
    day_light_share: float
    night_base_error: float
    day_computer_error: float
    day_light_error: float

    def as_dict(self) -> Dict[str, float]:
        return dict(self.__dict__)


def calibrate_base_load(
    series_list: Sequence[MeterSeries],
    target_night_base_share: Optional[float] = None,
    max_base_w: Optional[float] = None,
    steps: Optional[int] = None,
) -> CalibrationResult:
    """
    Sweep the base load and keep the value whose nights-and-weekends Base share
    is closest to the target. Flexible load does not depend on the base load,
    so one set of runs serves the whole grid.
    """
    if not series_list:
        raise EmptyWindow("calibration needs at least one series")
    target = settings.TARGET_NIGHT_BASE_SHARE if target_night_base_share is None else target_night_base_share
    max_base_w = settings.CALIBRATION_MAX_BASE_W if max_base_w is None else max_base_w
    steps = settings.CALIBRATION_STEPS if steps is None else steps

    def pooled(window: ShareWindow) -> Tuple[float, float, float]:
        minutes = lights = computers = 0.0
        for series in series_list:
            mask = window_mask(series.n_ticks, window)
            minutes += mask.sum()
            lights += series.lights_w[mask].sum() / 60.0
            computers += series.computers_w[mask].sum() / 60.0
        return minutes, lights, computers

    night_minutes, night_lights, night_computers = pooled(ShareWindow.NIGHTS_AND_WEEKENDS)
    day_minutes, day_lights, day_computers = pooled(ShareWindow.WEEKDAY_DAYTIME)

    grid = np.linspace(0.0, max_base_w, steps)
    night_base = grid * night_minutes / 60.0
    with np.errstate(invalid="ignore", divide="ignore"):
        night_share = np.where(
            night_base + night_lights + night_computers > 0,
            night_base / (night_base + night_lights + night_computers),
            0.0,
        )
    best = int(np.argmin(np.abs(night_share - target)))
    base_load_w = float(grid[best])

    day_base = base_load_w * day_minutes / 60.0
    day_total = day_base + day_lights + day_computers
    day_computer_share = day_computers / day_total if day_total > 0 else 0.0
    day_light_share = day_lights / day_total if day_total > 0 else 0.0

    result = CalibrationResult(
        base_load_w=base_load_w,
        night_base_share=float(night_share[best]),
        day_computer_share=float(day_computer_share),
        day_light_share=float(day_light_share),
        night_base_error=float(night_share[best] - target),
        day_computer_error=float(day_computer_share - settings.TARGET_DAY_COMPUTER_SHARE),
        day_light_error=float(day_light_share - settings.TARGET_DAY_LIGHT_SHARE),
    )
    logger.info(
        f"⚖️ Calibrated base load {base_load_w:.0f} W: night base share {result.night_base_share:.3f}, "
        f"day computers {result.day_computer_share:.3f}, day lights {result.day_light_share:.3f}"
    )
    return result


# --- Profile statistics ---

def daily_peak_days(total_w: np.ndarray, base_load_w: float) -> List[int]:
    """Days whose maximum power rises above halfway between the base and the overall peak."""
    days = np.asarray(total_w, dtype=float).reshape(-1, MINUTES_PER_DAY)
    daily_max = days.max(axis=1)
    threshold = base_load_w + 0.5 * (daily_max.max() - base_load_w)
    return [int(day) for day in np.flatnonzero(daily_max > threshold)]


def daytime_mean_power(total_w: np.ndarray, weekend: bool) -> float:
    """Mean power over daytime hours of weekend or weekday days; nan when there are none."""
    total_w = np.asarray(total_w, dtype=float)
    ticks = np.arange(total_w.size)
    minute = ticks % MINUTES_PER_DAY
    is_weekend = (ticks // MINUTES_PER_DAY) % 7 >= 5
    mask = (is_weekend == weekend) & (minute >= settings.DAYTIME_START_MIN) & (minute < settings.DAYTIME_END_MIN)
    return float(total_w[mask].mean()) if mask.any() else float("nan")
