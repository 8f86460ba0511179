# File: services/export_service.py (CSV and JSON artifacts for runs and experiments)

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Union

import pandas as pd
from pydantic import BaseModel

from models import MINUTES_PER_HALF_HOUR, BetaReport, EventLog, MeterSeries

logger = logging.getLogger(__name__)

METER_COLUMNS = ["timestamp_min", "total_w", "base_w", "lights_w", "computers_w"]
HALF_HOURLY_COLUMNS = ["bin_start_min", "wh_total", "wh_base", "wh_lights", "wh_computers"]
BETA_COLUMNS = ["appliance_id", "kind", "c_fi_wh", "actual_wh", "beta"]
EVENT_COLUMNS = ["tick", "agent_id", "event_kind", "detail"]


class ExportService:
    """Writes run artifacts. Files are rewritten whole, so re-runs give identical bytes."""

    def ensure_dir(self, out_dir: Union[str, Path]) -> Path:
        path = Path(out_dir)
        path.mkdir(parents=True, exist_ok=True)
        return path

    def write_frame(self, frame: pd.DataFrame, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False, lineterminator="\n")
        logger.debug(f"💾 Wrote {len(frame)} rows to {path}")
        return path

    def meter_frame(self, series: MeterSeries) -> pd.DataFrame:
        return pd.DataFrame({
            "timestamp_min": range(series.n_ticks),
            "total_w": series.total_w,
            "base_w": series.base_w,
            "lights_w": series.lights_w,
            "computers_w": series.computers_w,
        }, columns=METER_COLUMNS)

    def half_hourly_frame(self, series: MeterSeries) -> pd.DataFrame:
        hh = series.half_hourly
        return pd.DataFrame({
            "bin_start_min": [i * MINUTES_PER_HALF_HOUR for i in range(len(hh))],
            "wh_total": hh.total_wh,
            "wh_base": hh.base_wh,
            "wh_lights": hh.lights_wh,
            "wh_computers": hh.computers_wh,
        }, columns=HALF_HOURLY_COLUMNS)

    def beta_frame(self, report: BetaReport) -> pd.DataFrame:
        return pd.DataFrame(
            [(e.appliance_id, e.kind, e.c_fi_wh, e.actual_wh, e.beta) for e in report.entries],
            columns=BETA_COLUMNS,
        )

    def event_frame(self, log: EventLog) -> pd.DataFrame:
        return pd.DataFrame(
            [(e.tick, str(e.agent_id), e.kind.value, e.detail) for e in log],
            columns=EVENT_COLUMNS,
        )

    def write_json(self, payload: Union[BaseModel, Dict[str, Any]], path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        data = payload.model_dump(mode="json") if isinstance(payload, BaseModel) else payload
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(data, handle, indent=2, sort_keys=True, default=str)
            handle.write("\n")
        return path

    def write_run(
        self,
        out_dir: Union[str, Path],
        series: MeterSeries,
        report: BetaReport,
        log: EventLog,
        summary: Union[BaseModel, Dict[str, Any]],
    ) -> List[Path]:
        """
        Write the artifacts of a single run.

        Args:
            out_dir: Target directory, created if missing
            series: Meter series of the run
            report: Utilisation factors from the event log
            log: Event log of the recorded horizon
            summary: Summary document for summary.json

        Returns:
            Paths of the written files
        """
        out = self.ensure_dir(out_dir)
        paths = [
            self.write_frame(self.meter_frame(series), out / "meter.csv"),
            self.write_frame(self.half_hourly_frame(series), out / "half_hourly.csv"),
            self.write_frame(self.beta_frame(report), out / "betas.csv"),
            self.write_frame(self.event_frame(log), out / "events.csv"),
            self.write_json(summary, out / "summary.json"),
        ]
        logger.info(f"📁 Run artifacts written to {out}")
        return paths


export_service = ExportService()
