# File: schemas.py (JSON documents: plans, populations, scenarios, experiments, summaries)

import json
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Type, TypeVar, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from config import settings
from errors import MalformedDocument
from models import RoomKind

DocumentT = TypeVar("DocumentT", bound=BaseModel)

FRACTION_TOLERANCE = 1e-9


def read_json(path: Union[str, Path]) -> Any:
    """Read a JSON file, turning IO and syntax problems into MalformedDocument."""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return json.load(handle)
    except FileNotFoundError:
        raise MalformedDocument("file not found", context=str(path))
    except json.JSONDecodeError as e:
        raise MalformedDocument(f"invalid JSON at line {e.lineno} column {e.colno}: {e.msg}", context=str(path))


def read_json_object(path: Union[str, Path]) -> Dict[str, Any]:
    data = read_json(path)
    if not isinstance(data, dict):
        raise MalformedDocument("<root>: expected a JSON object", context=str(path))
    return data


def validate_document(model: Type[DocumentT], data: Any, source: str = "<document>") -> DocumentT:
    """Validate raw JSON data, reporting the first failing path and key."""
    try:
        return model.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        location = ".".join(str(part) for part in first["loc"]) or "<root>"
        raise MalformedDocument(f"{location}: {first['msg']}", context=source)


def load_document(model: Type[DocumentT], path: Union[str, Path]) -> DocumentT:
    return validate_document(model, read_json(path), source=str(path))


# --- Building plan ---

class RoomDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    id: str = Field(min_length=1)
    kind: RoomKind
    # Either explicit appliance ids or a count to generate ids from
    lights: Union[List[str], int] = 0
    computers: Union[List[str], int] = 0

    @field_validator("lights", "computers")
    @classmethod
    def validate_counts(cls, v):
        if isinstance(v, int) and v < 0:
            raise ValueError("appliance counts must be >= 0")
        return v


class OccupantDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    user_id: int = Field(ge=0)
    office_id: str


class ApplianceDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    id: str = Field(min_length=1)
    kind: Literal["light", "computer"]


class BuildingPlanDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    rooms: List[RoomDocument]
    occupants: Optional[List[OccupantDocument]] = None
    appliances: Optional[List[ApplianceDocument]] = None
    energy_users: Optional[int] = Field(default=None, ge=0)
    base_appliances: Dict[str, int] = Field(default_factory=dict)


# --- Population ---

class PopulationSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n_users: int = Field(default=213, ge=0)
    # EarlyBird, TimetableComplier, FlexibleWorker
    work_mix: Tuple[float, float, float] = (0.08, 0.53, 0.39)
    # Champion, Saver, Regular, Big
    awareness_mix: Tuple[float, float, float, float] = (0.01, 0.08, 0.31, 0.60)
    p_weekend: float = Field(default=0.02, ge=0.0, le=1.0)

    @field_validator("work_mix", "awareness_mix")
    @classmethod
    def validate_mix(cls, v):
        if any(f < 0.0 or f > 1.0 for f in v):
            raise ValueError("fractions must lie in [0, 1]")
        if abs(sum(v) - 1.0) > FRACTION_TOLERANCE:
            raise ValueError(f"fractions must sum to 1 (got {sum(v)!r})")
        return v


# --- Scenario ---

class LightingStrategy(str, Enum):
    AUTOMATED = "automated"
    STAFF_CONTROLLED = "staff_controlled"


class BehaviorParams(BaseModel):
    model_config = ConfigDict(extra="forbid")

    corridor_timeout: int = Field(default=2, ge=1)
    switch_on_timeout: int = Field(default=2, ge=1)
    standby_probability: float = Field(default=0.05, gt=0.0, le=1.0)
    vacancy_timeout: int = Field(default=20, ge=1)
    other_room_min: int = Field(default=1, ge=1)
    other_room_max: int = Field(default=10, ge=1)
    excursions_per_day: float = Field(default=2.0, ge=0.0)
    meeting_probability: float = Field(default=0.3, ge=0.0, le=1.0)
    meeting_min: int = Field(default=30, ge=20)
    meeting_max: int = Field(default=120, ge=20)
    working_minutes_per_day: int = Field(default=480, ge=1)

    @model_validator(mode="after")
    def validate_ranges(self):
        if self.other_room_max < self.other_room_min:
            raise ValueError("other_room_max must be >= other_room_min")
        if self.meeting_max < self.meeting_min:
            raise ValueError("meeting_max must be >= meeting_min")
        return self


class NetworkParams(BaseModel):
    model_config = ConfigDict(extra="forbid")

    k: int = Field(default=4, ge=1)
    p_rewire: float = Field(default=0.1, ge=0.0, le=1.0)
    edges_file: Optional[str] = None


class Scenario(BaseModel):
    model_config = ConfigDict(extra="forbid")

    lighting_strategy: LightingStrategy = LightingStrategy.AUTOMATED
    threshold: float = Field(default=50.0, ge=0.0, le=100.0)
    contact_rate: float = Field(default=0.0, ge=0.0)
    awareness_delta: float = Field(default=1.0, ge=0.0)
    base_load_w: float = Field(default=3000.0, ge=0.0)
    horizon_days: int = Field(default=settings.DEFAULT_HORIZON_DAYS, ge=1)
    seed: int = Field(default=settings.DEFAULT_SEED, ge=0)
    tick_minutes: Literal[1] = 1
    warmup_days: int = Field(default=0, ge=0)
    behavior: BehaviorParams = Field(default_factory=BehaviorParams)
    network: NetworkParams = Field(default_factory=NetworkParams)

    @property
    def horizon_ticks(self) -> int:
        return self.horizon_days * 1440


class NetworkDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n: int = Field(ge=0)
    edges: List[Tuple[int, int]] = Field(default_factory=list)


# --- Experiments ---

class ExperimentName(str, Enum):
    BASELINE_AUTOMATED = "baseline_automated"
    STAFF_VS_AUTOMATED = "staff_vs_automated"
    CONTACT_SWEEP = "contact_sweep"
    CATEGORY_BREAKDOWN = "category_breakdown"


DEFAULT_CONTACT_LEVELS: Tuple[float, ...] = (0.0, 1.0, 4.0, 16.0)


class ExperimentSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: ExperimentName
    scenario: Dict[str, Any] = Field(default_factory=dict)
    n_reps: int = Field(default=20, ge=1)
    output_dir: Optional[str] = None
    levels: Optional[List[float]] = None
    plan: Optional[str] = None
    population: PopulationSpec = Field(default_factory=PopulationSpec)
    workers: int = Field(default=1, ge=1)

    @model_validator(mode="after")
    def validate_levels(self):
        if self.levels is not None:
            if len(self.levels) < 2:
                raise ValueError("sweep specs need at least two levels")
            if any(level < 0 for level in self.levels):
                raise ValueError("contact-rate levels must be >= 0")
        return self

    def sweep_levels(self) -> List[float]:
        return list(self.levels) if self.levels is not None else list(DEFAULT_CONTACT_LEVELS)

    def base_scenario(self) -> Scenario:
        defaults: Dict[str, Any] = {}
        if self.name == ExperimentName.CONTACT_SWEEP:
            defaults["lighting_strategy"] = LightingStrategy.STAFF_CONTROLLED
        return validate_document(Scenario, {**defaults, **self.scenario}, source=f"experiment {self.name.value}.scenario")


# --- Summaries ---

class SeriesSummary(BaseModel):
    seed: Optional[int] = None
    total_wh: float
    total_kwh: float
    category_wh: Dict[str, float]
    shares_pct: Dict[str, float]
    peak_w: float
    peak_tick: int
    peak_time: str
    peak_half_hour_wh: float


class SummaryDocument(BaseModel):
    n_series: int
    series: List[SeriesSummary]
    mean_total_wh: float
    stdev_total_wh: float
    mean_peak_w: float
    stdev_peak_w: float


class ExperimentResult(BaseModel):
    name: ExperimentName
    output_dir: str
    files: List[str]
    summary: Dict[str, Any]
