# File: models.py (Runtime domain types: building, agents, appliances, logs, meter series)

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterator, List, NamedTuple, Optional, Tuple, Union

import numpy as np

MINUTES_PER_DAY = 1440
MINUTES_PER_HALF_HOUR = 30
DAYS_PER_WEEK = 7


def hhmm(hours: int, minutes: int = 0) -> int:
    """Minute of day for a wall-clock time."""
    return hours * 60 + minutes


# --- Clock ---

class DayOfWeek(str, Enum):
    MONDAY = "mon"
    TUESDAY = "tue"
    WEDNESDAY = "wed"
    THURSDAY = "thu"
    FRIDAY = "fri"
    SATURDAY = "sat"
    SUNDAY = "sun"


_DAY_ORDER: Tuple[DayOfWeek, ...] = tuple(DayOfWeek)


@dataclass(frozen=True, slots=True)
class SimTime:
    """Minutes since Monday 00:00 of the first recorded week. Negative values are warm-up."""

    minute_of_sim: int

    @property
    def day_index(self) -> int:
        return self.minute_of_sim // MINUTES_PER_DAY

    @property
    def minute_of_day(self) -> int:
        return self.minute_of_sim % MINUTES_PER_DAY

    @property
    def day_of_week(self) -> DayOfWeek:
        return _DAY_ORDER[self.day_index % DAYS_PER_WEEK]

    @property
    def is_weekend(self) -> bool:
        return self.day_index % DAYS_PER_WEEK >= 5

    def __str__(self) -> str:
        m = self.minute_of_day
        return f"{self.day_of_week.value} d{self.day_index} {m // 60:02d}:{m % 60:02d}"


# --- Building ---

class RoomKind(str, Enum):
    OFFICE = "office"
    CORRIDOR = "corridor"
    FACILITY = "facility"


@dataclass(frozen=True)
class Room:
    id: str
    kind: RoomKind
    light_ids: Tuple[str, ...] = ()
    computer_ids: Tuple[str, ...] = ()


@dataclass(frozen=True)
class PlanTotals:
    rooms: int
    lights: int
    computers: int
    users: int

    def as_dict(self) -> Dict[str, int]:
        return {"rooms": self.rooms, "lights": self.lights, "computers": self.computers, "users": self.users}


@dataclass
class BuildingPlan:
    rooms: Tuple[Room, ...]
    occupancy: Dict[int, str] = field(default_factory=dict)
    energy_users: int = 0
    base_appliances: Dict[str, int] = field(default_factory=dict)
    _by_id: Dict[str, Room] = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        self._by_id = {room.id: room for room in self.rooms}

    def room(self, room_id: str) -> Room:
        return self._by_id[room_id]

    def has_room(self, room_id: str) -> bool:
        return room_id in self._by_id

    def rooms_of_kind(self, kind: RoomKind) -> List[Room]:
        return [room for room in self.rooms if room.kind == kind]

    @property
    def offices(self) -> List[Room]:
        return self.rooms_of_kind(RoomKind.OFFICE)

    @property
    def corridors(self) -> List[Room]:
        return self.rooms_of_kind(RoomKind.CORRIDOR)

    @property
    def facilities(self) -> List[Room]:
        return self.rooms_of_kind(RoomKind.FACILITY)

    @property
    def light_ids(self) -> List[str]:
        return [light_id for room in self.rooms for light_id in room.light_ids]

    @property
    def computer_ids(self) -> List[str]:
        return [pc_id for room in self.rooms for pc_id in room.computer_ids]

    @property
    def totals(self) -> PlanTotals:
        return PlanTotals(
            rooms=len(self.rooms),
            lights=sum(len(room.light_ids) for room in self.rooms),
            computers=sum(len(room.computer_ids) for room in self.rooms),
            users=self.energy_users,
        )


# --- Stereotypes ---

class WorkKind(str, Enum):
    EARLY_BIRD = "early_bird"
    TIMETABLE_COMPLIER = "timetable_complier"
    FLEXIBLE_WORKER = "flexible_worker"


@dataclass(frozen=True)
class WorkStereotype:
    kind: WorkKind
    arrival_window: Tuple[int, int]
    leave_window: Tuple[int, int]
    # Flexible workers leave any time between arrival and the window end
    leave_after_arrival: bool = False


WORK_STEREOTYPES: Dict[WorkKind, WorkStereotype] = {
    WorkKind.EARLY_BIRD: WorkStereotype(WorkKind.EARLY_BIRD, (hhmm(5), hhmm(9)), (hhmm(17), hhmm(18))),
    WorkKind.TIMETABLE_COMPLIER: WorkStereotype(WorkKind.TIMETABLE_COMPLIER, (hhmm(9), hhmm(10)), (hhmm(17), hhmm(18))),
    WorkKind.FLEXIBLE_WORKER: WorkStereotype(
        WorkKind.FLEXIBLE_WORKER, (hhmm(10), hhmm(13)), (hhmm(10), hhmm(23)), leave_after_arrival=True
    ),
}


class AwarenessKind(str, Enum):
    ENVIRONMENT_CHAMPION = "environment_champion"
    ENERGY_SAVER = "energy_saver"
    REGULAR_USER = "regular_user"
    BIG_USER = "big_user"


@dataclass(frozen=True)
class AwarenessStereotype:
    kind: AwarenessKind
    awareness_range: Tuple[int, int]   # as surveyed, both ends inclusive
    band: Tuple[float, float]          # half-open [low, high); the top band includes 100
    p_switch_off: float
    p_email: float

    def contains(self, awareness: float) -> bool:
        low, high = self.band
        return low <= awareness < high or (high == 100.0 and awareness == 100.0)


# Ordered from the highest band down
AWARENESS_STEREOTYPES: Dict[AwarenessKind, AwarenessStereotype] = {
    AwarenessKind.ENVIRONMENT_CHAMPION: AwarenessStereotype(
        AwarenessKind.ENVIRONMENT_CHAMPION, (95, 100), (95.0, 100.0), 0.95, 0.9),
    AwarenessKind.ENERGY_SAVER: AwarenessStereotype(
        AwarenessKind.ENERGY_SAVER, (70, 94), (70.0, 95.0), 0.7, 0.6),
    AwarenessKind.REGULAR_USER: AwarenessStereotype(
        AwarenessKind.REGULAR_USER, (30, 69), (30.0, 70.0), 0.4, 0.2),
    AwarenessKind.BIG_USER: AwarenessStereotype(
        AwarenessKind.BIG_USER, (0, 29), (0.0, 30.0), 0.2, 0.05),
}


# --- Energy user state machine ---

class Activity(str, Enum):
    OUT_OF_SCHOOL = "out_of_school"
    IN_CORRIDOR = "in_corridor"
    IN_OWN_OFFICE = "in_own_office"
    IN_OTHER_ROOMS = "in_other_rooms"


class WorkMode(str, Enum):
    WORKING_WITH_COMPUTER = "working_with_computer"
    WORKING_WITHOUT_COMPUTER = "working_without_computer"


class LeaveKind(str, Enum):
    TEMPORARY = "temporary"  # under 20 minutes
    LONG = "long"            # 20 minutes or more


class CorridorIntent(str, Enum):
    TO_OFFICE = "to_office"
    TO_OTHER_ROOM = "to_other_room"
    TO_EXIT = "to_exit"


@dataclass(frozen=True)
class DailySchedule:
    """Absolute ticks for one day of presence."""

    arrival: int
    leave: int
    meeting_start: Optional[int] = None
    meeting_duration: Optional[int] = None


@dataclass(slots=True)
class UserState:
    activity: Activity = Activity.OUT_OF_SCHOOL
    mode: Optional[WorkMode] = None
    since: int = 0
    room_id: Optional[str] = None
    intent: Optional[CorridorIntent] = None
    pending: Optional[LeaveKind] = None
    return_tick: Optional[int] = None
    switch_on_tick: Optional[int] = None
    stop_using_tick: Optional[int] = None
    excursion_tick: Optional[int] = None
    meeting_done: bool = False
    finished: bool = False


@dataclass(slots=True)
class EnergyUser:
    id: int
    work_kind: WorkKind
    awareness_kind: AwarenessKind
    awareness: float
    office_id: Optional[str] = None
    computer_id: Optional[str] = None
    corridor_id: Optional[str] = None
    today: Optional[DailySchedule] = None
    state: UserState = field(default_factory=UserState)
    # Contact clock: counts in-office minutes of the current day
    office_minutes: int = 0
    office_entered_tick: Optional[int] = None
    next_contact_minute: Optional[int] = None
    wake_tick: Optional[int] = None
    # Chance of coming in on a Saturday or Sunday
    p_weekend: float = 0.02

    @property
    def work_stereotype(self) -> WorkStereotype:
        return WORK_STEREOTYPES[self.work_kind]


# --- Appliances ---

class LightControl(str, Enum):
    SENSOR_AUTOMATED = "sensor_automated"
    STAFF_SWITCHED = "staff_switched"


class LightStatus(str, Enum):
    ON = "on"
    OFF = "off"


class ComputerStatus(str, Enum):
    OFF = "off"
    ON = "on"
    STANDBY = "standby"


LIGHT_POWER_W: Dict[LightStatus, float] = {LightStatus.ON: 60.0, LightStatus.OFF: 0.0}
COMPUTER_POWER_W: Dict[ComputerStatus, float] = {
    ComputerStatus.OFF: 0.0,
    ComputerStatus.ON: 70.0,
    ComputerStatus.STANDBY: 25.0,
}
LIGHT_RATED_W = LIGHT_POWER_W[LightStatus.ON]
COMPUTER_RATED_W = COMPUTER_POWER_W[ComputerStatus.ON]


@dataclass(frozen=True, slots=True)
class LightState:
    state: LightStatus = LightStatus.OFF
    control: LightControl = LightControl.SENSOR_AUTOMATED
    vacancy_timer: int = 0

    @property
    def power_w(self) -> float:
        return LIGHT_POWER_W[self.state]


@dataclass(frozen=True, slots=True)
class ComputerState:
    id: str
    owner: Optional[int] = None
    state: ComputerStatus = ComputerStatus.OFF

    @property
    def power_w(self) -> float:
        return COMPUTER_POWER_W[self.state]


# --- Events ---

class EventKind(str, Enum):
    ARRIVE = "arrive"
    ENTER_OFFICE = "enter_office"
    LEAVE_OFFICE = "leave_office"
    ENTER_ROOM = "enter_room"
    LEAVE_ROOM = "leave_room"
    EXIT_BUILDING = "exit_building"
    SWITCH_ON_COMPUTER = "switch_on_computer"
    STANDBY_COMPUTER = "standby_computer"
    SWITCH_OFF_COMPUTER = "switch_off_computer"
    COMPUTER_ON = "computer_on"
    COMPUTER_STANDBY = "computer_standby"
    COMPUTER_OFF = "computer_off"
    LIGHT_ON = "light_on"
    LIGHT_OFF = "light_off"
    EMAIL = "email"


# Owner requests and the computer state each one leads to
COMPUTER_REQUESTS: Dict[EventKind, ComputerStatus] = {
    EventKind.SWITCH_ON_COMPUTER: ComputerStatus.ON,
    EventKind.STANDBY_COMPUTER: ComputerStatus.STANDBY,
    EventKind.SWITCH_OFF_COMPUTER: ComputerStatus.OFF,
}
COMPUTER_STATE_EVENTS: Dict[ComputerStatus, EventKind] = {
    ComputerStatus.ON: EventKind.COMPUTER_ON,
    ComputerStatus.STANDBY: EventKind.COMPUTER_STANDBY,
    ComputerStatus.OFF: EventKind.COMPUTER_OFF,
}
LIGHT_STATE_EVENTS: Dict[LightStatus, EventKind] = {
    LightStatus.ON: EventKind.LIGHT_ON,
    LightStatus.OFF: EventKind.LIGHT_OFF,
}


class BehaviorEvent(NamedTuple):
    tick: int
    agent_id: Union[int, str]
    kind: EventKind
    detail: str = ""


class ContactEvent(NamedTuple):
    sender: int
    recipient: int
    tick: int


@dataclass
class EventLog:
    events: List[BehaviorEvent] = field(default_factory=list)
    # Set once the run has covered its whole horizon
    horizon_ticks: Optional[int] = None

    def append(self, event: BehaviorEvent) -> None:
        self.events.append(event)

    def __iter__(self) -> Iterator[BehaviorEvent]:
        return iter(self.events)

    def __len__(self) -> int:
        return len(self.events)

    def of_kind(self, *kinds: EventKind) -> List[BehaviorEvent]:
        wanted = set(kinds)
        return [event for event in self.events if event.kind in wanted]


# --- Metering ---

class Category(str, Enum):
    BASE = "base"
    LIGHTS = "lights"
    COMPUTERS = "computers"


@dataclass
class HalfHourlySeries:
    total_wh: np.ndarray
    base_wh: np.ndarray
    lights_wh: np.ndarray
    computers_wh: np.ndarray

    def __len__(self) -> int:
        return len(self.total_wh)


@dataclass
class MeterSeries:
    """Per-tick watts by category; tick i covers minute [i, i+1)."""

    base_w: np.ndarray
    lights_w: np.ndarray
    computers_w: np.ndarray
    total_w: np.ndarray
    half_hourly: HalfHourlySeries
    base_load_w: float
    seed: Optional[int] = None

    @property
    def n_ticks(self) -> int:
        return len(self.total_w)

    def category_w(self, category: Category) -> np.ndarray:
        return {
            Category.BASE: self.base_w,
            Category.LIGHTS: self.lights_w,
            Category.COMPUTERS: self.computers_w,
        }[category]


@dataclass(frozen=True)
class BetaEntry:
    appliance_id: str
    kind: str  # "light" or "computer"
    c_fi_wh: float
    actual_wh: float
    beta: float


@dataclass(frozen=True)
class BetaReport:
    entries: Tuple[BetaEntry, ...]
    c_base_wh: float
    horizon_ticks: int

    def beta_of(self, appliance_id: str) -> float:
        for entry in self.entries:
            if entry.appliance_id == appliance_id:
                return entry.beta
        raise KeyError(appliance_id)
