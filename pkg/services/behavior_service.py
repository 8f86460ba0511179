# File: services/behavior_service.py (Per-tick state machines for energy users, lights and computers)

"""
The user machine is event driven: `step_user` only changes anything at ticks
where a transition is due, and leaves the next such tick in `user.wake_tick`.
Per-tick hazards (stop using the computer, go on an excursion) are drawn as
geometric waiting times when the state that carries them is entered, which has
the same law as a Bernoulli draw on every tick.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Tuple, Union

import numpy as np

from errors import InconsistentState, NotOwner, OutOfRange
from models import (
    AWARENESS_STEREOTYPES,
    COMPUTER_REQUESTS,
    MINUTES_PER_DAY,
    Activity,
    AwarenessKind,
    BehaviorEvent,
    ComputerState,
    CorridorIntent,
    DailySchedule,
    EnergyUser,
    EventKind,
    LeaveKind,
    LightControl,
    LightState,
    LightStatus,
    SimTime,
    WorkMode,
)
from schemas import BehaviorParams, Scenario
from services.random_streams import geometric_delay, uniform_int

logger = logging.getLogger(__name__)

# Draws consumed by one schedule sample, whatever its outcome
SCHEDULE_DRAWS = 6


@dataclass
class WorldView:
    """What a user can see of the building while stepping."""

    facility_ids: Tuple[str, ...] = ()
    room_computers: Dict[str, FrozenSet[str]] = field(default_factory=dict)


def awareness_kind_of(awareness: float) -> AwarenessKind:
    if not 0.0 <= awareness <= 100.0:
        raise OutOfRange(f"awareness {awareness!r} outside [0, 100]")
    for kind, stereotype in AWARENESS_STEREOTYPES.items():
        if stereotype.contains(awareness):
            return kind
    raise InconsistentState(f"awareness {awareness!r} falls in no band")


def awareness_to_probabilities(awareness: float) -> Tuple[float, float]:
    """(p_switch_off, p_email) of the band the awareness level falls in."""
    stereotype = AWARENESS_STEREOTYPES[awareness_kind_of(awareness)]
    return stereotype.p_switch_off, stereotype.p_email


def sample_daily_schedule(
    user: EnergyUser,
    day: Union[int, SimTime],
    rng: np.random.Generator,
    params: Optional[BehaviorParams] = None,
    p_weekend: Optional[float] = None,
) -> Optional[DailySchedule]:
    """
    Arrival, leave and optional meeting for one day, or None when the user
    stays home. Always consumes SCHEDULE_DRAWS draws.
    """
    params = params or BehaviorParams()
    p_weekend = user.p_weekend if p_weekend is None else p_weekend
    day_index = day.day_index if isinstance(day, SimTime) else int(day)
    u_present, u_arrival, u_leave, u_meeting, u_duration, u_start = rng.random(SCHEDULE_DRAWS)

    if SimTime(day_index * MINUTES_PER_DAY).is_weekend and u_present >= p_weekend:
        return None

    stereotype = user.work_stereotype
    arrival = uniform_int(u_arrival, *stereotype.arrival_window)
    if stereotype.leave_after_arrival:
        leave = uniform_int(u_leave, arrival, stereotype.leave_window[1])
    else:
        leave = uniform_int(u_leave, *stereotype.leave_window)

    day_start = day_index * MINUTES_PER_DAY
    meeting_start: Optional[int] = None
    meeting_duration: Optional[int] = None
    if u_meeting < params.meeting_probability:
        duration = uniform_int(u_duration, params.meeting_min, params.meeting_max + 1)
        earliest = arrival + params.corridor_timeout + 1
        latest = leave - duration - 1
        if latest >= earliest:
            meeting_start = day_start + uniform_int(u_start, earliest, latest + 1)
            meeting_duration = duration

    return DailySchedule(day_start + arrival, day_start + leave, meeting_start, meeting_duration)


# --- User machine ---

def _tick_of(clock: Union[int, SimTime]) -> int:
    return clock.minute_of_sim if isinstance(clock, SimTime) else int(clock)


def _enter_corridor(user: EnergyUser, t: int, intent: CorridorIntent) -> None:
    s = user.state
    s.activity = Activity.IN_CORRIDOR
    s.since = t
    s.room_id = user.corridor_id
    s.intent = intent
    s.mode = None


def _enter_office(user: EnergyUser, t: int, world: WorldView, params: BehaviorParams,
                  rng: np.random.Generator) -> BehaviorEvent:
    if user.computer_id is not None and world.room_computers:
        if user.computer_id not in world.room_computers.get(user.office_id or "", frozenset()):
            raise InconsistentState(
                f"computer {user.computer_id} is not in office {user.office_id}", context=f"user {user.id}"
            )
    s = user.state
    s.activity = Activity.IN_OWN_OFFICE
    s.since = t
    s.room_id = user.office_id
    s.intent = None
    s.pending = None
    s.return_tick = None
    s.mode = WorkMode.WORKING_WITHOUT_COMPUTER
    s.switch_on_tick = t + params.switch_on_timeout if user.computer_id is not None else None
    s.stop_using_tick = None

    u_excursion = rng.random()
    s.excursion_tick = None
    schedule = user.today
    if schedule is not None and t < schedule.leave and world.facility_ids and params.excursions_per_day > 0:
        span = schedule.leave - schedule.arrival
        if span > 0:
            hazard = min(1.0, params.excursions_per_day / span)
            s.excursion_tick = t + geometric_delay(u_excursion, hazard)

    user.office_entered_tick = t
    return BehaviorEvent(t, user.id, EventKind.ENTER_OFFICE, user.office_id or "")


def _leave_office(user: EnergyUser, t: int, kind: LeaveKind, scenario: Scenario,
                  rng: np.random.Generator) -> List[BehaviorEvent]:
    s = user.state
    events = [BehaviorEvent(t, user.id, EventKind.LEAVE_OFFICE, kind.value)]
    if kind is LeaveKind.LONG:
        # One draw per long leave, used or not
        u = rng.random()
        p_switch_off, _ = awareness_to_probabilities(user.awareness)
        if user.computer_id is not None and u < p_switch_off:
            events.append(BehaviorEvent(t, user.id, EventKind.SWITCH_OFF_COMPUTER, user.computer_id))

    if user.office_entered_tick is not None:
        user.office_minutes += t - user.office_entered_tick
    user.office_entered_tick = None

    s.switch_on_tick = None
    s.stop_using_tick = None
    s.excursion_tick = None
    s.pending = kind
    _enter_corridor(user, t, CorridorIntent.TO_OTHER_ROOM if kind is LeaveKind.TEMPORARY else CorridorIntent.TO_EXIT)
    return events


def _step_in_office(user: EnergyUser, t: int, scenario: Scenario, rng: np.random.Generator) -> List[BehaviorEvent]:
    s = user.state
    params = scenario.behavior
    schedule = user.today

    if s.mode is WorkMode.WORKING_WITHOUT_COMPUTER and s.switch_on_tick is not None and t >= s.switch_on_tick:
        s.mode = WorkMode.WORKING_WITH_COMPUTER
        s.switch_on_tick = None
        s.stop_using_tick = t + geometric_delay(rng.random(), params.standby_probability)
        return [BehaviorEvent(t, user.id, EventKind.SWITCH_ON_COMPUTER, user.computer_id)]

    if s.mode is WorkMode.WORKING_WITH_COMPUTER and s.stop_using_tick is not None and t >= s.stop_using_tick:
        u = rng.random()
        p_switch_off, _ = awareness_to_probabilities(user.awareness)
        if user.awareness > scenario.threshold and u < p_switch_off:
            kind = EventKind.SWITCH_OFF_COMPUTER
        else:
            kind = EventKind.STANDBY_COMPUTER
        s.mode = WorkMode.WORKING_WITHOUT_COMPUTER
        s.stop_using_tick = None
        s.switch_on_tick = t + params.switch_on_timeout
        return [BehaviorEvent(t, user.id, kind, user.computer_id)]

    if schedule is None:
        raise InconsistentState("in office without a schedule", context=f"user {user.id}")

    if s.excursion_tick is not None and t >= s.excursion_tick and t < schedule.leave:
        return _leave_office(user, t, LeaveKind.TEMPORARY, scenario, rng)

    if (schedule.meeting_start is not None and not s.meeting_done
            and schedule.meeting_start <= t < schedule.leave):
        s.meeting_done = True
        events = _leave_office(user, t, LeaveKind.LONG, scenario, rng)
        s.return_tick = t + schedule.meeting_duration
        return events

    if t >= schedule.leave:
        events = _leave_office(user, t, LeaveKind.LONG, scenario, rng)
        s.finished = True
        return events

    return []


def step_user(
    user: EnergyUser,
    clock: Union[int, SimTime],
    world: WorldView,
    scenario: Scenario,
    rng: np.random.Generator,
) -> List[BehaviorEvent]:
    """Advance one user by one tick. At most one location or mode transition happens."""
    t = _tick_of(clock)
    s = user.state
    params = scenario.behavior
    events: List[BehaviorEvent] = []

    if s.activity is Activity.OUT_OF_SCHOOL:
        schedule = user.today
        if schedule is not None and not s.finished:
            if s.pending is LeaveKind.LONG and s.return_tick is not None:
                if t >= s.return_tick:
                    s.pending = None
                    s.return_tick = None
                    _enter_corridor(user, t, CorridorIntent.TO_OFFICE)
                    events.append(BehaviorEvent(t, user.id, EventKind.ARRIVE, "return"))
            elif t >= schedule.arrival:
                _enter_corridor(user, t, CorridorIntent.TO_OFFICE)
                events.append(BehaviorEvent(t, user.id, EventKind.ARRIVE, "day"))

    elif s.activity is Activity.IN_CORRIDOR:
        elapsed = t - s.since
        if s.intent is CorridorIntent.TO_OFFICE and elapsed >= params.corridor_timeout:
            events.append(_enter_office(user, t, world, params, rng))
        elif s.intent is CorridorIntent.TO_OTHER_ROOM and elapsed >= 1:
            u_room, u_stay = rng.random(2)
            if not world.facility_ids:
                raise InconsistentState("excursion with no facility rooms", context=f"user {user.id}")
            room_id = world.facility_ids[uniform_int(u_room, 0, len(world.facility_ids))]
            s.activity = Activity.IN_OTHER_ROOMS
            s.since = t
            s.room_id = room_id
            s.intent = None
            s.return_tick = t + uniform_int(u_stay, params.other_room_min, params.other_room_max + 1)
            events.append(BehaviorEvent(t, user.id, EventKind.ENTER_ROOM, room_id))
        elif s.intent is CorridorIntent.TO_EXIT and elapsed >= params.corridor_timeout:
            s.activity = Activity.OUT_OF_SCHOOL
            s.since = t
            s.room_id = None
            s.intent = None
            if s.finished:
                s.pending = None
                s.return_tick = None
            events.append(BehaviorEvent(t, user.id, EventKind.EXIT_BUILDING, "day" if s.finished else "meeting"))

    elif s.activity is Activity.IN_OTHER_ROOMS:
        if s.return_tick is not None and t >= s.return_tick:
            room_id = s.room_id or ""
            s.return_tick = None
            s.pending = None
            _enter_corridor(user, t, CorridorIntent.TO_OFFICE)
            events.append(BehaviorEvent(t, user.id, EventKind.LEAVE_ROOM, room_id))

    elif s.activity is Activity.IN_OWN_OFFICE:
        events.extend(_step_in_office(user, t, scenario, rng))

    user.wake_tick = next_wake_tick(user, t, params)
    return events


def next_wake_tick(user: EnergyUser, t: int, params: BehaviorParams) -> Optional[int]:
    """Earliest tick after t at which `step_user` can change this user, or None."""
    s = user.state
    schedule = user.today
    due: Optional[int] = None

    if s.activity is Activity.OUT_OF_SCHOOL:
        if schedule is None or s.finished:
            return None
        if s.pending is LeaveKind.LONG and s.return_tick is not None:
            due = s.return_tick
        else:
            due = schedule.arrival
    elif s.activity is Activity.IN_CORRIDOR:
        due = s.since + (1 if s.intent is CorridorIntent.TO_OTHER_ROOM else params.corridor_timeout)
    elif s.activity is Activity.IN_OTHER_ROOMS:
        due = s.return_tick
    elif s.activity is Activity.IN_OWN_OFFICE and schedule is not None:
        candidates = [schedule.leave]
        if s.mode is WorkMode.WORKING_WITHOUT_COMPUTER and s.switch_on_tick is not None:
            candidates.append(s.switch_on_tick)
        if s.mode is WorkMode.WORKING_WITH_COMPUTER and s.stop_using_tick is not None:
            candidates.append(s.stop_using_tick)
        if s.excursion_tick is not None and s.excursion_tick < schedule.leave:
            candidates.append(s.excursion_tick)
        if schedule.meeting_start is not None and not s.meeting_done and schedule.meeting_start < schedule.leave:
            candidates.append(schedule.meeting_start)
        due = min(candidates)

    if due is None:
        return None
    return max(due, t + 1)


# --- Appliances ---

def step_light(
    light: LightState,
    room_occupied: bool,
    last_occupant_awareness: Optional[float],
    scenario: Scenario,
    rng: Optional[np.random.Generator] = None,
) -> LightState:
    """
    Occupied rooms are lit. A vacant automated room goes dark after the vacancy
    timeout; a staff-switched light only goes off when its last occupant leaves
    for good and decides to switch it off.
    """
    if room_occupied:
        if light.state is LightStatus.ON and light.vacancy_timer == 0:
            return light
        return LightState(LightStatus.ON, light.control, 0)

    if light.state is LightStatus.OFF:
        return light

    if light.control is LightControl.SENSOR_AUTOMATED:
        # vacancy_timer counts the vacant ticks already spent lit; the first vacant tick sees 0
        if light.vacancy_timer >= scenario.behavior.vacancy_timeout:
            return LightState(LightStatus.OFF, light.control, light.vacancy_timer)
        return LightState(LightStatus.ON, light.control, light.vacancy_timer + 1)

    if last_occupant_awareness is not None:
        if rng is None:
            raise InconsistentState("staff-switched light decision needs a random stream")
        p_switch_off, _ = awareness_to_probabilities(last_occupant_awareness)
        if rng.random() < p_switch_off:
            return LightState(LightStatus.OFF, light.control, 0)
    return light


def step_computer(computer: ComputerState, owner_event: Optional[BehaviorEvent]) -> ComputerState:
    """Apply the owner's request of this tick, if any."""
    if owner_event is None:
        return computer
    if owner_event.agent_id != computer.owner:
        raise NotOwner(
            f"user {owner_event.agent_id} asked computer {computer.id} (owner {computer.owner}) to change",
            context=f"tick {owner_event.tick}",
        )
    target = COMPUTER_REQUESTS.get(owner_event.kind)
    if target is None:
        raise InconsistentState(f"{owner_event.kind.value} is not a computer request", context=computer.id)
    if target is computer.state:
        return computer
    return ComputerState(computer.id, computer.owner, target)
