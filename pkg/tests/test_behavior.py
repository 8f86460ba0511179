# File: tests/test_behavior.py

import pytest

from errors import InconsistentState, NotOwner, OutOfRange
from models import (
    Activity,
    BehaviorEvent,
    ComputerState,
    ComputerStatus,
    CorridorIntent,
    DailySchedule,
    EventKind,
    LightControl,
    LightState,
    LightStatus,
    WorkKind,
    WorkMode,
)
from services.behavior_service import (
    SCHEDULE_DRAWS,
    awareness_to_probabilities,
    next_wake_tick,
    sample_daily_schedule,
    step_computer,
    step_light,
    step_user,
)
from services.random_streams import StreamPurpose, counter_stream

WORKDAY = DailySchedule(arrival=540, leave=1020)


def drive(user, until, view, scenario, rng):
    """Step the user at each of its wake ticks up to `until`."""
    events = []
    t = user.wake_tick
    while t is not None and t <= until:
        events.extend(step_user(user, t, view, scenario, rng))
        t = user.wake_tick
    return events


def kinds(events):
    return [event.kind for event in events]


class TestAwarenessBands:
    """Awareness levels map to switch-off and e-mail probabilities."""

    @pytest.mark.parametrize("awareness, expected", [
        (96.0, (0.95, 0.9)),
        (100.0, (0.95, 0.9)),
        (95.0, (0.95, 0.9)),
        (94.99, (0.7, 0.6)),
        (70.0, (0.7, 0.6)),
        (30.0, (0.4, 0.2)),
        (29.99, (0.2, 0.05)),
        (0.0, (0.2, 0.05)),
    ])
    def test_band_probabilities(self, awareness, expected):
        assert awareness_to_probabilities(awareness) == expected

    @pytest.mark.parametrize("awareness", [101.0, -0.5])
    def test_out_of_range(self, awareness):
        with pytest.raises(OutOfRange):
            awareness_to_probabilities(awareness)

    def test_out_of_range_is_a_config_error(self):
        with pytest.raises(OutOfRange) as excinfo:
            awareness_to_probabilities(150.0)
        assert excinfo.value.exit_code == 1


class TestDailySchedule:
    """Presence windows by work stereotype."""

    def test_timetable_complier_weekday(self, make_user):
        user = make_user()
        for day in range(5):
            schedule = sample_daily_schedule(user, day, counter_stream(1, StreamPurpose.BEHAVIOR, 0, day))
            assert schedule is not None
            assert day * 1440 + 540 <= schedule.arrival < day * 1440 + 600
            assert day * 1440 + 1020 <= schedule.leave < day * 1440 + 1080

    def test_early_bird_window(self, make_user, scripted_rng):
        user = make_user(work_kind=WorkKind.EARLY_BIRD)
        schedule = sample_daily_schedule(user, 0, scripted_rng(0.5, 0.0, 0.999, 0.9))
        assert schedule.arrival == 300
        assert schedule.leave == 1079

    def test_flexible_worker_leaves_after_arrival(self, make_user):
        user = make_user(work_kind=WorkKind.FLEXIBLE_WORKER)
        for day in range(5):
            schedule = sample_daily_schedule(user, day, counter_stream(2, StreamPurpose.BEHAVIOR, 0, day))
            assert schedule.arrival <= schedule.leave < day * 1440 + 23 * 60

    def test_weekend_absence(self, make_user, scripted_rng):
        user = make_user()
        assert sample_daily_schedule(user, 5, scripted_rng(0.5)) is None
        assert sample_daily_schedule(user, 6, scripted_rng(0.021)) is None

    def test_weekend_presence(self, make_user, scripted_rng):
        schedule = sample_daily_schedule(make_user(), 5, scripted_rng(0.01, 0.0, 0.0, 0.9))
        assert schedule.arrival == 5 * 1440 + 540

    def test_meeting_fits_inside_the_day(self, make_user, scripted_rng):
        rng = scripted_rng(0.5, 0.0, 0.0, 0.1, 0.5, 0.5)
        schedule = sample_daily_schedule(make_user(), 0, rng)
        assert schedule.meeting_start is not None
        assert 30 <= schedule.meeting_duration <= 120
        assert schedule.meeting_start >= schedule.arrival + 3
        assert schedule.meeting_start + schedule.meeting_duration <= schedule.leave - 1

    def test_no_meeting_above_probability(self, make_user, scripted_rng):
        schedule = sample_daily_schedule(make_user(), 0, scripted_rng(0.5, 0.0, 0.0, 0.31))
        assert schedule.meeting_start is None

    def test_fixed_number_of_draws(self, make_user, scripted_rng):
        rng = scripted_rng()
        sample_daily_schedule(make_user(), 6, rng)
        assert rng.calls == SCHEDULE_DRAWS


class TestStepUser:
    """The user state machine."""

    def _arrive(self, make_user, **kwargs):
        user = make_user(today=WORKDAY, **kwargs)
        user.wake_tick = WORKDAY.arrival
        return user

    def test_arrival_then_office(self, make_user, world_view, scenario, scripted_rng):
        user = self._arrive(make_user)
        rng = scripted_rng(default=0.999)
        events = step_user(user, 540, world_view, scenario(), rng)
        assert kinds(events) == [EventKind.ARRIVE]
        assert user.state.activity is Activity.IN_CORRIDOR
        assert user.state.room_id == "corridor-1"
        assert user.wake_tick == 542

        events = step_user(user, 542, world_view, scenario(), rng)
        assert kinds(events) == [EventKind.ENTER_OFFICE]
        assert user.state.activity is Activity.IN_OWN_OFFICE
        assert user.state.mode is WorkMode.WORKING_WITHOUT_COMPUTER

    def test_switch_on_two_minutes_after_entering(self, make_user, world_view, scenario, scripted_rng):
        user = self._arrive(make_user)
        events = drive(user, 544, world_view, scenario(), scripted_rng(default=0.999))
        assert events[-1] == BehaviorEvent(544, 0, EventKind.SWITCH_ON_COMPUTER, "pc-1")
        assert user.state.mode is WorkMode.WORKING_WITH_COMPUTER

    def test_no_computer_no_switch_on(self, make_user, world_view, scenario, scripted_rng):
        user = self._arrive(make_user, computer_id=None)
        events = drive(user, 600, world_view, scenario(), scripted_rng(default=0.999))
        assert EventKind.SWITCH_ON_COMPUTER not in kinds(events)
        assert user.state.mode is WorkMode.WORKING_WITHOUT_COMPUTER

    def test_aware_user_switches_off_when_stopping(self, make_user, world_view, scenario, scripted_rng):
        user = self._arrive(make_user, awareness=80.0)
        # excursion far away, stop using after one tick, then switch off
        rng = scripted_rng(0.999, 0.0, 0.1, default=0.999)
        events = drive(user, 545, world_view, scenario(threshold=50.0), rng)
        assert kinds(events)[-1] is EventKind.SWITCH_OFF_COMPUTER
        assert user.state.mode is WorkMode.WORKING_WITHOUT_COMPUTER
        assert user.wake_tick == 547

    def test_unaware_user_leaves_standby(self, make_user, world_view, scenario, scripted_rng):
        user = self._arrive(make_user, awareness=20.0)
        rng = scripted_rng(0.999, 0.0, 0.1, default=0.999)
        events = drive(user, 545, world_view, scenario(threshold=50.0), rng)
        assert kinds(events)[-1] is EventKind.STANDBY_COMPUTER

    def test_threshold_blocks_switch_off(self, make_user, world_view, scenario, scripted_rng):
        user = self._arrive(make_user, awareness=80.0)
        rng = scripted_rng(0.999, 0.0, 0.1, default=0.999)
        events = drive(user, 545, world_view, scenario(threshold=90.0), rng)
        assert kinds(events)[-1] is EventKind.STANDBY_COMPUTER

    def test_excursion_round_trip(self, make_user, world_view, scenario, scripted_rng):
        user = self._arrive(make_user, computer_id=None)
        # excursion one tick after entering, kitchen, one-minute stay
        rng = scripted_rng(0.0, 0.0, 0.0, default=0.999)
        events = drive(user, 547, world_view, scenario(), rng)
        assert kinds(events) == [
            EventKind.ARRIVE,
            EventKind.ENTER_OFFICE,
            EventKind.LEAVE_OFFICE,
            EventKind.ENTER_ROOM,
            EventKind.LEAVE_ROOM,
            EventKind.ENTER_OFFICE,
        ]
        assert [e.tick for e in events] == [540, 542, 543, 544, 545, 547]
        assert events[2].detail == "temporary"
        assert events[3].detail == "kitchen"

    def test_temporary_leave_keeps_computer(self, make_user, world_view, scenario, scripted_rng):
        user = self._arrive(make_user)
        # excursion three minutes after entering, after the switch-on at 544
        rng = scripted_rng(0.0104, default=0.999)
        events = drive(user, 545, world_view, scenario(), rng)
        assert [(e.tick, e.kind) for e in events[-2:]] == [
            (544, EventKind.SWITCH_ON_COMPUTER),
            (545, EventKind.LEAVE_OFFICE),
        ]
        assert events[-1].detail == "temporary"

    def test_departure(self, make_user, world_view, scenario, scripted_rng):
        user = self._arrive(make_user, computer_id=None)
        events = drive(user, 2000, world_view, scenario(), scripted_rng(default=0.999))
        assert kinds(events)[-2:] == [EventKind.LEAVE_OFFICE, EventKind.EXIT_BUILDING]
        assert events[-2].tick == 1020
        assert events[-1].tick == 1022
        assert user.state.activity is Activity.OUT_OF_SCHOOL
        assert user.state.finished
        assert user.wake_tick is None

    def test_departure_switch_off_draw(self, make_user, world_view, scenario, scripted_rng):
        user = self._arrive(make_user, awareness=96.0)
        schedule = DailySchedule(arrival=540, leave=550)
        user.today = schedule
        # excursion never, stop using never, then switch off at departure
        rng = scripted_rng(0.999, 0.999, 0.5, default=0.999)
        events = drive(user, 560, world_view, scenario(), rng)
        leave = [e for e in events if e.tick == 550]
        assert kinds(leave) == [EventKind.LEAVE_OFFICE, EventKind.SWITCH_OFF_COMPUTER]

    def test_departure_keeps_computer_on_when_draw_fails(self, make_user, world_view, scenario, scripted_rng):
        user = self._arrive(make_user, awareness=10.0)
        user.today = DailySchedule(arrival=540, leave=550)
        rng = scripted_rng(0.999, 0.999, 0.5, default=0.999)
        events = drive(user, 560, world_view, scenario(), rng)
        assert EventKind.SWITCH_OFF_COMPUTER not in kinds(events)

    def test_meeting_is_a_long_leave(self, make_user, world_view, scenario, scripted_rng):
        user = self._arrive(make_user, computer_id=None)
        user.today = DailySchedule(arrival=540, leave=1020, meeting_start=600, meeting_duration=30)
        events = drive(user, 640, world_view, scenario(), scripted_rng(default=0.999))
        assert [(e.tick, e.kind) for e in events if e.tick >= 600] == [
            (600, EventKind.LEAVE_OFFICE),
            (602, EventKind.EXIT_BUILDING),
            (630, EventKind.ARRIVE),
            (632, EventKind.ENTER_OFFICE),
        ]
        assert events[-2].detail == "return"
        assert user.state.meeting_done

    def test_no_excursions_without_facilities(self, make_user, scenario, scripted_rng):
        from services.behavior_service import WorldView

        user = self._arrive(make_user, computer_id=None)
        events = drive(user, 1100, WorldView(), scenario(), scripted_rng(default=0.0))
        assert EventKind.ENTER_ROOM not in kinds(events)

    def test_step_between_wake_ticks_is_a_no_op(self, make_user, world_view, scenario, scripted_rng):
        user = self._arrive(make_user, computer_id=None)
        rng = scripted_rng(default=0.999)
        drive(user, 542, world_view, scenario(), rng)
        before = (user.state.activity, user.state.mode, user.state.since)
        assert step_user(user, 600, world_view, scenario(), rng) == []
        assert (user.state.activity, user.state.mode, user.state.since) == before

    def test_corridor_intent_on_long_leave(self, make_user, world_view, scenario, scripted_rng):
        user = self._arrive(make_user, computer_id=None)
        drive(user, 1020, world_view, scenario(), scripted_rng(default=0.999))
        assert user.state.intent is CorridorIntent.TO_EXIT

    def test_computer_outside_own_office(self, make_user, world_view, scenario, scripted_rng):
        user = self._arrive(make_user, computer_id="pc-9")
        rng = scripted_rng(default=0.999)
        step_user(user, 540, world_view, scenario(), rng)
        with pytest.raises(InconsistentState):
            step_user(user, 542, world_view, scenario(), rng)

    def test_next_wake_for_absent_user(self, make_user, scenario):
        user = make_user(today=None)
        assert next_wake_tick(user, 0, scenario().behavior) is None


class TestStepLight:
    """Sensor timeout and staff switching."""

    def test_occupied_room_is_lit(self, scenario):
        light = step_light(LightState(), True, None, scenario())
        assert light.state is LightStatus.ON
        assert light.vacancy_timer == 0

    def test_vacancy_timeout(self, scenario):
        light = LightState(LightStatus.ON, LightControl.SENSOR_AUTOMATED, 0)
        for _ in range(20):
            light = step_light(light, False, None, scenario())
            assert light.state is LightStatus.ON
        light = step_light(light, False, None, scenario())
        assert light.state is LightStatus.OFF
        assert light.vacancy_timer == 20

    def test_leave_at_100_goes_dark_at_120(self, scenario):
        light = step_light(LightState(), True, None, scenario())
        # first vacant tick
        t = 100
        light = step_light(light, False, None, scenario())
        while light.state is LightStatus.ON:
            t += 1
            light = step_light(light, False, None, scenario())
        assert t == 120

    def test_reoccupied_room_resets_timer(self, scenario):
        light = LightState(LightStatus.ON, LightControl.SENSOR_AUTOMATED, 12)
        assert step_light(light, True, None, scenario()).vacancy_timer == 0

    def test_staff_light_stays_on_without_decision(self, scenario):
        light = LightState(LightStatus.ON, LightControl.STAFF_SWITCHED, 0)
        for _ in range(100):
            light = step_light(light, False, None, scenario())
        assert light.state is LightStatus.ON

    def test_staff_light_switched_off_by_aware_occupant(self, scenario, scripted_rng):
        light = LightState(LightStatus.ON, LightControl.STAFF_SWITCHED, 0)
        assert step_light(light, False, 96.0, scenario(), scripted_rng(0.5)).state is LightStatus.OFF
        assert step_light(light, False, 10.0, scenario(), scripted_rng(0.5)).state is LightStatus.ON

    def test_staff_decision_needs_stream(self, scenario):
        light = LightState(LightStatus.ON, LightControl.STAFF_SWITCHED, 0)
        with pytest.raises(InconsistentState):
            step_light(light, False, 96.0, scenario())


class TestStepComputer:
    """Computers only follow their owner."""

    def test_switch_on(self):
        computer = ComputerState("pc-1", owner=0)
        event = BehaviorEvent(10, 0, EventKind.SWITCH_ON_COMPUTER, "pc-1")
        assert step_computer(computer, event).state is ComputerStatus.ON

    def test_standby_and_off(self):
        computer = ComputerState("pc-1", owner=0, state=ComputerStatus.ON)
        standby = step_computer(computer, BehaviorEvent(10, 0, EventKind.STANDBY_COMPUTER, "pc-1"))
        assert standby.state is ComputerStatus.STANDBY
        assert standby.power_w == 25.0
        off = step_computer(standby, BehaviorEvent(11, 0, EventKind.SWITCH_OFF_COMPUTER, "pc-1"))
        assert off.state is ComputerStatus.OFF

    def test_no_event_no_change(self):
        computer = ComputerState("pc-1", owner=0, state=ComputerStatus.ON)
        assert step_computer(computer, None) is computer

    def test_only_owner_may_switch(self):
        computer = ComputerState("pc-1", owner=0)
        with pytest.raises(NotOwner):
            step_computer(computer, BehaviorEvent(10, 1, EventKind.SWITCH_ON_COMPUTER, "pc-1"))
