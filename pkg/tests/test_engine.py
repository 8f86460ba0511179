# File: tests/test_engine.py

import numpy as np
import pytest

from errors import InconsistentState, InvalidParams
from models import Activity, ComputerStatus, EventKind, LightStatus, WorkMode
from schemas import PopulationSpec, Scenario
from services.engine_service import (
    build_network,
    build_world,
    prepare_inputs,
    replication_seeds,
    run,
    run_replications,
    simulate,
)
from services.metering_service import compute_betas, reconstruct_total, total_wh
from services.random_streams import derive_replication_seed
from services.social_service import complete_network

PAIR = PopulationSpec(n_users=2)


class TestRun:
    """The tick pipeline on small and default buildings."""

    def test_one_week_has_10080_samples(self, small_plan):
        series, log = simulate(Scenario(seed=3), small_plan, PAIR)
        assert series.n_ticks == 10080
        assert len(series.half_hourly) == 336
        assert log.horizon_ticks == 10080

    def test_empty_roster_is_base_load(self, small_plan):
        scenario = Scenario(horizon_days=2, base_load_w=750.0)
        series, log = run(scenario, small_plan, [], complete_network(0))
        assert np.all(series.total_w == 750.0)
        assert len(log) == 0
        report = compute_betas(log, scenario.horizon_ticks, small_plan, scenario.base_load_w)
        assert reconstruct_total(report) == pytest.approx(750.0 * 48)

    def test_same_seed_same_series(self, default_plan):
        scenario = Scenario(seed=1, horizon_days=1)
        first, first_log = simulate(scenario, default_plan)
        second, second_log = simulate(scenario, default_plan)
        assert np.array_equal(first.total_w, second.total_w)
        assert first_log.events == second_log.events

    def test_different_seed_different_series(self, default_plan):
        first, _ = simulate(Scenario(seed=1, horizon_days=1), default_plan)
        second, _ = simulate(Scenario(seed=2, horizon_days=1), default_plan)
        assert not np.array_equal(first.total_w, second.total_w)

    def test_betas_reconstruct_the_meter(self, default_plan):
        scenario = Scenario(seed=5, horizon_days=2)
        series, log = simulate(scenario, default_plan)
        report = compute_betas(log, scenario.horizon_ticks, default_plan, scenario.base_load_w)
        reconstruct_total(report, total_wh(series))

    def test_staff_lighting_reconstructs_too(self, default_plan):
        scenario = Scenario(seed=5, horizon_days=1, lighting_strategy="staff_controlled", contact_rate=4.0)
        series, log = simulate(scenario, default_plan)
        report = compute_betas(log, scenario.horizon_ticks, default_plan, scenario.base_load_w)
        reconstruct_total(report, total_wh(series))
        assert log.of_kind(EventKind.EMAIL)

    def test_no_email_without_contacts(self, default_plan):
        _, log = simulate(Scenario(seed=5, horizon_days=1), default_plan)
        assert log.of_kind(EventKind.EMAIL) == []

    def test_world_stays_consistent(self, default_plan):
        scenario = Scenario(seed=2, horizon_days=1)
        ticks = []

        def observe(world):
            ticks.append(world.clock.minute_of_sim)
            present = {}
            for user in world.users.values():
                if user.state.room_id is not None:
                    present[user.state.room_id] = present.get(user.state.room_id, 0) + 1
                if user.state.mode is WorkMode.WORKING_WITH_COMPUTER:
                    assert world.computers[user.computer_id].state is ComputerStatus.ON
                if user.state.activity is Activity.OUT_OF_SCHOOL:
                    assert user.state.room_id is None
            assert {room: n for room, n in world.occupancy.items() if n} == present
            for room_id in present:
                assert world.lights[room_id].state is LightStatus.ON

        simulate(scenario, default_plan, observer=observe)
        assert ticks == list(range(1440))

    def test_only_recorded_ticks_are_logged(self, small_plan):
        scenario = Scenario(seed=4, horizon_days=1, warmup_days=3)
        ticks = []
        at_start = {}

        def observe(world):
            ticks.append(world.clock.minute_of_sim)
            if world.clock.minute_of_sim == 0:
                at_start.update({
                    pc_id: c.state for pc_id, c in world.computers.items() if c.state is not ComputerStatus.OFF
                })

        series, log = simulate(scenario, small_plan, PAIR, observer=observe)
        assert ticks[0] == -3 * 1440
        assert series.n_ticks == 1440
        assert all(event.tick >= 0 for event in log)
        initial = {e.agent_id for e in log if e.detail == "initial" and e.kind is not EventKind.LIGHT_ON}
        assert initial == set(at_start)
        report = compute_betas(log, scenario.horizon_ticks, small_plan, scenario.base_load_w)
        reconstruct_total(report, total_wh(series))

    @pytest.mark.slow
    def test_weekly_peak_on_a_weekday_afternoon(self, automated_week):
        _, series, _ = automated_week
        peak = int(np.argmax(series.total_w))
        day, minute = divmod(peak, 1440)
        assert day < 5
        assert 600 <= minute < 1080

    @pytest.mark.slow
    def test_weekends_are_quieter(self, automated_week):
        scenario, series, _ = automated_week
        flexible = series.lights_w + series.computers_w
        days = flexible.reshape(7, 1440)[:, 540:1020].mean(axis=1)
        assert days[5:].mean() < 0.45 * days[:5].mean()

    @pytest.mark.slow
    def test_staff_lighting_uses_more(self, automated_week, staff_week):
        _, automated, _ = automated_week
        _, staff, _ = staff_week
        assert total_wh(staff) > total_wh(automated)
        assert np.array_equal(automated.computers_w, staff.computers_w)

    @pytest.mark.slow
    def test_four_weeks_without_violations(self, default_plan):
        scenario = Scenario(seed=3, horizon_days=28)
        vacant_since = {room.id: 0 for room in default_plan.rooms}
        was_lit = {room.id: False for room in default_plan.rooms}
        entered_other_room = {}
        stays = []
        switch_offs = []

        def observe(world):
            t = world.clock.minute_of_sim
            for room_id, bank in world.lights.items():
                occupied = world.room_occupied(room_id)
                lit = bank.state is LightStatus.ON
                if occupied:
                    assert lit, f"{room_id} occupied but dark at {t}"
                    vacant_since[room_id] = None
                elif vacant_since[room_id] is None:
                    vacant_since[room_id] = t
                if was_lit[room_id] and not lit:
                    switch_offs.append(t - vacant_since[room_id])
                if lit and not occupied:
                    assert t - vacant_since[room_id] < 20, f"{room_id} lit too long at {t}"
                was_lit[room_id] = lit
                assert bank.power_w in (0.0, 60.0)

            for computer in world.computers.values():
                assert computer.power_w in (0.0, 25.0, 70.0)

            for user_id, user in world.users.items():
                if user.state.mode is WorkMode.WORKING_WITH_COMPUTER:
                    assert world.computers[user.computer_id].state is ComputerStatus.ON
                in_other_room = user.state.activity is Activity.IN_OTHER_ROOMS
                if in_other_room and user_id not in entered_other_room:
                    entered_other_room[user_id] = t
                elif not in_other_room and user_id in entered_other_room:
                    stays.append(t - entered_other_room.pop(user_id))

        simulate(scenario, default_plan, observer=observe)
        assert switch_offs and set(switch_offs) == {20}
        assert stays and min(stays) >= 1 and max(stays) <= 10


class TestBuildWorld:
    """Rosters must fit the plan."""

    def test_roster_is_copied(self, small_plan):
        roster, network = prepare_inputs(Scenario(seed=1), small_plan, PAIR)
        before = roster[0].awareness
        world = build_world(Scenario(), small_plan, roster, network)
        world.users[0].awareness = before + 1.0
        assert world.users[0] is not roster[0]
        assert roster[0].awareness == before

    def test_staff_strategy_only_switches_offices(self, small_plan):
        world = build_world(Scenario(lighting_strategy="staff_controlled"), small_plan, [], complete_network(0))
        assert world.lights["office-1"].control.value == "staff_switched"
        assert world.lights["corridor-1"].control.value == "sensor_automated"
        assert world.light_state("kitchen-L01").state is LightStatus.OFF

    def test_user_outside_the_plan(self, small_plan, make_user):
        with pytest.raises(InconsistentState):
            build_world(Scenario(), small_plan, [make_user(office_id="office-9")], complete_network(1))

    def test_shared_computer(self, small_plan, make_user):
        roster = [make_user(user_id=0), make_user(user_id=1)]
        with pytest.raises(InconsistentState):
            build_world(Scenario(), small_plan, roster, complete_network(2))

    def test_small_roster_gets_complete_network(self):
        network = build_network(Scenario().network, 5, seed=1)
        assert network.edge_count == 10


class TestReplications:
    """Replications are independent runs with derived seeds."""

    def test_single_replication_matches_direct_run(self, small_plan):
        scenario = Scenario(horizon_days=1)
        (series,) = run_replications(scenario, 1, seed_base=5, plan=small_plan, population=PAIR)
        seed = derive_replication_seed(5, 0)
        direct, _ = simulate(scenario.model_copy(update={"seed": seed}), small_plan, PAIR)
        assert series.seed == seed
        assert np.array_equal(series.total_w, direct.total_w)

    def test_results_in_index_order(self, small_plan):
        scenario = Scenario(horizon_days=1)
        batch = run_replications(scenario, 3, seed_base=2, plan=small_plan, population=PAIR)
        assert [s.seed for s in batch] == [derive_replication_seed(2, i) for i in range(3)]

    def test_needs_a_replication(self, small_plan):
        with pytest.raises(InvalidParams):
            run_replications(Scenario(), 0, plan=small_plan)

    def test_reverse_order_gives_the_same_runs(self, small_plan):
        scenario = Scenario(horizon_days=2, contact_rate=4.0)
        batch = run_replications(scenario, 3, seed_base=4, plan=small_plan, population=PAIR, workers=1)
        backwards = {}
        for seed in reversed(replication_seeds(4, 3)):
            series, _ = simulate(scenario.model_copy(update={"seed": seed}), small_plan, PAIR)
            backwards[seed] = series
        for series in batch:
            assert np.array_equal(series.total_w, backwards[series.seed].total_w)


class TestAgentIndependence:
    """Each agent draws from its own streams."""

    def test_roster_order_does_not_matter(self, default_plan):
        scenario = Scenario(seed=6, horizon_days=1, lighting_strategy="staff_controlled", contact_rate=4.0)
        roster, network = prepare_inputs(scenario, default_plan)
        shuffled = list(roster)
        np.random.default_rng(0).shuffle(shuffled)
        series, log = run(scenario, default_plan, roster, network)
        again, again_log = run(scenario, default_plan, shuffled, network)
        assert np.array_equal(series.total_w, again.total_w)
        assert log.events == again_log.events

    def test_removing_a_user_only_touches_its_own_trail(self, default_plan):
        scenario = Scenario(seed=6, horizon_days=2)
        roster, network = prepare_inputs(scenario, default_plan)
        gone = roster[17]
        _, full = run(scenario, default_plan, roster, network)
        _, reduced = run(scenario, default_plan, [u for u in roster if u.id != gone.id], network)

        def others(log):
            return [
                e for e in log
                if (isinstance(e.agent_id, int) and e.agent_id != gone.id)
                or (e.kind in (EventKind.COMPUTER_ON, EventKind.COMPUTER_STANDBY, EventKind.COMPUTER_OFF)
                    and e.agent_id != gone.computer_id)
            ]

        visited = {gone.office_id, gone.corridor_id}
        visited |= {e.detail for e in full if e.agent_id == gone.id and e.kind is EventKind.ENTER_ROOM}
        assert any(e.agent_id == gone.id for e in full)
        assert not any(e.agent_id == gone.id for e in reduced)
        assert others(full) == others(reduced)

        def lights_elsewhere(log):
            return [e for e in log if e.kind in (EventKind.LIGHT_ON, EventKind.LIGHT_OFF) and e.detail not in visited]

        assert lights_elsewhere(full) == lights_elsewhere(reduced)
