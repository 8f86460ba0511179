# File: services/engine_service.py (World state, the per-tick pipeline and replication control)

import copy
import logging
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, DefaultDict, Dict, Iterable, List, Optional, Set, Tuple

import numpy as np

from config import settings
from crud.plan_crud import apply_assignment, assign_occupants, default_building_plan
from crud.population_crud import generate_population
from errors import InconsistentState, InvalidParams, RuntimeInconsistency, SimulationError
from models import (
    COMPUTER_POWER_W,
    COMPUTER_REQUESTS,
    COMPUTER_STATE_EVENTS,
    LIGHT_RATED_W,
    LIGHT_STATE_EVENTS,
    MINUTES_PER_DAY,
    Activity,
    BehaviorEvent,
    BuildingPlan,
    Category,
    ComputerState,
    ComputerStatus,
    EnergyUser,
    EventKind,
    EventLog,
    LeaveKind,
    LightControl,
    LightState,
    LightStatus,
    MeterSeries,
    RoomKind,
    SimTime,
    UserState,
)
from schemas import LightingStrategy, NetworkDocument, NetworkParams, PopulationSpec, Scenario, load_document
from services.behavior_service import WorldView, sample_daily_schedule, step_computer, step_light, step_user
from services.metering_service import build_meter_series, instantaneous_power
from services.random_streams import StreamFactory, StreamPurpose, derive_replication_seed, derive_seed
from services.social_service import (
    SocialNetwork,
    apply_contact,
    build_small_world,
    complete_network,
    contact_due_tick,
    emit_contacts,
    network_from_document,
    reset_contact_clock,
)

logger = logging.getLogger(__name__)

Observer = Callable[["WorldState"], None]


@dataclass
class WorldState:
    clock: SimTime
    plan: BuildingPlan
    users: Dict[int, EnergyUser]
    # One light bank per room: every light of a room shares its state
    lights: Dict[str, LightState]
    computers: Dict[str, ComputerState]
    network: SocialNetwork
    occupancy: Dict[str, int]
    events: EventLog
    view: WorldView
    light_room: Dict[str, str] = field(default_factory=dict)

    def light_state(self, light_id: str) -> LightState:
        return self.lights[self.light_room[light_id]]

    def room_occupied(self, room_id: str) -> bool:
        return self.occupancy.get(room_id, 0) > 0


def build_world(scenario: Scenario, plan: BuildingPlan, roster: Iterable[EnergyUser],
                network: SocialNetwork) -> WorldState:
    """Fresh world at the start of a run. The roster is copied; callers' users are never touched."""
    users: Dict[int, EnergyUser] = {}
    owners: Dict[str, int] = {}
    for source in sorted(roster, key=lambda user: user.id):
        if source.id in users:
            raise InconsistentState(f"user {source.id} appears twice in the roster")
        user = copy.deepcopy(source)
        user.state = UserState()
        user.today = None
        user.office_minutes = 0
        user.office_entered_tick = None
        user.next_contact_minute = None
        user.wake_tick = None

        if user.office_id is None or not plan.has_room(user.office_id) or plan.room(user.office_id).kind != RoomKind.OFFICE:
            raise InconsistentState(f"user {user.id} has no office in this plan ({user.office_id!r})")
        if user.computer_id is not None:
            if user.computer_id not in plan.room(user.office_id).computer_ids:
                raise InconsistentState(f"user {user.id} owns {user.computer_id}, which is not in {user.office_id}")
            if user.computer_id in owners:
                raise InconsistentState(f"computer {user.computer_id} has two owners")
            owners[user.computer_id] = user.id
        if user.corridor_id is not None and not plan.has_room(user.corridor_id):
            raise InconsistentState(f"user {user.id} uses unknown corridor {user.corridor_id}")
        users[user.id] = user

    staff = scenario.lighting_strategy is LightingStrategy.STAFF_CONTROLLED
    lights: Dict[str, LightState] = {}
    light_room: Dict[str, str] = {}
    for room in plan.rooms:
        control = LightControl.STAFF_SWITCHED if staff and room.kind == RoomKind.OFFICE else LightControl.SENSOR_AUTOMATED
        lights[room.id] = LightState(LightStatus.OFF, control, 0)
        for light_id in room.light_ids:
            light_room[light_id] = room.id

    computers = {
        pc_id: ComputerState(pc_id, owners.get(pc_id), ComputerStatus.OFF)
        for pc_id in sorted(plan.computer_ids)
    }
    view = WorldView(
        facility_ids=tuple(sorted(room.id for room in plan.facilities)),
        room_computers={room.id: frozenset(room.computer_ids) for room in plan.offices},
    )
    if users and not view.facility_ids and scenario.behavior.excursions_per_day > 0:
        logger.warning("⚠️ Plan has no facility rooms; users will make no excursions")

    return WorldState(
        clock=SimTime(-scenario.warmup_days * MINUTES_PER_DAY),
        plan=plan,
        users=users,
        lights=lights,
        computers=computers,
        network=network,
        occupancy={room.id: 0 for room in plan.rooms},
        events=EventLog(),
        view=view,
        light_room=light_room,
    )


class SimulationRun:
    """One run of the tick pipeline: contacts, users, computers, lights, meter."""

    def __init__(self, world: WorldState, scenario: Scenario, observer: Optional[Observer] = None):
        self.world = world
        self.scenario = scenario
        self.observer = observer
        self.streams = StreamFactory(scenario.seed)
        self.params = scenario.behavior

        self.wake: DefaultDict[int, List[int]] = defaultdict(list)
        self.contact_due: DefaultDict[int, List[int]] = defaultdict(list)
        self.behavior_rng: Dict[int, np.random.Generator] = {}
        self.clock_rng: Dict[int, np.random.Generator] = {}
        self.recipient_rng: Dict[int, np.random.Generator] = {}
        # Automated rooms that are vacant but still lit
        self.counting_down: Set[str] = set()
        self.room_index = {room.id: i for i, room in enumerate(world.plan.rooms)}

        self.lights_on = 0
        self.computers_on = 0
        self.computers_standby = 0

        horizon = scenario.horizon_ticks
        self.lights_w = np.zeros(horizon)
        self.computers_w = np.zeros(horizon)

    # --- bookkeeping ---

    def _log(self, event: BehaviorEvent) -> None:
        if event.tick >= 0:
            self.world.events.append(event)

    def _check_counters(self, t: int) -> None:
        _, per_category = instantaneous_power(self.world, 0.0)
        expected_lights = LIGHT_RATED_W * self.lights_on
        expected_computers = (COMPUTER_POWER_W[ComputerStatus.ON] * self.computers_on
                              + COMPUTER_POWER_W[ComputerStatus.STANDBY] * self.computers_standby)
        if per_category[Category.LIGHTS] != expected_lights or per_category[Category.COMPUTERS] != expected_computers:
            logger.error(f"Power tallies drifted at tick {t}: {per_category} vs {expected_lights}/{expected_computers}")
            raise InconsistentState("appliance power tallies disagree with appliance states", context=f"tick {t}")

    def _snapshot(self, t: int) -> None:
        """Record appliances left on by the warm-up as events at the first recorded tick."""
        for room in self.world.plan.rooms:
            if self.world.lights[room.id].state is LightStatus.ON:
                for light_id in room.light_ids:
                    self._log(BehaviorEvent(t, light_id, EventKind.LIGHT_ON, "initial"))
        for pc_id, computer in self.world.computers.items():
            if computer.state is not ComputerStatus.OFF:
                self._log(BehaviorEvent(t, pc_id, COMPUTER_STATE_EVENTS[computer.state], "initial"))

    # --- day start ---

    def _begin_day(self, t: int) -> None:
        day = t // MINUTES_PER_DAY
        self.streams.forget_day(day - 1)
        contact_rate = self.scenario.contact_rate
        for user_id, user in self.world.users.items():
            if user.state.activity is not Activity.OUT_OF_SCHOOL:
                logger.warning(f"User {user_id} still in the building at the start of day {day}; keeping yesterday's plan")
                continue
            rng = self.streams.user_day(user_id, day)
            self.behavior_rng[user_id] = rng
            user.state = UserState()
            user.office_entered_tick = None
            user.today = sample_daily_schedule(user, day, rng, self.params)
            user.wake_tick = user.today.arrival if user.today is not None else None
            if user.wake_tick is not None:
                self.wake[user.wake_tick].append(user_id)
            if contact_rate > 0:
                self.clock_rng[user_id] = self.streams.user_day(user_id, day, StreamPurpose.CONTACT_CLOCK)
                self.recipient_rng[user_id] = self.streams.user_day(user_id, day, StreamPurpose.CONTACT_RECIPIENT)
                reset_contact_clock(user, contact_rate, self.clock_rng[user_id], self.params.working_minutes_per_day)
        self._check_counters(t)

    # --- phases ---

    def _contacts(self, t: int) -> None:
        due = self.contact_due.pop(t, None)
        if not due:
            return
        users = self.world.users
        for user_id in sorted(set(due)):
            sender = users[user_id]
            if contact_due_tick(sender) != t:
                continue
            sent = emit_contacts(
                sender, self.scenario.contact_rate, t, self.world.network, self.clock_rng[user_id],
                recipient_rng=self.recipient_rng[user_id], working_minutes=self.params.working_minutes_per_day,
            )
            for contact in sent:
                recipient = users.get(contact.recipient)
                if recipient is None:
                    continue
                apply_contact(recipient, self.scenario.awareness_delta)
                self._log(BehaviorEvent(t, user_id, EventKind.EMAIL, f"to={contact.recipient}"))
            next_due = contact_due_tick(sender)
            if next_due is not None:
                self.contact_due[next_due].append(user_id)

    def _users(self, t: int, clock: SimTime, touched: Set[str], departures: Dict[str, float],
               requests: Dict[str, BehaviorEvent]) -> None:
        due = self.wake.pop(t, None)
        if not due:
            return
        world = self.world
        for user_id in sorted(set(due)):
            user = world.users[user_id]
            if user.wake_tick != t:
                continue
            old_room = user.state.room_id
            was_in_office = user.state.activity is Activity.IN_OWN_OFFICE
            try:
                events = step_user(user, clock, world.view, self.scenario, self.behavior_rng[user_id])
            except SimulationError as e:
                logger.error(f"Step failed for user {user_id} at tick {t}: {e}", exc_info=True)
                raise RuntimeInconsistency(e.detail, context=f"tick {t}, user {user_id}") from e

            new_room = user.state.room_id
            if new_room != old_room:
                if old_room is not None:
                    world.occupancy[old_room] -= 1
                    touched.add(old_room)
                if new_room is not None:
                    world.occupancy[new_room] += 1
                    touched.add(new_room)

            for event in events:
                if event.kind in COMPUTER_REQUESTS:
                    requests[event.detail] = event
                elif (event.kind is EventKind.LEAVE_OFFICE and event.detail == LeaveKind.LONG.value
                      and old_room is not None and world.occupancy[old_room] == 0):
                    departures[old_room] = user.awareness
                self._log(event)

            if self.scenario.contact_rate > 0 and not was_in_office and user.state.activity is Activity.IN_OWN_OFFICE:
                next_due = contact_due_tick(user)
                if next_due is not None:
                    self.contact_due[next_due].append(user_id)
            if user.wake_tick is not None:
                self.wake[user.wake_tick].append(user_id)

    def _computers(self, t: int, requests: Dict[str, BehaviorEvent]) -> None:
        computers = self.world.computers
        for pc_id in sorted(requests):
            computer = computers.get(pc_id)
            if computer is None:
                raise RuntimeInconsistency(f"request for unknown computer {pc_id}", context=f"tick {t}")
            try:
                updated = step_computer(computer, requests[pc_id])
            except SimulationError as e:
                raise RuntimeInconsistency(e.detail, context=f"tick {t}, computer {pc_id}") from e
            if updated.state is computer.state:
                continue
            self._count_computer(computer.state, -1)
            self._count_computer(updated.state, +1)
            computers[pc_id] = updated
            self._log(BehaviorEvent(t, pc_id, COMPUTER_STATE_EVENTS[updated.state], str(updated.owner)))

    def _count_computer(self, state: ComputerStatus, step: int) -> None:
        if state is ComputerStatus.ON:
            self.computers_on += step
        elif state is ComputerStatus.STANDBY:
            self.computers_standby += step

    def _lights(self, t: int, touched: Set[str], departures: Dict[str, float]) -> None:
        world = self.world
        for room_id in sorted(touched | self.counting_down):
            room = world.plan.room(room_id)
            bank = world.lights[room_id]
            occupied = world.occupancy[room_id] > 0
            awareness = departures.get(room_id)
            rng = None
            if awareness is not None and bank.control is LightControl.STAFF_SWITCHED:
                rng = self.streams.room_tick(self.room_index[room_id], t)
            updated = step_light(bank, occupied, awareness, self.scenario, rng)
            world.lights[room_id] = updated

            if updated.state is not bank.state:
                self.lights_on += len(room.light_ids) if updated.state is LightStatus.ON else -len(room.light_ids)
                kind = LIGHT_STATE_EVENTS[updated.state]
                for light_id in room.light_ids:
                    self._log(BehaviorEvent(t, light_id, kind, room_id))

            if (not occupied and updated.state is LightStatus.ON
                    and updated.control is LightControl.SENSOR_AUTOMATED):
                self.counting_down.add(room_id)
            else:
                self.counting_down.discard(room_id)

    # --- main loop ---

    def execute(self) -> Tuple[MeterSeries, EventLog]:
        scenario = self.scenario
        start = -scenario.warmup_days * MINUTES_PER_DAY
        horizon = scenario.horizon_ticks
        on_w = COMPUTER_POWER_W[ComputerStatus.ON]
        standby_w = COMPUTER_POWER_W[ComputerStatus.STANDBY]

        logger.info(
            f"▶️ Run seed={scenario.seed} days={scenario.horizon_days} lighting={scenario.lighting_strategy.value} "
            f"contact_rate={scenario.contact_rate} users={len(self.world.users)}"
        )
        for t in range(start, horizon):
            clock = SimTime(t)
            self.world.clock = clock
            if t % MINUTES_PER_DAY == 0:
                self._begin_day(t)
            if t == 0 and start < 0:
                self._snapshot(t)

            touched: Set[str] = set()
            departures: Dict[str, float] = {}
            requests: Dict[str, BehaviorEvent] = {}

            if scenario.contact_rate > 0:
                self._contacts(t)
            self._users(t, clock, touched, departures, requests)
            if requests:
                self._computers(t, requests)
            if touched or self.counting_down:
                self._lights(t, touched, departures)

            if t >= 0:
                self.lights_w[t] = LIGHT_RATED_W * self.lights_on
                self.computers_w[t] = on_w * self.computers_on + standby_w * self.computers_standby
            if self.observer is not None:
                self.observer(self.world)

        self._check_counters(horizon)
        self.world.events.horizon_ticks = horizon
        series = build_meter_series(scenario.base_load_w, self.lights_w, self.computers_w, seed=scenario.seed)
        logger.info(
            f"⏹️ Run seed={scenario.seed} done: {series.half_hourly.total_wh.sum() / 1000.0:.1f} kWh, "
            f"{len(self.world.events)} events"
        )
        return series, self.world.events


def run(
    scenario: Scenario,
    plan: BuildingPlan,
    roster: Iterable[EnergyUser],
    network: SocialNetwork,
    *,
    observer: Optional[Observer] = None,
) -> Tuple[MeterSeries, EventLog]:
    """Simulate the scenario's horizon (after any warm-up) and return the meter series and event log."""
    world = build_world(scenario, plan, roster, network)
    return SimulationRun(world, scenario, observer).execute()


# --- Inputs and replications ---

def build_network(params: NetworkParams, n_users: int, seed: int) -> SocialNetwork:
    if params.edges_file:
        document = load_document(NetworkDocument, params.edges_file)
        if document.n != n_users:
            raise InvalidParams(f"network has {document.n} nodes for {n_users} users", context=params.edges_file)
        return network_from_document(document)
    if n_users <= 2 * params.k:
        logger.info(f"Roster of {n_users} is too small for a k={params.k} ring; everyone is connected")
        return complete_network(n_users)
    return build_small_world(n_users, params.k, params.p_rewire, derive_seed(seed, StreamPurpose.NETWORK))


def prepare_inputs(
    scenario: Scenario,
    plan: BuildingPlan,
    population: Optional[PopulationSpec] = None,
) -> Tuple[List[EnergyUser], SocialNetwork]:
    """Roster (seated in the plan) and contact network for the scenario's seed."""
    population = population or PopulationSpec(n_users=plan.energy_users)
    roster = generate_population(population, scenario.seed)
    roster = apply_assignment(plan, roster, assign_occupants(plan, roster, scenario.seed))
    network = build_network(scenario.network, len(roster), scenario.seed)
    return roster, network


def simulate(
    scenario: Scenario,
    plan: BuildingPlan,
    population: Optional[PopulationSpec] = None,
    *,
    observer: Optional[Observer] = None,
) -> Tuple[MeterSeries, EventLog]:
    roster, network = prepare_inputs(scenario, plan, population)
    return run(scenario, plan, roster, network, observer=observer)


def _replicate(job: Tuple[Scenario, BuildingPlan, Optional[PopulationSpec]]) -> MeterSeries:
    scenario, plan, population = job
    series, _ = simulate(scenario, plan, population)
    return series


def replication_seeds(seed_base: int, n_reps: int) -> List[int]:
    return [derive_replication_seed(seed_base, i) for i in range(n_reps)]


def run_replications(
    scenario: Scenario,
    n_reps: int,
    seed_base: Optional[int] = None,
    *,
    plan: Optional[BuildingPlan] = None,
    population: Optional[PopulationSpec] = None,
    workers: Optional[int] = None,
) -> List[MeterSeries]:
    """Replication i runs with the seed derived from (seed_base, i); results come back in index order."""
    if n_reps < 1:
        raise InvalidParams(f"n_reps must be >= 1 (got {n_reps})")
    seed_base = scenario.seed if seed_base is None else seed_base
    plan = plan or default_building_plan()
    workers = settings.REPLICATION_WORKERS if workers is None else workers

    jobs = [
        (scenario.model_copy(update={"seed": seed}), plan, population)
        for seed in replication_seeds(seed_base, n_reps)
    ]
    logger.info(f"🔁 {n_reps} replications from seed base {seed_base} on {workers} worker(s)")
    if workers > 1 and n_reps > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_replicate, jobs))
    return [_replicate(job) for job in jobs]
