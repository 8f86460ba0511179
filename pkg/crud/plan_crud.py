# File: crud/plan_crud.py (Building plans: load, validate, serialize, default plan, office assignment)

import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, NamedTuple, Optional, Set, Union

from config import settings
from errors import (
    DanglingApplianceRef,
    DuplicateId,
    InsufficientCapacity,
    MalformedDocument,
    OccupantInNonOffice,
)
from models import BuildingPlan, EnergyUser, Room, RoomKind
from schemas import BuildingPlanDocument, RoomDocument, read_json, validate_document
from services.random_streams import StreamPurpose, counter_stream

logger = logging.getLogger(__name__)

PlanSource = Union[BuildingPlanDocument, Dict[str, Any], str, Path]


class OfficeAssignment(NamedTuple):
    office_id: str
    computer_id: Optional[str]


def _expand_ids(room: RoomDocument, spec: Union[List[str], int], suffix: str) -> List[str]:
    if isinstance(spec, int):
        return [f"{room.id}-{suffix}{i:02d}" for i in range(1, spec + 1)]
    return list(spec)


def build_plan(document: BuildingPlanDocument, source: str = "<plan>") -> BuildingPlan:
    """Turn a validated plan document into a BuildingPlan, checking cross references."""
    seen_rooms: Set[str] = set()
    seen_appliances: Dict[str, str] = {}
    rooms: List[Room] = []

    declared: Optional[Dict[str, str]] = None
    if document.appliances is not None:
        declared = {}
        for appliance in document.appliances:
            if appliance.id in declared:
                raise DuplicateId(f"appliance '{appliance.id}' declared twice", context=source)
            declared[appliance.id] = appliance.kind

    for room_doc in document.rooms:
        if room_doc.id in seen_rooms:
            logger.warning(f"Duplicate room id in plan: {room_doc.id}")
            raise DuplicateId(f"room '{room_doc.id}' appears more than once", context=source)
        seen_rooms.add(room_doc.id)

        light_ids = _expand_ids(room_doc, room_doc.lights, "L")
        computer_ids = _expand_ids(room_doc, room_doc.computers, "C")
        if computer_ids and room_doc.kind != RoomKind.OFFICE:
            raise MalformedDocument(
                f"rooms.{room_doc.id}.computers: only offices hold computers", context=source
            )

        for kind, ids in (("light", light_ids), ("computer", computer_ids)):
            for appliance_id in ids:
                if appliance_id in seen_appliances:
                    raise DuplicateId(
                        f"appliance '{appliance_id}' placed in both '{seen_appliances[appliance_id]}' "
                        f"and '{room_doc.id}'",
                        context=source,
                    )
                if declared is not None and declared.get(appliance_id) != kind:
                    raise DanglingApplianceRef(
                        f"room '{room_doc.id}' references undeclared {kind} '{appliance_id}'", context=source
                    )
                seen_appliances[appliance_id] = room_doc.id

        rooms.append(Room(room_doc.id, room_doc.kind, tuple(light_ids), tuple(computer_ids)))

    if declared is not None:
        unplaced = sorted(set(declared) - set(seen_appliances))
        if unplaced:
            raise DanglingApplianceRef(f"appliance '{unplaced[0]}' is declared but placed in no room", context=source)

    by_id = {room.id: room for room in rooms}
    occupancy: Dict[int, str] = {}
    for occupant in document.occupants or []:
        if occupant.user_id in occupancy:
            raise DuplicateId(f"user {occupant.user_id} has more than one office", context=source)
        room = by_id.get(occupant.office_id)
        if room is None or room.kind != RoomKind.OFFICE:
            raise OccupantInNonOffice(
                f"user {occupant.user_id} is placed in '{occupant.office_id}', which is not an office",
                context=source,
            )
        occupancy[occupant.user_id] = occupant.office_id

    energy_users = document.energy_users
    if energy_users is None:
        energy_users = len(occupancy)
    elif occupancy and energy_users != len(occupancy):
        raise MalformedDocument(
            f"energy_users: {energy_users} does not match the {len(occupancy)} listed occupants", context=source
        )

    plan = BuildingPlan(
        rooms=tuple(rooms),
        occupancy=occupancy,
        energy_users=energy_users,
        base_appliances=dict(document.base_appliances),
    )
    totals = plan.totals
    logger.info(
        f"🏢 Plan loaded from {source}: {totals.rooms} rooms, {totals.lights} lights, "
        f"{totals.computers} computers, {totals.users} energy users"
    )
    return plan


def load_building_plan(source: PlanSource) -> BuildingPlan:
    """Load a plan from a path, a raw dict or an already parsed document."""
    if isinstance(source, BuildingPlanDocument):
        return build_plan(source)
    if isinstance(source, (str, Path)):
        data = read_json(source)
        return build_plan(validate_document(BuildingPlanDocument, data, source=str(source)), source=str(source))
    return build_plan(validate_document(BuildingPlanDocument, source))


def serialize_building_plan(plan: BuildingPlan) -> Dict[str, Any]:
    """Plan as a JSON-ready document with explicit appliance ids."""
    document: Dict[str, Any] = {
        "rooms": [
            {
                "id": room.id,
                "kind": room.kind.value,
                "lights": list(room.light_ids),
                "computers": list(room.computer_ids),
            }
            for room in plan.rooms
        ],
        "energy_users": plan.energy_users,
        "base_appliances": dict(plan.base_appliances),
    }
    if plan.occupancy:
        document["occupants"] = [
            {"user_id": user_id, "office_id": office_id} for user_id, office_id in sorted(plan.occupancy.items())
        ]
    return document


# --- Default plan ---

DEFAULT_OFFICES = 40
DEFAULT_CORRIDORS = ("corridor-a", "corridor-b", "corridor-c", "corridor-d")
DEFAULT_FACILITIES = ("kitchen", "toilets", "lab")
DEFAULT_ENERGY_USERS = 213
DEFAULT_BASE_APPLIANCES = {"printers": 24, "information_displays": 4}


def default_plan_document() -> Dict[str, Any]:
    """The two-floor reference building: 47 rooms, 239 lights, 180 computers."""
    rooms: List[Dict[str, Any]] = []
    for i in range(DEFAULT_OFFICES):
        rooms.append({
            "id": f"office-{i + 1:02d}",
            "kind": RoomKind.OFFICE.value,
            "lights": 5 if i < 19 else 4,
            "computers": 5 if i % 2 else 4,
        })
    for corridor_id in DEFAULT_CORRIDORS:
        rooms.append({"id": corridor_id, "kind": RoomKind.CORRIDOR.value, "lights": 12, "computers": 0})
    for facility_id in DEFAULT_FACILITIES:
        rooms.append({"id": facility_id, "kind": RoomKind.FACILITY.value, "lights": 4, "computers": 0})
    return {
        "rooms": rooms,
        "energy_users": DEFAULT_ENERGY_USERS,
        "base_appliances": dict(DEFAULT_BASE_APPLIANCES),
    }


def default_building_plan() -> BuildingPlan:
    return build_plan(validate_document(BuildingPlanDocument, default_plan_document()), source="<default plan>")


# --- Office assignment ---

def corridor_of_offices(plan: BuildingPlan) -> Dict[str, Optional[str]]:
    """Each office opens onto corridor number (office index mod corridor count)."""
    corridors = sorted(room.id for room in plan.corridors)
    offices = sorted(room.id for room in plan.offices)
    if not corridors:
        return {office_id: None for office_id in offices}
    return {office_id: corridors[i % len(corridors)] for i, office_id in enumerate(offices)}


def assign_occupants(
    plan: BuildingPlan,
    roster: Iterable[EnergyUser],
    seed: int,
    strict: Optional[bool] = None,
) -> Dict[int, OfficeAssignment]:
    """
    Give every user an office and at most one computer of that office.
    Explicit occupants in the plan win; otherwise users are shuffled by seed
    and seated desk by desk.
    """
    strict = settings.STRICT_OFFICE_CAPACITY if strict is None else strict
    users = sorted(roster, key=lambda user: user.id)
    offices = sorted(plan.offices, key=lambda room: room.id)

    if plan.occupancy:
        return _assign_explicit(plan, users)

    if users and not offices:
        raise InsufficientCapacity(f"{len(users)} users but the plan has no offices")

    desks = [
        (office.id, computer_id)
        for office in offices
        for computer_id in (sorted(office.computer_ids) or [None])
    ]
    if strict and len(users) > len(desks):
        logger.warning(f"Strict capacity: {len(users)} users for {len(desks)} desks")
        raise InsufficientCapacity(f"{len(users)} users exceed the {len(desks)} desks of the plan")

    rng = counter_stream(seed, StreamPurpose.ASSIGNMENT)
    order = rng.permutation(len(users))
    shuffled = [users[int(i)] for i in order]

    assignment: Dict[int, OfficeAssignment] = {}
    for user, (office_id, computer_id) in zip(shuffled, desks):
        assignment[user.id] = OfficeAssignment(office_id, computer_id)

    overflow = shuffled[len(desks):]
    for i, user in enumerate(overflow):
        assignment[user.id] = OfficeAssignment(offices[i % len(offices)].id, None)
    if overflow:
        logger.info(f"🪑 {len(overflow)} users seated without a computer across {len(offices)} offices")

    return assignment


def _assign_explicit(plan: BuildingPlan, users: List[EnergyUser]) -> Dict[int, OfficeAssignment]:
    assignment: Dict[int, OfficeAssignment] = {}
    free: Dict[str, List[str]] = {room.id: sorted(room.computer_ids) for room in plan.offices}
    for user in users:
        office_id = plan.occupancy.get(user.id)
        if office_id is None:
            raise MalformedDocument(f"user {user.id} has no entry in the plan's occupants")
        computers = free[office_id]
        assignment[user.id] = OfficeAssignment(office_id, computers.pop(0) if computers else None)
    return assignment


def apply_assignment(
    plan: BuildingPlan,
    roster: Iterable[EnergyUser],
    assignment: Dict[int, OfficeAssignment],
) -> List[EnergyUser]:
    """Write offices, computers and corridors onto the roster and return it sorted by id."""
    corridors = corridor_of_offices(plan)
    users = sorted(roster, key=lambda user: user.id)
    for user in users:
        seat = assignment.get(user.id)
        if seat is None:
            raise InsufficientCapacity(f"user {user.id} was not given an office")
        user.office_id = seat.office_id
        user.computer_id = seat.computer_id
        user.corridor_id = corridors.get(seat.office_id)
    return users
