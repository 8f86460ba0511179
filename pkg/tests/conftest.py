# tests/conftest.py
import numpy as np
import pytest

from crud.plan_crud import build_plan, default_building_plan
from models import AwarenessKind, DailySchedule, EnergyUser, WorkKind
from schemas import BuildingPlanDocument, Scenario
from services.behavior_service import WorldView
from services.engine_service import simulate

SMALL_PLAN = {
    "rooms": [
        {"id": "office-1", "kind": "office", "lights": 2, "computers": ["pc-1", "pc-2"]},
        {"id": "corridor-1", "kind": "corridor", "lights": 3},
        {"id": "kitchen", "kind": "facility", "lights": 1},
    ],
    "energy_users": 2,
}


@pytest.fixture
def small_plan_document() -> dict:
    """A one-office building: two computers, one corridor, one kitchen."""
    return {
        "rooms": [dict(room) for room in SMALL_PLAN["rooms"]],
        "energy_users": SMALL_PLAN["energy_users"],
    }


@pytest.fixture
def small_plan(small_plan_document):
    return build_plan(BuildingPlanDocument.model_validate(small_plan_document))


@pytest.fixture(scope="session")
def default_plan():
    return default_building_plan()


@pytest.fixture
def scenario():
    """Factory for scenarios with keyword overrides."""
    def _scenario(**overrides) -> Scenario:
        return Scenario.model_validate(overrides)
    return _scenario


@pytest.fixture
def make_user():
    """Factory for a seated energy user."""
    def _make_user(
        user_id: int = 0,
        awareness: float = 50.0,
        work_kind: WorkKind = WorkKind.TIMETABLE_COMPLIER,
        awareness_kind: AwarenessKind = AwarenessKind.REGULAR_USER,
        office_id: str = "office-1",
        computer_id="pc-1",
        corridor_id: str = "corridor-1",
        today: DailySchedule = None,
    ) -> EnergyUser:
        return EnergyUser(
            id=user_id,
            work_kind=work_kind,
            awareness_kind=awareness_kind,
            awareness=awareness,
            office_id=office_id,
            computer_id=computer_id,
            corridor_id=corridor_id,
            today=today,
        )
    return _make_user


@pytest.fixture
def world_view():
    return WorldView(facility_ids=("kitchen",), room_computers={"office-1": frozenset({"pc-1", "pc-2"})})


@pytest.fixture(scope="session")
def automated_week(default_plan):
    """One default week, automated lighting, seed 1: (scenario, series, log)."""
    scenario = Scenario(seed=1)
    series, log = simulate(scenario, default_plan)
    return scenario, series, log


@pytest.fixture(scope="session")
def staff_week(default_plan):
    """The same week under staff-controlled lighting."""
    scenario = Scenario(seed=1, lighting_strategy="staff_controlled")
    series, log = simulate(scenario, default_plan)
    return scenario, series, log


class ScriptedRng:
    """Stands in for a Generator: hands out the given uniforms, then a default."""

    def __init__(self, *values: float, default: float = 0.5):
        self.values = list(values)
        self.default = default
        self.calls = 0

    def _next(self) -> float:
        self.calls += 1
        return self.values.pop(0) if self.values else self.default

    def random(self, size=None):
        if size is None:
            return self._next()
        return np.array([self._next() for _ in range(size)])


@pytest.fixture
def scripted_rng():
    return ScriptedRng
